#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "rancor/errors.hpp"

namespace rancor {

struct Dims {
    int nx = 0;
    int ny = 0;
    int nz = 0;

    bool operator==(const Dims&) const = default;
    std::size_t voxels() const { return std::size_t(nx) * ny * nz; }
    int operator[](int axis) const { return axis == 0 ? nx : (axis == 1 ? ny : nz); }
    std::string str() const;
};

// 3D scalar field on a regular voxel grid. Data is x-fastest:
// index(x,y,z) = x + nx*(y + ny*z). Spacing is metadata only.
struct ScalarVolume {
    Dims dims;
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    std::vector<double> data;

    ScalarVolume() = default;
    explicit ScalarVolume(Dims d, double fill = 0.0)
        : dims(d), data(d.voxels(), fill) {}

    std::size_t index(int x, int y, int z) const {
        return std::size_t(x) + std::size_t(dims.nx) * (std::size_t(y) + std::size_t(dims.ny) * z);
    }
    double& at(int x, int y, int z) { return data[index(x, y, z)]; }
    double at(int x, int y, int z) const { return data[index(x, y, z)]; }
};

// Three scalar components per voxel, same layout as ScalarVolume.
// Used for displacement fields, image gradients and TV dual fields.
struct VectorField {
    Dims dims;
    std::array<std::vector<double>, 3> comp;

    VectorField() = default;
    explicit VectorField(Dims d) : dims(d) {
        for (auto& c : comp) c.assign(d.voxels(), 0.0);
    }
};

using DisplacementField = VectorField;

// Integer-labeled segmentation volume; label 0 is background.
struct LabelVolume {
    Dims dims;
    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    std::vector<std::int32_t> data;

    LabelVolume() = default;
    explicit LabelVolume(Dims d, std::int32_t fill = 0)
        : dims(d), data(d.voxels(), fill) {}

    std::size_t index(int x, int y, int z) const {
        return std::size_t(x) + std::size_t(dims.nx) * (std::size_t(y) + std::size_t(dims.ny) * z);
    }
    std::int32_t& at(int x, int y, int z) { return data[index(x, y, z)]; }
    std::int32_t at(int x, int y, int z) const { return data[index(x, y, z)]; }
};

void require_same_dims(const Dims& a, const Dims& b, const char* where);

// Trilinear interpolation with clamp-to-edge; total on finite inputs.
double sample_trilinear(const ScalarVolume& vol, double px, double py, double pz);

// out(x) = vol(x + disp(x)), trilinear.
ScalarVolume warp_scalar(const ScalarVolume& vol, const DisplacementField& disp);

// Nearest-neighbor label transport, out-of-range clamped.
LabelVolume warp_nearest(const LabelVolume& vol, const DisplacementField& disp);

// Central differences in the interior, one-sided at the boundary.
VectorField gradient_central(const ScalarVolume& vol);

// Forward differences with zero at the far boundary (Neumann).
VectorField grad_forward(const ScalarVolume& vol);

// Exact negative adjoint of grad_forward: <grad u, q> = -<u, div q>.
ScalarVolume div_backward(const VectorField& v);

// Gaussian blur (sigma = 1 voxel, truncated at 3 sigma, renormalized at
// boundaries) followed by factor-2 decimation; output dims = ceil(n/2).
ScalarVolume downsample(const ScalarVolume& vol);

// Trilinear resample of each component onto the finer grid, scaled by the
// per-axis size ratio so displacements stay in target-grid voxel units.
DisplacementField upsample_displacement(const DisplacementField& disp, Dims new_dims);

// pyramid[levels-1] is the input; pyramid[l-1] = downsample(pyramid[l]).
std::vector<ScalarVolume> build_pyramid(const ScalarVolume& vol, int levels);

// Sum over components of the per-voxel Euclidean norm of grad_forward.
double total_variation(const DisplacementField& u);

double mean_displacement_norm(const DisplacementField& u);

} // namespace rancor
