#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "rancor/volume.hpp"

namespace rancor {

std::vector<std::uint8_t> nonzero_mask(const ScalarVolume& vol);

// Clip in-mask intensities to their [1st, 99th] percentiles, then shift
// and scale so the clipped in-mask values have mean 0 and unit standard
// deviation. Out-of-mask voxels are set to the transformed floor.
// mask == nullptr means all voxels are in-mask.
ScalarVolume normalize_robust(const ScalarVolume& vol,
                              const std::vector<std::uint8_t>* mask = nullptr);

// Row-major 4x4 matrix from whitespace-separated text (FLIRT-style).
std::array<double, 16> parse_affine_text(const std::string& text);

std::array<double, 16> invert_affine(const std::array<double, 16>& m);

// Resample vol through the matrix: out(x) = vol(inv(M) * x), trilinear.
ScalarVolume apply_affine(const ScalarVolume& vol, const std::array<double, 16>& matrix);

} // namespace rancor
