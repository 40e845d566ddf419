#include "rancor/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rancor {

std::vector<std::uint8_t> nonzero_mask(const ScalarVolume& vol) {
    std::vector<std::uint8_t> m(vol.data.size());
    for (std::size_t i = 0; i < vol.data.size(); ++i) m[i] = vol.data[i] != 0.0 ? 1 : 0;
    return m;
}

namespace {

// linear-interpolation percentile on a sorted sample
double percentile(const std::vector<double>& sorted, double p) {
    const double pos = p / 100.0 * double(sorted.size() - 1);
    const std::size_t lo = std::size_t(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double f = pos - double(lo);
    return sorted[lo] + f * (sorted[hi] - sorted[lo]);
}

} // namespace

ScalarVolume normalize_robust(const ScalarVolume& vol, const std::vector<std::uint8_t>* mask) {
    if (mask && mask->size() != vol.data.size()) {
        throw DimensionError("normalize_robust: mask size does not match volume");
    }
    std::vector<double> in_mask;
    in_mask.reserve(vol.data.size());
    for (std::size_t i = 0; i < vol.data.size(); ++i) {
        if (!mask || (*mask)[i]) in_mask.push_back(vol.data[i]);
    }
    if (in_mask.size() < 16) {
        throw InvalidInputError("normalize_robust: fewer than 16 in-mask voxels");
    }
    std::sort(in_mask.begin(), in_mask.end());
    const double p1 = percentile(in_mask, 1.0);
    const double p99 = percentile(in_mask, 99.0);

    double sum = 0.0;
    for (double v : in_mask) sum += std::clamp(v, p1, p99);
    const double mean = sum / double(in_mask.size());
    double var = 0.0;
    for (double v : in_mask) {
        const double d = std::clamp(v, p1, p99) - mean;
        var += d * d;
    }
    const double sd = std::sqrt(var / double(in_mask.size()));
    if (sd < 1e-12 * std::max(1.0, std::abs(mean))) {
        throw InvalidInputError("normalize_robust: degenerate (constant) in-mask intensities");
    }

    ScalarVolume out(vol.dims);
    out.spacing = vol.spacing;
    const double floor_value = (p1 - mean) / sd;
    for (std::size_t i = 0; i < vol.data.size(); ++i) {
        if (!mask || (*mask)[i]) {
            out.data[i] = (std::clamp(vol.data[i], p1, p99) - mean) / sd;
        } else {
            out.data[i] = floor_value;
        }
    }
    return out;
}

std::array<double, 16> parse_affine_text(const std::string& text) {
    std::istringstream is(text);
    std::array<double, 16> m;
    for (double& v : m) {
        if (!(is >> v)) throw IoError("affine matrix: expected 16 whitespace-separated numbers");
    }
    double extra;
    if (is >> extra) throw IoError("affine matrix: trailing data after 16 numbers");
    return m;
}

std::array<double, 16> invert_affine(const std::array<double, 16>& m) {
    // Gauss-Jordan on [M | I]
    double a[4][8] = {};
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) a[r][c] = m[r * 4 + c];
        a[r][4 + r] = 1.0;
    }
    for (int col = 0; col < 4; ++col) {
        int piv = col;
        for (int r = col + 1; r < 4; ++r) {
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        }
        if (std::abs(a[piv][col]) < 1e-12) {
            throw InvalidInputError("affine matrix is not invertible");
        }
        if (piv != col) std::swap_ranges(a[piv], a[piv] + 8, a[col]);
        const double d = a[col][col];
        for (int c = 0; c < 8; ++c) a[col][c] /= d;
        for (int r = 0; r < 4; ++r) {
            if (r == col) continue;
            const double f = a[r][col];
            for (int c = 0; c < 8; ++c) a[r][c] -= f * a[col][c];
        }
    }
    std::array<double, 16> inv;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) inv[r * 4 + c] = a[r][4 + c];
    return inv;
}

ScalarVolume apply_affine(const ScalarVolume& vol, const std::array<double, 16>& matrix) {
    const std::array<double, 16> inv = invert_affine(matrix);
    ScalarVolume out(vol.dims);
    out.spacing = vol.spacing;
    const Dims d = vol.dims;
#pragma omp parallel for schedule(static)
    for (int z = 0; z < d.nz; ++z) {
        for (int y = 0; y < d.ny; ++y) {
            for (int x = 0; x < d.nx; ++x) {
                const double px = inv[0] * x + inv[1] * y + inv[2] * z + inv[3];
                const double py = inv[4] * x + inv[5] * y + inv[6] * z + inv[7];
                const double pz = inv[8] * x + inv[9] * y + inv[10] * z + inv[11];
                out.at(x, y, z) = sample_trilinear(vol, px, py, pz);
            }
        }
    }
    return out;
}

} // namespace rancor
