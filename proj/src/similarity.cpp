#include "rancor/similarity.hpp"

#include <cmath>

namespace rancor {

double sad_energy(const ScalarVolume& moving_warped, const ScalarVolume& fixed) {
    require_same_dims(moving_warped.dims, fixed.dims, "sad_energy");
    double s = 0.0;
    for (std::size_t i = 0; i < moving_warped.data.size(); ++i) {
        s += std::abs(moving_warped.data[i] - fixed.data[i]);
    }
    return s;
}

Linearization linearize_sad(const ScalarVolume& moving, const ScalarVolume& fixed,
                            const DisplacementField& u_tilde) {
    require_same_dims(moving.dims, fixed.dims, "linearize_sad");
    require_same_dims(moving.dims, u_tilde.dims, "linearize_sad");

    Linearization lin;
    const ScalarVolume warped = warp_scalar(moving, u_tilde);
    lin.p0 = ScalarVolume(moving.dims);
    for (std::size_t i = 0; i < warped.data.size(); ++i) {
        lin.p0.data[i] = warped.data[i] - fixed.data[i];
    }
    lin.grad_p = gradient_central(warped);
    lin.grad_norm_sq = ScalarVolume(moving.dims);
    for (std::size_t i = 0; i < warped.data.size(); ++i) {
        lin.grad_norm_sq.data[i] = lin.grad_p.comp[0][i] * lin.grad_p.comp[0][i] +
                                   lin.grad_p.comp[1][i] * lin.grad_p.comp[1][i] +
                                   lin.grad_p.comp[2][i] * lin.grad_p.comp[2][i];
    }
    return lin;
}

} // namespace rancor
