#pragma once

#include "rancor/volume.hpp"

namespace rancor {

// First-order expansion of the data term at the current deformation:
// residual p0 and image gradient grad_p of the warped moving image,
// with the squared gradient norm cached per voxel.
struct Linearization {
    ScalarVolume p0;
    VectorField grad_p;
    ScalarVolume grad_norm_sq;

    const Dims& dims() const { return p0.dims; }
};

// Sum of absolute intensity differences over all voxels.
double sad_energy(const ScalarVolume& moving_warped, const ScalarVolume& fixed);

// Residual (warped moving minus fixed) and warp-then-gradient image
// gradient at u_tilde.
Linearization linearize_sad(const ScalarVolume& moving, const ScalarVolume& fixed,
                            const DisplacementField& u_tilde);

// Pluggable pointwise metric contract: any metric supplies a residual
// volume and gradient field at a given deformation.
class PointwiseMetric {
public:
    virtual ~PointwiseMetric() = default;
    virtual Linearization linearize(const ScalarVolume& moving, const ScalarVolume& fixed,
                                    const DisplacementField& u_tilde) const = 0;
};

class SadMetric final : public PointwiseMetric {
public:
    Linearization linearize(const ScalarVolume& moving, const ScalarVolume& fixed,
                            const DisplacementField& u_tilde) const override {
        return linearize_sad(moving, fixed, u_tilde);
    }
};

} // namespace rancor
