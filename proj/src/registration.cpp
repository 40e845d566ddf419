#include "rancor/registration.hpp"

#include <cmath>
#include <cstdio>

namespace rancor {

namespace {

double level_energy(const ScalarVolume& fixed, const ScalarVolume& moving,
                    const DisplacementField& u, double alpha, double* sad_out, double* tv_out) {
    const double sad = sad_energy(warp_scalar(moving, u), fixed);
    const double tv = total_variation(u);
    if (sad_out) *sad_out = sad;
    if (tv_out) *tv_out = tv;
    return sad + alpha * tv;
}

} // namespace

DisplacementField warp_loop(const ScalarVolume& level_fixed, const ScalarVolume& level_moving,
                            const DisplacementField& u_in, const RegistrationParams& params,
                            const PointwiseMetric& metric, LevelDiagnostics* diag) {
    require_same_dims(level_fixed.dims, level_moving.dims, "warp_loop");
    require_same_dims(level_fixed.dims, u_in.dims, "warp_loop");
    const Dims dims = level_fixed.dims;
    const std::size_t n = dims.voxels();

    DisplacementField u = u_in;
    double energy = level_energy(level_fixed, level_moving, u, params.alpha, nullptr, nullptr);

    for (int k = 0; k < params.warps_per_level; ++k) {
        const Linearization lin = metric.linearize(level_moving, level_fixed, u);
        SolverParams sp = params.solver();
        auto [h, sdiag] = solve_subproblem(lin, u, sp);

        // accept the largest backtracking scale that does not increase the
        // level energy; the GN surrogate alone does not guarantee descent
        double accepted_scale = 0.0;
        DisplacementField u_next = u;
        double next_energy = energy, next_sad = 0.0, next_tv = 0.0;
        for (double scale : {1.0, 0.5, 0.25, 0.125}) {
            DisplacementField trial(dims);
            for (int c = 0; c < 3; ++c)
                for (std::size_t v = 0; v < n; ++v)
                    trial.comp[c][v] = u.comp[c][v] + scale * h.comp[c][v];
            double sad = 0, tv = 0;
            const double e = level_energy(level_fixed, level_moving, trial, params.alpha, &sad, &tv);
            if (e <= energy) {
                accepted_scale = scale;
                u_next = std::move(trial);
                next_energy = e;
                next_sad = sad;
                next_tv = tv;
                break;
            }
        }

        if (accepted_scale == 0.0) {
            // no scale improves the true energy; keep the current field
            if (diag) {
                double sad = 0, tv = 0;
                const double e = level_energy(level_fixed, level_moving, u, params.alpha, &sad, &tv);
                diag->warps.push_back({sdiag.iterations, sdiag.converged, sad, tv, e, 0.0, 0.0});
            }
            break;
        }

        u = std::move(u_next);
        energy = next_energy;

        DisplacementField h_scaled(dims);
        for (int c = 0; c < 3; ++c)
            for (std::size_t v = 0; v < n; ++v) h_scaled.comp[c][v] = accepted_scale * h.comp[c][v];
        const double mean_h = mean_displacement_norm(h_scaled);

        if (diag) {
            diag->warps.push_back({sdiag.iterations, sdiag.converged, next_sad, next_tv, energy,
                                   accepted_scale, mean_h});
        }
        if (mean_h < params.eps_h) break;
    }
    return u;
}

DisplacementField compose_total_update(const std::vector<DisplacementField>& h_list) {
    if (h_list.empty()) return DisplacementField{};
    const Dims dims = h_list.front().dims;
    DisplacementField total(dims);
    for (const DisplacementField& h : h_list) {
        require_same_dims(dims, h.dims, "compose_total_update");
        for (int c = 0; c < 3; ++c)
            for (std::size_t v = 0; v < dims.voxels(); ++v) total.comp[c][v] += h.comp[c][v];
    }
    return total;
}

RegistrationResult register_volumes(const ScalarVolume& fixed, const ScalarVolume& moving,
                                    const RegistrationParams& params,
                                    const PointwiseMetric& metric) {
    require_same_dims(fixed.dims, moving.dims, "register");
    if (params.levels < 1) throw InvalidInputError("register: levels must be >= 1");
    if (params.warps_per_level < 1) throw InvalidInputError("register: warps must be >= 1");
    if (params.alpha <= 0) throw InvalidInputError("register: alpha must be > 0");

    const std::vector<ScalarVolume> fixed_pyr = build_pyramid(fixed, params.levels);
    const std::vector<ScalarVolume> moving_pyr = build_pyramid(moving, params.levels);

    RegistrationResult result;
    result.initial_sad = sad_energy(moving, fixed);

    DisplacementField u(fixed_pyr.front().dims);
    for (int l = 0; l < params.levels; ++l) {
        if (l > 0) u = upsample_displacement(u, fixed_pyr[l].dims);
        LevelDiagnostics level_diag;
        level_diag.dims = fixed_pyr[l].dims;
        RegistrationParams level_params = params;
        level_params.verbose = false;
        u = warp_loop(fixed_pyr[l], moving_pyr[l], u, level_params, metric, &level_diag);
        if (params.verbose) {
            for (std::size_t k = 0; k < level_diag.warps.size(); ++k) {
                const WarpDiagnostics& w = level_diag.warps[k];
                std::printf("level=%d warp=%zu iters=%d sad=%.9g tv=%.9g\n", l + 1, k + 1,
                            w.solver_iterations, w.sad, w.tv);
            }
        }
        result.levels.push_back(std::move(level_diag));
    }

    result.final_sad = sad_energy(warp_scalar(moving, u), fixed);
    if (result.final_sad > result.initial_sad) {
        // never leave the caller worse off than the affine initialization
        u = DisplacementField(fixed.dims);
        result.final_sad = result.initial_sad;
        result.fallback_to_identity = true;
    }
    result.displacement = std::move(u);
    return result;
}

} // namespace rancor
