#pragma once

#include <vector>

#include "rancor/similarity.hpp"
#include "rancor/tvsolver.hpp"
#include "rancor/volume.hpp"

namespace rancor {

struct RegistrationParams {
    double alpha = 0.30;
    int levels = 3;
    int warps_per_level = 4;
    int max_iters = 220;
    double delta = 5e-4;
    double c = 0.2;
    double eps_h = 1e-3; // early exit when mean |h| per voxel drops below this
    bool verbose = false;
    bool check_constraints = false;

    SolverParams solver() const {
        SolverParams p;
        p.alpha = alpha;
        p.c = c;
        p.delta = delta;
        p.max_iters = max_iters;
        p.check_constraints = check_constraints;
        return p;
    }
};

struct WarpDiagnostics {
    int solver_iterations = 0;
    bool solver_converged = false;
    double sad = 0.0;          // data energy after accepting the update
    double tv = 0.0;           // TV of the accumulated field
    double level_energy = 0.0; // sad + alpha * tv
    double step_scale = 1.0;   // backtracking scale applied to the update
    double mean_update = 0.0;  // mean |h| of the accepted update
};

struct LevelDiagnostics {
    Dims dims;
    std::vector<WarpDiagnostics> warps;
};

struct RegistrationResult {
    DisplacementField displacement;
    std::vector<LevelDiagnostics> levels;
    double initial_sad = 0.0;
    double final_sad = 0.0;
    bool fallback_to_identity = false;
};

// Linearize, solve and accumulate warps_per_level times starting at u_in.
// Each update is accepted only at a backtracking scale that does not
// increase the level energy sad + alpha * TV.
DisplacementField warp_loop(const ScalarVolume& level_fixed, const ScalarVolume& level_moving,
                            const DisplacementField& u_in, const RegistrationParams& params,
                            const PointwiseMetric& metric, LevelDiagnostics* diag);

// Voxelwise sum of per-warp updates.
DisplacementField compose_total_update(const std::vector<DisplacementField>& h_list);

// Coarse-to-fine driver: pyramids, per-level warp loops and displacement
// upsampling between levels.
RegistrationResult register_volumes(const ScalarVolume& fixed, const ScalarVolume& moving,
                                    const RegistrationParams& params,
                                    const PointwiseMetric& metric = SadMetric{});

} // namespace rancor
