#pragma once

#include <array>
#include <vector>

#include "rancor/similarity.hpp"
#include "rancor/volume.hpp"

namespace rancor {

struct SolverParams {
    double alpha = 0.30;     // TV weight
    double c = 0.2;          // augmentation constant
    double delta = 5e-4;     // stop when max_i c*mean|F_i| <= delta
    int max_iters = 220;
    double tau_q = 0.0;      // q gradient-projection step; <= 0 picks 1/(4c * active axes)
    bool verbose = false;
    bool check_constraints = false; // assert |w|<=1, |q_i|<=alpha every iteration

    void validate(const Dims& dims) const;
    double effective_tau(const Dims& dims) const;
};

// Dual solver state for one convex subproblem. The cached divergence
// fields div_q must always match q; use refresh_div_q after mutating q
// directly.
struct DualState {
    ScalarVolume w;                    // dual of the L1 data term, |w| <= 1
    std::array<VectorField, 3> q;      // dual of TV per component, |q_i| <= alpha
    std::array<ScalarVolume, 3> h;     // multipliers = displacement update
    std::array<ScalarVolume, 3> t_target; // T_i = h_i/c - div q_i
    std::array<ScalarVolume, 3> u_target; // U_i = h_i/c - w * dP_i
    std::array<ScalarVolume, 3> div_q;

    explicit DualState(Dims d);
    void refresh_div_q();
};

struct SolverDiagnostics {
    int iterations = 0;
    bool converged = false;
    std::array<double, 3> final_residuals{};
    double primal_energy = 0.0;
    double primal_energy_at_zero = 0.0;
    std::vector<double> residual_history; // max_i r_i per iteration
    std::size_t constraint_samples = 0;   // voxel-iterations checked
    bool fallback_to_zero = false;
};

struct ResidualReport {
    std::array<ScalarVolume, 3> f;   // F_i = w * dP_i + div q_i
    std::array<double, 3> r;         // r_i = c * mean |F_i|
};

// T_i = h_i/c - div q_i, closed-form w followed by clamping to [-1, 1].
void update_w(DualState& state, const Linearization& lin, const SolverParams& params);

// U_i = h_i/c - w * dP_i, one gradient step on the q subproblem followed
// by pointwise projection onto the Euclidean ball of radius alpha.
void update_q(DualState& state, const DisplacementField& u_tilde,
              const Linearization& lin, const SolverParams& params);

// h_i <- h_i - c * (w * dP_i + div q_i).
void update_h(DualState& state, const Linearization& lin, const SolverParams& params);

ResidualReport residual_fields(const DualState& state, const Linearization& lin,
                               const SolverParams& params);

// Value of the convex subproblem: sum |p0 + grad_p . h| + alpha * TV(u_tilde + h).
double primal_energy(const Linearization& lin, const DisplacementField& u_tilde,
                     const DisplacementField& h, double alpha);

// Augmented-Lagrangian loop: w, q, h updates and residual check from a
// zero-initialized state, until max_i r_i <= delta or max_iters.
std::pair<DisplacementField, SolverDiagnostics>
solve_subproblem(const Linearization& lin, const DisplacementField& u_tilde,
                 const SolverParams& params);

} // namespace rancor
