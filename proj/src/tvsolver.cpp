#include "rancor/tvsolver.hpp"

#include <cmath>
#include <cstdio>
#include <string>

namespace rancor {

namespace {

constexpr double kDegenerateEps = 1e-8;

int active_axes(const Dims& d) {
    int a = 0;
    if (d.nx > 1) ++a;
    if (d.ny > 1) ++a;
    if (d.nz > 1) ++a;
    return a > 0 ? a : 1;
}

ScalarVolume component_volume(const VectorField& f, int c) {
    ScalarVolume v(f.dims);
    v.data = f.comp[c];
    return v;
}

void throw_if_not_finite(const std::vector<double>& v, const char* step) {
    for (double x : v) {
        if (!std::isfinite(x)) {
            throw NumericalError(std::string("non-finite value produced by ") + step);
        }
    }
}

} // namespace

void SolverParams::validate(const Dims& dims) const {
    if (alpha <= 0) throw InvalidInputError("solver: alpha must be > 0");
    if (c <= 0) throw InvalidInputError("solver: c must be > 0");
    if (delta <= 0) throw InvalidInputError("solver: delta must be > 0");
    if (max_iters < 1) throw InvalidInputError("solver: max_iters must be >= 1");
    if (tau_q > 0) {
        const double bound = 1.0 / (4.0 * c * active_axes(dims));
        if (tau_q > bound + 1e-15) {
            throw InvalidInputError("solver: tau_q exceeds the stability bound 1/(4c*axes)");
        }
    }
}

double SolverParams::effective_tau(const Dims& dims) const {
    if (tau_q > 0) return tau_q;
    return 1.0 / (4.0 * c * active_axes(dims));
}

DualState::DualState(Dims d)
    : w(d),
      q{VectorField(d), VectorField(d), VectorField(d)},
      h{ScalarVolume(d), ScalarVolume(d), ScalarVolume(d)},
      t_target{ScalarVolume(d), ScalarVolume(d), ScalarVolume(d)},
      u_target{ScalarVolume(d), ScalarVolume(d), ScalarVolume(d)},
      div_q{ScalarVolume(d), ScalarVolume(d), ScalarVolume(d)} {}

void DualState::refresh_div_q() {
    for (int i = 0; i < 3; ++i) div_q[i] = div_backward(q[i]);
}

void update_w(DualState& state, const Linearization& lin, const SolverParams& params) {
    require_same_dims(state.w.dims, lin.dims(), "update_w");
    const double c = params.c;
    const std::size_t n = state.w.data.size();

    state.refresh_div_q();
    for (int i = 0; i < 3; ++i) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t v = 0; v < std::ptrdiff_t(n); ++v) {
            state.t_target[i].data[v] = state.h[i].data[v] / c - state.div_q[i].data[v];
        }
    }

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t v = 0; v < std::ptrdiff_t(n); ++v) {
        const double denom = c * lin.grad_norm_sq.data[v];
        double w;
        if (denom < kDegenerateEps) {
            // only the linear term in w survives; take its constrained optimum
            const double p0 = lin.p0.data[v];
            w = p0 > 0 ? 1.0 : (p0 < 0 ? -1.0 : 0.0);
        } else {
            double num = lin.p0.data[v];
            for (int i = 0; i < 3; ++i) {
                num += c * lin.grad_p.comp[i][v] * state.t_target[i].data[v];
            }
            w = num / denom;
            if (w > 1.0) w = 1.0;
            if (w < -1.0) w = -1.0;
        }
        state.w.data[v] = w;
    }
}

namespace {

void update_q_impl(DualState& state, const std::array<VectorField, 3>& grad_u,
                   const Linearization& lin, const SolverParams& params) {
    const double c = params.c;
    const double alpha = params.alpha;
    const double tau = params.effective_tau(state.w.dims);
    const std::size_t n = state.w.data.size();

    for (int i = 0; i < 3; ++i) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t v = 0; v < std::ptrdiff_t(n); ++v) {
            state.u_target[i].data[v] =
                state.h[i].data[v] / c - state.w.data[v] * lin.grad_p.comp[i][v];
        }

        ScalarVolume resid(state.w.dims);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t v = 0; v < std::ptrdiff_t(n); ++v) {
            resid.data[v] = state.div_q[i].data[v] - state.u_target[i].data[v];
        }
        const VectorField step = grad_forward(resid);

#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t v = 0; v < std::ptrdiff_t(n); ++v) {
            double qx = state.q[i].comp[0][v] + tau * (c * step.comp[0][v] - grad_u[i].comp[0][v]);
            double qy = state.q[i].comp[1][v] + tau * (c * step.comp[1][v] - grad_u[i].comp[1][v]);
            double qz = state.q[i].comp[2][v] + tau * (c * step.comp[2][v] - grad_u[i].comp[2][v]);
            double norm = std::sqrt(qx * qx + qy * qy + qz * qz);
            while (norm > alpha) {
                const double s = alpha / norm;
                qx *= s;
                qy *= s;
                qz *= s;
                norm = std::sqrt(qx * qx + qy * qy + qz * qz);
                if (norm > alpha) { // rounding pushed it back out
                    qx = std::nextafter(qx, 0.0);
                    qy = std::nextafter(qy, 0.0);
                    qz = std::nextafter(qz, 0.0);
                    norm = std::sqrt(qx * qx + qy * qy + qz * qz);
                }
            }
            state.q[i].comp[0][v] = qx;
            state.q[i].comp[1][v] = qy;
            state.q[i].comp[2][v] = qz;
        }
        state.div_q[i] = div_backward(state.q[i]);
    }
}

} // namespace

void update_q(DualState& state, const DisplacementField& u_tilde,
              const Linearization& lin, const SolverParams& params) {
    require_same_dims(state.w.dims, u_tilde.dims, "update_q");
    require_same_dims(state.w.dims, lin.dims(), "update_q");
    std::array<VectorField, 3> grad_u;
    for (int i = 0; i < 3; ++i) grad_u[i] = grad_forward(component_volume(u_tilde, i));
    update_q_impl(state, grad_u, lin, params);
}

void update_h(DualState& state, const Linearization& lin, const SolverParams& params) {
    require_same_dims(state.w.dims, lin.dims(), "update_h");
    const double c = params.c;
    const std::size_t n = state.w.data.size();
    for (int i = 0; i < 3; ++i) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t v = 0; v < std::ptrdiff_t(n); ++v) {
            state.h[i].data[v] -=
                c * (state.w.data[v] * lin.grad_p.comp[i][v] + state.div_q[i].data[v]);
        }
    }
}

ResidualReport residual_fields(const DualState& state, const Linearization& lin,
                               const SolverParams& params) {
    require_same_dims(state.w.dims, lin.dims(), "residual_fields");
    const std::size_t n = state.w.data.size();
    ResidualReport rep{{ScalarVolume(state.w.dims), ScalarVolume(state.w.dims),
                        ScalarVolume(state.w.dims)},
                       {}};
    for (int i = 0; i < 3; ++i) {
        double s = 0.0;
        for (std::size_t v = 0; v < n; ++v) {
            const double f = state.w.data[v] * lin.grad_p.comp[i][v] + state.div_q[i].data[v];
            rep.f[i].data[v] = f;
            s += std::abs(f);
        }
        rep.r[i] = params.c * s / double(n);
    }
    return rep;
}

double primal_energy(const Linearization& lin, const DisplacementField& u_tilde,
                     const DisplacementField& h, double alpha) {
    require_same_dims(lin.dims(), u_tilde.dims, "primal_energy");
    require_same_dims(lin.dims(), h.dims, "primal_energy");
    const std::size_t n = lin.p0.data.size();

    double data = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
        double r = lin.p0.data[v];
        for (int i = 0; i < 3; ++i) r += lin.grad_p.comp[i][v] * h.comp[i][v];
        data += std::abs(r);
    }

    double reg = 0.0;
    for (int i = 0; i < 3; ++i) {
        ScalarVolume sum(lin.dims());
        for (std::size_t v = 0; v < n; ++v) sum.data[v] = u_tilde.comp[i][v] + h.comp[i][v];
        const VectorField g = grad_forward(sum);
        for (std::size_t v = 0; v < n; ++v) {
            reg += std::sqrt(g.comp[0][v] * g.comp[0][v] + g.comp[1][v] * g.comp[1][v] +
                             g.comp[2][v] * g.comp[2][v]);
        }
    }
    return data + alpha * reg;
}

std::pair<DisplacementField, SolverDiagnostics>
solve_subproblem(const Linearization& lin, const DisplacementField& u_tilde,
                 const SolverParams& params) {
    const Dims dims = lin.dims();
    require_same_dims(dims, u_tilde.dims, "solve_subproblem");
    params.validate(dims);

    DualState state(dims);
    SolverDiagnostics diag;
    const std::size_t n = dims.voxels();

    std::array<VectorField, 3> grad_u;
    for (int i = 0; i < 3; ++i) grad_u[i] = grad_forward(component_volume(u_tilde, i));

    const DisplacementField zero(dims);
    diag.primal_energy_at_zero = primal_energy(lin, u_tilde, zero, params.alpha);

    for (int k = 0; k < params.max_iters; ++k) {
        update_w(state, lin, params);
        throw_if_not_finite(state.w.data, "update_w");

        update_q_impl(state, grad_u, lin, params);

        // multiplier update and residual statistic in one pass
        std::array<double, 3> r{};
        for (int i = 0; i < 3; ++i) {
            double s = 0.0;
            for (std::size_t v = 0; v < n; ++v) {
                const double f = state.w.data[v] * lin.grad_p.comp[i][v] + state.div_q[i].data[v];
                state.h[i].data[v] -= params.c * f;
                s += std::abs(f);
            }
            r[i] = params.c * s / double(n);
            if (!std::isfinite(r[i])) {
                throw_if_not_finite(state.div_q[i].data, "update_q");
                throw_if_not_finite(state.h[i].data, "update_h");
                throw NumericalError("non-finite residual statistic in solve_subproblem");
            }
        }

        if (params.check_constraints) {
            for (std::size_t v = 0; v < n; ++v) {
                if (std::abs(state.w.data[v]) > 1.0) {
                    throw NumericalError("constraint |w| <= 1 violated");
                }
                for (int i = 0; i < 3; ++i) {
                    const double qn = std::sqrt(state.q[i].comp[0][v] * state.q[i].comp[0][v] +
                                                state.q[i].comp[1][v] * state.q[i].comp[1][v] +
                                                state.q[i].comp[2][v] * state.q[i].comp[2][v]);
                    if (qn > params.alpha) {
                        throw NumericalError("constraint |q_i| <= alpha violated");
                    }
                }
                diag.constraint_samples += 4;
            }
        }

        diag.final_residuals = r;
        const double rmax = std::max(r[0], std::max(r[1], r[2]));
        diag.residual_history.push_back(rmax);
        diag.iterations = k + 1;

        if (params.verbose) {
            DisplacementField hf(dims);
            for (int i = 0; i < 3; ++i) hf.comp[i] = state.h[i].data;
            std::printf("iter=%d r1=%.3e r2=%.3e r3=%.3e energy=%.9g\n", k + 1, r[0], r[1],
                        r[2], primal_energy(lin, u_tilde, hf, params.alpha));
        }

        if (rmax <= params.delta) {
            diag.converged = true;
            break;
        }
    }

    DisplacementField h(dims);
    for (int i = 0; i < 3; ++i) {
        throw_if_not_finite(state.h[i].data, "update_h");
        h.comp[i] = state.h[i].data;
    }

    diag.primal_energy = primal_energy(lin, u_tilde, h, params.alpha);
    if (diag.primal_energy > diag.primal_energy_at_zero) {
        // keep the convex objective from getting worse than the no-op update
        h = zero;
        diag.primal_energy = diag.primal_energy_at_zero;
        diag.fallback_to_zero = true;
    }
    return {std::move(h), diag};
}

} // namespace rancor
