#include <doctest.h>

#include <cmath>
#include <random>

#include "rancor/similarity.hpp"
#include "rancor/tvsolver.hpp"
#include "rancor/volume.hpp"

using namespace rancor;

namespace {

Linearization make_lin(Dims d) {
    Linearization lin;
    lin.p0 = ScalarVolume(d);
    lin.grad_p = VectorField(d);
    lin.grad_norm_sq = ScalarVolume(d);
    return lin;
}

void refresh_norm_sq(Linearization& lin) {
    for (std::size_t v = 0; v < lin.p0.data.size(); ++v) {
        double s = 0.0;
        for (int i = 0; i < 3; ++i) s += lin.grad_p.comp[i][v] * lin.grad_p.comp[i][v];
        lin.grad_norm_sq.data[v] = s;
    }
}

Linearization random_lin(Dims d, std::uint64_t seed, double p0_scale = 1.0) {
    Linearization lin = make_lin(d);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (double& v : lin.p0.data) v = p0_scale * dist(rng);
    for (int i = 0; i < 3; ++i)
        for (double& v : lin.grad_p.comp[i]) v = dist(rng);
    refresh_norm_sq(lin);
    return lin;
}

} // namespace

TEST_CASE("SolverParams validation and step size") {
    SolverParams p;
    p.validate(Dims{8, 8, 8});
    CHECK(p.effective_tau(Dims{8, 8, 8}) == doctest::Approx(1.0 / (12.0 * p.c)).epsilon(1e-14));
    CHECK(p.effective_tau(Dims{8, 8, 1}) == doctest::Approx(1.0 / (8.0 * p.c)).epsilon(1e-14));
    CHECK(p.effective_tau(Dims{8, 1, 1}) == doctest::Approx(1.0 / (4.0 * p.c)).epsilon(1e-14));

    SolverParams bad = p;
    bad.alpha = 0.0;
    CHECK_THROWS_AS(bad.validate(Dims{4, 4, 4}), InvalidInputError);
    bad = p;
    bad.c = -1.0;
    CHECK_THROWS_AS(bad.validate(Dims{4, 4, 4}), InvalidInputError);
    bad = p;
    bad.delta = 0.0;
    CHECK_THROWS_AS(bad.validate(Dims{4, 4, 4}), InvalidInputError);
    bad = p;
    bad.max_iters = 0;
    CHECK_THROWS_AS(bad.validate(Dims{4, 4, 4}), InvalidInputError);
    bad = p;
    bad.tau_q = 1.0 / (4.0 * p.c); // above the 3D bound 1/(12c)
    CHECK_THROWS_AS(bad.validate(Dims{4, 4, 4}), InvalidInputError);
}

TEST_CASE("update_w closed form, clamping and degenerate rule") {
    // single voxel: dP1 = 1, h1 = 0.2 (so T1 = 0.2 at c = 1), P0 = 0.1
    const Dims d{1, 1, 1};
    Linearization lin = make_lin(d);
    lin.p0.data[0] = 0.1;
    lin.grad_p.comp[0][0] = 1.0;
    refresh_norm_sq(lin);
    SolverParams params;
    params.c = 1.0;

    DualState state(d);
    state.h[0].data[0] = 0.2;
    update_w(state, lin, params);
    CHECK(state.w.data[0] == doctest::Approx(0.3).epsilon(1e-14));

    // unconstrained value 1.7 clamps to 1
    lin.p0.data[0] = 1.5;
    state.h[0].data[0] = 0.2;
    update_w(state, lin, params);
    CHECK(state.w.data[0] == 1.0);
    lin.p0.data[0] = -1.5;
    state.h[0].data[0] = -0.2;
    update_w(state, lin, params);
    CHECK(state.w.data[0] == -1.0);

    // degenerate gradient: w takes the sign of the residual
    Linearization flat = make_lin(d);
    flat.p0.data[0] = 0.4;
    update_w(state, flat, params);
    CHECK(state.w.data[0] == 1.0);
    flat.p0.data[0] = -0.4;
    update_w(state, flat, params);
    CHECK(state.w.data[0] == -1.0);
    flat.p0.data[0] = 0.0;
    update_w(state, flat, params);
    CHECK(state.w.data[0] == 0.0);

    CHECK_THROWS_AS(update_w(state, make_lin(Dims{2, 1, 1}), params), DimensionError);
}

TEST_CASE("update_w explicit-loop oracle on a random grid") {
    const Dims d{4, 3, 3};
    const Linearization lin = random_lin(d, 21);
    SolverParams params;
    DualState state(d);
    std::mt19937_64 rng(22);
    std::uniform_real_distribution<double> dist(-0.5, 0.5);
    for (int i = 0; i < 3; ++i) {
        for (double& v : state.h[i].data) v = dist(rng);
        for (int cpt = 0; cpt < 3; ++cpt)
            for (double& v : state.q[i].comp[cpt]) v = 0.1 * dist(rng);
    }
    state.refresh_div_q();
    update_w(state, lin, params);

    for (std::size_t v = 0; v < d.voxels(); ++v) {
        const double denom = params.c * lin.grad_norm_sq.data[v];
        double expect;
        if (denom < 1e-8) {
            expect = lin.p0.data[v] > 0 ? 1.0 : (lin.p0.data[v] < 0 ? -1.0 : 0.0);
        } else {
            double num = lin.p0.data[v];
            for (int i = 0; i < 3; ++i) {
                const double t = state.h[i].data[v] / params.c -
                                 div_backward(state.q[i]).data[v];
                num += params.c * lin.grad_p.comp[i][v] * t;
            }
            expect = std::clamp(num / denom, -1.0, 1.0);
        }
        CHECK(state.w.data[v] == doctest::Approx(expect).epsilon(1e-12));
        CHECK(std::abs(state.w.data[v]) <= 1.0);
    }
}

TEST_CASE("update_q fixed point and projection") {
    const Dims d{1, 1, 1};
    Linearization lin = make_lin(d);
    SolverParams params;
    params.alpha = 0.3;

    DualState zero_state(d);
    update_q(zero_state, DisplacementField(d), lin, params);
    for (int i = 0; i < 3; ++i)
        for (int cpt = 0; cpt < 3; ++cpt) CHECK(zero_state.q[i].comp[cpt][0] == 0.0);

    // norm 2*alpha rescales to exactly alpha; the gradient step is zero on
    // a single voxel so only the projection acts
    DualState state(d);
    state.q[0].comp[0][0] = 2.0 * params.alpha;
    state.refresh_div_q();
    update_q(state, DisplacementField(d), lin, params);
    const double norm = std::abs(state.q[0].comp[0][0]);
    CHECK(norm == doctest::Approx(params.alpha).epsilon(1e-14));
    CHECK(norm <= params.alpha);
}

TEST_CASE("update_q single step on a two-voxel line") {
    const Dims d{2, 1, 1};
    Linearization lin = make_lin(d);
    SolverParams params;
    params.c = 1.0;
    params.tau_q = 0.25;
    params.alpha = 0.3;

    DisplacementField u(d);
    u.comp[0] = {0.0, 1.0};
    DualState state(d);
    update_q(state, u, lin, params);
    // q1_x = tau * (-forward diff of u1) = -0.25 at voxel 0, 0 at voxel 1
    CHECK(state.q[0].comp[0][0] == doctest::Approx(-0.25).epsilon(1e-14));
    CHECK(state.q[0].comp[0][1] == 0.0);

    CHECK_THROWS_AS(update_q(state, DisplacementField(Dims{3, 1, 1}), lin, params),
                    DimensionError);
}

TEST_CASE("update_h") {
    const Dims d{3, 3, 3};
    Linearization lin = random_lin(d, 31);
    SolverParams params;
    params.c = 2.0;

    // w = 0 and q = 0 leave h unchanged (F = 0)
    DualState state(d);
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int i = 0; i < 3; ++i)
        for (double& v : state.h[i].data) v = dist(rng);
    const auto h_before = state.h;
    update_h(state, lin, params);
    for (int i = 0; i < 3; ++i) CHECK(state.h[i].data == h_before[i].data);

    // explicit-loop oracle with nonzero w, q
    for (double& v : state.w.data) v = dist(rng);
    for (int i = 0; i < 3; ++i)
        for (int cpt = 0; cpt < 3; ++cpt)
            for (double& v : state.q[i].comp[cpt]) v = 0.2 * dist(rng);
    state.refresh_div_q();
    const auto h_in = state.h;
    update_h(state, lin, params);
    for (int i = 0; i < 3; ++i) {
        const ScalarVolume div_q = div_backward(state.q[i]);
        for (std::size_t v = 0; v < d.voxels(); ++v) {
            const double expect =
                h_in[i].data[v] -
                params.c * (state.w.data[v] * lin.grad_p.comp[i][v] + div_q.data[v]);
            CHECK(state.h[i].data[v] == doctest::Approx(expect).epsilon(1e-12));
        }
    }

    // single-voxel arithmetic: w*dP1 = 0.3, div q1 = 0, c = 2 -> h1 = -0.6
    DualState s1(Dims{1, 1, 1});
    Linearization l1 = make_lin(Dims{1, 1, 1});
    l1.grad_p.comp[0][0] = 2.0;
    refresh_norm_sq(l1);
    s1.w.data[0] = 0.15;
    update_h(s1, l1, params);
    CHECK(s1.h[0].data[0] == doctest::Approx(-0.6).epsilon(1e-14));
}

TEST_CASE("residual_fields") {
    const Dims d{4, 4, 4};
    const Linearization lin = random_lin(d, 41);
    SolverParams params;

    DualState zero_state(d);
    const ResidualReport zero_rep = residual_fields(zero_state, lin, params);
    for (int i = 0; i < 3; ++i) {
        CHECK(zero_rep.r[i] == 0.0);
        for (double v : zero_rep.f[i].data) CHECK(v == 0.0);
    }

    DualState state(d);
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (double& v : state.w.data) v = dist(rng);
    for (int i = 0; i < 3; ++i)
        for (int cpt = 0; cpt < 3; ++cpt)
            for (double& v : state.q[i].comp[cpt]) v = 0.25 * dist(rng);
    state.refresh_div_q();
    const ResidualReport rep = residual_fields(state, lin, params);
    for (int i = 0; i < 3; ++i) {
        const ScalarVolume div_q = div_backward(state.q[i]);
        double s = 0.0;
        for (std::size_t v = 0; v < d.voxels(); ++v) {
            const double f = state.w.data[v] * lin.grad_p.comp[i][v] + div_q.data[v];
            CHECK(rep.f[i].data[v] == doctest::Approx(f).epsilon(1e-12));
            s += std::abs(f);
        }
        CHECK(rep.r[i] == doctest::Approx(params.c * s / double(d.voxels())).epsilon(1e-12));
    }
}

TEST_CASE("primal_energy") {
    const Dims d{4, 3, 2};
    const DisplacementField zero(d);
    CHECK(primal_energy(make_lin(d), zero, zero, 0.3) == 0.0);

    const Linearization lin = random_lin(d, 51);
    DisplacementField u(d);
    std::mt19937_64 rng(52);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int i = 0; i < 3; ++i)
        for (double& v : u.comp[i]) v = dist(rng);

    // h = 0: energy = sum |p0| + alpha * TV(u)
    double abs_p0 = 0.0;
    for (double v : lin.p0.data) abs_p0 += std::abs(v);
    CHECK(primal_energy(lin, u, zero, 0.3) ==
          doctest::Approx(abs_p0 + 0.3 * total_variation(u)).epsilon(1e-12));

    // explicit-loop oracle for a random h
    DisplacementField h(d);
    for (int i = 0; i < 3; ++i)
        for (double& v : h.comp[i]) v = dist(rng);
    double data = 0.0;
    for (std::size_t v = 0; v < d.voxels(); ++v) {
        double r = lin.p0.data[v];
        for (int i = 0; i < 3; ++i) r += lin.grad_p.comp[i][v] * h.comp[i][v];
        data += std::abs(r);
    }
    double reg = 0.0;
    for (int i = 0; i < 3; ++i) {
        ScalarVolume sum(d);
        for (std::size_t v = 0; v < d.voxels(); ++v)
            sum.data[v] = u.comp[i][v] + h.comp[i][v];
        const VectorField g = grad_forward(sum);
        for (std::size_t v = 0; v < d.voxels(); ++v)
            reg += std::sqrt(g.comp[0][v] * g.comp[0][v] + g.comp[1][v] * g.comp[1][v] +
                             g.comp[2][v] * g.comp[2][v]);
    }
    CHECK(primal_energy(lin, u, h, 0.3) == doctest::Approx(data + 0.3 * reg).epsilon(1e-12));

    CHECK_THROWS_AS(primal_energy(lin, DisplacementField(Dims{4, 3, 3}), h, 0.3),
                    DimensionError);
}

TEST_CASE("solve_subproblem zero problem returns zero") {
    const Dims d{8, 8, 4};
    Linearization lin = random_lin(d, 61);
    for (double& v : lin.p0.data) v = 0.0;
    const auto [h, diag] = solve_subproblem(lin, DisplacementField(d), SolverParams{});
    for (int i = 0; i < 3; ++i)
        for (double v : h.comp[i]) CHECK(std::abs(v) <= 1e-6);
    CHECK(diag.iterations >= 1);
}

TEST_CASE("solve_subproblem huge alpha flattens the update") {
    const Dims d{12, 1, 1};
    Linearization lin = make_lin(d);
    std::mt19937_64 rng(62);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (double& v : lin.p0.data) v = dist(rng);
    for (double& v : lin.grad_p.comp[0]) v = 1.0 + 0.2 * dist(rng);
    refresh_norm_sq(lin);

    SolverParams params;
    params.alpha = 1e3;
    params.max_iters = 5000;
    params.delta = 1e-7;
    const auto [h, diag] = solve_subproblem(lin, DisplacementField(d), params);
    const auto [lo, hi] = std::minmax_element(h.comp[0].begin(), h.comp[0].end());
    CHECK(*hi - *lo <= 1e-3);
}

TEST_CASE("solve_subproblem diagnostics and invariants") {
    const Dims d{8, 8, 1};
    const Linearization lin = random_lin(d, 63);
    DisplacementField u(d);
    std::mt19937_64 rng(64);
    std::uniform_real_distribution<double> dist(-0.5, 0.5);
    for (int i = 0; i < 3; ++i)
        for (double& v : u.comp[i]) v = dist(rng);

    SolverParams params;
    params.check_constraints = true;
    params.max_iters = 400;
    const auto [h, diag] = solve_subproblem(lin, u, params);

    CHECK(diag.constraint_samples >= std::size_t(4) * d.voxels());
    CHECK(diag.primal_energy <= diag.primal_energy_at_zero + 1e-6);
    CHECK(diag.primal_energy == doctest::Approx(primal_energy(lin, u, h, params.alpha)));
    CHECK(diag.residual_history.size() == std::size_t(diag.iterations));

    // 10-iteration moving average of the residual statistic never increases
    const auto& hist = diag.residual_history;
    if (hist.size() >= 20) {
        auto window_mean = [&](std::size_t end) {
            double s = 0.0;
            for (std::size_t k = end - 10; k < end; ++k) s += hist[k];
            return s / 10.0;
        };
        double prev = window_mean(10);
        for (std::size_t end = 20; end <= hist.size(); end += 10) {
            const double cur = window_mean(end);
            CHECK(cur <= prev * (1.0 + 1e-9) + 1e-12);
            prev = cur;
        }
    }
}

TEST_CASE("solve_subproblem scaling consistency") {
    const Dims d{16, 1, 1};
    Linearization lin = make_lin(d);
    std::mt19937_64 rng(65);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (double& v : lin.p0.data) v = dist(rng);
    for (double& v : lin.grad_p.comp[0]) v = dist(rng);
    refresh_norm_sq(lin);

    const double s = 3.7;
    Linearization scaled = make_lin(d);
    for (std::size_t v = 0; v < d.voxels(); ++v) {
        scaled.p0.data[v] = s * lin.p0.data[v];
        scaled.grad_p.comp[0][v] = s * lin.grad_p.comp[0][v];
    }
    refresh_norm_sq(scaled);

    SolverParams params;
    params.delta = 1e-8;
    params.max_iters = 20000;
    SolverParams params_scaled = params;
    params_scaled.alpha = params.alpha * s;

    const auto [h1, d1] = solve_subproblem(lin, DisplacementField(d), params);
    const auto [h2, d2] = solve_subproblem(scaled, DisplacementField(d), params_scaled);
    CHECK(d2.primal_energy ==
          doctest::Approx(s * d1.primal_energy).epsilon(1e-6));
}

TEST_CASE("solve_subproblem rejects non-finite input") {
    const Dims d{4, 4, 1};
    Linearization lin = random_lin(d, 66);
    lin.p0.data[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(solve_subproblem(lin, DisplacementField(d), SolverParams{}), NumericalError);
}
