#include "rancor/synthbench.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "rancor/preprocess.hpp"
#include "rancor/tvsolver.hpp"

namespace rancor {

TestPairKind parse_test_pair_kind(const std::string& name) {
    if (name == "blobs") return TestPairKind::Blobs;
    if (name == "checker-smoothed" || name == "checker") return TestPairKind::CheckerSmoothed;
    if (name == "ramp") return TestPairKind::Ramp;
    throw InvalidInputError("unknown test pair kind: " + name);
}

DisplacementField make_smooth_deformation(Dims dims, double amplitude, double sigma,
                                          std::uint64_t seed) {
    const int min_dim = std::min(dims.nx, std::min(dims.ny, dims.nz));
    if (amplitude >= double(min_dim) / 4.0) {
        throw InvalidInputError("make_smooth_deformation: amplitude too large for grid size");
    }
    DisplacementField field(dims);
    if (amplitude == 0.0) return field;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    const int n_bumps = 6;
    struct Bump {
        double cx, cy, cz;
        double dx, dy, dz;
    };
    std::vector<Bump> bumps(n_bumps);
    for (Bump& b : bumps) {
        b.cx = unit(rng) * (dims.nx - 1);
        b.cy = unit(rng) * (dims.ny - 1);
        b.cz = unit(rng) * (dims.nz - 1);
        double dx = gauss(rng), dy = gauss(rng), dz = gauss(rng);
        const double norm = std::sqrt(dx * dx + dy * dy + dz * dz);
        const double mag = 0.3 + 0.7 * unit(rng);
        b.dx = dx / norm * mag;
        b.dy = dy / norm * mag;
        b.dz = dz / norm * mag;
    }

    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    for (int z = 0; z < dims.nz; ++z) {
        for (int y = 0; y < dims.ny; ++y) {
            for (int x = 0; x < dims.nx; ++x) {
                const std::size_t i =
                    std::size_t(x) + std::size_t(dims.nx) * (std::size_t(y) + std::size_t(dims.ny) * z);
                double ux = 0, uy = 0, uz = 0;
                for (const Bump& b : bumps) {
                    const double r2 = (x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy) +
                                      (z - b.cz) * (z - b.cz);
                    const double e = std::exp(-r2 * inv2s2);
                    ux += b.dx * e;
                    uy += b.dy * e;
                    uz += b.dz * e;
                }
                field.comp[0][i] = ux;
                field.comp[1][i] = uy;
                field.comp[2][i] = uz;
            }
        }
    }

    double max_norm = 0.0;
    for (std::size_t i = 0; i < dims.voxels(); ++i) {
        max_norm = std::max(max_norm,
                            std::sqrt(field.comp[0][i] * field.comp[0][i] +
                                      field.comp[1][i] * field.comp[1][i] +
                                      field.comp[2][i] * field.comp[2][i]));
    }
    const double scale = amplitude / max_norm;
    for (int c = 0; c < 3; ++c)
        for (double& v : field.comp[c]) v *= scale;
    return field;
}

namespace {

ScalarVolume make_base_image(TestPairKind kind, Dims dims, std::mt19937_64& rng) {
    ScalarVolume base(dims);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int min_dim = std::min(dims.nx, std::min(dims.ny, dims.nz));

    switch (kind) {
    case TestPairKind::Blobs: {
        const int n_blobs = 24;
        struct Blob {
            double cx, cy, cz, amp, inv2s2;
        };
        std::vector<Blob> blobs(n_blobs);
        for (Blob& b : blobs) {
            b.cx = unit(rng) * (dims.nx - 1);
            b.cy = unit(rng) * (dims.ny - 1);
            b.cz = unit(rng) * (dims.nz - 1);
            b.amp = (unit(rng) < 0.5 ? -1.0 : 1.0) * (0.5 + unit(rng));
            const double s = min_dim * (0.05 + 0.07 * unit(rng));
            b.inv2s2 = 1.0 / (2.0 * s * s);
        }
        for (int z = 0; z < dims.nz; ++z)
            for (int y = 0; y < dims.ny; ++y)
                for (int x = 0; x < dims.nx; ++x) {
                    double v = 0;
                    for (const Blob& b : blobs) {
                        const double r2 = (x - b.cx) * (x - b.cx) + (y - b.cy) * (y - b.cy) +
                                          (z - b.cz) * (z - b.cz);
                        v += b.amp * std::exp(-r2 * b.inv2s2);
                    }
                    base.at(x, y, z) = v;
                }
        break;
    }
    case TestPairKind::CheckerSmoothed: {
        const double period = std::max(8.0, double(min_dim) / 4.0);
        const double k = 2.0 * M_PI / period;
        for (int z = 0; z < dims.nz; ++z)
            for (int y = 0; y < dims.ny; ++y)
                for (int x = 0; x < dims.nx; ++x)
                    base.at(x, y, z) = std::cos(k * x) * std::cos(k * y) * std::cos(k * z);
        break;
    }
    case TestPairKind::Ramp: {
        for (int z = 0; z < dims.nz; ++z)
            for (int y = 0; y < dims.ny; ++y)
                for (int x = 0; x < dims.nx; ++x) base.at(x, y, z) = double(x);
        break;
    }
    }
    return base;
}

} // namespace

SyntheticCase make_test_pair(TestPairKind kind, Dims dims, const DisplacementField& deformation,
                             double noise_sigma, std::uint64_t seed) {
    require_same_dims(dims, deformation.dims, "make_test_pair");
    std::mt19937_64 rng(seed);
    // normalize once, before warping: a second per-image normalization of
    // the warped copy would introduce an affine intensity mismatch between
    // the pair (interpolation shifts the statistics slightly)
    const ScalarVolume base = normalize_robust(make_base_image(kind, dims, rng));

    ScalarVolume fixed = warp_scalar(base, deformation);
    if (noise_sigma > 0) {
        std::normal_distribution<double> noise(0.0, noise_sigma);
        for (double& v : fixed.data) v += noise(rng);
    }

    SyntheticCase out;
    out.moving = base;
    out.fixed = std::move(fixed);
    out.truth = deformation;
    out.seed = seed;
    out.kind = kind == TestPairKind::Blobs
                   ? "blobs"
                   : (kind == TestPairKind::CheckerSmoothed ? "checker-smoothed" : "ramp");
    return out;
}

LabelVolume label_bands(const ScalarVolume& vol) {
    LabelVolume lv(vol.dims);
    lv.spacing = vol.spacing;
    for (std::size_t i = 0; i < vol.data.size(); ++i) {
        const double v = vol.data[i];
        lv.data[i] = v < -0.5 ? 0 : (v < 0.0 ? 1 : (v < 0.5 ? 2 : 3));
    }
    return lv;
}

namespace {

OracleResult oracle_exhaustive(const Linearization& lin, const DisplacementField& u_tilde,
                               double alpha) {
    const Dims d = lin.dims();
    if (d.ny != 1 || d.nz != 1 || d.nx > 5) {
        throw InvalidInputError("oracle exhaustive mode: 1D grids of <= 5 voxels only");
    }
    const int n = d.nx;
    const double lo = -2.0, hi = 2.0, step = 0.125;
    const int levels = int(std::lround((hi - lo) / step)) + 1; // 33

    DisplacementField h(d);
    DisplacementField best = h;
    double best_energy = primal_energy(lin, u_tilde, h, alpha);

    std::vector<int> idx(n, 0);
    while (true) {
        for (int v = 0; v < n; ++v) h.comp[0][v] = lo + idx[v] * step;
        const double e = primal_energy(lin, u_tilde, h, alpha);
        if (e < best_energy) {
            best_energy = e;
            best = h;
        }
        int pos = 0;
        while (pos < n && ++idx[pos] == levels) {
            idx[pos] = 0;
            ++pos;
        }
        if (pos == n) break;
    }
    return {best, best_energy};
}

OracleResult oracle_descent(const Linearization& lin, const DisplacementField& u_tilde,
                            double alpha, int iters) {
    const Dims d = lin.dims();
    const std::size_t n = d.voxels();
    DisplacementField h(d);
    DisplacementField best = h;
    double best_energy = primal_energy(lin, u_tilde, h, alpha);

    const double step0 = 0.5;
    std::array<std::vector<double>, 3> g;
    for (auto& v : g) v.assign(n, 0.0);

    for (int k = 0; k < iters; ++k) {
        // subgradient of the data term
        for (int i = 0; i < 3; ++i) std::fill(g[i].begin(), g[i].end(), 0.0);
        for (std::size_t v = 0; v < n; ++v) {
            double r = lin.p0.data[v];
            for (int i = 0; i < 3; ++i) r += lin.grad_p.comp[i][v] * h.comp[i][v];
            const double s = r > 0 ? 1.0 : (r < 0 ? -1.0 : 0.0);
            for (int i = 0; i < 3; ++i) g[i][v] += s * lin.grad_p.comp[i][v];
        }
        // subgradient of the isotropic TV term per component
        for (int i = 0; i < 3; ++i) {
            ScalarVolume f(d);
            for (std::size_t v = 0; v < n; ++v) f.data[v] = u_tilde.comp[i][v] + h.comp[i][v];
            VectorField gf = grad_forward(f);
            for (std::size_t v = 0; v < n; ++v) {
                const double norm = std::sqrt(gf.comp[0][v] * gf.comp[0][v] +
                                              gf.comp[1][v] * gf.comp[1][v] +
                                              gf.comp[2][v] * gf.comp[2][v]);
                const double inv = norm > 1e-12 ? 1.0 / norm : 0.0;
                gf.comp[0][v] *= inv;
                gf.comp[1][v] *= inv;
                gf.comp[2][v] *= inv;
            }
            const ScalarVolume divd = div_backward(gf);
            for (std::size_t v = 0; v < n; ++v) g[i][v] -= alpha * divd.data[v];
        }

        double gnorm = 0.0;
        for (int i = 0; i < 3; ++i)
            for (std::size_t v = 0; v < n; ++v) gnorm += g[i][v] * g[i][v];
        gnorm = std::sqrt(gnorm);
        if (gnorm < 1e-15) break;

        const double step = step0 / std::sqrt(double(k + 1)) / gnorm;
        for (int i = 0; i < 3; ++i)
            for (std::size_t v = 0; v < n; ++v) h.comp[i][v] -= step * g[i][v];

        const double e = primal_energy(lin, u_tilde, h, alpha);
        if (e < best_energy) {
            best_energy = e;
            best = h;
        }
    }
    return {best, best_energy};
}

} // namespace

OracleResult oracle_min_subproblem(const Linearization& lin, const DisplacementField& u_tilde,
                                   double alpha, OracleMode mode, int descent_iters) {
    require_same_dims(lin.dims(), u_tilde.dims, "oracle_min_subproblem");
    const std::size_t n = lin.dims().voxels();
    if (mode == OracleMode::Exhaustive) {
        if (n > 64) throw InvalidInputError("oracle exhaustive mode: at most 64 voxels");
        return oracle_exhaustive(lin, u_tilde, alpha);
    }
    if (n > 256) throw InvalidInputError("oracle descent mode: at most 256 voxels");
    return oracle_descent(lin, u_tilde, alpha, descent_iters);
}

namespace {

Linearization random_linearization(Dims d, std::mt19937_64& rng, bool zero_gradient) {
    std::uniform_real_distribution<double> sym(-1.0, 1.0);
    Linearization lin;
    lin.p0 = ScalarVolume(d);
    lin.grad_p = VectorField(d);
    lin.grad_norm_sq = ScalarVolume(d);
    for (std::size_t v = 0; v < d.voxels(); ++v) {
        lin.p0.data[v] = sym(rng);
        if (!zero_gradient) {
            if (d.nx > 1) lin.grad_p.comp[0][v] = sym(rng);
            if (d.ny > 1) lin.grad_p.comp[1][v] = sym(rng);
            if (d.nz > 1) lin.grad_p.comp[2][v] = sym(rng);
        }
        lin.grad_norm_sq.data[v] = lin.grad_p.comp[0][v] * lin.grad_p.comp[0][v] +
                                   lin.grad_p.comp[1][v] * lin.grad_p.comp[1][v] +
                                   lin.grad_p.comp[2][v] * lin.grad_p.comp[2][v];
    }
    return lin;
}

} // namespace

CertifyReport certify_solver(int n_cases, int dims_1d, Dims dims_2d, std::uint64_t seed) {
    CertifyReport report;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> small(-0.5, 0.5);

    for (int i = 0; i < n_cases; ++i) {
        const bool two_d = i % 2 == 1;
        const bool adversarial = i % 5 == 4; // zero image gradient, pure TV + constant data
        const Dims d = two_d ? dims_2d : Dims{dims_1d, 1, 1};

        Linearization lin = random_linearization(d, rng, adversarial);
        DisplacementField u_tilde(d);
        for (int c = 0; c < 3; ++c)
            for (double& v : u_tilde.comp[c]) v = small(rng);
        const double alpha = 0.1 + 0.4 * unit(rng);

        SolverParams params;
        params.alpha = alpha;
        params.c = 0.2;
        params.delta = 1e-7;
        params.max_iters = 20000;
        auto [h, diag] = solve_subproblem(lin, u_tilde, params);

        const OracleResult oracle = oracle_min_subproblem(lin, u_tilde, alpha, OracleMode::Descent);

        CertifyCase cc;
        cc.index = i;
        cc.kind = std::string(two_d ? "2d" : "1d") + (adversarial ? "-zerograd" : "");
        cc.alpha = alpha;
        cc.solver_energy = diag.primal_energy;
        cc.oracle_energy = oracle.energy_opt;
        cc.rel_gap = (cc.solver_energy - cc.oracle_energy) /
                     std::max(std::abs(cc.oracle_energy), 1e-12);
        cc.pass = cc.solver_energy <= cc.oracle_energy * (1.0 + 1e-3) + 1e-6;
        report.all_pass = report.all_pass && cc.pass;
        report.cases.push_back(cc);
    }
    return report;
}

std::string CertifyReport::to_text() const {
    std::ostringstream os;
    for (const CertifyCase& c : cases) {
        os << "case " << c.index << " [" << c.kind << "] alpha=" << c.alpha
           << " solver=" << c.solver_energy << " oracle=" << c.oracle_energy
           << " gap=" << c.rel_gap << " " << (c.pass ? "PASS" : "FAIL") << "\n";
    }
    os << (all_pass ? "certification PASSED" : "certification FAILED") << " (" << cases.size()
       << " cases)\n";
    return os.str();
}

std::string CertifyReport::to_csv() const {
    std::ostringstream os;
    os << "case,kind,alpha,solver_energy,oracle_energy,rel_gap,pass\n";
    for (const CertifyCase& c : cases) {
        os << c.index << "," << c.kind << "," << c.alpha << "," << c.solver_energy << ","
           << c.oracle_energy << "," << c.rel_gap << "," << (c.pass ? 1 : 0) << "\n";
    }
    return os.str();
}

} // namespace rancor
