#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rancor/similarity.hpp"
#include "rancor/volume.hpp"

namespace rancor {

struct SyntheticCase {
    ScalarVolume fixed;
    ScalarVolume moving;
    DisplacementField truth;
    std::uint64_t seed = 0;
    std::string kind;
    double amplitude = 0.0;
    double sigma = 0.0;
};

enum class TestPairKind { Blobs, CheckerSmoothed, Ramp };

TestPairKind parse_test_pair_kind(const std::string& name);

// Sum of Gaussian-bump displacements, rescaled so the max voxel norm
// equals amplitude; deterministic per seed.
DisplacementField make_smooth_deformation(Dims dims, double amplitude, double sigma,
                                          std::uint64_t seed);

// moving = base image of the given kind; fixed = warp(base, deformation)
// plus Gaussian noise; both robustly normalized.
SyntheticCase make_test_pair(TestPairKind kind, Dims dims, const DisplacementField& deformation,
                             double noise_sigma, std::uint64_t seed);

// Intensity bands of a normalized volume as synthetic labels; the band
// below -0.5 is background.
LabelVolume label_bands(const ScalarVolume& vol);

enum class OracleMode { Exhaustive, Descent };

struct OracleResult {
    DisplacementField h_opt;
    double energy_opt = 0.0;
};

// Independent minimizer of the convex subproblem on tiny instances.
// Exhaustive mode enumerates quantized h1 on 1D grids of <= 5 voxels
// (range [-2,2], step 0.125); descent mode runs best-iterate subgradient
// descent on the primal energy with diminishing steps.
OracleResult oracle_min_subproblem(const Linearization& lin, const DisplacementField& u_tilde,
                                   double alpha, OracleMode mode, int descent_iters = 200000);

struct CertifyCase {
    int index = 0;
    std::string kind;
    double alpha = 0.0;
    double solver_energy = 0.0;
    double oracle_energy = 0.0;
    double rel_gap = 0.0;
    bool pass = false;
};

struct CertifyReport {
    std::vector<CertifyCase> cases;
    bool all_pass = true;

    std::string to_text() const;
    std::string to_csv() const;
};

// Random tiny subproblems solved by both the dual solver and the oracle;
// a case passes when solver energy <= oracle energy * (1 + 1e-3) + 1e-6.
CertifyReport certify_solver(int n_cases, int dims_1d, Dims dims_2d, std::uint64_t seed);

} // namespace rancor
