#include "rancor/cli.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <CLI11.hpp>

#include "rancor/evalmetrics.hpp"
#include "rancor/nifti.hpp"
#include "rancor/preprocess.hpp"
#include "rancor/registration.hpp"
#include "rancor/synthbench.hpp"

namespace rancor {

namespace {

ScalarVolume load_scalar(const std::string& path) {
    ReadVolume rv = read_volume(path);
    if (rv.is_displacement) {
        throw IoError("expected a scalar volume, got a displacement field: " + path);
    }
    return std::move(rv.scalar);
}

ScalarVolume maybe_normalize(const ScalarVolume& vol) {
    std::vector<std::uint8_t> mask = nonzero_mask(vol);
    std::size_t count = 0;
    for (auto m : mask) count += m;
    if (count >= 16 && count < mask.size()) {
        return normalize_robust(vol, &mask);
    }
    return normalize_robust(vol);
}

int run_register(const std::string& fixed_path, const std::string& moving_path,
                 const std::string& out_disp, const std::string& out_warped,
                 const RegistrationParams& params, const std::string& affine_init,
                 bool no_normalize) {
    ReadVolume fixed_rv = read_volume(fixed_path);
    ReadVolume moving_rv = read_volume(moving_path);
    if (fixed_rv.is_displacement || moving_rv.is_displacement) {
        throw IoError("register expects scalar image volumes");
    }
    ScalarVolume fixed = std::move(fixed_rv.scalar);
    ScalarVolume moving = std::move(moving_rv.scalar);
    require_same_dims(fixed.dims, moving.dims, "register");

    if (!affine_init.empty()) {
        std::ifstream in(affine_init);
        if (!in) throw IoError("cannot open affine matrix: " + affine_init);
        std::stringstream ss;
        ss << in.rdbuf();
        moving = apply_affine(moving, parse_affine_text(ss.str()));
    }
    const ScalarVolume moving_input = moving; // pre-normalization copy for --out-warped

    if (!no_normalize) {
        fixed = maybe_normalize(fixed);
        moving = maybe_normalize(moving);
    }

    const RegistrationResult result = register_volumes(fixed, moving, params);
    write_displacement(out_disp, result.displacement, &fixed_rv.header);
    if (!out_warped.empty()) {
        write_scalar(out_warped, warp_scalar(moving_input, result.displacement),
                     &fixed_rv.header);
    }
    std::printf("sad_initial=%.9g sad_final=%.9g\n", result.initial_sad, result.final_sad);
    return 0;
}

int run_warp(const std::string& in_path, const std::string& disp_path,
             const std::string& out_path, const std::string& interp) {
    const DisplacementField disp = read_displacement(disp_path);
    ReadVolume rv = read_volume(in_path);
    if (rv.is_displacement) throw IoError("warp input must be a scalar or label volume");
    if (interp == "nearest") {
        write_labels(out_path, warp_nearest(to_labels(rv), disp), &rv.header);
    } else {
        write_scalar(out_path, warp_scalar(rv.scalar, disp), &rv.header);
    }
    return 0;
}

int run_overlap(const std::string& test_path, const std::string& ref_path,
                const std::string& csv_path) {
    const LabelVolume test = to_labels(read_volume(test_path));
    const LabelVolume ref = to_labels(read_volume(ref_path));
    const OverlapReport report = target_overlap(test, ref);
    if (!csv_path.empty()) {
        std::ofstream out(csv_path);
        if (!out) throw IoError("cannot write " + csv_path);
        out << report.to_csv();
    }
    std::printf("%s\n", report.summary().c_str());
    return 0;
}

int run_synth(const std::string& kind_name, const std::string& dims_text, double amplitude,
              double sigma, std::uint64_t seed, const std::string& prefix, double noise_sigma) {
    Dims dims;
    if (std::sscanf(dims_text.c_str(), "%d,%d,%d", &dims.nx, &dims.ny, &dims.nz) != 3 ||
        dims.nx < 1 || dims.ny < 1 || dims.nz < 1) {
        throw InvalidInputError("synth: --dims expects X,Y,Z positive integers");
    }
    const TestPairKind kind = parse_test_pair_kind(kind_name);
    const DisplacementField truth = make_smooth_deformation(dims, amplitude, sigma, seed);
    const SyntheticCase sc = make_test_pair(kind, dims, truth, noise_sigma, seed);

    write_scalar(prefix + "_fixed.nii.gz", sc.fixed);
    write_scalar(prefix + "_moving.nii.gz", sc.moving);
    write_displacement(prefix + "_truth.nii.gz", sc.truth);

    const LabelVolume moving_labels = label_bands(sc.moving);
    write_labels(prefix + "_moving_labels.nii.gz", moving_labels);
    write_labels(prefix + "_fixed_labels.nii.gz", warp_nearest(moving_labels, sc.truth));

    std::printf("wrote %s_{fixed,moving,truth,moving_labels,fixed_labels}.nii.gz\n",
                prefix.c_str());
    return 0;
}

int run_certify(int cases, std::uint64_t seed, const std::string& csv_path) {
    const CertifyReport report = certify_solver(cases, 32, Dims{8, 8, 1}, seed);
    if (!csv_path.empty()) {
        std::ofstream out(csv_path);
        if (!out) throw IoError("cannot write " + csv_path);
        out << report.to_csv();
    }
    std::printf("%s", report.to_text().c_str());
    return report.all_pass ? 0 : 3;
}

} // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"deformable registration with TV-regularized dual optimization"};
    app.require_subcommand(1);

    // register
    auto* reg = app.add_subcommand("register", "register a moving volume onto a fixed volume");
    std::string fixed_path, moving_path, out_disp, out_warped, affine_init;
    RegistrationParams params;
    int threads = 0;
    bool no_normalize = false;
    reg->add_option("--fixed", fixed_path, "fixed (reference) volume")->required();
    reg->add_option("--moving", moving_path, "moving volume")->required();
    reg->add_option("--out-disp", out_disp, "output displacement field")->required();
    reg->add_option("--out-warped", out_warped, "output warped moving volume");
    reg->add_option("--alpha", params.alpha, "TV weight")->capture_default_str();
    reg->add_option("--levels", params.levels, "pyramid levels")->capture_default_str();
    reg->add_option("--warps", params.warps_per_level, "warps per level")->capture_default_str();
    reg->add_option("--max-iters", params.max_iters, "solver iteration cap")->capture_default_str();
    reg->add_option("--delta", params.delta, "solver convergence tolerance")->capture_default_str();
    reg->add_option("--c", params.c, "augmentation constant")->capture_default_str();
    reg->add_option("--threads", threads, "worker threads (0 = default)");
    reg->add_option("--affine-init", affine_init, "FLIRT-style 4x4 text matrix applied to the moving volume");
    reg->add_flag("--no-normalize", no_normalize, "skip robust intensity normalization");
    reg->add_flag("--verbose", params.verbose, "per-warp progress log");

    // warp
    auto* warp = app.add_subcommand("warp", "resample a volume through a displacement field");
    std::string warp_in, warp_disp, warp_out, warp_interp = "linear";
    warp->add_option("--in", warp_in, "input volume")->required();
    warp->add_option("--disp", warp_disp, "displacement field")->required();
    warp->add_option("--out", warp_out, "output volume")->required();
    warp->add_option("--interp", warp_interp, "linear|nearest")
        ->check(CLI::IsMember({"linear", "nearest"}));

    // overlap
    auto* overlap = app.add_subcommand("overlap", "target overlap of two label volumes");
    std::string ov_test, ov_ref, ov_csv;
    overlap->add_option("--test", ov_test, "test label volume")->required();
    overlap->add_option("--ref", ov_ref, "reference label volume")->required();
    overlap->add_option("--per-label", ov_csv, "write per-label CSV report");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic test case");
    std::string sy_kind = "blobs", sy_dims = "32,32,32", sy_prefix;
    double sy_amp = 2.0, sy_sigma = 8.0, sy_noise = 0.0;
    std::uint64_t sy_seed = 7;
    synth->add_option("--kind", sy_kind, "blobs|checker-smoothed|ramp")->capture_default_str();
    synth->add_option("--dims", sy_dims, "X,Y,Z")->capture_default_str();
    synth->add_option("--amplitude", sy_amp, "max displacement in voxels")->capture_default_str();
    synth->add_option("--sigma", sy_sigma, "bump width in voxels")->capture_default_str();
    synth->add_option("--noise", sy_noise, "additive Gaussian noise sigma")->capture_default_str();
    synth->add_option("--seed", sy_seed, "random seed")->capture_default_str();
    synth->add_option("--out-prefix", sy_prefix, "output path prefix")->required();

    // certify
    auto* certify = app.add_subcommand("certify", "check the dual solver against the oracle");
    int ce_cases = 20;
    std::uint64_t ce_seed = 7;
    std::string ce_csv;
    certify->add_option("--cases", ce_cases, "number of random instances")->capture_default_str();
    certify->add_option("--seed", ce_seed, "random seed")->capture_default_str();
    certify->add_option("--csv", ce_csv, "write CSV report");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*reg) {
#ifdef _OPENMP
            if (threads > 0) omp_set_num_threads(threads);
#endif
            return run_register(fixed_path, moving_path, out_disp, out_warped, params,
                                affine_init, no_normalize);
        }
        if (*warp) return run_warp(warp_in, warp_disp, warp_out, warp_interp);
        if (*overlap) return run_overlap(ov_test, ov_ref, ov_csv);
        if (*synth) return run_synth(sy_kind, sy_dims, sy_amp, sy_sigma, sy_seed, sy_prefix, sy_noise);
        if (*certify) return run_certify(ce_cases, ce_seed, ce_csv);
        return 1;
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}

} // namespace rancor
