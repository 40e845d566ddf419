#include <pybind11/pybind11.h>
#include <pybind11/numpy.h>
#include <pybind11/stl.h>

#include "rancor/evalmetrics.hpp"
#include "rancor/preprocess.hpp"
#include "rancor/registration.hpp"
#include "rancor/synthbench.hpp"

namespace py = pybind11;
using namespace rancor;

namespace {

using DArray = py::array_t<double, py::array::c_style | py::array::forcecast>;
using IArray = py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>;

ScalarVolume to_volume(const DArray& arr) {
    if (arr.ndim() != 3) throw InvalidInputError("expected a 3D array");
    ScalarVolume vol(Dims{int(arr.shape(0)), int(arr.shape(1)), int(arr.shape(2))});
    auto a = arr.unchecked<3>();
    for (int z = 0; z < vol.dims.nz; ++z)
        for (int y = 0; y < vol.dims.ny; ++y)
            for (int x = 0; x < vol.dims.nx; ++x) vol.at(x, y, z) = a(x, y, z);
    return vol;
}

DArray from_volume(const ScalarVolume& vol) {
    DArray arr({vol.dims.nx, vol.dims.ny, vol.dims.nz});
    auto a = arr.mutable_unchecked<3>();
    for (int z = 0; z < vol.dims.nz; ++z)
        for (int y = 0; y < vol.dims.ny; ++y)
            for (int x = 0; x < vol.dims.nx; ++x) a(x, y, z) = vol.at(x, y, z);
    return arr;
}

LabelVolume to_label_volume(const IArray& arr) {
    if (arr.ndim() != 3) throw InvalidInputError("expected a 3D integer array");
    LabelVolume vol(Dims{int(arr.shape(0)), int(arr.shape(1)), int(arr.shape(2))});
    auto a = arr.unchecked<3>();
    for (int z = 0; z < vol.dims.nz; ++z)
        for (int y = 0; y < vol.dims.ny; ++y)
            for (int x = 0; x < vol.dims.nx; ++x) vol.at(x, y, z) = a(x, y, z);
    return vol;
}

IArray from_label_volume(const LabelVolume& vol) {
    IArray arr({vol.dims.nx, vol.dims.ny, vol.dims.nz});
    auto a = arr.mutable_unchecked<3>();
    for (int z = 0; z < vol.dims.nz; ++z)
        for (int y = 0; y < vol.dims.ny; ++y)
            for (int x = 0; x < vol.dims.nx; ++x) a(x, y, z) = vol.at(x, y, z);
    return arr;
}

DisplacementField to_field(const DArray& arr) {
    if (arr.ndim() != 4 || arr.shape(3) != 3) {
        throw InvalidInputError("expected an array of shape (nx, ny, nz, 3)");
    }
    DisplacementField f(Dims{int(arr.shape(0)), int(arr.shape(1)), int(arr.shape(2))});
    auto a = arr.unchecked<4>();
    for (int z = 0; z < f.dims.nz; ++z)
        for (int y = 0; y < f.dims.ny; ++y)
            for (int x = 0; x < f.dims.nx; ++x) {
                const std::size_t i =
                    std::size_t(x) + std::size_t(f.dims.nx) * (std::size_t(y) + std::size_t(f.dims.ny) * z);
                for (int c = 0; c < 3; ++c) f.comp[c][i] = a(x, y, z, c);
            }
    return f;
}

DArray from_field(const DisplacementField& f) {
    DArray arr({f.dims.nx, f.dims.ny, f.dims.nz, 3});
    auto a = arr.mutable_unchecked<4>();
    for (int z = 0; z < f.dims.nz; ++z)
        for (int y = 0; y < f.dims.ny; ++y)
            for (int x = 0; x < f.dims.nx; ++x) {
                const std::size_t i =
                    std::size_t(x) + std::size_t(f.dims.nx) * (std::size_t(y) + std::size_t(f.dims.ny) * z);
                for (int c = 0; c < 3; ++c) a(x, y, z, c) = f.comp[c][i];
            }
    return arr;
}

} // namespace

PYBIND11_MODULE(_rancor, m) {
    m.doc() = "deformable registration with TV-regularized dual optimization";

    py::register_exception<Error>(m, "RancorError", PyExc_RuntimeError);

    m.def(
        "register_volumes",
        [](const DArray& fixed, const DArray& moving, double alpha, int levels, int warps,
           int max_iters, double delta, double c, double eps_h) {
            RegistrationParams params;
            params.alpha = alpha;
            params.levels = levels;
            params.warps_per_level = warps;
            params.max_iters = max_iters;
            params.delta = delta;
            params.c = c;
            params.eps_h = eps_h;
            const RegistrationResult r = rancor::register_volumes(to_volume(fixed),
                                                                  to_volume(moving), params);
            py::dict info;
            info["initial_sad"] = r.initial_sad;
            info["final_sad"] = r.final_sad;
            info["fallback_to_identity"] = r.fallback_to_identity;
            py::list levels_info;
            for (const LevelDiagnostics& ld : r.levels) {
                py::list warps_info;
                for (const WarpDiagnostics& w : ld.warps) {
                    py::dict wd;
                    wd["iterations"] = w.solver_iterations;
                    wd["converged"] = w.solver_converged;
                    wd["sad"] = w.sad;
                    wd["tv"] = w.tv;
                    wd["energy"] = w.level_energy;
                    warps_info.append(wd);
                }
                levels_info.append(warps_info);
            }
            info["levels"] = levels_info;
            return py::make_tuple(from_field(r.displacement), info);
        },
        py::arg("fixed"), py::arg("moving"), py::arg("alpha") = 0.30, py::arg("levels") = 3,
        py::arg("warps") = 4, py::arg("max_iters") = 220, py::arg("delta") = 5e-4,
        py::arg("c") = 0.2, py::arg("eps_h") = 1e-3,
        "Coarse-to-fine TV-regularized registration; returns (displacement, info)");

    m.def(
        "warp",
        [](const DArray& vol, const DArray& disp) {
            return from_volume(warp_scalar(to_volume(vol), to_field(disp)));
        },
        py::arg("volume"), py::arg("displacement"), "Trilinear warp of a scalar volume");

    m.def(
        "warp_labels",
        [](const IArray& labels, const DArray& disp) {
            return from_label_volume(warp_nearest(to_label_volume(labels), to_field(disp)));
        },
        py::arg("labels"), py::arg("displacement"), "Nearest-neighbor label transport");

    m.def(
        "sad",
        [](const DArray& a, const DArray& b) { return sad_energy(to_volume(a), to_volume(b)); },
        py::arg("a"), py::arg("b"), "Sum of absolute intensity differences");

    m.def(
        "normalize",
        [](const DArray& vol) { return from_volume(normalize_robust(to_volume(vol))); },
        py::arg("volume"), "Robust zero-mean unit-variance normalization");

    m.def(
        "target_overlap",
        [](const IArray& test, const IArray& ref) {
            const OverlapReport r = target_overlap(to_label_volume(test), to_label_volume(ref));
            py::dict per_label;
            for (const LabelOverlapRow& row : r.per_label) {
                per_label[py::int_(row.label)] = row.to;
            }
            return py::make_tuple(r.aggregate, per_label);
        },
        py::arg("test"), py::arg("reference"),
        "Aggregate and per-label target overlap of two label volumes");

    m.def(
        "endpoint_error",
        [](const DArray& u, const DArray& u_true) {
            const EndpointError e = endpoint_error(to_field(u), to_field(u_true));
            return py::make_tuple(e.mean, e.max);
        },
        py::arg("u"), py::arg("u_true"), "Mean and max endpoint error in voxels");

    m.def(
        "make_smooth_deformation",
        [](std::tuple<int, int, int> dims, double amplitude, double sigma, std::uint64_t seed) {
            return from_field(make_smooth_deformation(
                Dims{std::get<0>(dims), std::get<1>(dims), std::get<2>(dims)}, amplitude, sigma,
                seed));
        },
        py::arg("dims"), py::arg("amplitude"), py::arg("sigma"), py::arg("seed") = 7,
        "Random smooth displacement field with bounded max norm");

    m.def(
        "make_test_pair",
        [](const std::string& kind, std::tuple<int, int, int> dims, double amplitude,
           double sigma, double noise, std::uint64_t seed) {
            const Dims d{std::get<0>(dims), std::get<1>(dims), std::get<2>(dims)};
            const DisplacementField truth = make_smooth_deformation(d, amplitude, sigma, seed);
            const SyntheticCase sc = make_test_pair(parse_test_pair_kind(kind), d, truth, noise,
                                                    seed);
            return py::make_tuple(from_volume(sc.fixed), from_volume(sc.moving),
                                  from_field(sc.truth));
        },
        py::arg("kind"), py::arg("dims"), py::arg("amplitude"), py::arg("sigma"),
        py::arg("noise") = 0.0, py::arg("seed") = 7,
        "Synthetic (fixed, moving, truth) case with known ground truth");

    m.def(
        "certify",
        [](int cases, std::uint64_t seed) {
            const CertifyReport r = certify_solver(cases, 32, Dims{8, 8, 1}, seed);
            py::list rows;
            for (const CertifyCase& c : r.cases) {
                py::dict row;
                row["kind"] = c.kind;
                row["solver_energy"] = c.solver_energy;
                row["oracle_energy"] = c.oracle_energy;
                row["rel_gap"] = c.rel_gap;
                row["pass"] = c.pass;
                rows.append(row);
            }
            py::dict out;
            out["all_pass"] = r.all_pass;
            out["cases"] = rows;
            return out;
        },
        py::arg("cases") = 20, py::arg("seed") = 7,
        "Certify the dual solver against the independent oracle on tiny instances");
}
