#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "rancor/nifti.hpp"
#include "rancor/preprocess.hpp"

using namespace rancor;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
    static const fs::path dir = [] {
        fs::path p = fs::temp_directory_path() / "rancor_io_tests";
        fs::create_directories(p);
        return p;
    }();
    return dir / name;
}

ScalarVolume random_float_volume(Dims d, std::uint64_t seed) {
    ScalarVolume vol(d);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-10.0, 10.0);
    for (double& v : vol.data) v = double(float(dist(rng))); // float32-representable
    return vol;
}

// minimal raw NIfTI-1 fixture written field by field
struct RawNifti {
    std::vector<unsigned char> bytes = std::vector<unsigned char>(352, 0);

    template <typename T>
    void put(std::size_t offset, T value) {
        std::memcpy(bytes.data() + offset, &value, sizeof(T));
    }

    RawNifti() {
        put<std::int32_t>(0, 348);                     // sizeof_hdr
        put<std::int16_t>(40, 3);                      // dim[0]
        put<std::int16_t>(42, 2);                      // dim[1]
        put<std::int16_t>(44, 2);                      // dim[2]
        put<std::int16_t>(46, 2);                      // dim[3]
        for (int i = 4; i < 8; ++i) put<std::int16_t>(std::size_t(40 + 2 * i), 1);
        put<std::int16_t>(70, 2);                      // datatype uint8
        put<std::int16_t>(72, 8);                      // bitpix
        for (int i = 0; i < 4; ++i) put<float>(std::size_t(76 + 4 * i), 1.0f); // pixdim
        put<float>(108, 352.0f);                       // vox_offset
        std::memcpy(bytes.data() + 344, "n+1\0", 4);   // magic
    }

    void append_voxels(const std::vector<unsigned char>& v) {
        bytes.insert(bytes.end(), v.begin(), v.end());
    }

    void save(const fs::path& path) const {
        std::ofstream out(path, std::ios::binary);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  std::streamsize(bytes.size()));
    }
};

} // namespace

TEST_CASE("scalar volume round-trip, plain and gzip") {
    const ScalarVolume vol = random_float_volume(Dims{8, 8, 8}, 1);
    for (const char* name : {"rt.nii", "rt.nii.gz"}) {
        const fs::path p = temp_path(name);
        write_scalar(p.string(), vol);
        const ReadVolume rv = read_volume(p.string());
        CHECK_FALSE(rv.is_displacement);
        CHECK(rv.scalar.dims == vol.dims);
        CHECK(rv.scalar.data == vol.data); // bitwise
        CHECK(rv.header.datatype_code == 16);
    }
}

TEST_CASE("label volume round-trip") {
    const Dims d{5, 4, 3};
    LabelVolume labels(d);
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> lab(0, 11);
    for (auto& v : labels.data) v = lab(rng);

    const fs::path p = temp_path("labels.nii.gz");
    write_labels(p.string(), labels);
    const ReadVolume rv = read_volume(p.string());
    CHECK(rv.is_integer);
    const LabelVolume back = to_labels(rv);
    CHECK(back.dims == d);
    CHECK(back.data == labels.data);

    LabelVolume huge(Dims{4, 4, 1});
    huge.data[0] = 1 << 20;
    CHECK_THROWS_AS(write_labels(temp_path("huge.nii").string(), huge), IoError);
}

TEST_CASE("displacement field round-trip") {
    const Dims d{6, 5, 4};
    DisplacementField disp(d);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> dist(-3.0, 3.0);
    for (int c = 0; c < 3; ++c)
        for (double& v : disp.comp[c]) v = double(float(dist(rng)));

    const fs::path p = temp_path("disp.nii.gz");
    write_displacement(p.string(), disp);
    const ReadVolume rv = read_volume(p.string());
    CHECK(rv.is_displacement);
    CHECK(rv.header.description.find("voxel units") != std::string::npos);

    const DisplacementField back = read_displacement(p.string());
    CHECK(back.dims == d);
    for (int c = 0; c < 3; ++c) CHECK(back.comp[c] == disp.comp[c]);

    // a scalar file is rejected by read_displacement
    const fs::path sp = temp_path("scalar_for_disp.nii");
    write_scalar(sp.string(), random_float_volume(Dims{4, 4, 4}, 4));
    CHECK_THROWS_AS(read_displacement(sp.string()), IoError);
}

TEST_CASE("hand-built minimal header parses") {
    RawNifti raw;
    raw.append_voxels({0, 1, 2, 3, 4, 5, 6, 7});
    const fs::path p = temp_path("minimal.nii");
    raw.save(p);

    const ReadVolume rv = read_volume(p.string());
    CHECK(rv.header.dims == Dims{2, 2, 2});
    CHECK(rv.is_integer);
    for (int i = 0; i < 8; ++i) CHECK(rv.scalar.data[std::size_t(i)] == double(i));
}

TEST_CASE("scl_slope and scl_inter are applied") {
    RawNifti raw;
    raw.put<float>(112, 2.0f); // scl_slope
    raw.put<float>(116, 1.5f); // scl_inter
    raw.append_voxels({0, 1, 2, 3, 4, 5, 6, 7});
    const fs::path p = temp_path("scaled.nii");
    raw.save(p);

    const ReadVolume rv = read_volume(p.string());
    CHECK_FALSE(rv.is_integer); // scaling promotes to float semantics
    for (int i = 0; i < 8; ++i)
        CHECK(rv.scalar.data[std::size_t(i)] == doctest::Approx(2.0 * i + 1.5).epsilon(1e-12));
}

TEST_CASE("read errors are typed") {
    RawNifti bad_magic;
    bad_magic.bytes[344] = 'x';
    bad_magic.append_voxels({0, 1, 2, 3, 4, 5, 6, 7});
    const fs::path pm = temp_path("badmagic.nii");
    bad_magic.save(pm);
    CHECK_THROWS_AS(read_volume(pm.string()), BadMagicError);

    RawNifti bad_type;
    bad_type.put<std::int16_t>(70, 128);
    bad_type.append_voxels({0, 1, 2, 3, 4, 5, 6, 7});
    const fs::path pt = temp_path("badtype.nii");
    bad_type.save(pt);
    CHECK_THROWS_AS(read_volume(pt.string()), UnsupportedDatatypeError);

    RawNifti short_file;
    short_file.append_voxels({0, 1, 2}); // claims 8 voxels, provides 3
    const fs::path ps = temp_path("short.nii");
    short_file.save(ps);
    CHECK_THROWS_AS(read_volume(ps.string()), TruncatedFileError);

    CHECK_THROWS_AS(read_volume(temp_path("does_not_exist.nii").string()), IoError);
}

TEST_CASE("normalize_robust") {
    const Dims d{8, 8, 8};
    std::mt19937_64 rng(5);
    std::normal_distribution<double> gauss(0.0, 1.0);
    ScalarVolume vol(d);
    for (double& v : vol.data) v = gauss(rng);

    const ScalarVolume out = normalize_robust(vol);
    double mean = 0.0;
    for (double v : out.data) mean += v;
    mean /= double(d.voxels());
    double var = 0.0;
    for (double v : out.data) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / double(d.voxels()));
    CHECK(std::abs(mean) <= 1e-6);
    CHECK(std::abs(sd - 1.0) <= 0.05); // percentile clipping nudges the tails

    // a single huge outlier is neutralized by the percentile clip
    ScalarVolume spiked = vol;
    spiked.data[100] = 1e9;
    const ScalarVolume out_sp = normalize_robust(spiked);
    double mean_sp = 0.0;
    for (double v : out_sp.data) mean_sp += v;
    mean_sp /= double(d.voxels());
    double var_sp = 0.0;
    for (double v : out_sp.data) var_sp += (v - mean_sp) * (v - mean_sp);
    CHECK(std::abs(std::sqrt(var_sp / double(d.voxels())) - 1.0) <= 0.05);

    // invariance to positive affine intensity rescaling
    ScalarVolume rescaled = vol;
    for (double& v : rescaled.data) v = 7.3 * v + 11.0;
    const ScalarVolume out_rs = normalize_robust(rescaled);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        CHECK(std::abs(out_rs.data[i] - out.data[i]) <= 1e-9);

    CHECK_THROWS_AS(normalize_robust(ScalarVolume(d, 3.0)), InvalidInputError);
    CHECK_THROWS_AS(normalize_robust(ScalarVolume(Dims{2, 2, 2}, 0.0)), InvalidInputError);

    // masked: out-of-mask voxels take the transformed floor value
    std::vector<std::uint8_t> mask(d.voxels(), 1);
    mask[0] = 0;
    const ScalarVolume masked = normalize_robust(vol, &mask);
    double floor_value = 1e300;
    for (std::size_t i = 1; i < masked.data.size(); ++i)
        floor_value = std::min(floor_value, masked.data[i]);
    CHECK(masked.data[0] <= floor_value + 1e-12);
}

TEST_CASE("parse_affine_text") {
    const std::string good = "1 0 0 2\n0 1 0 0\n0 0 1 0\n0 0 0 1\n";
    const std::array<double, 16> m = parse_affine_text(good);
    CHECK(m[3] == 2.0);
    CHECK(m[0] == 1.0);
    CHECK_THROWS_AS(parse_affine_text("1 2 3"), IoError);
    CHECK_THROWS_AS(parse_affine_text(good + " 5"), IoError);
    CHECK_THROWS_AS(parse_affine_text("1 0 0 abc 0 1 0 0 0 0 1 0 0 0 0 1"), IoError);
}

TEST_CASE("invert_affine and apply_affine") {
    const std::array<double, 16> ident{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
    const ScalarVolume vol = random_float_volume(Dims{6, 6, 6}, 6);
    const ScalarVolume same = apply_affine(vol, ident);
    CHECK(same.data == vol.data); // lattice-aligned sampling is exact

    // pure translation by +1 in x maps out(x) = vol(x - 1)
    std::array<double, 16> shift = ident;
    shift[3] = 1.0;
    const ScalarVolume moved = apply_affine(vol, shift);
    for (int z = 0; z < 6; ++z)
        for (int y = 0; y < 6; ++y)
            for (int x = 1; x < 6; ++x)
                CHECK(moved.at(x, y, z) == doctest::Approx(vol.at(x - 1, y, z)).epsilon(1e-12));

    // random affine against an independent inverse + sampling oracle
    const std::array<double, 16> m{1.05, 0.02, -0.01, 0.4,  //
                                   -0.03, 0.98, 0.02, -0.2, //
                                   0.01, -0.02, 1.01, 0.1,  //
                                   0.0, 0.0, 0.0, 1.0};
    // independent 4x4 inversion via cofactor-free Gauss elimination
    double a[4][8] = {};
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) a[r][c] = m[std::size_t(r * 4 + c)];
        a[r][4 + r] = 1.0;
    }
    for (int col = 0; col < 4; ++col) {
        int piv = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        for (int c = 0; c < 8; ++c) std::swap(a[piv][c], a[col][c]);
        const double dpiv = a[col][col];
        for (int c = 0; c < 8; ++c) a[col][c] /= dpiv;
        for (int r = 0; r < 4; ++r) {
            if (r == col) continue;
            const double f = a[r][col];
            for (int c = 0; c < 8; ++c) a[r][c] -= f * a[col][c];
        }
    }
    const ScalarVolume out = apply_affine(vol, m);
    for (int z = 0; z < 6; ++z)
        for (int y = 0; y < 6; ++y)
            for (int x = 0; x < 6; ++x) {
                const double px = a[0][4] * x + a[0][5] * y + a[0][6] * z + a[0][7];
                const double py = a[1][4] * x + a[1][5] * y + a[1][6] * z + a[1][7];
                const double pz = a[2][4] * x + a[2][5] * y + a[2][6] * z + a[2][7];
                CHECK(std::abs(out.at(x, y, z) - sample_trilinear(vol, px, py, pz)) <= 1e-12);
            }

    const std::array<double, 16> singular{1, 0, 0, 0, 2, 0, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
    CHECK_THROWS_AS(invert_affine(singular), InvalidInputError);
}
