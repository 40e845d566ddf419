#include "rancor/nifti.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <vector>

namespace rancor {

namespace {

#pragma pack(push, 1)
struct Nifti1Header {
    std::int32_t sizeof_hdr;
    char data_type[10];
    char db_name[18];
    std::int32_t extents;
    std::int16_t session_error;
    char regular;
    char dim_info;
    std::int16_t dim[8];
    float intent_p1, intent_p2, intent_p3;
    std::int16_t intent_code;
    std::int16_t datatype;
    std::int16_t bitpix;
    std::int16_t slice_start;
    float pixdim[8];
    float vox_offset;
    float scl_slope;
    float scl_inter;
    std::int16_t slice_end;
    char slice_code;
    char xyzt_units;
    float cal_max, cal_min;
    float slice_duration, toffset;
    std::int32_t glmax, glmin;
    char descrip[80];
    char aux_file[24];
    std::int16_t qform_code, sform_code;
    float quatern_b, quatern_c, quatern_d;
    float qoffset_x, qoffset_y, qoffset_z;
    float srow_x[4], srow_y[4], srow_z[4];
    char intent_name[16];
    char magic[4];
};
#pragma pack(pop)

static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must be 348 bytes");

constexpr std::int16_t DT_UINT8 = 2;
constexpr std::int16_t DT_INT16 = 4;
constexpr std::int16_t DT_INT32 = 8;
constexpr std::int16_t DT_FLOAT32 = 16;
constexpr std::int16_t DT_FLOAT64 = 64;
constexpr std::int16_t DT_UINT16 = 512;
constexpr std::int16_t NIFTI_INTENT_VECTOR = 1007;

class GzFile {
public:
    GzFile(const std::string& path, const char* mode) : file_(gzopen(path.c_str(), mode)) {
        if (!file_) throw IoError("cannot open " + path);
    }
    ~GzFile() {
        if (file_) gzclose(file_);
    }
    GzFile(const GzFile&) = delete;
    GzFile& operator=(const GzFile&) = delete;

    void read_exact(void* buf, std::size_t n, const std::string& path) {
        const int got = gzread(file_, buf, unsigned(n));
        if (got < 0 || std::size_t(got) != n) {
            throw TruncatedFileError("truncated file: " + path);
        }
    }
    void skip(std::size_t n, const std::string& path) {
        std::vector<char> buf(std::min<std::size_t>(n, 65536));
        while (n > 0) {
            const std::size_t chunk = std::min(n, buf.size());
            read_exact(buf.data(), chunk, path);
            n -= chunk;
        }
    }
    void write_exact(const void* buf, std::size_t n, const std::string& path) {
        if (gzwrite(file_, buf, unsigned(n)) != int(n)) {
            throw IoError("write failed: " + path);
        }
    }

private:
    gzFile file_;
};

bool ends_with_gz(const std::string& path) {
    return path.size() >= 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
}

std::size_t datatype_size(std::int16_t code) {
    switch (code) {
    case DT_UINT8: return 1;
    case DT_INT16: return 2;
    case DT_UINT16: return 2;
    case DT_INT32: return 4;
    case DT_FLOAT32: return 4;
    case DT_FLOAT64: return 8;
    default:
        throw UnsupportedDatatypeError("unsupported NIfTI datatype code " + std::to_string(code));
    }
}

double decode_voxel(const unsigned char* p, std::int16_t code) {
    switch (code) {
    case DT_UINT8: return double(*p);
    case DT_INT16: {
        std::int16_t v;
        std::memcpy(&v, p, 2);
        return double(v);
    }
    case DT_UINT16: {
        std::uint16_t v;
        std::memcpy(&v, p, 2);
        return double(v);
    }
    case DT_INT32: {
        std::int32_t v;
        std::memcpy(&v, p, 4);
        return double(v);
    }
    case DT_FLOAT32: {
        float v;
        std::memcpy(&v, p, 4);
        return double(v);
    }
    case DT_FLOAT64: {
        double v;
        std::memcpy(&v, p, 8);
        return v;
    }
    default: return 0.0;
    }
}

Nifti1Header make_header(const VolumeHeader* src, Dims dims, std::int16_t datatype,
                         const char* default_descrip) {
    Nifti1Header h{};
    h.sizeof_hdr = 348;
    h.regular = 'r';
    h.dim[0] = 3;
    h.dim[1] = std::int16_t(dims.nx);
    h.dim[2] = std::int16_t(dims.ny);
    h.dim[3] = std::int16_t(dims.nz);
    for (int i = 4; i < 8; ++i) h.dim[i] = 1;
    h.datatype = datatype;
    h.bitpix = std::int16_t(datatype_size(datatype) * 8);
    h.pixdim[0] = 1.0f;
    h.scl_slope = 1.0f;
    h.scl_inter = 0.0f;
    h.vox_offset = 352.0f;
    h.sform_code = 1;
    std::memcpy(h.magic, "n+1", 4);

    std::array<double, 3> spacing{1.0, 1.0, 1.0};
    std::array<double, 16> affine{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
    std::string descrip = default_descrip;
    if (src) {
        spacing = src->spacing;
        affine = src->affine;
        if (!src->description.empty()) descrip = src->description;
    }
    for (int i = 0; i < 3; ++i) h.pixdim[i + 1] = float(spacing[i]);
    for (int i = 0; i < 4; ++i) {
        h.srow_x[i] = float(affine[i]);
        h.srow_y[i] = float(affine[4 + i]);
        h.srow_z[i] = float(affine[8 + i]);
    }
    std::strncpy(h.descrip, descrip.c_str(), sizeof(h.descrip) - 1);
    return h;
}

void write_payload(const std::string& path, const Nifti1Header& h, const float* data,
                   std::size_t count) {
    GzFile f(path, ends_with_gz(path) ? "wb" : "wbT");
    f.write_exact(&h, sizeof(h), path);
    const char pad[4] = {0, 0, 0, 0};
    f.write_exact(pad, 4, path);
    f.write_exact(data, count * sizeof(float), path);
}

} // namespace

ReadVolume read_volume(const std::string& path) {
    GzFile f(path, "rb");
    Nifti1Header h{};
    f.read_exact(&h, sizeof(h), path);

    if (std::memcmp(h.magic, "n+1", 3) != 0 || h.sizeof_hdr != 348) {
        throw BadMagicError("not a NIfTI-1 single file: " + path);
    }
    if (h.dim[0] < 1 || h.dim[0] > 7) {
        throw IoError("invalid dim[0] in " + path + " (big-endian files are not supported)");
    }

    ReadVolume rv;
    rv.header.dims = Dims{h.dim[1], std::max<int>(h.dim[2], 1), std::max<int>(h.dim[3], 1)};
    for (int i = 0; i < 3; ++i) {
        rv.header.spacing[i] = h.pixdim[i + 1] > 0 ? double(h.pixdim[i + 1]) : 1.0;
    }
    rv.header.datatype_code = h.datatype;
    for (int i = 0; i < 4; ++i) {
        rv.header.affine[i] = h.srow_x[i];
        rv.header.affine[4 + i] = h.srow_y[i];
        rv.header.affine[8 + i] = h.srow_z[i];
    }
    rv.header.affine[12] = 0;
    rv.header.affine[13] = 0;
    rv.header.affine[14] = 0;
    rv.header.affine[15] = 1;
    rv.header.description.assign(h.descrip, strnlen(h.descrip, sizeof(h.descrip)));

    rv.is_displacement = h.dim[0] == 5 && h.dim[5] == 3;
    int volumes = 1;
    if (rv.is_displacement) {
        if (h.dim[4] != 1) throw IoError("displacement file must have dim[4] == 1: " + path);
        volumes = 3;
    } else if (h.dim[0] > 3) {
        for (int i = 4; i <= h.dim[0]; ++i) {
            if (h.dim[i] > 1) throw IoError("unsupported multi-volume file: " + path);
        }
    }

    const std::size_t vsize = datatype_size(h.datatype);
    rv.is_integer = h.datatype == DT_UINT8 || h.datatype == DT_INT16 ||
                    h.datatype == DT_UINT16 || h.datatype == DT_INT32;

    const std::size_t offset = std::size_t(std::max(h.vox_offset, 348.0f));
    if (offset > 348) f.skip(offset - 348, path);

    const std::size_t n = rv.header.dims.voxels();
    std::vector<unsigned char> raw(n * vsize);
    const bool apply_scaling = h.scl_slope != 0.0f && !(h.scl_slope == 1.0f && h.scl_inter == 0.0f);
    const double slope = apply_scaling ? double(h.scl_slope) : 1.0;
    const double inter = apply_scaling ? double(h.scl_inter) : 0.0;
    if (apply_scaling) rv.is_integer = false;

    auto read_component = [&](std::vector<double>& out) {
        f.read_exact(raw.data(), raw.size(), path);
        out.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            out[i] = slope * decode_voxel(raw.data() + i * vsize, h.datatype) + inter;
        }
    };

    if (rv.is_displacement) {
        rv.disp = DisplacementField(rv.header.dims);
        for (int c = 0; c < 3; ++c) read_component(rv.disp.comp[c]);
    } else {
        rv.scalar.dims = rv.header.dims;
        rv.scalar.spacing = rv.header.spacing;
        read_component(rv.scalar.data);
    }
    return rv;
}

LabelVolume to_labels(const ReadVolume& rv) {
    if (rv.is_displacement) throw IoError("expected a label volume, got a displacement field");
    LabelVolume lv(rv.scalar.dims);
    lv.spacing = rv.scalar.spacing;
    for (std::size_t i = 0; i < rv.scalar.data.size(); ++i) {
        lv.data[i] = std::int32_t(std::lround(rv.scalar.data[i]));
    }
    return lv;
}

DisplacementField read_displacement(const std::string& path) {
    ReadVolume rv = read_volume(path);
    if (!rv.is_displacement) {
        throw IoError("not a displacement field (expected dim[0]=5, dim[5]=3): " + path);
    }
    return std::move(rv.disp);
}

void write_scalar(const std::string& path, const ScalarVolume& vol, const VolumeHeader* header) {
    VolumeHeader def;
    if (!header) {
        def.spacing = vol.spacing;
        header = &def;
    }
    Nifti1Header h = make_header(header, vol.dims, DT_FLOAT32, "rancor scalar volume");
    std::vector<float> buf(vol.data.size());
    for (std::size_t i = 0; i < vol.data.size(); ++i) buf[i] = float(vol.data[i]);
    write_payload(path, h, buf.data(), buf.size());
}

void write_labels(const std::string& path, const LabelVolume& vol, const VolumeHeader* header) {
    VolumeHeader def;
    if (!header) {
        def.spacing = vol.spacing;
        header = &def;
    }
    Nifti1Header h = make_header(header, vol.dims, DT_INT16, "rancor label volume");
    std::vector<std::int16_t> buf(vol.data.size());
    for (std::size_t i = 0; i < vol.data.size(); ++i) {
        const std::int32_t v = vol.data[i];
        if (v < -32768 || v > 32767) {
            throw IoError("label value " + std::to_string(v) + " does not fit in int16");
        }
        buf[i] = std::int16_t(v);
    }
    GzFile f(path, ends_with_gz(path) ? "wb" : "wbT");
    f.write_exact(&h, sizeof(h), path);
    const char pad[4] = {0, 0, 0, 0};
    f.write_exact(pad, 4, path);
    f.write_exact(buf.data(), buf.size() * sizeof(std::int16_t), path);
}

void write_displacement(const std::string& path, const DisplacementField& disp,
                        const VolumeHeader* header) {
    Nifti1Header h = make_header(header, disp.dims, DT_FLOAT32,
                                 "rancor displacement field; components in voxel units");
    h.dim[0] = 5;
    h.dim[4] = 1;
    h.dim[5] = 3;
    h.intent_code = NIFTI_INTENT_VECTOR;

    const std::size_t n = disp.dims.voxels();
    std::vector<float> buf(n * 3);
    for (int c = 0; c < 3; ++c) {
        for (std::size_t i = 0; i < n; ++i) buf[c * n + i] = float(disp.comp[c][i]);
    }
    write_payload(path, h, buf.data(), buf.size());
}

} // namespace rancor
