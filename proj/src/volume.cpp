#include "rancor/volume.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace rancor {

std::string Dims::str() const {
    std::ostringstream os;
    os << "(" << nx << "," << ny << "," << nz << ")";
    return os.str();
}

void require_same_dims(const Dims& a, const Dims& b, const char* where) {
    if (!(a == b)) {
        throw DimensionError(std::string(where) + ": dimension mismatch " + a.str() + " vs " + b.str());
    }
}

namespace {

inline double clampd(double v, double lo, double hi) {
    return v < lo ? lo : (v > hi ? hi : v);
}

inline int clampi(int v, int lo, int hi) {
    return v < lo ? lo : (v > hi ? hi : v);
}

} // namespace

double sample_trilinear(const ScalarVolume& vol, double px, double py, double pz) {
    const Dims& d = vol.dims;
    px = clampd(px, 0.0, double(d.nx - 1));
    py = clampd(py, 0.0, double(d.ny - 1));
    pz = clampd(pz, 0.0, double(d.nz - 1));

    const int x0 = std::min(int(px), d.nx - 1);
    const int y0 = std::min(int(py), d.ny - 1);
    const int z0 = std::min(int(pz), d.nz - 1);
    const int x1 = std::min(x0 + 1, d.nx - 1);
    const int y1 = std::min(y0 + 1, d.ny - 1);
    const int z1 = std::min(z0 + 1, d.nz - 1);
    const double fx = px - x0;
    const double fy = py - y0;
    const double fz = pz - z0;

    const double c000 = vol.at(x0, y0, z0), c100 = vol.at(x1, y0, z0);
    const double c010 = vol.at(x0, y1, z0), c110 = vol.at(x1, y1, z0);
    const double c001 = vol.at(x0, y0, z1), c101 = vol.at(x1, y0, z1);
    const double c011 = vol.at(x0, y1, z1), c111 = vol.at(x1, y1, z1);

    const double c00 = c000 + fx * (c100 - c000);
    const double c10 = c010 + fx * (c110 - c010);
    const double c01 = c001 + fx * (c101 - c001);
    const double c11 = c011 + fx * (c111 - c011);
    const double c0 = c00 + fy * (c10 - c00);
    const double c1 = c01 + fy * (c11 - c01);
    return c0 + fz * (c1 - c0);
}

ScalarVolume warp_scalar(const ScalarVolume& vol, const DisplacementField& disp) {
    require_same_dims(vol.dims, disp.dims, "warp_scalar");
    ScalarVolume out(vol.dims);
    out.spacing = vol.spacing;
    const Dims d = vol.dims;
#pragma omp parallel for schedule(static)
    for (int z = 0; z < d.nz; ++z) {
        for (int y = 0; y < d.ny; ++y) {
            for (int x = 0; x < d.nx; ++x) {
                const std::size_t i = out.index(x, y, z);
                out.data[i] = sample_trilinear(vol,
                                               x + disp.comp[0][i],
                                               y + disp.comp[1][i],
                                               z + disp.comp[2][i]);
            }
        }
    }
    return out;
}

LabelVolume warp_nearest(const LabelVolume& vol, const DisplacementField& disp) {
    require_same_dims(vol.dims, disp.dims, "warp_nearest");
    LabelVolume out(vol.dims);
    out.spacing = vol.spacing;
    const Dims d = vol.dims;
#pragma omp parallel for schedule(static)
    for (int z = 0; z < d.nz; ++z) {
        for (int y = 0; y < d.ny; ++y) {
            for (int x = 0; x < d.nx; ++x) {
                const std::size_t i = out.index(x, y, z);
                const int sx = clampi(int(std::lround(x + disp.comp[0][i])), 0, d.nx - 1);
                const int sy = clampi(int(std::lround(y + disp.comp[1][i])), 0, d.ny - 1);
                const int sz = clampi(int(std::lround(z + disp.comp[2][i])), 0, d.nz - 1);
                out.data[i] = vol.at(sx, sy, sz);
            }
        }
    }
    return out;
}

VectorField gradient_central(const ScalarVolume& vol) {
    const Dims d = vol.dims;
    VectorField g(d);
#pragma omp parallel for schedule(static)
    for (int z = 0; z < d.nz; ++z) {
        for (int y = 0; y < d.ny; ++y) {
            for (int x = 0; x < d.nx; ++x) {
                const std::size_t i = vol.index(x, y, z);
                if (d.nx > 1) {
                    if (x == 0)
                        g.comp[0][i] = vol.at(1, y, z) - vol.at(0, y, z);
                    else if (x == d.nx - 1)
                        g.comp[0][i] = vol.at(x, y, z) - vol.at(x - 1, y, z);
                    else
                        g.comp[0][i] = 0.5 * (vol.at(x + 1, y, z) - vol.at(x - 1, y, z));
                }
                if (d.ny > 1) {
                    if (y == 0)
                        g.comp[1][i] = vol.at(x, 1, z) - vol.at(x, 0, z);
                    else if (y == d.ny - 1)
                        g.comp[1][i] = vol.at(x, y, z) - vol.at(x, y - 1, z);
                    else
                        g.comp[1][i] = 0.5 * (vol.at(x, y + 1, z) - vol.at(x, y - 1, z));
                }
                if (d.nz > 1) {
                    if (z == 0)
                        g.comp[2][i] = vol.at(x, y, 1) - vol.at(x, y, 0);
                    else if (z == d.nz - 1)
                        g.comp[2][i] = vol.at(x, y, z) - vol.at(x, y, z - 1);
                    else
                        g.comp[2][i] = 0.5 * (vol.at(x, y, z + 1) - vol.at(x, y, z - 1));
                }
            }
        }
    }
    return g;
}

VectorField grad_forward(const ScalarVolume& vol) {
    const Dims d = vol.dims;
    VectorField g(d);
#pragma omp parallel for schedule(static)
    for (int z = 0; z < d.nz; ++z) {
        for (int y = 0; y < d.ny; ++y) {
            for (int x = 0; x < d.nx; ++x) {
                const std::size_t i = vol.index(x, y, z);
                if (x < d.nx - 1) g.comp[0][i] = vol.at(x + 1, y, z) - vol.at(x, y, z);
                if (y < d.ny - 1) g.comp[1][i] = vol.at(x, y + 1, z) - vol.at(x, y, z);
                if (z < d.nz - 1) g.comp[2][i] = vol.at(x, y, z + 1) - vol.at(x, y, z);
            }
        }
    }
    return g;
}

ScalarVolume div_backward(const VectorField& v) {
    const Dims d = v.dims;
    ScalarVolume out(d);
#pragma omp parallel for schedule(static)
    for (int z = 0; z < d.nz; ++z) {
        for (int y = 0; y < d.ny; ++y) {
            for (int x = 0; x < d.nx; ++x) {
                const std::size_t i = out.index(x, y, z);
                double s = 0.0;
                // x axis
                if (x < d.nx - 1) s += v.comp[0][i];
                if (x > 0) s -= v.comp[0][out.index(x - 1, y, z)];
                // y axis
                if (y < d.ny - 1) s += v.comp[1][i];
                if (y > 0) s -= v.comp[1][out.index(x, y - 1, z)];
                // z axis
                if (z < d.nz - 1) s += v.comp[2][i];
                if (z > 0) s -= v.comp[2][out.index(x, y, z - 1)];
                out.data[i] = s;
            }
        }
    }
    return out;
}

namespace {

// 1D Gaussian blur along one axis, kernel renormalized where it is
// truncated by the volume boundary.
void blur_axis(const std::vector<double>& in, std::vector<double>& out,
               const Dims& d, int axis, const std::vector<double>& kernel) {
    const int radius = int(kernel.size()) / 2;
    const int n = d[axis];
    const std::ptrdiff_t stride =
        axis == 0 ? 1 : (axis == 1 ? d.nx : std::ptrdiff_t(d.nx) * d.ny);

#pragma omp parallel for schedule(static)
    for (int z = 0; z < d.nz; ++z) {
        for (int y = 0; y < d.ny; ++y) {
            for (int x = 0; x < d.nx; ++x) {
                const std::size_t i = std::size_t(x) + std::size_t(d.nx) * (std::size_t(y) + std::size_t(d.ny) * z);
                const int pos = axis == 0 ? x : (axis == 1 ? y : z);
                double acc = 0.0, wsum = 0.0;
                const int k0 = std::max(-radius, -pos);
                const int k1 = std::min(radius, n - 1 - pos);
                for (int k = k0; k <= k1; ++k) {
                    const double wk = kernel[k + radius];
                    acc += wk * in[i + k * stride];
                    wsum += wk;
                }
                out[i] = acc / wsum;
            }
        }
    }
}

} // namespace

ScalarVolume downsample(const ScalarVolume& vol) {
    const Dims d = vol.dims;
    if (d.nx < 2 || d.ny < 2 || d.nz < 2) {
        throw InvalidInputError("downsample: every axis must have at least 2 voxels, got " + d.str());
    }

    const double sigma = 1.0;
    const int radius = 3; // 3 sigma
    std::vector<double> kernel(2 * radius + 1);
    double ksum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        kernel[k + radius] = std::exp(-0.5 * (k * k) / (sigma * sigma));
        ksum += kernel[k + radius];
    }
    for (double& w : kernel) w /= ksum;

    std::vector<double> a = vol.data, b(vol.data.size());
    blur_axis(a, b, d, 0, kernel);
    blur_axis(b, a, d, 1, kernel);
    blur_axis(a, b, d, 2, kernel);

    Dims nd{(d.nx + 1) / 2, (d.ny + 1) / 2, (d.nz + 1) / 2};
    ScalarVolume out(nd);
    out.spacing = {vol.spacing[0] * 2, vol.spacing[1] * 2, vol.spacing[2] * 2};
    for (int z = 0; z < nd.nz; ++z)
        for (int y = 0; y < nd.ny; ++y)
            for (int x = 0; x < nd.nx; ++x)
                out.at(x, y, z) = b[vol.index(2 * x, 2 * y, 2 * z)];
    return out;
}

DisplacementField upsample_displacement(const DisplacementField& disp, Dims new_dims) {
    const Dims od = disp.dims;
    if (new_dims.nx < od.nx || new_dims.ny < od.ny || new_dims.nz < od.nz) {
        throw InvalidInputError("upsample_displacement: new dims " + new_dims.str() +
                                " smaller than " + od.str());
    }
    const double rx = double(new_dims.nx) / od.nx;
    const double ry = double(new_dims.ny) / od.ny;
    const double rz = double(new_dims.nz) / od.nz;
    // endpoint-aligned coordinate mapping fine -> coarse
    const double mx = new_dims.nx > 1 ? double(od.nx - 1) / (new_dims.nx - 1) : 0.0;
    const double my = new_dims.ny > 1 ? double(od.ny - 1) / (new_dims.ny - 1) : 0.0;
    const double mz = new_dims.nz > 1 ? double(od.nz - 1) / (new_dims.nz - 1) : 0.0;

    DisplacementField out(new_dims);
    for (int c = 0; c < 3; ++c) {
        ScalarVolume comp(od);
        comp.data = disp.comp[c];
        const double scale = c == 0 ? rx : (c == 1 ? ry : rz);
#pragma omp parallel for schedule(static)
        for (int z = 0; z < new_dims.nz; ++z) {
            for (int y = 0; y < new_dims.ny; ++y) {
                for (int x = 0; x < new_dims.nx; ++x) {
                    const std::size_t i = std::size_t(x) +
                        std::size_t(new_dims.nx) * (std::size_t(y) + std::size_t(new_dims.ny) * z);
                    out.comp[c][i] = scale * sample_trilinear(comp, x * mx, y * my, z * mz);
                }
            }
        }
    }
    return out;
}

std::vector<ScalarVolume> build_pyramid(const ScalarVolume& vol, int levels) {
    if (levels < 1) throw InvalidInputError("build_pyramid: levels must be >= 1");
    std::vector<ScalarVolume> pyr(levels);
    pyr[levels - 1] = vol;
    for (int l = levels - 1; l > 0; --l) {
        const Dims d = pyr[l].dims;
        Dims nd{(d.nx + 1) / 2, (d.ny + 1) / 2, (d.nz + 1) / 2};
        if (nd.nx < 4 || nd.ny < 4 || nd.nz < 4) {
            throw InvalidInputError("build_pyramid: level would drop an axis below 4 voxels (" +
                                    nd.str() + "); reduce the level count");
        }
        pyr[l - 1] = downsample(pyr[l]);
    }
    return pyr;
}

double total_variation(const DisplacementField& u) {
    double tv = 0.0;
    for (int c = 0; c < 3; ++c) {
        ScalarVolume comp(u.dims);
        comp.data = u.comp[c];
        const VectorField g = grad_forward(comp);
        for (std::size_t i = 0; i < u.dims.voxels(); ++i) {
            tv += std::sqrt(g.comp[0][i] * g.comp[0][i] +
                            g.comp[1][i] * g.comp[1][i] +
                            g.comp[2][i] * g.comp[2][i]);
        }
    }
    return tv;
}

double mean_displacement_norm(const DisplacementField& u) {
    const std::size_t n = u.dims.voxels();
    if (n == 0) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s += std::sqrt(u.comp[0][i] * u.comp[0][i] +
                       u.comp[1][i] * u.comp[1][i] +
                       u.comp[2][i] * u.comp[2][i]);
    }
    return s / double(n);
}

} // namespace rancor
