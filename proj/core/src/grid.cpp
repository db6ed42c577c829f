// grid.cpp - Trilinear sampling, backward warping and finite-difference Jacobians.

#include "tagflow/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tagflow/parallel.hpp"

namespace tagflow {

namespace {

void require_finite(const Vec3 &p) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2])) {
        throw std::invalid_argument("sample_trilinear: non-finite coordinate");
    }
}

void require_jacobian_dims(const Geometry &g) {
    if (g.dims[0] < 3 || g.dims[1] < 3 || g.dims[2] < 3) {
        throw std::invalid_argument("displacement_jacobian: every dimension must be >= 3");
    }
}

} // namespace

double sample_trilinear(const ScalarVolume &vol, const Vec3 &point, BoundaryPolicy policy) {
    require_finite(point);
    const auto s = trilinear_weights(vol.geometry(), point, policy);
    double acc = 0.0;
    for (std::size_t n = 0; n < 8; ++n) {
        acc += s.weight[n] * vol[s.index[n]];
    }
    return acc;
}

Vec3 sample_trilinear(const VectorField &field, const Vec3 &point, BoundaryPolicy policy) {
    require_finite(point);
    const auto s = trilinear_weights(field.geometry(), point, policy);
    Vec3 acc{0.0, 0.0, 0.0};
    for (std::size_t n = 0; n < 8; ++n) {
        acc += s.weight[n] * field[s.index[n]];
    }
    return acc;
}

ScalarVolume warp_scalar(const ScalarVolume &vol, const VectorField &disp, BoundaryPolicy policy) {
    require_same_geometry(vol.geometry(), disp.geometry(), "warp_scalar");
    const Geometry &g = vol.geometry();
    ScalarVolume out(g);
    parallel_for(g.voxel_count(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t n = begin; n < end; ++n) {
            out[n] = sample_trilinear(vol, g.position(n) + disp[n], policy);
        }
    });
    return out;
}

JacobianField displacement_jacobian(const VectorField &disp) {
    const Geometry &g = disp.geometry();
    require_jacobian_dims(g);
    JacobianField jac(g.voxel_count());
    const std::array<std::size_t, 3> stride{1, g.dims[0], g.dims[0] * g.dims[1]};

    parallel_for(g.voxel_count(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t n = begin; n < end; ++n) {
            const auto c = g.coords(n);
            Mat3 m{};
            for (std::size_t a = 0; a < 3; ++a) {
                Vec3 d;
                if (c[a] == 0) {
                    d = disp[n + stride[a]] - disp[n];
                } else if (c[a] == g.dims[a] - 1) {
                    d = disp[n] - disp[n - stride[a]];
                } else {
                    d = 0.5 * (disp[n + stride[a]] - disp[n - stride[a]]);
                }
                for (std::size_t comp = 0; comp < 3; ++comp) {
                    m[comp][a] = d[comp];
                }
            }
            jac[n] = m;
        }
    });
    return jac;
}

ScalarVolume jacobian_determinant(const VectorField &disp) {
    const JacobianField jac = displacement_jacobian(disp);
    ScalarVolume det(disp.geometry());
    for (std::size_t n = 0; n < jac.size(); ++n) {
        Mat3 a = jac[n];
        a[0][0] += 1.0;
        a[1][1] += 1.0;
        a[2][2] += 1.0;
        det[n] = determinant(a);
    }
    return det;
}

VectorField jacobian_adjoint(const Geometry &geom, std::span<const Mat3> grad_wrt_jacobian) {
    require_jacobian_dims(geom);
    if (grad_wrt_jacobian.size() != geom.voxel_count()) {
        throw std::invalid_argument("jacobian_adjoint: gradient count does not match geometry");
    }
    VectorField out(geom);
    const std::array<std::size_t, 3> stride{1, geom.dims[0], geom.dims[0] * geom.dims[1]};

    for (std::size_t n = 0; n < grad_wrt_jacobian.size(); ++n) {
        const auto c = geom.coords(n);
        const Mat3 &gj = grad_wrt_jacobian[n];
        for (std::size_t a = 0; a < 3; ++a) {
            const Vec3 col{gj[0][a], gj[1][a], gj[2][a]};
            if (c[a] == 0) {
                out[n + stride[a]] += col;
                out[n] += -1.0 * col;
            } else if (c[a] == geom.dims[a] - 1) {
                out[n] += col;
                out[n - stride[a]] += -1.0 * col;
            } else {
                out[n + stride[a]] += 0.5 * col;
                out[n - stride[a]] += -0.5 * col;
            }
        }
    }
    return out;
}

} // namespace tagflow
