// grid.hpp - Trilinear sampling, backward warping and finite-difference Jacobians.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "tagflow/volume.hpp"

namespace tagflow {

enum class BoundaryPolicy {
    Clamp, // out-of-range coordinates are clipped onto the grid
    Zero,  // out-of-range voxels contribute nothing
};

// The eight taps of a trilinear lookup plus the derivative of each weight with
// respect to the continuous sample point. Taps that fall outside the grid under
// BoundaryPolicy::Zero carry zero weight and zero derivative. Under Clamp the
// derivative along an axis is zero wherever the coordinate was clipped.
struct TrilinearStencil {
    std::array<std::size_t, 8> index{};
    std::array<double, 8> weight{};
    std::array<Vec3, 8> dweight{};
};

namespace detail {

struct AxisTaps {
    std::size_t i0 = 0;
    std::size_t i1 = 0;
    double w0 = 0.0;
    double w1 = 0.0;
    double d0 = 0.0;
    double d1 = 0.0;
};

inline AxisTaps axis_taps(double p, std::size_t n, BoundaryPolicy policy) {
    AxisTaps t;
    const double hi = static_cast<double>(n - 1);
    if (policy == BoundaryPolicy::Clamp) {
        // !(p >= 0) also routes NaN to the low edge so the index stays in range.
        const bool clipped = !(p >= 0.0) || p > hi;
        const double pc = !(p >= 0.0) ? 0.0 : (p > hi ? hi : p);
        t.i0 = std::min(static_cast<std::size_t>(pc), n - 2);
        t.i1 = t.i0 + 1;
        const double frac = pc - static_cast<double>(t.i0);
        t.w0 = 1.0 - frac;
        t.w1 = frac;
        t.d0 = clipped ? 0.0 : -1.0;
        t.d1 = clipped ? 0.0 : 1.0;
        return t;
    }

    const double fl = std::floor(p);
    const double frac = p - fl;
    const bool v0 = fl >= 0.0 && fl <= hi;
    const bool v1 = fl + 1.0 >= 0.0 && fl + 1.0 <= hi;
    if (v0) {
        t.i0 = static_cast<std::size_t>(fl);
        t.w0 = 1.0 - frac;
        t.d0 = -1.0;
    }
    if (v1) {
        t.i1 = static_cast<std::size_t>(fl + 1.0);
        t.w1 = frac;
        t.d1 = 1.0;
    }
    return t;
}

} // namespace detail

// Index and weight only; the cheaper path for plain sampling.
struct TrilinearWeights {
    std::array<std::size_t, 8> index{};
    std::array<double, 8> weight{};
};

inline TrilinearWeights trilinear_weights(const Geometry &geom, const Vec3 &point, BoundaryPolicy policy) {
    const detail::AxisTaps tx = detail::axis_taps(point[0], geom.dims[0], policy);
    const detail::AxisTaps ty = detail::axis_taps(point[1], geom.dims[1], policy);
    const detail::AxisTaps tz = detail::axis_taps(point[2], geom.dims[2], policy);
    const std::size_t sy = geom.dims[0];
    const std::size_t sz = geom.dims[0] * geom.dims[1];
    const std::array<std::size_t, 2> iy{ty.i0 * sy, ty.i1 * sy};
    const std::array<std::size_t, 2> iz{tz.i0 * sz, tz.i1 * sz};
    const std::array<double, 2> wy{ty.w0, ty.w1};
    const std::array<double, 2> wz{tz.w0, tz.w1};

    TrilinearWeights s;
    std::size_t n = 0;
    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t b = 0; b < 2; ++b) {
            const double wyz = wy[b] * wz[c];
            s.index[n] = tx.i0 + iy[b] + iz[c];
            s.weight[n++] = tx.w0 * wyz;
            s.index[n] = tx.i1 + iy[b] + iz[c];
            s.weight[n++] = tx.w1 * wyz;
        }
    }
    return s;
}

inline TrilinearStencil trilinear_stencil(const Geometry &geom, const Vec3 &point, BoundaryPolicy policy) {
    using detail::AxisTaps;
    using detail::axis_taps;
    const AxisTaps tx = axis_taps(point[0], geom.dims[0], policy);
    const AxisTaps ty = axis_taps(point[1], geom.dims[1], policy);
    const AxisTaps tz = axis_taps(point[2], geom.dims[2], policy);

    const std::size_t sy = geom.dims[0];
    const std::size_t sz = geom.dims[0] * geom.dims[1];
    const std::array<std::size_t, 2> ix{tx.i0, tx.i1};
    const std::array<std::size_t, 2> iy{ty.i0 * sy, ty.i1 * sy};
    const std::array<std::size_t, 2> iz{tz.i0 * sz, tz.i1 * sz};
    const std::array<double, 2> wx{tx.w0, tx.w1};
    const std::array<double, 2> wy{ty.w0, ty.w1};
    const std::array<double, 2> wz{tz.w0, tz.w1};
    const std::array<double, 2> dx{tx.d0, tx.d1};
    const std::array<double, 2> dy{ty.d0, ty.d1};
    const std::array<double, 2> dz{tz.d0, tz.d1};

    TrilinearStencil s;
    std::size_t n = 0;
    for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t b = 0; b < 2; ++b) {
            const double wyz = wy[b] * wz[c];
            for (std::size_t a = 0; a < 2; ++a, ++n) {
                s.index[n] = ix[a] + iy[b] + iz[c];
                s.weight[n] = wx[a] * wyz;
                s.dweight[n] = {dx[a] * wyz, wx[a] * dy[b] * wz[c], wx[a] * wy[b] * dz[c]};
            }
        }
    }
    return s;
}

// Throws std::invalid_argument on a non-finite coordinate.
double sample_trilinear(const ScalarVolume &vol, const Vec3 &point, BoundaryPolicy policy = BoundaryPolicy::Clamp);
Vec3 sample_trilinear(const VectorField &field, const Vec3 &point, BoundaryPolicy policy = BoundaryPolicy::Clamp);

// out(x) = vol(x + disp(x)).
ScalarVolume warp_scalar(const ScalarVolume &vol, const VectorField &disp,
                         BoundaryPolicy policy = BoundaryPolicy::Clamp);

using JacobianField = std::vector<Mat3>;

// Per-voxel grad u with respect to voxel coordinates: central differences inside,
// first-order one-sided differences on boundary faces. Needs every dim >= 3.
JacobianField displacement_jacobian(const VectorField &disp);

// Signed det(I + grad u), i.e. the Jacobian determinant of x -> x + u(x).
ScalarVolume jacobian_determinant(const VectorField &disp);

// Adjoint of displacement_jacobian: given dL/d(grad u) per voxel, returns dL/du.
VectorField jacobian_adjoint(const Geometry &geom, std::span<const Mat3> grad_wrt_jacobian);

} // namespace tagflow
