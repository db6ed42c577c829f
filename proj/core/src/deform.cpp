// deform.cpp - Stationary velocity integration by scaling and squaring.

#include "tagflow/deform.hpp"

#include <cmath>
#include <stdexcept>

#include "tagflow/grid.hpp"
#include "tagflow/parallel.hpp"

namespace tagflow {

namespace {

void require_steps(int n_steps) {
    if (n_steps < 0) {
        throw std::invalid_argument("scaling and squaring: n_steps must be >= 0");
    }
}

// Adjoint of one squaring step u' = compose(u, u). Given g = dL/du', returns dL/du.
// Three paths feed u: the identity term, the sampled values (scatter of the
// trilinear weights) and the sample position (contraction with the analytic
// derivative of the trilinear interpolant at that position).
VectorField squaring_adjoint(const VectorField &u, const VectorField &g) {
    const Geometry &geom = u.geometry();
    VectorField out = g;
    std::size_t n = 0;
    for (std::size_t k = 0; k < geom.dims[2]; ++k) {
        for (std::size_t j = 0; j < geom.dims[1]; ++j) {
            for (std::size_t i = 0; i < geom.dims[0]; ++i, ++n) {
                const Vec3 &un = u[n];
                const Vec3 p{static_cast<double>(i) + un[0], static_cast<double>(j) + un[1],
                             static_cast<double>(k) + un[2]};
                const auto s = trilinear_stencil(geom, p, BoundaryPolicy::Clamp);
                const Vec3 gn = g[n];
                Vec3 dpos{0.0, 0.0, 0.0};
                for (std::size_t t = 0; t < 8; ++t) {
                    const Vec3 &ut = u[s.index[t]];
                    const double gu = gn[0] * ut[0] + gn[1] * ut[1] + gn[2] * ut[2];
                    dpos += gu * s.dweight[t];
                    Vec3 &o = out[s.index[t]];
                    const double w = s.weight[t];
                    o[0] += w * gn[0];
                    o[1] += w * gn[1];
                    o[2] += w * gn[2];
                }
                out[n] += dpos;
            }
        }
    }
    return out;
}

} // namespace

IntegrationCache::IntegrationCache(int n_steps, std::vector<VectorField> stages)
    : n_steps_(n_steps), stages_(std::move(stages)) {
    if (stages_.size() != static_cast<std::size_t>(n_steps_) + 1) {
        throw std::invalid_argument("IntegrationCache: expected n_steps + 1 stages");
    }
}

VectorField compose(const VectorField &u_outer, const VectorField &u_inner) {
    require_same_geometry(u_outer.geometry(), u_inner.geometry(), "compose");
    const Geometry &g = u_inner.geometry();
    VectorField out(g);
    parallel_for(g.voxel_count(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t n = begin; n < end; ++n) {
            out[n] = u_inner[n] + sample_trilinear(u_outer, g.position(n) + u_inner[n], BoundaryPolicy::Clamp);
        }
    });
    return out;
}

IntegrationCache integrate_velocity_cached(const VelocityParam &param) {
    require_steps(param.n_steps);
    std::vector<VectorField> stages;
    stages.reserve(static_cast<std::size_t>(param.n_steps) + 1);
    stages.push_back(std::ldexp(1.0, -param.n_steps) * param.velocity);
    for (int k = 0; k < param.n_steps; ++k) {
        stages.push_back(compose(stages.back(), stages.back()));
    }
    return IntegrationCache(param.n_steps, std::move(stages));
}

VectorField integrate_velocity(const VelocityParam &param) {
    require_steps(param.n_steps);
    VectorField u = std::ldexp(1.0, -param.n_steps) * param.velocity;
    for (int k = 0; k < param.n_steps; ++k) {
        u = compose(u, u);
    }
    return u;
}

VectorField integrate_velocity_vjp(const VelocityParam &param, const IntegrationCache &cache,
                                   const VectorField &grad_wrt_u) {
    if (cache.empty()) {
        throw std::invalid_argument("integrate_velocity_vjp: missing forward cache");
    }
    if (cache.n_steps() != param.n_steps) {
        throw std::invalid_argument("integrate_velocity_vjp: cache was built with a different n_steps");
    }
    require_same_geometry(cache.stage(0).geometry(), param.velocity.geometry(), "integrate_velocity_vjp");
    require_same_geometry(grad_wrt_u.geometry(), param.velocity.geometry(), "integrate_velocity_vjp");

    VectorField g = grad_wrt_u;
    for (int k = param.n_steps - 1; k >= 0; --k) {
        g = squaring_adjoint(cache.stage(k), g);
    }
    g *= std::ldexp(1.0, -param.n_steps);
    return g;
}

} // namespace tagflow
