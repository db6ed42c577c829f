// deform.hpp - Stationary velocity integration by scaling and squaring.
//
// The deformation is phi = id + u with u = exp(v) computed as
//     u_0 = v / 2^N,   u_{k+1}(x) = u_k(x) + u_k(x + u_k(x))
// using clamped trilinear sampling. The reverse pass replays the cached u_k.

#pragma once

#include <vector>

#include "tagflow/volume.hpp"

namespace tagflow {

inline constexpr int kDefaultSquaringSteps = 7;

struct VelocityParam {
    VectorField velocity;
    int n_steps = kDefaultSquaringSteps;
};

// Forward intermediates u_0 .. u_N, needed by the reverse pass.
class IntegrationCache {
  public:
    IntegrationCache() = default;
    IntegrationCache(int n_steps, std::vector<VectorField> stages);

    bool empty() const { return stages_.empty(); }
    int n_steps() const { return n_steps_; }
    const VectorField &stage(int k) const { return stages_.at(static_cast<std::size_t>(k)); }
    const VectorField &displacement() const { return stages_.back(); }

  private:
    int n_steps_ = 0;
    std::vector<VectorField> stages_;
};

// result(x) = u_inner(x) + u_outer(x + u_inner(x)), i.e. (id + u_outer) o (id + u_inner) - id.
VectorField compose(const VectorField &u_outer, const VectorField &u_inner);

VectorField integrate_velocity(const VelocityParam &param);
IntegrationCache integrate_velocity_cached(const VelocityParam &param);

// Reverse-mode derivative: maps dL/du to dL/dv. Throws if the cache does not
// belong to this parameterization.
VectorField integrate_velocity_vjp(const VelocityParam &param, const IntegrationCache &cache,
                                   const VectorField &grad_wrt_u);

} // namespace tagflow
