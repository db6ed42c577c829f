// objective.cpp - Registration losses and their analytic gradients.

#include "tagflow/objective.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "tagflow/parallel.hpp"

namespace tagflow {

namespace {

Mat3 identity_plus(const Mat3 &j) {
    Mat3 a = j;
    a[0][0] += 1.0;
    a[1][1] += 1.0;
    a[2][2] += 1.0;
    return a;
}

double sign(double x) { return (x > 0.0) ? 1.0 : ((x < 0.0) ? -1.0 : 0.0); }

struct PenaltyValue {
    double value = 0.0;
    double slope = 0.0; // d value / d det
};

// Kinks (det == eps, det == 0, det == 1) take the zero subgradient.
PenaltyValue penalty_at(double det, double weight, double epsilon, IncompressPenalty penalty) {
    PenaltyValue p;
    switch (penalty) {
    case IncompressPenalty::LogDeterminant: {
        const double l = std::log(std::max(det, epsilon));
        p.value = weight * std::abs(l);
        p.slope = det > epsilon ? weight * sign(l) / det : 0.0;
        break;
    }
    case IncompressPenalty::L1:
        p.value = weight * std::abs(det - 1.0);
        p.slope = weight * sign(det - 1.0);
        break;
    case IncompressPenalty::L2:
        p.value = weight * (det - 1.0) * (det - 1.0);
        p.slope = 2.0 * weight * (det - 1.0);
        break;
    }
    if (det < 0.0) {
        p.value += -det;
        p.slope += -1.0;
    }
    return p;
}

void require_trio_geometry(const SinCosTrio &fixed, const SinCosTrio &moving, const VectorField &disp) {
    fixed.validate();
    moving.validate();
    require_same_geometry(fixed.geometry(), moving.geometry(), "sim_loss");
    require_same_geometry(fixed.geometry(), disp.geometry(), "sim_loss");
}

} // namespace

void LossWeights::validate() const {
    if (!(lambda_smooth >= 0.0) || !std::isfinite(lambda_smooth)) {
        throw ConfigError("lambda_smooth", "must be >= 0");
    }
    if (!(beta_incompress >= 0.0) || !std::isfinite(beta_incompress)) {
        throw ConfigError("beta_incompress", "must be >= 0");
    }
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
        throw ConfigError("epsilon", "must be > 0");
    }
}

LossAndGradient sim_loss(const SinCosTrio &fixed, const SinCosTrio &moving, const VectorField &disp) {
    require_trio_geometry(fixed, moving, disp);
    const Geometry &g = disp.geometry();
    const std::size_t count = g.voxel_count();
    const double scale = 1.0 / static_cast<double>(count);

    std::vector<double> per_voxel(count);
    LossAndGradient out{0.0, VectorField(g)};
    std::array<const ScalarVolume *, SinCosTrio::kChannels> fc{};
    std::array<const ScalarVolume *, SinCosTrio::kChannels> mc{};
    for (std::size_t c = 0; c < SinCosTrio::kChannels; ++c) {
        fc[c] = &fixed.channel(c);
        mc[c] = &moving.channel(c);
    }
    parallel_for(count, [&](std::size_t begin, std::size_t end) {
        for (std::size_t n = begin; n < end; ++n) {
            const auto s = trilinear_stencil(g, g.position(n) + disp[n], BoundaryPolicy::Clamp);
            double sq = 0.0;
            Vec3 grad{0.0, 0.0, 0.0};
            for (std::size_t c = 0; c < SinCosTrio::kChannels; ++c) {
                const ScalarVolume &m = *mc[c];
                double sampled = 0.0;
                Vec3 dm{0.0, 0.0, 0.0};
                for (std::size_t t = 0; t < 8; ++t) {
                    const double mv = m[s.index[t]];
                    sampled += s.weight[t] * mv;
                    dm += mv * s.dweight[t];
                }
                const double r = sampled - (*fc[c])[n];
                sq += r * r;
                grad += (2.0 * scale * r) * dm;
            }
            per_voxel[n] = sq;
            out.gradient[n] = grad;
        }
    });
    double sum = 0.0;
    for (double v : per_voxel) {
        sum += v;
    }
    out.value = sum * scale;
    return out;
}

LossAndGradient smooth_loss(const VectorField &disp) {
    const Geometry &g = disp.geometry();
    const JacobianField jac = displacement_jacobian(disp);
    const double scale = 1.0 / static_cast<double>(g.voxel_count());

    double sum = 0.0;
    JacobianField dj(jac.size());
    for (std::size_t n = 0; n < jac.size(); ++n) {
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t a = 0; a < 3; ++a) {
                sum += jac[n][c][a] * jac[n][c][a];
                dj[n][c][a] = 2.0 * scale * jac[n][c][a];
            }
        }
    }
    return {sum * scale, jacobian_adjoint(g, dj)};
}

LossAndGradient incompress_loss(const VectorField &disp, const ScalarVolume &i_mag, double epsilon,
                                IncompressPenalty penalty) {
    require_same_geometry(disp.geometry(), i_mag.geometry(), "incompress_loss");
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument("incompress_loss: epsilon must be > 0");
    }
    const Geometry &g = disp.geometry();
    const JacobianField jac = displacement_jacobian(disp);
    const double scale = 1.0 / static_cast<double>(g.voxel_count());

    double sum = 0.0;
    JacobianField dj(jac.size());
    for (std::size_t n = 0; n < jac.size(); ++n) {
        const Mat3 a = identity_plus(jac[n]);
        const PenaltyValue p = penalty_at(determinant(a), i_mag[n], epsilon, penalty);
        sum += p.value;
        const Mat3 cof = cofactor(a);
        for (std::size_t r = 0; r < 3; ++r) {
            for (std::size_t c = 0; c < 3; ++c) {
                dj[n][r][c] = scale * p.slope * cof[r][c];
            }
        }
    }
    return {sum * scale, jacobian_adjoint(g, dj)};
}

ScalarVolume incompress_density(const VectorField &disp, const ScalarVolume &i_mag, double epsilon,
                                IncompressPenalty penalty) {
    require_same_geometry(disp.geometry(), i_mag.geometry(), "incompress_density");
    const ScalarVolume det = jacobian_determinant(disp);
    ScalarVolume out(disp.geometry());
    for (std::size_t n = 0; n < out.size(); ++n) {
        out[n] = penalty_at(det[n], i_mag[n], epsilon, penalty).value;
    }
    return out;
}

TotalLoss total_loss(const SinCosTrio &fixed, const SinCosTrio &moving, const ScalarVolume &i_mag,
                     const VelocityParam &param, const LossWeights &weights) {
    weights.validate();
    const IntegrationCache cache = integrate_velocity_cached(param);
    const VectorField &u = cache.displacement();

    LossAndGradient sim = sim_loss(fixed, moving, u);
    const LossAndGradient smooth = smooth_loss(u);
    const LossAndGradient inc = incompress_loss(u, i_mag, weights.epsilon, weights.penalty);

    TotalLoss out;
    out.breakdown.sim = sim.value;
    out.breakdown.smooth = smooth.value;
    out.breakdown.incompress = inc.value;
    out.breakdown.total = sim.value + weights.lambda_smooth * smooth.value;

    VectorField grad_u = std::move(sim.gradient);
    if (weights.lambda_smooth != 0.0) {
        grad_u += weights.lambda_smooth * smooth.gradient;
    }
    if (weights.beta_incompress != 0.0) {
        out.breakdown.total += weights.beta_incompress * inc.value;
        grad_u += weights.beta_incompress * inc.gradient;
    }
    out.gradient = integrate_velocity_vjp(param, cache, grad_u);
    out.displacement = u;
    return out;
}

} // namespace tagflow
