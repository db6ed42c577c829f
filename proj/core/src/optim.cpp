// optim.cpp - Instance-specific registration by Adam on the stationary velocity.

#include "tagflow/optim.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "tagflow/grid.hpp"

namespace tagflow {

namespace {

void adam_update(double &p, double g, double &m, double &v, double bc1, double bc2, const AdamHyper &h) {
    m = h.beta1 * m + (1.0 - h.beta1) * g;
    v = h.beta2 * v + (1.0 - h.beta2) * g * g;
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    p -= h.learning_rate * m_hat / (std::sqrt(v_hat) + h.eps);
}

void prepare_state(AdamState &state, std::size_t n) {
    if (state.m.empty() && state.v.empty()) {
        state.m.assign(n, 0.0);
        state.v.assign(n, 0.0);
    }
    if (state.m.size() != n || state.v.size() != n) {
        throw std::invalid_argument("adam_step: parameter count does not match optimizer state");
    }
}

void check_finite(const LossBreakdown &b, int iteration) {
    if (!std::isfinite(b.sim)) {
        throw NonFiniteLoss("sim", iteration);
    }
    if (!std::isfinite(b.smooth)) {
        throw NonFiniteLoss("smooth", iteration);
    }
    if (!std::isfinite(b.incompress)) {
        throw NonFiniteLoss("incompress", iteration);
    }
    if (!std::isfinite(b.total)) {
        throw NonFiniteLoss("total", iteration);
    }
}

// With coarse set, `velocity` lives on the half-resolution grid and the loss is
// evaluated on its upsampling; gradients come back through the transpose.
RegistrationResult optimize(const SinCosTrio &fixed, const SinCosTrio &moving, const ScalarVolume &i_mag,
                            const RegistrationConfig &config, VectorField velocity, int max_iters, bool coarse,
                            const ProgressCallback &progress) {
    const Geometry &fine = fixed.geometry();
    const AdamHyper hyper = config.adam();
    AdamState state;
    RegistrationResult r;
    double best_total = 0.0;

    for (int it = 0;; ++it) {
        VelocityParam param{coarse ? upsample_velocity2(velocity, fine) : velocity, config.n_steps};
        TotalLoss tl = total_loss(fixed, moving, i_mag, param, config.weights);
        check_finite(tl.breakdown, it);
        r.loss_history.push_back(tl.breakdown);
        if (progress) {
            progress(it, tl.breakdown);
        }
        if (it == 0 || tl.breakdown.total < best_total) {
            best_total = tl.breakdown.total;
            r.best_iteration = it;
            r.velocity = param.velocity;
            r.displacement = std::move(tl.displacement);
        }
        if (it == max_iters) {
            break;
        }
        if (config.stop_tol > 0.0 && it >= config.stop_window) {
            const double before = r.loss_history[static_cast<std::size_t>(it - config.stop_window)].total;
            const double now = tl.breakdown.total;
            const double denom = std::max(std::abs(before), 1e-300);
            if ((before - now) / denom < config.stop_tol) {
                break;
            }
        }
        if (coarse) {
            adam_step(velocity, upsample_velocity2_adjoint(tl.gradient, velocity.geometry()), state, hyper);
        } else {
            adam_step(velocity, tl.gradient, state, hyper);
        }
        r.iterations_run = it + 1;
    }
    return r;
}

} // namespace

void adam_step(std::span<double> params, std::span<const double> grads, AdamState &state, const AdamHyper &hyper) {
    if (params.size() != grads.size()) {
        throw std::invalid_argument("adam_step: parameter and gradient sizes differ");
    }
    prepare_state(state, params.size());
    ++state.step;
    const auto t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(hyper.beta1, t);
    const double bc2 = 1.0 - std::pow(hyper.beta2, t);
    for (std::size_t n = 0; n < params.size(); ++n) {
        adam_update(params[n], grads[n], state.m[n], state.v[n], bc1, bc2, hyper);
    }
}

void adam_step(VectorField &params, const VectorField &grads, AdamState &state, const AdamHyper &hyper) {
    require_same_geometry(params.geometry(), grads.geometry(), "adam_step");
    prepare_state(state, 3 * params.size());
    ++state.step;
    const auto t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(hyper.beta1, t);
    const double bc2 = 1.0 - std::pow(hyper.beta2, t);
    for (std::size_t n = 0; n < params.size(); ++n) {
        for (std::size_t c = 0; c < 3; ++c) {
            const std::size_t k = 3 * n + c;
            adam_update(params[n][c], grads[n][c], state.m[k], state.v[k], bc1, bc2, hyper);
        }
    }
}

void RegistrationConfig::validate() const {
    weights.validate();
    if (n_steps < 0) {
        throw ConfigError("n_steps", "must be >= 0");
    }
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError("learning_rate", "must be > 0");
    }
    if (max_iters < 1) {
        throw ConfigError("max_iters", "must be >= 1");
    }
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) {
        throw ConfigError("adam_beta1", "must lie in [0, 1)");
    }
    if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
        throw ConfigError("adam_beta2", "must lie in [0, 1)");
    }
    if (!(adam_eps > 0.0)) {
        throw ConfigError("adam_eps", "must be > 0");
    }
    if (!(stop_tol >= 0.0)) {
        throw ConfigError("stop_tol", "must be >= 0");
    }
    if (stop_window < 1) {
        throw ConfigError("stop_window", "must be >= 1");
    }
}

VectorField upsample_velocity2(const VectorField &coarse, const Geometry &fine) {
    VectorField out(fine);
    for (std::size_t n = 0; n < fine.voxel_count(); ++n) {
        const Vec3 x = fine.position(n);
        // Coarse voxel i covers fine voxels 2i and 2i + 1, so its centre sits at 2i + 0.5.
        const Vec3 p{(x[0] - 0.5) / 2.0, (x[1] - 0.5) / 2.0, (x[2] - 0.5) / 2.0};
        out[n] = 2.0 * sample_trilinear(coarse, p, BoundaryPolicy::Clamp);
    }
    return out;
}

VectorField upsample_velocity2_adjoint(const VectorField &fine_grad, const Geometry &coarse) {
    const Geometry &fine = fine_grad.geometry();
    VectorField out(coarse);
    for (std::size_t n = 0; n < fine.voxel_count(); ++n) {
        const Vec3 x = fine.position(n);
        const Vec3 p{(x[0] - 0.5) / 2.0, (x[1] - 0.5) / 2.0, (x[2] - 0.5) / 2.0};
        const auto s = trilinear_weights(coarse, p, BoundaryPolicy::Clamp);
        for (std::size_t t = 0; t < 8; ++t) {
            out[s.index[t]] += (2.0 * s.weight[t]) * fine_grad[n];
        }
    }
    return out;
}

Geometry coarse_geometry(const Geometry &fine) {
    Geometry g;
    for (std::size_t a = 0; a < 3; ++a) {
        g.dims[a] = fine.dims[a] / 2;
        g.spacing[a] = 2.0 * fine.spacing[a];
    }
    return g;
}

RegistrationResult register_pair(const SinCosTrio &fixed, const SinCosTrio &moving, const ScalarVolume &i_mag,
                                 const RegistrationConfig &config, const VectorField *initial_velocity,
                                 const ProgressCallback &progress) {
    config.validate();
    fixed.validate();
    moving.validate();
    require_same_geometry(fixed.geometry(), moving.geometry(), "register_pair");
    require_same_geometry(fixed.geometry(), i_mag.geometry(), "register_pair");
    if (initial_velocity != nullptr) {
        require_same_geometry(fixed.geometry(), initial_velocity->geometry(), "register_pair");
    }

    const auto start = std::chrono::steady_clock::now();
    const Geometry &geom = fixed.geometry();
    VectorField velocity = initial_velocity != nullptr ? *initial_velocity : VectorField(geom);
    int fine_iters = config.max_iters;
    int coarse_updates = 0;
    std::vector<LossBreakdown> coarse_history;

    const bool can_coarsen = geom.dims[0] >= 6 && geom.dims[1] >= 6 && geom.dims[2] >= 6;
    if (config.coarse_to_fine && can_coarsen && config.max_iters >= 2) {
        const int coarse_iters = config.max_iters / 2;
        fine_iters = config.max_iters - coarse_iters;
        RegistrationResult coarse = optimize(fixed, moving, i_mag, config, VectorField(coarse_geometry(geom)),
                                             coarse_iters, true, progress);
        velocity = std::move(coarse.velocity);
        coarse_updates = coarse.iterations_run;
        coarse_history = std::move(coarse.loss_history);
    }

    RegistrationResult r = optimize(fixed, moving, i_mag, config, std::move(velocity), fine_iters, false, progress);
    if (!coarse_history.empty()) {
        // Coarse losses live on a different grid; keep them ahead of the fine ones.
        r.best_iteration += static_cast<int>(coarse_history.size());
        coarse_history.insert(coarse_history.end(), r.loss_history.begin(), r.loss_history.end());
        r.loss_history = std::move(coarse_history);
        r.iterations_run += coarse_updates;
    }
    r.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

} // namespace tagflow
