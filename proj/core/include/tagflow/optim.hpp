// optim.hpp - Instance-specific registration by Adam on the stationary velocity.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "tagflow/objective.hpp"

namespace tagflow {

struct AdamHyper {
    double learning_rate = 0.05;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t step = 0;
};

// One bias-corrected Adam update in place. The state is sized on first use;
// afterwards a size mismatch throws std::invalid_argument.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState &state, const AdamHyper &hyper);
void adam_step(VectorField &params, const VectorField &grads, AdamState &state, const AdamHyper &hyper);

struct RegistrationConfig {
    LossWeights weights;
    int n_steps = kDefaultSquaringSteps;
    double learning_rate = 0.05;
    int max_iters = 300;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    bool coarse_to_fine = false;
    // Stop once the total loss fell by less than stop_tol (relative) over the
    // last stop_window iterations. 0 disables.
    double stop_tol = 1e-6;
    int stop_window = 20;

    void validate() const;
    AdamHyper adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_eps}; }
};

struct RegistrationResult {
    VectorField velocity;
    VectorField displacement;
    std::vector<LossBreakdown> loss_history; // one entry per evaluated iterate
    int iterations_run = 0;                  // Adam updates performed
    int best_iteration = 0;                  // index into loss_history
    double wall_time_seconds = 0.0;
};

using ProgressCallback = std::function<void(int iteration, const LossBreakdown &)>;

// Starts from zero velocity (or *initial_velocity) and returns the best iterate.
// Throws NonFiniteLoss naming the first non-finite term.
RegistrationResult register_pair(const SinCosTrio &fixed, const SinCosTrio &moving, const ScalarVolume &i_mag,
                                 const RegistrationConfig &config, const VectorField *initial_velocity = nullptr,
                                 const ProgressCallback &progress = {});

// Half-resolution lattice used by coarse_to_fine: dims halved, spacing doubled.
Geometry coarse_geometry(const Geometry &fine);

// Trilinear upsampling of a coarse velocity onto fine, values doubled (voxel units).
VectorField upsample_velocity2(const VectorField &coarse, const Geometry &fine);

// Transpose of upsample_velocity2: pulls a fine-grid gradient back onto the coarse lattice.
VectorField upsample_velocity2_adjoint(const VectorField &fine_grad, const Geometry &coarse);

} // namespace tagflow
