// objective.hpp - Registration losses and their analytic gradients.
//
// Normalization: similarity is the per-channel mean squared error summed over the
// six channels; the smoothness and incompressibility sums are divided by the voxel
// count, so the default weights carry over between grid sizes.

#pragma once

#include "tagflow/deform.hpp"
#include "tagflow/grid.hpp"
#include "tagflow/harp.hpp"
#include "tagflow/volume.hpp"

namespace tagflow {

// Per-voxel determinant penalty. LogDeterminant is the default
// I_mag |log max(det, eps)|; L1 and L2 penalize |det - 1| and (det - 1)^2 instead
// and exist for ablations. All three add the -min(det, 0) orientation term.
enum class IncompressPenalty { LogDeterminant, L1, L2 };

struct LossWeights {
    double lambda_smooth = 0.01;
    double beta_incompress = 0.4;
    double epsilon = 1e-5;
    IncompressPenalty penalty = IncompressPenalty::LogDeterminant;

    void validate() const;
};

struct LossBreakdown {
    double sim = 0.0;
    double smooth = 0.0;
    double incompress = 0.0;
    double total = 0.0;
};

struct LossAndGradient {
    double value = 0.0;
    VectorField gradient; // d value / d displacement
};

LossAndGradient sim_loss(const SinCosTrio &fixed, const SinCosTrio &moving, const VectorField &disp);

LossAndGradient smooth_loss(const VectorField &disp);

LossAndGradient incompress_loss(const VectorField &disp, const ScalarVolume &i_mag, double epsilon,
                                IncompressPenalty penalty = IncompressPenalty::LogDeterminant);

// Unnormalized per-voxel incompressibility term (the summand of incompress_loss).
ScalarVolume incompress_density(const VectorField &disp, const ScalarVolume &i_mag, double epsilon,
                                IncompressPenalty penalty = IncompressPenalty::LogDeterminant);

struct TotalLoss {
    LossBreakdown breakdown;
    VectorField gradient;     // d total / d velocity
    VectorField displacement; // integrate_velocity(param)
};

TotalLoss total_loss(const SinCosTrio &fixed, const SinCosTrio &moving, const ScalarVolume &i_mag,
                     const VelocityParam &param, const LossWeights &weights);

} // namespace tagflow
