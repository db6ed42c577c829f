// metrics.hpp - Registration accuracy and incompressibility measures.

#pragma once

#include <optional>
#include <vector>

#include "tagflow/harp.hpp"
#include "tagflow/volume.hpp"

namespace tagflow {

inline constexpr int kDefaultDetAucBins = 100;

// Root of the (mask-weighted) mean over voxels and all six channels of the
// squared channel difference. Throws if the mask weight sums to zero.
double rmse(const SinCosTrio &fixed, const SinCosTrio &warped, const ScalarVolume *mask = nullptr);

struct DetHistogram {
    std::vector<double> edges;  // n_bins + 1 values on [0, 1]
    std::vector<double> counts; // weighted mass per bin
    std::vector<double> cdf;    // normalized cumulative mass at each right edge
};

struct DetAuc {
    double auc = 0.0;
    DetHistogram histogram;
};

// Errors |det - 1| clipped to [0, 1], binned with weights i_mag into n_bins
// uniform bins ([lo, hi) except the last, which is closed). The area is the
// rectangle rule sum of cdf(right edge) * bin width.
DetAuc det_auc(const VectorField &disp, const ScalarVolume &i_mag, int n_bins = kDefaultDetAucBins);
DetAuc det_auc_from_determinant(const ScalarVolume &det, const ScalarVolume &i_mag,
                                int n_bins = kDefaultDetAucBins);

// Percentage of voxels (mask-weighted if given) with a negative determinant.
double negdet_fraction(const VectorField &disp, const ScalarVolume *mask = nullptr);
double negdet_fraction_from_determinant(const ScalarVolume &det, const ScalarVolume *mask = nullptr);

struct EndpointError {
    double mean = 0.0;
    double median = 0.0;
};

// Mask-weighted mean and weighted median (smallest error whose cumulative weight
// reaches half the total) of |est - truth|.
EndpointError endpoint_error(const VectorField &est, const VectorField &truth, const ScalarVolume &mask);

struct MetricsReport {
    double rmse_global = 0.0;
    double rmse_masked = 0.0;
    double det_auc = 0.0;
    double negdet_percent = 0.0;
    std::optional<EndpointError> endpoint;
    DetHistogram histogram;
};

MetricsReport evaluate_registration(const SinCosTrio &fixed, const SinCosTrio &moving, const ScalarVolume &i_mag,
                                    const VectorField &displacement, int n_bins = kDefaultDetAucBins,
                                    const VectorField *truth = nullptr, const ScalarVolume *tissue_mask = nullptr);

// Each moving channel pulled back through disp (clamped trilinear).
SinCosTrio warp_trio(const SinCosTrio &moving, const VectorField &disp);

} // namespace tagflow
