// metrics.cpp - Registration accuracy and incompressibility measures.

#include "tagflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "tagflow/grid.hpp"

namespace tagflow {

double rmse(const SinCosTrio &fixed, const SinCosTrio &warped, const ScalarVolume *mask) {
    fixed.validate();
    warped.validate();
    require_same_geometry(fixed.geometry(), warped.geometry(), "rmse");
    if (mask != nullptr) {
        require_same_geometry(fixed.geometry(), mask->geometry(), "rmse");
    }
    const std::size_t count = fixed.geometry().voxel_count();
    double weighted = 0.0;
    double weight_sum = 0.0;
    for (std::size_t n = 0; n < count; ++n) {
        const double w = mask != nullptr ? (*mask)[n] : 1.0;
        double sq = 0.0;
        for (std::size_t c = 0; c < SinCosTrio::kChannels; ++c) {
            const double d = fixed.channel(c)[n] - warped.channel(c)[n];
            sq += d * d;
        }
        weighted += w * sq;
        weight_sum += w * static_cast<double>(SinCosTrio::kChannels);
    }
    if (!(weight_sum > 0.0)) {
        throw std::invalid_argument("rmse: mask has zero total weight");
    }
    return std::sqrt(weighted / weight_sum);
}

DetAuc det_auc_from_determinant(const ScalarVolume &det, const ScalarVolume &i_mag, int n_bins) {
    require_same_geometry(det.geometry(), i_mag.geometry(), "det_auc");
    if (n_bins < 2) {
        throw std::invalid_argument("det_auc: n_bins must be >= 2");
    }
    const auto bins = static_cast<std::size_t>(n_bins);
    DetAuc out;
    DetHistogram &h = out.histogram;
    h.edges.resize(bins + 1);
    for (std::size_t b = 0; b <= bins; ++b) {
        h.edges[b] = static_cast<double>(b) / static_cast<double>(bins);
    }
    h.counts.assign(bins, 0.0);

    for (std::size_t n = 0; n < det.size(); ++n) {
        const double e = std::clamp(std::abs(det[n] - 1.0), 0.0, 1.0);
        const auto b = std::min(static_cast<std::size_t>(e * static_cast<double>(bins)), bins - 1);
        h.counts[b] += i_mag[n];
    }
    double total = 0.0;
    for (double c : h.counts) {
        total += c;
    }
    if (!(total > 0.0)) {
        throw std::invalid_argument("det_auc: magnitude weights sum to zero");
    }

    h.cdf.resize(bins);
    double running = 0.0;
    double cdf_sum = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
        running += h.counts[b];
        h.cdf[b] = running / total;
        cdf_sum += h.cdf[b];
    }
    out.auc = cdf_sum / static_cast<double>(bins);
    return out;
}

DetAuc det_auc(const VectorField &disp, const ScalarVolume &i_mag, int n_bins) {
    return det_auc_from_determinant(jacobian_determinant(disp), i_mag, n_bins);
}

double negdet_fraction_from_determinant(const ScalarVolume &det, const ScalarVolume *mask) {
    if (mask != nullptr) {
        require_same_geometry(det.geometry(), mask->geometry(), "negdet_fraction");
    }
    double negative = 0.0;
    double total = 0.0;
    for (std::size_t n = 0; n < det.size(); ++n) {
        const double w = mask != nullptr ? (*mask)[n] : 1.0;
        total += w;
        if (det[n] < 0.0) {
            negative += w;
        }
    }
    if (!(total > 0.0)) {
        throw std::invalid_argument("negdet_fraction: mask has zero total weight");
    }
    return 100.0 * negative / total;
}

double negdet_fraction(const VectorField &disp, const ScalarVolume *mask) {
    return negdet_fraction_from_determinant(jacobian_determinant(disp), mask);
}

EndpointError endpoint_error(const VectorField &est, const VectorField &truth, const ScalarVolume &mask) {
    require_same_geometry(est.geometry(), truth.geometry(), "endpoint_error");
    require_same_geometry(est.geometry(), mask.geometry(), "endpoint_error");

    std::vector<std::pair<double, double>> samples; // (error, weight)
    samples.reserve(est.size());
    double weighted = 0.0;
    double total = 0.0;
    for (std::size_t n = 0; n < est.size(); ++n) {
        const double e = norm(est[n] - truth[n]);
        const double w = mask[n];
        weighted += w * e;
        total += w;
        if (w > 0.0) {
            samples.emplace_back(e, w);
        }
    }
    if (!(total > 0.0)) {
        throw std::invalid_argument("endpoint_error: mask has zero total weight");
    }
    std::sort(samples.begin(), samples.end());
    EndpointError out;
    out.mean = weighted / total;
    double running = 0.0;
    for (const auto &[e, w] : samples) {
        running += w;
        if (running >= 0.5 * total) {
            out.median = e;
            break;
        }
    }
    return out;
}

SinCosTrio warp_trio(const SinCosTrio &moving, const VectorField &disp) {
    SinCosTrio out;
    for (std::size_t c = 0; c < SinCosTrio::kChannels; ++c) {
        out.channel(c) = warp_scalar(moving.channel(c), disp, BoundaryPolicy::Clamp);
    }
    return out;
}

MetricsReport evaluate_registration(const SinCosTrio &fixed, const SinCosTrio &moving, const ScalarVolume &i_mag,
                                    const VectorField &displacement, int n_bins, const VectorField *truth,
                                    const ScalarVolume *tissue_mask) {
    const SinCosTrio warped = warp_trio(moving, displacement);
    const ScalarVolume det = jacobian_determinant(displacement);

    MetricsReport r;
    r.rmse_global = rmse(fixed, warped, nullptr);
    r.rmse_masked = rmse(fixed, warped, &i_mag);
    DetAuc auc = det_auc_from_determinant(det, i_mag, n_bins);
    r.det_auc = auc.auc;
    r.histogram = std::move(auc.histogram);
    r.negdet_percent = negdet_fraction_from_determinant(det, nullptr);
    if (truth != nullptr) {
        if (tissue_mask == nullptr) {
            throw std::invalid_argument("evaluate_registration: endpoint error needs a tissue mask");
        }
        r.endpoint = endpoint_error(displacement, *truth, *tissue_mask);
    }
    return r;
}

} // namespace tagflow
