// harp.cpp - Harmonic phase extraction and the sinusoidal phase representation.

#include "tagflow/harp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "tagflow/grid.hpp"

namespace tagflow {

namespace {

struct FftwFree {
    void operator()(fftw_complex *p) const { fftw_free(p); }
};
struct FftwPlanDestroy {
    void operator()(fftw_plan_s *p) const { fftw_destroy_plan(p); }
};
using FftwBuffer = std::unique_ptr<fftw_complex, FftwFree>;
using FftwPlan = std::unique_ptr<fftw_plan_s, FftwPlanDestroy>;

// Signed frequency of DFT bin b on an n-point axis, in cycles per sample.
double bin_frequency(std::size_t b, std::size_t n) {
    const auto bi = static_cast<double>(b);
    const auto ni = static_cast<double>(n);
    return (2 * b <= n) ? bi / ni : (bi - ni) / ni;
}

double wrap_phase(double p) {
    // atan2 already lands in [-pi, pi]; fold the closed end.
    return p <= -std::numbers::pi ? std::numbers::pi : p;
}

} // namespace

std::string_view orientation_label(TagOrientation o) {
    switch (o) {
    case TagOrientation::Av:
        return "av";
    case TagOrientation::Sh:
        return "sh";
    case TagOrientation::Sv:
        return "sv";
    }
    return "??";
}

const ScalarVolume &SinCosTrio::channel(std::size_t c) const {
    const SinCosPair &p = pairs.at(c / 2);
    return (c % 2 == 0) ? p.sin : p.cos;
}

ScalarVolume &SinCosTrio::channel(std::size_t c) {
    SinCosPair &p = pairs.at(c / 2);
    return (c % 2 == 0) ? p.sin : p.cos;
}

void SinCosTrio::validate() const {
    for (std::size_t c = 1; c < kChannels; ++c) {
        require_same_geometry(channel(0).geometry(), channel(c).geometry(), "SinCosTrio");
    }
}

ScalarVolume resample_isotropic(const ScalarVolume &vol, double target_spacing) {
    const Geometry &in = vol.geometry();
    if (!(target_spacing > 0.0) || !std::isfinite(target_spacing)) {
        throw std::invalid_argument("resample_isotropic: target_spacing must be > 0");
    }
    const double min_spacing = std::min({in.spacing[0], in.spacing[1], in.spacing[2]});
    if (target_spacing > min_spacing * (1.0 + 1e-12)) {
        throw std::invalid_argument("resample_isotropic: target_spacing must not exceed the finest input spacing");
    }

    Geometry out_geom;
    Vec3 scale{};
    for (std::size_t a = 0; a < 3; ++a) {
        const double extent = static_cast<double>(in.dims[a] - 1) * in.spacing[a];
        out_geom.dims[a] = static_cast<std::size_t>(std::floor(extent / target_spacing + 1e-9)) + 1;
        out_geom.spacing[a] = target_spacing;
        scale[a] = target_spacing / in.spacing[a];
    }
    ScalarVolume out(out_geom);
    for (std::size_t n = 0; n < out_geom.voxel_count(); ++n) {
        const Vec3 p = out_geom.position(n);
        out[n] = sample_trilinear(vol, {p[0] * scale[0], p[1] * scale[1], p[2] * scale[2]}, BoundaryPolicy::Clamp);
    }
    return out;
}

HarpImage harp_filter(const ScalarVolume &vol, const Vec3 &tag_direction, double wavelength, double phase_floor) {
    const Geometry &g = vol.geometry();
    if (!(wavelength >= 3.0) || !std::isfinite(wavelength)) {
        throw std::invalid_argument("harp_filter: wavelength must be >= 3 voxels");
    }
    const double dnorm = norm(tag_direction);
    if (!(dnorm > 0.0) || !std::isfinite(dnorm)) {
        throw std::invalid_argument("harp_filter: tag direction must be a non-zero finite vector");
    }
    const Vec3 dir = (1.0 / dnorm) * tag_direction;
    const Vec3 centre = (1.0 / wavelength) * dir;
    const double sigma = kHarpSigmaFactor / wavelength;

    // The tag peak must sit at least two DFT bins away from DC to be separable.
    double peak_bins_sq = 0.0;
    for (std::size_t a = 0; a < 3; ++a) {
        const double b = centre[a] * static_cast<double>(g.dims[a]);
        peak_bins_sq += b * b;
    }
    if (std::sqrt(peak_bins_sq) < 2.0) {
        throw std::invalid_argument("harp_filter: tag frequency too low for this grid (band-pass window overlaps DC)");
    }

    const std::size_t count = g.voxel_count();
    FftwBuffer buf(fftw_alloc_complex(count));
    if (!buf) {
        throw std::bad_alloc();
    }
    // FFTW is row-major with the last index fastest, so pass (nz, ny, nx).
    const int nz = static_cast<int>(g.dims[2]);
    const int ny = static_cast<int>(g.dims[1]);
    const int nx = static_cast<int>(g.dims[0]);
    FftwPlan fwd(fftw_plan_dft_3d(nz, ny, nx, buf.get(), buf.get(), FFTW_FORWARD, FFTW_ESTIMATE));
    FftwPlan inv(fftw_plan_dft_3d(nz, ny, nx, buf.get(), buf.get(), FFTW_BACKWARD, FFTW_ESTIMATE));

    for (std::size_t n = 0; n < count; ++n) {
        buf.get()[n][0] = vol[n];
        buf.get()[n][1] = 0.0;
    }
    fftw_execute(fwd.get());

    std::array<std::vector<double>, 3> axis_window;
    for (std::size_t a = 0; a < 3; ++a) {
        axis_window[a].resize(g.dims[a]);
        for (std::size_t b = 0; b < g.dims[a]; ++b) {
            const double df = bin_frequency(b, g.dims[a]) - centre[a];
            axis_window[a][b] = std::exp(-df * df / (2.0 * sigma * sigma));
        }
    }
    for (std::size_t n = 0; n < count; ++n) {
        const auto c = g.coords(n);
        const double w = axis_window[0][c[0]] * axis_window[1][c[1]] * axis_window[2][c[2]];
        buf.get()[n][0] *= w;
        buf.get()[n][1] *= w;
    }
    fftw_execute(inv.get());

    const double inv_count = 1.0 / static_cast<double>(count);
    ScalarVolume magnitude(g);
    ScalarVolume phase(g);
    std::vector<double> raw(count);
    for (std::size_t n = 0; n < count; ++n) {
        const double re = buf.get()[n][0] * inv_count;
        const double im = buf.get()[n][1] * inv_count;
        raw[n] = std::hypot(re, im);
        phase[n] = wrap_phase(std::atan2(im, re));
    }

    std::vector<double> sorted = raw;
    const auto rank = static_cast<std::size_t>(std::floor(0.99 * static_cast<double>(count - 1)));
    std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank), sorted.end());
    const double p99 = sorted[rank];

    for (std::size_t n = 0; n < count; ++n) {
        const double m = p99 > 0.0 ? raw[n] / p99 : 0.0;
        magnitude[n] = std::clamp(m, 0.0, 1.0);
        if (m < phase_floor) {
            phase[n] = 0.0;
        }
    }
    return {std::move(magnitude), std::move(phase)};
}

SinCosPair sincos_transform(const ScalarVolume &phase) {
    SinCosPair out{ScalarVolume(phase.geometry()), ScalarVolume(phase.geometry())};
    for (std::size_t n = 0; n < phase.size(); ++n) {
        out.sin[n] = std::sin(phase[n]);
        out.cos[n] = std::cos(phase[n]);
    }
    return out;
}

ScalarVolume combine_magnitude(const ScalarVolume &d_av, const ScalarVolume &d_sh, const ScalarVolume &d_sv) {
    require_same_geometry(d_av.geometry(), d_sh.geometry(), "combine_magnitude");
    require_same_geometry(d_av.geometry(), d_sv.geometry(), "combine_magnitude");
    ScalarVolume out(d_av.geometry());
    for (std::size_t n = 0; n < out.size(); ++n) {
        out[n] = std::clamp((d_av[n] + d_sh[n] + d_sv[n]) / 3.0, 0.0, 1.0);
    }
    return out;
}

HarpTrio harp_trio(const std::array<ScalarVolume, 3> &tagged, const std::array<Vec3, 3> &directions,
                   double wavelength, double phase_floor) {
    HarpTrio out;
    for (std::size_t o = 0; o < 3; ++o) {
        HarpImage h = harp_filter(tagged[o], directions[o], wavelength, phase_floor);
        out.sincos.pairs[o] = sincos_transform(h.phase);
        out.magnitude[o] = std::move(h.magnitude);
    }
    out.combined_magnitude = combine_magnitude(out.magnitude[0], out.magnitude[1], out.magnitude[2]);
    return out;
}

} // namespace tagflow
