// phantom.cpp - Synthetic tagged volumes with known volume-preserving motion.

#include "tagflow/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "tagflow/deform.hpp"
#include "tagflow/parallel.hpp"

namespace tagflow {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Separate stream for the noise so changing the noise level never perturbs the motion.
constexpr std::uint64_t kNoiseStream = 0x6e6f697365ULL;

} // namespace

double tissue_signed_distance(const Ellipsoid &tissue, const Vec3 &x) {
    double rho_sq = 0.0;
    for (std::size_t a = 0; a < 3; ++a) {
        const double d = (x[a] - tissue.center[a]) / tissue.semi_axes[a];
        rho_sq += d * d;
    }
    const double min_axis = std::min({tissue.semi_axes[0], tissue.semi_axes[1], tissue.semi_axes[2]});
    return (std::sqrt(rho_sq) - 1.0) * min_axis;
}

double tissue_indicator(const Ellipsoid &tissue, const Vec3 &x) {
    const double s = tissue_signed_distance(tissue, x);
    if (s <= -1.0) {
        return 1.0;
    }
    if (s >= 1.0) {
        return 0.0;
    }
    return 0.5 * (1.0 - std::sin(0.5 * std::numbers::pi * s));
}

void PhantomConfig::validate() const {
    try {
        geometry.validate();
    } catch (const std::invalid_argument &e) {
        throw ConfigError("geometry", e.what());
    }
    if (!(tag_wavelength >= 3.0) || !std::isfinite(tag_wavelength)) {
        throw ConfigError("tag_wavelength", "must be >= 3 voxels");
    }
    for (std::size_t a = 0; a < 3; ++a) {
        if (!(tissue.semi_axes[a] > 0.0)) {
            throw ConfigError("tissue.semi_axes", "must be > 0");
        }
        if (!std::isfinite(tissue.center[a])) {
            throw ConfigError("tissue.center", "must be finite");
        }
    }
    if (!(velocity_amplitude >= 0.0) || !std::isfinite(velocity_amplitude)) {
        throw ConfigError("velocity_amplitude", "must be >= 0");
    }
    if (velocity_bandlimit < 1) {
        throw ConfigError("velocity_bandlimit", "must be >= 1");
    }
    if (!(fading_factor >= 0.0 && fading_factor <= 1.0)) {
        throw ConfigError("fading_factor", "must lie in [0, 1]");
    }
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
        throw ConfigError("noise_sigma", "must be >= 0");
    }
    if (n_steps < 0) {
        throw ConfigError("n_steps", "must be >= 0");
    }
    for (const auto &d : tag_directions) {
        if (!(norm(d) > 0.0)) {
            throw ConfigError("tag_directions", "must be non-zero vectors");
        }
    }
    const Vec3 &d0 = tag_directions[0];
    if (std::abs(dot(d0, cross(tag_directions[1], tag_directions[2]))) <
        1e-6 * norm(d0) * norm(tag_directions[1]) * norm(tag_directions[2])) {
        throw ConfigError("tag_directions", "must be linearly independent");
    }
}

DivergenceFreeSeries::DivergenceFreeSeries(const Geometry &geom, int bandlimit, std::uint64_t seed,
                                           std::size_t n_modes) {
    if (bandlimit < 1) {
        throw std::invalid_argument("DivergenceFreeSeries: bandlimit must be >= 1");
    }
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> freq(-bandlimit, bandlimit);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, kTwoPi);

    modes_.reserve(n_modes);
    while (modes_.size() < n_modes) {
        const std::array<int, 3> k{freq(rng), freq(rng), freq(rng)};
        const Vec3 a{coef(rng), coef(rng), coef(rng)};
        const double p = phase(rng);
        if (k[0] == 0 && k[1] == 0 && k[2] == 0) {
            continue;
        }
        Mode m;
        for (std::size_t ax = 0; ax < 3; ++ax) {
            m.wavevector[ax] = kTwoPi * static_cast<double>(k[ax]) / static_cast<double>(geom.dims[ax]);
        }
        m.direction = cross(m.wavevector, a);
        m.phase = p;
        modes_.push_back(m);
    }
}

Vec3 DivergenceFreeSeries::value(const Vec3 &x) const {
    Vec3 v{0.0, 0.0, 0.0};
    for (const auto &m : modes_) {
        v += std::cos(dot(m.wavevector, x) + m.phase) * m.direction;
    }
    return scale_ * v;
}

Mat3 DivergenceFreeSeries::jacobian(const Vec3 &x) const {
    Mat3 j{};
    for (const auto &m : modes_) {
        const double s = -scale_ * std::sin(dot(m.wavevector, x) + m.phase);
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t a = 0; a < 3; ++a) {
                j[c][a] += s * m.direction[c] * m.wavevector[a];
            }
        }
    }
    return j;
}

double DivergenceFreeSeries::divergence(const Vec3 &x) const {
    const Mat3 j = jacobian(x);
    return j[0][0] + j[1][1] + j[2][2];
}

VectorField DivergenceFreeSeries::sample(const Geometry &geom) const {
    VectorField out(geom);
    parallel_for(geom.voxel_count(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t n = begin; n < end; ++n) {
            out[n] = value(geom.position(n));
        }
    });
    return out;
}

DivergenceFreeSeries make_divergence_free_series(const Geometry &geom, double amplitude, int bandlimit,
                                                 std::uint64_t seed) {
    if (!(amplitude >= 0.0)) {
        throw std::invalid_argument("make_divergence_free_series: amplitude must be >= 0");
    }
    DivergenceFreeSeries series(geom, bandlimit, seed);
    const double peak = series.sample(geom).max_norm();
    series.set_scale(peak > 0.0 ? amplitude / peak : 0.0);
    return series;
}

VectorField make_divergence_free_velocity(const Geometry &geom, double amplitude, int bandlimit,
                                          std::uint64_t seed) {
    return make_divergence_free_series(geom, amplitude, bandlimit, seed).sample(geom);
}

double tagged_intensity(const Vec3 &x, const Vec3 &unit_direction, double wavelength, const Ellipsoid &tissue,
                        double modulation) {
    const double m = tissue_indicator(tissue, x);
    const double local_mean = 0.5 * m + (1.0 - m) * kPhantomBackground;
    const double tag = 0.5 * m * std::cos(kTwoPi * dot(unit_direction, x) / wavelength);
    return local_mean + modulation * tag;
}

ScalarVolume make_tagged_volume(const Geometry &geom, const Vec3 &direction, double wavelength,
                                const Ellipsoid &tissue) {
    if (!(wavelength >= 3.0)) {
        throw std::invalid_argument("make_tagged_volume: wavelength must be >= 3 voxels");
    }
    const double dn = norm(direction);
    if (!(dn > 0.0)) {
        throw std::invalid_argument("make_tagged_volume: zero tag direction");
    }
    const Vec3 dir = (1.0 / dn) * direction;
    ScalarVolume out(geom);
    for (std::size_t n = 0; n < geom.voxel_count(); ++n) {
        out[n] = tagged_intensity(geom.position(n), dir, wavelength, tissue);
    }
    return out;
}

PhantomPair make_phantom_pair(const PhantomConfig &config) {
    config.validate();
    const Geometry &g = config.geometry;

    PhantomPair pair;
    pair.truth_velocity =
        make_divergence_free_velocity(g, config.velocity_amplitude, config.velocity_bandlimit, config.seed);
    pair.truth_displacement = integrate_velocity({pair.truth_velocity, config.n_steps});
    // Moving images are the fixed object pulled back through the inverse map, so
    // that moving(x + u(x)) = fixed(x) for the truth u.
    const VectorField inverse = integrate_velocity({-1.0 * pair.truth_velocity, config.n_steps});

    pair.tissue_mask = ScalarVolume(g);
    for (std::size_t n = 0; n < g.voxel_count(); ++n) {
        pair.tissue_mask[n] = tissue_indicator(config.tissue, g.position(n));
    }

    std::mt19937_64 noise_rng(config.seed ^ kNoiseStream);
    std::normal_distribution<double> noise(0.0, 1.0);

    for (std::size_t o = 0; o < 3; ++o) {
        const Vec3 dir = (1.0 / norm(config.tag_directions[o])) * config.tag_directions[o];
        pair.fixed[o] = make_tagged_volume(g, dir, config.tag_wavelength, config.tissue);
        ScalarVolume moving(g);
        for (std::size_t n = 0; n < g.voxel_count(); ++n) {
            const Vec3 source = g.position(n) + inverse[n];
            moving[n] = tagged_intensity(source, dir, config.tag_wavelength, config.tissue, config.fading_factor);
        }
        if (config.noise_sigma > 0.0) {
            for (std::size_t n = 0; n < g.voxel_count(); ++n) {
                moving[n] += config.noise_sigma * noise(noise_rng);
            }
        }
        pair.moving[o] = std::move(moving);
    }
    return pair;
}

} // namespace tagflow
