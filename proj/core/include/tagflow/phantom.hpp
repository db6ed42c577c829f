// phantom.hpp - Synthetic tagged volumes with known volume-preserving motion.
//
// The ground truth is the scaling-and-squaring flow of a divergence-free velocity
// v = curl A, where A is a seeded band-limited trigonometric series. Each plane
// wave of v is cos(q.x + p) (q x a), whose divergence vanishes identically.

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "tagflow/harp.hpp"
#include "tagflow/volume.hpp"

namespace tagflow {

inline constexpr double kPhantomBackground = 0.05;

struct Ellipsoid {
    Vec3 center{15.5, 15.5, 15.5};
    Vec3 semi_axes{11.0, 10.0, 9.0};
};

// Soft indicator: 1 inside, 0 outside, cosine taper across a 2-voxel band centred
// on the surface. Distance is approximated by (rho - 1) * min(semi_axes).
double tissue_indicator(const Ellipsoid &tissue, const Vec3 &x);

// Approximate signed distance in voxels, negative inside.
double tissue_signed_distance(const Ellipsoid &tissue, const Vec3 &x);

struct PhantomConfig {
    Geometry geometry = cube_geometry(32);
    double tag_wavelength = 6.0;
    Ellipsoid tissue;
    double velocity_amplitude = 2.0;
    int velocity_bandlimit = 1;
    double fading_factor = 1.0;
    double noise_sigma = 0.0;
    std::uint64_t seed = 42;
    int n_steps = 7;
    // Av, Sh, Sv tag directions.
    std::array<Vec3, 3> tag_directions{Vec3{1.0, 0.0, 0.0}, Vec3{0.0, 1.0, 0.0}, Vec3{0.0, 0.0, 1.0}};

    // Throws ConfigError naming the offending field.
    void validate() const;
};

struct PhantomPair {
    std::array<ScalarVolume, 3> fixed;  // indexed by TagOrientation
    std::array<ScalarVolume, 3> moving; // fixed warped by the truth, faded, noisy
    VectorField truth_velocity;
    VectorField truth_displacement;
    ScalarVolume tissue_mask;
};

class DivergenceFreeSeries {
  public:
    DivergenceFreeSeries(const Geometry &geom, int bandlimit, std::uint64_t seed, std::size_t n_modes = 8);

    Vec3 value(const Vec3 &x) const;
    Mat3 jacobian(const Vec3 &x) const; // [c][a] = d v_c / d x_a
    double divergence(const Vec3 &x) const;

    void set_scale(double s) { scale_ = s; }
    double scale() const { return scale_; }

    VectorField sample(const Geometry &geom) const;

  private:
    struct Mode {
        Vec3 wavevector; // radians per voxel
        Vec3 direction;  // wavevector x potential amplitude
        double phase = 0.0;
    };
    std::vector<Mode> modes_;
    double scale_ = 1.0;
};

// Series whose grid-sampled peak |v| equals amplitude (zero series for amplitude 0).
DivergenceFreeSeries make_divergence_free_series(const Geometry &geom, double amplitude, int bandlimit,
                                                 std::uint64_t seed);

VectorField make_divergence_free_velocity(const Geometry &geom, double amplitude, int bandlimit, std::uint64_t seed);

// Intensity of the tagged object at a continuous point. modulation scales the tag
// depth around the local mean (1 = full contrast).
double tagged_intensity(const Vec3 &x, const Vec3 &unit_direction, double wavelength, const Ellipsoid &tissue,
                        double modulation = 1.0);

ScalarVolume make_tagged_volume(const Geometry &geom, const Vec3 &direction, double wavelength,
                                const Ellipsoid &tissue);

PhantomPair make_phantom_pair(const PhantomConfig &config);

} // namespace tagflow
