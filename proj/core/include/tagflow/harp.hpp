// harp.hpp - Harmonic phase extraction and the sinusoidal phase representation.
//
// A tagged volume is band-passed around its first spectral peak; the complex
// response J = D e^{i psi} gives the HARP magnitude D (anatomy) and the wrapped
// phase psi (material position within the tag pattern). Registration never sees
// psi directly, only the pair (sin psi, cos psi), which interpolates smoothly.

#pragma once

#include <array>
#include <cstddef>
#include <string_view>

#include "tagflow/volume.hpp"

namespace tagflow {

// The three acquired tag orientations: axial vertical, sagittal horizontal,
// sagittal vertical.
enum class TagOrientation : std::size_t { Av = 0, Sh = 1, Sv = 2 };

inline constexpr std::array<TagOrientation, 3> kTagOrientations{TagOrientation::Av, TagOrientation::Sh,
                                                                 TagOrientation::Sv};

std::string_view orientation_label(TagOrientation o); // "av", "sh", "sv"

struct HarpImage {
    ScalarVolume magnitude; // in [0, 1]
    ScalarVolume phase;     // in (-pi, pi]
};

struct SinCosPair {
    ScalarVolume sin;
    ScalarVolume cos;
};

// Six channels: (sin, cos) for each of Av, Sh, Sv.
struct SinCosTrio {
    std::array<SinCosPair, 3> pairs;

    static constexpr std::size_t kChannels = 6;

    // Channel c in [0, 6): pairs[c / 2].sin for even c, .cos for odd c.
    const ScalarVolume &channel(std::size_t c) const;
    ScalarVolume &channel(std::size_t c);

    const SinCosPair &operator[](TagOrientation o) const { return pairs[static_cast<std::size_t>(o)]; }
    SinCosPair &operator[](TagOrientation o) { return pairs[static_cast<std::size_t>(o)]; }

    const Geometry &geometry() const { return pairs[0].sin.geometry(); }

    // Throws GeometryMismatch unless all six channels share one geometry.
    void validate() const;
};

// Width of the Gaussian band-pass window, per axis, in cycles/voxel:
// sigma_f = kHarpSigmaFactor / wavelength. Places DC three sigmas from the peak.
inline constexpr double kHarpSigmaFactor = 1.0 / 3.0;

// Below this normalized magnitude the phase is reported as 0.
inline constexpr double kHarpPhaseFloor = 0.02;

// Trilinear resampling onto a grid of uniform spacing target_spacing (mm). The
// first voxel stays anchored; the extent is truncated to whole target voxels.
ScalarVolume resample_isotropic(const ScalarVolume &vol, double target_spacing);

// tag_direction need not be unit length (it is normalized); wavelength is in voxels.
HarpImage harp_filter(const ScalarVolume &vol, const Vec3 &tag_direction, double wavelength,
                      double phase_floor = kHarpPhaseFloor);

SinCosPair sincos_transform(const ScalarVolume &phase);

// HARP of the three tagged volumes (Av, Sh, Sv) into registration inputs.
struct HarpTrio {
    SinCosTrio sincos;
    std::array<ScalarVolume, 3> magnitude;
    ScalarVolume combined_magnitude;
};

HarpTrio harp_trio(const std::array<ScalarVolume, 3> &tagged, const std::array<Vec3, 3> &directions,
                   double wavelength, double phase_floor = kHarpPhaseFloor);

// Voxel-wise mean of the three magnitudes, clipped to [0, 1].
ScalarVolume combine_magnitude(const ScalarVolume &d_av, const ScalarVolume &d_sh, const ScalarVolume &d_sv);

} // namespace tagflow
