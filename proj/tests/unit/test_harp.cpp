// test_harp.cpp - Resampling, HARP filtering, sin/cos transform and magnitude fusion.

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "test_support.hpp"

#include "tagflow/harp.hpp"
#include "tagflow/phantom.hpp"

using namespace tagflow;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double wrap(double a) { return std::remainder(a, kTwoPi); }

ScalarVolume pure_tag(const Geometry &g, const Vec3 &dir, double wavelength, double shift = 0.0, double dc = 0.0,
                      double gain = 1.0) {
    ScalarVolume v(g);
    for (std::size_t n = 0; n < g.voxel_count(); ++n) {
        v[n] = gain * (dc + std::cos(kTwoPi * (dot(dir, g.position(n)) - shift) / wavelength));
    }
    return v;
}

// Worst interior deviation of phase from the analytic tag phase (minus offset).
double worst_interior_error(const ScalarVolume &phase, const Vec3 &dir, double wavelength, double offset,
                            std::size_t margin) {
    const Geometry &g = phase.geometry();
    double worst = 0.0;
    for (std::size_t n = 0; n < g.voxel_count(); ++n) {
        const auto c = g.coords(n);
        bool inside = true;
        for (std::size_t a = 0; a < 3; ++a) {
            inside = inside && c[a] >= margin && c[a] + margin < g.dims[a];
        }
        if (inside) {
            const double analytic = kTwoPi * dot(dir, g.position(n)) / wavelength - offset;
            worst = std::max(worst, std::abs(wrap(phase[n] - analytic)));
        }
    }
    return worst;
}

} // namespace

TEST_CASE("resampling onto the same isotropic grid is the identity") {
    const ScalarVolume v = test::random_volume(cube_geometry(9, 1.5), 3);
    const ScalarVolume r = resample_isotropic(v, 1.5);
    REQUIRE(r.geometry() == v.geometry());
    for (std::size_t n = 0; n < v.size(); ++n) {
        CHECK(std::abs(r[n] - v[n]) <= 1e-12);
    }
}

TEST_CASE("resampling preserves constants and anisotropic ramps") {
    Geometry g;
    g.dims = {12, 10, 6};
    g.spacing = {1.875, 1.875, 6.0};
    ScalarVolume c(g, 0.37);
    for (double x : resample_isotropic(c, 1.875).values()) {
        CHECK(x == 0.37);
    }

    // Ramp in physical millimetres.
    auto ramp = [](const Vec3 &mm) { return 0.3 * mm[0] - 0.2 * mm[1] + 0.05 * mm[2] + 1.0; };
    ScalarVolume v(g);
    for (std::size_t n = 0; n < g.voxel_count(); ++n) {
        const auto q = g.coords(n);
        v[n] = ramp({q[0] * g.spacing[0], q[1] * g.spacing[1], q[2] * g.spacing[2]});
    }
    const ScalarVolume r = resample_isotropic(v, 1.875);
    const Geometry &o = r.geometry();
    CHECK(o.spacing == Vec3{1.875, 1.875, 1.875});
    CHECK(o.dims[0] == 12);
    CHECK(o.dims[1] == 10);
    CHECK(o.dims[2] == 17); // 5 * 6 mm / 1.875 mm + 1
    for (std::size_t n = 0; n < o.voxel_count(); ++n) {
        const auto q = o.coords(n);
        const double expected = ramp({q[0] * 1.875, q[1] * 1.875, q[2] * 1.875});
        CHECK(std::abs(r[n] - expected) <= 1e-10);
    }
}

TEST_CASE("resampling rejects non-positive or too coarse targets") {
    const ScalarVolume v(cube_geometry(6, 2.0), 1.0);
    CHECK_THROWS_AS(resample_isotropic(v, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(resample_isotropic(v, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(resample_isotropic(v, 3.0), std::invalid_argument);
}

TEST_CASE("HARP phase of a pure tag matches the analytic phase") {
    const Geometry g = cube_geometry(48);
    for (std::size_t axis = 0; axis < 3; ++axis) {
        Vec3 dir{0.0, 0.0, 0.0};
        dir[axis] = 1.0;
        const HarpImage h = harp_filter(pure_tag(g, dir, 8.0), dir, 8.0);
        CHECK(worst_interior_error(h.phase, dir, 8.0, 0.0, 4) <= 0.05);
        const auto [lo, hi] = std::minmax_element(h.magnitude.values().begin(), h.magnitude.values().end());
        CHECK(*lo >= 0.99);
        CHECK(*hi <= 1.0);
    }
}

TEST_CASE("HARP phase and magnitude stay in range") {
    PhantomConfig cfg;
    cfg.noise_sigma = 0.05;
    const PhantomPair p = make_phantom_pair(cfg);
    const HarpImage h = harp_filter(p.moving[1], {0.0, 1.0, 0.0}, cfg.tag_wavelength);
    for (std::size_t n = 0; n < h.phase.size(); ++n) {
        CHECK(h.phase[n] > -std::numbers::pi);
        CHECK(h.phase[n] <= std::numbers::pi);
        CHECK(h.magnitude[n] >= 0.0);
        CHECK(h.magnitude[n] <= 1.0);
    }
}

TEST_CASE("HARP of a zero volume has zero magnitude") {
    const HarpImage h = harp_filter(ScalarVolume(cube_geometry(16)), {1.0, 0.0, 0.0}, 6.0);
    for (double m : h.magnitude.values()) {
        CHECK(m == 0.0);
    }
    for (double p : h.phase.values()) {
        CHECK(p == 0.0);
    }
}

TEST_CASE("HARP phase ignores a DC offset and a global gain") {
    const Geometry g = cube_geometry(48);
    const Vec3 dir{0.0, 1.0, 0.0};
    const HarpImage base = harp_filter(pure_tag(g, dir, 8.0), dir, 8.0);
    const HarpImage offset = harp_filter(pure_tag(g, dir, 8.0, 0.0, 0.2), dir, 8.0);
    CHECK(worst_interior_error(offset.phase, dir, 8.0, 0.0, 4) <= 0.05);
    double shift = 0.0;
    for (std::size_t n = 0; n < g.voxel_count(); ++n) {
        shift = std::max(shift, std::abs(wrap(offset.phase[n] - base.phase[n])));
    }
    CHECK(shift <= 0.05);

    PhantomConfig cfg;
    const PhantomPair p = make_phantom_pair(cfg);
    ScalarVolume scaled = p.moving[2];
    for (double &x : scaled.values()) {
        x *= 4.0;
    }
    const HarpImage a = harp_filter(p.moving[2], {0.0, 0.0, 1.0}, cfg.tag_wavelength);
    const HarpImage b = harp_filter(scaled, {0.0, 0.0, 1.0}, cfg.tag_wavelength);
    CHECK(a.phase == b.phase);
    CHECK(a.magnitude == b.magnitude);
}

TEST_CASE("HARP phase is equivariant to tag translation") {
    const Geometry g = cube_geometry(48);
    const Vec3 dir{1.0, 0.0, 0.0};
    for (double delta : {0.5, 1.7, 3.25}) {
        const HarpImage h = harp_filter(pure_tag(g, dir, 8.0, delta), dir, 8.0);
        CHECK(worst_interior_error(h.phase, dir, 8.0, kTwoPi * delta / 8.0, 4) <= 0.05);
    }
}

TEST_CASE("HARP filter rejects bad wavelengths and directions") {
    const ScalarVolume v(cube_geometry(16), 1.0);
    CHECK_THROWS_AS(harp_filter(v, {1.0, 0.0, 0.0}, 2.5), std::invalid_argument);
    CHECK_THROWS_AS(harp_filter(v, {0.0, 0.0, 0.0}, 6.0), std::invalid_argument);
    // 16 voxels hold fewer than two 10-voxel periods.
    CHECK_THROWS_AS(harp_filter(v, {1.0, 0.0, 0.0}, 10.0), std::invalid_argument);
    CHECK_NOTHROW(harp_filter(v, {1.0, 0.0, 0.0}, 8.0));
}

TEST_CASE("sincos transform values and round trip") {
    const Geometry g = cube_geometry(5);
    ScalarVolume phase(g);
    phase[0] = 0.0;
    phase[1] = std::numbers::pi / 2;
    const ScalarVolume r = test::random_volume(g, 17, -std::numbers::pi, std::numbers::pi);
    for (std::size_t n = 2; n < g.voxel_count(); ++n) {
        phase[n] = r[n];
    }
    phase[g.voxel_count() - 1] = std::numbers::pi;
    const SinCosPair sc = sincos_transform(phase);
    CHECK(sc.sin[0] == 0.0);
    CHECK(sc.cos[0] == 1.0);
    CHECK(sc.sin[1] == 1.0);
    CHECK(std::abs(sc.cos[1]) <= 1e-16);
    for (std::size_t n = 0; n < g.voxel_count(); ++n) {
        CHECK(std::abs(sc.sin[n] * sc.sin[n] + sc.cos[n] * sc.cos[n] - 1.0) <= 1e-12);
        CHECK(std::abs(std::atan2(sc.sin[n], sc.cos[n]) - phase[n]) <= 1e-12);
    }
}

TEST_CASE("trio channels pair sin and cos per orientation") {
    const Geometry g = cube_geometry(4);
    SinCosTrio t;
    for (std::size_t c = 0; c < SinCosTrio::kChannels; ++c) {
        t.channel(c) = ScalarVolume(g, double(c));
    }
    CHECK(t[TagOrientation::Av].sin[0] == 0.0);
    CHECK(t[TagOrientation::Av].cos[0] == 1.0);
    CHECK(t[TagOrientation::Sh].sin[0] == 2.0);
    CHECK(t[TagOrientation::Sv].cos[0] == 5.0);
    CHECK(orientation_label(TagOrientation::Sh) == "sh");
    CHECK_NOTHROW(t.validate());
    t.channel(3) = ScalarVolume(cube_geometry(5));
    CHECK_THROWS(t.validate());
}

TEST_CASE("magnitude fusion is the clipped voxel-wise mean") {
    const Geometry g = cube_geometry(4);
    const ScalarVolume m = test::random_volume(g, 5, 0.0, 1.0);
    const ScalarVolume same = combine_magnitude(m, m, m);
    for (std::size_t n = 0; n < g.voxel_count(); ++n) {
        CHECK(same[n] == doctest::Approx(m[n]).epsilon(1e-15));
    }
    const ScalarVolume third = combine_magnitude(ScalarVolume(g), ScalarVolume(g), ScalarVolume(g, 1.0));
    for (double x : third.values()) {
        CHECK(x == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    }
    CHECK_THROWS(combine_magnitude(m, m, ScalarVolume(cube_geometry(5))));
}

TEST_CASE("fused phantom magnitude separates tissue from background") {
    PhantomConfig cfg;
    const PhantomPair p = make_phantom_pair(cfg);
    const HarpTrio trio = harp_trio(p.fixed, cfg.tag_directions, cfg.tag_wavelength);
    double in = 0.0, in_n = 0.0, out = 0.0, out_n = 0.0;
    for (std::size_t n = 0; n < trio.combined_magnitude.size(); ++n) {
        if (p.tissue_mask[n] == 1.0) {
            in += trio.combined_magnitude[n];
            in_n += 1.0;
        } else if (p.tissue_mask[n] == 0.0) {
            out += trio.combined_magnitude[n];
            out_n += 1.0;
        }
    }
    CHECK(in / in_n >= 5.0 * (out / out_n));

    const ScalarVolume direct = combine_magnitude(trio.magnitude[0], trio.magnitude[1], trio.magnitude[2]);
    CHECK(direct == trio.combined_magnitude);
    for (std::size_t o = 0; o < 3; ++o) {
        const HarpImage h = harp_filter(p.fixed[o], cfg.tag_directions[o], cfg.tag_wavelength);
        CHECK(trio.sincos.pairs[o].sin == sincos_transform(h.phase).sin);
    }
}

TEST_CASE("phase floor zeroes low-magnitude phase") {
    PhantomConfig cfg;
    cfg.noise_sigma = 0.02;
    const PhantomPair p = make_phantom_pair(cfg);
    const HarpImage h = harp_filter(p.moving[0], {1.0, 0.0, 0.0}, cfg.tag_wavelength, 0.05);
    for (std::size_t n = 0; n < h.phase.size(); ++n) {
        if (h.magnitude[n] < 0.05) {
            CHECK(h.phase[n] == 0.0);
        }
    }
}
