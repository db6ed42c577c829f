// test_objective.cpp - Similarity, smoothness and incompressibility losses and their gradients.

#include <cmath>

#include "doctest.h"
#include "test_support.hpp"

#include "tagflow/grid.hpp"
#include "tagflow/objective.hpp"
#include "tagflow/phantom.hpp"

using namespace tagflow;

namespace {

bool interior(const Geometry &g, std::size_t n) {
    const auto c = g.coords(n);
    for (std::size_t a = 0; a < 3; ++a) {
        if (c[a] == 0 || c[a] + 1 == g.dims[a]) {
            return false;
        }
    }
    return true;
}

// Naive derivative d u_c / d x_a with central differences inside, one-sided on faces.
double naive_derivative(const VectorField &u, std::size_t n, std::size_t c, std::size_t a) {
    const Geometry &g = u.geometry();
    auto q = g.coords(n);
    auto at = [&](std::size_t i) {
        auto r = q;
        r[a] = i;
        return u(r[0], r[1], r[2])[c];
    };
    if (q[a] == 0) {
        return at(1) - at(0);
    }
    if (q[a] + 1 == g.dims[a]) {
        return at(q[a]) - at(q[a] - 1);
    }
    return 0.5 * (at(q[a] + 1) - at(q[a] - 1));
}

double naive_det(const VectorField &u, std::size_t n) {
    Mat3 a{};
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t b = 0; b < 3; ++b) {
            a[c][b] = (c == b ? 1.0 : 0.0) + naive_derivative(u, n, c, b);
        }
    }
    return a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
           a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
}

double naive_incompress(const VectorField &u, const ScalarVolume &w, double eps) {
    double sum = 0.0;
    for (std::size_t n = 0; n < u.size(); ++n) {
        const double d = naive_det(u, n);
        sum += w[n] * std::abs(std::log(std::max(d, eps))) - std::min(d, 0.0);
    }
    return sum / static_cast<double>(u.size());
}

double naive_smooth(const VectorField &u) {
    double sum = 0.0;
    for (std::size_t n = 0; n < u.size(); ++n) {
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t a = 0; a < 3; ++a) {
                const double d = naive_derivative(u, n, c, a);
                sum += d * d;
            }
        }
    }
    return sum / static_cast<double>(u.size());
}

double naive_sim(const SinCosTrio &f, const SinCosTrio &m, const VectorField &u) {
    const Geometry &g = u.geometry();
    double total = 0.0;
    for (std::size_t c = 0; c < SinCosTrio::kChannels; ++c) {
        double sum = 0.0;
        for (std::size_t n = 0; n < g.voxel_count(); ++n) {
            const double r = sample_trilinear(m.channel(c), g.position(n) + u[n]) - f.channel(c)[n];
            sum += r * r;
        }
        total += sum / static_cast<double>(g.voxel_count());
    }
    return total;
}

// A smooth field with expanding, contracting and folded regions.
VectorField rough_field(const Geometry &g, std::uint64_t seed, double amplitude) {
    VectorField u = make_divergence_free_velocity(g, amplitude, 2, seed);
    u += test::random_field(g, seed + 77, 0.25 * amplitude);
    return u;
}

void check_gradient(const std::function<double(const VectorField &)> &f, const VectorField &x,
                    const VectorField &grad, std::uint64_t seed, double tol, double eps = 0.0, int probes = 20) {
    const double h = 1e-5;
    int checked = 0;
    for (std::uint64_t d = 0; checked < probes && d < 10u * static_cast<std::uint64_t>(probes); ++d) {
        const VectorField dir = test::unit_direction(x.geometry(), seed * 1000 + d);
        if (eps > 0.0 && test::det_crosses_kink(x + (-h) * dir, x + h * dir, eps)) {
            continue;
        }
        const double fd = test::directional_fd(f, x, dir, h);
        CHECK(test::probe_error(inner_product(grad, dir), fd, std::sqrt(inner_product(grad, grad))) <= tol);
        ++checked;
    }
    CHECK(checked == probes);
}

} // namespace

TEST_CASE("similarity loss is zero for identical trios at zero displacement") {
    const Geometry g = cube_geometry(6);
    const SinCosTrio t = test::random_trio(g, 4);
    const LossAndGradient l = sim_loss(t, t, VectorField(g));
    CHECK(l.value == 0.0);
    CHECK(l.gradient.max_norm() == 0.0);
}

TEST_CASE("similarity loss of a unit residual on one channel is one") {
    const Geometry g = cube_geometry(6);
    SinCosTrio f;
    SinCosTrio m;
    for (std::size_t c = 0; c < SinCosTrio::kChannels; ++c) {
        f.channel(c) = ScalarVolume(g);
        m.channel(c) = ScalarVolume(g);
    }
    m.channel(3) = ScalarVolume(g, 1.0);
    const LossAndGradient l = sim_loss(f, m, VectorField(g));
    CHECK(l.value == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(l.gradient.max_norm() == 0.0);
}

TEST_CASE("similarity loss matches a per-voxel sampling oracle and finite differences") {
    const Geometry g = cube_geometry(8);
    for (std::uint64_t seed : {1u, 2u}) {
        const SinCosTrio f = test::random_trio(g, seed);
        const SinCosTrio m = test::random_trio(g, seed + 10);
        VectorField u = test::random_field(g, seed + 20, 1.5);
        test::avoid_sampling_kinks(u, 1e-3);
        const LossAndGradient l = sim_loss(f, m, u);
        CHECK(l.value == doctest::Approx(naive_sim(f, m, u)).epsilon(1e-12));
        check_gradient([&](const VectorField &x) { return sim_loss(f, m, x).value; }, u, l.gradient, seed, 1e-5);
    }
    CHECK_THROWS(sim_loss(test::random_trio(g, 1), test::random_trio(cube_geometry(7), 1), VectorField(g)));
}

TEST_CASE("smoothness loss values and gradient") {
    const Geometry g = cube_geometry(8);
    CHECK(smooth_loss(VectorField(g, {0.3, -1.0, 2.0})).value == 0.0);

    // u_0(x) = x_0 has unit derivative everywhere, one-sided stencils included.
    const LossAndGradient ramp = smooth_loss(test::linear_field(g, test::diagonal(1.0, 0.0, 0.0)));
    CHECK(ramp.value == doctest::Approx(1.0).epsilon(1e-14));

    for (std::uint64_t seed : {3u, 4u}) {
        const VectorField u = test::random_field(g, seed, 1.0);
        const LossAndGradient l = smooth_loss(u);
        CHECK(l.value == doctest::Approx(naive_smooth(u)).epsilon(1e-12));
        check_gradient([](const VectorField &x) { return smooth_loss(x).value; }, u, l.gradient, seed, 1e-6);
    }
}

TEST_CASE("incompressibility fixtures") {
    const Geometry g = cube_geometry(8);
    const ScalarVolume ones(g, 1.0);
    const double eps = 1e-5;

    const LossAndGradient zero = incompress_loss(VectorField(g), ones, eps);
    CHECK(zero.value == 0.0);
    CHECK(zero.gradient.max_norm() == 0.0);

    const VectorField expand = test::linear_field(g, test::diagonal(0.1, 0.1, 0.1));
    const ScalarVolume de = incompress_density(expand, ones, eps);
    const ScalarVolume reflect_density = incompress_density(test::linear_field(g, test::diagonal(-2.0, 0.0, 0.0)), ones, eps);
    for (std::size_t n = 0; n < g.voxel_count(); ++n) {
        if (interior(g, n)) {
            CHECK(std::abs(de[n] - std::abs(std::log(1.331))) <= 1e-9);
            CHECK(std::abs(reflect_density[n] - (std::log(1e5) + 1.0)) <= 1e-9);
            CHECK(std::abs(reflect_density[n] - 12.513) <= 5e-4);
        }
    }
    CHECK(incompress_loss(expand, ones, eps).value == doctest::Approx(std::log(1.331)).epsilon(1e-12));
}

TEST_CASE("log-determinant penalty treats d and 1/d alike") {
    const Geometry g = cube_geometry(6);
    const ScalarVolume ones(g, 1.0);
    for (double d : {1.331, 2.0, 0.7, 5.0, 1e-3}) {
        const double s = std::cbrt(d);
        const ScalarVolume a = incompress_density(test::linear_field(g, test::diagonal(s - 1, s - 1, s - 1)), ones, 1e-5);
        const ScalarVolume b =
            incompress_density(test::linear_field(g, test::diagonal(1 / s - 1, 1 / s - 1, 1 / s - 1)), ones, 1e-5);
        for (std::size_t n = 0; n < a.size(); ++n) {
            CHECK(std::abs(a[n] - b[n]) <= 1e-10);
        }
    }
}

TEST_CASE("incompressibility loss matches a naive oracle and is non-negative") {
    const Geometry g = cube_geometry(8);
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const VectorField u = rough_field(g, seed, 0.5 * static_cast<double>(seed));
        const ScalarVolume w = test::random_volume(g, seed + 3, 0.0, 1.0);
        const double v = incompress_loss(u, w, 1e-5).value;
        CHECK(v == doctest::Approx(naive_incompress(u, w, 1e-5)).epsilon(1e-12));
        CHECK(v >= 0.0);
        CHECK(sim_loss(test::random_trio(g, seed), test::random_trio(g, seed + 1), u).value >= 0.0);
        CHECK(smooth_loss(u).value >= 0.0);
    }
    // Zero on volume-preserving shears.
    const VectorField shear = test::linear_field(g, {{{0.0, 0.4, 0.0}, {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}}});
    CHECK(incompress_loss(shear, ScalarVolume(g, 1.0), 1e-5).value == doctest::Approx(0.0).scale(1.0).epsilon(1e-14));
}

TEST_CASE("incompressibility gradient matches finite differences away from kinks") {
    const Geometry g = cube_geometry(8);
    const double eps = 1e-5;
    for (auto penalty : {IncompressPenalty::LogDeterminant, IncompressPenalty::L1, IncompressPenalty::L2}) {
        for (std::uint64_t seed : {5u, 6u}) {
            const VectorField u = rough_field(g, seed, 2.5);
            const ScalarVolume w =
                test::kink_masked_weights(u, test::random_volume(g, seed + 9, 0.0, 1.0), eps, 1e-3);
            const LossAndGradient l = incompress_loss(u, w, eps, penalty);
            check_gradient([&](const VectorField &x) { return incompress_loss(x, w, eps, penalty).value; }, u,
                           l.gradient, seed, 1e-5, eps);
        }
    }
}

TEST_CASE("the test field exercises negative determinants") {
    const ScalarVolume det = jacobian_determinant(rough_field(cube_geometry(8), 5, 2.5));
    CHECK(*std::min_element(det.values().begin(), det.values().end()) < 0.0);
    CHECK(*std::max_element(det.values().begin(), det.values().end()) > 1.0);
}

TEST_CASE("total loss composition") {
    const Geometry g = cube_geometry(8);
    const SinCosTrio t = test::random_trio(g, 2);
    const ScalarVolume w = test::random_volume(g, 3, 0.0, 1.0);
    const TotalLoss zero = total_loss(t, t, w, {VectorField(g), 7}, LossWeights{});
    CHECK(zero.breakdown.total == 0.0);
    CHECK(zero.gradient.max_norm() == 0.0);

    const SinCosTrio m = test::random_trio(g, 8);
    const VelocityParam p{make_divergence_free_velocity(g, 1.0, 2, 4), 7};
    LossWeights wt;
    const TotalLoss l = total_loss(t, m, w, p, wt);
    const LossBreakdown &b = l.breakdown;
    CHECK(std::abs(b.total - (b.sim + wt.lambda_smooth * b.smooth + wt.beta_incompress * b.incompress)) <= 1e-12);
    CHECK(l.displacement == integrate_velocity(p));
    CHECK(b.sim == sim_loss(t, m, l.displacement).value);

    wt.beta_incompress = 0.0;
    const TotalLoss nb = total_loss(t, m, w, p, wt);
    CHECK(nb.breakdown.total == b.sim + wt.lambda_smooth * b.smooth);
}

TEST_CASE("total loss gradient matches finite differences through the integrator") {
    const Geometry g = cube_geometry(8);
    const double eps = 1e-5;
    for (std::uint64_t seed : {1u, 2u}) {
        const SinCosTrio f = test::random_trio(g, seed);
        const SinCosTrio m = test::random_trio(g, seed + 50);
        const VelocityParam p{make_divergence_free_velocity(g, 1.5, 2, seed), 7};
        const VectorField u = integrate_velocity(p);
        const ScalarVolume w = test::kink_masked_weights(u, test::random_volume(g, seed + 5, 0.0, 1.0), eps, 1e-3);
        const LossWeights wt;
        const TotalLoss l = total_loss(f, m, w, p, wt);
        auto f_of = [&](const VectorField &v) { return total_loss(f, m, w, {v, 7}, wt).breakdown.total; };
        int checked = 0;
        for (std::uint64_t d = 0; checked < 20 && d < 200; ++d) {
            const VectorField dir = test::unit_direction(g, 7000 * seed + d);
            if (test::probe_crosses_kink(p, dir, 1e-4) ||
                test::det_crosses_kink(integrate_velocity({p.velocity + (-1e-4) * dir, 7}),
                                 integrate_velocity({p.velocity + 1e-4 * dir, 7}), eps)) {
                continue;
            }
            const double fd = test::directional_fd(f_of, p.velocity, dir, 1e-4);
            CHECK(test::probe_error(inner_product(l.gradient, dir), fd, std::sqrt(inner_product(l.gradient, l.gradient))) <=
                  1e-4);
            ++checked;
        }
        CHECK(checked == 20);
    }
}

TEST_CASE("loss weights validation names the field") {
    LossWeights w;
    w.epsilon = 0.0;
    CHECK_THROWS_AS(w.validate(), ConfigError);
    try {
        w.validate();
    } catch (const ConfigError &e) {
        CHECK(e.field() == "epsilon");
    }
    w = {};
    w.lambda_smooth = -1.0;
    CHECK_THROWS_AS(w.validate(), ConfigError);
}
