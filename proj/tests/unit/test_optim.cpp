// test_optim.cpp - Adam and per-pair registration.

#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "test_support.hpp"

#include "tagflow/deform.hpp"
#include "tagflow/errors.hpp"
#include "tagflow/harp.hpp"
#include "tagflow/optim.hpp"
#include "tagflow/phantom.hpp"

using namespace tagflow;

namespace {

// Scalar reference Adam on a single coordinate.
struct ScalarAdam {
    double m = 0.0;
    double v = 0.0;
    int t = 0;

    double step(double w, double g, const AdamHyper &h) {
        ++t;
        m = h.beta1 * m + (1.0 - h.beta1) * g;
        v = h.beta2 * v + (1.0 - h.beta2) * g * g;
        const double mh = m / (1.0 - std::pow(h.beta1, t));
        const double vh = v / (1.0 - std::pow(h.beta2, t));
        return w - h.learning_rate * mh / (std::sqrt(vh) + h.eps);
    }
};

struct Inputs {
    SinCosTrio fixed;
    SinCosTrio moving;
    ScalarVolume i_mag;
};

Inputs phantom_inputs(double amplitude, std::uint64_t seed) {
    PhantomConfig pc;
    pc.velocity_amplitude = amplitude;
    pc.seed = seed;
    const PhantomPair pair = make_phantom_pair(pc);
    const HarpTrio f = harp_trio(pair.fixed, pc.tag_directions, pc.tag_wavelength);
    const HarpTrio m = harp_trio(pair.moving, pc.tag_directions, pc.tag_wavelength);
    return {f.sincos, m.sincos, f.combined_magnitude};
}

RegistrationConfig short_config(int iters) {
    RegistrationConfig c;
    c.max_iters = iters;
    return c;
}

} // namespace

TEST_CASE("adam leaves parameters unchanged on a zero gradient") {
    std::vector<double> w{1.0, -2.0, 3.5};
    const std::vector<double> g(3, 0.0);
    AdamState s;
    for (int i = 0; i < 5; ++i) {
        adam_step(w, g, s, AdamHyper{});
    }
    CHECK(w == std::vector<double>{1.0, -2.0, 3.5});
    CHECK(s.step == 5);
}

TEST_CASE("adam first step with a unit gradient moves by the learning rate") {
    const AdamHyper h{0.1, 0.9, 0.999, 1e-8};
    std::vector<double> w{0.0, 5.0};
    const std::vector<double> g{1.0, 1.0};
    AdamState s;
    adam_step(w, g, s, h);
    CHECK(w[0] == doctest::Approx(-h.learning_rate / (1.0 + h.eps)).epsilon(1e-15));
    CHECK(w[1] == doctest::Approx(5.0 - h.learning_rate / (1.0 + h.eps)).epsilon(1e-15));
}

TEST_CASE("adam on the squared norm follows the scalar reference") {
    const AdamHyper h{0.1, 0.9, 0.999, 1e-8};
    std::vector<double> w(4, 1.0);
    std::vector<ScalarAdam> ref(4);
    std::vector<double> ref_w(4, 1.0);
    AdamState s;
    std::vector<double> norms;
    for (int t = 0; t < 50; ++t) {
        std::vector<double> g(4);
        for (std::size_t i = 0; i < 4; ++i) {
            g[i] = 2.0 * w[i];
            ref_w[i] = ref[i].step(ref_w[i], 2.0 * ref_w[i], h);
        }
        adam_step(w, g, s, h);
        double sq = 0.0;
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(std::abs(w[i] - ref_w[i]) <= 1e-12);
            sq += w[i] * w[i];
        }
        norms.push_back(std::sqrt(sq));
    }
    // Fixed-rate Adam overshoots the minimum after about ten steps.
    for (std::size_t t = 1; t < 11; ++t) {
        CHECK(norms[t] < norms[t - 1]);
    }
    CHECK(norms.back() < 0.1);
}

TEST_CASE("adam rejects mismatched sizes") {
    std::vector<double> w(3, 0.0);
    AdamState s;
    CHECK_THROWS_AS(adam_step(w, std::vector<double>(2, 0.0), s, AdamHyper{}), std::invalid_argument);
    adam_step(w, std::vector<double>(3, 1.0), s, AdamHyper{});
    std::vector<double> w4(4, 0.0);
    CHECK_THROWS_AS(adam_step(w4, std::vector<double>(4, 0.0), s, AdamHyper{}), std::invalid_argument);
}

TEST_CASE("registration config validation names the field") {
    auto field_of = [](RegistrationConfig c) {
        try {
            c.validate();
        } catch (const ConfigError &e) {
            return e.field();
        }
        return std::string{};
    };
    RegistrationConfig c;
    CHECK(field_of(c).empty());
    c.learning_rate = 0.0;
    CHECK(field_of(c) == "learning_rate");
    c = {};
    c.max_iters = 0;
    CHECK(field_of(c) == "max_iters");
    c = {};
    c.adam_beta2 = 1.0;
    CHECK(field_of(c) == "adam_beta2");
    c = {};
    c.stop_window = 0;
    CHECK(field_of(c) == "stop_window");
}

TEST_CASE("registering an image to itself stays at zero motion") {
    const Inputs in = phantom_inputs(2.0, 3);
    const RegistrationResult r = register_pair(in.fixed, in.fixed, in.i_mag, short_config(20));
    const PhantomConfig pc;
    const ScalarVolume mask = make_phantom_pair(pc).tissue_mask;
    double num = 0.0;
    double den = 0.0;
    for (std::size_t n = 0; n < mask.size(); ++n) {
        num += mask[n] * norm(r.displacement[n]);
        den += mask[n];
    }
    CHECK(num / den <= 0.05);
    CHECK(r.loss_history.front().total == 0.0);
}

TEST_CASE("registration returns its best iterate, consistent with the integrator") {
    const Inputs in = phantom_inputs(1.5, 7);
    RegistrationConfig c = short_config(40);
    int calls = 0;
    const RegistrationResult r =
        register_pair(in.fixed, in.moving, in.i_mag, c, nullptr, [&](int, const LossBreakdown &) { ++calls; });
    REQUIRE(!r.loss_history.empty());
    CHECK(calls == static_cast<int>(r.loss_history.size()));
    const double best = r.loss_history[static_cast<std::size_t>(r.best_iteration)].total;
    CHECK(best <= r.loss_history.front().total);
    for (const LossBreakdown &b : r.loss_history) {
        CHECK(best <= b.total);
    }
    CHECK(best < r.loss_history.front().total);
    CHECK(r.displacement == integrate_velocity({r.velocity, c.n_steps}));
}

TEST_CASE("registration is deterministic") {
    const Inputs in = phantom_inputs(1.0, 11);
    const RegistrationResult a = register_pair(in.fixed, in.moving, in.i_mag, short_config(15));
    const RegistrationResult b = register_pair(in.fixed, in.moving, in.i_mag, short_config(15));
    CHECK(a.velocity == b.velocity);
    CHECK(a.displacement == b.displacement);
    REQUIRE(a.loss_history.size() == b.loss_history.size());
    for (std::size_t i = 0; i < a.loss_history.size(); ++i) {
        CHECK(a.loss_history[i].total == b.loss_history[i].total);
    }
}

TEST_CASE("coarse to fine registration runs and improves the loss") {
    const Inputs in = phantom_inputs(2.0, 5);
    RegistrationConfig c = short_config(30);
    c.coarse_to_fine = true;
    const RegistrationResult r = register_pair(in.fixed, in.moving, in.i_mag, c);
    const double best = r.loss_history[static_cast<std::size_t>(r.best_iteration)].total;
    const TotalLoss init = total_loss(in.fixed, in.moving, in.i_mag, {VectorField(in.i_mag.geometry()), c.n_steps},
                                      c.weights);
    CHECK(best < init.breakdown.total);
}

TEST_CASE("a non-finite similarity term is reported by name") {
    Inputs in = phantom_inputs(1.0, 2);
    in.moving.channel(3)[100] = std::numeric_limits<double>::quiet_NaN();
    try {
        register_pair(in.fixed, in.moving, in.i_mag, short_config(5));
        FAIL("expected NonFiniteLoss");
    } catch (const NonFiniteLoss &e) {
        CHECK(e.term() == "sim");
        CHECK(e.iteration() == 0);
    }
}

TEST_CASE("coarse geometry halves the lattice") {
    const Geometry fine = cube_geometry(32);
    const Geometry coarse = coarse_geometry(fine);
    for (std::size_t a = 0; a < 3; ++a) {
        CHECK(coarse.dims[a] == 16);
        CHECK(coarse.spacing[a] == 2.0 * fine.spacing[a]);
    }
}

TEST_CASE("velocity upsampling and its adjoint are transposes") {
    const Geometry fine = cube_geometry(12);
    const Geometry coarse = coarse_geometry(fine);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const VectorField x = test::gaussian_field(coarse, seed);
        const VectorField y = test::gaussian_field(fine, seed + 10);
        const double lhs = inner_product(upsample_velocity2(x, fine), y);
        const double rhs = inner_product(x, upsample_velocity2_adjoint(y, coarse));
        CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));
    }
    const VectorField c(coarse, {0.5, -1.0, 0.25});
    const VectorField up = upsample_velocity2(c, fine);
    for (std::size_t n = 0; n < up.size(); ++n) {
        CHECK(up[n][0] == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(up[n][1] == doctest::Approx(-2.0).epsilon(1e-14));
        CHECK(up[n][2] == doctest::Approx(0.5).epsilon(1e-14));
    }
}
