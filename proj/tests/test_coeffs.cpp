#include <doctest.h>

#include <cmath>

#include "gspin/coeffs.hpp"
#include "gspin/errors.hpp"
#include "gspin/rng.hpp"

using namespace gspin;

namespace {

// Centre site 0 at the origin with two leaves.
GraphPtr star3() {
    return make_graph(Configuration(Box::cube(1, -2, 2), {Point{{0.0}}, Point{{-1.0}}, Point{{1.0}}}), 1.0);
}

GraphPtr single_site() { return make_graph(Configuration(Box::cube(1, -1, 1), {Point{{0.0}}}), 1.0); }

PairTerm v_term() { return {"v", [](SiteId, SiteId, double, double v) { return v; }, 1.0, false}; }

}  // namespace

TEST_CASE("eval_drift hand sums") {
    const auto g = star3();
    const auto cubic = make_field(g, "cubic", "zero", 0, "zero", 0);
    WeightedSeq z(g);
    z.set(0, 2.0);
    CHECK(eval_drift(cubic, z, 0) == -8.0);

    const CoefficientField star(g, drift_preset("zero"), PairCoupling{v_term(), noise_preset("zero")});
    const auto ones = WeightedSeq::from_dense(g, std::vector<double>{1, 1, 1});
    CHECK(eval_drift(star, ones, 0) == 3.0);
    CHECK(eval_drift(star, ones, 1) == 2.0);

    const auto s = single_site();
    const CoefficientField iso(s, drift_preset("zero"), PairCoupling{v_term(), noise_preset("zero")});
    WeightedSeq five(s);
    five.set(0, 5.0);
    CHECK(eval_drift(iso, five, 0) == 5.0);
}

TEST_CASE("eval_diffusion hand sums") {
    const auto g = star3();
    CounterStream rng(1, 1);
    const auto additive = make_field(g, "cubic", "zero", 0, "additive", 0);
    for (int i = 0; i < 20; ++i) {
        const auto z = WeightedSeq::from_dense(g, std::vector<double>{rng.normal(), rng.normal(), rng.normal()});
        for (SiteId x = 0; x < 3; ++x) CHECK(eval_diffusion(additive, z, x) == 1.0);
    }
    const auto ones = WeightedSeq::from_dense(g, std::vector<double>{1, 1, 1});
    CHECK(eval_diffusion(make_field(g, "cubic", "zero", 0, "zero", 0), ones, 0) == 0.0);
    const CoefficientField vnoise(g, drift_preset("zero"), PairCoupling{coupling_preset("zero"), v_term()});
    CHECK(eval_diffusion(vnoise, ones, 0) == 3.0);
    CHECK(eval_diffusion(make_field(g, "cubic", "zero", 0, "linear_noise", 0.5), ones, 0) == 1.5);
}

TEST_CASE("locality") {
    const auto g = make_graph(make_lattice(1, 0, 9), 1.0);
    const auto field = make_field(g, "cubic", "linear_pair", 0.7, "linear_noise", 0.3);
    CounterStream rng(3, 0);
    std::vector<double> z(10);
    for (double& v : z) v = rng.normal();
    const double d = field.drift_at(4, z), s = field.diffusion_at(4, z);
    for (SiteId y : {0u, 1u, 2u, 6u, 7u, 8u, 9u}) z[y] = 100 * rng.normal();
    CHECK(field.drift_at(4, z) == d);
    CHECK(field.diffusion_at(4, z) == s);
}

TEST_CASE("unknown presets") {
    CHECK_THROWS_AS(drift_preset("quintic"), ParameterError);
    CHECK_THROWS_AS(coupling_preset("tent"), ParameterError);
    CHECK_THROWS_AS(noise_preset("multiplicative"), ParameterError);
}

TEST_CASE("dissipativity validator") {
    const auto g = make_graph(make_lattice(1, -3, 3), 1.0);
    const auto cubic = validate_assumptions(make_field(g, "cubic", "zero", 0, "additive", 0));
    CHECK(cubic.at("C_growth").passed);
    CHECK(cubic.at("D_dissipative").passed);
    CHECK(cubic.at("D_dissipative").samples == kDefaultValidationTrials);
    CHECK(cubic.passed());

    SinglePotentialDrift identity{"identity", [](double s) { return s; }, {}, 1, 2, 1};
    const auto lin = validate_assumptions(CoefficientField(g, identity, {coupling_preset("zero"), noise_preset("zero")}),
                                          10000);
    CHECK(lin.at("D_dissipative").passed);
    CHECK(std::abs(lin.at("D_dissipative").worst_margin) < 1e-9);

    SinglePotentialDrift square{"square", [](double s) { return s * s; }, {}, 1, 2, 5};
    const auto sq = validate_assumptions(CoefficientField(g, square, {coupling_preset("zero"), noise_preset("zero")}),
                                         10000);
    const auto& d = sq.at("D_dissipative");
    REQUIRE_FALSE(d.passed);
    REQUIRE(d.counterexample.size() == 2);
    const double s1 = d.counterexample[0], s2 = d.counterexample[1];
    CHECK((s1 - s2) * (s1 * s1 - s2 * s2) > 5 * (s1 - s2) * (s1 - s2));
    CHECK_FALSE(sq.passed());
}

TEST_CASE("shipping presets pass every check") {
    const auto g = make_graph(sample_poisson(2, Box::cube(1, -5, 5), 8), 1.0);
    for (const char* drift : {"cubic", "linear", "gradient:quartic"})
        for (auto [coupling, J] : {std::pair{"zero", 0.0}, std::pair{"linear_pair", 0.5}, std::pair{"linear_pair", -2.0}})
            for (auto [noise, M] : {std::pair{"additive", 0.0}, std::pair{"linear_noise", 0.3}}) {
                const auto r = validate_assumptions(make_field(g, drift, coupling, J, noise, M), 20000, 10.0, 5);
                INFO(drift, " ", coupling, " ", noise, "\n", r.summary());
                CHECK(r.passed());
            }
}

TEST_CASE("declared constants are checked") {
    const auto g = single_site();
    auto d = drift_preset("cubic");
    d.R = 1.5;
    CHECK_FALSE(validate_assumptions(CoefficientField(g, d, {coupling_preset("zero"), noise_preset("zero")}), 10)
                    .at("constants")
                    .passed);
    auto tight = drift_preset("cubic");
    tight.c = 0.5;  // |s^3| > 0.5 (1 + |s|^3)
    CHECK_FALSE(validate_assumptions(CoefficientField(g, tight, {coupling_preset("zero"), noise_preset("zero")}), 1000)
                    .at("C_growth")
                    .passed);
}

TEST_CASE("pairing bound fails for symmetric linear coupling on dense neighbourhoods") {
    // phi_xy(u, v) = a (u + v) is Lipschitz and linearly bounded with constant a,
    // but with n = 9 and a = (n + 1) / (8 n^2) the pairing inequality breaks.
    const auto g = make_graph(make_lattice(1, -10, 10), 4.0);
    const SiteId x = 10;
    REQUIRE(g->nbar(x) == 9);
    const double n = 9.0, a = (n + 1) / (8 * n * n);
    const PairTerm sym{"sym", [a](SiteId, SiteId, double u, double v) { return a * (u + v); }, a, false};
    const CoefficientField field(g, drift_preset("zero"), {sym, noise_preset("zero")});

    std::vector<double> z1(g->size(), 0.0), z2(g->size(), 0.0);
    z1[x] = 1.0;
    for (SiteId y : g->neighbors(x)) z1[y] = 1.0 / (a * n);
    const double expected = a * (n + 1) - 1.0 / (2 * n) - 4 * a * a * n * n;
    CHECK(expected > 0.02);
    CHECK(pairing_bound_margin(field, z1, z2, x) == doctest::Approx(expected).epsilon(1e-12));

    const auto r = validate_assumptions(field, 10000);
    CHECK(r.at("B_lipschitz").passed);
    CHECK(r.at("B_growth").passed);
}
