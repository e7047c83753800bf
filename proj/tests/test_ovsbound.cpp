#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "gspin/errors.hpp"
#include "gspin/ovsbound.hpp"
#include "gspin/rng.hpp"
#include "oracles.hpp"

using namespace gspin;

namespace {

const ScaleInterval kScale{0.0, 1.0};

GraphPtr lattice_graph(double lo, double hi) { return make_graph(make_lattice(1, lo, hi), 1.0); }

FiniteRangeMatrix random_matrix(const GraphPtr& g, double C, double k, CounterStream& rng, bool nonneg = false) {
    FiniteRangeMatrix Q(g, C, k);
    for (SiteId x = 0; x < g->size(); ++x) {
        const double cap = C * std::pow(static_cast<double>(g->nbar(x)), k);
        auto draw = [&] { return nonneg ? cap * rng.uniform() : cap * (2 * rng.uniform() - 1); };
        Q.set(x, x, draw());
        for (SiteId y : g->neighbors(x))
            if (rng.uniform() < 0.7) Q.set(x, y, draw());
    }
    return Q;
}

}  // namespace

TEST_CASE("k_series closed forms") {
    const auto zero = k_series(0.0, 3.0, 0.5, 0.1, 0.6);
    CHECK(zero.value == 1.0);
    CHECK(zero.terms == 1);
    CHECK(std::abs(k_series(1.0, 1.0, 0.0, 0.0, 1.0).value - std::numbers::e) < 1e-12);
    CHECK(k_series(2.0, 0.5, 0.0, 0.2, 0.9).value == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
}

TEST_CASE("k_series against a 200-digit summation") {
    const double oracle = oracle::k_series_200(1.0, 1.0, 0.5, 1.0);
    CHECK(std::abs(k_series(1.0, 1.0, 0.5, 0.0, 1.0).value - oracle) <= 1e-10 * oracle);
    CHECK(std::abs(k_series(0.7, 2.0, 0.3, 0.25, 0.5).value - oracle::k_series_200(0.7, 2.0, 0.3, 0.25)) <=
          1e-10 * oracle::k_series_200(0.7, 2.0, 0.3, 0.25));
}

TEST_CASE("log_k_series agrees where both are finite") {
    CHECK(log_k_series(0.0, 1.0, 0.5, 0.0, 1.0) == 0.0);
    for (auto [L, T, q, gap] : {std::tuple{1.0, 1.0, 0.5, 1.0}, std::tuple{3.0, 2.0, 0.4, 0.3}, std::tuple{0.2, 0.5, 0.0, 0.7}})
        CHECK(log_k_series(L, T, q, 0.0, gap) == doctest::Approx(std::log(k_series(L, T, q, 0.0, gap).value)).epsilon(1e-12));
    const double big = log_k_series(30, 1, 0.5, 0.0, 0.15);
    CHECK(big > 709);
    CHECK(std::isfinite(big));
}

TEST_CASE("k_series monotonicity and errors") {
    CounterStream rng(2, 0);
    for (int i = 0; i < 50; ++i) {
        const double L = 0.1 + rng.uniform(), T = 0.1 + rng.uniform(), q = 0.6 * rng.uniform();
        const double gap = 0.2 + rng.uniform();
        const double base = k_series(L, T, q, 0.0, gap).value;
        CHECK(k_series(L * 1.2, T, q, 0.0, gap).value > base);
        CHECK(k_series(L, T * 1.2, q, 0.0, gap).value > base);
        CHECK(k_series(L, T, q, 0.0, gap * 1.2).value <= base);
    }
    CHECK_THROWS_AS(k_series(1, 1, 0.5, 0.5, 0.5), ParameterError);
    CHECK_THROWS_AS(k_series(1, 1, 0.5, 0.0, 1.0, 0.0), ParameterError);
    CHECK_THROWS_AS(k_series(1, 1, 1.0, 0.0, 1.0), ParameterError);
    CHECK_THROWS_AS(k_series(200, 50, 0.9, 0.0, 0.01), NumericError);
}

TEST_CASE("ovs certificate for zero and identity") {
    const auto g = lattice_graph(0, 9);
    REQUIRE(g->size() == 10);
    const auto zero = verify_ovs_bound(FiniteRangeMatrix::zero(g), kScale, 0.5, 1e-9, 2000, 1);
    CHECK(zero.max_ratio == 0.0);
    CHECK(zero.valid());

    const double L = std::pow(kScale.width(), 0.5);
    const auto id = verify_ovs_bound(FiniteRangeMatrix::scaled_identity(g, 1.0), kScale, 0.5, L, 5000, 2);
    CHECK(id.valid());
    CHECK(id.max_ratio > 0.0);
}

TEST_CASE("integrity errors") {
    const auto g = lattice_graph(0, 5);
    FiniteRangeMatrix far(g, 10.0, 1.0);
    far.set(0, 3, 1.0);
    CHECK_THROWS_AS(verify_ovs_bound(far, kScale, 0.5, 1.0, 10, 1), IntegrityError);
    FiniteRangeMatrix big(g, 1.0, 1.0);
    big.set(0, 1, 5.0);  // n_0 = 2 so the cap is 2
    CHECK_THROWS_AS(big.check_integrity(), IntegrityError);
    CHECK_THROWS_AS(verify_ovs_bound(FiniteRangeMatrix::zero(g), kScale, 1.0, 1.0, 10, 1), ParameterError);
}

TEST_CASE("estimate_L closed forms") {
    const auto g = lattice_graph(-4, 4);
    CHECK(estimate_L(FiniteRangeMatrix::zero(g), kScale, 0.5, 100, 1) == 0.0);
    for (double c : {0.5, -3.0}) {
        const double L = estimate_L(FiniteRangeMatrix::scaled_identity(g, c), kScale, 0.5, 1000, 3);
        CHECK(L == doctest::Approx(1.1 * std::abs(c) * std::pow(kScale.width(), 0.5)).epsilon(1e-12));
    }
}

TEST_CASE("two-phase certification on random and lattice matrices") {
    CounterStream rng(9, 0);
    const auto g = make_graph(sample_poisson(5, Box::cube(1, -5, 5), 4), 1.0);
    REQUIRE(g->size() >= 40);
    const auto Q = random_matrix(g, 2.0, 1.0, rng);
    Q.check_integrity();
    const double L = estimate_L(Q, kScale, 0.5, 10000, 11);
    const auto cert = verify_ovs_bound(Q, kScale, 0.5, L, 10000, 12);
    CHECK(cert.valid());

    const auto lat = lattice_graph(-10, 10);
    FiniteRangeMatrix nn(lat, 1.0, 1.0);
    for (SiteId x = 0; x < lat->size(); ++x)
        for (SiteId y : lat->neighbors(x)) nn.set(x, y, 1.0);
    const double Lnn = estimate_L(nn, kScale, 0.5, 5000, 1);
    CHECK(std::isfinite(Lnn));
    CHECK(verify_ovs_bound(nn, kScale, 0.5, Lnn, 5000, 99).valid());
}

TEST_CASE("series_solve closed forms") {
    const auto g = lattice_graph(0, 4);
    WeightedSeq z0(g);
    z0.set(1, 2.0);
    z0.set(3, -1.0);
    CHECK(series_solve(FiniteRangeMatrix::zero(g), z0, 1.3, kScale).entries() == z0.entries());
    const auto e = series_solve(FiniteRangeMatrix::scaled_identity(g, 1.0), z0, 0.8, kScale);
    CHECK(e.get(1) == doctest::Approx(2.0 * std::exp(0.8)).epsilon(1e-14));
    CHECK(e.get(3) == doctest::Approx(-std::exp(0.8)).epsilon(1e-14));
    CHECK(series_solve(FiniteRangeMatrix::scaled_identity(g, 1.0), z0, 0.0, kScale).entries() == z0.entries());
    CHECK_THROWS_AS(series_solve(FiniteRangeMatrix::scaled_identity(g, 1.0), z0, -1.0, kScale), ParameterError);
    CHECK_THROWS_AS(series_solve(FiniteRangeMatrix::scaled_identity(g, 1.0), z0, 5.0, kScale, 3), NumericError);
}

TEST_CASE("series_solve matches a dense matrix exponential") {
    CounterStream rng(21, 0);
    const auto g = make_graph(make_lattice(1, 0, 4), 10.0);  // 5 sites, complete graph
    const auto Q = random_matrix(g, 1.0, 1.0, rng);
    std::vector<double> z0(5);
    for (double& v : z0) v = rng.normal();
    const auto f = series_solve_dense(Q, z0, 0.7, kScale.alpha_top);
    const auto ref = oracle::expm_apply(Q, z0, 0.7);
    for (std::size_t i = 0; i < 5; ++i) CHECK(std::abs(f[i] - ref[i]) <= 1e-10);
}

TEST_CASE("series_solve preserves nonnegativity") {
    CounterStream rng(4, 4);
    const auto g = lattice_graph(-6, 6);
    for (int trial = 0; trial < 20; ++trial) {
        const auto Q = random_matrix(g, 1.0, 1.0, rng, true);
        std::vector<double> z(g->size());
        for (double& v : z) v = rng.uniform() < 0.5 ? 0.0 : rng.uniform();
        for (double v : series_solve_dense(Q, z, 2.0 * rng.uniform(), 1.0)) CHECK(v >= 0.0);
    }
}

TEST_CASE("comparison theorem: equality, zero and scaled cases") {
    const auto g = lattice_graph(0, 2);  // 3-site chain
    FiniteRangeMatrix Q(g, 1.0, 1.0);
    for (SiteId x = 0; x < 3; ++x) {
        Q.set(x, x, 0.5);
        for (SiteId y : g->neighbors(x)) Q.set(x, y, 0.3);
    }
    const std::vector<double> z{1.0, 0.5, 2.0};
    const WeightedSeq zs = WeightedSeq::from_dense(g, z);
    const double T = 1.5;

    TimePath exact, scaled, zero;
    for (int j = 0; j <= 60; ++j) {
        const double t = T * j / 60.0;
        const auto f = oracle::expm_apply(Q, z, t);
        exact.times.push_back(t);
        exact.values.push_back(f);
        scaled.times.push_back(t);
        scaled.values.push_back({0.9 * f[0], 0.9 * f[1], 0.9 * f[2]});
        zero.times.push_back(t);
        zero.values.push_back({0.0, 0.0, 0.0});
    }

    const auto tight = comparison_check(Q, exact, zs, T, kScale);
    CHECK(tight.status == ComparisonStatus::passed);
    CHECK(tight.tight());

    const auto slack = comparison_check(Q, scaled, zs, T, kScale);
    CHECK(slack.status == ComparisonStatus::passed);
    CHECK(slack.min_slack >= 0.05 - 1e-12);

    CHECK(comparison_check(Q, zero, zs, T, kScale).status == ComparisonStatus::passed);

    TimePath over = exact;
    over.values[30][1] += 0.5;
    const auto bad = comparison_check(Q, over, zs, T, kScale);
    CHECK(bad.status == ComparisonStatus::hypothesis_violated);
    CHECK(bad.hypothesis_failures > 0);

    FiniteRangeMatrix negative = Q;
    negative.set(0, 1, -0.1);
    CHECK_THROWS_AS(comparison_check(negative, exact, zs, T, kScale), ParameterError);
}

TEST_CASE("comparison never flags hypothesis-passing subsolutions") {
    CounterStream rng(77, 0);
    for (int trial = 0; trial < 20; ++trial) {
        const auto g = make_graph(sample_poisson(2, Box::cube(1, -3, 3), trial), 1.0);
        if (g->size() == 0) continue;
        const auto Q = random_matrix(g, 0.5, 1.0, rng, true);
        std::vector<double> z(g->size());
        for (double& v : z) v = rng.uniform();
        const auto path = oracle::subsolution_path(Q, z, 1.0, 100, 0.05, rng);
        const auto report = comparison_check(Q, path, WeightedSeq::from_dense(g, z), 1.0, kScale);
        CHECK(report.status != ComparisonStatus::violated);
    }
}

TEST_CASE("gronwall bound closed forms") {
    const auto single = make_graph(Configuration(Box::cube(1, -1, 1), {Point{{0.5}}}), 1.0);
    WeightedSeq b(single);
    CHECK(gronwall_bound(1.0, 1.0, single, b, kScale, 0.2, 0.7, 1.0, 0.5).bound == 0.0);

    b.set(0, 1.0);
    const auto r = gronwall_bound(1.0, 1.0, single, b, kScale, 0.2, 0.7, 1.0, 0.5);
    // Q = [1]; the sup of (beta-alpha)^q e^{-(beta-alpha)/2} over the scale is at the corner.
    CHECK(r.L == doctest::Approx(1.1 * std::exp(-0.5)).epsilon(1e-12));
    const double K = k_series(r.L, 1.0, 0.5, 0.2, 0.7).value;
    CHECK(r.bound == doctest::Approx(K * std::exp(-0.2 * 0.5)).epsilon(1e-14));
}

TEST_CASE("gronwall bound dominates simulated integral inequalities") {
    const auto g = lattice_graph(-10, 9);
    REQUIRE(g->size() == 20);
    CounterStream rng(5, 5);
    const double B = 0.3, k = 1.0, T = 1.0, alpha = 0.2, beta = 0.6;
    const auto Q = FiniteRangeMatrix::neighborhood(g, B, k);
    std::vector<double> b(g->size());
    for (double& v : b) v = rng.uniform();
    const auto path = oracle::subsolution_path(Q, b, T, 200, 0.1, rng);
    double lhs = 0.0;
    for (SiteId x = 0; x < g->size(); ++x) {
        double sup = 0.0;
        for (const auto& v : path.values) sup = std::max(sup, v[x]);
        lhs += std::exp(-beta * g->radius(x)) * sup;
    }
    const auto bound = gronwall_bound(B, k, g, WeightedSeq::from_dense(g, b), kScale, alpha, beta, T, 0.5);
    CHECK(lhs <= bound.bound);
}

TEST_CASE("matrix csv round trip") {
    CounterStream rng(3, 3);
    const auto g = lattice_graph(0, 6);
    const auto Q = random_matrix(g, 1.0, 1.0, rng);
    std::stringstream ss;
    write_matrix_csv(ss, Q);
    const auto back = read_matrix_csv(ss, g, 1.0, 1.0);
    for (SiteId x = 0; x < g->size(); ++x) CHECK(back.row(x) == Q.row(x));
}
