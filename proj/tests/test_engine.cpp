#include <doctest.h>

#include <cmath>
#include <sstream>

#include "gspin/engine.hpp"
#include "gspin/errors.hpp"
#include "oracles.hpp"

using namespace gspin;

namespace {

GraphPtr chain(int n) { return make_graph(make_lattice(1, 0, n - 1), 1.0); }

GraphPtr single_site() { return make_graph(Configuration(Box::cube(1, -1, 1), {Point{{0.0}}}), 1.0); }

SimPlan plan(double dt, double T, std::size_t replicas, std::uint64_t seed = 1,
             Scheme scheme = Scheme::tamed_em) {
    SimPlan p;
    p.dt = dt;
    p.T = T;
    p.replicas = replicas;
    p.master_seed = seed;
    p.scheme = scheme;
    p.p = 4;
    return p;
}

}  // namespace

TEST_CASE("plan and volume validation") {
    CHECK_THROWS_AS(plan(0.3, 1.0, 1).steps(), ParameterError);
    CHECK_THROWS_AS(plan(2.0, 1.0, 1).validate(), ParameterError);
    auto p = plan(0.1, 1.0, 1);
    p.p = 2.5;
    CHECK_THROWS_AS(p.validate(3.0), ParameterError);
    CHECK_NOTHROW(p.validate(2.0));
    CHECK(plan(0.1, 1.0, 1).steps() == 10);
    CHECK_THROWS_AS(VolumeSequence({{0, 1}, {0, 2}, {0, 1, 2}}, 3), ParameterError);
    CHECK_THROWS_AS(VolumeSequence({{0, 1}}, 3), ParameterError);
    CHECK(VolumeSequence({{1}, {0, 1, 2}}, 3).strictly_nested());
    CHECK_FALSE(VolumeSequence({{1}, {1}, {0, 1, 2}}, 3).strictly_nested());
    const auto g = make_graph(make_lattice(1, -5, 5), 1.0);
    const std::vector<double> radii{1.0, 3.0};
    const auto vs = VolumeSequence::by_radius(*g, radii);
    CHECK(vs.count() == 3);
    CHECK(vs[0].size() == 3);
    CHECK(vs[1].size() == 7);
    CHECK(vs[2].size() == 11);
}

TEST_CASE("zero field keeps every path constant") {
    const auto g = chain(6);
    const auto field = make_field(g, "zero", "zero", 0, "zero", 0);
    const std::vector<double> z0{1, -2, 3, 0.5, 0, 7};
    for (Scheme s : {Scheme::tamed_em, Scheme::split_step_implicit}) {
        const auto tr = integrate_truncated(field, VolumeSequence::full(6)[0], z0, plan(0.01, 0.5, 1, 1, s), 0);
        REQUIRE(tr.rows() == 51);
        for (std::size_t row = 0; row < tr.rows(); ++row)
            for (SiteId x = 0; x < 6; ++x) CHECK(tr.at(row, x) == z0[x]);
    }
    const auto ens = run_nested(field, VolumeSequence::full(6), InitialCondition::fixed_values(z0), plan(0.1, 1, 3));
    CHECK(moment_p(ens, 0, 1, 5, 2.0).mean == 4.0);
    CHECK(moment_p(ens, 0, 1, 5, 2.0).se == 0.0);
}

TEST_CASE("frozen sites stay at their initial values") {
    const auto g = chain(10);
    const auto field = make_field(g, "cubic", "linear_pair", 0.4, "linear_noise", 0.3);
    const auto vols = VolumeSequence({{3, 4, 5}, {1, 2, 3, 4, 5, 6, 7}, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}}, 10);
    for (Scheme s : {Scheme::tamed_em, Scheme::split_step_implicit}) {
        const auto ens = run_nested(field, vols, InitialCondition::normal(0, 1), plan(0.01, 0.5, 4, 9, s));
        for (std::size_t r = 0; r < 4; ++r)
            for (std::size_t v = 0; v < 2; ++v) {
                const auto& tr = ens.run(r, v);
                for (SiteId x = 0; x < 10; ++x) {
                    if (std::binary_search(vols[v].begin(), vols[v].end(), x)) continue;
                    for (std::size_t row = 1; row < tr.rows(); ++row) CHECK(tr.at(row, x) == tr.at(0, x));
                }
                CHECK(tr.at(tr.rows() - 1, 4) != tr.at(0, 4));
            }
    }
}

TEST_CASE("common random numbers and determinism") {
    const auto g = chain(8);
    const auto field = make_field(g, "cubic", "linear_pair", 0.3, "additive", 0);
    const std::vector<SiteId> all{0, 1, 2, 3, 4, 5, 6, 7};
    auto p = plan(0.01, 0.3, 6, 42);
    p.record_stride = 7;
    const auto twice = run_nested(field, VolumeSequence({all, all}, 8), InitialCondition::normal(0, 1), p);
    for (std::size_t r = 0; r < 6; ++r) CHECK(twice.run(r, 0).data == twice.run(r, 1).data);
    CHECK(twice.times().size() == 6);  // steps 0,7,14,21,28,30
    CHECK(twice.times().back() == 0.3);

    const auto z0 = InitialCondition::normal(0, 1).sample(8, 42, 2);
    CHECK(integrate_truncated(field, all, z0, p, 2).data == twice.run(2, 0).data);

    const auto vols = VolumeSequence({{3, 4}, all}, 8);
    const auto a = run_nested(field, vols, InitialCondition::normal(0, 1), p, 1);
    const auto b = run_nested(field, vols, InitialCondition::normal(0, 1), p, 4);
    for (std::size_t r = 0; r < 6; ++r)
        for (std::size_t v = 0; v < 2; ++v) CHECK(a.run(r, v).data == b.run(r, v).data);
    CHECK(a.run(0, 0).data != a.run(1, 0).data);
}

TEST_CASE("single-site OU second moment") {
    const auto field = make_field(single_site(), "linear", "zero", 0, "additive", 0);
    auto p = plan(1e-3, 2.0, 4000, 7);
    p.record_stride = 2000;
    const auto ens = run_nested(field, VolumeSequence::full(1), InitialCondition::fixed_values({0.0}), p, 0);
    const auto m = moment_p(ens, 0, 0, ens.time_index(2.0), 2.0);
    const double exact = (1 - std::exp(-4.0)) / 2;
    CHECK(std::abs(m.mean - exact) <= 3 * m.se);
}

TEST_CASE("deterministic schemes match ODE oracles") {
    // linear chain: dz/dt = (J A - I) z with A the closed-neighbourhood adjacency
    const auto g = chain(5);
    const double J = 0.4, dt = 1e-3, T = 1.0;
    const auto field = make_field(g, "linear", "linear_pair", J, "zero", 0);
    FiniteRangeMatrix Q(g, 10, 1);
    for (SiteId x = 0; x < 5; ++x) {
        Q.set(x, x, J - 1);
        for (SiteId y : g->neighbors(x)) Q.set(x, y, J);
    }
    const std::vector<double> z0{1, -0.5, 2, 0.3, -1};
    const auto exact = oracle::expm_apply(Q, z0, T);
    for (Scheme s : {Scheme::tamed_em, Scheme::split_step_implicit}) {
        const auto end = integrate_to(field, z0, T, plan(dt, T, 1, 1, s), 0);
        for (SiteId x = 0; x < 5; ++x) CHECK(std::abs(end[x] - exact[x]) <= 5 * dt);
    }

    const auto cubic = make_field(single_site(), "cubic", "zero", 0, "zero", 0);
    for (double start : {0.5, 2.0, -3.0})
        for (Scheme s : {Scheme::tamed_em, Scheme::split_step_implicit}) {
            const auto tr = integrate_truncated(cubic, std::vector<SiteId>{0}, std::vector<double>{start},
                                                plan(dt, T, 1, 1, s), 0);
            for (std::size_t row = 0; row < tr.rows(); row += 100) {
                const double t = tr.times[row];
                CHECK(std::abs(tr.at(row, 0) - start / std::sqrt(1 + 2 * start * start * t)) <= 5 * dt);
            }
        }
}

TEST_CASE("cauchy gaps") {
    const auto g = chain(30);
    const auto field = make_field(g, "linear", "linear_pair", 0.3, "additive", 0);
    const std::vector<double> radii{3, 8, 13, 20};
    const auto vols = VolumeSequence::by_radius(*g, radii);
    auto p = plan(0.01, 1.0, 60, 3);
    p.record_stride = 10;
    const auto ens = run_nested(field, vols, InitialCondition::normal(0, 1), p);
    CHECK(cauchy_gap(ens, 2, 2, 0.4, 4).value == 0.0);
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n + 1 < vols.count(); ++n) {
        const double gap = cauchy_gap(ens, n, vols.count() - 1, 0.4, 4).value;
        CHECK(gap < prev);
        CHECK(gap > 0);
        prev = gap;
    }
    CHECK_THROWS_AS(cauchy_gap(ens, 3, 1, 0.4, 4), ParameterError);

    // extra sites are isolated and start at 0 where drift and noise vanish
    const auto spread = make_graph(Configuration(Box::cube(1, 0, 20), {Point{{0.0}}, Point{{0.5}}, Point{{10.0}}, Point{{20.0}}}), 1.0);
    const auto quiet = make_field(spread, "cubic", "zero", 0, "linear_noise", 0.5);
    const auto e2 = run_nested(quiet, VolumeSequence({{0, 1}, {0, 1, 2, 3}}, 4),
                               InitialCondition::fixed_values({1.0, -1.0, 0.0, 0.0}), plan(0.01, 0.5, 5));
    CHECK(cauchy_gap(e2, 0, 1, 0.1, 2).value == 0.0);
}

TEST_CASE("tagged particle") {
    const auto g = chain(12);
    const auto field = make_field(g, "cubic", "linear_pair", 0.3, "linear_noise", 0.2);
    const auto vols = VolumeSequence({{5, 6}, {3, 4, 5, 6, 7, 8}, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11}}, 12);
    for (Scheme s : {Scheme::tamed_em, Scheme::split_step_implicit}) {
        const auto p = plan(0.01, 0.5, 8, 11, s);
        const auto ens = run_nested(field, vols, InitialCondition::normal(0, 1), p);
        std::vector<std::vector<double>> eta;
        for (std::uint32_t r = 0; r < 8; ++r) {
            const auto& env = ens.run(r, 2);
            eta.push_back(tagged_particle_solve(field, 5, env, env.at(0, 5), p, r));
            for (std::size_t row = 0; row < env.rows(); ++row) CHECK(eta.back()[row] == env.at(row, 5));
        }
        CHECK(tagged_gap(ens, 2, 5, eta, 4).mean == 0.0);
        CHECK(tagged_gap(ens, 2, 5, eta, 4).mean <= tagged_gap(ens, 1, 5, eta, 4).mean);
        CHECK(tagged_gap(ens, 0, 5, eta, 4).mean > 0.0);
    }
}

TEST_CASE("tagged particle decouples and matches a forced linear ODE") {
    const auto g = chain(4);
    auto p = plan(1e-3, 1.0, 1, 5);
    Trajectory env;
    env.n_sites = 4;
    const std::vector<double> level{0.5, 9.0, -1.0, 2.0};
    for (std::size_t j = 0; j <= p.steps(); ++j) {
        env.steps.push_back(j);
        env.times.push_back(p.time_at_step(j));
        env.data.insert(env.data.end(), level.begin(), level.end());
    }
    const auto solo = make_field(single_site(), "cubic", "zero", 0, "additive", 0);
    const auto decoupled = make_field(g, "cubic", "zero", 0, "additive", 0);
    // noiseless: site 1 of a decoupled chain behaves like an isolated site
    const auto eta = tagged_particle_solve(make_field(g, "cubic", "zero", 0, "zero", 0), 1, env, 1.5, p, 0);
    const auto ref = integrate_truncated(make_field(single_site(), "cubic", "zero", 0, "zero", 0), std::vector<SiteId>{0},
                                         std::vector<double>{1.5}, p, 0);
    for (std::size_t j = 0; j < eta.size(); ++j) CHECK(eta[j] == ref.at(j, 0));
    // with noise: site 0 of a decoupled chain against the isolated site, both keyed at site 0
    const auto a = tagged_particle_solve(decoupled, 0, env, 0.2, p, 3);
    const auto b = integrate_truncated(solo, std::vector<SiteId>{0}, std::vector<double>{0.2}, p, 3);
    for (std::size_t j = 0; j < a.size(); ++j) CHECK(a[j] == b.at(j, 0));

    const double J = 0.3;
    const auto lin = make_field(g, "linear", "linear_pair", J, "zero", 0);
    const double S = level[0] + level[2];  // neighbours of site 1
    const double rate = J - 1, eta0 = 1.5;
    const auto path = tagged_particle_solve(lin, 1, env, eta0, p, 0);
    for (std::size_t j = 0; j <= p.steps(); j += 50) {
        const double t = p.time_at_step(j);
        const double exact = -J * S / rate + (eta0 + J * S / rate) * std::exp(rate * t);
        CHECK(std::abs(path[j] - exact) <= 5 * p.dt);
    }
}

TEST_CASE("semigroup") {
    const auto g = chain(5);
    const auto field = make_field(g, "cubic", "linear_pair", 0.3, "additive", 0);
    const std::vector<double> zeta{0.3, -0.2, 1.0, 0.0, 0.5};
    const Observable f = [](std::span<const double> z) { return std::tanh(z[2]) + 0.5 * std::cos(z[0]); };
    const auto p = plan(0.01, 1.0, 2000, 17);
    const auto at0 = semigroup_apply(field, f, zeta, 0.0, p);
    CHECK(at0.mean == f(zeta));
    CHECK(at0.se == 0.0);
    const auto one = semigroup_apply(field, [](std::span<const double>) { return 1.0; }, zeta, 0.5, p);
    CHECK(one.mean == 1.0);
    CHECK(one.se == 0.0);
    CHECK_THROWS_AS(semigroup_apply(field, f, zeta, 0.555, p), ParameterError);

    // T_{0.6} f against T_{0.3}(T_{0.3} f) with independent inner noise
    const auto direct = semigroup_apply(field, f, zeta, 0.6, p, 0);
    const std::size_t outer = 400;
    std::vector<double> nested(outer);
    parallel_for(outer, 0, [&](std::size_t r) {
        const auto mid = integrate_to(field, zeta, 0.3, p, static_cast<std::uint32_t>(r));
        auto inner = plan(0.01, 1.0, 50, splitmix64(1000 + r));
        nested[r] = semigroup_apply(field, f, mid, 0.3, inner).mean;
    });
    const auto n = mean_stderr(nested);
    CHECK(std::abs(n.mean - direct.mean) <= 3 * std::hypot(n.se, direct.se));
}

TEST_CASE("numeric failures name the site and step") {
    const auto g = single_site();
    SinglePotentialDrift square{"square", [](double s) { return s * s; }, [](double s) { return 2 * s; }, 1, 2, 0};
    const CoefficientField field(g, square, {coupling_preset("zero"), noise_preset("zero")});
    try {
        integrate_truncated(field, std::vector<SiteId>{0}, std::vector<double>{1000.0},
                            plan(0.01, 0.1, 1, 1, Scheme::split_step_implicit), 0);
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("site 0, step 0") != std::string::npos);
    }
}

TEST_CASE("csv outputs") {
    const auto g = chain(2);
    const auto field = make_field(g, "zero", "zero", 0, "zero", 0);
    const auto ens = run_nested(field, VolumeSequence::full(2), InitialCondition::fixed_values({2.0, -1.0}),
                                plan(0.5, 1.0, 2));
    std::ostringstream m, t;
    write_moments_csv(m, ens, 0, 2.0);
    CHECK(m.str() ==
          "site_id,t,p,mean,stderr\n0,0,2,4,0\n0,0.5,2,4,0\n0,1,2,4,0\n1,0,2,1,0\n1,0.5,2,1,0\n1,1,2,1,0\n");
    write_trajectories_csv(t, ens);
    CHECK(t.str().rfind("replica,volume,site,step,value\n0,0,0,0,2\n", 0) == 0);
}
