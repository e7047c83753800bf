#include "gspin/engine.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "gspin/errors.hpp"
#include "gspin/rng.hpp"

namespace gspin {

VolumeSequence::VolumeSequence(std::vector<std::vector<SiteId>> volumes, std::size_t n_sites)
    : volumes_(std::move(volumes)) {
    if (volumes_.empty()) throw ParameterError("volume sequence is empty");
    for (auto& v : volumes_) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        if (!v.empty() && v.back() >= n_sites)
            throw ParameterError("volume contains site " + std::to_string(v.back()) + " outside the window");
    }
    for (std::size_t i = 1; i < volumes_.size(); ++i)
        if (!std::includes(volumes_[i].begin(), volumes_[i].end(), volumes_[i - 1].begin(), volumes_[i - 1].end()))
            throw ParameterError("volume " + std::to_string(i) + " does not contain volume " + std::to_string(i - 1));
    if (volumes_.back().size() != n_sites) throw ParameterError("last volume must be the whole window");
}

VolumeSequence VolumeSequence::by_radius(const GeometricGraph& graph, std::span<const double> radii) {
    std::vector<std::vector<SiteId>> vols;
    double prev = -std::numeric_limits<double>::infinity();
    for (double r : radii) {
        if (!(r > prev)) throw ParameterError("volume radii must be strictly ascending");
        prev = r;
        std::vector<SiteId> v;
        for (SiteId x = 0; x < graph.size(); ++x)
            if (graph.radius(x) <= r) v.push_back(x);
        vols.push_back(std::move(v));
    }
    if (vols.empty() || vols.back().size() != graph.size()) vols.push_back(full(graph.size())[0]);
    return VolumeSequence(std::move(vols), graph.size());
}

VolumeSequence VolumeSequence::full(std::size_t n_sites) {
    std::vector<SiteId> all(n_sites);
    for (SiteId x = 0; x < n_sites; ++x) all[x] = x;
    return VolumeSequence({std::move(all)}, n_sites);
}

bool VolumeSequence::strictly_nested() const noexcept {
    for (std::size_t i = 1; i < volumes_.size(); ++i)
        if (volumes_[i].size() == volumes_[i - 1].size()) return false;
    return true;
}

Scheme parse_scheme(const std::string& name) {
    if (name == "tamed_em") return Scheme::tamed_em;
    if (name == "split_step_implicit") return Scheme::split_step_implicit;
    throw ParameterError("unknown scheme '" + name + "'");
}

std::string to_string(Scheme s) { return s == Scheme::tamed_em ? "tamed_em" : "split_step_implicit"; }

std::size_t SimPlan::steps() const {
    const double n = std::round(T / dt);
    if (!(n >= 1) || std::abs(n * dt - T) > 1e-9 * T) throw ParameterError("plan: T must be a positive multiple of dt");
    return static_cast<std::size_t>(n);
}

double SimPlan::time_at_step(std::size_t j) const { return j == steps() ? T : static_cast<double>(j) * dt; }

void SimPlan::validate(double R) const {
    if (!(dt > 0) || !std::isfinite(dt)) throw ParameterError("plan: dt must be positive");
    if (!(T > 0) || !std::isfinite(T)) throw ParameterError("plan: T must be positive");
    if (dt > T) throw ParameterError("plan: dt must not exceed T");
    if (replicas < 1 || replicas > 0xffffffffu) throw ParameterError("plan: replicas must be in [1, 2^32)");
    if (!(p >= std::max(2.0, R))) throw ParameterError("plan: p must be >= max(2, R)");
    if (record_stride < 1) throw ParameterError("plan: record_stride must be >= 1");
    steps();
}

InitialCondition InitialCondition::fixed_values(std::vector<double> v) {
    for (double x : v)
        if (!std::isfinite(x)) throw ParameterError("initial values must be finite");
    return {Kind::fixed, std::move(v), 0, 0};
}
InitialCondition InitialCondition::normal(double mean, double sd) {
    if (!std::isfinite(mean) || !(sd >= 0) || !std::isfinite(sd)) throw ParameterError("normal initial data: bad parameters");
    return {Kind::normal, {}, mean, sd};
}
InitialCondition InitialCondition::uniform(double lo, double hi) {
    if (!(lo <= hi) || !std::isfinite(lo) || !std::isfinite(hi)) throw ParameterError("uniform initial data: bad range");
    return {Kind::uniform, {}, lo, hi};
}

std::vector<double> InitialCondition::sample(std::size_t n_sites, std::uint64_t seed, std::uint32_t replica) const {
    if (kind == Kind::fixed) {
        if (values.size() != n_sites) throw ParameterError("initial values: length does not match the window");
        return values;
    }
    std::vector<double> out(n_sites);
    for (SiteId x = 0; x < n_sites; ++x)
        out[x] = kind == Kind::normal ? a + b * keyed_normal(seed, replica, x, kInitialStep)
                                      : a + (b - a) * (1.0 - keyed_uniform(seed, replica, x, kInitialStep));
    return out;
}

namespace {

double newton_implicit(const CoefficientField& field, double xi, double dt, SiteId x, std::size_t step) {
    double theta = xi;
    for (int it = 0; it < 50; ++it) {
        const double g = theta - dt * field.phi(theta) - xi;
        const double gp = 1.0 - dt * field.dphi(theta);
        const double delta = g / gp;
        if (!std::isfinite(delta)) break;
        theta -= delta;
        if (std::abs(delta) <= 1e-12 * std::max(1.0, std::abs(theta))) return theta;
    }
    throw NumericError("split-step Newton did not converge at site " + std::to_string(x) + ", step " +
                       std::to_string(step));
}

// New value of site x after grid step j -> j+1, reading the state z at step j.
double advance_site(const CoefficientField& field, SiteId x, std::span<const double> z, const SimPlan& plan,
                    std::uint32_t replica, std::size_t j, double sqrt_dt) {
    double next;
    if (plan.scheme == Scheme::tamed_em) {
        const double drift = field.drift_at(x, z);
        next = z[x] + drift * plan.dt / (1.0 + plan.dt * std::abs(drift));
    } else {
        next = newton_implicit(field, z[x], plan.dt, x, j) + plan.dt * field.pair_drift(x, z);
    }
    if (!field.deterministic()) {
        const double psi = field.diffusion_at(x, z);
        if (psi != 0.0) next += psi * sqrt_dt * keyed_normal(plan.master_seed, replica, x, j);
    }
    if (!std::isfinite(next))
        throw NumericError("non-finite state at site " + std::to_string(x) + ", step " + std::to_string(j));
    return next;
}

void step_volume(const CoefficientField& field, std::span<const SiteId> volume, std::span<const double> z,
                 std::span<double> next, const SimPlan& plan, std::uint32_t replica, std::size_t j) {
    const double sqrt_dt = std::sqrt(plan.dt);
    for (SiteId x : volume) next[x] = advance_site(field, x, z, plan, replica, j, sqrt_dt);
}

std::size_t grid_steps_to(const SimPlan& plan, double t) {
    const double n = std::round(t / plan.dt);
    if (!(t >= 0) || std::abs(n * plan.dt - t) > 1e-9 * std::max(1.0, t) || t > plan.T * (1 + 1e-12))
        throw ParameterError("time " + std::to_string(t) + " is not on the plan's grid");
    return static_cast<std::size_t>(n);
}

void check_sizes(const CoefficientField& field, std::span<const double> init) {
    if (init.size() != field.size()) throw ParameterError("initial state length does not match the window");
    for (double v : init)
        if (!std::isfinite(v)) throw ParameterError("initial state must be finite");
}

}  // namespace

Trajectory integrate_truncated(const CoefficientField& field, std::span<const SiteId> volume,
                               std::span<const double> init, const SimPlan& plan, std::uint32_t replica) {
    plan.validate(field.drift().R);
    check_sizes(field, init);
    for (SiteId x : volume)
        if (x >= field.size()) throw ParameterError("volume site out of range");
    const std::size_t n = plan.steps();
    Trajectory tr;
    tr.n_sites = init.size();
    std::vector<double> z(init.begin(), init.end()), next = z;
    auto record = [&](std::size_t j) {
        tr.steps.push_back(j);
        tr.times.push_back(plan.time_at_step(j));
        tr.data.insert(tr.data.end(), z.begin(), z.end());
    };
    record(0);
    for (std::size_t j = 0; j < n; ++j) {
        step_volume(field, volume, z, next, plan, replica, j);
        for (SiteId x : volume) z[x] = next[x];
        if ((j + 1) % plan.record_stride == 0 || j + 1 == n) record(j + 1);
    }
    return tr;
}

std::vector<double> integrate_to(const CoefficientField& field, std::span<const double> init, double t,
                                 const SimPlan& plan, std::uint32_t replica) {
    plan.validate(field.drift().R);
    check_sizes(field, init);
    const std::size_t n = grid_steps_to(plan, t);
    std::vector<SiteId> all(field.size());
    for (SiteId x = 0; x < all.size(); ++x) all[x] = x;
    std::vector<double> z(init.begin(), init.end()), next = z;
    for (std::size_t j = 0; j < n; ++j) {
        step_volume(field, all, z, next, plan, replica, j);
        z.swap(next);
    }
    return z;
}

NestedEnsemble::NestedEnsemble(SimPlan plan, VolumeSequence volumes, GraphPtr graph, std::vector<Trajectory> runs)
    : plan_(plan), volumes_(std::move(volumes)), graph_(std::move(graph)), runs_(std::move(runs)) {
    if (runs_.size() != plan_.replicas * volumes_.count()) throw ParameterError("ensemble: run count mismatch");
}

const Trajectory& NestedEnsemble::run(std::size_t replica, std::size_t volume) const {
    if (replica >= plan_.replicas || volume >= volumes_.count()) throw ParameterError("ensemble: index out of range");
    return runs_[replica * volumes_.count() + volume];
}

std::size_t NestedEnsemble::time_index(double t) const {
    const auto& ts = times();
    for (std::size_t i = 0; i < ts.size(); ++i)
        if (std::abs(ts[i] - t) <= 1e-9 * std::max(1.0, std::abs(t))) return i;
    throw ParameterError("time " + std::to_string(t) + " is not on the recorded grid");
}

NestedEnsemble run_nested(const CoefficientField& field, const VolumeSequence& volumes, const InitialCondition& init,
                          const SimPlan& plan, unsigned threads) {
    plan.validate(field.drift().R);
    if (volumes.volumes().back().size() != field.size()) throw ParameterError("volumes do not match the field's window");
    const std::size_t V = volumes.count();
    std::vector<Trajectory> runs(plan.replicas * V);
    parallel_for(runs.size(), threads, [&](std::size_t i) {
        const auto r = static_cast<std::uint32_t>(i / V);
        const auto z0 = init.sample(field.size(), plan.master_seed, r);
        runs[i] = integrate_truncated(field, volumes[i % V], z0, plan, r);
    });
    return NestedEnsemble(plan, volumes, field.graph(), std::move(runs));
}

MeanStderr moment_p(const NestedEnsemble& ens, std::size_t volume, SiteId x, std::size_t row, double p) {
    if (x >= ens.graph()->size() || row >= ens.times().size()) throw ParameterError("moment_p: index out of range");
    std::vector<double> v(ens.replicas());
    for (std::size_t r = 0; r < v.size(); ++r) v[r] = std::pow(std::abs(ens.run(r, volume).at(row, x)), p);
    return mean_stderr(v);
}

MeanStderr moment_p(const NestedEnsemble& ens, std::size_t volume, SiteId x, std::size_t row) {
    return moment_p(ens, volume, x, row, ens.plan().p);
}

GapEstimate cauchy_gap(const NestedEnsemble& ens, std::size_t n, std::size_t m, double beta, double p) {
    if (n > m || m >= ens.volume_count()) throw ParameterError("cauchy_gap: need n <= m < volume count");
    if (!(p >= 1)) throw ParameterError("cauchy_gap: p must be >= 1");
    GapEstimate out;
    if (n == m) return out;
    const auto& g = *ens.graph();
    std::vector<double> w(g.size());
    for (SiteId x = 0; x < g.size(); ++x) w[x] = std::exp(-beta * g.radius(x));
    const auto& outer = ens.volumes()[m];
    std::vector<double> terms(outer.size()), per_replica(ens.replicas());
    for (std::size_t row = 0; row < ens.times().size(); ++row) {
        for (std::size_t r = 0; r < ens.replicas(); ++r) {
            const auto a = ens.run(r, n).row(row), b = ens.run(r, m).row(row);
            for (std::size_t i = 0; i < outer.size(); ++i)
                terms[i] = w[outer[i]] * std::pow(std::abs(a[outer[i]] - b[outer[i]]), p);
            per_replica[r] = pairwise_sum(terms);
        }
        const auto ms = mean_stderr(per_replica);
        if (row == 0 || ms.mean > out.value) out = {ms.mean, ms.se, row};
    }
    return out;
}

double uniform_moment(const NestedEnsemble& ens, double beta, double p, std::size_t upto) {
    if (upto >= ens.volume_count()) throw ParameterError("uniform_moment: volume index out of range");
    const auto& g = *ens.graph();
    std::vector<double> terms(g.size());
    for (SiteId x = 0; x < g.size(); ++x) {
        double sup = 0.0;
        for (std::size_t v = 0; v <= upto; ++v)
            for (std::size_t row = 0; row < ens.times().size(); ++row)
                sup = std::max(sup, moment_p(ens, v, x, row, p).mean);
        terms[x] = std::exp(-beta * g.radius(x)) * sup;
    }
    return pairwise_sum(terms);
}

std::vector<double> tagged_particle_solve(const CoefficientField& field, SiteId x, const Trajectory& env,
                                          double init_x, const SimPlan& plan, std::uint32_t replica) {
    plan.validate(field.drift().R);
    const std::size_t n = plan.steps();
    if (x >= field.size() || env.n_sites != field.size()) throw ParameterError("tagged particle: site/env mismatch");
    if (env.rows() != n + 1) throw ParameterError("tagged particle: env must be recorded at every grid step");
    if (!std::isfinite(init_x)) throw ParameterError("tagged particle: initial value must be finite");
    const double sqrt_dt = std::sqrt(plan.dt);
    std::vector<double> eta(n + 1);
    eta[0] = init_x;
    std::vector<double> z(env.row(0).begin(), env.row(0).end());
    for (std::size_t j = 0; j < n; ++j) {
        z.assign(env.row(j).begin(), env.row(j).end());
        z[x] = eta[j];
        eta[j + 1] = advance_site(field, x, z, plan, replica, j, sqrt_dt);
    }
    return eta;
}

MeanStderr tagged_gap(const NestedEnsemble& ens, std::size_t volume, SiteId x,
                      std::span<const std::vector<double>> eta, double p) {
    if (eta.size() != ens.replicas()) throw ParameterError("tagged_gap: one eta path per replica required");
    std::vector<double> v(ens.replicas());
    for (std::size_t r = 0; r < v.size(); ++r) {
        const auto& tr = ens.run(r, volume);
        double sup = 0.0;
        for (std::size_t row = 0; row < tr.rows(); ++row)
            sup = std::max(sup, std::pow(std::abs(eta[r].at(tr.steps[row]) - tr.at(row, x)), p));
        v[r] = sup;
    }
    return mean_stderr(v);
}

MeanStderr semigroup_apply(const CoefficientField& field, const Observable& f, std::span<const double> zeta,
                           double t, const SimPlan& plan, unsigned threads) {
    plan.validate(field.drift().R);
    check_sizes(field, zeta);
    if (grid_steps_to(plan, t) == 0) return {f(zeta), 0.0};
    std::vector<double> v(plan.replicas);
    parallel_for(v.size(), threads, [&](std::size_t r) {
        v[r] = f(integrate_to(field, zeta, t, plan, static_cast<std::uint32_t>(r)));
    });
    return mean_stderr(v);
}

void write_moments_csv(std::ostream& out, const NestedEnsemble& ens, std::size_t volume, double p) {
    out << "site_id,t,p,mean,stderr\n" << std::setprecision(17);
    for (SiteId x = 0; x < ens.graph()->size(); ++x)
        for (std::size_t row = 0; row < ens.times().size(); ++row) {
            const auto m = moment_p(ens, volume, x, row, p);
            out << x << ',' << ens.times()[row] << ',' << p << ',' << m.mean << ',' << m.se << '\n';
        }
}

void write_trajectories_csv(std::ostream& out, const NestedEnsemble& ens) {
    out << "replica,volume,site,step,value\n" << std::setprecision(17);
    for (std::size_t r = 0; r < ens.replicas(); ++r)
        for (std::size_t v = 0; v < ens.volume_count(); ++v) {
            const auto& tr = ens.run(r, v);
            for (SiteId x = 0; x < tr.n_sites; ++x)
                for (std::size_t row = 0; row < tr.rows(); ++row)
                    out << r << ',' << v << ',' << x << ',' << tr.steps[row] << ',' << tr.at(row, x) << '\n';
        }
}

}  // namespace gspin
