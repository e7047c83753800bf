#include "gspin/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <set>

#include "gspin/rng.hpp"

namespace gspin {

PairPotential PairPotential::parse(const std::string& type, double J, double radius) {
    if (!std::isfinite(J)) throw ParameterError("coupling J must be finite");
    if (!(radius > 0) || !std::isfinite(radius)) throw ParameterError("coupling radius must be positive");
    if (type == "tent") return {Type::tent, J, radius};
    if (type == "constant") return {Type::constant, J, radius};
    throw ParameterError("unknown coupling type '" + type + "'");
}

double PairPotential::operator()(double r) const noexcept {
    if (r > radius) return 0.0;
    return type == Type::constant ? J : J * (1.0 - r / radius);
}

SinglePotential SinglePotential::quartic() { return {Type::quartic, {}, {}, 0.25, 0.0, 4.0}; }
SinglePotential SinglePotential::gaussian() { return {Type::gaussian, {}, {}, 0.5, 0.0, 2.0}; }

SinglePotential SinglePotential::poly(std::vector<double> coeffs) {
    while (!coeffs.empty() && coeffs.back() == 0.0) coeffs.pop_back();
    for (double c : coeffs)
        if (!std::isfinite(c)) throw ParameterError("poly V: coefficients must be finite");
    const std::size_t deg = coeffs.empty() ? 0 : coeffs.size() - 1;
    if (deg < 2 || deg % 2 != 0 || coeffs.back() <= 0)
        throw ParameterError("poly V: need even degree >= 2 with a positive leading coefficient");
    SinglePotential s{Type::poly, std::move(coeffs), {}, 0.0, 0.0, static_cast<double>(deg)};
    s.a_V = 0.5 * s.coeffs.back();
    // b_V = sup (a_V |u|^tau - V(u)); the lower-order terms lose to the
    // remaining half of the leading term beyond a bounded range.
    double lower = 0.0;
    for (std::size_t k = 0; k < deg; ++k) lower += std::abs(s.coeffs[k]);
    const double reach = 1.0 + 2.0 * lower / s.a_V;
    double worst = 0.0;
    for (int i = -20000; i <= 20000; ++i) {
        const double u = reach * i / 20000.0;
        worst = std::max(worst, s.a_V * std::pow(std::abs(u), s.tau) - s.V(u));
    }
    s.b_V = worst * (1 + 1e-6) + 1e-9;
    return s;
}

SinglePotential SinglePotential::custom(std::function<double(double)> V, double a_V, double b_V, double tau) {
    if (!V) throw ParameterError("custom V: no function");
    return {Type::custom, {}, std::move(V), a_V, b_V, tau};
}

SinglePotential SinglePotential::parse(const std::string& type, std::vector<double> coeffs) {
    if (type == "quartic") return quartic();
    if (type == "gaussian") return gaussian();
    if (type == "poly") return poly(std::move(coeffs));
    throw ParameterError("unknown potential type '" + type + "'");
}

double SinglePotential::V(double u) const {
    switch (type) {
    case Type::quartic: return 0.25 * u * u * u * u;
    case Type::gaussian: return 0.5 * u * u;
    case Type::poly: {
        double acc = 0.0;
        for (std::size_t k = coeffs.size(); k-- > 0;) acc = acc * u + coeffs[k];
        return acc;
    }
    case Type::custom: return fn(u);
    }
    return 0.0;
}

double SinglePotential::dV(double u) const {
    switch (type) {
    case Type::quartic: return u * u * u;
    case Type::gaussian: return u;
    case Type::poly: {
        double acc = 0.0;
        for (std::size_t k = coeffs.size(); k-- > 1;) acc = acc * u + static_cast<double>(k) * coeffs[k];
        return acc;
    }
    case Type::custom: {
        const double h = 1e-6;
        return (fn(u + h) - fn(u - h)) / (2 * h);
    }
    }
    return 0.0;
}

std::string SinglePotential::name() const {
    switch (type) {
    case Type::quartic: return "quartic";
    case Type::gaussian: return "gaussian";
    case Type::poly: return "poly";
    case Type::custom: return "custom";
    }
    return "";
}

GibbsModel::GibbsModel(GraphPtr graph, PairPotential a, SinglePotential V)
    : graph_(std::move(graph)), a_(a), V_(std::move(V)) {
    if (!graph_) throw ParameterError("GibbsModel: null graph");
    if (a_.radius > graph_->rho() && a_.J != 0.0)
        throw ParameterError("GibbsModel: coupling radius exceeds the graph's interaction radius");
}

double GibbsModel::coupling(SiteId x, SiteId y) const {
    if (x == y) return 0.0;
    return a_(distance(graph_->config().point(x), graph_->config().point(y)));
}

std::vector<GibbsCheck> GibbsModel::validate(std::size_t trials, double box, std::uint64_t seed) const {
    CounterStream rng(seed, 0x6769626273);
    auto draw = [&] { return box * (2 * rng.uniform() - 1); };
    std::vector<GibbsCheck> out;

    GibbsCheck support{"support", a_.radius <= graph_->rho() || a_.J == 0.0, a_.radius - graph_->rho(),
                       "coupling radius vs rho"};
    out.push_back(support);

    GibbsCheck lower{"V_lower_bound", true, -std::numeric_limits<double>::infinity(), ""};
    for (std::size_t i = 0; i < trials; ++i) {
        const double u = draw();
        const double m = V_.a_V * std::pow(std::abs(u), V_.tau) - V_.b_V - V_.V(u);
        if (m > lower.worst_margin) lower.worst_margin = m;
        if (m > 1e-9 * (1 + std::abs(V_.V(u)))) {
            lower.passed = false;
            lower.detail = "u = " + std::to_string(u);
        }
    }
    out.push_back(lower);

    GibbsCheck growth{"W_growth", true, -std::numeric_limits<double>::infinity(), ""};
    const auto& g = *graph_;
    for (std::size_t i = 0; i < trials && g.size() > 0; ++i) {
        const auto x = static_cast<SiteId>(rng.below(g.size()));
        const auto nb = g.neighbors(x);
        if (nb.empty()) continue;
        const SiteId y = nb[rng.below(nb.size())];
        const double u = draw(), v = draw();
        const double m = std::abs(W(x, y, u, v)) - (I_W() * (std::pow(std::abs(u), r()) + std::pow(std::abs(v), r())) + J_W());
        growth.worst_margin = std::max(growth.worst_margin, m);
        if (m > 1e-9 * (1 + std::abs(u * v))) growth.passed = false;
    }
    out.push_back(growth);

    out.push_back({"tau_gt_r", V_.tau > r(), r() - V_.tau, "tau = " + std::to_string(V_.tau) + ", r = 2"});
    return out;
}

namespace {

std::vector<int> positions(std::span<const SiteId> eta, std::size_t n) {
    std::vector<int> pos(n, -1);
    for (std::size_t i = 0; i < eta.size(); ++i) {
        if (eta[i] >= n) throw ParameterError("eta contains a site outside the window");
        if (pos[eta[i]] >= 0) throw ParameterError("eta lists a site twice");
        pos[eta[i]] = static_cast<int>(i);
    }
    return pos;
}

// Energy of eta with the full state z (eta values already written into z).
double energy_in_state(const GibbsModel& m, std::span<const SiteId> eta, const std::vector<int>& pos,
                       std::span<const double> z) {
    const auto& g = *m.graph();
    double e = 0.0;
    for (SiteId x : eta)
        for (SiteId y : g.neighbors(x)) {
            if (pos[y] >= 0 && y < x) continue;
            e += m.W(x, y, z[x], z[y]);
        }
    return e;
}

}  // namespace

double local_energy(const GibbsModel& model, std::span<const SiteId> eta, std::span<const double> sigma_eta,
                    std::span<const double> z) {
    const std::size_t n = model.graph()->size();
    if (sigma_eta.size() != eta.size() || z.size() != n) throw ParameterError("local_energy: size mismatch");
    const auto pos = positions(eta, n);
    std::vector<double> state(z.begin(), z.end());
    for (std::size_t i = 0; i < eta.size(); ++i) state[eta[i]] = sigma_eta[i];
    return energy_in_state(model, eta, pos, state);
}

double integrated_autocorrelation(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 4) return 1.0;
    const double mean = pairwise_sum(x) / static_cast<double>(n);
    auto autocov = [&](std::size_t k) {
        double s = 0.0;
        for (std::size_t i = 0; i + k < n; ++i) s += (x[i] - mean) * (x[i + k] - mean);
        return s / static_cast<double>(n);
    };
    const double c0 = autocov(0);
    if (!(c0 > 0)) return 1.0;
    double tau = -1.0;
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
        double gamma = (autocov(2 * m) + autocov(2 * m + 1)) / c0;
        if (gamma <= 0) break;
        gamma = std::min(gamma, prev);  // initial monotone sequence
        prev = gamma;
        tau += 2 * gamma;
    }
    return std::max(tau, 1.0);
}

MeanStderr mean_stderr_correlated(std::span<const double> x) {
    auto m = mean_stderr(x);
    m.se *= std::sqrt(integrated_autocorrelation(x));
    return m;
}

MeanStderr SpecKernelSample::column(std::size_t i) const {
    std::vector<double> v(samples.size());
    for (std::size_t k = 0; k < samples.size(); ++k) v[k] = samples[k].at(i);
    return mean_stderr_correlated(v);
}

std::vector<double> SpecKernelSample::last_state() const {
    std::vector<double> z = boundary;
    for (std::size_t i = 0; i < eta.size(); ++i) z[eta[i]] = last[i];
    return z;
}

SpecKernelSample kernel_sample(const GibbsModel& model, std::span<const SiteId> eta, std::span<const double> boundary,
                               const ChainSpec& chain) {
    const auto& g = *model.graph();
    const std::size_t N = g.size();
    if (boundary.size() != N) throw ParameterError("kernel_sample: boundary must cover the window");
    if (chain.steps < 1 || !(chain.step_size > 0)) throw ParameterError("kernel_sample: chain parameters must be positive");
    const auto pos = positions(eta, N);
    const std::size_t n = eta.size();

    SpecKernelSample out;
    out.eta.assign(eta.begin(), eta.end());
    out.boundary.assign(boundary.begin(), boundary.end());
    std::vector<double> z(boundary.begin(), boundary.end());
    for (SiteId x : eta) z[x] = 0.0;
    if (n == 0) {
        out.samples.assign(chain.steps, {});
        out.acceptance_rate = 1.0;
        out.ess = static_cast<double>(chain.steps);
        return out;
    }

    auto log_target = [&](std::span<const double> s) {
        double v = 0.0;
        for (SiteId x : eta) v += model.V().V(s[x]);
        return -v - energy_in_state(model, eta, pos, s);
    };
    auto gradient = [&](std::span<const double> s, std::vector<double>& grad) {
        for (std::size_t i = 0; i < n; ++i) {
            const SiteId x = eta[i];
            double d = model.V().dV(s[x]);
            for (SiteId y : g.neighbors(x)) d += model.coupling(x, y) * s[y];
            grad[i] = -d;
        }
    };

    CounterStream rng(chain.seed, 0x6d616c61);
    std::vector<double> grad(n), prop = z, prop_grad(n), noise(n);
    double lp = log_target(z);
    gradient(z, grad);

    double eps = chain.step_size;
    // dual averaging (Hoffman & Gelman 2014), target acceptance 0.6
    const double delta = 0.6, gamma = 0.05, t0 = 10.0, kappa = 0.75, mu = std::log(10 * eps);
    double h_bar = 0.0, log_eps_bar = 0.0;

    std::vector<std::vector<double>> draws;
    draws.reserve(chain.steps);
    std::size_t accepted = 0;
    const std::size_t total = chain.burn_in + chain.steps;
    for (std::size_t it = 0; it < total; ++it) {
        const double s2 = std::sqrt(2 * eps);
        for (std::size_t i = 0; i < n; ++i) {
            noise[i] = rng.normal();
            prop[eta[i]] = z[eta[i]] + eps * grad[i] + s2 * noise[i];
        }
        const double lp_prop = log_target(prop);
        gradient(prop, prop_grad);
        double fwd = 0.0, back = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double a = prop[eta[i]] - z[eta[i]] - eps * grad[i];
            const double b = z[eta[i]] - prop[eta[i]] - eps * prop_grad[i];
            fwd += a * a;
            back += b * b;
        }
        const double log_alpha = lp_prop - lp - (back - fwd) / (4 * eps);
        const double alpha = std::isfinite(log_alpha) ? std::min(1.0, std::exp(log_alpha)) : 0.0;
        const bool accept = rng.uniform() <= alpha;
        if (accept) {
            for (SiteId x : eta) z[x] = prop[x];
            grad.swap(prop_grad);
            lp = lp_prop;
        } else {
            for (SiteId x : eta) prop[x] = z[x];
        }
        if (it < chain.burn_in) {
            const double m = static_cast<double>(it + 1);
            h_bar = (1 - 1 / (m + t0)) * h_bar + (delta - alpha) / (m + t0);
            const double log_eps = mu - std::sqrt(m) / gamma * h_bar;
            const double w = std::pow(m, -kappa);
            log_eps_bar = w * log_eps + (1 - w) * log_eps_bar;
            eps = std::exp(it + 1 == chain.burn_in ? log_eps_bar : log_eps);
        } else {
            accepted += accept ? 1 : 0;
            std::vector<double> row(n);
            for (std::size_t i = 0; i < n; ++i) row[i] = z[eta[i]];
            draws.push_back(std::move(row));
        }
    }

    out.step_size = eps;
    out.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(chain.steps);
    double iat = 1.0;
    std::vector<double> col(draws.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < draws.size(); ++k) col[k] = draws[k][i];
        iat = std::max(iat, integrated_autocorrelation(col));
    }
    out.iat = iat;
    out.ess = static_cast<double>(draws.size()) / iat;
    out.thin = static_cast<std::size_t>(std::ceil(iat));
    for (std::size_t k = 0; k < draws.size(); k += out.thin) out.samples.push_back(draws[k]);
    out.last = draws.back();
    if (!(out.acceptance_rate > 0.05 && out.acceptance_rate < 0.99))
        out.warnings.push_back("acceptance rate " + std::to_string(out.acceptance_rate) + " outside (0.05, 0.99)");
    if (out.ess < 10) out.warnings.push_back("effective sample size " + std::to_string(out.ess) + " below 10");
    return out;
}

TwoSampleTest paired_energy_test(const std::vector<std::vector<double>>& before,
                                 const std::vector<std::vector<double>>& after, std::size_t permutations,
                                 std::uint64_t seed) {
    const std::size_t n = before.size();
    if (after.size() != n) throw ParameterError("paired test: samples differ in size");
    TwoSampleTest out;
    out.permutations = permutations;
    if (n == 0) return out;
    auto dist = [](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
        return std::sqrt(s);
    };
    // With t_k = +1 keeping pair k as drawn and -1 swapping it,
    // S_XX + S_YY = C + t' E t, and the statistic is (T - 2 (S_XX + S_YY)) / n^2.
    std::vector<double> E(n * n);
    double T = 0.0, C = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        for (std::size_t l = 0; l < n; ++l) {
            const double aa = dist(before[k], before[l]), bb = dist(after[k], after[l]);
            const double ab = dist(before[k], after[l]), ba = dist(after[k], before[l]);
            T += aa + bb + ab + ba;
            const double same = aa + bb, diff = ab + ba;
            C += 0.5 * (same + diff);
            E[k * n + l] = 0.5 * (same - diff);
        }
    const double n2 = static_cast<double>(n) * static_cast<double>(n);
    auto stat = [&](const std::vector<double>& t) {
        double q = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            double row = 0.0;
            for (std::size_t l = 0; l < n; ++l) row += E[k * n + l] * t[l];
            q += t[k] * row;
        }
        return (T - 2 * (C + q)) / n2;
    };
    std::vector<double> t(n, 1.0);
    out.statistic = std::max(0.0, stat(t));
    const double observed = stat(t);
    CounterStream rng(seed, 0x7065726d);
    std::size_t at_least = 0;
    for (std::size_t p = 0; p < permutations; ++p) {
        for (double& v : t) v = rng.uniform() <= 0.5 ? 1.0 : -1.0;
        if (stat(t) >= observed - 1e-12 * std::abs(observed)) ++at_least;
    }
    out.p_value = static_cast<double>(1 + at_least) / static_cast<double>(1 + permutations);
    return out;
}

namespace {

std::vector<std::vector<double>> window_draws(const GibbsModel& model, const ChainSpec& chain, std::size_t count,
                                              unsigned threads, std::vector<std::string>* warnings) {
    const std::size_t N = model.graph()->size();
    std::vector<SiteId> all(N);
    for (SiteId x = 0; x < N; ++x) all[x] = x;
    const std::vector<double> zero(N, 0.0);
    std::vector<std::vector<double>> out(count);
    std::vector<std::vector<std::string>> warn(count);
    parallel_for(count, threads, [&](std::size_t i) {
        ChainSpec c = chain;
        c.seed = chain.seed + i;
        auto s = kernel_sample(model, all, zero, c);
        out[i] = s.last_state();
        warn[i] = std::move(s.warnings);
    });
    if (warnings) {
        std::set<std::string> seen(warnings->begin(), warnings->end());
        for (auto& w : warn)
            for (auto& m : w)
                if (seen.insert(m).second) warnings->push_back(m);
    }
    return out;
}

}  // namespace

std::vector<std::vector<double>> sample_window_measure(const GibbsModel& model, const ChainSpec& chain,
                                                       std::size_t count, unsigned threads) {
    return window_draws(model, chain, count, threads, nullptr);
}

DlrReport dlr_residual(const GibbsModel& model, std::span<const SiteId> eta, const ChainSpec& chain,
                       std::size_t outer_samples, unsigned threads, std::size_t permutations) {
    const auto& g = *model.graph();
    const auto pos = positions(eta, g.size());
    if (!eta.empty() && eta.size() >= g.size()) throw ParameterError("dlr_residual: eta must be a proper subset of the window");
    DlrReport report;
    report.outer_samples = outer_samples;
    if (eta.empty() || outer_samples == 0) {
        report.test.permutations = permutations;
        return report;
    }
    std::vector<std::pair<SiteId, SiteId>> cross;
    for (SiteId x : eta)
        for (SiteId y : g.neighbors(x))
            if (pos[y] < 0) cross.emplace_back(x, y);
    auto observe = [&](std::span<const double> z) {
        std::vector<double> o;
        for (SiteId x : eta) o.push_back(z[x]);
        for (auto [x, y] : cross) o.push_back(z[x] * z[y]);
        return o;
    };
    report.observables = eta.size() + cross.size();

    const auto nu = window_draws(model, chain, outer_samples, threads, &report.warnings);
    std::vector<std::vector<double>> before(outer_samples), after(outer_samples);
    std::vector<std::vector<std::string>> warn(outer_samples);
    const std::uint64_t inner_seed = splitmix64(chain.seed ^ 0x646c72);
    parallel_for(outer_samples, threads, [&](std::size_t i) {
        ChainSpec c = chain;
        c.seed = inner_seed + i;
        auto s = kernel_sample(model, eta, nu[i], c);
        before[i] = observe(nu[i]);
        after[i] = observe(s.last_state());
        warn[i] = std::move(s.warnings);
    });
    std::set<std::string> seen(report.warnings.begin(), report.warnings.end());
    for (auto& w : warn)
        for (auto& m : w)
            if (seen.insert(m).second) report.warnings.push_back(m);
    report.test = paired_energy_test(before, after, permutations, splitmix64(inner_seed));
    return report;
}

FieldConstructionError::FieldConstructionError(AssumptionReport report)
    : ParameterError("gradient dynamics field fails its assumption checks:\n" + report.summary()),
      report_(std::move(report)) {}

CoefficientField gradient_dynamics_field(const GibbsModel& model, std::size_t validation_trials) {
    const SinglePotential V = model.V();
    SinglePotentialDrift d;
    d.name = "gradient:" + V.name();
    d.phi = [V](double s) { return -0.5 * V.dV(s); };
    switch (V.type) {
    case SinglePotential::Type::quartic:
        d.dphi = [](double s) { return -1.5 * s * s; };
        d.c = 0.5, d.R = 3, d.b = 0;
        break;
    case SinglePotential::Type::gaussian:
        d.dphi = [](double) { return -0.5; };
        d.c = 0.5, d.R = 2, d.b = 0;
        break;
    default: {
        // |V'(s)| / 2 <= c (1 + |s|^R) and -V''/2 <= b, fitted on a grid
        d.R = std::max(2.0, V.tau - 1);
        double c = 0.0, b = 0.0;
        for (int i = -40000; i <= 40000; ++i) {
            const double s = i / 1000.0;
            c = std::max(c, 0.5 * std::abs(V.dV(s)) / (1 + std::pow(std::abs(s), d.R)));
            const double h = 1e-4;
            b = std::max(b, -0.5 * (V.dV(s + h) - V.dV(s - h)) / (2 * h));
        }
        d.c = std::max(c * 1.01, 1e-12);
        d.b = b * 1.01 + 1e-6;
    }
    }
    PairTerm phi_xy{"gradient", {}, 1.0, false};
    if (model.a().J != 0.0) {
        phi_xy.fn = [model](SiteId x, SiteId y, double, double v) { return x == y ? 0.0 : -0.5 * model.coupling(x, y) * v; };
        phi_xy.constant = 0.5 * model.a().max_abs();
    }
    CoefficientField field(model.graph(), std::move(d), PairCoupling{phi_xy, noise_preset("additive")});
    auto report = validate_assumptions(field, validation_trials);
    if (!report.passed()) throw FieldConstructionError(std::move(report));
    return field;
}

ReversibilityResult reversibility_test(const GibbsModel& model, const Observable& f, const Observable& g, double t,
                                       const SimPlan& plan, const ChainSpec& nu_chain, unsigned threads) {
    const auto field = gradient_dynamics_field(model);
    plan.validate(field.drift().R);
    const std::size_t n = plan.replicas;
    const auto zeta = sample_window_measure(model, nu_chain, n, threads);
    std::vector<double> left(n), right(n), diff(n);
    parallel_for(n, threads, [&](std::size_t i) {
        const auto xi = integrate_to(field, zeta[i], t, plan, static_cast<std::uint32_t>(i));
        left[i] = f(zeta[i]) * g(xi);
        right[i] = f(xi) * g(zeta[i]);
        diff[i] = left[i] - right[i];
    });
    ReversibilityResult r;
    r.paths = n;
    r.lhs = pairwise_sum(left) / static_cast<double>(n);
    r.rhs = pairwise_sum(right) / static_cast<double>(n);
    r.se = mean_stderr(diff).se;
    return r;
}

void write_samples_csv(std::ostream& out, const SpecKernelSample& s) {
    out << "sample,site_id,value\n" << std::setprecision(17);
    for (std::size_t k = 0; k < s.samples.size(); ++k)
        for (std::size_t i = 0; i < s.eta.size(); ++i) out << k << ',' << s.eta[i] << ',' << s.samples[k][i] << '\n';
}

}  // namespace gspin
