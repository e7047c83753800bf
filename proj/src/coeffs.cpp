#include "gspin/coeffs.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gspin/errors.hpp"
#include "gspin/rng.hpp"

namespace gspin {

CoefficientField::CoefficientField(GraphPtr graph, SinglePotentialDrift drift, PairCoupling coupling)
    : graph_(std::move(graph)), drift_(std::move(drift)), coupling_(std::move(coupling)) {
    if (!graph_) throw ParameterError("CoefficientField: null graph");
    if (!drift_.phi) throw ParameterError("CoefficientField: drift '" + drift_.name + "' has no phi");
}

double CoefficientField::dphi(double s) const {
    if (drift_.dphi) return drift_.dphi(s);
    const double h = 1e-6 * std::max(1.0, std::abs(s));
    return (drift_.phi(s + h) - drift_.phi(s - h)) / (2.0 * h);
}

namespace {

double pair_sum(const PairTerm& term, const GeometricGraph& g, SiteId x, std::span<const double> z) {
    if (!term.fn) return 0.0;
    double s = term.fn(x, x, z[x], z[x]);
    if (term.diagonal_only) return s;
    for (SiteId y : g.neighbors(x)) s += term.fn(x, y, z[x], z[y]);
    return s;
}

}  // namespace

double CoefficientField::pair_drift(SiteId x, std::span<const double> z) const {
    return pair_sum(coupling_.phi, *graph_, x, z);
}

double CoefficientField::diffusion_at(SiteId x, std::span<const double> z) const {
    return pair_sum(coupling_.psi, *graph_, x, z);
}

double eval_drift(const CoefficientField& field, const WeightedSeq& state, SiteId x) {
    if (x >= field.size()) throw ParameterError("eval_drift: site out of range");
    const auto z = state.to_dense();
    return field.drift_at(x, z);
}

double eval_diffusion(const CoefficientField& field, const WeightedSeq& state, SiteId x) {
    if (x >= field.size()) throw ParameterError("eval_diffusion: site out of range");
    const auto z = state.to_dense();
    return field.diffusion_at(x, z);
}

SinglePotentialDrift drift_preset(const std::string& name) {
    if (name == "cubic") return {name, [](double s) { return -s * s * s; }, [](double s) { return -3 * s * s; }, 1, 3, 0};
    if (name == "linear") return {name, [](double s) { return -s; }, [](double) { return -1.0; }, 1, 2, 0};
    if (name == "gradient:quartic")  // -V'/2 with V = s^4/4
        return {name, [](double s) { return -0.5 * s * s * s; }, [](double s) { return -1.5 * s * s; }, 0.5, 3, 0};
    if (name == "zero") return {name, [](double) { return 0.0; }, [](double) { return 0.0; }, 1, 2, 0};
    throw ParameterError("unknown drift preset '" + name + "'");
}

PairTerm coupling_preset(const std::string& name, double J) {
    if (!std::isfinite(J)) throw ParameterError("coupling J must be finite");
    if (name == "zero") return {name, {}, 1.0, false};
    if (name == "linear_pair")
        return {name, [J](SiteId, SiteId, double, double v) { return J * v; }, J == 0.0 ? 1.0 : std::abs(J), false};
    throw ParameterError("unknown coupling preset '" + name + "'");
}

PairTerm noise_preset(const std::string& name, double M_tilde) {
    if (!std::isfinite(M_tilde)) throw ParameterError("noise M must be finite");
    if (name == "zero") return {name, {}, 1.0, false};
    if (name == "additive")
        return {name, [](SiteId x, SiteId y, double, double) { return x == y ? 1.0 : 0.0; }, 1.0, true};
    if (name == "linear_noise")
        return {name, [M_tilde](SiteId, SiteId, double, double v) { return M_tilde * v; },
                M_tilde == 0.0 ? 1.0 : std::abs(M_tilde), false};
    throw ParameterError("unknown noise preset '" + name + "'");
}

CoefficientField make_field(GraphPtr graph, const std::string& drift, const std::string& coupling, double J,
                            const std::string& noise, double M_tilde) {
    return CoefficientField(std::move(graph), drift_preset(drift),
                            PairCoupling{coupling_preset(coupling, J), noise_preset(noise, M_tilde)});
}

bool AssumptionReport::passed() const noexcept {
    return std::all_of(checks.begin(), checks.end(), [](const InequalityCheck& c) { return c.passed; });
}

const InequalityCheck& AssumptionReport::at(const std::string& name) const {
    for (const auto& c : checks)
        if (c.name == name) return c;
    throw ParameterError("no assumption check named '" + name + "'");
}

std::string AssumptionReport::summary() const {
    std::ostringstream os;
    for (const auto& c : checks) {
        os << c.name << ": " << (c.passed ? "pass" : "FAIL") << " (" << c.samples << " samples, worst margin "
           << c.worst_margin;
        if (!c.passed) {
            os << ", at";
            for (double v : c.counterexample) os << ' ' << v;
        }
        os << ")\n";
    }
    return os.str();
}

namespace {

class Tracker {
public:
    explicit Tracker(std::string name) { check_.name = std::move(name); }

    void record(double lhs, double rhs, std::vector<double> args) {
        ++check_.samples;
        const double margin = lhs - rhs;
        const double excess = margin - 1e-9 * (1.0 + std::abs(lhs) + std::abs(rhs));
        if (std::isnan(margin)) {
            fail(std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), std::move(args));
            return;
        }
        if (excess > worst_excess_) {
            worst_excess_ = excess;
            check_.worst_margin = margin;
            check_.counterexample = std::move(args);
        }
        if (excess > 0) check_.passed = false;
    }

    void fail(double margin, double excess, std::vector<double> args) {
        check_.passed = false;
        if (excess >= worst_excess_) {
            worst_excess_ = excess;
            check_.worst_margin = margin;
            check_.counterexample = std::move(args);
        }
    }

    InequalityCheck done() { return std::move(check_); }

private:
    InequalityCheck check_;
    double worst_excess_ = -std::numeric_limits<double>::infinity();
};

}  // namespace

double pairing_bound_margin(const CoefficientField& field, std::span<const double> z1, std::span<const double> z2,
                            SiteId x) {
    const auto& g = *field.graph();
    const double a = field.coupling().a_bar();
    const double n = static_cast<double>(g.nbar(x));
    const double dx = z1[x] - z2[x];
    double neigh = 0.0;
    for (SiteId y : g.neighbors(x)) neigh += (z1[y] - z2[y]) * (z1[y] - z2[y]);
    const double lhs = dx * (field.drift_at(x, z1) - field.drift_at(x, z2));
    const double rhs = (field.drift().b + 0.5 + 4 * a * a * n * n) * dx * dx + 0.5 * a * a * n * neigh;
    return lhs - rhs;
}

AssumptionReport validate_assumptions(const CoefficientField& field, std::size_t trials, double box,
                                      std::uint64_t seed) {
    if (trials < 1) throw ParameterError("validate_assumptions: trials must be >= 1");
    if (!(box > 0) || !std::isfinite(box)) throw ParameterError("validate_assumptions: box must be positive");
    const auto& d = field.drift();
    const auto& cp = field.coupling();
    const auto& g = *field.graph();
    CounterStream rng(seed, 0x636f656666);
    auto draw = [&] { return box * (2.0 * rng.uniform() - 1.0); };
    AssumptionReport report;

    Tracker constants("constants");
    constants.record(d.R >= 2 ? 0.0 : 1.0, 0.0, {d.R});
    constants.record(d.c > 0 ? 0.0 : 1.0, 0.0, {d.c});
    constants.record(d.b >= 0 ? 0.0 : 1.0, 0.0, {d.b});
    constants.record(cp.a_bar() > 0 ? 0.0 : 1.0, 0.0, {cp.a_bar()});
    constants.record(cp.M() > 0 ? 0.0 : 1.0, 0.0, {cp.M()});
    report.checks.push_back(constants.done());

    Tracker growth("C_growth"), diss("D_dissipative");
    for (std::size_t i = 0; i < trials; ++i) {
        const double s1 = draw(), s2 = draw();
        const double f1 = field.phi(s1), f2 = field.phi(s2);
        growth.record(std::abs(f1), d.c * (1.0 + std::pow(std::abs(s1), d.R)), {s1});
        diss.record((s1 - s2) * (f1 - f2), d.b * (s1 - s2) * (s1 - s2), {s1, s2});
    }
    report.checks.push_back(growth.done());
    report.checks.push_back(diss.done());

    auto pair_checks = [&](const PairTerm& term, const std::string& tag) {
        Tracker lip(tag + "_lipschitz"), grow(tag + "_growth");
        if (term.fn && g.size() > 0) {
            for (std::size_t i = 0; i < trials; ++i) {
                const auto x = static_cast<SiteId>(rng.below(g.size()));
                const auto nb = g.neighbors(x);
                const std::size_t k = rng.below(nb.size() + 1);
                const SiteId y = k == nb.size() ? x : nb[k];
                const double s1 = draw(), t1 = draw(), s2 = draw(), t2 = draw();
                const double v1 = term.fn(x, y, s1, t1), v2 = term.fn(x, y, s2, t2);
                const std::vector<double> args{double(x), double(y), s1, t1, s2, t2};
                lip.record(std::abs(v1 - v2), term.constant * (std::abs(s1 - s2) + std::abs(t1 - t2)), args);
                grow.record(std::abs(v1), term.constant * (1.0 + std::abs(s1) + std::abs(t1)), args);
            }
        }
        report.checks.push_back(lip.done());
        report.checks.push_back(grow.done());
    };
    pair_checks(cp.phi, "B");
    pair_checks(cp.psi, "E");

    Tracker psi_lip("psi_lipschitz"), psi_zero("psi_at_zero"), phi_grow("phi_growth"), pairing("pairing");
    if (g.size() > 0) {
        std::vector<double> z1(g.size(), 0.0), z2(g.size(), 0.0);
        const double a = cp.a_bar(), M = cp.M();
        for (std::size_t i = 0; i < trials; ++i) {
            const auto x = static_cast<SiteId>(rng.below(g.size()));
            const auto nb = g.neighbors(x);
            const double n = static_cast<double>(g.nbar(x));
            z1[x] = draw();
            z2[x] = draw();
            double abs_sum = 0.0, diff_sum = 0.0;
            for (SiteId y : nb) {
                z1[y] = draw();
                z2[y] = draw();
                abs_sum += std::abs(z1[y]);
                diff_sum += std::abs(z1[y] - z2[y]);
            }
            const std::vector<double> args{double(x), z1[x], z2[x]};

            psi_lip.record(std::abs(field.diffusion_at(x, z1) - field.diffusion_at(x, z2)),
                           M * (n + 1) * std::abs(z1[x] - z2[x]) + M * diff_sum, args);
            const double lhs = field.drift_at(x, z1);
            phi_grow.record(std::abs(lhs),
                            d.c * (1 + std::pow(std::abs(z1[x]), d.R)) + a * n * (1 + 2 * std::abs(z1[x])) +
                                a * abs_sum,
                            args);
            const double m = pairing_bound_margin(field, z1, z2, x);
            pairing.record(m, 0.0, args);

            for (SiteId y : nb) z1[y] = z2[y] = 0.0;
            z1[x] = z2[x] = 0.0;
            psi_zero.record(std::abs(field.diffusion_at(x, z1)), M * n, {double(x)});
        }
    }
    report.checks.push_back(psi_lip.done());
    report.checks.push_back(psi_zero.done());
    report.checks.push_back(phi_grow.done());
    report.checks.push_back(pairing.done());
    return report;
}

}  // namespace gspin
