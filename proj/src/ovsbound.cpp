#include "gspin/ovsbound.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "gspin/errors.hpp"
#include "gspin/parallel.hpp"
#include "gspin/rng.hpp"

namespace gspin {
namespace {

void check_q(double q, bool allow_zero) {
    const bool ok = allow_zero ? (q >= 0.0 && q < 1.0) : (q > 0.0 && q < 1.0);
    if (!ok) throw ParameterError(allow_zero ? "q must lie in [0, 1)" : "q must lie in (0, 1)");
}

struct ScalePair {
    double alpha;
    double beta;
};

ScalePair draw_pair(CounterStream& stream, const ScaleInterval& scale) {
    while (true) {
        double a = scale.alpha_star + stream.uniform() * scale.width();
        double b = scale.alpha_star + stream.uniform() * scale.width();
        a = std::min(a, scale.alpha_top);
        b = std::min(b, scale.alpha_top);
        if (a == b) continue;
        if (a > b) std::swap(a, b);
        return {a, b};
    }
}

std::vector<double> draw_vector(CounterStream& stream, std::size_t n) {
    std::vector<double> z(n, 0.0);
    switch (stream.below(3)) {
        case 0:
            z[stream.below(n)] = stream.normal();
            break;
        case 1: {
            const std::size_t support = 1 + stream.below(std::min<std::size_t>(n, 8));
            for (std::size_t i = 0; i < support; ++i) z[stream.below(n)] = stream.normal();
            break;
        }
        default:
            for (double& v : z) v = stream.normal();
    }
    return z;
}

double l1(std::span<const double> z, std::span<const double> radii, double alpha) {
    return weighted_lp(z, radii, alpha, 1.0);
}

// Exact sup_z ||Qz||_beta / ||z||_alpha for weighted l1: the worst column.
double operator_norm_l1(const std::vector<std::vector<std::pair<SiteId, double>>>& columns,
                        std::span<const double> radii, double alpha, double beta) {
    double worst = 0.0;
    for (SiteId y = 0; y < columns.size(); ++y) {
        double s = 0.0;
        for (const auto& [x, v] : columns[y]) s += std::abs(v) * std::exp(-beta * radii[x]);
        worst = std::max(worst, s * std::exp(alpha * radii[y]));
    }
    return worst;
}

}  // namespace

FiniteRangeMatrix::FiniteRangeMatrix(GraphPtr graph, double bound_C, double bound_k)
    : graph_(std::move(graph)), bound_C_(bound_C), bound_k_(bound_k) {
    if (!graph_) throw ParameterError("FiniteRangeMatrix: null graph");
    if (!(bound_C >= 0.0)) throw ParameterError("FiniteRangeMatrix: bound_C must be >= 0");
    if (!(bound_k >= 1.0)) throw ParameterError("FiniteRangeMatrix: bound_k must be >= 1");
    rows_.resize(graph_->size());
}

FiniteRangeMatrix FiniteRangeMatrix::from_entries(GraphPtr graph, std::span<const MatrixEntry> entries,
                                                  double bound_C, double bound_k) {
    FiniteRangeMatrix m(std::move(graph), bound_C, bound_k);
    for (const auto& e : entries) m.set(e.row, e.col, e.value);
    return m;
}

FiniteRangeMatrix FiniteRangeMatrix::zero(GraphPtr graph) { return FiniteRangeMatrix(std::move(graph), 0.0, 1.0); }

FiniteRangeMatrix FiniteRangeMatrix::scaled_identity(GraphPtr graph, double c) {
    FiniteRangeMatrix m(std::move(graph), std::abs(c), 1.0);
    for (SiteId x = 0; x < m.size(); ++x) m.set(x, x, c);
    return m;
}

FiniteRangeMatrix FiniteRangeMatrix::neighborhood(GraphPtr graph, double B, double k) {
    if (!(B > 0.0)) throw ParameterError("neighborhood matrix: B must be positive");
    FiniteRangeMatrix m(graph, B, k);
    for (SiteId x = 0; x < m.size(); ++x) {
        const double v = B * std::pow(static_cast<double>(graph->nbar(x)), k);
        m.set(x, x, v);
        for (SiteId y : graph->neighbors(x)) m.set(x, y, v);
    }
    return m;
}

void FiniteRangeMatrix::set(SiteId row, SiteId col, double value) {
    if (row >= size() || col >= size()) throw ParameterError("FiniteRangeMatrix: index out of range");
    if (!std::isfinite(value)) throw ParameterError("FiniteRangeMatrix: non-finite entry");
    if (value == 0.0)
        rows_[row].erase(col);
    else
        rows_[row][col] = value;
}

double FiniteRangeMatrix::get(SiteId row, SiteId col) const {
    const auto& r = rows_.at(row);
    auto it = r.find(col);
    return it == r.end() ? 0.0 : it->second;
}

std::vector<MatrixEntry> FiniteRangeMatrix::entries() const {
    std::vector<MatrixEntry> out;
    for (SiteId x = 0; x < size(); ++x)
        for (const auto& [y, v] : rows_[x]) out.push_back({x, y, v});
    return out;
}

void FiniteRangeMatrix::apply(std::span<const double> z, std::span<double> out) const {
    if (z.size() != size() || out.size() != size()) throw ParameterError("FiniteRangeMatrix::apply: size mismatch");
    for (SiteId x = 0; x < size(); ++x) {
        double s = 0.0;
        for (const auto& [y, v] : rows_[x]) s += v * z[y];
        out[x] = s;
    }
}

std::vector<double> FiniteRangeMatrix::apply(std::span<const double> z) const {
    std::vector<double> out(size());
    apply(z, out);
    return out;
}

bool FiniteRangeMatrix::nonnegative() const noexcept {
    for (const auto& r : rows_)
        for (const auto& [y, v] : r)
            if (v < 0.0) return false;
    return true;
}

std::optional<std::string> FiniteRangeMatrix::integrity_violation() const {
    const auto& config = graph_->config();
    const double rho = graph_->rho();
    for (SiteId x = 0; x < size(); ++x) {
        const double cap = bound_C_ * std::pow(static_cast<double>(graph_->nbar(x)), bound_k_);
        for (const auto& [y, v] : rows_[x]) {
            std::ostringstream msg;
            if (x != y && distance(config.point(x), config.point(y)) > rho) {
                msg << "entry (" << x << "," << y << ") is nonzero beyond the interaction radius";
                return msg.str();
            }
            if (std::abs(v) > cap * (1.0 + 1e-12)) {
                msg << "entry (" << x << "," << y << ") = " << v << " exceeds C n_x^k = " << cap;
                return msg.str();
            }
        }
    }
    return std::nullopt;
}

void FiniteRangeMatrix::check_integrity() const {
    if (auto problem = integrity_violation()) throw IntegrityError(*problem);
}

OvsCertificate verify_ovs_bound(const FiniteRangeMatrix& Q, const ScaleInterval& scale, double q, double L,
                                std::size_t trials, std::uint64_t seed, unsigned threads) {
    check_q(q, false);
    if (!(L > 0.0)) throw ParameterError("verify_ovs_bound: L must be positive");
    scale.validate();
    Q.check_integrity();

    OvsCertificate cert{q, L, trials, 0.0, seed};
    if (Q.size() == 0 || trials == 0) return cert;
    const auto radii = Q.graph()->radii();
    std::vector<double> ratios(trials, 0.0);
    parallel_for(trials, threads, [&](std::size_t i) {
        CounterStream stream(seed, i);
        const auto [alpha, beta] = draw_pair(stream, scale);
        const auto z = draw_vector(stream, Q.size());
        const double denom = l1(z, radii, alpha);
        if (denom == 0.0) return;
        const auto qz = Q.apply(z);
        ratios[i] = l1(qz, radii, beta) * std::pow(beta - alpha, q) / denom;
    });
    cert.max_ratio = *std::max_element(ratios.begin(), ratios.end());
    return cert;
}

double estimate_L(const FiniteRangeMatrix& Q, const ScaleInterval& scale, double q, std::size_t trials,
                  std::uint64_t seed, unsigned threads) {
    check_q(q, false);
    scale.validate();
    if (Q.size() == 0) return 0.0;

    std::vector<std::vector<std::pair<SiteId, double>>> columns(Q.size());
    for (const auto& e : Q.entries()) columns[e.col].emplace_back(e.row, e.value);
    const auto radii = Q.graph()->radii();
    auto ratio = [&](double alpha, double beta) {
        return operator_norm_l1(columns, radii, alpha, beta) * std::pow(beta - alpha, q);
    };

    constexpr std::size_t kGrid = 32;
    double best = 0.0;
    for (std::size_t i = 0; i <= kGrid; ++i)
        for (std::size_t j = i + 1; j <= kGrid; ++j) {
            const double a = scale.alpha_star + scale.width() * static_cast<double>(i) / kGrid;
            const double b = j == kGrid ? scale.alpha_top : scale.alpha_star + scale.width() * static_cast<double>(j) / kGrid;
            best = std::max(best, ratio(a, b));
        }

    std::vector<double> sampled(trials, 0.0);
    parallel_for(trials, threads, [&](std::size_t i) {
        CounterStream stream(seed, i);
        const auto [alpha, beta] = draw_pair(stream, scale);
        sampled[i] = ratio(alpha, beta);
    });
    for (double r : sampled) best = std::max(best, r);
    return (1.0 + kOvsMargin) * best;
}

KSeriesResult k_series(double L, double T, double q, double alpha, double beta, double rel_tol) {
    if (!(beta > alpha)) throw ParameterError("k_series: beta must exceed alpha");
    if (!(rel_tol > 0.0)) throw ParameterError("k_series: rel_tol must be positive");
    if (!(L >= 0.0) || !(T > 0.0)) throw ParameterError("k_series: need L >= 0 and T > 0");
    check_q(q, true);

    if (L == 0.0) return {1.0, 1};
    constexpr std::size_t kMaxTerms = 100000;
    const double log_x = std::log(L) + std::log(T) - q * std::log(beta - alpha);
    double sum = 1.0;  // n = 0
    for (std::size_t n = 1; n < kMaxTerms; ++n) {
        const double dn = static_cast<double>(n);
        const double log_term = dn * log_x + q * dn * std::log(dn) - std::lgamma(dn + 1.0);
        if (log_term > 700.0) throw NumericError("k_series: terms overflow double precision");
        const double term = std::exp(log_term);
        sum += term;
        if (!std::isfinite(sum)) throw NumericError("k_series: partial sum overflowed");
        if (term / sum < rel_tol) return {sum, n + 1};
    }
    throw NumericError("k_series: no convergence within 1e5 terms");
}

double log_k_series(double L, double T, double q, double alpha, double beta, double rel_tol) {
    if (!(beta > alpha)) throw ParameterError("log_k_series: beta must exceed alpha");
    if (!(rel_tol > 0.0)) throw ParameterError("log_k_series: rel_tol must be positive");
    if (!(L >= 0.0) || !(T > 0.0)) throw ParameterError("log_k_series: need L >= 0 and T > 0");
    check_q(q, true);
    if (L == 0.0) return 0.0;
    constexpr std::size_t kMaxTerms = 1000000;
    const double log_x = std::log(L) + std::log(T) - q * std::log(beta - alpha);
    const double log_tol = std::log(rel_tol);
    double log_sum = 0.0;
    for (std::size_t n = 1; n < kMaxTerms; ++n) {
        const double dn = static_cast<double>(n);
        const double lt = dn * log_x + q * dn * std::log(dn) - std::lgamma(dn + 1.0);
        log_sum = lt > log_sum ? lt + std::log1p(std::exp(log_sum - lt)) : log_sum + std::log1p(std::exp(lt - log_sum));
        if (lt - log_sum < log_tol) return log_sum;
    }
    throw NumericError("log_k_series: no convergence within 1e6 terms");
}

std::vector<double> series_solve_dense(const FiniteRangeMatrix& Q, std::span<const double> z0, double t,
                                       double alpha_top, std::size_t n_max) {
    if (!(t >= 0.0)) throw ParameterError("series_solve: t must be >= 0");
    if (z0.size() != Q.size()) throw ParameterError("series_solve: size mismatch");
    const auto radii = Q.graph()->radii();
    std::vector<double> sum(z0.begin(), z0.end());
    std::vector<double> term(z0.begin(), z0.end());
    std::vector<double> next(z0.size());
    if (t == 0.0 || l1(sum, radii, alpha_top) == 0.0) return sum;

    for (std::size_t n = 1; n <= n_max; ++n) {
        Q.apply(term, next);
        const double factor = t / static_cast<double>(n);
        for (std::size_t i = 0; i < next.size(); ++i) {
            term[i] = factor * next[i];
            sum[i] += term[i];
        }
        const double term_norm = l1(term, radii, alpha_top);
        const double sum_norm = l1(sum, radii, alpha_top);
        if (!std::isfinite(sum_norm)) throw NumericError("series_solve: partial sum overflowed");
        if (term_norm < 1e-14 * sum_norm || term_norm == 0.0) return sum;
    }
    throw NumericError("series_solve: tolerance not reached within n_max terms");
}

WeightedSeq series_solve(const FiniteRangeMatrix& Q, const WeightedSeq& z0, double t, const ScaleInterval& scale,
                         std::size_t n_max) {
    scale.validate();
    if (z0.graph() != Q.graph()) throw ParameterError("series_solve: z0 lives on a different graph");
    const auto dense = series_solve_dense(Q, z0.to_dense(), t, scale.alpha_top, n_max);
    return WeightedSeq::from_dense(Q.graph(), dense);
}

ComparisonReport comparison_check(const FiniteRangeMatrix& Q, const TimePath& g, const WeightedSeq& z, double T,
                                  const ScaleInterval& scale) {
    if (!Q.nonnegative()) throw ParameterError("comparison_check: Q must be entrywise nonnegative");
    if (!(T > 0.0)) throw ParameterError("comparison_check: T must be positive");
    if (g.times.empty() || g.times.size() != g.values.size())
        throw ParameterError("comparison_check: path needs matching times and values");
    if (g.times.front() != 0.0) throw ParameterError("comparison_check: path must start at t = 0");
    for (std::size_t j = 1; j < g.times.size(); ++j)
        if (!(g.times[j] > g.times[j - 1])) throw ParameterError("comparison_check: times must ascend");
    if (g.times.back() > T * (1.0 + 1e-12)) throw ParameterError("comparison_check: path extends beyond T");
    const std::size_t n = Q.size();
    for (const auto& v : g.values)
        if (v.size() != n) throw ParameterError("comparison_check: path width mismatch");
    scale.validate();

    constexpr double tol = ComparisonReport::kTolerance;
    ComparisonReport report;
    const auto z_dense = z.to_dense();

    // Hypothesis, with the running integral accumulated by the trapezoid rule.
    std::vector<double> integral(n, 0.0);
    std::vector<double> qg_prev = Q.apply(g.values[0]);
    report.worst_hypothesis_margin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < g.times.size(); ++j) {
        std::vector<double> qg = Q.apply(g.values[j]);
        if (j > 0) {
            const double h = g.times[j] - g.times[j - 1];
            for (std::size_t x = 0; x < n; ++x) integral[x] += 0.5 * h * (qg_prev[x] + qg[x]);
        }
        for (SiteId x = 0; x < n; ++x) {
            const double margin = z_dense[x] + integral[x] - g.values[j][x];
            report.worst_hypothesis_margin = std::min(report.worst_hypothesis_margin, margin);
            if (margin < -tol) ++report.hypothesis_failures;
        }
        qg_prev = std::move(qg);
    }
    if (report.hypothesis_failures > 0) {
        report.status = ComparisonStatus::hypothesis_violated;
        return report;
    }

    report.min_slack = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < g.times.size(); ++j) {
        const auto f = series_solve_dense(Q, z_dense, g.times[j], scale.alpha_top);
        for (SiteId x = 0; x < n; ++x) {
            const double slack = f[x] - g.values[j][x];
            report.max_gap = std::max(report.max_gap, std::abs(slack));
            if (slack < report.min_slack) {
                report.min_slack = slack;
                report.worst_time_index = j;
                report.worst_site = x;
            }
            if (slack < -tol) ++report.violations;
        }
    }
    report.status = report.violations == 0 ? ComparisonStatus::passed : ComparisonStatus::violated;
    return report;
}

GronwallBound gronwall_bound(double B, double k, const GraphPtr& graph, const WeightedSeq& b,
                             const ScaleInterval& scale, double alpha, double beta, double T, double q,
                             std::size_t trials, std::uint64_t seed) {
    if (!(beta > alpha)) throw ParameterError("gronwall_bound: beta must exceed alpha");
    if (!(B > 0.0) || !(k >= 1.0)) throw ParameterError("gronwall_bound: need B > 0 and k >= 1");
    if (b.graph() != graph) throw ParameterError("gronwall_bound: b lives on a different graph");
    for (const auto& [x, v] : b.entries())
        if (v < 0.0) throw ParameterError("gronwall_bound: b must be componentwise >= 0");
    scale.validate();

    const auto Q = FiniteRangeMatrix::neighborhood(graph, B, k);
    GronwallBound out;
    out.L = estimate_L(Q, scale, q, trials, seed);
    // log space: K_T overflows double long before the bound stops being true
    const double log_K = log_k_series(out.L, T, q, alpha, beta);
    out.K = std::exp(log_K);
    out.b_norm = norm_lp(b, scale, alpha, 1.0);
    out.bound = out.b_norm == 0.0 ? 0.0 : std::exp(log_K + std::log(out.b_norm));
    return out;
}

void write_matrix_csv(std::ostream& out, const FiniteRangeMatrix& Q) {
    out << "a,b,value\n";
    out.precision(17);
    for (const auto& e : Q.entries()) out << e.row << ',' << e.col << ',' << e.value << '\n';
}

FiniteRangeMatrix read_matrix_csv(std::istream& in, GraphPtr graph, double bound_C, double bound_k) {
    FiniteRangeMatrix Q(std::move(graph), bound_C, bound_k);
    std::string line;
    if (!std::getline(in, line) || line.rfind("a,b,value", 0) != 0)
        throw ParameterError("matrix csv: header must be a,b,value");
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        std::stringstream ss(line);
        std::string a, b, v;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, v))
            throw ParameterError("matrix csv: malformed row '" + line + "'");
        long long row = 0, col = 0;
        double value = 0.0;
        try {
            row = std::stoll(a);
            col = std::stoll(b);
            value = std::stod(v);
        } catch (const std::logic_error&) {
            throw ParameterError("matrix csv: malformed row '" + line + "'");
        }
        if (row < 0 || col < 0) throw ParameterError("matrix csv: negative index");
        Q.set(static_cast<SiteId>(row), static_cast<SiteId>(col), value);
    }
    return Q;
}

}  // namespace gspin
