#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gspin/geometry.hpp"
#include "gspin/spaces.hpp"

namespace gspin {

struct MatrixEntry {
    SiteId row = 0;
    SiteId col = 0;
    double value = 0.0;
};

/// Sparse site-indexed matrix with a declared range/growth certificate:
/// Q_xy = 0 for |x - y| > rho and |Q_xy| <= bound_C * n_x^bound_k.
/// The certificate is checked by `check_integrity`, not on every write, so a
/// matrix can be assembled incrementally.
class FiniteRangeMatrix {
public:
    FiniteRangeMatrix(GraphPtr graph, double bound_C, double bound_k);

    static FiniteRangeMatrix from_entries(GraphPtr graph, std::span<const MatrixEntry> entries,
                                          double bound_C, double bound_k);
    static FiniteRangeMatrix zero(GraphPtr graph);
    static FiniteRangeMatrix scaled_identity(GraphPtr graph, double c);
    /// Q_xy = B n_x^k on the closed rho-neighbourhood (the Gronwall lemma's matrix).
    static FiniteRangeMatrix neighborhood(GraphPtr graph, double B, double k);

    const GraphPtr& graph() const noexcept { return graph_; }
    std::size_t size() const noexcept { return rows_.size(); }
    double bound_C() const noexcept { return bound_C_; }
    double bound_k() const noexcept { return bound_k_; }

    void set(SiteId row, SiteId col, double value);
    double get(SiteId row, SiteId col) const;
    const std::map<SiteId, double>& row(SiteId x) const { return rows_.at(x); }
    std::vector<MatrixEntry> entries() const;

    /// out = Q z (dense).
    void apply(std::span<const double> z, std::span<double> out) const;
    std::vector<double> apply(std::span<const double> z) const;

    bool nonnegative() const noexcept;
    std::optional<std::string> integrity_violation() const;
    /// Throws IntegrityError naming the first violated invariant.
    void check_integrity() const;

private:
    GraphPtr graph_;
    double bound_C_;
    double bound_k_;
    std::vector<std::map<SiteId, double>> rows_;
};

/// Empirical Ovsjannikov certificate: max over trials of
/// ||Qz||_{l1_beta} (beta - alpha)^q / ||z||_{l1_alpha}.
struct OvsCertificate {
    double q = 0.5;
    double L = 0.0;
    std::size_t trials = 0;
    double max_ratio = 0.0;
    std::uint64_t seed = 0;

    bool valid() const noexcept { return max_ratio <= L; }
};

/// Random z (one-hot, sparse and dense mixtures) and random alpha < beta in the scale.
OvsCertificate verify_ovs_bound(const FiniteRangeMatrix& Q, const ScaleInterval& scale, double q, double L,
                                std::size_t trials, std::uint64_t seed, unsigned threads = 1);

inline constexpr double kOvsMargin = 0.1;

/// (1 + 0.1) * empirical sup of the ratio. Each trial draws (alpha, beta) and
/// takes the exact sup over z, which for weighted l1 is the worst one-hot
/// column; a fixed grid including the scale's corners is always evaluated.
double estimate_L(const FiniteRangeMatrix& Q, const ScaleInterval& scale, double q, std::size_t trials,
                  std::uint64_t seed, unsigned threads = 1);

struct KSeriesResult {
    double value = 1.0;
    std::size_t terms = 0;
};

/// K_T(alpha, beta) = sum_n (L T)^n (beta - alpha)^{-qn} n^{qn} / n!, summed
/// until term / partial < rel_tol (0^0 = 1).
KSeriesResult k_series(double L, double T, double q, double alpha, double beta, double rel_tol = 1e-12);

/// log K_T by log-sum-exp, for parameters where K_T itself overflows.
double log_k_series(double L, double T, double q, double alpha, double beta, double rel_tol = 1e-12);

inline constexpr std::size_t kSeriesMaxTerms = 10000;

/// sum_{n <= n_max} t^n / n! Q^n z0, stopping once the l1_{alpha^*} norm of a
/// term drops below 1e-14 of the partial sum. NumericError if n_max is reached.
WeightedSeq series_solve(const FiniteRangeMatrix& Q, const WeightedSeq& z0, double t,
                         const ScaleInterval& scale, std::size_t n_max = kSeriesMaxTerms);
std::vector<double> series_solve_dense(const FiniteRangeMatrix& Q, std::span<const double> z0, double t,
                                       double alpha_top, std::size_t n_max = kSeriesMaxTerms);

/// A vector path sampled on a time grid: values[j][x] at times[j].
struct TimePath {
    std::vector<double> times;
    std::vector<std::vector<double>> values;
};

enum class ComparisonStatus { passed, violated, hypothesis_violated };

struct ComparisonReport {
    ComparisonStatus status = ComparisonStatus::passed;
    // Hypothesis g_x(t) <= z_x + [int_0^t Q g]_x (trapezoid on the path's grid).
    std::size_t hypothesis_failures = 0;
    double worst_hypothesis_margin = 0.0;
    // Conclusion g_x(t) <= f_x(t) + 1e-9.
    std::size_t violations = 0;
    double min_slack = 0.0;  // min over grid and sites of f - g
    double max_gap = 0.0;    // max |f - g|
    std::size_t worst_time_index = 0;
    SiteId worst_site = 0;

    bool tight() const noexcept { return max_gap <= kTolerance; }
    static constexpr double kTolerance = 1e-9;
};

/// Requires Q >= 0 entrywise. Hypothesis failures are reported, not thrown.
ComparisonReport comparison_check(const FiniteRangeMatrix& Q, const TimePath& g, const WeightedSeq& z, double T,
                                  const ScaleInterval& scale);

struct GronwallBound {
    double bound = 0.0;
    double L = 0.0;
    double K = 1.0;
    double b_norm = 0.0;  // ||b||_{l1_alpha}
};

inline constexpr std::size_t kDefaultOvsTrials = 10000;

/// K_T(alpha, beta) ||b||_{l1_alpha} with L = estimate_L of Q_xy = B n_x^k 1{|x-y| <= rho}.
GronwallBound gronwall_bound(double B, double k, const GraphPtr& graph, const WeightedSeq& b,
                             const ScaleInterval& scale, double alpha, double beta, double T, double q,
                             std::size_t trials = kDefaultOvsTrials, std::uint64_t seed = 0x6772);

// CSV `a,b,value` triplets.
void write_matrix_csv(std::ostream& out, const FiniteRangeMatrix& Q);
FiniteRangeMatrix read_matrix_csv(std::istream& in, GraphPtr graph, double bound_C, double bound_k);

}  // namespace gspin
