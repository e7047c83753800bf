#pragma once

#include <iosfwd>
#include <map>
#include <span>
#include <vector>

#include "gspin/geometry.hpp"

namespace gspin {

/// The index interval [alpha_*, alpha^*] of the weighted-space scale.
struct ScaleInterval {
    double alpha_star = 0.0;
    double alpha_top = 1.0;

    /// Throws ParameterError unless 0 <= alpha_star < alpha_top < inf.
    void validate() const;
    bool contains(double alpha) const noexcept { return alpha >= alpha_star && alpha <= alpha_top; }
    double width() const noexcept { return alpha_top - alpha_star; }
};

/// Sparse site-indexed real vector over a geometric graph. Absent keys are 0.
class WeightedSeq {
public:
    WeightedSeq() = default;
    explicit WeightedSeq(GraphPtr graph);

    static WeightedSeq from_dense(GraphPtr graph, std::span<const double> values);

    const GraphPtr& graph() const noexcept { return graph_; }
    std::size_t size() const noexcept { return graph_ ? graph_->size() : 0; }

    double get(SiteId x) const;
    /// Setting 0 removes the entry.
    void set(SiteId x, double value);
    const std::map<SiteId, double>& entries() const noexcept { return values_; }

    std::vector<double> to_dense() const;
    WeightedSeq scaled(double c) const;
    WeightedSeq operator+(const WeightedSeq& other) const;

private:
    void check_site(SiteId x) const;

    GraphPtr graph_;
    std::map<SiteId, double> values_;
};

/// (sum_x e^{-alpha |x|} |z_x|^p)^{1/p} over dense values; no scale check.
double weighted_lp(std::span<const double> values, std::span<const double> radii, double alpha,
                   double p);

/// l^p_alpha norm; alpha must lie in the scale and p >= 1.
double norm_lp(const WeightedSeq& z, const ScaleInterval& scale, double alpha, double p);

/// True iff norms are non-increasing along the strictly ascending `alphas`.
bool embedding_check(const WeightedSeq& z, const ScaleInterval& scale, std::span<const double> alphas,
                     double p);

/// CSV `site_id,value`, one row per stored entry.
void write_seq_csv(std::ostream& out, const WeightedSeq& z);
WeightedSeq read_seq_csv(std::istream& in, GraphPtr graph);

}  // namespace gspin
