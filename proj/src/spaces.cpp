#include "gspin/spaces.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "gspin/errors.hpp"
#include "gspin/parallel.hpp"

namespace gspin {

void ScaleInterval::validate() const {
    if (!(alpha_star >= 0.0) || !(alpha_star < alpha_top) || !std::isfinite(alpha_top))
        throw ParameterError("scale: need 0 <= alpha_star < alpha_top < inf");
}

WeightedSeq::WeightedSeq(GraphPtr graph) : graph_(std::move(graph)) {
    if (!graph_) throw ParameterError("WeightedSeq: null graph");
}

WeightedSeq WeightedSeq::from_dense(GraphPtr graph, std::span<const double> values) {
    WeightedSeq z(std::move(graph));
    if (values.size() != z.size()) throw ParameterError("WeightedSeq: dense length mismatch");
    for (SiteId x = 0; x < values.size(); ++x) z.set(x, values[x]);
    return z;
}

void WeightedSeq::check_site(SiteId x) const {
    if (x >= size()) throw ParameterError("WeightedSeq: site " + std::to_string(x) + " out of range");
}

double WeightedSeq::get(SiteId x) const {
    check_site(x);
    auto it = values_.find(x);
    return it == values_.end() ? 0.0 : it->second;
}

void WeightedSeq::set(SiteId x, double value) {
    check_site(x);
    if (value == 0.0)
        values_.erase(x);
    else
        values_[x] = value;
}

std::vector<double> WeightedSeq::to_dense() const {
    std::vector<double> out(size(), 0.0);
    for (const auto& [x, v] : values_) out[x] = v;
    return out;
}

WeightedSeq WeightedSeq::scaled(double c) const {
    WeightedSeq out(graph_);
    for (const auto& [x, v] : values_) out.set(x, c * v);
    return out;
}

WeightedSeq WeightedSeq::operator+(const WeightedSeq& other) const {
    if (graph_ != other.graph_) throw ParameterError("WeightedSeq: graphs differ");
    WeightedSeq out = *this;
    for (const auto& [x, v] : other.values_) out.set(x, out.get(x) + v);
    return out;
}

double weighted_lp(std::span<const double> values, std::span<const double> radii, double alpha,
                   double p) {
    std::vector<double> terms(values.size());
    for (std::size_t x = 0; x < values.size(); ++x) {
        const double a = std::abs(values[x]);
        terms[x] = a == 0.0 ? 0.0 : std::exp(-alpha * radii[x]) * (p == 1.0 ? a : std::pow(a, p));
    }
    const double s = pairwise_sum(terms);
    return p == 1.0 ? s : std::pow(s, 1.0 / p);
}

double norm_lp(const WeightedSeq& z, const ScaleInterval& scale, double alpha, double p) {
    if (!scale.contains(alpha)) throw ParameterError("norm_lp: alpha outside the scale");
    if (!(p >= 1.0)) throw ParameterError("norm_lp: p must be >= 1");
    if (!z.graph()) return 0.0;
    std::vector<double> values, radii;
    values.reserve(z.entries().size());
    radii.reserve(z.entries().size());
    for (const auto& [x, v] : z.entries()) {
        values.push_back(v);
        radii.push_back(z.graph()->radius(x));
    }
    return weighted_lp(values, radii, alpha, p);
}

bool embedding_check(const WeightedSeq& z, const ScaleInterval& scale, std::span<const double> alphas,
                     double p) {
    for (std::size_t i = 1; i < alphas.size(); ++i)
        if (!(alphas[i - 1] < alphas[i]))
            throw ParameterError("embedding_check: alphas must be strictly ascending");
    double previous = 0.0;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
        const double n = norm_lp(z, scale, alphas[i], p);
        if (i > 0 && n > previous) return false;
        previous = n;
    }
    return true;
}

void write_seq_csv(std::ostream& out, const WeightedSeq& z) {
    out << "site_id,value\n";
    out.precision(17);
    for (const auto& [x, v] : z.entries()) out << x << ',' << v << '\n';
}

WeightedSeq read_seq_csv(std::istream& in, GraphPtr graph) {
    WeightedSeq z(std::move(graph));
    std::string line;
    if (!std::getline(in, line) || line.rfind("site_id,value", 0) != 0)
        throw ParameterError("sequence csv: header must be site_id,value");
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw ParameterError("sequence csv: malformed row '" + line + "'");
        long long id = 0;
        double value = 0.0;
        try {
            id = std::stoll(line.substr(0, comma));
            value = std::stod(line.substr(comma + 1));
        } catch (const std::logic_error&) {
            throw ParameterError("sequence csv: malformed row '" + line + "'");
        }
        if (id < 0) throw ParameterError("sequence csv: negative site id");
        z.set(static_cast<SiteId>(id), value);
    }
    return z;
}

}  // namespace gspin
