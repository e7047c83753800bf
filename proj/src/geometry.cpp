#include "gspin/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

#include "gspin/errors.hpp"
#include "gspin/rng.hpp"

namespace gspin {
namespace {

double squared_distance(const Point& a, const Point& b) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < a.coords.size(); ++i) {
        const double d = a.coords[i] - b.coords[i];
        s += d * d;
    }
    return s;
}

bool adjacent(const Point& a, const Point& b, double rho_sq) noexcept {
    const double d2 = squared_distance(a, b);
    return d2 > 0.0 && d2 <= rho_sq;
}

void neighbors_brute_force(const std::vector<Point>& pts, double rho,
                           std::vector<std::vector<SiteId>>& out) {
    const double rho_sq = rho * rho;
    for (SiteId x = 0; x < pts.size(); ++x) {
        for (SiteId y = x + 1; y < pts.size(); ++y) {
            if (adjacent(pts[x], pts[y], rho_sq)) {
                out[x].push_back(y);
                out[y].push_back(x);
            }
        }
    }
}

void neighbors_grid(const std::vector<Point>& pts, const Box& window, double rho,
                    std::vector<std::vector<SiteId>>& out) {
    const std::size_t d = window.dim();
    using Cell = std::vector<long>;
    auto cell_of = [&](const Point& p) {
        Cell c(d);
        for (std::size_t i = 0; i < d; ++i)
            c[i] = static_cast<long>(std::floor((p.coords[i] - window.lo[i]) / rho));
        return c;
    };
    std::map<Cell, std::vector<SiteId>> buckets;
    for (SiteId x = 0; x < pts.size(); ++x) buckets[cell_of(pts[x])].push_back(x);

    std::size_t offsets = 1;
    for (std::size_t i = 0; i < d; ++i) offsets *= 3;
    const double rho_sq = rho * rho;
    for (SiteId x = 0; x < pts.size(); ++x) {
        const Cell home = cell_of(pts[x]);
        for (std::size_t code = 0; code < offsets; ++code) {
            Cell probe = home;
            std::size_t rest = code;
            for (std::size_t i = 0; i < d; ++i) {
                probe[i] += static_cast<long>(rest % 3) - 1;
                rest /= 3;
            }
            auto it = buckets.find(probe);
            if (it == buckets.end()) continue;
            for (SiteId y : it->second)
                if (y != x && adjacent(pts[x], pts[y], rho_sq)) out[x].push_back(y);
        }
    }
}

// Adapts CounterStream to the standard URBG interface for std distributions.
struct StreamUrbg {
    using result_type = std::uint64_t;
    CounterStream& stream;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
    result_type operator()() { return stream.next_u64(); }
};

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

}  // namespace

double Point::norm() const noexcept {
    double s = 0.0;
    for (double c : coords) s += c * c;
    return std::sqrt(s);
}

double distance(const Point& a, const Point& b) noexcept { return std::sqrt(squared_distance(a, b)); }

double Box::volume() const noexcept {
    double v = 1.0;
    for (std::size_t i = 0; i < lo.size(); ++i) v *= hi[i] - lo[i];
    return v;
}

bool Box::contains(const Point& p) const noexcept {
    if (p.dim() != dim()) return false;
    for (std::size_t i = 0; i < lo.size(); ++i)
        if (p.coords[i] < lo[i] || p.coords[i] > hi[i]) return false;
    return true;
}

void Box::validate() const {
    if (lo.empty() || lo.size() != hi.size())
        throw ParameterError("window: lo/hi must have equal, positive dimension");
    for (std::size_t i = 0; i < lo.size(); ++i) {
        if (!std::isfinite(lo[i]) || !std::isfinite(hi[i]) || !(lo[i] < hi[i]))
            throw ParameterError("window: degenerate extent on axis " + std::to_string(i));
    }
}

Box Box::cube(std::size_t dim, double lo, double hi) {
    return Box{std::vector<double>(dim, lo), std::vector<double>(dim, hi)};
}

Configuration::Configuration(Box window, std::vector<Point> points)
    : window_(std::move(window)), points_(std::move(points)) {
    window_.validate();
    for (std::size_t i = 0; i < points_.size(); ++i) {
        const Point& p = points_[i];
        if (p.dim() != window_.dim())
            throw ParameterError("site " + std::to_string(i) + ": dimension mismatch");
        for (double c : p.coords)
            if (!std::isfinite(c))
                throw ParameterError("site " + std::to_string(i) + ": non-finite coordinate");
        if (!window_.contains(p))
            throw ParameterError("site " + std::to_string(i) + ": outside the window");
    }
}

Configuration make_lattice(std::size_t dim, double lo, double hi, double spacing) {
    if (dim == 0) throw ParameterError("lattice: dim must be >= 1");
    if (!(spacing > 0.0)) throw ParameterError("lattice: spacing must be positive");
    const long first = static_cast<long>(std::ceil(lo / spacing - 1e-9));
    const long last = static_cast<long>(std::floor(hi / spacing + 1e-9));
    std::vector<double> axis;
    for (long k = first; k <= last; ++k) axis.push_back(static_cast<double>(k) * spacing);

    std::vector<Point> pts;
    std::vector<std::size_t> idx(dim, 0);
    if (!axis.empty()) {
        while (true) {
            Point p;
            p.coords.reserve(dim);
            for (std::size_t i = 0; i < dim; ++i) p.coords.push_back(axis[idx[i]]);
            pts.push_back(std::move(p));
            std::size_t i = 0;
            while (i < dim && ++idx[i] == axis.size()) idx[i++] = 0;
            if (i == dim) break;
        }
    }
    return Configuration(Box::cube(dim, lo, hi), std::move(pts));
}

Configuration sample_poisson(double intensity, const Box& window, std::uint64_t seed) {
    if (!(intensity >= 0.0) || !std::isfinite(intensity))
        throw ParameterError("poisson: intensity must be finite and >= 0");
    window.validate();
    if (intensity == 0.0) return Configuration(window, {});

    CounterStream stream(seed, /*stream_id=*/0x706f6973736f6eull);
    StreamUrbg urbg{stream};
    std::poisson_distribution<long long> count_dist(intensity * window.volume());
    const long long count = count_dist(urbg);

    std::vector<Point> pts(static_cast<std::size_t>(count));
    for (auto& p : pts) {
        p.coords.resize(window.dim());
        for (std::size_t i = 0; i < window.dim(); ++i) {
            // uniform() is in (0,1]; the map keeps points inside the closed window.
            const double u = stream.uniform();
            p.coords[i] = window.hi[i] - u * (window.hi[i] - window.lo[i]);
        }
    }
    return Configuration(window, std::move(pts));
}

std::size_t GeometricGraph::edge_count() const noexcept {
    std::size_t twice = 0;
    for (const auto& n : neighbors_) twice += n.size();
    return twice / 2;
}

GeometricGraph build_graph(Configuration config, double rho) {
    if (!(rho > 0.0) || !std::isfinite(rho)) throw ParameterError("build_graph: rho must be positive");
    GeometricGraph g;
    g.rho_ = rho;
    g.neighbors_.assign(config.size(), {});
    if (config.size() > kGridIndexThreshold)
        neighbors_grid(config.points(), config.window(), rho, g.neighbors_);
    else
        neighbors_brute_force(config.points(), rho, g.neighbors_);
    for (auto& n : g.neighbors_) std::sort(n.begin(), n.end());
    g.radii_.reserve(config.size());
    for (const auto& p : config.points()) g.radii_.push_back(p.norm());
    g.config_ = std::move(config);
    return g;
}

GraphPtr make_graph(Configuration config, double rho) {
    return std::make_shared<const GeometricGraph>(build_graph(std::move(config), rho));
}

double fit_degree_constant(const GeometricGraph& graph) {
    if (graph.size() == 0) throw ParameterError("fit_degree_constant: empty graph");
    double c = 0.0;
    for (SiteId x = 0; x < graph.size(); ++x) {
        const double envelope = 1.0 + std::log1p(graph.radius(x));
        c = std::max(c, static_cast<double>(graph.nbar(x)) / envelope);
    }
    return c;
}

void write_configuration_csv(std::ostream& out, const Configuration& config) {
    out << "site_id";
    for (std::size_t i = 0; i < config.dim(); ++i) out << ",x" << i;
    out << '\n';
    out.precision(17);
    for (SiteId id = 0; id < config.size(); ++id) {
        out << id;
        for (double c : config.point(id).coords) out << ',' << c;
        out << '\n';
    }
}

Configuration read_configuration_csv(std::istream& in, const Box* window) {
    std::string line;
    if (!std::getline(in, line)) throw ParameterError("configuration csv: missing header");
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "site_id")
        throw ParameterError("configuration csv: header must be site_id,x0,...");
    const std::size_t dim = header.size() - 1;
    for (std::size_t i = 0; i < dim; ++i)
        if (header[i + 1] != "x" + std::to_string(i))
            throw ParameterError("configuration csv: unexpected column '" + header[i + 1] + "'");

    std::vector<std::pair<long long, Point>> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != dim + 1)
            throw ParameterError("configuration csv line " + std::to_string(line_no) + ": wrong column count");
        try {
            Point p;
            for (std::size_t i = 0; i < dim; ++i) p.coords.push_back(std::stod(cells[i + 1]));
            rows.emplace_back(std::stoll(cells[0]), std::move(p));
        } catch (const std::logic_error&) {
            throw ParameterError("configuration csv line " + std::to_string(line_no) + ": not a number");
        }
    }
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Point> pts;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].first != static_cast<long long>(i))
            throw ParameterError("configuration csv: site ids must be unique and dense 0..N-1");
        pts.push_back(std::move(rows[i].second));
    }
    Box box;
    if (window != nullptr) {
        box = *window;
    } else {
        if (pts.empty()) throw ParameterError("configuration csv: empty file needs an explicit window");
        box.lo.assign(dim, std::numeric_limits<double>::infinity());
        box.hi.assign(dim, -std::numeric_limits<double>::infinity());
        for (const auto& p : pts)
            for (std::size_t i = 0; i < dim; ++i) {
                box.lo[i] = std::min(box.lo[i], p.coords[i]);
                box.hi[i] = std::max(box.hi[i], p.coords[i]);
            }
        for (std::size_t i = 0; i < dim; ++i)
            if (!(box.lo[i] < box.hi[i])) {
                box.lo[i] -= 0.5;
                box.hi[i] += 0.5;
            }
    }
    return Configuration(std::move(box), std::move(pts));
}

void write_graph_csv(std::ostream& out, const GeometricGraph& graph) {
    out << "site_id,degree,nbar\n";
    for (SiteId x = 0; x < graph.size(); ++x)
        out << x << ',' << graph.neighbors(x).size() << ',' << graph.nbar(x) << '\n';
}

void write_edges_csv(std::ostream& out, const GeometricGraph& graph) {
    out << "a,b\n";
    for (SiteId x = 0; x < graph.size(); ++x)
        for (SiteId y : graph.neighbors(x))
            if (x < y) out << x << ',' << y << '\n';
}

}  // namespace gspin
