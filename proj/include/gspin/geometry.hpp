#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace gspin {

using SiteId = std::uint32_t;

/// A position in R^d.
struct Point {
    std::vector<double> coords;

    std::size_t dim() const noexcept { return coords.size(); }
    /// Euclidean norm |x|.
    double norm() const noexcept;
};

double distance(const Point& a, const Point& b) noexcept;

/// Axis-aligned box [lo_i, hi_i]^d.
struct Box {
    std::vector<double> lo;
    std::vector<double> hi;

    std::size_t dim() const noexcept { return lo.size(); }
    double volume() const noexcept;
    bool contains(const Point& p) const noexcept;
    /// Throws ParameterError unless d >= 1, lo/hi have equal length and lo_i < hi_i.
    void validate() const;

    static Box cube(std::size_t dim, double lo, double hi);
};

/// Quenched point configuration inside a window. Site ids are the dense
/// indices 0..N-1 into `points`.
class Configuration {
public:
    Configuration() = default;
    /// Validates finiteness, dimension agreement and window membership.
    Configuration(Box window, std::vector<Point> points);

    const Box& window() const noexcept { return window_; }
    std::size_t size() const noexcept { return points_.size(); }
    std::size_t dim() const noexcept { return window_.dim(); }
    bool empty() const noexcept { return points_.empty(); }
    const Point& point(SiteId id) const { return points_.at(id); }
    const std::vector<Point>& points() const noexcept { return points_; }

private:
    Box window_;
    std::vector<Point> points_;
};

/// Regular lattice spacing*Z^d intersected with [lo, hi]^d; the window is that cube.
Configuration make_lattice(std::size_t dim, double lo, double hi, double spacing = 1.0);

/// Homogeneous Poisson configuration, deterministic given `seed`.
Configuration sample_poisson(double intensity, const Box& window, std::uint64_t seed);

/// Radius-rho geometric graph over a configuration.
class GeometricGraph {
public:
    const Configuration& config() const noexcept { return config_; }
    double rho() const noexcept { return rho_; }
    std::size_t size() const noexcept { return config_.size(); }

    /// gamma_x: sorted neighbours within distance rho, self excluded.
    const std::vector<SiteId>& neighbors(SiteId x) const { return neighbors_.at(x); }
    /// n_x = |gamma_x| + 1.
    std::size_t nbar(SiteId x) const { return neighbors_.at(x).size() + 1; }
    /// |x| for every site, cached.
    std::span<const double> radii() const noexcept { return radii_; }
    double radius(SiteId x) const { return radii_.at(x); }
    std::size_t edge_count() const noexcept;

    friend GeometricGraph build_graph(Configuration config, double rho);

private:
    Configuration config_;
    double rho_ = 0.0;
    std::vector<std::vector<SiteId>> neighbors_;
    std::vector<double> radii_;
};

using GraphPtr = std::shared_ptr<const GeometricGraph>;

/// Brute-force neighbour search up to this many sites, uniform grid beyond.
inline constexpr std::size_t kGridIndexThreshold = 2000;

GeometricGraph build_graph(Configuration config, double rho);
GraphPtr make_graph(Configuration config, double rho);

/// Smallest C with n_x <= C (1 + log(1 + |x|)) at every site.
double fit_degree_constant(const GeometricGraph& graph);

// CSV exchange: `site_id,x0,...,x{d-1}`; graph `site_id,degree,nbar`; edges `a,b` with a < b.
void write_configuration_csv(std::ostream& out, const Configuration& config);
/// Window defaults to the bounding box of the points when `window` is null.
Configuration read_configuration_csv(std::istream& in, const Box* window = nullptr);
void write_graph_csv(std::ostream& out, const GeometricGraph& graph);
void write_edges_csv(std::ostream& out, const GeometricGraph& graph);

}  // namespace gspin
