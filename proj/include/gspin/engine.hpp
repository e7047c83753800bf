#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "gspin/coeffs.hpp"
#include "gspin/geometry.hpp"
#include "gspin/parallel.hpp"
#include "gspin/spaces.hpp"

namespace gspin {

/// Nested volumes Lambda_1 <= ... <= Lambda_K, the last one being the whole window.
/// Each volume is a sorted site list.
class VolumeSequence {
public:
    VolumeSequence(std::vector<std::vector<SiteId>> volumes, std::size_t n_sites);

    /// Lambda_n = {x : |x| <= radii[n]}; the full window is appended unless the
    /// last radius already covers it.
    static VolumeSequence by_radius(const GeometricGraph& graph, std::span<const double> radii);
    static VolumeSequence full(std::size_t n_sites);

    std::size_t count() const noexcept { return volumes_.size(); }
    const std::vector<SiteId>& operator[](std::size_t i) const { return volumes_.at(i); }
    const std::vector<std::vector<SiteId>>& volumes() const noexcept { return volumes_; }
    /// Whether every inclusion is proper (repeated volumes are allowed but reported here).
    bool strictly_nested() const noexcept;

private:
    std::vector<std::vector<SiteId>> volumes_;
};

enum class Scheme { tamed_em, split_step_implicit };
Scheme parse_scheme(const std::string& name);
std::string to_string(Scheme s);

struct SimPlan {
    double dt = 1e-3;
    double T = 1.0;
    Scheme scheme = Scheme::tamed_em;
    std::size_t replicas = 1;
    std::uint64_t master_seed = 0;
    double p = 2.0;
    std::size_t record_stride = 1;  // keep every k-th grid point (the last one is always kept)

    /// Throws ParameterError; R is the drift's growth exponent.
    void validate(double R = 2.0) const;
    std::size_t steps() const;
    double time_at_step(std::size_t j) const;
};

/// Initial data: a fixed vector, or i.i.d. normal(a, b) / uniform(a, b) drawn
/// from the keyed stream at step -1.
struct InitialCondition {
    enum class Kind { fixed, normal, uniform };
    Kind kind = Kind::fixed;
    std::vector<double> values;
    double a = 0.0;
    double b = 1.0;

    static InitialCondition fixed_values(std::vector<double> v);
    static InitialCondition normal(double mean, double sd);
    static InitialCondition uniform(double lo, double hi);

    std::vector<double> sample(std::size_t n_sites, std::uint64_t seed, std::uint32_t replica) const;
};

inline constexpr std::uint64_t kInitialStep = ~std::uint64_t{0};

/// Site paths on the recorded part of the time grid, stored time-major.
struct Trajectory {
    std::size_t n_sites = 0;
    std::vector<std::size_t> steps;  // grid index of each recorded row
    std::vector<double> times;
    std::vector<double> data;

    std::size_t rows() const noexcept { return times.size(); }
    double at(std::size_t row, SiteId x) const { return data[row * n_sites + x]; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * n_sites, n_sites}; }
};

Trajectory integrate_truncated(const CoefficientField& field, std::span<const SiteId> volume,
                               std::span<const double> init, const SimPlan& plan, std::uint32_t replica);

/// State at grid time t of the full-window system.
std::vector<double> integrate_to(const CoefficientField& field, std::span<const double> init, double t,
                                 const SimPlan& plan, std::uint32_t replica);

class NestedEnsemble {
public:
    NestedEnsemble(SimPlan plan, VolumeSequence volumes, GraphPtr graph, std::vector<Trajectory> runs);

    const SimPlan& plan() const noexcept { return plan_; }
    const VolumeSequence& volumes() const noexcept { return volumes_; }
    const GraphPtr& graph() const noexcept { return graph_; }
    std::size_t replicas() const noexcept { return plan_.replicas; }
    std::size_t volume_count() const noexcept { return volumes_.count(); }
    const Trajectory& run(std::size_t replica, std::size_t volume) const;
    const std::vector<double>& times() const noexcept { return runs_.front().times; }
    /// Row of the recorded grid holding time t; ParameterError when t is not recorded.
    std::size_t time_index(double t) const;

private:
    SimPlan plan_;
    VolumeSequence volumes_;
    GraphPtr graph_;
    std::vector<Trajectory> runs_;  // replica-major
};

NestedEnsemble run_nested(const CoefficientField& field, const VolumeSequence& volumes,
                          const InitialCondition& init, const SimPlan& plan, unsigned threads = 1);

/// Monte Carlo E|xi^n_{x,t}|^p with its standard error; `row` indexes the recorded grid.
MeanStderr moment_p(const NestedEnsemble& ens, std::size_t volume, SiteId x, std::size_t row);
MeanStderr moment_p(const NestedEnsemble& ens, std::size_t volume, SiteId x, std::size_t row, double p);

struct GapEstimate {
    double value = 0.0;  // sup over recorded rows of the replica mean
    double se = 0.0;     // standard error at the arg-sup row
    std::size_t row = 0;
};

/// sup_t E sum_x e^{-beta|x|} |xi^n_{x,t} - xi^m_{x,t}|^p, for n <= m.
GapEstimate cauchy_gap(const NestedEnsemble& ens, std::size_t n, std::size_t m, double beta, double p);

/// sum_x e^{-beta|x|} max over volumes <= upto and recorded rows of E|xi^n_{x,t}|^p.
double uniform_moment(const NestedEnsemble& ens, double beta, double p, std::size_t upto);

/// Scalar equation for site x with every other site following env (a
/// full-window path recorded at every grid step). Uses the noise key of the
/// main run, so with env from a run of the same scheme the result reproduces
/// that run's x path.
std::vector<double> tagged_particle_solve(const CoefficientField& field, SiteId x, const Trajectory& env,
                                          double init_x, const SimPlan& plan, std::uint32_t replica);

/// E sup_t |eta_t - xi^n_{x,t}|^p over replicas; eta[r] is the tagged path of replica r.
MeanStderr tagged_gap(const NestedEnsemble& ens, std::size_t volume, SiteId x,
                      std::span<const std::vector<double>> eta, double p);

using Observable = std::function<double(std::span<const double>)>;

/// Monte Carlo T_t f(zeta) = E f(Xi_t(zeta)) over plan.replicas full-window paths.
MeanStderr semigroup_apply(const CoefficientField& field, const Observable& f, std::span<const double> zeta,
                           double t, const SimPlan& plan, unsigned threads = 1);

// `site_id,t,p,mean,stderr` for one volume, every site and recorded time.
void write_moments_csv(std::ostream& out, const NestedEnsemble& ens, std::size_t volume, double p);
// `replica,volume,site,step,value`.
void write_trajectories_csv(std::ostream& out, const NestedEnsemble& ens);

}  // namespace gspin
