#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "gspin/coeffs.hpp"
#include "gspin/engine.hpp"
#include "gspin/errors.hpp"
#include "gspin/geometry.hpp"
#include "gspin/parallel.hpp"

namespace gspin {

/// a(r) for the pair potential W_xy(u, v) = a(|x - y|) u v.
struct PairPotential {
    enum class Type { tent, constant };
    Type type = Type::constant;
    double J = 0.0;
    double radius = 1.0;

    static PairPotential parse(const std::string& type, double J, double radius);
    double operator()(double r) const noexcept;
    double max_abs() const noexcept { return std::abs(J); }
};

/// Single-site potential with lower bound V(u) >= a_V |u|^tau - b_V.
struct SinglePotential {
    enum class Type { quartic, gaussian, poly, custom };
    Type type = Type::quartic;
    std::vector<double> coeffs;  // poly: V(u) = sum_k coeffs[k] u^k
    std::function<double(double)> fn;  // custom; V' by central differences
    double a_V = 0.25;
    double b_V = 0.0;
    double tau = 4.0;

    static SinglePotential quartic();   // u^4 / 4
    static SinglePotential gaussian();  // u^2 / 2
    /// Even degree >= 2 with positive leading coefficient.
    static SinglePotential poly(std::vector<double> coeffs);
    static SinglePotential custom(std::function<double(double)> V, double a_V, double b_V, double tau);
    static SinglePotential parse(const std::string& type, std::vector<double> coeffs);

    double V(double u) const;
    double dV(double u) const;
    std::string name() const;
};

struct GibbsCheck {
    std::string name;
    bool passed = true;
    double worst_margin = 0.0;
    std::string detail;
};

class GibbsModel {
public:
    GibbsModel(GraphPtr graph, PairPotential a, SinglePotential V);

    const GraphPtr& graph() const noexcept { return graph_; }
    const PairPotential& a() const noexcept { return a_; }
    const SinglePotential& V() const noexcept { return V_; }
    double coupling(SiteId x, SiteId y) const;  // a(|x - y|), 0 on the diagonal
    double W(SiteId x, SiteId y, double u, double v) const { return coupling(x, y) * u * v; }
    // growth certificate |W| <= I_W (|u|^r + |v|^r) + J_W
    double I_W() const noexcept { return 0.5 * a_.max_abs(); }
    double J_W() const noexcept { return 0.0; }
    double r() const noexcept { return 2.0; }

    /// Support, lower-bound, growth and tau > r checks (failures are entries, not throws).
    std::vector<GibbsCheck> validate(std::size_t trials = 10000, double box = 10.0, std::uint64_t seed = 1) const;

private:
    GraphPtr graph_;
    PairPotential a_;
    SinglePotential V_;
};

/// Interior pairs of eta once each, plus pairs between eta and the outside (values from z).
double local_energy(const GibbsModel& model, std::span<const SiteId> eta, std::span<const double> sigma_eta,
                    std::span<const double> z);

struct ChainSpec {
    std::size_t steps = 4000;
    std::size_t burn_in = 1000;
    double step_size = 0.5;
    std::uint64_t seed = 0;
};

struct SpecKernelSample {
    std::vector<SiteId> eta;
    std::vector<double> boundary;               // full-window values outside eta
    std::vector<std::vector<double>> samples;   // thinned, sample x eta-site
    std::vector<double> last;                   // final chain state on eta
    double acceptance_rate = 0.0;
    double step_size = 0.0;
    double iat = 1.0;  // largest integrated autocorrelation time over coordinates
    double ess = 0.0;  // post-burn-in draws / iat
    std::size_t thin = 1;
    std::vector<std::string> warnings;

    MeanStderr column(std::size_t i) const;
    /// Full-window state with eta filled from the final chain state.
    std::vector<double> last_state() const;
};

/// MALA targeting exp[-E_eta(sigma | z) - sum_x V(sigma_x)]; dual-averaging step
/// size adaptation during burn-in aimed at acceptance 0.6.
SpecKernelSample kernel_sample(const GibbsModel& model, std::span<const SiteId> eta, std::span<const double> boundary,
                               const ChainSpec& chain);

/// Integrated autocorrelation time by Geyer's initial positive sequence.
double integrated_autocorrelation(std::span<const double> x);

/// Mean with a standard error inflated by the series' own autocorrelation
/// time. Thinning uses the coordinates' IAT, which can undershoot for
/// nonlinear observables such as squares.
MeanStderr mean_stderr_correlated(std::span<const double> x);

/// Energy distance between two equal-size paired samples, and a permutation
/// p-value from random swaps within pairs.
struct TwoSampleTest {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t permutations = 0;
};
TwoSampleTest paired_energy_test(const std::vector<std::vector<double>>& before,
                                 const std::vector<std::vector<double>>& after, std::size_t permutations,
                                 std::uint64_t seed);

/// Independent draws from the window's Gibbs measure (boundary 0 outside the
/// window is vacuous): final states of chains seeded chain.seed + i.
std::vector<std::vector<double>> sample_window_measure(const GibbsModel& model, const ChainSpec& chain,
                                                       std::size_t count, unsigned threads = 1);

struct DlrReport {
    TwoSampleTest test;
    std::size_t outer_samples = 0;
    std::size_t observables = 0;
    std::vector<std::string> warnings;
};

inline constexpr std::size_t kDlrPermutations = 1000;

/// Draw z ~ nu, resample eta from the kernel with boundary z, and compare
/// observables (eta site values, products across eta's boundary) before/after.
DlrReport dlr_residual(const GibbsModel& model, std::span<const SiteId> eta, const ChainSpec& chain,
                       std::size_t outer_samples, unsigned threads = 1,
                       std::size_t permutations = kDlrPermutations);

/// The construction error for a gradient field whose assumption report fails.
class FieldConstructionError : public ParameterError {
public:
    explicit FieldConstructionError(AssumptionReport report);
    const AssumptionReport& report() const noexcept { return report_; }

private:
    AssumptionReport report_;
};

/// phi = -V'/2, phi_xy(u, v) = -a(x - y) v / 2 off the diagonal, unit additive noise.
CoefficientField gradient_dynamics_field(const GibbsModel& model, std::size_t validation_trials = 10000);

struct ReversibilityResult {
    double lhs = 0.0;  // mean f(zeta) g(Xi_t)
    double rhs = 0.0;  // mean f(Xi_t) g(zeta)
    double se = 0.0;   // standard error of lhs - rhs
    std::size_t paths = 0;
};

/// zeta_i ~ nu (independent chains), Xi_t from the gradient dynamics with replica i.
ReversibilityResult reversibility_test(const GibbsModel& model, const Observable& f, const Observable& g, double t,
                                       const SimPlan& plan, const ChainSpec& nu_chain, unsigned threads = 1);

// `sample,site_id,value` rows.
void write_samples_csv(std::ostream& out, const SpecKernelSample& s);

}  // namespace gspin
