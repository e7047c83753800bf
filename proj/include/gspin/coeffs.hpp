#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gspin/geometry.hpp"
#include "gspin/spaces.hpp"

namespace gspin {

using ScalarFn = std::function<double(double)>;
/// Pair function (x, y, z_x, z_y); y ranges over the closed neighbourhood of x.
using PairFn = std::function<double(SiteId, SiteId, double, double)>;

/// phi with declared growth |phi| <= c(1 + |s|^R) and one-sided constant b.
struct SinglePotentialDrift {
    std::string name;
    ScalarFn phi;
    ScalarFn dphi;  // optional; finite differences otherwise
    double c = 1.0;
    double R = 2.0;
    double b = 0.0;
};

struct PairTerm {
    std::string name;
    PairFn fn;                   // empty means identically zero
    double constant = 1.0;       // a_bar for drift terms, M for noise terms
    bool diagonal_only = false;  // fn vanishes for y != x
};

struct PairCoupling {
    PairTerm phi;  // phi_xy
    PairTerm psi;  // psi_xy
    double a_bar() const noexcept { return phi.constant; }
    double M() const noexcept { return psi.constant; }
};

class CoefficientField {
public:
    CoefficientField(GraphPtr graph, SinglePotentialDrift drift, PairCoupling coupling);

    const GraphPtr& graph() const noexcept { return graph_; }
    const SinglePotentialDrift& drift() const noexcept { return drift_; }
    const PairCoupling& coupling() const noexcept { return coupling_; }
    std::size_t size() const noexcept { return graph_->size(); }

    double phi(double s) const { return drift_.phi(s); }
    double dphi(double s) const;
    /// sum over the closed neighbourhood of phi_xy(z_x, z_y), self pair included
    double pair_drift(SiteId x, std::span<const double> z) const;
    double drift_at(SiteId x, std::span<const double> z) const { return phi(z[x]) + pair_drift(x, z); }
    double diffusion_at(SiteId x, std::span<const double> z) const;
    bool deterministic() const noexcept { return !coupling_.psi.fn; }

private:
    GraphPtr graph_;
    SinglePotentialDrift drift_;
    PairCoupling coupling_;
};

double eval_drift(const CoefficientField& field, const WeightedSeq& state, SiteId x);
double eval_diffusion(const CoefficientField& field, const WeightedSeq& state, SiteId x);

// Built-in presets. Unknown names are parameter errors.
SinglePotentialDrift drift_preset(const std::string& name);
PairTerm coupling_preset(const std::string& name, double J = 0.0);
PairTerm noise_preset(const std::string& name, double M_tilde = 0.0);
CoefficientField make_field(GraphPtr graph, const std::string& drift, const std::string& coupling, double J,
                            const std::string& noise, double M_tilde);

struct InequalityCheck {
    std::string name;
    bool passed = true;
    std::size_t samples = 0;
    double worst_margin = -std::numeric_limits<double>::infinity();  // max of lhs - rhs
    std::vector<double> counterexample;                               // arguments at the worst margin
};

struct AssumptionReport {
    std::vector<InequalityCheck> checks;
    bool passed() const noexcept;
    const InequalityCheck& at(const std::string& name) const;
    std::string summary() const;
};

inline constexpr std::size_t kDefaultValidationTrials = 100000;
inline constexpr double kDefaultValidationBox = 10.0;

/// Randomized falsification of the growth, dissipativity, Lipschitz and
/// derived per-site inequalities. Names: constants, C_growth, D_dissipative,
/// B_lipschitz, B_growth, E_lipschitz, E_growth, psi_lipschitz, psi_at_zero,
/// phi_growth, pairing.
AssumptionReport validate_assumptions(const CoefficientField& field, std::size_t trials = kDefaultValidationTrials,
                                      double box = kDefaultValidationBox, std::uint64_t seed = 1);

/// lhs - rhs of
/// (z1_x - z2_x)(Phi_x(Z1) - Phi_x(Z2)) <= (b + 1/2 + 4 a^2 n^2)(z1_x - z2_x)^2
///                                         + (1/2) a^2 n sum_{y ~ x} (z1_y - z2_y)^2.
double pairing_bound_margin(const CoefficientField& field, std::span<const double> z1, std::span<const double> z2,
                            SiteId x);

}  // namespace gspin
