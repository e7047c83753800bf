#pragma once
// Independent reference computations used by the unit and acceptance suites.
// Nothing here calls into the code paths it is used to check.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <boost/multiprecision/cpp_dec_float.hpp>

#include <cmath>
#include <vector>

#include "gspin/ovsbound.hpp"
#include "gspin/rng.hpp"

namespace oracle {

using Decimal200 = boost::multiprecision::number<boost::multiprecision::cpp_dec_float<200>>;

/// K_T series summed in 200-digit decimal arithmetic, factorial accumulated exactly.
inline double k_series_200(double L, double T, double q, double gap) {
    const Decimal200 x = Decimal200(L) * Decimal200(T) / boost::multiprecision::pow(Decimal200(gap), Decimal200(q));
    Decimal200 sum = 1;
    Decimal200 factorial = 1;
    const Decimal200 cutoff("1e-60");
    bool decreasing = false;
    Decimal200 previous = 1;
    for (int n = 1; n < 200000; ++n) {
        factorial *= n;
        const Decimal200 dn = n;
        const Decimal200 term = boost::multiprecision::pow(x, dn) *
                                boost::multiprecision::pow(dn, Decimal200(q) * dn) / factorial;
        sum += term;
        decreasing = term < previous;
        previous = term;
        if (decreasing && term < cutoff * sum) break;
    }
    return static_cast<double>(sum);
}

inline Eigen::MatrixXd dense(const gspin::FiniteRangeMatrix& Q) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(Q.size()), static_cast<Eigen::Index>(Q.size()));
    for (const auto& e : Q.entries()) m(e.row, e.col) = e.value;
    return m;
}

/// exp(tQ) z0 via Eigen's Pade scaling-and-squaring.
inline std::vector<double> expm_apply(const gspin::FiniteRangeMatrix& Q, const std::vector<double>& z0, double t) {
    const Eigen::MatrixXd e = (t * dense(Q)).exp();
    const Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(z0.data(), static_cast<Eigen::Index>(z0.size()));
    const Eigen::VectorXd out = e * z;
    return {out.data(), out.data() + out.size()};
}

/// Path g on a uniform grid with g_j = z + h sum_{i<j} Q g_i - d_j, d_j >= 0,
/// clipped at 0. For Q >= 0 this sits below the explicit Euler solution,
/// which in turn sits below exp(tQ) z entrywise.
inline gspin::TimePath subsolution_path(const gspin::FiniteRangeMatrix& Q, const std::vector<double>& z, double T,
                                        std::size_t steps, double slack, gspin::CounterStream& rng) {
    gspin::TimePath path;
    const double h = T / static_cast<double>(steps);
    std::vector<double> running(z.size(), 0.0);
    for (std::size_t j = 0; j <= steps; ++j) {
        if (j > 0) {
            const auto qg = Q.apply(path.values.back());
            for (std::size_t x = 0; x < z.size(); ++x) running[x] += h * qg[x];
        }
        std::vector<double> g(z.size());
        for (std::size_t x = 0; x < z.size(); ++x) {
            const double upper = z[x] + running[x];
            g[x] = std::max(0.0, upper - slack * rng.uniform() * (1.0 + std::abs(upper)));
        }
        path.times.push_back(h * static_cast<double>(j));
        path.values.push_back(std::move(g));
    }
    path.times.back() = T;
    return path;
}

}  // namespace oracle
