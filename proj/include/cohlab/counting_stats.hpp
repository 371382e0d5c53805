// counting_stats.hpp — Scaled cumulant generating function of the cavity photon count and its derivatives

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "cohlab/engine_model.hpp"
#include "cohlab/errors.hpp"

namespace cohlab {

inline constexpr int kMaxCumulantOrder = 4;

using Cumulants = std::array<double, kMaxCumulantOrder>;

struct SteadyState {
    Vector5 rho; // {rho_11, rho_22, rho_aa, rho_bb, Re(rho_12)}

    double population(int slot) const { return rho(slot); }
    double coherence() const { return rho(kCoherence); }
};

struct CumulantSet {
    Cumulants j{};  // mean, variance, third and fourth cumulant (photons per unit time)
    Cumulants j0{}; // same generator with p_c = p_h = 0
    Cumulants c{};  // j / j0
};

namespace detail {

using Matrix6 = Eigen::Matrix<double, kDim + 1, kDim + 1>;
using Vector6 = Eigen::Matrix<double, kDim + 1, 1>;

inline void require_conserving(const TwistedGenerator& gen) {
    const double scale = std::max(1.0, gen.l0().cwiseAbs().maxCoeff());
    if (gen.conservation_defect() > 1e-12 * scale)
        throw DomainError("generator does not conserve population (u^T L(0) != 0)");
}

} // namespace detail

/// Normalized null vector of L(0). Throws SingularityError unless the null
/// space is exactly one-dimensional.
inline SteadyState steady_state(const TwistedGenerator& gen) {
    detail::require_conserving(gen);
    const Matrix5& l0 = gen.l0();

    Eigen::JacobiSVD<Matrix5> svd(l0);
    const auto& sv = svd.singularValues(); // descending
    const double tol = 1e-11 * std::max(sv(0), 1e-300);
    if (!(sv(kDim - 1) <= tol) || !(sv(kDim - 2) > tol))
        throw SingularityError("steady_state: null space of L(0) is not one-dimensional");

    // Population rows are linearly dependent; swap one for the normalization.
    Matrix5 a = l0;
    a.row(kColdLevel) = population_functional().transpose();
    Vector5 b = Vector5::Zero();
    b(kColdLevel) = 1.0;
    Vector5 rho = a.fullPivLu().solve(b);
    rho /= population_functional().dot(rho);

    const double residual = (l0 * rho).cwiseAbs().maxCoeff();
    if (!(residual < 1e-10))
        throw SingularityError("steady_state: residual of L(0) rho exceeds 1e-10");
    return SteadyState{rho};
}

/// Eigenvalue of L(lambda) on the branch through 0 at lambda = 0, taken as the
/// one with largest real part.
inline double cgf(const TwistedGenerator& gen, double lambda) {
    Eigen::EigenSolver<Eigen::Matrix<double, kDim, kDim>> es(gen.eval(lambda), false);
    if (es.info() != Eigen::Success) throw NumericalError("cgf: eigenvalue iteration failed");
    std::array<std::complex<double>, kDim> ev;
    for (int i = 0; i < kDim; ++i) ev[i] = es.eigenvalues()(i);
    std::sort(ev.begin(), ev.end(),
              [](const auto& x, const auto& y) { return x.real() > y.real(); });
    if (!(ev[0].real() - ev[1].real() > 1e-8))
        throw BranchAmbiguityError("cgf: spectral gap at lambda collapsed; shrink lambda");
    return ev[0].real();
}

/// j[k] = d^k S / d lambda^k at 0 for k = 1..4 by Rayleigh-Schroedinger
/// expansion of the dominant branch around the steady state.
///
/// With S(l) = sum s_k l^k/k!, rho(l) = sum rho_k l^k/k!, u.rho_0 = 1 and
/// u.rho_k = 0 (k >= 1), order n of L(l) rho(l) = S(l) rho(l) gives
///   s_n = sum_{m=1..n} C(n,m) u.L_m rho_{n-m}
///   L_0 rho_n = sum_{m=1..n} C(n,m) (s_m rho_{n-m} - L_m rho_{n-m}).
/// Each rho_n comes from the bordered system [L_0 rho_0; u^T 0].
inline Cumulants cumulants(const TwistedGenerator& gen) {
    const SteadyState ss = steady_state(gen);
    const Vector5 u = population_functional();

    detail::Matrix6 bordered = detail::Matrix6::Zero();
    bordered.topLeftCorner<kDim, kDim>() = gen.l0();
    bordered.block<kDim, 1>(0, kDim) = ss.rho;
    bordered.block<1, kDim>(kDim, 0) = u.transpose();

    Eigen::JacobiSVD<detail::Matrix6> svd(bordered);
    const auto& sv = svd.singularValues();
    if (!(sv(kDim) > 0.0) || sv(0) / sv(kDim) > 1e12)
        throw ConditioningError("cumulants: bordered system condition number exceeds 1e12");
    const Eigen::PartialPivLU<detail::Matrix6> lu(bordered);

    constexpr std::array<std::array<double, kMaxCumulantOrder + 1>, kMaxCumulantOrder + 1>
        binom{{{1, 0, 0, 0, 0}, {1, 1, 0, 0, 0}, {1, 2, 1, 0, 0}, {1, 3, 3, 1, 0}, {1, 4, 6, 4, 1}}};

    std::array<Vector5, kMaxCumulantOrder + 1> rho;
    std::array<double, kMaxCumulantOrder + 1> s{};
    rho[0] = ss.rho;
    for (int n = 1; n <= kMaxCumulantOrder; ++n) {
        double sn = 0.0;
        for (int m = 1; m <= n; ++m) sn += binom[n][m] * u.dot(gen.l_deriv(m) * rho[n - m]);
        s[n] = sn;
        if (n == kMaxCumulantOrder) break;

        Vector5 rhs = Vector5::Zero();
        for (int m = 1; m <= n; ++m)
            rhs += binom[n][m] * (s[m] * rho[n - m] - gen.l_deriv(m) * rho[n - m]);
        detail::Vector6 ext;
        ext << rhs, 0.0;
        rho[n] = lu.solve(ext).head<kDim>();
    }

    Cumulants out{};
    for (int k = 1; k <= kMaxCumulantOrder; ++k) out[k - 1] = s[k];
    return out;
}

inline constexpr double kDegenerateBaseline = 1e-12;

/// Cumulants with and without coherence and their ratios.
inline CumulantSet cumulant_ratios(const EngineParams& params,
                                   GeneratorForm form = GeneratorForm::consistent) {
    CumulantSet out;
    out.j = cumulants(build_generator(params, form));
    out.j0 = cumulants(build_generator(params.without_coherence(), form));
    for (int i = 0; i < kMaxCumulantOrder; ++i) {
        if (!(std::abs(out.j0[i]) >= kDegenerateBaseline))
            throw DegenerateSampleError("cumulant_ratios: |j0[" + std::to_string(i + 1) +
                                        "]| below 1e-12");
        out.c[i] = out.j[i] / out.j0[i];
        if (!std::isfinite(out.c[i]))
            throw DegenerateSampleError("cumulant_ratios: non-finite ratio");
    }
    return out;
}

/// Cycle affinity ln(forward/backward) of the incoherent (p = 0) engine,
/// forward meaning ground -> |a> -> |b> -> ground with one photon emitted.
inline double cycle_affinity(const EngineParams& params) {
    params.validate();
    const Occupations o = Occupations::from(params);
    return std::log(o.n_h * o.nt_l * o.nt_c) - std::log(o.nt_h * o.n_l * o.n_c);
}

/// S(lambda) - S(-lambda - shift) for each lambda. Diagnostic only.
inline std::vector<double> symmetry_scan(const TwistedGenerator& gen, double shift,
                                         std::span<const double> lambdas) {
    std::vector<double> out;
    out.reserve(lambdas.size());
    for (double l : lambdas) out.push_back(cgf(gen, l) - cgf(gen, -l - shift));
    return out;
}

} // namespace cohlab
