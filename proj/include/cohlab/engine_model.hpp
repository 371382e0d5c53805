// engine_model.hpp — Four-level heat-engine parameters and the counting-field dressed generator

#pragma once

#include <array>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "json.hpp"

#include "cohlab/errors.hpp"

namespace cohlab {

// Density-vector slots: two degenerate ground populations, the hot-pumped
// upper level |a>, the cold-fed level |b>, and Re(rho_12).
inline constexpr int kDim = 5;
inline constexpr int kGround1 = 0;
inline constexpr int kGround2 = 1;
inline constexpr int kHotLevel = 2;
inline constexpr int kColdLevel = 3;
inline constexpr int kCoherence = 4;

using Matrix5 = Eigen::Matrix<double, kDim, kDim, Eigen::RowMajor>;
using Vector5 = Eigen::Matrix<double, kDim, 1>;

// Left null vector of every conserving generator: sums the four populations.
inline Vector5 population_functional() {
    Vector5 u;
    u << 1.0, 1.0, 1.0, 1.0, 0.0;
    return u;
}

// Units: hbar = k_B = 1. Gamma_1x = Gamma_2x = r for both baths.
struct EngineParams {
    double e1 = 0.5;
    double e_a = 3.0;
    double e_b = 2.0;
    double g = 1.0;
    double r = 0.1;
    double tau = 0.1;
    double t_c = 1.0;
    double t_h = 3.5;
    double t_l = 2.0;
    double p_c = 0.0;
    double p_h = 0.0;

    // Throws DomainError naming the first violated invariant.
    void validate() const {
        auto positive_finite = [](double v) { return std::isfinite(v) && v > 0.0; };
        if (!(std::isfinite(e1) && std::isfinite(e_a) && std::isfinite(e_b)))
            throw DomainError("EngineParams: energies must be finite");
        if (!(e_a > e_b && e_b > e1))
            throw DomainError("EngineParams: level ordering requires e_a > e_b > e1");
        if (!positive_finite(g)) throw DomainError("EngineParams: g must be > 0");
        if (!positive_finite(r)) throw DomainError("EngineParams: r must be > 0");
        if (!(std::isfinite(tau) && tau >= 0.0)) throw DomainError("EngineParams: tau must be >= 0");
        if (!positive_finite(t_c)) throw DomainError("EngineParams: t_c must be > 0");
        if (!positive_finite(t_h)) throw DomainError("EngineParams: t_h must be > 0");
        if (!positive_finite(t_l)) throw DomainError("EngineParams: t_l must be > 0");
        if (!(p_c >= 0.0 && p_c <= 1.0)) throw DomainError("EngineParams: p_c must lie in [0,1]");
        if (!(p_h >= 0.0 && p_h <= 1.0)) throw DomainError("EngineParams: p_h must lie in [0,1]");
    }

    EngineParams without_coherence() const {
        EngineParams out = *this;
        out.p_c = 0.0;
        out.p_h = 0.0;
        return out;
    }

    bool operator==(const EngineParams&) const = default;
};

inline void to_json(nlohmann::json& j, const EngineParams& p) {
    j = nlohmann::json{{"e1", p.e1},   {"e_a", p.e_a}, {"e_b", p.e_b}, {"g", p.g},
                       {"r", p.r},     {"tau", p.tau}, {"t_c", p.t_c}, {"t_h", p.t_h},
                       {"t_l", p.t_l}, {"p_c", p.p_c}, {"p_h", p.p_h}};
}

// Missing keys keep their defaults; unknown keys are rejected.
inline void from_json(const nlohmann::json& j, EngineParams& p) {
    if (!j.is_object()) throw DomainError("EngineParams: expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        double* slot = nullptr;
        if (key == "e1") slot = &p.e1;
        else if (key == "e_a") slot = &p.e_a;
        else if (key == "e_b") slot = &p.e_b;
        else if (key == "g") slot = &p.g;
        else if (key == "r") slot = &p.r;
        else if (key == "tau") slot = &p.tau;
        else if (key == "t_c") slot = &p.t_c;
        else if (key == "t_h") slot = &p.t_h;
        else if (key == "t_l") slot = &p.t_l;
        else if (key == "p_c") slot = &p.p_c;
        else if (key == "p_h") slot = &p.p_h;
        else throw DomainError("EngineParams: unknown key '" + key + "'");
        if (!value.is_number()) throw DomainError("EngineParams: '" + key + "' must be a number");
        *slot = value.get<double>();
    }
}

/// Mean Bose-Einstein occupation 1/(exp(gap/T) - 1).
inline double bose_occupation(double gap, double temperature) {
    if (!(gap > 0.0) || !std::isfinite(gap))
        throw DomainError("bose_occupation: gap must be positive");
    if (!(temperature > 0.0) || !std::isfinite(temperature))
        throw DomainError("bose_occupation: temperature must be positive");
    return 1.0 / std::expm1(gap / temperature);
}

/// Interference coupling Gamma_12x = r * p for a bath with coherence strength p.
inline double coherence_coupling(double r, double p) {
    if (!(r > 0.0)) throw DomainError("coherence_coupling: r must be positive");
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("coherence_coupling: p must lie in [0,1]");
    return r * p;
}

struct Occupations {
    double n_h, n_c, n_l;
    double nt_h, nt_c, nt_l; // 1 + n

    // Hot bath across E_a - E_1, cold bath across E_b - E_1, cavity across E_a - E_b.
    static Occupations from(const EngineParams& p) {
        Occupations o{};
        o.n_h = bose_occupation(p.e_a - p.e1, p.t_h);
        o.n_c = bose_occupation(p.e_b - p.e1, p.t_c);
        o.n_l = bose_occupation(p.e_a - p.e_b, p.t_l);
        o.nt_h = 1.0 + o.n_h;
        o.nt_c = 1.0 + o.n_c;
        o.nt_l = 1.0 + o.n_l;
        return o;
    }
};

enum class GeneratorForm {
    // Baths wired so that each upper level is fed and drained by the same
    // bath; the cold coherence gain carries the factor 2 needed for
    // population conservation. Default.
    consistent,
    // The matrix as typeset, with only the (3,5) entry doubled.
    printed_trace_fixed,
    // The matrix as typeset. Does not conserve population.
    printed,
};

inline std::string to_string(GeneratorForm form) {
    switch (form) {
    case GeneratorForm::consistent: return "consistent";
    case GeneratorForm::printed_trace_fixed: return "printed_trace_fixed";
    case GeneratorForm::printed: return "printed";
    }
    return "?";
}

inline GeneratorForm generator_form_from_string(const std::string& s) {
    if (s == "consistent") return GeneratorForm::consistent;
    if (s == "printed_trace_fixed") return GeneratorForm::printed_trace_fixed;
    if (s == "printed") return GeneratorForm::printed;
    throw DomainError("unknown generator form '" + s + "'");
}

// L(lambda) = L(0) + (e^{-lambda} - 1) A E_{hot,cold} + (e^{lambda} - 1) B E_{cold,hot}
// with A = g^2 n_l (absorption, counted -1) and B = g^2 (1 + n_l) (emission, counted +1).
class TwistedGenerator {
public:
    explicit TwistedGenerator(const Matrix5& l0)
        : l0_(l0), absorption_(l0(kHotLevel, kColdLevel)), emission_(l0(kColdLevel, kHotLevel)) {
        for (int k = 1; k <= 4; ++k) {
            Matrix5 d = Matrix5::Zero();
            d(kHotLevel, kColdLevel) = (k % 2 == 0 ? 1.0 : -1.0) * absorption_;
            d(kColdLevel, kHotLevel) = emission_;
            deriv_[k - 1] = d;
        }
    }

    const Matrix5& l0() const noexcept { return l0_; }

    // k-th lambda-derivative at lambda = 0, k in 1..4.
    const Matrix5& l_deriv(int k) const {
        if (k < 1 || k > 4) throw DomainError("l_deriv: order must be in 1..4");
        return deriv_[k - 1];
    }

    Matrix5 eval(double lambda) const {
        Matrix5 m = l0_;
        m(kHotLevel, kColdLevel) = absorption_ * std::exp(-lambda);
        m(kColdLevel, kHotLevel) = emission_ * std::exp(lambda);
        return m;
    }

    double absorption_rate() const noexcept { return absorption_; }
    double emission_rate() const noexcept { return emission_; }

    // max_j |sum_i u_i L(0)_ij|; zero for a conserving generator.
    double conservation_defect() const {
        return (population_functional().transpose() * l0_).cwiseAbs().maxCoeff();
    }

private:
    Matrix5 l0_;
    double absorption_;
    double emission_;
    std::array<Matrix5, 4> deriv_;
};

inline TwistedGenerator build_generator(const EngineParams& p,
                                        GeneratorForm form = GeneratorForm::consistent) {
    p.validate();
    const Occupations o = Occupations::from(p);
    const double r = p.r;
    const double g2 = p.g * p.g;
    const double gamma12c = coherence_coupling(r, p.p_c);
    const double gamma12h = coherence_coupling(r, p.p_h);
    const double gamma12 = 0.5 * (gamma12c * o.n_c + gamma12h * o.n_h);
    const double gbar = -0.5 * o.n_h * (r + r) - 0.5 * o.n_c * (r + r);

    Matrix5 m = Matrix5::Zero();
    const double ground_loss = -(r * o.n_h + r * o.n_c);
    for (int gs : {kGround1, kGround2}) {
        m(gs, gs) = ground_loss;
        m(gs, kHotLevel) = r * o.nt_h;
        m(gs, kColdLevel) = r * o.nt_c;
        m(gs, kCoherence) = -2.0 * gamma12;
    }

    m(kHotLevel, kHotLevel) = -(r + r) * o.nt_h - g2 * o.nt_l;
    m(kHotLevel, kColdLevel) = g2 * o.n_l;
    m(kColdLevel, kHotLevel) = g2 * o.nt_l;
    m(kColdLevel, kColdLevel) = -g2 * o.n_l - (r + r) * o.nt_c;

    m(kCoherence, kGround1) = -gamma12;
    m(kCoherence, kGround2) = -gamma12;
    m(kCoherence, kHotLevel) = gamma12h * o.nt_h;
    m(kCoherence, kColdLevel) = 2.0 * gamma12c * o.nt_c;
    m(kCoherence, kCoherence) = gbar - p.tau;

    switch (form) {
    case GeneratorForm::consistent:
        m(kHotLevel, kGround1) = r * o.n_h;
        m(kHotLevel, kGround2) = r * o.n_h;
        m(kHotLevel, kCoherence) = 2.0 * gamma12h * o.n_h;
        m(kColdLevel, kGround1) = r * o.n_c;
        m(kColdLevel, kGround2) = r * o.n_c;
        m(kColdLevel, kCoherence) = 2.0 * gamma12c * o.n_c;
        break;
    case GeneratorForm::printed_trace_fixed:
    case GeneratorForm::printed:
        m(kHotLevel, kGround1) = r * o.n_c;
        m(kHotLevel, kGround2) = r * o.n_c;
        m(kHotLevel, kCoherence) =
            (form == GeneratorForm::printed ? 1.0 : 2.0) * gamma12c * o.n_c;
        m(kColdLevel, kGround1) = r * o.n_h;
        m(kColdLevel, kGround2) = r * o.n_h;
        m(kColdLevel, kCoherence) = 2.0 * gamma12h * o.n_h;
        break;
    }

    return TwistedGenerator(m);
}

} // namespace cohlab
