// trajectory_oracle.hpp — Gillespie simulation of the incoherent engine with net photon counting

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "cohlab/engine_model.hpp"
#include "cohlab/errors.hpp"
#include "cohlab/random.hpp"

namespace cohlab {

inline constexpr int kPopulations = 4;

struct CountedEdge {
    int from;
    int to;
    int weight;
};

// Classical four-state jump process. rates(i, j) is the rate of j -> i; the
// diagonal is ignored.
class JumpProcess {
public:
    JumpProcess(const Eigen::Matrix4d& rates, std::vector<CountedEdge> counted)
        : rates_(rates), counted_(std::move(counted)) {
        for (int i = 0; i < kPopulations; ++i) {
            rates_(i, i) = 0.0;
            for (int j = 0; j < kPopulations; ++j)
                if (!(rates_(i, j) >= 0.0) || !std::isfinite(rates_(i, j)))
                    throw DomainError("JumpProcess: rates must be finite and non-negative");
        }
        for (const auto& e : counted_)
            if (e.from < 0 || e.from >= kPopulations || e.to < 0 || e.to >= kPopulations ||
                e.from == e.to)
                throw DomainError("JumpProcess: counted edge out of range");
    }

    // Population block of L(0) at p_c = p_h = 0; emission |a> -> |b> counts +1,
    // absorption |b> -> |a> counts -1.
    static JumpProcess from_params(const EngineParams& params) {
        const TwistedGenerator gen = build_generator(params.without_coherence());
        const Eigen::Matrix4d rates = gen.l0().topLeftCorner<kPopulations, kPopulations>();
        return JumpProcess(rates, {{kHotLevel, kColdLevel, +1}, {kColdLevel, kHotLevel, -1}});
    }

    const Eigen::Matrix4d& rates() const noexcept { return rates_; }
    const std::vector<CountedEdge>& counted() const noexcept { return counted_; }

    // Full generator with diagonal -escape; columns sum to zero.
    Eigen::Matrix4d generator() const {
        Eigen::Matrix4d m = rates_;
        for (int j = 0; j < kPopulations; ++j) m(j, j) = -rates_.col(j).sum();
        return m;
    }

    double escape_rate(int state) const { return rates_.col(state).sum(); }

    int weight(int from, int to) const {
        int w = 0;
        for (const auto& e : counted_)
            if (e.from == from && e.to == to) w += e.weight;
        return w;
    }

private:
    Eigen::Matrix4d rates_;
    std::vector<CountedEdge> counted_;
};

struct TrajectoryStats {
    double t_final = 0.0;
    std::size_t n_traj = 0;
    double mean_rate = 0.0;
    double mean_rate_se = 0.0;
    double var_rate = 0.0;
    double var_rate_se = 0.0;
    std::uint64_t seed = 0;
};

/// 10^4 times the slowest mean waiting time among the nonzero rates.
inline double default_t_final(const JumpProcess& proc) {
    double min_rate = std::numeric_limits<double>::infinity();
    for (int i = 0; i < kPopulations; ++i)
        for (int j = 0; j < kPopulations; ++j)
            if (i != j && proc.rates()(i, j) > 0.0) min_rate = std::min(min_rate, proc.rates()(i, j));
    if (!std::isfinite(min_rate)) throw AbsorbingStateError("default_t_final: no transitions");
    return 1e4 / min_rate;
}

struct SimulationOptions {
    int start_state = 0;
    // Uncounted warm-up, as a fraction of t_final.
    double burn_in_fraction = 0.05;
};

namespace detail {

struct JumpTable {
    std::array<double, kPopulations> escape{};
    // Per source state: cumulative target probabilities and count weights.
    std::array<std::array<double, kPopulations>, kPopulations> cumulative{};
    std::array<std::array<int, kPopulations>, kPopulations> target{};
    std::array<std::array<int, kPopulations>, kPopulations> weight{};
    std::array<int, kPopulations> fanout{};
};

inline JumpTable make_jump_table(const JumpProcess& proc) {
    JumpTable t;
    for (int s = 0; s < kPopulations; ++s) {
        t.escape[s] = proc.escape_rate(s);
        double acc = 0.0;
        int n = 0;
        for (int d = 0; d < kPopulations; ++d) {
            const double rate = proc.rates()(d, s);
            if (d == s || rate <= 0.0) continue;
            acc += rate;
            t.cumulative[s][n] = acc / t.escape[s];
            t.target[s][n] = d;
            t.weight[s][n] = proc.weight(s, d);
            ++n;
        }
        t.fanout[s] = n;
        if (n > 0) t.cumulative[s][n - 1] = 1.0;
    }
    return t;
}

inline void check_reachable_escapes(const JumpProcess& proc, int start) {
    std::array<bool, kPopulations> seen{};
    std::vector<int> stack{start};
    seen[start] = true;
    while (!stack.empty()) {
        const int s = stack.back();
        stack.pop_back();
        if (!(proc.escape_rate(s) > 0.0))
            throw AbsorbingStateError("simulate: reachable state " + std::to_string(s) +
                                      " has zero escape rate");
        for (int d = 0; d < kPopulations; ++d)
            if (d != s && proc.rates()(d, s) > 0.0 && !seen[d]) {
                seen[d] = true;
                stack.push_back(d);
            }
    }
}

// Net counted jumps in [0, t_final] after warm-up.
inline double run_trajectory(const JumpTable& table, int start, double burn_in, double t_final,
                             Rng& rng) {
    int state = start;
    double t = -burn_in;
    long long count = 0;
    while (true) {
        t += -std::log(rng.uniform()) / table.escape[state];
        if (t > t_final) break;
        const double u = rng.uniform();
        const auto& cum = table.cumulative[state];
        int k = 0;
        while (k + 1 < table.fanout[state] && u > cum[k]) ++k;
        if (t >= 0.0) count += table.weight[state][k];
        state = table.target[state][k];
    }
    return static_cast<double>(count);
}

} // namespace detail

/// Time-normalized mean and variance of the net count over independent
/// trajectories, with jackknife standard errors. Trajectory i draws from
/// Rng(seed, stream::trajectory, i).
inline TrajectoryStats simulate(const JumpProcess& proc, double t_final, std::size_t n_traj,
                                std::uint64_t seed, const SimulationOptions& opts = {}) {
    if (!(t_final > 0.0) || !std::isfinite(t_final))
        throw DomainError("simulate: t_final must be positive");
    if (n_traj < 2) throw DomainError("simulate: n_traj must be >= 2");
    if (opts.start_state < 0 || opts.start_state >= kPopulations)
        throw DomainError("simulate: start_state out of range");
    detail::check_reachable_escapes(proc, opts.start_state);

    const detail::JumpTable table = detail::make_jump_table(proc);
    const double burn_in = opts.burn_in_fraction * t_final;

    std::vector<double> counts(n_traj);
    for (std::size_t i = 0; i < n_traj; ++i) {
        Rng rng(seed, stream::trajectory, i);
        counts[i] = detail::run_trajectory(table, opts.start_state, burn_in, t_final, rng);
    }

    const auto n = static_cast<double>(n_traj);
    double s1 = 0.0, s2 = 0.0;
    for (double c : counts) s1 += c;
    const double mean = s1 / n;
    for (double c : counts) s2 += (c - mean) * (c - mean);
    const double var = s2 / (n - 1.0);

    TrajectoryStats out;
    out.t_final = t_final;
    out.n_traj = n_traj;
    out.seed = seed;
    out.mean_rate = mean / t_final;
    out.mean_rate_se = std::sqrt(var / n) / t_final;
    out.var_rate = var / t_final;

    if (n_traj >= 3) {
        // Leave-one-out variances from centered sums.
        std::vector<double> loo(n_traj);
        double loo_mean = 0.0;
        for (std::size_t i = 0; i < n_traj; ++i) {
            const double d = counts[i] - mean;
            const double s2_i = s2 - d * d * n / (n - 1.0);
            loo[i] = s2_i / (n - 2.0);
            loo_mean += loo[i];
        }
        loo_mean /= n;
        double acc = 0.0;
        for (double v : loo) acc += (v - loo_mean) * (v - loo_mean);
        out.var_rate_se = std::sqrt((n - 1.0) / n * acc) / t_final;
    } else {
        out.var_rate_se = var * std::sqrt(2.0 / (n - 1.0)) / t_final;
    }
    return out;
}

} // namespace cohlab
