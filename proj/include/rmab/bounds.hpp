#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmab/core.hpp"

namespace rmab {

/// One evaluated gap/truncation formula, with the inputs it was fed.
struct BoundReport {
    std::string name;
    std::int64_t total_arms = 0;
    int clusters = 0, states = 0, actions = 0, horizon = 0;
    double discount = 1.0;
    std::optional<double> delta;
    double reward_max = 0.0;
    double value = 0.0;
    std::optional<double> measured;  // quantity the bound dominates, when available
};

/// Finite-horizon optimality gap of the receding-horizon fluid policy:
/// expectation form (T^2 R_max / 4)(sqrt(K|S|N) + 5 K|S||A|); with failure
/// level delta the sqrt term becomes sqrt(2 log(2) K|S|N + 2 N log(T/delta)).
inline BoundReport finite_horizon_gap(const RmabInstance& inst,
                                      std::optional<double> delta = {}) {
    const double n = static_cast<double>(inst.total_arms());
    const double ks = static_cast<double>(inst.num_clusters) * inst.num_states;
    const double ksa = ks * inst.num_actions;
    const double t = inst.horizon;
    const double rmax = inst.reward_max();
    double sqrt_term = delta ? std::sqrt(2.0 * std::log(2.0) * ks * n +
                                         2.0 * n * std::log(t / *delta))
                             : std::sqrt(ks * n);
    BoundReport rep;
    rep.name = delta ? "finite-horizon-gap-hp" : "finite-horizon-gap";
    rep.total_arms = inst.total_arms();
    rep.clusters = inst.num_clusters;
    rep.states = inst.num_states;
    rep.actions = inst.num_actions;
    rep.horizon = inst.horizon;
    rep.discount = inst.discount;
    rep.delta = delta;
    rep.reward_max = rmax;
    rep.value = (t * t * rmax / 4.0) * (sqrt_term + 5.0 * ksa);
    return rep;
}

/// Discounted infinite-horizon gap under the truncation rule:
/// R_max((2-gamma)K|S||A| + gamma * sqrt(K|S|N)) / (2 (1-gamma)^2); the
/// high-probability variant swaps in sqrt(2 log(2) K|S|N + 2 N log(N/delta)).
inline BoundReport discounted_gap(const RmabInstance& inst, std::optional<double> delta = {}) {
    if (inst.discount >= 1.0)
        throw std::invalid_argument("discounted gap requires discount < 1");
    const double n = static_cast<double>(inst.total_arms());
    const double ks = static_cast<double>(inst.num_clusters) * inst.num_states;
    const double ksa = ks * inst.num_actions;
    const double g = inst.discount;
    const double rmax = inst.reward_max();
    double sqrt_term = delta ? std::sqrt(2.0 * std::log(2.0) * ks * n +
                                         2.0 * n * std::log(n / *delta))
                             : std::sqrt(ks * n);
    BoundReport rep;
    rep.name = delta ? "discounted-gap-hp" : "discounted-gap";
    rep.total_arms = inst.total_arms();
    rep.clusters = inst.num_clusters;
    rep.states = inst.num_states;
    rep.actions = inst.num_actions;
    rep.horizon = inst.horizon;
    rep.discount = g;
    rep.delta = delta;
    rep.reward_max = rmax;
    rep.value = rmax * ((2.0 - g) * ksa + g * sqrt_term) / (2.0 * (1.0 - g) * (1.0 - g));
    return rep;
}

/// Lower bound on the fluid planner's loss on the noisy-funnel instance:
/// (T - 3) sqrt(n / (6 pi)) - delta.
inline double lowerbound_gap(std::int64_t n, int horizon, double delta) {
    if (horizon < 4) throw std::invalid_argument("lowerbound gap requires horizon >= 4");
    constexpr double pi = 3.14159265358979323846;
    return (horizon - 3) * std::sqrt(static_cast<double>(n) / (6.0 * pi)) - delta;
}

/// Analytic tail of an infinite-horizon value truncated at T:
/// N R_max gamma^T / (1 - gamma).
inline double truncation_tail(const RmabInstance& inst, int truncated_horizon) {
    if (inst.discount >= 1.0)
        throw std::invalid_argument("truncation tail requires discount < 1");
    return static_cast<double>(inst.total_arms()) * inst.reward_max() *
           std::pow(inst.discount, truncated_horizon) / (1.0 - inst.discount);
}

}  // namespace rmab
