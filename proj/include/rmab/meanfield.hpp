#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rmab/core.hpp"
#include "rmab/lp.hpp"
#include "rmab/rng.hpp"

namespace rmab {

/// Raised when the fluid LP fails on a valid instance. A valid instance always
/// admits the all-zero-cost plan, so infeasibility signals a builder bug.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Optimal fluid trajectory for steps [t0, T): occupancies, allocations, and
/// the LP objective value (discount weights anchored at absolute time).
struct FluidPlan {
    int start_time = 0;
    double objective = 0.0;
    std::vector<FluidState> mu;      // mu[tau - t0]
    std::vector<FluidAction> alpha;  // alpha[tau - t0]
    double flow_residual = 0.0;      // max L1 violation of the flow equations
    double max_fractionality = 0.0;  // distance of alpha entries from integers
    long lp_pivots = 0;

    const FluidState& mu_at(int t) const { return mu[t - start_time]; }
    const FluidAction& alpha_at(int t) const { return alpha[t - start_time]; }
};

namespace mfdetail {

inline std::string var_mu(int t, int i, int s) {
    return "mu[" + std::to_string(t) + "][" + std::to_string(i) + "][" + std::to_string(s) + "]";
}
inline std::string var_alpha(int t, int i, int s, int a) {
    return "alpha[" + std::to_string(t) + "][" + std::to_string(i) + "][" + std::to_string(s) +
           "][" + std::to_string(a) + "]";
}

}  // namespace mfdetail

/// Builds the fluid relaxation LP for steps [t0, T): occupancy and allocation
/// variables at every step, initial-state equalities, flow dynamics, a budget
/// row per step, allocation-consistency rows, and non-negativity.
/// The objective keeps discount^t weights at absolute time t so that values of
/// sub-LPs solved mid-run telescope against the full-horizon value.
template <typename StartT>
LinearProgram build_meanfield_lp(const RmabInstance& inst, const StartT& start, int t0) {
    if (t0 < 0 || t0 >= inst.horizon) throw std::invalid_argument("t0 outside [0, horizon)");
    if (start.num_clusters != inst.num_clusters || start.num_states != inst.num_states)
        throw std::invalid_argument("start state shape does not match instance");

    const int K = inst.num_clusters, S = inst.num_states, A = inst.num_actions, T = inst.horizon;
    LinearProgram lp;

    std::vector<int> mu_idx(static_cast<std::size_t>(T - t0) * K * S);
    std::vector<int> al_idx(static_cast<std::size_t>(T - t0) * K * S * A);
    auto mu_of = [&](int t, int i, int s) -> int& {
        return mu_idx[(static_cast<std::size_t>(t - t0) * K + i) * S + s];
    };
    auto al_of = [&](int t, int i, int s, int a) -> int& {
        return al_idx[((static_cast<std::size_t>(t - t0) * K + i) * S + s) * A + a];
    };

    for (int t = t0; t < T; ++t) {
        double w = std::pow(inst.discount, t);
        for (int i = 0; i < K; ++i)
            for (int s = 0; s < S; ++s) {
                mu_of(t, i, s) = lp.add_var(mfdetail::var_mu(t, i, s), 0.0);
                for (int a = 0; a < A; ++a)
                    al_of(t, i, s, a) =
                        lp.add_var(mfdetail::var_alpha(t, i, s, a), w * inst.reward(t, i, s, a));
            }
    }

    // Initial state.
    for (int i = 0; i < K; ++i)
        for (int s = 0; s < S; ++s) {
            LinearRow row;
            row.name = "init[" + std::to_string(i) + "][" + std::to_string(s) + "]";
            row.relation = Relation::Eq;
            row.coeffs.push_back({mu_of(t0, i, s), 1.0});
            row.rhs = static_cast<double>(start.at(i, s));
            lp.add_row(std::move(row));
        }
    // Flow dynamics.
    for (int t = t0; t + 1 < T; ++t)
        for (int i = 0; i < K; ++i)
            for (int s2 = 0; s2 < S; ++s2) {
                LinearRow row;
                row.name = "flow[" + std::to_string(t + 1) + "][" + std::to_string(i) + "][" +
                           std::to_string(s2) + "]";
                row.relation = Relation::Eq;
                row.coeffs.push_back({mu_of(t + 1, i, s2), 1.0});
                for (int s = 0; s < S; ++s)
                    for (int a = 0; a < A; ++a) {
                        double p = inst.transition(t, i, a, s, s2);
                        if (p != 0.0) row.coeffs.push_back({al_of(t, i, s, a), -p});
                    }
                row.rhs = 0.0;
                lp.add_row(std::move(row));
            }
    // Budget per step.
    for (int t = t0; t < T; ++t) {
        LinearRow row;
        row.name = "budget[" + std::to_string(t) + "]";
        row.relation = Relation::LessEq;
        for (int i = 0; i < K; ++i)
            for (int s = 0; s < S; ++s)
                for (int a = 0; a < A; ++a) {
                    double c = inst.cost(t, i, s, a);
                    if (c != 0.0) row.coeffs.push_back({al_of(t, i, s, a), c});
                }
        row.rhs = inst.budget(t);
        lp.add_row(std::move(row));
    }
    // Allocation consistency: sum_a alpha = mu.
    for (int t = t0; t < T; ++t)
        for (int i = 0; i < K; ++i)
            for (int s = 0; s < S; ++s) {
                LinearRow row;
                row.name = "consistency[" + std::to_string(t) + "][" + std::to_string(i) + "][" +
                           std::to_string(s) + "]";
                row.relation = Relation::Eq;
                for (int a = 0; a < A; ++a) row.coeffs.push_back({al_of(t, i, s, a), 1.0});
                row.coeffs.push_back({mu_of(t, i, s), -1.0});
                row.rhs = 0.0;
                lp.add_row(std::move(row));
            }
    return lp;
}

/// Solves the fluid LP from `start` at time t0 and unpacks the trajectory.
/// Returns the optimal objective value together with the plan.
template <typename StartT>
std::pair<double, FluidPlan> mean_field_value(const RmabInstance& inst, const StartT& start,
                                              int t0) {
    LinearProgram lp = build_meanfield_lp(inst, start, t0);
    LpSolution sol = solve_lp(lp);
    if (sol.status != LpStatus::Optimal)
        throw NumericalError(std::string("fluid LP did not solve to optimality (") +
                             to_string(sol.status) + "); valid instances are always feasible");
    if (sol.primal_residual > kMassConservationTol)
        throw NumericalError("fluid LP solution violates its constraints beyond tolerance");

    const int K = inst.num_clusters, S = inst.num_states, A = inst.num_actions, T = inst.horizon;
    FluidPlan plan;
    plan.start_time = t0;
    plan.objective = sol.objective;
    plan.lp_pivots = sol.pivots;
    int idx = 0;
    for (int t = t0; t < T; ++t) {
        FluidState mu(K, S);
        FluidAction alpha(K, S, A);
        for (int i = 0; i < K; ++i)
            for (int s = 0; s < S; ++s) {
                mu.at(i, s) = sol.x[idx++];
                for (int a = 0; a < A; ++a) {
                    double v = sol.x[idx++];
                    alpha.at(i, s, a) = v;
                    plan.max_fractionality =
                        std::max(plan.max_fractionality, std::abs(v - std::round(v)));
                }
            }
        plan.mu.push_back(std::move(mu));
        plan.alpha.push_back(std::move(alpha));
    }
    // Flow-consistency audit of the unpacked plan.
    for (int t = t0; t + 1 < T; ++t) {
        for (int i = 0; i < K; ++i) {
            for (int s2 = 0; s2 < S; ++s2) {
                double flow = 0;
                for (int s = 0; s < S; ++s)
                    for (int a = 0; a < A; ++a)
                        flow += plan.alpha_at(t).at(i, s, a) * inst.transition(t, i, a, s, s2);
                plan.flow_residual =
                    std::max(plan.flow_residual, std::abs(plan.mu_at(t + 1).at(i, s2) - flow));
            }
        }
    }
    if (plan.flow_residual > kMassConservationTol)
        throw NumericalError("fluid plan violates flow conservation beyond tolerance");
    return {sol.objective, std::move(plan)};
}

/// Rounds a non-negative vector with integral sum m to an integer vector with
/// the same sum; every entry moves to its floor or ceiling (L-inf gap <= 1).
inline std::vector<std::int64_t> round_counts(const std::vector<double>& x, std::int64_t m) {
    double sum = 0;
    for (double v : x) {
        if (v < -1e-12) throw std::invalid_argument("round_counts: negative entry");
        sum += v;
    }
    if (std::abs(sum - static_cast<double>(m)) > 1e-7)
        throw std::invalid_argument("round_counts: entries do not sum to the target integer");

    std::vector<std::int64_t> z(x.size());
    std::vector<std::pair<double, std::size_t>> frac;
    std::int64_t base_total = 0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        double f = std::floor(x[j] + 1e-12);
        z[j] = static_cast<std::int64_t>(f);
        base_total += z[j];
        frac.push_back({x[j] - f, j});
    }
    std::int64_t leftover = m - base_total;
    // Largest remainders get the leftover units; ties break on index.
    std::stable_sort(frac.begin(), frac.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::int64_t k = 0; k < leftover; ++k) z[frac[static_cast<std::size_t>(k)].second] += 1;
    return z;
}

/// Systematic sampling: picks exactly k = sum(x) indices with marginal
/// inclusion probabilities x_i, using the single uniform draw u in [0,1).
/// Index i is selected iff (l - u) lands in [sum_{j<i} x_j, sum_{j<=i} x_j)
/// for some integer l in 1..k.
inline std::vector<int> bucket_sample(const std::vector<double>& x, double u) {
    double sum = 0;
    for (double v : x) {
        if (v < -1e-12 || v > 1.0 + 1e-12)
            throw std::invalid_argument("bucket_sample: entry outside [0, 1]");
        sum += v;
    }
    auto k = static_cast<std::int64_t>(std::llround(sum));
    if (std::abs(sum - static_cast<double>(k)) > 1e-9)
        throw std::invalid_argument("bucket_sample: entries must sum to an integer");
    std::vector<int> picked;
    if (k <= 0) return picked;
    picked.reserve(static_cast<std::size_t>(k));
    // Index i is selected iff the shifted interval [lo + u, lo + x_i + u)
    // contains an integer; the intervals partition [u, k + u), so exactly k
    // indices are selected. A draw of exactly 0 is the boundary case, taken
    // as the limit from above: the interval becomes (lo, lo + x_i].
    double cum = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] <= 0) {
            continue;
        }
        double lo = cum;
        cum += x[i];
        std::int64_t point;
        bool inside;
        if (u > 0) {
            point = static_cast<std::int64_t>(std::ceil(lo + u));
            inside = static_cast<double>(point) < cum + u;
        } else {
            point = static_cast<std::int64_t>(std::floor(lo)) + 1;
            inside = static_cast<double>(point) <= cum;
        }
        if (inside && point >= 1 && point <= k) picked.push_back(static_cast<int>(i));
    }
    // Accumulated rounding can leave the final interval a hair short of the
    // last integer point; top up from the tail so exactly k are returned.
    for (std::size_t i = x.size(); static_cast<std::int64_t>(picked.size()) < k && i-- > 0;) {
        if (x[i] > 0 &&
            std::find(picked.begin(), picked.end(), static_cast<int>(i)) == picked.end())
            picked.push_back(static_cast<int>(i));
    }
    std::sort(picked.begin(), picked.end());
    return picked;
}

/// Floors the fluid allocation cell-wise and hands every leftover arm the
/// declared zero-cost action, so the integral action never exceeds the budget.
inline ActionCount floor_action(const RmabInstance& inst, int t, const StateCount& mu_hat,
                                const FluidAction& alpha_tilde) {
    const int K = inst.num_clusters, S = inst.num_states, A = inst.num_actions;
    ActionCount out(K, S, A);
    for (int i = 0; i < K; ++i)
        for (int s = 0; s < S; ++s) {
            std::int64_t cell = mu_hat.at(i, s);
            std::int64_t assigned = 0;
            for (int a = 0; a < A; ++a) {
                auto v = static_cast<std::int64_t>(std::floor(alpha_tilde.at(i, s, a) + 1e-9));
                v = std::max<std::int64_t>(0, std::min(v, cell - assigned));
                out.at(i, s, a) = v;
                assigned += v;
            }
            out.at(i, s, inst.zero_action(t, i, s)) += cell - assigned;
        }
    return out;
}

/// Randomized rounding: floors each cell, then bucket-samples the leftover
/// arms so the expected action equals the fluid allocation exactly. The budget
/// holds in expectation; a realized step may overshoot by at most K*|S|*|A|
/// leftover units (flagged by the simulator's budget audit).
inline ActionCount bucket_action(const RmabInstance& inst, int t, const StateCount& mu_hat,
                                 const FluidAction& alpha_tilde, RngStream& rng) {
    const int K = inst.num_clusters, S = inst.num_states, A = inst.num_actions;
    ActionCount out(K, S, A);
    for (int i = 0; i < K; ++i)
        for (int s = 0; s < S; ++s) {
            std::int64_t cell = mu_hat.at(i, s);
            double cell_fluid = 0;
            for (int a = 0; a < A; ++a) cell_fluid += alpha_tilde.at(i, s, a);
            if (std::abs(cell_fluid - static_cast<double>(cell)) > 1e-6)
                throw std::invalid_argument(
                    "bucket_action: fluid allocation does not cover the realized cell");
            std::int64_t assigned = 0;
            std::vector<double> frac(A);
            for (int a = 0; a < A; ++a) {
                auto v = static_cast<std::int64_t>(std::floor(alpha_tilde.at(i, s, a) + 1e-9));
                v = std::max<std::int64_t>(0, std::min(v, cell - assigned));
                out.at(i, s, a) = v;
                assigned += v;
                frac[a] = std::max(0.0, alpha_tilde.at(i, s, a) - static_cast<double>(v));
            }
            std::int64_t leftover = cell - assigned;
            if (leftover == 0) continue;
            double fsum = 0;
            for (double f : frac) fsum += f;
            if (fsum <= 0) {
                out.at(i, s, inst.zero_action(t, i, s)) += leftover;
                continue;
            }
            for (double& f : frac) f = std::min(1.0, f * static_cast<double>(leftover) / fsum);
            // Repair residual drift so the marginals sum to the leftover count.
            double drift = static_cast<double>(leftover);
            for (double f : frac) drift -= f;
            for (int a = 0; a < A && std::abs(drift) > 1e-12; ++a) {
                double room = drift > 0 ? 1.0 - frac[a] : frac[a];
                double add = drift > 0 ? std::min(drift, room) : std::max(drift, -room);
                frac[a] += add;
                drift -= add;
            }
            for (int a : bucket_sample(frac, rng.u01())) out.at(i, s, a) += 1;
        }
    return out;
}

/// Planning horizon substituted for an infinite discounted problem, following
/// the rule that makes the discarded tail dominated by the analysis error:
/// expectation form  T >= 2*sqrt(N)/sqrt(K|S|) + 1, and with failure level
/// delta the form     T >= sqrt(2N)/sqrt(log(2)K|S| + log(1/delta)) + 1.
inline int truncation_horizon(const RmabInstance& inst, std::optional<double> delta = {}) {
    if (inst.discount >= 1.0)
        throw std::invalid_argument(
            "truncation_horizon: undefined for discount 1; supply a finite horizon");
    double n = static_cast<double>(inst.total_arms());
    double ks = static_cast<double>(inst.num_clusters) * inst.num_states;
    double bound;
    if (delta) {
        if (*delta <= 0 || *delta >= 1)
            throw std::invalid_argument("truncation_horizon: delta must be in (0, 1)");
        bound = std::sqrt(2.0 * n) / std::sqrt(std::log(2.0) * ks + std::log(1.0 / *delta)) + 1.0;
    } else {
        bound = 2.0 * std::sqrt(n) / std::sqrt(ks) + 1.0;
    }
    return static_cast<int>(std::ceil(bound));
}

}  // namespace rmab
