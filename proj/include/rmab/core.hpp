#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace rmab {

// Tolerances shared across the toolkit.
inline constexpr double kRowStochasticTol = 1e-9;
inline constexpr double kMassConservationTol = 1e-7;

/// Counts of arms per (cluster, state). Rows must sum to the cluster size.
struct StateCount {
    int num_clusters = 0;
    int num_states = 0;
    std::vector<std::int64_t> counts;  // [i * num_states + s]

    StateCount() = default;
    StateCount(int clusters, int states)
        : num_clusters(clusters), num_states(states),
          counts(static_cast<std::size_t>(clusters) * states, 0) {}

    std::int64_t& at(int i, int s) { return counts[static_cast<std::size_t>(i) * num_states + s]; }
    std::int64_t at(int i, int s) const { return counts[static_cast<std::size_t>(i) * num_states + s]; }

    std::int64_t cluster_total(int i) const {
        std::int64_t sum = 0;
        for (int s = 0; s < num_states; ++s) sum += at(i, s);
        return sum;
    }
    std::int64_t total() const { return std::accumulate(counts.begin(), counts.end(), std::int64_t{0}); }

    bool operator==(const StateCount&) const = default;
};

/// Counts of actions per (cluster, state, action). For a paired StateCount mu,
/// sum over actions of at(i,s,a) must equal mu.at(i,s).
struct ActionCount {
    int num_clusters = 0;
    int num_states = 0;
    int num_actions = 0;
    std::vector<std::int64_t> counts;  // [(i * num_states + s) * num_actions + a]

    ActionCount() = default;
    ActionCount(int clusters, int states, int actions)
        : num_clusters(clusters), num_states(states), num_actions(actions),
          counts(static_cast<std::size_t>(clusters) * states * actions, 0) {}

    std::int64_t& at(int i, int s, int a) {
        return counts[(static_cast<std::size_t>(i) * num_states + s) * num_actions + a];
    }
    std::int64_t at(int i, int s, int a) const {
        return counts[(static_cast<std::size_t>(i) * num_states + s) * num_actions + a];
    }
    std::int64_t cell_total(int i, int s) const {
        std::int64_t sum = 0;
        for (int a = 0; a < num_actions; ++a) sum += at(i, s, a);
        return sum;
    }

    bool operator==(const ActionCount&) const = default;
};

/// Fractional occupancy per (cluster, state); the fluid analogue of StateCount.
struct FluidState {
    int num_clusters = 0;
    int num_states = 0;
    std::vector<double> values;

    FluidState() = default;
    FluidState(int clusters, int states)
        : num_clusters(clusters), num_states(states),
          values(static_cast<std::size_t>(clusters) * states, 0.0) {}
    explicit FluidState(const StateCount& mu)
        : num_clusters(mu.num_clusters), num_states(mu.num_states),
          values(mu.counts.begin(), mu.counts.end()) {}

    double& at(int i, int s) { return values[static_cast<std::size_t>(i) * num_states + s]; }
    double at(int i, int s) const { return values[static_cast<std::size_t>(i) * num_states + s]; }

    double cluster_total(int i) const {
        double sum = 0;
        for (int s = 0; s < num_states; ++s) sum += at(i, s);
        return sum;
    }
};

/// Fractional action allocation per (cluster, state, action).
struct FluidAction {
    int num_clusters = 0;
    int num_states = 0;
    int num_actions = 0;
    std::vector<double> values;

    FluidAction() = default;
    FluidAction(int clusters, int states, int actions)
        : num_clusters(clusters), num_states(states), num_actions(actions),
          values(static_cast<std::size_t>(clusters) * states * actions, 0.0) {}
    explicit FluidAction(const ActionCount& alpha)
        : num_clusters(alpha.num_clusters), num_states(alpha.num_states),
          num_actions(alpha.num_actions), values(alpha.counts.begin(), alpha.counts.end()) {}

    double& at(int i, int s, int a) {
        return values[(static_cast<std::size_t>(i) * num_states + s) * num_actions + a];
    }
    double at(int i, int s, int a) const {
        return values[(static_cast<std::size_t>(i) * num_states + s) * num_actions + a];
    }
};

/// A clustered restless-bandit planning instance.
///
/// Tensors are stored per time slice; a stationary instance keeps a single
/// slice and all time indices map to it. Time is 0-based: steps run t = 0..T-1
/// and the transition at t moves the system from t to t+1 (so T-1 transition
/// slices when non-stationary). Discount weight for step t is discount^t.
struct RmabInstance {
    int num_clusters = 0;   // K
    int num_states = 0;     // |S|
    int num_actions = 0;    // |A|
    int horizon = 0;        // T
    double discount = 1.0;  // gamma in [0, 1]
    bool stationary = true;

    std::vector<std::int64_t> cluster_sizes;  // N_i, length K

    // transitions[(slice*K + i)*A + a] is an S*S row-major matrix.
    std::vector<double> transitions;
    // rewards/costs[((slice*K + i)*S + s)*A + a]
    std::vector<double> rewards;
    std::vector<double> costs;
    // budgets[slice]
    std::vector<double> budgets;
    // zero_cost_action[(slice*K + i)*S + s]
    std::vector<int> zero_cost_action;

    std::int64_t total_arms() const {
        return std::accumulate(cluster_sizes.begin(), cluster_sizes.end(), std::int64_t{0});
    }

    int transition_slices() const { return stationary ? 1 : std::max(horizon - 1, 1); }
    int stage_slices() const { return stationary ? 1 : horizon; }
    int slice(int t) const { return stationary ? 0 : t; }

    /// P[t][i][a](s, s')
    double transition(int t, int i, int a, int s, int s2) const {
        int sl = stationary ? 0 : std::min(t, transition_slices() - 1);
        std::size_t base = ((static_cast<std::size_t>(sl) * num_clusters + i) * num_actions + a);
        return transitions[(base * num_states + s) * num_states + s2];
    }
    const double* transition_row(int t, int i, int a, int s) const {
        int sl = stationary ? 0 : std::min(t, transition_slices() - 1);
        std::size_t base = ((static_cast<std::size_t>(sl) * num_clusters + i) * num_actions + a);
        return &transitions[(base * num_states + s) * num_states];
    }

    double reward(int t, int i, int s, int a) const {
        std::size_t sl = static_cast<std::size_t>(slice(std::min(t, stage_slices() - 1)));
        return rewards[((sl * num_clusters + i) * num_states + s) * num_actions + a];
    }
    double cost(int t, int i, int s, int a) const {
        std::size_t sl = static_cast<std::size_t>(slice(std::min(t, stage_slices() - 1)));
        return costs[((sl * num_clusters + i) * num_states + s) * num_actions + a];
    }
    double budget(int t) const { return budgets[stationary ? 0 : std::min(t, horizon - 1)]; }
    int zero_action(int t, int i, int s) const {
        std::size_t sl = static_cast<std::size_t>(slice(std::min(t, stage_slices() - 1)));
        return zero_cost_action[(sl * num_clusters + i) * num_states + s];
    }

    double reward_max() const {
        double m = 0;
        for (double r : rewards) m = std::max(m, r);
        return m;
    }
    double cost_max() const {
        double m = 0;
        for (double c : costs) m = std::max(m, c);
        return m;
    }
};

namespace detail {

inline std::string coord(std::initializer_list<std::pair<const char*, long long>> parts) {
    std::ostringstream os;
    bool first = true;
    for (const auto& [k, v] : parts) {
        os << (first ? "" : ", ") << k << "=" << v;
        first = false;
    }
    return os.str();
}

}  // namespace detail

/// Checks every structural invariant of an instance. Returns an empty list iff
/// the instance is valid; each entry names the offending tensor coordinates.
inline std::vector<std::string> validate_instance(const RmabInstance& inst) {
    std::vector<std::string> out;
    auto fail = [&](std::string msg) { out.push_back(std::move(msg)); };

    if (inst.num_clusters <= 0) fail("num_clusters must be positive");
    if (inst.num_states <= 0) fail("num_states must be positive");
    if (inst.num_actions <= 0) fail("num_actions must be positive");
    if (inst.horizon <= 0) fail("horizon must be positive");
    if (inst.discount < 0.0 || inst.discount > 1.0) fail("discount must lie in [0, 1]");
    if (static_cast<int>(inst.cluster_sizes.size()) != inst.num_clusters)
        fail("cluster_sizes length does not match num_clusters");
    for (std::size_t i = 0; i < inst.cluster_sizes.size(); ++i)
        if (inst.cluster_sizes[i] <= 0)
            fail("cluster_sizes[" + std::to_string(i) + "] must be positive");
    if (!out.empty()) return out;  // shape errors make tensor checks meaningless

    const int K = inst.num_clusters, S = inst.num_states, A = inst.num_actions;
    const int tr_slices = inst.transition_slices();
    const int st_slices = inst.stage_slices();
    const std::size_t want_tr = static_cast<std::size_t>(tr_slices) * K * A * S * S;
    const std::size_t want_rc = static_cast<std::size_t>(st_slices) * K * S * A;
    if (inst.transitions.size() != want_tr) {
        fail("transitions tensor has wrong size");
        return out;
    }
    if (inst.rewards.size() != want_rc || inst.costs.size() != want_rc) {
        fail("rewards/costs tensor has wrong size");
        return out;
    }
    if (static_cast<int>(inst.budgets.size()) != (inst.stationary ? 1 : inst.horizon)) {
        fail("budgets list has wrong length");
        return out;
    }
    if (inst.zero_cost_action.size() != static_cast<std::size_t>(st_slices) * K * S) {
        fail("zero_cost_action map has wrong size");
        return out;
    }

    for (int sl = 0; sl < tr_slices; ++sl) {
        for (int i = 0; i < K; ++i) {
            for (int a = 0; a < A; ++a) {
                for (int s = 0; s < S; ++s) {
                    double row_sum = 0;
                    for (int s2 = 0; s2 < S; ++s2) {
                        double p = inst.transition(inst.stationary ? 0 : sl, i, a, s, s2);
                        if (p < -kRowStochasticTol || p > 1.0 + kRowStochasticTol)
                            fail("transition entry outside [0,1] at " +
                                 detail::coord({{"t", sl}, {"i", i}, {"a", a}, {"s", s}, {"s'", s2}}));
                        row_sum += p;
                    }
                    if (std::abs(row_sum - 1.0) > kRowStochasticTol)
                        fail("transition row not stochastic (sum=" + std::to_string(row_sum) +
                             ") at " + detail::coord({{"t", sl}, {"i", i}, {"a", a}, {"s", s}}));
                }
            }
        }
    }
    for (int sl = 0; sl < st_slices; ++sl) {
        for (int i = 0; i < K; ++i) {
            for (int s = 0; s < S; ++s) {
                for (int a = 0; a < A; ++a) {
                    int t = inst.stationary ? 0 : sl;
                    if (inst.reward(t, i, s, a) < 0)
                        fail("negative reward at " +
                             detail::coord({{"t", sl}, {"i", i}, {"s", s}, {"a", a}}));
                    if (inst.cost(t, i, s, a) < 0)
                        fail("negative cost at " +
                             detail::coord({{"t", sl}, {"i", i}, {"s", s}, {"a", a}}));
                }
                int z = inst.zero_action(inst.stationary ? 0 : sl, i, s);
                if (z < 0 || z >= A) {
                    fail("zero_cost_action out of range at " +
                         detail::coord({{"t", sl}, {"i", i}, {"s", s}}));
                } else if (inst.cost(inst.stationary ? 0 : sl, i, s, z) != 0.0) {
                    fail("declared zero-cost action has nonzero cost at " +
                         detail::coord({{"t", sl}, {"i", i}, {"s", s}, {"a", z}}));
                }
            }
        }
    }
    for (std::size_t t = 0; t < inst.budgets.size(); ++t)
        if (inst.budgets[t] < 0) fail("negative budget at t=" + std::to_string(t));
    return out;
}

inline void check_state_shape(const RmabInstance& inst, const StateCount& mu) {
    if (mu.num_clusters != inst.num_clusters || mu.num_states != inst.num_states)
        throw std::invalid_argument("state count shape does not match instance");
}

inline void check_action_shape(const RmabInstance& inst, int num_clusters, int num_states,
                               int num_actions) {
    if (num_clusters != inst.num_clusters || num_states != inst.num_states ||
        num_actions != inst.num_actions)
        throw std::invalid_argument("action count shape does not match instance");
}

/// Total reward of playing allocation alpha at step t: sum R[t][i][s][a] * alpha[i][s][a].
template <typename AlphaT>
double step_reward(const RmabInstance& inst, int t, const AlphaT& alpha) {
    check_action_shape(inst, alpha.num_clusters, alpha.num_states, alpha.num_actions);
    double sum = 0;
    for (int i = 0; i < inst.num_clusters; ++i)
        for (int s = 0; s < inst.num_states; ++s)
            for (int a = 0; a < inst.num_actions; ++a)
                sum += inst.reward(t, i, s, a) * static_cast<double>(alpha.at(i, s, a));
    return sum;
}

/// Total cost of playing allocation alpha at step t.
template <typename AlphaT>
double step_cost(const RmabInstance& inst, int t, const AlphaT& alpha) {
    check_action_shape(inst, alpha.num_clusters, alpha.num_states, alpha.num_actions);
    double sum = 0;
    for (int i = 0; i < inst.num_clusters; ++i)
        for (int s = 0; s < inst.num_states; ++s)
            for (int a = 0; a < inst.num_actions; ++a)
                sum += inst.cost(t, i, s, a) * static_cast<double>(alpha.at(i, s, a));
    return sum;
}

inline double l1_distance(const FluidState& a, const FluidState& b) {
    double d = 0;
    for (std::size_t j = 0; j < a.values.size(); ++j) d += std::abs(a.values[j] - b.values[j]);
    return d;
}

inline double l1_distance(const StateCount& a, const FluidState& b) {
    double d = 0;
    for (std::size_t j = 0; j < b.values.size(); ++j)
        d += std::abs(static_cast<double>(a.counts[j]) - b.values[j]);
    return d;
}

}  // namespace rmab
