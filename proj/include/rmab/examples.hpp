#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "rmab/core.hpp"
#include "rmab/rng.hpp"

namespace rmab {

struct GeneratedInstance {
    RmabInstance instance;
    StateCount start;
};

namespace gen {

/// Builder for stationary instances (one slice of every tensor).
class StationaryBuilder {
   public:
    StationaryBuilder(int clusters, int states, int actions, int horizon, double discount)
        : K_(clusters), S_(states), A_(actions) {
        inst_.num_clusters = clusters;
        inst_.num_states = states;
        inst_.num_actions = actions;
        inst_.horizon = horizon;
        inst_.discount = discount;
        inst_.stationary = true;
        inst_.cluster_sizes.assign(clusters, 1);
        inst_.transitions.assign(static_cast<std::size_t>(clusters) * actions * states * states,
                                 0.0);
        inst_.rewards.assign(static_cast<std::size_t>(clusters) * states * actions, 0.0);
        inst_.costs.assign(static_cast<std::size_t>(clusters) * states * actions, 0.0);
        inst_.budgets.assign(1, 0.0);
        inst_.zero_cost_action.assign(static_cast<std::size_t>(clusters) * states, 0);
    }

    StationaryBuilder& cluster_size(int i, std::int64_t n) {
        inst_.cluster_sizes[i] = n;
        return *this;
    }
    StationaryBuilder& budget(double b) {
        inst_.budgets[0] = b;
        return *this;
    }
    StationaryBuilder& p(int i, int a, int s, int s2, double prob) {
        inst_.transitions[((static_cast<std::size_t>(i) * A_ + a) * S_ + s) * S_ + s2] = prob;
        return *this;
    }
    StationaryBuilder& reward(int i, int s, int a, double r) {
        inst_.rewards[(static_cast<std::size_t>(i) * S_ + s) * A_ + a] = r;
        return *this;
    }
    /// Reward earned in a state regardless of the action taken there.
    StationaryBuilder& state_reward(int i, int s, double r) {
        for (int a = 0; a < A_; ++a) reward(i, s, a, r);
        return *this;
    }
    StationaryBuilder& cost(int i, int s, int a, double c) {
        inst_.costs[(static_cast<std::size_t>(i) * S_ + s) * A_ + a] = c;
        return *this;
    }
    /// Unit cost on action 1 in every state (the convention of all examples).
    StationaryBuilder& unit_active_costs() {
        for (int i = 0; i < K_; ++i)
            for (int s = 0; s < S_; ++s) cost(i, s, 1, 1.0);
        return *this;
    }

    RmabInstance build() && { return std::move(inst_); }

   private:
    int K_, S_, A_;
    RmabInstance inst_;
};

}  // namespace gen

// State labels shared by the two-type constructions.
//   Example 1 (per cluster):  0 = start, 1 = engaged, 2 = dropout
//   Examples 2/3 (merged MDP): 0 = reliable-start, 1 = reliable-engaged,
//                              2 = greedy-start, 3 = greedy-engaged, 4 = dropout
//                              (5 = dummy start when enabled)
namespace ex1 {
inline constexpr int kStart = 0, kEngaged = 1, kDropout = 2;
inline constexpr int kReliable = 0, kGreedy = 1;
}  // namespace ex1
namespace ex2 {
inline constexpr int kReliableStart = 0, kReliableEngaged = 1, kGreedyStart = 2,
                     kGreedyEngaged = 3, kDropout = 4, kDummy = 5;
}  // namespace ex2

/// Two clusters (reliable, greedy), three states, two actions. The reliable
/// arm stays engaged while played; the greedy arm engages once and drops out
/// regardless; the passive action always drops. n arms of each type start in
/// their start states, budget n per step.
inline GeneratedInstance example1(std::int64_t n, double epsilon, double gamma, int horizon = 50) {
    if (n < 1) throw std::invalid_argument("example1: n must be >= 1");
    if (epsilon <= 0 || epsilon >= 1) throw std::invalid_argument("example1: need 0 < epsilon < 1");
    if (gamma <= 0 || gamma >= 1) throw std::invalid_argument("example1: need 0 < gamma < 1");
    using namespace ex1;
    gen::StationaryBuilder b(2, 3, 2, horizon, gamma);
    b.cluster_size(kReliable, n).cluster_size(kGreedy, n).budget(static_cast<double>(n));
    for (int i : {kReliable, kGreedy})
        for (int s : {kStart, kEngaged, kDropout}) b.p(i, 0, s, kDropout, 1.0);
    b.p(kReliable, 1, kStart, kEngaged, 1.0);
    b.p(kReliable, 1, kEngaged, kEngaged, 1.0);
    b.p(kReliable, 1, kDropout, kDropout, 1.0);
    b.p(kGreedy, 1, kStart, kEngaged, 1.0);
    b.p(kGreedy, 1, kEngaged, kDropout, 1.0);
    b.p(kGreedy, 1, kDropout, kDropout, 1.0);
    b.state_reward(kReliable, kEngaged, 1.0 - epsilon);
    b.state_reward(kGreedy, kEngaged, 1.0);
    b.unit_active_costs();
    GeneratedInstance out{std::move(b).build(), StateCount(2, 3)};
    out.start.at(kReliable, kStart) = n;
    out.start.at(kGreedy, kStart) = n;
    return out;
}

/// Example 1 merged into one homogeneous five-state MDP. Enabling the dummy
/// start adds a sixth state that moves to reliable-start or greedy-start with
/// probability 0.5 each regardless of the action, and all arms start there.
inline GeneratedInstance example2(std::int64_t n, double epsilon, double gamma, int horizon = 50,
                                  bool dummy_start = false) {
    if (n < 1) throw std::invalid_argument("example2: n must be >= 1");
    if (epsilon <= 0 || epsilon >= 1) throw std::invalid_argument("example2: need 0 < epsilon < 1");
    if (gamma <= 0 || gamma >= 1) throw std::invalid_argument("example2: need 0 < gamma < 1");
    using namespace ex2;
    const int S = dummy_start ? 6 : 5;
    gen::StationaryBuilder b(1, S, 2, horizon, gamma);
    b.cluster_size(0, 2 * n).budget(static_cast<double>(n));
    for (int s = 0; s < 5; ++s) b.p(0, 0, s, kDropout, 1.0);
    b.p(0, 1, kReliableStart, kReliableEngaged, 1.0);
    b.p(0, 1, kReliableEngaged, kReliableEngaged, 1.0);
    b.p(0, 1, kGreedyStart, kGreedyEngaged, 1.0);
    b.p(0, 1, kGreedyEngaged, kDropout, 1.0);
    b.p(0, 1, kDropout, kDropout, 1.0);
    if (dummy_start)
        for (int a : {0, 1})
            b.p(0, a, kDummy, kReliableStart, 0.5).p(0, a, kDummy, kGreedyStart, 0.5);
    b.state_reward(0, kReliableEngaged, 1.0 - epsilon);
    b.state_reward(0, kGreedyEngaged, 1.0);
    b.unit_active_costs();
    GeneratedInstance out{std::move(b).build(), StateCount(1, S)};
    if (dummy_start) {
        out.start.at(0, kDummy) = 2 * n;
    } else {
        out.start.at(0, kReliableStart) = n;
        out.start.at(0, kGreedyStart) = n;
    }
    return out;
}

/// Example 2 with ergodicity knobs so the chain is irreducible under every
/// policy: passive start states reach the engaged states with probability
/// eta_s, the active action leaks reliable-engaged to dropout with probability
/// eta_r, and dropout returns to either start state with probability eta_d.
inline GeneratedInstance example3(double eta_s = 0.05, double eta_r = 0.1, double eta_d = 0.1,
                                  double epsilon = 0.01, std::int64_t n = 100, double gamma = 0.95,
                                  int horizon = 50) {
    if (eta_s <= 0 || eta_s > 1 || eta_r <= 0 || eta_r > 1 || eta_d <= 0 || 2 * eta_d > 1)
        throw std::invalid_argument("example3: ergodicity parameters leave [0, 1]");
    if (epsilon <= 0 || epsilon >= 1) throw std::invalid_argument("example3: need 0 < epsilon < 1");
    using namespace ex2;
    gen::StationaryBuilder b(1, 5, 2, horizon, gamma);
    b.cluster_size(0, 2 * n).budget(static_cast<double>(n));
    // Passive rows.
    b.p(0, 0, kReliableStart, kReliableEngaged, eta_s);
    b.p(0, 0, kReliableStart, kDropout, 1.0 - eta_s);
    b.p(0, 0, kGreedyStart, kGreedyEngaged, eta_s);
    b.p(0, 0, kGreedyStart, kDropout, 1.0 - eta_s);
    b.p(0, 0, kReliableEngaged, kDropout, 1.0);
    b.p(0, 0, kGreedyEngaged, kDropout, 1.0);
    // Active rows.
    b.p(0, 1, kReliableStart, kReliableEngaged, 1.0);
    b.p(0, 1, kGreedyStart, kGreedyEngaged, 1.0);
    b.p(0, 1, kReliableEngaged, kDropout, eta_r);
    b.p(0, 1, kReliableEngaged, kReliableEngaged, 1.0 - eta_r);
    b.p(0, 1, kGreedyEngaged, kDropout, 1.0);
    // Dropout recovers under either action.
    for (int a : {0, 1}) {
        b.p(0, a, kDropout, kReliableStart, eta_d);
        b.p(0, a, kDropout, kGreedyStart, eta_d);
        b.p(0, a, kDropout, kDropout, 1.0 - 2 * eta_d);
    }
    b.state_reward(0, kReliableEngaged, 1.0 - epsilon);
    b.state_reward(0, kGreedyEngaged, 1.0);
    b.unit_active_costs();
    GeneratedInstance out{std::move(b).build(), StateCount(1, 5)};
    out.start.at(0, kReliableStart) = n;
    out.start.at(0, kGreedyStart) = n;
    return out;
}

/// Priority order of the comparison policy from the mixing-time study:
/// reliable-engaged > reliable-start > greedy-start > dropout > greedy-engaged.
inline std::vector<double> example3_alternate_priority() {
    using namespace ex2;
    std::vector<double> prio(5, 0.0);
    prio[kReliableEngaged] = 5;
    prio[kReliableStart] = 4;
    prio[kGreedyStart] = 3;
    prio[kDropout] = 2;
    prio[kGreedyEngaged] = 1;
    return prio;
}

/// Eight-state single-cluster instance on which the fluid planner provably
/// loses Theta(T sqrt(N)) reward: a noisy funnel (states 1..6) the planner
/// overestimates, against a safe chain (states 7..8) paying 1 - eps with
/// eps = (2 + delta/n)/(T - 1). States are numbered to match the construction
/// (0-based: s1..s8 become 0..7). 2n arms start in s1, n arms in s7; budget n.
inline GeneratedInstance lowerbound_example(std::int64_t n, int horizon, double delta) {
    if (horizon < 4) throw std::invalid_argument("lowerbound_example: horizon must be >= 4");
    if (delta <= 0) throw std::invalid_argument("lowerbound_example: delta must be positive");
    double epsilon = (2.0 + delta / static_cast<double>(n)) / (horizon - 1.0);
    if (epsilon >= 1) throw std::invalid_argument("lowerbound_example: horizon too short for n");
    // 0-based states: s1=0, s2=1, s3=2, s4=3, s5=4 (dead), s6=5, s7=6, s8=7.
    gen::StationaryBuilder b(1, 8, 2, horizon, 1.0);
    b.cluster_size(0, 3 * n).budget(static_cast<double>(n));
    auto dead_row = [&](int a, int s) { b.p(0, a, s, 4, 1.0); };
    // s1: active -> s2, passive -> s3.
    b.p(0, 1, 0, 1, 1.0);
    b.p(0, 0, 0, 2, 1.0);
    // s2: passive -> coin over {s4, s5}; active not shown -> dead.
    b.p(0, 0, 1, 3, 0.5);
    b.p(0, 0, 1, 4, 0.5);
    dead_row(1, 1);
    // s3: active -> coin over {s4, s5}; passive -> dead.
    b.p(0, 1, 2, 3, 0.5);
    b.p(0, 1, 2, 4, 0.5);
    dead_row(0, 2);
    // s4: active -> s6; passive -> dead.
    b.p(0, 1, 3, 5, 1.0);
    dead_row(0, 3);
    // s5: absorbing dead state.
    dead_row(0, 4);
    dead_row(1, 4);
    // s6: active holds, passive -> dead; pays 1.
    b.p(0, 1, 5, 5, 1.0);
    dead_row(0, 5);
    // s7: active -> s8; passive -> dead.
    b.p(0, 1, 6, 7, 1.0);
    dead_row(0, 6);
    // s8: active holds, passive -> dead; pays 1 - eps.
    b.p(0, 1, 7, 7, 1.0);
    dead_row(0, 7);
    b.state_reward(0, 5, 1.0);
    b.state_reward(0, 7, 1.0 - epsilon);
    b.unit_active_costs();
    GeneratedInstance out{std::move(b).build(), StateCount(1, 8)};
    out.start.at(0, 0) = 2 * n;
    out.start.at(0, 6) = n;
    return out;
}

/// Priority order that sends the whole budget down the safe chain.
inline std::vector<double> lowerbound_safe_priority() {
    std::vector<double> prio(8, 0.0);
    prio[7] = 2;  // s8
    prio[6] = 1;  // s7
    return prio;
}

/// Seeded random clustered instance: Dirichlet-style row-stochastic
/// transitions, rewards in [0, 1], zero-cost passive action, unit active
/// costs, budget 10% of N.
inline GeneratedInstance synthetic_clustered(int num_clusters, int num_states, int num_actions,
                                             std::int64_t total_arms, int horizon,
                                             std::uint64_t seed, double discount = 1.0) {
    if (num_clusters < 1 || num_states < 1 || num_actions < 1 || total_arms < 1 || horizon < 1)
        throw std::invalid_argument("synthetic_clustered: dimensions must be positive");
    gen::StationaryBuilder b(num_clusters, num_states, num_actions, horizon, discount);
    std::int64_t base = total_arms / num_clusters;
    std::int64_t extra = total_arms % num_clusters;
    for (int i = 0; i < num_clusters; ++i) b.cluster_size(i, base + (i < extra ? 1 : 0));
    b.budget(std::max(1.0, std::floor(0.1 * static_cast<double>(total_arms))));
    RngStream rng(RngStream::key_of({seed, 0x5EED}));
    for (int i = 0; i < num_clusters; ++i) {
        for (int a = 0; a < num_actions; ++a)
            for (int s = 0; s < num_states; ++s) {
                // Exponential spacings normalize to a Dirichlet(1,...,1) row.
                std::vector<double> row(num_states);
                double sum = 0;
                for (int s2 = 0; s2 < num_states; ++s2) {
                    row[s2] = -std::log(1.0 - rng.u01());
                    sum += row[s2];
                }
                double acc = 0;
                for (int s2 = 0; s2 < num_states; ++s2) {
                    double p = (s2 + 1 == num_states) ? std::max(0.0, 1.0 - acc) : row[s2] / sum;
                    acc += p;
                    b.p(i, a, s, s2, p);
                }
            }
        for (int s = 0; s < num_states; ++s)
            for (int a = 0; a < num_actions; ++a) {
                b.reward(i, s, a, rng.u01());
                if (a > 0) b.cost(i, s, a, 1.0);
            }
    }
    GeneratedInstance out{std::move(b).build(), StateCount(num_clusters, num_states)};
    // Spread the arms over states deterministically from the seed.
    for (int i = 0; i < num_clusters; ++i) {
        std::int64_t left = out.instance.cluster_sizes[i];
        for (int s = 0; s + 1 < num_states; ++s) {
            auto take = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(left + 1)));
            out.start.at(i, s) = take;
            left -= take;
        }
        out.start.at(i, num_states - 1) = left;
    }
    return out;
}

}  // namespace rmab
