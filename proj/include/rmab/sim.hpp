#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "rmab/core.hpp"
#include "rmab/meanfield.hpp"
#include "rmab/policy.hpp"
#include "rmab/rng.hpp"

namespace rmab {

inline constexpr double kBudgetAuditTol = 1e-9;

struct StepRecord {
    StateCount state;
    ActionCount action;
    double reward = 0.0;
    double cost = 0.0;
    bool budget_violation = false;
    double budget_excess = 0.0;
};

/// Seeded trajectory of one policy run: per-step counts, actions, rewards,
/// costs, and the budget audit. Bit-identical for identical inputs and seed.
struct SimulationRecord {
    std::uint64_t seed = 0;
    std::string policy;
    std::vector<StepRecord> steps;
    double total_discounted_reward = 0.0;
    bool any_budget_violation = false;
    double max_budget_excess = 0.0;
};

namespace simdetail {

constexpr std::uint64_t kCellTag = 0xC311;
constexpr std::uint64_t kPolicyTag = 0x9011C4;

inline int sample_categorical(const double* probs, int n, double u) {
    double cum = 0;
    for (int j = 0; j < n; ++j) {
        cum += probs[j];
        if (u < cum) return j;
    }
    return n - 1;
}

}  // namespace simdetail

/// Runs one trajectory. Transitions are sampled per (cluster, state, action)
/// cell from a stream keyed by (seed, t, i, s, a), so the sampling order never
/// affects results. A policy that returns an action not covering the realized
/// counts is a fatal error; budget overruns are recorded in the audit.
inline SimulationRecord simulate_trajectory(const RmabInstance& inst, Policy& policy,
                                            const StateCount& start, std::uint64_t seed) {
    check_state_shape(inst, start);
    const int K = inst.num_clusters, S = inst.num_states, A = inst.num_actions;
    SimulationRecord rec;
    rec.seed = seed;
    rec.policy = policy.name();
    policy.reset(inst, start);

    StateCount mu = start;
    double weight = 1.0;
    for (int t = 0; t < inst.horizon; ++t) {
        RngStream policy_rng(RngStream::key_of({seed, simdetail::kPolicyTag,
                                                static_cast<std::uint64_t>(t)}));
        ActionCount alpha = policy.act(inst, t, mu, policy_rng);
        for (int i = 0; i < K; ++i)
            for (int s = 0; s < S; ++s)
                if (alpha.cell_total(i, s) != mu.at(i, s))
                    throw std::logic_error(
                        "policy '" + policy.name() + "' returned an infeasible action at t=" +
                        std::to_string(t) + ", cluster=" + std::to_string(i) + ", state=" +
                        std::to_string(s) + ": action covers " +
                        std::to_string(alpha.cell_total(i, s)) + " of " +
                        std::to_string(mu.at(i, s)) + " arms");

        StepRecord step;
        step.state = mu;
        step.reward = step_reward(inst, t, alpha);
        step.cost = step_cost(inst, t, alpha);
        double b = inst.budget(t);
        if (step.cost > b + kBudgetAuditTol * std::max(1.0, b)) {
            step.budget_violation = true;
            step.budget_excess = step.cost - b;
            rec.any_budget_violation = true;
            rec.max_budget_excess = std::max(rec.max_budget_excess, step.budget_excess);
        }
        rec.total_discounted_reward += weight * step.reward;
        weight *= inst.discount;

        if (t + 1 < inst.horizon) {
            StateCount next(K, S);
            for (int i = 0; i < K; ++i)
                for (int s = 0; s < S; ++s)
                    for (int a = 0; a < A; ++a) {
                        std::int64_t arms = alpha.at(i, s, a);
                        if (arms == 0) continue;
                        RngStream cell(RngStream::key_of(
                            {seed, simdetail::kCellTag, static_cast<std::uint64_t>(t),
                             static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(s),
                             static_cast<std::uint64_t>(a)}));
                        const double* row = inst.transition_row(t, i, a, s);
                        for (std::int64_t arm = 0; arm < arms; ++arm)
                            next.at(i, simdetail::sample_categorical(row, S, cell.u01())) += 1;
                    }
            mu = std::move(next);
        }
        step.action = std::move(alpha);
        rec.steps.push_back(std::move(step));
    }
    return rec;
}

struct EvalSummary {
    std::string policy;
    int replications = 0;
    double mean_reward = 0.0;
    double stddev = 0.0;
    double ci95_halfwidth = 0.0;
    double mean_step_cost = 0.0;
    bool any_budget_violation = false;
    double max_budget_excess = 0.0;
    std::vector<double> rewards;  // per replication, indexed by replication
};

/// Runs a simple worker pool over `count` items; results land by index, so the
/// aggregate is independent of scheduling.
inline void parallel_for(int count, int jobs, const std::function<void(int)>& body) {
    if (jobs <= 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
    jobs = std::max(1, std::min(jobs, count));
    if (jobs == 1) {
        for (int k = 0; k < count; ++k) body(k);
        return;
    }
    std::atomic<int> cursor{0};
    std::vector<std::thread> pool;
    std::exception_ptr error;
    std::mutex error_mu;
    for (int w = 0; w < jobs; ++w)
        pool.emplace_back([&] {
            while (true) {
                int k = cursor.fetch_add(1);
                if (k >= count) return;
                try {
                    body(k);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

/// Monte Carlo policy evaluation over replications base_seed .. base_seed+R-1.
inline EvalSummary evaluate_policy(const RmabInstance& inst, const PolicyFactory& make_policy,
                                   const StateCount& start, int replications,
                                   std::uint64_t base_seed, int jobs = 1) {
    if (replications < 1) throw std::invalid_argument("evaluate_policy: replications must be >= 1");
    std::vector<double> rewards(replications);
    std::vector<double> costs(replications);
    std::vector<char> violation(replications, 0);
    std::vector<double> excess(replications, 0.0);
    parallel_for(replications, jobs, [&](int r) {
        auto policy = make_policy();
        SimulationRecord rec =
            simulate_trajectory(inst, *policy, start, base_seed + static_cast<std::uint64_t>(r));
        rewards[r] = rec.total_discounted_reward;
        double c = 0;
        for (const StepRecord& s : rec.steps) c += s.cost;
        costs[r] = c / static_cast<double>(rec.steps.size());
        violation[r] = rec.any_budget_violation ? 1 : 0;
        excess[r] = rec.max_budget_excess;
    });

    EvalSummary out;
    out.policy = make_policy()->name();
    out.replications = replications;
    out.rewards = rewards;
    double sum = 0;
    for (double v : rewards) sum += v;
    out.mean_reward = sum / replications;
    double ss = 0;
    for (double v : rewards) ss += (v - out.mean_reward) * (v - out.mean_reward);
    out.stddev = replications > 1 ? std::sqrt(ss / (replications - 1)) : 0.0;
    out.ci95_halfwidth = 1.96 * out.stddev / std::sqrt(static_cast<double>(replications));
    double csum = 0;
    for (double v : costs) csum += v;
    out.mean_step_cost = csum / replications;
    for (int r = 0; r < replications; ++r) {
        if (violation[r]) out.any_budget_violation = true;
        out.max_budget_excess = std::max(out.max_budget_excess, excess[r]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Exact finite-horizon oracle over count states.
// ---------------------------------------------------------------------------

namespace dpdetail {

/// All vectors of `slots` non-negative integers summing to `total`.
inline void compositions(std::int64_t total, int slots, std::vector<std::int64_t>& scratch,
                         const std::function<void(const std::vector<std::int64_t>&)>& emit) {
    if (slots == 1) {
        scratch.push_back(total);
        emit(scratch);
        scratch.pop_back();
        return;
    }
    for (std::int64_t v = 0; v <= total; ++v) {
        scratch.push_back(v);
        compositions(total - v, slots - 1, scratch, emit);
        scratch.pop_back();
    }
}

inline double log_factorial(std::int64_t n) {
    static const std::vector<double> table = [] {
        std::vector<double> t(1, 0.0);
        for (int k = 1; k <= 4096; ++k) t.push_back(t.back() + std::log(static_cast<double>(k)));
        return t;
    }();
    if (n < static_cast<std::int64_t>(table.size())) return table[static_cast<std::size_t>(n)];
    return std::lgamma(static_cast<double>(n) + 1.0);
}

/// Exact multinomial pmf over outcome counts for `n` draws from `probs`.
inline void multinomial_pmf(std::int64_t n, const double* probs, int k,
                            std::map<std::vector<std::int64_t>, double>& out) {
    std::vector<std::int64_t> scratch;
    compositions(n, k, scratch, [&](const std::vector<std::int64_t>& counts) {
        double logp = log_factorial(n);
        for (int j = 0; j < k; ++j) {
            if (counts[j] > 0 && probs[j] <= 0.0) return;  // impossible outcome
            logp -= log_factorial(counts[j]);
            if (counts[j] > 0) logp += counts[j] * std::log(probs[j]);
        }
        out[counts] += std::exp(logp);
    });
}

}  // namespace dpdetail

struct ExactDpCaps {
    std::int64_t max_count_states = 200000;
    int max_horizon = 8;
};

/// Exact optimal expected discounted reward by backward induction over count
/// states, enumerating every budget-feasible integral action and the exact
/// product-of-multinomials transition law. Refuses instances beyond the caps
/// rather than approximating.
class ExactDp {
   public:
    ExactDp(const RmabInstance& inst, ExactDpCaps caps = {}) : inst_(inst), caps_(caps) {
        if (inst.horizon > caps_.max_horizon)
            throw std::invalid_argument("exact oracle: horizon " + std::to_string(inst.horizon) +
                                        " exceeds cap " + std::to_string(caps_.max_horizon));
        build_state_space();
    }

    double value(const StateCount& start) {
        check_state_shape(inst_, start);
        values_.assign(static_cast<std::size_t>(inst_.horizon + 1) * num_states_, -1.0);
        return value_at(0, index_of(start));
    }

    std::int64_t num_count_states() const { return num_states_; }

   private:
    const RmabInstance& inst_;
    ExactDpCaps caps_;
    std::vector<std::vector<std::vector<std::int64_t>>> cluster_states_;  // [i][rank] -> counts
    std::vector<std::map<std::vector<std::int64_t>, std::int64_t>> cluster_rank_;
    std::vector<std::int64_t> cluster_card_;
    std::int64_t num_states_ = 1;
    std::vector<double> values_;  // [(t * num_states_) + state], -1 = unset

    void build_state_space() {
        const int K = inst_.num_clusters, S = inst_.num_states;
        cluster_states_.resize(K);
        cluster_rank_.resize(K);
        for (int i = 0; i < K; ++i) {
            std::vector<std::int64_t> scratch;
            dpdetail::compositions(inst_.cluster_sizes[i], S, scratch,
                                   [&](const std::vector<std::int64_t>& c) {
                                       cluster_rank_[i][c] =
                                           static_cast<std::int64_t>(cluster_states_[i].size());
                                       cluster_states_[i].push_back(c);
                                   });
            cluster_card_.push_back(static_cast<std::int64_t>(cluster_states_[i].size()));
            num_states_ *= cluster_card_.back();
            if (num_states_ > caps_.max_count_states)
                throw std::invalid_argument(
                    "exact oracle: count-state space exceeds cap of " +
                    std::to_string(caps_.max_count_states) + " states");
        }
    }

    std::int64_t index_of(const StateCount& mu) const {
        std::int64_t idx = 0;
        for (int i = 0; i < inst_.num_clusters; ++i) {
            std::vector<std::int64_t> c(inst_.num_states);
            for (int s = 0; s < inst_.num_states; ++s) c[s] = mu.at(i, s);
            auto it = cluster_rank_[i].find(c);
            if (it == cluster_rank_[i].end())
                throw std::invalid_argument("exact oracle: start state has wrong cluster totals");
            idx = idx * cluster_card_[i] + it->second;
        }
        return idx;
    }

    StateCount state_of(std::int64_t idx) const {
        StateCount mu(inst_.num_clusters, inst_.num_states);
        for (int i = inst_.num_clusters - 1; i >= 0; --i) {
            std::int64_t r = idx % cluster_card_[i];
            idx /= cluster_card_[i];
            for (int s = 0; s < inst_.num_states; ++s) mu.at(i, s) = cluster_states_[i][r][s];
        }
        return mu;
    }

    double value_at(int t, std::int64_t state_idx) {
        if (t >= inst_.horizon) return 0.0;
        double& memo = values_[static_cast<std::size_t>(t) * num_states_ + state_idx];
        if (memo >= 0.0) return memo;
        StateCount mu = state_of(state_idx);
        double best = -1.0;
        enumerate_actions(t, mu, [&](const ActionCount& alpha) {
            double v = step_reward(inst_, t, alpha);
            if (t + 1 < inst_.horizon) v += inst_.discount * expected_next_value(t, alpha);
            best = std::max(best, v);
        });
        memo = best;
        return memo;
    }

    /// Depth-first composition of per-cell action splits with budget pruning.
    void enumerate_actions(int t, const StateCount& mu,
                           const std::function<void(const ActionCount&)>& emit) {
        const int K = inst_.num_clusters, S = inst_.num_states, A = inst_.num_actions;
        ActionCount alpha(K, S, A);
        std::function<void(int, double)> walk = [&](int cell, double budget_left) {
            if (cell == K * S) {
                emit(alpha);
                return;
            }
            int i = cell / S, s = cell % S;
            std::int64_t arms = mu.at(i, s);
            std::vector<std::int64_t> scratch;
            dpdetail::compositions(arms, A, scratch, [&](const std::vector<std::int64_t>& split) {
                double cost = 0;
                for (int a = 0; a < A; ++a) cost += inst_.cost(t, i, s, a) * split[a];
                if (cost > budget_left + kBudgetAuditTol) return;
                for (int a = 0; a < A; ++a) alpha.at(i, s, a) = split[a];
                walk(cell + 1, budget_left - cost);
                for (int a = 0; a < A; ++a) alpha.at(i, s, a) = 0;
            });
        };
        walk(0, inst_.budget(t));
    }

    double expected_next_value(int t, const ActionCount& alpha) {
        const int K = inst_.num_clusters, S = inst_.num_states, A = inst_.num_actions;
        // Per-cluster distribution over next cluster counts, then the product
        // across clusters (cluster transitions are independent).
        std::vector<std::map<std::vector<std::int64_t>, double>> cluster_dist(K);
        for (int i = 0; i < K; ++i) {
            std::map<std::vector<std::int64_t>, double> dist;
            dist[std::vector<std::int64_t>(S, 0)] = 1.0;
            for (int s = 0; s < S; ++s)
                for (int a = 0; a < A; ++a) {
                    std::int64_t arms = alpha.at(i, s, a);
                    if (arms == 0) continue;
                    std::map<std::vector<std::int64_t>, double> cell;
                    dpdetail::multinomial_pmf(arms, inst_.transition_row(t, i, a, s), S, cell);
                    std::map<std::vector<std::int64_t>, double> merged;
                    for (const auto& [acc, p1] : dist)
                        for (const auto& [add, p2] : cell) {
                            std::vector<std::int64_t> sum(S);
                            for (int j = 0; j < S; ++j) sum[j] = acc[j] + add[j];
                            merged[sum] += p1 * p2;
                        }
                    dist = std::move(merged);
                }
            cluster_dist[i] = std::move(dist);
        }
        double total = 0;
        std::vector<std::int64_t> idx_parts(K);
        std::function<void(int, double, std::int64_t)> join = [&](int i, double p,
                                                                  std::int64_t idx) {
            if (i == K) {
                total += p * value_at(t + 1, idx);
                return;
            }
            for (const auto& [counts, pc] : cluster_dist[i])
                join(i + 1, p * pc, idx * cluster_card_[i] + cluster_rank_[i].at(counts));
        };
        join(0, 1.0, 0);
        return total;
    }
};

inline double exact_optimal_value(const RmabInstance& inst, const StateCount& start,
                                  ExactDpCaps caps = {}) {
    return ExactDp(inst, caps).value(start);
}

// ---------------------------------------------------------------------------
// Statistical validators for the concentration results.
// ---------------------------------------------------------------------------

struct MultinomialBoundReport {
    int categories = 0;        // k
    std::int64_t draws = 0;    // n per batch
    double delta = 0.0;
    int trials = 0;
    double epsilon = 0.0;      // sqrt(2 log(2) k n + 2 n log(1/delta)), natural log
    double failure_rate = 0.0; // fraction of batches with L1 deviation >= epsilon
    double mean_l1 = 0.0;
    double sqrt_kn = 0.0;      // expectation-form reference
    std::string log_convention = "natural";
};

/// Samples `trials` batches of n categorical draws and measures the L1
/// deviation of the summed one-hot vectors from their mean.
inline MultinomialBoundReport check_multinomial_bound(int k, std::int64_t n,
                                                      const std::vector<double>& probs,
                                                      double delta, int trials,
                                                      std::uint64_t seed = 1) {
    if (trials < 100) throw std::invalid_argument("check_multinomial_bound: trials must be >= 100");
    if (static_cast<int>(probs.size()) != k)
        throw std::invalid_argument("check_multinomial_bound: probs size must equal k");
    MultinomialBoundReport rep;
    rep.categories = k;
    rep.draws = n;
    rep.delta = delta;
    rep.trials = trials;
    rep.epsilon = std::sqrt(2.0 * std::log(2.0) * k * static_cast<double>(n) +
                            2.0 * static_cast<double>(n) * std::log(1.0 / delta));
    rep.sqrt_kn = std::sqrt(static_cast<double>(k) * static_cast<double>(n));

    int failures = 0;
    double l1_sum = 0;
    for (int trial = 0; trial < trials; ++trial) {
        RngStream rng(RngStream::key_of({seed, 0xB0, static_cast<std::uint64_t>(trial)}));
        std::vector<std::int64_t> counts(k, 0);
        for (std::int64_t d = 0; d < n; ++d)
            counts[simdetail::sample_categorical(probs.data(), k, rng.u01())] += 1;
        double l1 = 0;
        for (int j = 0; j < k; ++j)
            l1 += std::abs(static_cast<double>(counts[j]) - static_cast<double>(n) * probs[j]);
        l1_sum += l1;
        if (l1 >= rep.epsilon) ++failures;
    }
    rep.failure_rate = static_cast<double>(failures) / trials;
    rep.mean_l1 = l1_sum / trials;
    return rep;
}

struct DriftBoundReport {
    std::int64_t total_arms = 0;
    double mean_drift = 0.0;       // mean over steps and replications of the L1 gap
    double quantile_drift = 0.0;   // empirical (1 - delta) quantile
    double mean_bound = 0.0;       // sqrt(K|S|N) + K|S||A|
    double quantile_bound = 0.0;   // sqrt(2 log(2) K|S|N + 2 N log(1/delta)) + K|S||A|
    int samples = 0;
};

/// Runs the receding-horizon planner and measures, at every step, the L1 gap
/// between the realized counts and the previous step's fluid prediction.
inline DriftBoundReport check_drift_bound(const RmabInstance& inst, const StateCount& start,
                                          int replications, double delta, std::uint64_t seed,
                                          int jobs = 1) {
    const double n = static_cast<double>(inst.total_arms());
    const double ks = static_cast<double>(inst.num_clusters) * inst.num_states;
    const double ksa = ks * inst.num_actions;
    DriftBoundReport rep;
    rep.total_arms = inst.total_arms();
    rep.mean_bound = std::sqrt(ks * n) + ksa;
    rep.quantile_bound =
        std::sqrt(2.0 * std::log(2.0) * ks * n + 2.0 * n * std::log(1.0 / delta)) + ksa;

    std::vector<std::vector<double>> gaps(replications);
    parallel_for(replications, jobs, [&](int r) {
        MfpPolicy policy;
        SimulationRecord rec =
            simulate_trajectory(inst, policy, start, seed + static_cast<std::uint64_t>(r));
        const auto& hist = policy.history();
        for (std::size_t t = 1; t < rec.steps.size(); ++t) {
            const FluidState& predicted = hist[t - 1].predicted_next;
            gaps[r].push_back(l1_distance(rec.steps[t].state, predicted));
        }
    });
    std::vector<double> all;
    for (const auto& g : gaps) all.insert(all.end(), g.begin(), g.end());
    rep.samples = static_cast<int>(all.size());
    if (!all.empty()) {
        double sum = 0;
        for (double v : all) sum += v;
        rep.mean_drift = sum / static_cast<double>(all.size());
        std::sort(all.begin(), all.end());
        auto pos = static_cast<std::size_t>(
            std::min<double>(static_cast<double>(all.size()) - 1,
                             std::ceil((1.0 - delta) * static_cast<double>(all.size())) - 1));
        rep.quantile_drift = all[pos];
    }
    return rep;
}

}  // namespace rmab
