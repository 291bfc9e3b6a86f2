#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rmab/core.hpp"
#include "rmab/meanfield.hpp"
#include "rmab/rng.hpp"

namespace rmab {

enum class Rounding { Floor, Bucket };

/// A policy maps (time, realized counts) to a budget-feasible integral action.
/// One policy object serves one trajectory at a time: reset() is called at the
/// start of every replication, so implementations may keep per-run state.
class Policy {
   public:
    virtual ~Policy() = default;
    virtual std::string name() const = 0;
    virtual void reset(const RmabInstance& inst, const StateCount& start) {
        (void)inst;
        (void)start;
    }
    virtual ActionCount act(const RmabInstance& inst, int t, const StateCount& mu,
                            RngStream& rng) = 0;
};

using PolicyFactory = std::function<std::unique_ptr<Policy>()>;

/// Plays the declared zero-cost action everywhere.
class NobodyPolicy : public Policy {
   public:
    std::string name() const override { return "nobody"; }
    ActionCount act(const RmabInstance& inst, int t, const StateCount& mu, RngStream&) override {
        ActionCount out(inst.num_clusters, inst.num_states, inst.num_actions);
        for (int i = 0; i < inst.num_clusters; ++i)
            for (int s = 0; s < inst.num_states; ++s)
                out.at(i, s, inst.zero_action(t, i, s)) = mu.at(i, s);
        return out;
    }
};

/// Assigns each arm a uniformly random action among those still affordable
/// under the remaining step budget (the zero-cost action is always available).
class RandomPolicy : public Policy {
   public:
    std::string name() const override { return "random"; }
    ActionCount act(const RmabInstance& inst, int t, const StateCount& mu,
                    RngStream& rng) override {
        ActionCount out(inst.num_clusters, inst.num_states, inst.num_actions);
        double remaining = inst.budget(t);
        for (int i = 0; i < inst.num_clusters; ++i)
            for (int s = 0; s < inst.num_states; ++s) {
                for (std::int64_t arm = 0; arm < mu.at(i, s); ++arm) {
                    int choice = -1;
                    int seen = 0;
                    for (int a = 0; a < inst.num_actions; ++a) {
                        if (inst.cost(t, i, s, a) <= remaining) {
                            ++seen;
                            if (rng.below(static_cast<std::uint64_t>(seen)) == 0) choice = a;
                        }
                    }
                    if (choice < 0) choice = inst.zero_action(t, i, s);
                    out.at(i, s, choice) += 1;
                    remaining -= inst.cost(t, i, s, choice);
                }
            }
        return out;
    }
};

struct MfpStepStats {
    int t = 0;
    double lp_value = 0.0;
    long lp_pivots = 0;
    double max_fractionality = 0.0;
    double rounding_slack = 0.0;     // arms moved to the zero-cost action this step
    FluidState predicted_next;       // the plan's occupancy for t+1 (empty at the last step)
    FluidAction planned_action;      // the fluid action the LP prescribed for t
};

/// Receding-horizon fluid planner: re-solves the LP from the realized counts
/// at every step and floors the step allocation (optionally bucket-samples the
/// leftovers instead). Records per-step plans for drift and slack audits.
class MfpPolicy : public Policy {
   public:
    explicit MfpPolicy(Rounding rounding = Rounding::Floor) : rounding_(rounding) {}

    std::string name() const override {
        return rounding_ == Rounding::Floor ? "mfp" : "mfp-bucket";
    }

    void reset(const RmabInstance&, const StateCount&) override { history_.clear(); }

    ActionCount act(const RmabInstance& inst, int t, const StateCount& mu,
                    RngStream& rng) override {
        auto [value, plan] = mean_field_value(inst, mu, t);
        const FluidAction& alpha_now = plan.alpha.front();
        ActionCount out = rounding_ == Rounding::Floor
                              ? floor_action(inst, t, mu, alpha_now)
                              : bucket_action(inst, t, mu, alpha_now, rng);
        MfpStepStats stats;
        stats.t = t;
        stats.lp_value = value;
        stats.lp_pivots = plan.lp_pivots;
        stats.max_fractionality = plan.max_fractionality;
        double slack = 0;
        for (int i = 0; i < inst.num_clusters; ++i)
            for (int s = 0; s < inst.num_states; ++s)
                for (int a = 0; a < inst.num_actions; ++a)
                    slack += std::abs(alpha_now.at(i, s, a) -
                                      static_cast<double>(out.at(i, s, a)));
        stats.rounding_slack = slack;
        if (plan.mu.size() > 1) stats.predicted_next = plan.mu[1];
        stats.planned_action = alpha_now;
        history_.push_back(std::move(stats));
        return out;
    }

    const std::vector<MfpStepStats>& history() const { return history_; }

   private:
    Rounding rounding_;
    std::vector<MfpStepStats> history_;
};

/// Solves the fluid LP once from the true start state, then replays the plan:
/// at step t it scales the planned allocation by min(planned, realized)
/// occupancy over planned occupancy, floors, and sends leftovers to the
/// zero-cost action. The realized cost is dominated by the plan's cost.
class OneShotMfpPolicy : public Policy {
   public:
    std::string name() const override { return "mfp-oneshot"; }

    void reset(const RmabInstance& inst, const StateCount& start) override {
        auto [value, plan] = mean_field_value(inst, start, 0);
        (void)value;
        plan_ = std::move(plan);
    }

    ActionCount act(const RmabInstance& inst, int t, const StateCount& mu, RngStream&) override {
        const int K = inst.num_clusters, S = inst.num_states, A = inst.num_actions;
        const FluidState& mu_plan = plan_.mu_at(t);
        const FluidAction& alpha_plan = plan_.alpha_at(t);
        ActionCount out(K, S, A);
        for (int i = 0; i < K; ++i)
            for (int s = 0; s < S; ++s) {
                std::int64_t cell = mu.at(i, s);
                double planned = mu_plan.at(i, s);
                double ratio = planned > 1e-12
                                   ? std::min(planned, static_cast<double>(cell)) / planned
                                   : 0.0;
                std::int64_t assigned = 0;
                for (int a = 0; a < A; ++a) {
                    auto v = static_cast<std::int64_t>(
                        std::floor(alpha_plan.at(i, s, a) * ratio + 1e-9));
                    v = std::max<std::int64_t>(0, std::min(v, cell - assigned));
                    out.at(i, s, a) = v;
                    assigned += v;
                }
                out.at(i, s, inst.zero_action(t, i, s)) += cell - assigned;
            }
        return out;
    }

    const FluidPlan& plan() const { return plan_; }

   private:
    FluidPlan plan_;
};

}  // namespace rmab
