#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmab/core.hpp"
#include "rmab/policy.hpp"

namespace rmab {

/// One cluster's stationary MDP lifted out of an instance. Adding a subsidy
/// lambda to the passive action (action 0) turns it into the subsidized MDP
/// whose active/passive indifference point defines the index of a state.
struct ArmMdp {
    int num_states = 0;
    int num_actions = 0;
    double discount = 1.0;
    std::vector<double> transitions;  // [a][s][s'] row-major
    std::vector<double> rewards;      // [s][a]

    double p(int a, int s, int s2) const {
        return transitions[(static_cast<std::size_t>(a) * num_states + s) * num_states + s2];
    }
    double r(int s, int a) const {
        return rewards[static_cast<std::size_t>(s) * num_actions + a];
    }
    double reward_max() const {
        double m = 0;
        for (double v : rewards) m = std::max(m, v);
        return m;
    }
};

inline ArmMdp arm_mdp(const RmabInstance& inst, int cluster) {
    if (!inst.stationary)
        throw std::invalid_argument("index computations require a stationary instance");
    ArmMdp m;
    m.num_states = inst.num_states;
    m.num_actions = inst.num_actions;
    m.discount = inst.discount;
    m.transitions.resize(static_cast<std::size_t>(inst.num_actions) * inst.num_states *
                         inst.num_states);
    m.rewards.resize(static_cast<std::size_t>(inst.num_states) * inst.num_actions);
    for (int a = 0; a < inst.num_actions; ++a)
        for (int s = 0; s < inst.num_states; ++s)
            for (int s2 = 0; s2 < inst.num_states; ++s2)
                m.transitions[(static_cast<std::size_t>(a) * m.num_states + s) * m.num_states +
                              s2] = inst.transition(0, cluster, a, s, s2);
    for (int s = 0; s < inst.num_states; ++s)
        for (int a = 0; a < inst.num_actions; ++a)
            m.rewards[static_cast<std::size_t>(s) * m.num_actions + a] =
                inst.reward(0, cluster, s, a);
    return m;
}

enum class QMode { Discounted, Average, Finite };

struct QResult {
    std::vector<double> q;  // [s][a], the time-0 slice in finite mode
    std::vector<double> v;  // [s]; relative values in average mode
    double gain = 0.0;      // average mode only
    int iterations = 0;
};

namespace qdetail {

inline double subsidized_reward(const ArmMdp& m, int s, int a, double lambda) {
    return m.r(s, a) + (a == 0 ? lambda : 0.0);
}

}  // namespace qdetail

/// Q and V of the subsidized single-arm MDP.
///   Discounted: value iteration to sup-norm residual 1e-10.
///   Average: relative value iteration (reference state 0), span stopping.
///   Finite: backward induction over `finite_horizon` steps, gamma applied per
///   step; returns the time-0 q-values.
inline QResult q_values_with_subsidy(const ArmMdp& m, double lambda, QMode mode,
                                     int finite_horizon = 0) {
    const int S = m.num_states, A = m.num_actions;
    QResult res;
    res.q.assign(static_cast<std::size_t>(S) * A, 0.0);
    res.v.assign(S, 0.0);

    auto backup = [&](const std::vector<double>& v, int s, int a) {
        double q = qdetail::subsidized_reward(m, s, a, lambda);
        double cont = 0;
        for (int s2 = 0; s2 < S; ++s2) cont += m.p(a, s, s2) * v[s2];
        return q + m.discount * cont;
    };

    if (mode == QMode::Finite) {
        if (finite_horizon <= 0)
            throw std::invalid_argument("finite q-values need a positive horizon");
        std::vector<double> v(S, 0.0), v_next(S, 0.0);
        for (int step = 0; step < finite_horizon; ++step) {
            for (int s = 0; s < S; ++s) {
                double best = -std::numeric_limits<double>::infinity();
                for (int a = 0; a < A; ++a) {
                    double q = backup(v, s, a);
                    if (step == finite_horizon - 1) res.q[static_cast<std::size_t>(s) * A + a] = q;
                    best = std::max(best, q);
                }
                v_next[s] = best;
            }
            v.swap(v_next);
        }
        res.v = v;
        res.iterations = finite_horizon;
        return res;
    }

    if (mode == QMode::Discounted) {
        if (m.discount >= 1.0)
            throw std::invalid_argument("discounted q-values require discount < 1");
        std::vector<double> v(S, 0.0), v_next(S, 0.0);
        const int cap = 1000000;
        int it = 0;
        for (; it < cap; ++it) {
            double resid = 0;
            for (int s = 0; s < S; ++s) {
                double best = -std::numeric_limits<double>::infinity();
                for (int a = 0; a < A; ++a) best = std::max(best, backup(v, s, a));
                v_next[s] = best;
                resid = std::max(resid, std::abs(v_next[s] - v[s]));
            }
            v.swap(v_next);
            if (resid <= 1e-10) break;
        }
        if (it >= cap)
            throw NumericalError("value iteration failed to converge within the iteration cap");
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) res.q[static_cast<std::size_t>(s) * A + a] = backup(v, s, a);
        res.v = v;
        res.iterations = it + 1;
        return res;
    }

    // Average reward: relative value iteration with reference state 0 and
    // span-seminorm stopping. The damped update keeps the iteration
    // convergent on periodic chains; the fixed point is unchanged.
    const double damping = 0.5;
    std::vector<double> h(S, 0.0), backed(S, 0.0);
    const int cap = 1000000;
    int it = 0;
    double gain = 0;
    for (; it < cap; ++it) {
        for (int s = 0; s < S; ++s) {
            double best = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < A; ++a) {
                double q = qdetail::subsidized_reward(m, s, a, lambda);
                for (int s2 = 0; s2 < S; ++s2) q += m.p(a, s, s2) * h[s2];
                best = std::max(best, q);
            }
            backed[s] = best;
        }
        double span_lo = std::numeric_limits<double>::infinity(), span_hi = -span_lo;
        for (int s = 0; s < S; ++s) {
            double d = backed[s] - h[s];
            span_lo = std::min(span_lo, d);
            span_hi = std::max(span_hi, d);
        }
        if (span_hi - span_lo <= 1e-10) {
            gain = (span_hi + span_lo) / 2;
            break;
        }
        double shift = backed[0];
        for (int s = 0; s < S; ++s)
            h[s] = (1.0 - damping) * h[s] + damping * (backed[s] - shift);
    }
    if (it >= cap)
        throw NumericalError(
            "relative value iteration failed to converge; the average-reward mode needs a "
            "unichain arm (state-dependent gain has no single index scale)");
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            double q = qdetail::subsidized_reward(m, s, a, lambda) - gain;
            for (int s2 = 0; s2 < S; ++s2) q += m.p(a, s, s2) * h[s2];
            res.q[static_cast<std::size_t>(s) * A + a] = q;
        }
    res.v = h;
    res.gain = gain;
    res.iterations = it + 1;
    return res;
}

/// Active-minus-passive q-gap at subsidy lambda.
inline double q_gap(const ArmMdp& m, int state, double lambda, QMode mode, int finite_horizon = 0) {
    QResult r = q_values_with_subsidy(m, lambda, mode, finite_horizon);
    return r.q[static_cast<std::size_t>(state) * m.num_actions + 1] -
           r.q[static_cast<std::size_t>(state) * m.num_actions + 0];
}

enum class Indexability { Indexable, NonIndexable, Inconclusive };

inline const char* to_string(Indexability v) {
    switch (v) {
        case Indexability::Indexable: return "indexable";
        case Indexability::NonIndexable: return "non-indexable";
        case Indexability::Inconclusive: return "inconclusive";
    }
    return "?";
}

struct IndexEntry {
    int cluster = 0;
    int state = 0;
    double index = 0.0;
    Indexability verdict = Indexability::Inconclusive;
    int crossings = 0;
    double grid_lo = 0.0, grid_hi = 0.0;
};

struct IndexTable {
    int num_clusters = 0;
    int num_states = 0;
    std::vector<IndexEntry> entries;  // [i * num_states + s]

    IndexEntry& at(int i, int s) { return entries[static_cast<std::size_t>(i) * num_states + s]; }
    const IndexEntry& at(int i, int s) const {
        return entries[static_cast<std::size_t>(i) * num_states + s];
    }
};

struct ScanGrid {
    double lo = 0.0;
    double hi = 0.0;
    int points = 2001;
};

/// Default grid spans 1.1x the achievable reward range: R_max/(1-gamma) in the
/// discounted mode, R_max for average and finite modes.
inline ScanGrid default_scan_grid(const ArmMdp& m, QMode mode, int points = 2001) {
    double span = mode == QMode::Discounted ? 1.1 * m.reward_max() / (1.0 - m.discount)
                                            : 1.1 * m.reward_max();
    span = std::max(span, 1.0);
    return {-span, span, points};
}

struct ScanCurve {
    int state = 0;
    std::vector<double> lambdas;
    std::vector<double> gaps;
};

struct ScanResult {
    std::vector<IndexEntry> entries;  // per state, cluster field unset
    std::vector<ScanCurve> curves;
};

/// Certifies whether the q-gap of each state crosses zero exactly once over
/// the grid (positive prefix, then non-positive suffix). The index estimate of
/// an indexable state is refined by bisection between the bracketing grid
/// points.
inline ScanResult indexability_scan(const ArmMdp& m, QMode mode, ScanGrid grid,
                                    int finite_horizon = 0) {
    if (m.num_actions != 2)
        throw std::invalid_argument("indexability scan requires exactly two actions");
    const int S = m.num_states;
    ScanResult out;
    out.curves.resize(S);
    for (int s = 0; s < S; ++s) out.curves[s].state = s;

    std::vector<std::vector<double>> gaps(S);
    std::vector<double> lambdas;
    for (int j = 0; j < grid.points; ++j) {
        double lam = grid.points == 1
                         ? grid.lo
                         : grid.lo + (grid.hi - grid.lo) * j / (grid.points - 1);
        lambdas.push_back(lam);
        QResult qr = q_values_with_subsidy(m, lam, mode, finite_horizon);
        for (int s = 0; s < S; ++s)
            gaps[s].push_back(qr.q[static_cast<std::size_t>(s) * 2 + 1] -
                              qr.q[static_cast<std::size_t>(s) * 2 + 0]);
    }
    for (int s = 0; s < S; ++s) {
        out.curves[s].lambdas = lambdas;
        out.curves[s].gaps = gaps[s];
        IndexEntry e;
        e.state = s;
        e.grid_lo = grid.lo;
        e.grid_hi = grid.hi;
        const double tol = 1e-9;
        int sign_changes = 0;
        int first_cross = -1;
        int prev_sign = 0;
        bool wrong_direction = false;
        for (int j = 0; j < grid.points; ++j) {
            double g = gaps[s][j];
            int sign = g > tol ? 1 : (g < -tol ? -1 : 0);
            if (sign != 0) {
                if (prev_sign != 0 && sign != prev_sign) {
                    ++sign_changes;
                    if (sign > prev_sign) wrong_direction = true;  // rose back above zero
                    if (first_cross < 0) first_cross = j;
                }
                prev_sign = sign;
            }
        }
        e.crossings = sign_changes;
        bool starts_positive = false, ends_nonpositive = false;
        for (double g : gaps[s]) {
            if (std::abs(g) > tol) {
                starts_positive = g > 0;
                break;
            }
        }
        for (auto it = gaps[s].rbegin(); it != gaps[s].rend(); ++it) {
            if (std::abs(*it) > tol) {
                ends_nonpositive = *it < 0;
                break;
            }
        }
        if (sign_changes == 1 && starts_positive && ends_nonpositive && !wrong_direction) {
            e.verdict = Indexability::Indexable;
            double lo = lambdas[first_cross - 1], hi = lambdas[first_cross];
            for (int iter = 0; iter < 200; ++iter) {
                double mid = 0.5 * (lo + hi);
                double g = q_gap(m, s, mid, mode, finite_horizon);
                if (std::abs(g) <= 1e-8 || hi - lo <= 1e-11) {
                    lo = hi = mid;
                    break;
                }
                (g > 0 ? lo : hi) = mid;
            }
            e.index = 0.5 * (lo + hi);
        } else if (wrong_direction || sign_changes > 1) {
            e.verdict = Indexability::NonIndexable;
        } else {
            e.verdict = Indexability::Inconclusive;
        }
        out.entries.push_back(e);
    }
    return out;
}

/// Whittle index of one state: the root of the active/passive q-gap, found by
/// bisection to |gap| <= 1e-8 after bracketing by geometric expansion from
/// [-R_max - 1, R_max + 1].
inline double whittle_index(const ArmMdp& m, int state, QMode mode, int finite_horizon = 0) {
    if (m.num_actions != 2)
        throw std::invalid_argument("whittle index requires exactly two actions");
    double lo = -m.reward_max() - 1.0, hi = m.reward_max() + 1.0;
    double glo = q_gap(m, state, lo, mode, finite_horizon);
    double ghi = q_gap(m, state, hi, mode, finite_horizon);
    for (int tries = 0; tries < 60 && glo <= 0; ++tries) {
        lo *= 2;
        glo = q_gap(m, state, lo, mode, finite_horizon);
    }
    for (int tries = 0; tries < 60 && ghi >= 0; ++tries) {
        hi *= 2;
        ghi = q_gap(m, state, hi, mode, finite_horizon);
    }
    if (glo <= 0 || ghi >= 0) {
        if (std::abs(glo) <= 1e-8) return lo;
        if (std::abs(ghi) <= 1e-8) return hi;
        throw NumericalError("whittle_index: no sign change in bracket for state " +
                             std::to_string(state) + " (state may be non-indexable)");
    }
    double mid = 0.5 * (lo + hi);
    for (int iter = 0; iter < 400; ++iter) {
        mid = 0.5 * (lo + hi);
        double g = q_gap(m, state, mid, mode, finite_horizon);
        if (std::abs(g) <= 1e-8 || hi - lo <= 1e-12) return mid;
        (g > 0 ? lo : hi) = mid;
    }
    return mid;
}

/// Index table for every (cluster, state) of a stationary two-action instance.
inline IndexTable build_index_table(const RmabInstance& inst, QMode mode, int finite_horizon = 0,
                                    ScanGrid const* grid = nullptr) {
    IndexTable table;
    table.num_clusters = inst.num_clusters;
    table.num_states = inst.num_states;
    table.entries.resize(static_cast<std::size_t>(inst.num_clusters) * inst.num_states);
    for (int i = 0; i < inst.num_clusters; ++i) {
        ArmMdp m = arm_mdp(inst, i);
        ScanGrid g = grid ? *grid : default_scan_grid(m, mode);
        ScanResult scan = indexability_scan(m, mode, g, finite_horizon);
        for (int s = 0; s < inst.num_states; ++s) {
            IndexEntry e = scan.entries[s];
            e.cluster = i;
            if (e.verdict == Indexability::Indexable)
                e.index = whittle_index(m, s, mode, finite_horizon);
            table.at(i, s) = e;
        }
    }
    return table;
}

/// Priority assignment shared by every index policy: cells sorted by priority
/// value (descending, ties by (cluster, state)), active action granted to
/// whole cells until the budget runs out; the marginal cell gets
/// floor(remaining budget / active cost) arms; everything else plays the
/// zero-cost action.
inline ActionCount priority_action(const RmabInstance& inst, int t, const StateCount& mu,
                                   const std::vector<double>& priority) {
    if (inst.num_actions != 2)
        throw std::invalid_argument("index policies require exactly two actions");
    const int K = inst.num_clusters, S = inst.num_states;
    ActionCount out(K, S, 2);
    std::vector<std::pair<double, int>> order;  // (-priority, cell id) for stable sort
    order.reserve(static_cast<std::size_t>(K) * S);
    for (int i = 0; i < K; ++i)
        for (int s = 0; s < S; ++s)
            order.push_back({priority[static_cast<std::size_t>(i) * S + s], i * S + s});
    std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    double remaining = inst.budget(t);
    for (const auto& [prio, cell] : order) {
        (void)prio;
        int i = cell / S, s = cell % S;
        std::int64_t arms = mu.at(i, s);
        if (arms == 0) continue;
        double unit_cost = inst.cost(t, i, s, 1);
        std::int64_t granted;
        if (unit_cost <= 0) {
            granted = arms;
        } else {
            granted = std::min<std::int64_t>(
                arms, static_cast<std::int64_t>(std::floor(remaining / unit_cost + 1e-9)));
        }
        out.at(i, s, 1) = granted;
        out.at(i, s, inst.zero_action(t, i, s)) += arms - granted;
        remaining -= static_cast<double>(granted) * unit_cost;
    }
    return out;
}

inline ActionCount whittle_policy_step(const RmabInstance& inst, int t, const StateCount& mu,
                                       const IndexTable& table) {
    std::vector<double> prio(static_cast<std::size_t>(inst.num_clusters) * inst.num_states);
    for (int i = 0; i < inst.num_clusters; ++i)
        for (int s = 0; s < inst.num_states; ++s)
            prio[static_cast<std::size_t>(i) * inst.num_states + s] = table.at(i, s).index;
    return priority_action(inst, t, mu, prio);
}

/// Index policy with indices fixed per (cluster, state) ahead of time.
class PriorityPolicy : public Policy {
   public:
    PriorityPolicy(std::string name, std::vector<double> priority)
        : name_(std::move(name)), priority_(std::move(priority)) {}

    std::string name() const override { return name_; }
    ActionCount act(const RmabInstance& inst, int t, const StateCount& mu, RngStream&) override {
        return priority_action(inst, t, mu, priority_);
    }

   private:
    std::string name_;
    std::vector<double> priority_;
};

/// Whittle policy with indices from the infinite-horizon subsidized MDP
/// (discounted when gamma < 1, average reward at gamma = 1). The table can be
/// precomputed once and shared across replications.
class WhittlePolicy : public Policy {
   public:
    WhittlePolicy() = default;
    explicit WhittlePolicy(std::shared_ptr<const IndexTable> table) : table_(std::move(table)) {}

    std::string name() const override { return "whittle"; }

    void reset(const RmabInstance& inst, const StateCount&) override {
        if (table_) return;
        QMode mode = inst.discount < 1.0 ? QMode::Discounted : QMode::Average;
        table_ = std::make_shared<const IndexTable>(build_index_table(inst, mode));
    }

    ActionCount act(const RmabInstance& inst, int t, const StateCount& mu, RngStream&) override {
        return whittle_policy_step(inst, t, mu, *table_);
    }

    const IndexTable& table() const { return *table_; }

   private:
    std::shared_ptr<const IndexTable> table_;
};

/// Per-step priorities of the finite-horizon Whittle variant: the index of
/// each state is recomputed for every step from the backward-induction
/// q-values of the remaining horizon. priorities[t][i*S + s].
inline std::vector<std::vector<double>> finite_whittle_priorities(const RmabInstance& inst) {
    const int S = inst.num_states;
    std::vector<ArmMdp> arms;
    for (int i = 0; i < inst.num_clusters; ++i) arms.push_back(arm_mdp(inst, i));
    std::vector<std::vector<double>> out(inst.horizon);
    for (int t = 0; t < inst.horizon; ++t) {
        int remaining = inst.horizon - t;
        out[t].assign(static_cast<std::size_t>(inst.num_clusters) * S, 0.0);
        for (int i = 0; i < inst.num_clusters; ++i)
            for (int s = 0; s < S; ++s) {
                double idx;
                try {
                    idx = whittle_index(arms[i], s, QMode::Finite, remaining);
                } catch (const NumericalError&) {
                    idx = 0.0;  // no crossing in bracket: state indifferent
                }
                out[t][static_cast<std::size_t>(i) * S + s] = idx;
            }
    }
    return out;
}

class FiniteWhittlePolicy : public Policy {
   public:
    FiniteWhittlePolicy() = default;
    explicit FiniteWhittlePolicy(std::shared_ptr<const std::vector<std::vector<double>>> prios)
        : priorities_(std::move(prios)) {}

    std::string name() const override { return "whittle-finite"; }

    void reset(const RmabInstance& inst, const StateCount&) override {
        if (!priorities_)
            priorities_ = std::make_shared<const std::vector<std::vector<double>>>(
                finite_whittle_priorities(inst));
    }

    ActionCount act(const RmabInstance& inst, int t, const StateCount& mu, RngStream&) override {
        return priority_action(inst, t, mu, (*priorities_)[static_cast<std::size_t>(t)]);
    }

   private:
    std::shared_ptr<const std::vector<std::vector<double>>> priorities_;
};

}  // namespace rmab
