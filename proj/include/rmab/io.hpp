#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rmab/core.hpp"
#include "rmab/sim.hpp"

namespace rmab {

inline constexpr const char* kToolkitVersion = "0.1.0";

/// Configuration or input-file problem; the CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Instance serialization. Nested arrays are indexed [t][i][a][s][s'] for
// transitions and [t][i][s][a] for rewards/costs; "stationary": true drops
// the leading time axis everywhere.
// ---------------------------------------------------------------------------

inline json instance_to_json(const RmabInstance& inst) {
    json j;
    j["num_clusters"] = inst.num_clusters;
    j["num_states"] = inst.num_states;
    j["num_actions"] = inst.num_actions;
    j["horizon"] = inst.horizon;
    j["discount"] = inst.discount;
    j["stationary"] = inst.stationary;
    j["cluster_sizes"] = inst.cluster_sizes;
    const int K = inst.num_clusters, S = inst.num_states, A = inst.num_actions;
    auto tr_slice = [&](int sl) {
        json ji = json::array();
        for (int i = 0; i < K; ++i) {
            json ja = json::array();
            for (int a = 0; a < A; ++a) {
                json js = json::array();
                for (int s = 0; s < S; ++s) {
                    json row = json::array();
                    for (int s2 = 0; s2 < S; ++s2)
                        row.push_back(inst.transition(inst.stationary ? 0 : sl, i, a, s, s2));
                    js.push_back(row);
                }
                ja.push_back(js);
            }
            ji.push_back(ja);
        }
        return ji;
    };
    auto rc_slice = [&](int sl, bool want_reward) {
        json ji = json::array();
        for (int i = 0; i < K; ++i) {
            json js = json::array();
            for (int s = 0; s < S; ++s) {
                json jrow = json::array();
                for (int a = 0; a < A; ++a)
                    jrow.push_back(want_reward ? inst.reward(inst.stationary ? 0 : sl, i, s, a)
                                               : inst.cost(inst.stationary ? 0 : sl, i, s, a));
                js.push_back(jrow);
            }
            ji.push_back(js);
        }
        return ji;
    };
    auto z_slice = [&](int sl) {
        json ji = json::array();
        for (int i = 0; i < K; ++i) {
            json js = json::array();
            for (int s = 0; s < S; ++s)
                js.push_back(inst.zero_action(inst.stationary ? 0 : sl, i, s));
            ji.push_back(js);
        }
        return ji;
    };
    if (inst.stationary) {
        j["transitions"] = tr_slice(0);
        j["rewards"] = rc_slice(0, true);
        j["costs"] = rc_slice(0, false);
        j["budget"] = inst.budgets[0];
        j["zero_cost_action"] = z_slice(0);
    } else {
        json jt = json::array(), jr = json::array(), jc = json::array(), jz = json::array(),
             jb = json::array();
        for (int t = 0; t < inst.horizon - 1; ++t) jt.push_back(tr_slice(t));
        for (int t = 0; t < inst.horizon; ++t) {
            jr.push_back(rc_slice(t, true));
            jc.push_back(rc_slice(t, false));
            jz.push_back(z_slice(t));
            jb.push_back(inst.budgets[t]);
        }
        j["transitions"] = jt;
        j["rewards"] = jr;
        j["costs"] = jc;
        j["budgets"] = jb;
        j["zero_cost_action"] = jz;
    }
    return j;
}

namespace iodetail {

template <typename T>
T field(const json& j, const std::string& key) {
    if (!j.contains(key)) throw ConfigError("missing field '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("field '" + key + "': " + e.what());
    }
}

}  // namespace iodetail

/// Parses an instance document. Transition rows within the row-sum tolerance
/// are renormalized exactly to 1; rows beyond it are rejected.
inline RmabInstance instance_from_json(const json& j) {
    RmabInstance inst;
    inst.num_clusters = iodetail::field<int>(j, "num_clusters");
    inst.num_states = iodetail::field<int>(j, "num_states");
    inst.num_actions = iodetail::field<int>(j, "num_actions");
    inst.horizon = iodetail::field<int>(j, "horizon");
    inst.discount = iodetail::field<double>(j, "discount");
    inst.stationary = j.value("stationary", true);
    inst.cluster_sizes = iodetail::field<std::vector<std::int64_t>>(j, "cluster_sizes");
    const int K = inst.num_clusters, S = inst.num_states, A = inst.num_actions;
    if (K <= 0 || S <= 0 || A <= 0 || inst.horizon <= 0)
        throw ConfigError("instance dimensions must be positive");

    const int tr_slices = inst.transition_slices();
    const int st_slices = inst.stage_slices();
    inst.transitions.assign(static_cast<std::size_t>(tr_slices) * K * A * S * S, 0.0);
    inst.rewards.assign(static_cast<std::size_t>(st_slices) * K * S * A, 0.0);
    inst.costs.assign(static_cast<std::size_t>(st_slices) * K * S * A, 0.0);
    inst.zero_cost_action.assign(static_cast<std::size_t>(st_slices) * K * S, 0);

    auto load_tr = [&](const json& slice, int sl) {
        for (int i = 0; i < K; ++i)
            for (int a = 0; a < A; ++a)
                for (int s = 0; s < S; ++s) {
                    const json& row = slice.at(i).at(a).at(s);
                    if (static_cast<int>(row.size()) != S)
                        throw ConfigError("transition row has wrong length");
                    double sum = 0;
                    for (int s2 = 0; s2 < S; ++s2) sum += row.at(s2).get<double>();
                    if (std::abs(sum - 1.0) > kRowStochasticTol)
                        throw ConfigError("transition row sums to " + std::to_string(sum) +
                                          " at i=" + std::to_string(i) + ", a=" +
                                          std::to_string(a) + ", s=" + std::to_string(s));
                    for (int s2 = 0; s2 < S; ++s2) {
                        std::size_t base = ((static_cast<std::size_t>(sl) * K + i) * A + a);
                        inst.transitions[(base * S + s) * S + s2] =
                            row.at(s2).get<double>() / sum;
                    }
                }
    };
    auto load_rc = [&](const json& slice, int sl, std::vector<double>& dst) {
        for (int i = 0; i < K; ++i)
            for (int s = 0; s < S; ++s)
                for (int a = 0; a < A; ++a)
                    dst[((static_cast<std::size_t>(sl) * K + i) * S + s) * A + a] =
                        slice.at(i).at(s).at(a).get<double>();
    };
    auto load_z = [&](const json* slice, int sl) {
        for (int i = 0; i < K; ++i)
            for (int s = 0; s < S; ++s)
                inst.zero_cost_action[(static_cast<std::size_t>(sl) * K + i) * S + s] =
                    slice ? slice->at(i).at(s).get<int>() : 0;
    };

    try {
        if (inst.stationary) {
            load_tr(j.at("transitions"), 0);
            load_rc(j.at("rewards"), 0, inst.rewards);
            load_rc(j.at("costs"), 0, inst.costs);
            inst.budgets = {j.contains("budget") ? j.at("budget").get<double>()
                                                 : iodetail::field<double>(j, "budgets")};
            load_z(j.contains("zero_cost_action") ? &j.at("zero_cost_action") : nullptr, 0);
        } else {
            for (int t = 0; t < inst.horizon - 1; ++t) load_tr(j.at("transitions").at(t), t);
            for (int t = 0; t < inst.horizon; ++t) {
                load_rc(j.at("rewards").at(t), t, inst.rewards);
                load_rc(j.at("costs").at(t), t, inst.costs);
                load_z(j.contains("zero_cost_action") ? &j.at("zero_cost_action").at(t) : nullptr,
                       t);
            }
            inst.budgets = iodetail::field<std::vector<double>>(j, "budgets");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed instance tensors: ") + e.what());
    }

    auto violations = validate_instance(inst);
    if (!violations.empty()) {
        std::string msg = "instance fails validation:";
        for (const auto& v : violations) msg += "\n  - " + v;
        throw ConfigError(msg);
    }
    return inst;
}

inline StateCount start_from_json(const json& j, const RmabInstance& inst) {
    StateCount start(inst.num_clusters, inst.num_states);
    try {
        for (int i = 0; i < inst.num_clusters; ++i)
            for (int s = 0; s < inst.num_states; ++s)
                start.at(i, s) = j.at(i).at(s).get<std::int64_t>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed start state: ") + e.what());
    }
    for (int i = 0; i < inst.num_clusters; ++i)
        if (start.cluster_total(i) != inst.cluster_sizes[i])
            throw ConfigError("start state does not conserve cluster " + std::to_string(i));
    return start;
}

inline json start_to_json(const StateCount& start) {
    json j = json::array();
    for (int i = 0; i < start.num_clusters; ++i) {
        json row = json::array();
        for (int s = 0; s < start.num_states; ++s) row.push_back(start.at(i, s));
        j.push_back(row);
    }
    return j;
}

// ---------------------------------------------------------------------------
// CSV output. Every file opens with a '#' header block recording the toolkit
// version, the seed, and the convention notes that affect interpretation.
// ---------------------------------------------------------------------------

inline std::string csv_header_block(std::uint64_t seed, const std::string& extra = "") {
    std::ostringstream os;
    os << "# rmab-mfp-toolkit " << kToolkitVersion << "\n";
    os << "# seed: " << seed << "\n";
    os << "# log-convention: natural\n";
    os << "# reward-normalization: per-arm figures divide total discounted reward by N, "
          "measured from the designated start state\n";
    if (!extra.empty()) os << "# " << extra << "\n";
    return os.str();
}

inline void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open output file: " + path);
    out << contents;
}

inline std::string format_double(double v) {
    std::ostringstream os;
    os.precision(12);
    os << v;
    return os.str();
}

/// Frozen trajectory layout: one row per (t, cluster, state, action).
inline std::string record_to_csv(const SimulationRecord& rec) {
    std::ostringstream os;
    os << csv_header_block(rec.seed, "policy: " + rec.policy);
    os << "t,cluster,state,count,action,action_count,reward,cost\n";
    for (std::size_t t = 0; t < rec.steps.size(); ++t) {
        const StepRecord& step = rec.steps[t];
        for (int i = 0; i < step.state.num_clusters; ++i)
            for (int s = 0; s < step.state.num_states; ++s)
                for (int a = 0; a < step.action.num_actions; ++a)
                    os << t << "," << i << "," << s << "," << step.state.at(i, s) << "," << a
                       << "," << step.action.at(i, s, a) << ","
                       << format_double(step.reward) << "," << format_double(step.cost) << "\n";
    }
    return os.str();
}

inline json record_summary_json(const SimulationRecord& rec) {
    json j;
    j["meta"] = {{"version", kToolkitVersion},
                 {"seed", rec.seed},
                 {"log_convention", "natural"},
                 {"policy", rec.policy}};
    j["total_discounted_reward"] = rec.total_discounted_reward;
    j["steps"] = rec.steps.size();
    j["any_budget_violation"] = rec.any_budget_violation;
    j["max_budget_excess"] = rec.max_budget_excess;
    double cost = 0;
    for (const auto& s : rec.steps) cost += s.cost;
    j["total_cost"] = cost;
    return j;
}

}  // namespace rmab
