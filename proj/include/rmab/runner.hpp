#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rmab/bounds.hpp"
#include "rmab/examples.hpp"
#include "rmab/io.hpp"
#include "rmab/meanfield.hpp"
#include "rmab/policy.hpp"
#include "rmab/sim.hpp"
#include "rmab/whittle.hpp"

namespace rmab {

// ---------------------------------------------------------------------------
// Generator registry.
// ---------------------------------------------------------------------------

struct GeneratorSpec {
    std::string name;
    std::map<std::string, double> params;  // ordered: deterministic iteration

    double get(const std::string& key, double fallback) const {
        auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    }
};

inline const std::vector<std::string>& generator_names() {
    static const std::vector<std::string> names = {"example1", "example2", "example3",
                                                   "lowerbound", "synthetic"};
    return names;
}

inline GeneratedInstance make_example(const GeneratorSpec& spec) {
    const auto& p = spec.params;
    for (const auto& [key, value] : p) {
        (void)value;
        static const std::vector<std::string> known = {
            "n", "epsilon", "gamma", "T", "dummy", "eta_s", "eta_r", "eta_d",
            "delta", "K", "states", "actions", "N", "seed"};
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw ConfigError("unknown generator parameter '" + key + "'");
    }
    if (spec.name == "example1")
        return example1(static_cast<std::int64_t>(spec.get("n", 20)), spec.get("epsilon", 0.1),
                        spec.get("gamma", 0.9), static_cast<int>(spec.get("T", 50)));
    if (spec.name == "example2")
        return example2(static_cast<std::int64_t>(spec.get("n", 20)), spec.get("epsilon", 0.1),
                        spec.get("gamma", 0.9), static_cast<int>(spec.get("T", 50)),
                        spec.get("dummy", 0) != 0);
    if (spec.name == "example3")
        return example3(spec.get("eta_s", 0.05), spec.get("eta_r", 0.1), spec.get("eta_d", 0.1),
                        spec.get("epsilon", 0.01), static_cast<std::int64_t>(spec.get("n", 100)),
                        spec.get("gamma", 0.95), static_cast<int>(spec.get("T", 50)));
    if (spec.name == "lowerbound")
        return lowerbound_example(static_cast<std::int64_t>(spec.get("n", 600)),
                                  static_cast<int>(spec.get("T", 13)), spec.get("delta", 1.0));
    if (spec.name == "synthetic")
        return synthetic_clustered(static_cast<int>(spec.get("K", 2)),
                                   static_cast<int>(spec.get("states", 3)),
                                   static_cast<int>(spec.get("actions", 2)),
                                   static_cast<std::int64_t>(spec.get("N", 100)),
                                   static_cast<int>(spec.get("T", 10)),
                                   static_cast<std::uint64_t>(spec.get("seed", 1)),
                                   spec.get("gamma", 1.0));
    throw ConfigError("unknown example generator '" + spec.name + "'");
}

// ---------------------------------------------------------------------------
// Policy registry.
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& policy_names() {
    static const std::vector<std::string> names = {"mfp",    "mfp-oneshot",    "whittle",
                                                   "whittle-finite", "random", "nobody"};
    return names;
}

/// Builds a per-replication policy factory. Index tables and per-step
/// priorities are computed once here and shared read-only across workers.
inline PolicyFactory make_policy_factory(const std::string& name, const RmabInstance& inst,
                                         Rounding rounding) {
    if (name == "mfp")
        return [rounding] { return std::make_unique<MfpPolicy>(rounding); };
    if (name == "mfp-oneshot")
        return [] { return std::make_unique<OneShotMfpPolicy>(); };
    if (name == "whittle") {
        QMode mode = inst.discount < 1.0 ? QMode::Discounted : QMode::Average;
        auto table = std::make_shared<const IndexTable>(build_index_table(inst, mode));
        return [table] { return std::make_unique<WhittlePolicy>(table); };
    }
    if (name == "whittle-finite") {
        auto prios = std::make_shared<const std::vector<std::vector<double>>>(
            finite_whittle_priorities(inst));
        return [prios] { return std::make_unique<FiniteWhittlePolicy>(prios); };
    }
    if (name == "random")
        return [] { return std::make_unique<RandomPolicy>(); };
    if (name == "nobody")
        return [] { return std::make_unique<NobodyPolicy>(); };
    throw ConfigError("unknown policy '" + name + "'");
}

// ---------------------------------------------------------------------------
// Scenario configuration and orchestration.
// ---------------------------------------------------------------------------

struct ScenarioConfig {
    std::optional<GeneratorSpec> generator;
    std::optional<json> inline_instance;      // full instance document (+ optional "start")
    std::optional<std::string> instance_file;
    std::vector<std::string> policies = {"mfp"};
    int replications = 40;
    std::uint64_t seed = 1;
    std::optional<int> horizon_override;
    std::optional<double> discount_override;
    Rounding rounding = Rounding::Floor;
    std::string output_dir;
    bool write_trajectories = false;
    bool emit_bounds = false;
    bool emit_index_curves = false;
    double bounds_delta = 0.05;
    int jobs = 1;
};

inline ScenarioConfig config_from_json(const json& j) {
    ScenarioConfig cfg;
    std::vector<std::string> errors;
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    static const std::vector<std::string> known = {
        "instance",     "policies", "replications", "seed",   "horizon",
        "discount",     "rounding", "output_dir",   "write_trajectories",
        "bounds",       "index_curves", "bounds_delta", "jobs"};
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(known.begin(), known.end(), it.key()) == known.end())
            errors.push_back("unknown config field '" + it.key() + "'");

    if (!j.contains("instance")) {
        errors.push_back("missing field 'instance'");
    } else {
        const json& src = j.at("instance");
        if (src.contains("generator")) {
            GeneratorSpec spec;
            spec.name = src.at("generator").get<std::string>();
            if (src.contains("params")) {
                if (!src.at("params").is_object())
                    errors.push_back("instance.params must be an object of numbers");
                else
                    for (auto it = src.at("params").begin(); it != src.at("params").end(); ++it) {
                        if (!it.value().is_number())
                            errors.push_back("instance.params." + it.key() + " must be a number");
                        else
                            spec.params[it.key()] = it.value().get<double>();
                    }
            }
            cfg.generator = spec;
        } else if (src.contains("file")) {
            cfg.instance_file = src.at("file").get<std::string>();
        } else if (src.contains("inline")) {
            cfg.inline_instance = src.at("inline");
        } else {
            errors.push_back("instance must contain 'generator', 'file', or 'inline'");
        }
    }
    if (j.contains("policies")) {
        if (!j.at("policies").is_array())
            errors.push_back("policies must be an array of policy names");
        else
            cfg.policies = j.at("policies").get<std::vector<std::string>>();
    }
    for (const auto& p : cfg.policies) {
        const auto& known_policies = policy_names();
        if (std::find(known_policies.begin(), known_policies.end(), p) == known_policies.end())
            errors.push_back("unknown policy '" + p + "'");
    }
    if (j.contains("replications")) cfg.replications = j.at("replications").get<int>();
    if (cfg.replications < 1) errors.push_back("replications must be >= 1");
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("horizon")) cfg.horizon_override = j.at("horizon").get<int>();
    if (j.contains("discount")) cfg.discount_override = j.at("discount").get<double>();
    if (j.contains("rounding")) {
        std::string r = j.at("rounding").get<std::string>();
        if (r == "floor")
            cfg.rounding = Rounding::Floor;
        else if (r == "bucket")
            cfg.rounding = Rounding::Bucket;
        else
            errors.push_back("rounding must be 'floor' or 'bucket'");
    }
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("write_trajectories"))
        cfg.write_trajectories = j.at("write_trajectories").get<bool>();
    if (j.contains("bounds")) cfg.emit_bounds = j.at("bounds").get<bool>();
    if (j.contains("index_curves")) cfg.emit_index_curves = j.at("index_curves").get<bool>();
    if (j.contains("bounds_delta")) cfg.bounds_delta = j.at("bounds_delta").get<double>();
    if (j.contains("jobs")) cfg.jobs = j.at("jobs").get<int>();
    if (!errors.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& e : errors) msg += "\n  - " + e;
        throw ConfigError(msg);
    }
    return cfg;
}

inline GeneratedInstance materialize_instance(const ScenarioConfig& cfg) {
    GeneratedInstance gi;
    if (cfg.generator) {
        gi = make_example(*cfg.generator);
    } else if (cfg.instance_file || cfg.inline_instance) {
        json doc;
        if (cfg.instance_file) {
            std::ifstream in(*cfg.instance_file);
            if (!in) throw ConfigError("cannot open instance file: " + *cfg.instance_file);
            try {
                in >> doc;
            } catch (const json::exception& e) {
                throw ConfigError(std::string("instance file is not valid JSON: ") + e.what());
            }
        } else {
            doc = *cfg.inline_instance;
        }
        gi.instance = instance_from_json(doc);
        if (doc.contains("start")) {
            gi.start = start_from_json(doc.at("start"), gi.instance);
        } else {
            // Default start: all arms of each cluster in state 0.
            gi.start = StateCount(gi.instance.num_clusters, gi.instance.num_states);
            for (int i = 0; i < gi.instance.num_clusters; ++i)
                gi.start.at(i, 0) = gi.instance.cluster_sizes[i];
        }
    } else {
        throw ConfigError("no instance source configured");
    }
    if (cfg.horizon_override) {
        if (!gi.instance.stationary)
            throw ConfigError("horizon override requires a stationary instance");
        if (*cfg.horizon_override < 1) throw ConfigError("horizon override must be >= 1");
        gi.instance.horizon = *cfg.horizon_override;
    }
    if (cfg.discount_override) gi.instance.discount = *cfg.discount_override;
    auto violations = validate_instance(gi.instance);
    if (!violations.empty()) {
        std::string msg = "instance fails validation:";
        for (const auto& v : violations) msg += "\n  - " + v;
        throw ConfigError(msg);
    }
    return gi;
}

struct ScenarioResult {
    std::vector<EvalSummary> summaries;
    std::vector<std::string> files;
    std::string summary_csv;
};

inline std::string summaries_to_csv(const std::vector<EvalSummary>& summaries,
                                    std::uint64_t seed, std::int64_t total_arms) {
    std::ostringstream os;
    os << csv_header_block(seed);
    os << "policy,replications,mean_reward,stddev,ci95_halfwidth,mean_step_cost,"
          "per_arm_mean_reward,delta_vs_random,budget_violations\n";
    const EvalSummary* random_summary = nullptr;
    for (const auto& s : summaries)
        if (s.policy == "random") random_summary = &s;
    for (const auto& s : summaries) {
        os << s.policy << "," << s.replications << "," << format_double(s.mean_reward) << ","
           << format_double(s.stddev) << "," << format_double(s.ci95_halfwidth) << ","
           << format_double(s.mean_step_cost) << ","
           << format_double(s.mean_reward / static_cast<double>(total_arms)) << ",";
        if (random_summary)
            os << format_double(s.mean_reward - random_summary->mean_reward);
        os << "," << (s.any_budget_violation ? "flagged" : "clean") << "\n";
    }
    return os.str();
}

inline std::string curves_to_csv(const ScanResult& scan, std::uint64_t seed, int cluster) {
    std::ostringstream os;
    os << csv_header_block(seed, "indexability curves for cluster " + std::to_string(cluster));
    os << "state,lambda,q_gap\n";
    for (const auto& curve : scan.curves)
        for (std::size_t k = 0; k < curve.lambdas.size(); ++k)
            os << curve.state << "," << format_double(curve.lambdas[k]) << ","
               << format_double(curve.gaps[k]) << "\n";
    return os.str();
}

inline std::string bounds_to_csv(const std::vector<BoundReport>& reports, std::uint64_t seed) {
    std::ostringstream os;
    os << csv_header_block(seed);
    os << "bound,N,K,states,actions,horizon,discount,delta,reward_max,value\n";
    for (const auto& r : reports) {
        os << r.name << "," << r.total_arms << "," << r.clusters << "," << r.states << ","
           << r.actions << "," << r.horizon << "," << format_double(r.discount) << ",";
        if (r.delta) os << format_double(*r.delta);
        os << "," << format_double(r.reward_max) << "," << format_double(r.value) << "\n";
    }
    return os.str();
}

/// Runs every configured policy on the scenario's instance and writes the
/// experiment bundle (summary, optional trajectories, bounds, index curves)
/// under output_dir. Identical config and seed produce byte-identical files.
inline ScenarioResult run_scenario(const ScenarioConfig& cfg) {
    GeneratedInstance gi = materialize_instance(cfg);
    const RmabInstance& inst = gi.instance;

    ScenarioResult result;
    for (const auto& name : cfg.policies) {
        PolicyFactory factory = make_policy_factory(name, inst, cfg.rounding);
        EvalSummary summary =
            evaluate_policy(inst, factory, gi.start, cfg.replications, cfg.seed, cfg.jobs);
        result.summaries.push_back(std::move(summary));
    }
    result.summary_csv = summaries_to_csv(result.summaries, cfg.seed, inst.total_arms());

    if (!cfg.output_dir.empty()) {
        std::filesystem::create_directories(cfg.output_dir);
        auto emit = [&](const std::string& name, const std::string& contents) {
            std::string path = (std::filesystem::path(cfg.output_dir) / name).string();
            write_file(path, contents);
            result.files.push_back(path);
        };
        emit("summary.csv", result.summary_csv);
        if (cfg.write_trajectories) {
            for (const auto& name : cfg.policies) {
                PolicyFactory factory = make_policy_factory(name, inst, cfg.rounding);
                for (int r = 0; r < cfg.replications; ++r) {
                    auto policy = factory();
                    SimulationRecord rec = simulate_trajectory(
                        inst, *policy, gi.start, cfg.seed + static_cast<std::uint64_t>(r));
                    emit("trajectory_" + name + "_rep" + std::to_string(r) + ".csv",
                         record_to_csv(rec));
                }
            }
        }
        if (cfg.emit_bounds) {
            std::vector<BoundReport> reports;
            reports.push_back(finite_horizon_gap(inst));
            reports.push_back(finite_horizon_gap(inst, cfg.bounds_delta));
            if (inst.discount < 1.0) {
                reports.push_back(discounted_gap(inst));
                reports.push_back(discounted_gap(inst, cfg.bounds_delta));
            }
            emit("bounds.csv", bounds_to_csv(reports, cfg.seed));
        }
        if (cfg.emit_index_curves) {
            QMode mode = inst.discount < 1.0 ? QMode::Discounted : QMode::Average;
            for (int i = 0; i < inst.num_clusters; ++i) {
                ArmMdp m = arm_mdp(inst, i);
                ScanResult scan = indexability_scan(m, mode, default_scan_grid(m, mode));
                emit("index_curves_cluster" + std::to_string(i) + ".csv",
                     curves_to_csv(scan, cfg.seed, i));
            }
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Reproduction protocols: generated artifacts next to their reference values.
// ---------------------------------------------------------------------------

/// Transition probabilities of the two-type construction compared cell by
/// cell against the reference table the construction is defined by.
inline std::string reproduce_table2_csv(std::uint64_t seed) {
    GeneratedInstance gi = example1(1, 0.1, 0.9, 4);
    struct Ref {
        int cluster, action, from, to;
        double p;
    };
    using namespace ex1;
    const std::vector<Ref> reference = {
        {kReliable, 1, kStart, kEngaged, 1.0},  {kReliable, 1, kEngaged, kEngaged, 1.0},
        {kReliable, 1, kDropout, kDropout, 1.0}, {kGreedy, 1, kStart, kEngaged, 1.0},
        {kGreedy, 1, kEngaged, kDropout, 1.0},  {kGreedy, 1, kDropout, kDropout, 1.0},
        {kReliable, 0, kStart, kDropout, 1.0},  {kReliable, 0, kEngaged, kDropout, 1.0},
        {kReliable, 0, kDropout, kDropout, 1.0}, {kGreedy, 0, kStart, kDropout, 1.0},
        {kGreedy, 0, kEngaged, kDropout, 1.0},  {kGreedy, 0, kDropout, kDropout, 1.0},
    };
    std::ostringstream os;
    os << csv_header_block(seed, "transition table of the two-type construction");
    os << "cluster,action,from,to,generated,reference,deviation\n";
    for (const auto& ref : reference) {
        double got = gi.instance.transition(0, ref.cluster, ref.action, ref.from, ref.to);
        os << ref.cluster << "," << ref.action << "," << ref.from << "," << ref.to << ","
           << format_double(got) << "," << format_double(ref.p) << ","
           << format_double(std::abs(got - ref.p)) << "\n";
    }
    return os.str();
}

/// Reward comparison of the Whittle policy against the fixed alternate
/// priority on the ergodic five-state construction, in the three reference
/// settings. Rewards are reported per arm from the designated start state
/// (the reference scale is assumed, not asserted).
inline std::string reproduce_table3_csv(std::uint64_t seed, std::int64_t n = 100,
                                        int replications = 40, int jobs = 1) {
    struct Setting {
        std::string label;
        double gamma;
        int horizon;
        bool finite;
        double ref_whittle;
        double ref_alternate;  // reference reports a lower bound for the optimum
    };
    const std::vector<Setting> settings = {
        {"discounted-0.95", 0.95, 240, false, 7.33, 8.65},
        {"discounted-0.80", 0.80, 90, false, 1.17, 1.86},
        {"finite-horizon-20", 1.0, 20, true, 7.41, 9.11},
    };
    std::ostringstream os;
    os << csv_header_block(seed,
                           "whittle vs alternate priority; reference magnitudes assume the "
                           "per-arm normalization noted above");
    os << "setting,policy,mean_reward_per_arm,ci95_per_arm,reference,deviation\n";
    for (const auto& st : settings) {
        GeneratedInstance gi = example3(0.05, 0.1, 0.1, 0.01, n, st.gamma == 1.0 ? 1.0 : st.gamma,
                                        st.horizon);
        const double arms = static_cast<double>(gi.instance.total_arms());
        PolicyFactory whittle_factory =
            st.finite ? make_policy_factory("whittle-finite", gi.instance, Rounding::Floor)
                      : make_policy_factory("whittle", gi.instance, Rounding::Floor);
        EvalSummary w =
            evaluate_policy(gi.instance, whittle_factory, gi.start, replications, seed, jobs);
        auto prio = example3_alternate_priority();
        PolicyFactory alt_factory = [prio] {
            return std::make_unique<PriorityPolicy>("alternate", prio);
        };
        EvalSummary alt =
            evaluate_policy(gi.instance, alt_factory, gi.start, replications, seed, jobs);
        auto row = [&](const EvalSummary& s, double ref) {
            double per_arm = s.mean_reward / arms;
            os << st.label << "," << s.policy << "," << format_double(per_arm) << ","
               << format_double(s.ci95_halfwidth / arms) << "," << format_double(ref) << ","
               << format_double(per_arm - ref) << "\n";
        };
        row(w, st.ref_whittle);
        row(alt, st.ref_alternate);
    }
    return os.str();
}

/// Indexability curves of the ergodic five-state construction under the
/// average-reward criterion.
inline std::string reproduce_figure4_csv(std::uint64_t seed) {
    GeneratedInstance gi = example3();
    ArmMdp m = arm_mdp(gi.instance, 0);
    ScanResult scan = indexability_scan(m, QMode::Average, default_scan_grid(m, QMode::Average));
    return curves_to_csv(scan, seed, 0);
}

}  // namespace rmab
