// Command-line surface of the toolkit: scenario runs, single LP solves,
// trajectory simulation, index tables, policy comparison, reference
// reproductions, and bound reports. Exit codes: 0 success, 2 configuration
// error, 3 numerical failure.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rmab/rmab.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct CommonOpts {
    std::string config_path;
    std::string example;
    std::vector<std::string> params;
    std::string policies = "mfp";
    int reps = 40;
    std::uint64_t seed = 1;
    int jobs = 0;
    std::string out_dir;
    std::string rounding = "floor";
    std::optional<int> horizon;
    std::optional<double> discount;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_policies) {
    cmd->add_option("--config", o.config_path, "scenario config JSON file");
    cmd->add_option("--example", o.example, "built-in instance generator name");
    cmd->add_option("--param", o.params, "generator parameter k=v (repeatable)");
    if (with_policies) cmd->add_option("--policies", o.policies, "comma-separated policy names");
    cmd->add_option("--reps", o.reps, "number of replications");
    cmd->add_option("--seed", o.seed, "base seed");
    cmd->add_option("--jobs", o.jobs, "worker threads (0 = all cores)");
    cmd->add_option("--out", o.out_dir, "output directory");
    cmd->add_option("--rounding", o.rounding, "floor | bucket");
    cmd->add_option_function<int>(
        "--horizon", [&o](const int& v) { o.horizon = v; }, "horizon override");
    cmd->add_option_function<double>(
        "--discount", [&o](const double& v) { o.discount = v; }, "discount override");
}

std::vector<std::string> split_csv(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

rmab::ScenarioConfig build_config(const CommonOpts& o, bool with_policies) {
    rmab::ScenarioConfig cfg;
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in) throw rmab::ConfigError("cannot open config file: " + o.config_path);
        rmab::json doc;
        try {
            in >> doc;
        } catch (const rmab::json::exception& e) {
            throw rmab::ConfigError(std::string("config is not valid JSON: ") + e.what());
        }
        cfg = rmab::config_from_json(doc);
    }
    if (!o.example.empty()) {
        rmab::GeneratorSpec spec;
        spec.name = o.example;
        for (const std::string& kv : o.params) {
            auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw rmab::ConfigError("--param expects k=v, got '" + kv + "'");
            try {
                spec.params[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
            } catch (const std::exception&) {
                throw rmab::ConfigError("--param value is not numeric in '" + kv + "'");
            }
        }
        cfg.generator = spec;
    }
    if (!cfg.generator && !cfg.inline_instance && !cfg.instance_file)
        throw rmab::ConfigError("no instance given: use --config or --example");
    if (with_policies && !o.policies.empty()) {
        cfg.policies = split_csv(o.policies);
        for (const auto& p : cfg.policies) {
            const auto& known = rmab::policy_names();
            if (std::find(known.begin(), known.end(), p) == known.end())
                throw rmab::ConfigError("unknown policy '" + p + "'");
        }
    }
    cfg.replications = o.reps;
    cfg.seed = o.seed;
    cfg.jobs = o.jobs;
    if (!o.out_dir.empty()) cfg.output_dir = o.out_dir;
    if (o.rounding == "floor")
        cfg.rounding = rmab::Rounding::Floor;
    else if (o.rounding == "bucket")
        cfg.rounding = rmab::Rounding::Bucket;
    else
        throw rmab::ConfigError("--rounding must be floor or bucket");
    if (o.horizon) cfg.horizon_override = o.horizon;
    if (o.discount) cfg.discount_override = o.discount;
    return cfg;
}

void write_or_print(const std::string& out_dir, const std::string& filename,
                    const std::string& contents) {
    if (out_dir.empty()) {
        std::cout << contents;
        return;
    }
    std::filesystem::create_directories(out_dir);
    std::string path = (std::filesystem::path(out_dir) / filename).string();
    rmab::write_file(path, contents);
    rmab::log(rmab::LogLevel::Info, "wrote " + path);
    std::cout << path << "\n";
}

int cmd_run(const CommonOpts& o) {
    rmab::ScenarioConfig cfg = build_config(o, true);
    rmab::ScenarioResult res = rmab::run_scenario(cfg);
    if (cfg.output_dir.empty()) std::cout << res.summary_csv;
    for (const auto& f : res.files) rmab::log(rmab::LogLevel::Info, "wrote " + f);
    return kExitOk;
}

int cmd_solve(const CommonOpts& o, bool dump) {
    rmab::ScenarioConfig cfg = build_config(o, false);
    rmab::GeneratedInstance gi = rmab::materialize_instance(cfg);
    if (dump) {
        rmab::LinearProgram lp = rmab::build_meanfield_lp(gi.instance, gi.start, 0);
        write_or_print(cfg.output_dir, "meanfield.lp", rmab::dump_lp(lp));
        return kExitOk;
    }
    auto [value, plan] = rmab::mean_field_value(gi.instance, gi.start, 0);
    std::ostringstream os;
    os << rmab::csv_header_block(cfg.seed, "fluid plan for steps [0, horizon)");
    os << "t,cluster,state,mu,action,alpha\n";
    for (int t = 0; t < gi.instance.horizon; ++t)
        for (int i = 0; i < gi.instance.num_clusters; ++i)
            for (int s = 0; s < gi.instance.num_states; ++s)
                for (int a = 0; a < gi.instance.num_actions; ++a)
                    os << t << "," << i << "," << s << ","
                       << rmab::format_double(plan.mu_at(t).at(i, s)) << "," << a << ","
                       << rmab::format_double(plan.alpha_at(t).at(i, s, a)) << "\n";
    write_or_print(cfg.output_dir, "fluid_plan.csv", os.str());
    std::cout << "objective," << rmab::format_double(value) << "\n";
    std::cout << "max_fractionality," << rmab::format_double(plan.max_fractionality) << "\n";
    return kExitOk;
}

int cmd_simulate(const CommonOpts& o) {
    rmab::ScenarioConfig cfg = build_config(o, true);
    if (cfg.policies.size() != 1)
        throw rmab::ConfigError("simulate expects exactly one policy");
    rmab::GeneratedInstance gi = rmab::materialize_instance(cfg);
    rmab::PolicyFactory factory =
        rmab::make_policy_factory(cfg.policies[0], gi.instance, cfg.rounding);
    for (int r = 0; r < cfg.replications; ++r) {
        auto policy = factory();
        rmab::SimulationRecord rec = rmab::simulate_trajectory(
            gi.instance, *policy, gi.start, cfg.seed + static_cast<std::uint64_t>(r));
        write_or_print(cfg.output_dir, "trajectory_rep" + std::to_string(r) + ".csv",
                       rmab::record_to_csv(rec));
        if (cfg.output_dir.empty())
            std::cout << rmab::record_summary_json(rec).dump(2) << "\n";
    }
    return kExitOk;
}

int cmd_index(const CommonOpts& o, bool curves) {
    rmab::ScenarioConfig cfg = build_config(o, false);
    rmab::GeneratedInstance gi = rmab::materialize_instance(cfg);
    rmab::QMode mode =
        gi.instance.discount < 1.0 ? rmab::QMode::Discounted : rmab::QMode::Average;
    rmab::IndexTable table = rmab::build_index_table(gi.instance, mode);
    std::ostringstream os;
    os << rmab::csv_header_block(cfg.seed);
    os << "cluster,state,index,verdict,crossings\n";
    for (int i = 0; i < gi.instance.num_clusters; ++i)
        for (int s = 0; s < gi.instance.num_states; ++s) {
            const rmab::IndexEntry& e = table.at(i, s);
            // Six significant digits: indices are bisection roots accurate to
            // ~1e-8, so the table shows clean values like 0.9 or 0.81.
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.6g", e.index);
            os << i << "," << s << "," << buf << "," << rmab::to_string(e.verdict) << ","
               << e.crossings << "\n";
        }
    write_or_print(cfg.output_dir, "index_table.csv", os.str());
    if (curves) {
        for (int i = 0; i < gi.instance.num_clusters; ++i) {
            rmab::ArmMdp m = rmab::arm_mdp(gi.instance, i);
            rmab::ScanResult scan =
                rmab::indexability_scan(m, mode, rmab::default_scan_grid(m, mode));
            write_or_print(cfg.output_dir, "index_curves_cluster" + std::to_string(i) + ".csv",
                           rmab::curves_to_csv(scan, cfg.seed, i));
        }
    }
    return kExitOk;
}

int cmd_compare(const CommonOpts& o) { return cmd_run(o); }

int cmd_bounds(const CommonOpts& o, std::optional<double> delta, bool as_json) {
    rmab::ScenarioConfig cfg = build_config(o, false);
    rmab::GeneratedInstance gi = rmab::materialize_instance(cfg);
    std::vector<rmab::BoundReport> reports;
    reports.push_back(rmab::finite_horizon_gap(gi.instance));
    if (delta) reports.push_back(rmab::finite_horizon_gap(gi.instance, delta));
    if (gi.instance.discount < 1.0) {
        reports.push_back(rmab::discounted_gap(gi.instance));
        if (delta) reports.push_back(rmab::discounted_gap(gi.instance, delta));
        int trunc = rmab::truncation_horizon(gi.instance, delta);
        rmab::BoundReport tr;
        tr.name = delta ? "truncation-horizon-hp" : "truncation-horizon";
        tr.total_arms = gi.instance.total_arms();
        tr.clusters = gi.instance.num_clusters;
        tr.states = gi.instance.num_states;
        tr.actions = gi.instance.num_actions;
        tr.horizon = gi.instance.horizon;
        tr.discount = gi.instance.discount;
        tr.delta = delta;
        tr.reward_max = gi.instance.reward_max();
        tr.value = trunc;
        reports.push_back(tr);
        rmab::BoundReport tail = tr;
        tail.name = "truncation-tail";
        tail.value = rmab::truncation_tail(gi.instance, trunc);
        reports.push_back(tail);
    }
    if (as_json) {
        rmab::json arr = rmab::json::array();
        for (const auto& r : reports) {
            rmab::json jr = {{"bound", r.name},     {"N", r.total_arms},
                             {"K", r.clusters},     {"states", r.states},
                             {"actions", r.actions}, {"horizon", r.horizon},
                             {"discount", r.discount}, {"reward_max", r.reward_max},
                             {"value", r.value}};
            if (r.delta) jr["delta"] = *r.delta;
            arr.push_back(jr);
        }
        rmab::json doc = {{"meta",
                           {{"version", rmab::kToolkitVersion},
                            {"seed", cfg.seed},
                            {"log_convention", "natural"}}},
                          {"bounds", arr}};
        write_or_print(cfg.output_dir, "bounds.json", doc.dump(2) + "\n");
        return kExitOk;
    }
    write_or_print(cfg.output_dir, "bounds.csv", rmab::bounds_to_csv(reports, cfg.seed));
    return kExitOk;
}

int cmd_reproduce(const CommonOpts& o, int table, int figure) {
    if ((table == 0) == (figure == 0))
        throw rmab::ConfigError("reproduce needs exactly one of --table or --figure");
    if (table == 2) {
        write_or_print(o.out_dir, "table2.csv", rmab::reproduce_table2_csv(o.seed));
    } else if (table == 3) {
        write_or_print(o.out_dir, "table3.csv",
                       rmab::reproduce_table3_csv(o.seed, 100, o.reps, o.jobs));
    } else if (figure == 4) {
        write_or_print(o.out_dir, "figure4.csv", rmab::reproduce_figure4_csv(o.seed));
    } else {
        throw rmab::ConfigError("supported reproductions: --table 2, --table 3, --figure 4");
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Restless-bandit planning toolkit: fluid LP planner, Whittle indices, simulator"};
    app.require_subcommand(1);

    CommonOpts run_o, solve_o, sim_o, index_o, compare_o, bounds_o, repro_o;
    compare_o.policies = "mfp,whittle,random";
    bool solve_dump = false;
    bool index_curves = false;
    bool bounds_json = false;
    double bounds_delta = -1;
    int repro_table = 0, repro_figure = 0;

    CLI::App* run = app.add_subcommand("run", "run a scenario config end to end");
    add_common(run, run_o, true);
    CLI::App* solve = app.add_subcommand("solve", "solve the fluid LP only");
    add_common(solve, solve_o, false);
    solve->add_flag("--dump-lp", solve_dump, "emit the LP in text form instead of solving");
    CLI::App* simulate = app.add_subcommand("simulate", "simulate one policy, write trajectories");
    add_common(simulate, sim_o, true);
    CLI::App* index = app.add_subcommand("index", "compute Whittle indices and verdicts");
    add_common(index, index_o, false);
    index->add_flag("--curves", index_curves, "also emit per-cluster q-gap curves");
    CLI::App* compare = app.add_subcommand("compare", "evaluate several policies side by side");
    add_common(compare, compare_o, true);
    CLI::App* bounds = app.add_subcommand("bounds", "print the closed-form bound report");
    add_common(bounds, bounds_o, false);
    bounds->add_option("--delta", bounds_delta, "failure probability for the high-probability forms");
    bounds->add_flag("--json", bounds_json, "emit JSON instead of CSV");
    CLI::App* reproduce = app.add_subcommand("reproduce", "regenerate reference tables/figures");
    add_common(reproduce, repro_o, false);
    reproduce->add_option("--table", repro_table, "reference table number (2 or 3)");
    reproduce->add_option("--figure", repro_figure, "reference figure number (4)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return kExitConfig;
    }

    try {
        if (run->parsed()) return cmd_run(run_o);
        if (solve->parsed()) return cmd_solve(solve_o, solve_dump);
        if (simulate->parsed()) return cmd_simulate(sim_o);
        if (index->parsed()) return cmd_index(index_o, index_curves);
        if (compare->parsed()) return cmd_compare(compare_o);
        if (bounds->parsed())
            return cmd_bounds(bounds_o,
                              bounds_delta > 0 ? std::optional<double>(bounds_delta)
                                               : std::nullopt,
                              bounds_json);
        if (reproduce->parsed()) return cmd_reproduce(repro_o, repro_table, repro_figure);
    } catch (const rmab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const rmab::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitOk;
}
