#include "lsvi/suites.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kSuiteFailure = 2;

struct Overrides {
    std::optional<int> seed_count;
    std::optional<std::string> out;
    std::optional<double> c_prime;
    std::optional<double> l1;
    std::optional<std::string> grid_l1;
    std::optional<double> zeta;
    std::optional<int> m_max;
    std::optional<double> delta;
    std::optional<int> threads;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--seed-count", o.seed_count, "Use seeds 0..N-1");
    cmd->add_option("--out", o.out, "Output directory");
    cmd->add_option("--c-prime", o.c_prime, "Confidence-radius constant c'");
    cmd->add_option("--l1", o.l1, "Surprise bound L1");
    cmd->add_option("--grid-l1", o.grid_l1, "Grid-search L1 over min,max");
    cmd->add_option("--zeta", o.zeta, "Misspecification level used in beta");
    cmd->add_option("--m-max", o.m_max, "Number of epochs M (K = 2^M - 1)");
    cmd->add_option("--delta", o.delta, "Failure probability");
    cmd->add_option("--threads", o.threads, "Worker threads over seeds");
}

lsvi::ExperimentConfig load(const std::string& path, const Overrides& o) {
    auto cfg = lsvi::parse_config(path);
    if (o.seed_count) {
        if (*o.seed_count < 1)
            throw lsvi::ConfigError("invalid value for 'seed-count': must be positive");
        cfg.seeds.clear();
        for (int i = 0; i < *o.seed_count; ++i)
            cfg.seeds.push_back(static_cast<std::uint64_t>(i));
    }
    if (o.out)
        cfg.output_dir = *o.out;
    if (o.c_prime)
        cfg.algorithm.c_prime = *o.c_prime;
    if (o.l1)
        cfg.algorithm.l1 = *o.l1;
    if (o.grid_l1) {
        const auto comma = o.grid_l1->find(',');
        if (comma == std::string::npos)
            throw lsvi::ConfigError("invalid value for 'grid-l1': expected min,max");
        try {
            cfg.algorithm.grid_l1 = std::make_pair(std::stod(o.grid_l1->substr(0, comma)),
                                                   std::stod(o.grid_l1->substr(comma + 1)));
        } catch (const std::exception&) {
            throw lsvi::ConfigError("invalid value for 'grid-l1': expected min,max");
        }
    }
    if (o.zeta)
        cfg.algorithm.zeta = *o.zeta;
    if (o.m_max)
        cfg.algorithm.m_max = *o.m_max;
    if (o.delta)
        cfg.algorithm.delta = *o.delta;
    if (o.threads)
        cfg.threads = *o.threads;
    lsvi::validate(cfg);
    return cfg;
}

int cmd_run(const std::string& path, const Overrides& o) {
    const auto cfg = load(path, o);
    const auto result = lsvi::run_experiment(cfg);
    const auto manifest = lsvi::emit_outputs(result, cfg.output_dir);
    for (const auto& f : manifest.files)
        std::cout << f.string() << "\n";
    for (const auto& e : manifest.seed_errors)
        std::cerr << "error: " << e << "\n";
    for (const auto& s : result.seeds)
        if (!s.error)
            std::cout << "seed " << s.seed << ": final regret " << s.report.final_regret << ", slope "
                      << (s.report.slope ? std::to_string(*s.report.slope) : "undefined") << "\n";
    return manifest.seed_errors.empty() ? kOk : kSuiteFailure;
}

int cmd_analyze(const std::string& dir) {
    const auto recomputed = lsvi::analyze_run_dir(dir);
    std::cout << recomputed.dump(2) << "\n";
    std::ifstream in(std::filesystem::path(dir) / "summary.json");
    if (!in) {
        std::cerr << "no summary.json in '" << dir << "'\n";
        return kSuiteFailure;
    }
    auto stored = lsvi::Json::parse(in);
    stored.erase("seed_errors");
    if (stored != recomputed) {
        std::cerr << "summary.json does not match the values recomputed from the CSVs\n";
        return kSuiteFailure;
    }
    std::cerr << "summary.json matches the CSVs\n";
    return kOk;
}

int cmd_verify(const std::string& name, const std::string& scratch) {
    std::filesystem::create_directories(scratch);
    bool found = false, all = true;
    for (const auto& entry : lsvi::suites::registry(scratch)) {
        if (name != "all" && name != entry.name)
            continue;
        found = true;
        const auto outcome = entry.run();
        all &= outcome.passed;
        std::cout << lsvi::suites::format(outcome) << "\n";
    }
    if (!found) {
        std::cerr << "unknown suite '" << name << "'; available:";
        for (const auto& entry : lsvi::suites::registry(scratch))
            std::cerr << " " << entry.name;
        std::cerr << " all\n";
        return kConfigError;
    }
    return all ? kOk : kSuiteFailure;
}

int cmd_estimate_l1(const std::string& path, const Overrides& o) {
    const auto cfg = load(path, o);
    const auto env = lsvi::make_environment(cfg.environment);
    const int S = env.mdp.n_states(), A = env.mdp.n_actions(), H = env.mdp.horizon();
    lsvi::LinearMDP view;
    if (env.linear) {
        view = *env.linear;
        view.tabular = env.mdp;
    } else {
        view.dim = S * A;
        view.features = std::make_shared<const lsvi::FeatureMap>(lsvi::FeatureMap::one_hot(S, A));
        view.tabular = env.mdp;
    }
    lsvi::Rng rng(lsvi::derive_seed(cfg.environment.seed, 11));
    const auto policies = lsvi::probe_policies(S, A, H, 50, rng);
    lsvi::Json out;
    const bool sparse = cfg.function_class.kind == "sparse_linear";
    const auto est = sparse ? lsvi::surprise_bound_sparse(view, policies, *cfg.function_class.sparsity)
                            : lsvi::surprise_bound_linear(view, policies);
    out["estimate"] = lsvi::to_json(est);
    const auto cls = lsvi::make_class(cfg.function_class, env);
    out["empirical_ratio"] = std::visit(
        [&](const auto& c) { return lsvi::empirical_surprise_ratio(c, env.mdp, policies, 10000, rng); }, cls);
    out["note"] = "upper bound certified over the uniform policy and 50 random deterministic policies only";
    std::cout << out.dump(2) << "\n";
    return kOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Optimistic LSVI with subsampled width bonuses"};
    app.require_subcommand(1);
    Overrides overrides;
    std::string config, run_dir, suite, scratch = (std::filesystem::temp_directory_path() / "lsvi_verify").string();

    auto* run = app.add_subcommand("run", "Run an experiment from a JSON config");
    run->add_option("config", config, "Config file")->required();
    add_overrides(run, overrides);

    auto* analyze = app.add_subcommand("analyze", "Recompute a run directory's summary from its CSVs");
    analyze->add_option("run_dir", run_dir, "Run directory")->required();

    auto* verify = app.add_subcommand("verify", "Run a property suite (or 'all')");
    verify->add_option("suite", suite, "Suite name")->required();
    verify->add_option("--scratch", scratch, "Directory for suite artifacts");

    auto* estimate = app.add_subcommand("estimate-l1", "Estimate the surprise bound of a config's environment");
    estimate->add_option("config", config, "Config file")->required();
    add_overrides(estimate, overrides);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfigError;
    }
    try {
        if (*run)
            return cmd_run(config, overrides);
        if (*analyze)
            return cmd_analyze(run_dir);
        if (*verify)
            return cmd_verify(suite, scratch);
        return cmd_estimate_l1(config, overrides);
    } catch (const lsvi::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kConfigError;
    }
}
