#pragma once

#include "lsvi/serialization.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>
#include <variant>

namespace lsvi {

inline constexpr const char* kVersion = "lsvi 1.0.0";

/// Configuration problems (bad keys, bad values, unreadable files); CLI exit code 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EnvironmentSpec {
    std::string kind = "tabular"; // tabular | linear
    int n_states = 5;
    int n_actions = 3;
    int horizon = 4;
    double min_prob = 0.05;
    int dim = 3;
    std::optional<int> sparsity;
    double anchor_weight = 0.0;
    double measure_noise = 0.0;
    std::uint64_t seed = 7;
    double reward_perturbation = 0.0;
};

struct ClassSpec {
    std::string kind = "tabular"; // tabular | linear | sparse_linear
    std::optional<int> sparsity;
    double cover_multiplier = 1.0;
};

struct AlgorithmSpec {
    int m_max = 13;
    double delta = 0.1;
    double l1 = 1.0;
    std::optional<std::pair<double, double>> grid_l1;
    long long probe_episodes = 63;
    double c_prime = 1.0;
    double zeta = 0.0;
    double sampling_constant = 384.0;
};

struct ExperimentConfig {
    EnvironmentSpec environment;
    ClassSpec function_class;
    AlgorithmSpec algorithm;
    std::vector<std::uint64_t> seeds{0};
    std::vector<std::string> baselines;
    std::string output_dir = "out";
    int threads = 1;
};

namespace detail {

inline void check_keys(const Json& obj, const std::set<std::string>& allowed,
                       const std::string& where) {
    if (!obj.is_object())
        throw ConfigError(where + ": expected an object");
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key))
            throw ConfigError("unknown key '" + (where.empty() ? key : where + "." + key) + "'");
}

template <class T>
void read_if(const Json& obj, const char* key, T& out, const std::string& where) {
    if (!obj.contains(key))
        return;
    try {
        out = obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("invalid value for '" + where + "." + key + "'");
    }
}

inline void expect(bool ok, const std::string& key, const std::string& what) {
    if (!ok)
        throw ConfigError("invalid value for '" + key + "': " + what);
}

} // namespace detail

inline void validate(const ExperimentConfig& c) {
    using detail::expect;
    const auto& e = c.environment;
    expect(e.kind == "tabular" || e.kind == "linear", "environment.kind", "tabular or linear");
    expect(e.n_states >= 1, "environment.params.n_states", "must be positive");
    expect(e.n_actions >= 1, "environment.params.n_actions", "must be positive");
    expect(e.horizon >= 1, "environment.params.horizon", "must be positive");
    expect(e.min_prob >= 0.0 && e.min_prob * e.n_states <= 1.0 + 1e-12,
           "environment.params.min_prob", "need 0 <= min_prob * S <= 1");
    expect(e.dim >= 1, "environment.params.dim", "must be positive");
    expect(!e.sparsity || (*e.sparsity >= 1 && *e.sparsity <= e.dim),
           "environment.params.sparsity", "must lie in [1, dim]");
    expect(e.anchor_weight >= 0.0 && e.anchor_weight <= 1.0, "environment.params.anchor_weight",
           "must lie in [0,1]");
    expect(e.measure_noise >= 0.0, "environment.params.measure_noise", "must be nonnegative");
    expect(e.reward_perturbation >= 0.0, "environment.reward_perturbation", "must be nonnegative");
    const auto& f = c.function_class;
    expect(f.kind == "tabular" || f.kind == "linear" || f.kind == "sparse_linear",
           "function_class.kind", "tabular, linear or sparse_linear");
    expect(f.kind != "sparse_linear" || (f.sparsity && *f.sparsity >= 1),
           "function_class.sparsity", "required and positive for sparse_linear");
    expect(f.cover_multiplier > 0.0, "function_class.cover_multiplier", "must be positive");
    const auto& a = c.algorithm;
    expect(a.m_max >= 1 && a.m_max <= 30, "m_max", "must lie in [1, 30]");
    expect(a.delta > 0.0 && a.delta < 1.0, "delta", "must lie in (0,1)");
    expect(a.l1 > 0.0, "l1", "must be positive");
    expect(!a.grid_l1 || (a.grid_l1->first > 0.0 && a.grid_l1->first <= a.grid_l1->second),
           "grid_l1", "need 0 < min <= max");
    expect(a.probe_episodes >= 1, "probe_episodes", "must be positive");
    expect(a.c_prime > 0.0, "c_prime", "must be positive");
    expect(a.zeta >= 0.0, "zeta", "must be nonnegative");
    expect(a.sampling_constant > 0.0, "sampling_constant", "must be positive");
    expect(!c.seeds.empty(), "seeds", "must be nonempty");
    for (const auto& b : c.baselines)
        expect(b == "uniform_random" || b == "lsvi_no_bonus", "baselines",
               "unknown baseline '" + b + "'");
    expect(c.threads >= 1, "threads", "must be positive");
}

inline ExperimentConfig config_from_json(const Json& j) {
    using detail::read_if;
    ExperimentConfig c;
    detail::check_keys(j, {"environment", "function_class", "algorithm", "seeds", "baselines",
                           "output_dir", "threads"},
                       "");
    if (j.contains("environment")) {
        const auto& e = j.at("environment");
        detail::check_keys(e, {"kind", "params", "seed", "reward_perturbation"}, "environment");
        read_if(e, "kind", c.environment.kind, "environment");
        read_if(e, "seed", c.environment.seed, "environment");
        read_if(e, "reward_perturbation", c.environment.reward_perturbation, "environment");
        if (e.contains("params")) {
            const auto& p = e.at("params");
            const std::string where = "environment.params";
            detail::check_keys(p, {"n_states", "n_actions", "horizon", "min_prob", "dim", "sparsity",
                                   "anchor_weight", "measure_noise"},
                               where);
            read_if(p, "n_states", c.environment.n_states, where);
            read_if(p, "n_actions", c.environment.n_actions, where);
            read_if(p, "horizon", c.environment.horizon, where);
            read_if(p, "min_prob", c.environment.min_prob, where);
            read_if(p, "dim", c.environment.dim, where);
            if (p.contains("sparsity") && !p.at("sparsity").is_null()) {
                int s = 0;
                read_if(p, "sparsity", s, where);
                c.environment.sparsity = s;
            }
            read_if(p, "anchor_weight", c.environment.anchor_weight, where);
            read_if(p, "measure_noise", c.environment.measure_noise, where);
        }
    }
    if (j.contains("function_class")) {
        const auto& f = j.at("function_class");
        detail::check_keys(f, {"kind", "sparsity", "cover_multiplier"}, "function_class");
        read_if(f, "kind", c.function_class.kind, "function_class");
        if (f.contains("sparsity") && !f.at("sparsity").is_null()) {
            int s = 0;
            read_if(f, "sparsity", s, "function_class");
            c.function_class.sparsity = s;
        }
        read_if(f, "cover_multiplier", c.function_class.cover_multiplier, "function_class");
    }
    if (j.contains("algorithm")) {
        const auto& a = j.at("algorithm");
        const std::string where = "algorithm";
        detail::check_keys(a, {"m_max", "delta", "l1", "grid_l1", "probe_episodes", "c_prime",
                               "zeta", "sampling_constant"},
                           where);
        read_if(a, "m_max", c.algorithm.m_max, where);
        read_if(a, "delta", c.algorithm.delta, where);
        read_if(a, "l1", c.algorithm.l1, where);
        if (a.contains("grid_l1") && !a.at("grid_l1").is_null()) {
            std::vector<double> g;
            read_if(a, "grid_l1", g, where);
            detail::expect(g.size() == 2, "grid_l1", "expected [min, max]");
            c.algorithm.grid_l1 = std::make_pair(g[0], g[1]);
        }
        read_if(a, "probe_episodes", c.algorithm.probe_episodes, where);
        read_if(a, "c_prime", c.algorithm.c_prime, where);
        read_if(a, "zeta", c.algorithm.zeta, where);
        read_if(a, "sampling_constant", c.algorithm.sampling_constant, where);
    }
    read_if(j, "seeds", c.seeds, "");
    read_if(j, "baselines", c.baselines, "");
    read_if(j, "output_dir", c.output_dir, "");
    read_if(j, "threads", c.threads, "");
    validate(c);
    return c;
}

inline Json to_json(const ExperimentConfig& c) {
    const auto& e = c.environment;
    const auto& a = c.algorithm;
    Json grid = a.grid_l1 ? Json::array({a.grid_l1->first, a.grid_l1->second}) : Json(nullptr);
    return Json{
        {"environment",
         {{"kind", e.kind},
          {"params",
           {{"n_states", e.n_states},
            {"n_actions", e.n_actions},
            {"horizon", e.horizon},
            {"min_prob", e.min_prob},
            {"dim", e.dim},
            {"sparsity", e.sparsity ? Json(*e.sparsity) : Json(nullptr)},
            {"anchor_weight", e.anchor_weight},
            {"measure_noise", e.measure_noise}}},
          {"seed", e.seed},
          {"reward_perturbation", e.reward_perturbation}}},
        {"function_class",
         {{"kind", c.function_class.kind},
          {"sparsity", c.function_class.sparsity ? Json(*c.function_class.sparsity) : Json(nullptr)},
          {"cover_multiplier", c.function_class.cover_multiplier}}},
        {"algorithm",
         {{"m_max", a.m_max},
          {"delta", a.delta},
          {"l1", a.l1},
          {"grid_l1", grid},
          {"probe_episodes", a.probe_episodes},
          {"c_prime", a.c_prime},
          {"zeta", a.zeta},
          {"sampling_constant", a.sampling_constant}}},
        {"seeds", c.seeds},
        {"baselines", c.baselines},
        {"output_dir", c.output_dir},
        {"threads", c.threads}};
}

inline ExperimentConfig parse_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path.string() + "'");
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    try {
        return config_from_json(j);
    } catch (const ModelError& e) {
        throw ConfigError(e.what());
    }
}

/// The environment an experiment runs on: its tabular view plus features when linear.
struct Environment {
    TabularMDP mdp;
    std::optional<LinearMDP> linear;
};

inline Environment make_environment(const EnvironmentSpec& spec) {
    Rng rng(spec.seed);
    Environment env;
    if (spec.kind == "tabular") {
        env.mdp = make_random_tabular(spec.n_states, spec.n_actions, spec.horizon, spec.min_prob, rng);
    } else {
        LinearMdpOptions opt;
        opt.sparsity = spec.sparsity;
        opt.min_prob = spec.min_prob;
        opt.anchor_weight = spec.anchor_weight;
        opt.measure_noise = spec.measure_noise;
        env.linear = make_linear_mdp(spec.dim, spec.n_states, spec.n_actions, spec.horizon, rng, opt);
        env.mdp = env.linear->tabular;
    }
    if (spec.reward_perturbation > 0.0) {
        Rng prng(derive_seed(spec.seed, 77));
        env.mdp = perturb_rewards(env.mdp, spec.reward_perturbation, prng);
    }
    return env;
}

using AnyClass = std::variant<TabularClass, LinearClass, SparseLinearClass>;

inline AnyClass make_class(const ClassSpec& spec, const Environment& env) {
    const int S = env.mdp.n_states(), A = env.mdp.n_actions(), H = env.mdp.horizon();
    if (spec.kind == "tabular")
        return TabularClass(S, A, H, spec.cover_multiplier);
    auto features = env.linear ? env.linear->features
                               : std::make_shared<const FeatureMap>(FeatureMap::one_hot(S, A));
    if (spec.kind == "linear")
        return LinearClass(features, H, std::nullopt, spec.cover_multiplier);
    return SparseLinearClass(features, H, *spec.sparsity, std::nullopt, spec.cover_multiplier);
}

inline AgentConfig agent_config(const AlgorithmSpec& a) {
    AgentConfig c;
    c.m_max = a.m_max;
    c.delta = a.delta;
    c.l1 = a.l1;
    c.c_prime = a.c_prime;
    c.zeta = a.zeta;
    c.sampling_constant = a.sampling_constant;
    return c;
}

struct SeedResult {
    std::uint64_t seed = 0;
    std::optional<std::string> error;
    RunLog log;
    RegretReport report;
    std::optional<double> grid_best_l1;
    std::map<std::string, RunLog> baseline_logs;
    std::map<std::string, RegretReport> baseline_reports;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<SeedResult> seeds;
    std::string config_hash;
    std::string version = kVersion;
};

/// FNV-1a over the canonical config dump, as 16 hex digits.
inline std::string config_hash(const ExperimentConfig& c) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : to_json(c).dump()) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline SeedResult run_seed(const ExperimentConfig& cfg, const Environment& env,
                           const AnyClass& cls, const PlanningResult& plan, std::uint64_t seed) {
    SeedResult out;
    out.seed = seed;
    try {
        const auto agent = agent_config(cfg.algorithm);
        std::visit(
            [&](const auto& c) {
                if (cfg.algorithm.grid_l1) {
                    auto g = grid_search_l1(env.mdp, c, cfg.algorithm.grid_l1->first,
                                            cfg.algorithm.grid_l1->second,
                                            cfg.algorithm.probe_episodes, agent, seed);
                    out.grid_best_l1 = g.best_l1;
                    out.log = std::move(g.exploit);
                } else {
                    out.log = run(env.mdp, c, agent, seed);
                }
                for (const auto& b : cfg.baselines) {
                    AgentConfig bc = agent;
                    bc.m_max = out.log.config.m_max;
                    out.baseline_logs[b] = b == "uniform_random"
                                               ? baseline_uniform(env.mdp, bc, seed)
                                               : baseline_lsvi_no_bonus(env.mdp, c, bc, seed);
                }
            },
            cls);
        out.report = regret_report(out.log, plan, env.mdp);
        for (const auto& [name, log] : out.baseline_logs) {
            out.baseline_reports[name] = regret_report(log, plan, env.mdp);
            out.report.baseline_final[name] = out.baseline_reports[name].final_regret;
        }
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    return out;
}

/// One run per seed (plus baselines); seeds fan out over `threads` workers.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    validate(cfg);
    ExperimentResult result;
    result.config = cfg;
    result.config_hash = config_hash(cfg);
    const auto env = make_environment(cfg.environment);
    const auto cls = make_class(cfg.function_class, env);
    const auto plan = exact_value_iteration(env.mdp);
    result.seeds.resize(cfg.seeds.size());
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), cfg.seeds.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
            result.seeds[i] = run_seed(cfg, env, cls, plan, cfg.seeds[i]);
        return result;
    }
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < cfg.seeds.size(); i += workers)
                result.seeds[i] = run_seed(cfg, env, cls, plan, cfg.seeds[i]);
        });
    for (auto& t : pool)
        t.join();
    return result;
}

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_atomically(const std::filesystem::path& path, const std::string& content) {
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out << content;
        if (!out)
            throw std::runtime_error("write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec)
        throw std::runtime_error("cannot move '" + tmp.string() + "' to '" + path.string() +
                                 "': " + ec.message());
}

inline constexpr const char* kRegretHeader = "seed,episode,epoch,return,regret,cum_regret\n";

inline std::string regret_csv(const std::vector<std::pair<std::uint64_t, const RunLog*>>& logs,
                              const std::vector<const RegretReport*>& reports) {
    std::string out = kRegretHeader;
    for (std::size_t i = 0; i < logs.size(); ++i) {
        const auto& [seed, log] = logs[i];
        const auto& rep = *reports[i];
        for (std::size_t k = 0; k < log->trajectories.size(); ++k) {
            const auto& t = log->trajectories[k];
            out += std::to_string(seed) + ',' + std::to_string(t.episode) + ',' +
                   std::to_string(log->epoch_of(t.episode)) + ',' + format_double(t.total_return()) +
                   ',' + format_double(rep.per_episode[k]) + ',' + format_double(rep.cumulative[k]) +
                   '\n';
        }
    }
    return out;
}

/// Rows of a regret CSV: seed -> cumulative regret series in episode order.
using CumulativeSeries = std::map<std::uint64_t, std::vector<double>>;

inline CumulativeSeries read_regret_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot read '" + path.string() + "'");
    std::string line;
    std::getline(in, line);
    if (line + "\n" != kRegretHeader)
        throw std::runtime_error("'" + path.string() + "' has an unexpected header");
    CumulativeSeries out;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ','))
            cells.push_back(cell);
        if (cells.size() != 6)
            throw std::runtime_error("'" + path.string() + "' has a malformed row");
        out[std::stoull(cells[0])].push_back(std::stod(cells[5]));
    }
    return out;
}

/**
 * summary.json content derived only from the regret CSVs and the config:
 * per-seed final regret and slope, and their aggregates.
 */
inline Json summarize(const ExperimentConfig& cfg, const std::string& hash,
                      const CumulativeSeries& main,
                      const std::map<std::string, CumulativeSeries>& baselines) {
    auto block = [](const CumulativeSeries& series) {
        Json per_seed = Json::array();
        double sum = 0.0;
        for (const auto& [seed, cum] : series) {
            const double final_regret = cum.empty() ? 0.0 : cum.back();
            const auto slope = log_log_slope(cum);
            per_seed.push_back(Json{{"seed", seed},
                                    {"final_regret", final_regret},
                                    {"slope", slope ? Json(*slope) : Json(nullptr)}});
            sum += final_regret;
        }
        return Json{{"per_seed", per_seed},
                    {"mean_final_regret", series.empty() ? 0.0 : sum / static_cast<double>(series.size())}};
    };
    Json out{{"version", kVersion}, {"config_hash", hash}, {"lsvi", block(main)}};
    Json b = Json::object();
    for (const auto& [name, series] : baselines)
        b[name] = block(series);
    out["baselines"] = b;
    (void)cfg;
    return out;
}

inline std::string aggregate_csv(const std::map<std::string, CumulativeSeries>& all) {
    std::string out = "algorithm,episode,mean_cum_regret,std_cum_regret,n_seeds\n";
    for (const auto& [name, series] : all) {
        if (series.empty())
            continue;
        const std::size_t K = series.begin()->second.size();
        for (std::size_t k = 0; k < K; ++k) {
            double sum = 0.0, sq = 0.0;
            std::size_t n = 0;
            for (const auto& [seed, cum] : series)
                if (k < cum.size()) {
                    sum += cum[k];
                    sq += cum[k] * cum[k];
                    ++n;
                }
            const double mean = sum / static_cast<double>(n);
            const double var = n > 1 ? std::max(0.0, (sq - n * mean * mean) / static_cast<double>(n - 1)) : 0.0;
            out += name + ',' + std::to_string(k + 1) + ',' + format_double(mean) + ',' +
                   format_double(std::sqrt(var)) + ',' + std::to_string(n) + '\n';
        }
    }
    return out;
}

struct Manifest {
    std::vector<std::filesystem::path> files;
    std::vector<std::string> seed_errors;
};

/// Writes every artifact of a result into dir (temp file then rename for each).
inline Manifest emit_outputs(const ExperimentResult& result, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw std::runtime_error("cannot create '" + dir.string() + "': " + ec.message());
    Manifest m;
    auto put = [&](const std::string& name, const std::string& content) {
        const auto path = dir / name;
        write_atomically(path, content);
        m.files.push_back(path);
    };

    std::vector<std::pair<std::uint64_t, const RunLog*>> logs;
    std::vector<const RegretReport*> reports;
    CumulativeSeries main_series;
    std::map<std::string, std::vector<std::pair<std::uint64_t, const RunLog*>>> base_logs;
    std::map<std::string, std::vector<const RegretReport*>> base_reports;
    std::map<std::string, CumulativeSeries> base_series;
    for (const auto& s : result.seeds) {
        if (s.error) {
            m.seed_errors.push_back("seed " + std::to_string(s.seed) + ": " + *s.error);
            continue;
        }
        logs.emplace_back(s.seed, &s.log);
        reports.push_back(&s.report);
        main_series[s.seed] = s.report.cumulative;
        for (const auto& [name, log] : s.baseline_logs) {
            base_logs[name].emplace_back(s.seed, &log);
            base_reports[name].push_back(&s.baseline_reports.at(name));
            base_series[name][s.seed] = s.baseline_reports.at(name).cumulative;
        }
    }
    put("config.json", to_json(result.config).dump(2) + "\n");
    put("regret.csv", regret_csv(logs, reports));
    for (const auto& name : result.config.baselines)
        put("regret_" + name + ".csv", regret_csv(base_logs[name], base_reports[name]));
    for (const auto& s : result.seeds)
        if (!s.error) {
            Json j = to_json(s.log);
            if (s.grid_best_l1)
                j["grid_best_l1"] = *s.grid_best_l1;
            put("runlog_seed" + std::to_string(s.seed) + ".json", j.dump() + "\n");
        }
    auto all = base_series;
    all["lsvi"] = main_series;
    put("aggregate.csv", aggregate_csv(all));
    Json summary = summarize(result.config, result.config_hash, main_series, base_series);
    Json errors = Json::array();
    for (const auto& e : m.seed_errors)
        errors.push_back(e);
    summary["seed_errors"] = errors;
    put("summary.json", summary.dump(2) + "\n");
    return m;
}

/// Recomputes summary.json from a run directory's CSVs and config.
inline Json analyze_run_dir(const std::filesystem::path& dir) {
    const auto cfg = parse_config(dir / "config.json");
    const auto main = read_regret_csv(dir / "regret.csv");
    std::map<std::string, CumulativeSeries> base;
    for (const auto& name : cfg.baselines)
        base[name] = read_regret_csv(dir / ("regret_" + name + ".csv"));
    return summarize(cfg, config_hash(cfg), main, base);
}

} // namespace lsvi
