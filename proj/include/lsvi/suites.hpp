#pragma once

// Property suites run by `lsvi_cli verify` and by the acceptance binary.

#include "lsvi/experiment.hpp"
#include "lsvi/oracles.hpp"

#include <chrono>

namespace lsvi::suites {

struct Outcome {
    int criterion = 0;
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

namespace detail {

inline std::string fmt(const char* pattern, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, pattern, args...);
    return buf;
}

class Stopwatch {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

/// Aggregated occurrence counts of t rollouts, half uniform and half a fixed policy.
inline StateActionSet rollout_counts(const TabularMDP& mdp, const Policy& fixed, long long t,
                                     Rng& rng) {
    const auto uniform = Policy::uniform(mdp.n_actions());
    std::vector<std::uint64_t> counts(static_cast<std::size_t>(mdp.n_states()) * mdp.n_actions(), 0);
    for (long long k = 0; k < t; ++k) {
        const auto traj = rollout(mdp, k % 2 == 0 ? uniform : fixed, rng, k + 1);
        for (const auto& st : traj.steps)
            ++counts[static_cast<std::size_t>(st.state) * mdp.n_actions() + st.action];
    }
    StateActionSet z;
    for (int s = 0; s < mdp.n_states(); ++s)
        for (int a = 0; a < mdp.n_actions(); ++a)
            if (auto n = counts[static_cast<std::size_t>(s) * mdp.n_actions() + a])
                z.add(s, a, n);
    return z;
}

/// Shared setup of the norm-preservation and distinct-count suites.
struct SubsampleSetup {
    LinearMDP mdp;
    LinearClass cls;
    double l1 = 0.0;
    double lambda = 1e-4;
    double eps = 0.5;
    double delta = 0.1;
    long long trajectories = 0;
    double trajectory_floor = 0.0;
    StateActionSet z;
    SamplingPlan plan;
};

inline SubsampleSetup build_subsample_setup() {
    Rng rng(2024);
    LinearMdpOptions opt;
    opt.anchor_weight = 0.9;
    opt.min_prob = 0.02;
    auto mdp = make_linear_mdp(5, 8, 2, 4, rng, opt);
    Rng prng(5);
    auto probes = probe_policies(8, 2, 4, 50, prng);
    const auto est = surprise_bound_linear(mdp, probes);
    SubsampleSetup s{mdp, LinearClass(mdp.features, 4), 0.0, 1e-4, 0.5, 0.1, 0, 0.0, {}, {}};
    s.l1 = est.l1_upper;
    // Grow the trajectory count until the keep-probability is at most 1/2.
    long long t = 1 << 20;
    while (true) {
        const auto z_size = static_cast<std::uint64_t>(t) * 4;
        s.plan = make_plan(s.cls, s.l1, s.eps, s.lambda, s.delta, z_size);
        if (s.plan.inv_p >= 2)
            break;
        t += t / 4;
    }
    s.trajectories = t;
    const double log_n = s.cls.log_covering_number_f(s.plan.eps0);
    s.trajectory_floor = 4.0 * s.l1 * s.l1 * (std::log(8.0 / s.delta) + 2.0 * log_n);
    Rng zrng(99);
    s.z = rollout_counts(mdp.tabular, probes[1], t, zrng);
    return s;
}

/// Built once per process; the norm-preservation and distinct-count suites share it.
inline const SubsampleSetup& subsample_setup() {
    static const SubsampleSetup setup = build_subsample_setup();
    return setup;
}

inline double set_norm(const LinearClass& cls, const FunctionHandle& f, const FunctionHandle& g,
                       const StateActionSet& z) {
    double total = 0.0;
    for (const auto& e : z.entries()) {
        const double d = cls.raw(f, e.sa.state, e.sa.action) - cls.raw(g, e.sa.state, e.sa.action);
        total += static_cast<double>(e.multiplicity) * d * d;
    }
    return total;
}

inline ExperimentConfig base_experiment() {
    ExperimentConfig c;
    c.environment.kind = "tabular";
    c.environment.n_states = 5;
    c.environment.n_actions = 3;
    c.environment.horizon = 4;
    c.environment.min_prob = 0.05;
    c.environment.seed = 42;
    c.function_class.kind = "tabular";
    c.algorithm.m_max = 13;
    c.algorithm.delta = 0.1;
    c.algorithm.l1 = 1.0;
    c.algorithm.c_prime = 1e-7;
    c.seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    c.baselines = {"uniform_random"};
    return c;
}

} // namespace detail

/// The regret experiment shared by the regret, decomposition and determinism suites.
inline ExperimentConfig regret_experiment_config() { return detail::base_experiment(); }

inline Outcome erm_count() {
    detail::Stopwatch clock;
    Outcome out{1, "erm-count", false, {}, 0.0};
    Rng rng(42);
    const auto mdp = make_random_tabular(5, 3, 4, 0.05, rng);
    const TabularClass cls(5, 3, 4);
    AgentConfig cfg;
    cfg.m_max = 13;
    cfg.delta = 0.1;
    cfg.l1 = 1.0;
    const auto log = run(mdp, cls, cfg, 0);
    const double secs = clock.seconds();
    // Independent evaluation of the warm-up length.
    const double T = 4.0 * 8191.0;
    const double inner = 16.0 * (std::log(128.0 * T / 0.1) +
                                 2.0 * cls.log_covering_number_f(0.1 / (9216.0 * T * T)));
    const int m0 = std::clamp(static_cast<int>(std::ceil(std::log(inner) - 1e-12)), 1, 13);
    const long long expected = 4LL * (13 - m0 + 1);
    out.passed = log.counters.erm_solves == expected && log.schedule.m0 == m0 && secs < 60.0 &&
                 log.trajectories.size() == 8191;
    out.detail = detail::fmt("M0=%d erm_solves=%lld expected=%lld runtime=%.2fs", m0,
                             log.counters.erm_solves, expected, secs);
    out.seconds = clock.seconds();
    return out;
}

inline Outcome schedule() {
    detail::Stopwatch clock;
    Outcome out{2, "schedule", false, {}, 0.0};
    bool ok = true;
    for (int M = 1; M <= 20; ++M) {
        const auto s = make_schedule(M, 1, 3);
        long long sum = 0;
        for (int m = 1; m <= M; ++m) {
            ok &= EpochSchedule::tau(m) == (1LL << (m - 1));
            ok &= s.first_episode(m) == EpochSchedule::tau(m);
            if (m < M)
                ok &= EpochSchedule::tau(m + 1) == 2 * EpochSchedule::tau(m);
            sum += s.epoch_length(m);
            ok &= s.epoch_of(s.first_episode(m)) == m && s.epoch_of(s.last_episode(m)) == m;
        }
        ok &= sum == s.episodes && s.episodes == (1LL << M) - 1 && s.t_total == 3 * s.episodes;
    }
    out.passed = ok;
    out.detail = "M = 1..20: tau_m = 2^(m-1), epoch lengths sum to K";
    out.seconds = clock.seconds();
    return out;
}

inline Outcome subsample_size() {
    detail::Stopwatch clock;
    Outcome out{3, "subsample-size", false, {}, 0.0};
    const double delta = 0.5;
    StateActionSet z;
    for (int i = 0; i < 100; ++i)
        z.add(i % 10, i / 10, 100);
    SamplingPlan plan;
    plan.p = 0.5;
    plan.inv_p = 2;
    plan.delta = delta;
    const int trials = 2000;
    int exceed = 0;
    double mean = 0.0;
    for (int t = 0; t < trials; ++t) {
        const auto sampled = uniform_sample(z, plan, derive_seed(3, static_cast<std::uint64_t>(t)));
        const double size = static_cast<double>(sampled.set.total());
        exceed += size > 4.0 * static_cast<double>(z.total()) / delta;
        mean += size / trials;
    }
    const double rate = static_cast<double>(exceed) / trials;
    const double rel = std::abs(mean - 1e4) / 1e4;
    out.passed = rate <= delta / 4.0 + 0.02 && rel <= 0.02;
    out.detail = detail::fmt("|Z|=10000 p=1/2 delta=0.5: exceedance %.4f (limit %.3f), mean |Z'| %.1f "
                             "(rel. error %.4f)",
                             rate, delta / 4.0 + 0.02, mean, rel);
    out.seconds = clock.seconds();
    return out;
}

inline Outcome norm_preservation() {
    detail::Stopwatch clock;
    Outcome out{4, "norm-preservation", false, {}, 0.0};
    const auto& setup = detail::subsample_setup();
    Rng pair_rng(4);
    std::vector<std::pair<FunctionHandle, FunctionHandle>> pairs;
    std::vector<double> full;
    for (int i = 0; i < 200; ++i) {
        pairs.emplace_back(setup.cls.random_handle(pair_rng), setup.cls.random_handle(pair_rng));
        full.push_back(detail::set_norm(setup.cls, pairs.back().first, pairs.back().second, setup.z));
    }
    const double zsize = static_cast<double>(setup.z.total());
    const double additive = 8.0 * zsize * setup.lambda / setup.delta;
    const int trials = 500;
    int failures = 0;
    double worst_ratio = 0.0;
    for (int t = 0; t < trials; ++t) {
        const auto sampled = uniform_sample(setup.z, setup.plan, derive_seed(4, static_cast<std::uint64_t>(t)));
        bool failed = false;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const double sub = detail::set_norm(setup.cls, pairs[i].first, pairs[i].second, sampled.set);
            const double lo = (1.0 - setup.eps) * full[i] - 2.0 * setup.lambda;
            const double hi = (1.0 + setup.eps) * full[i] + additive;
            failed |= sub < lo || sub > hi;
            if (full[i] > 0.0)
                worst_ratio = std::max(worst_ratio, std::abs(sub / full[i] - 1.0));
        }
        failures += failed;
    }
    const double rate = static_cast<double>(failures) / trials;
    const double secs = clock.seconds();
    out.passed = rate <= 0.07 && secs < 300.0;
    out.detail = detail::fmt("d=5 L1<=%.2f |Z|=%.0f (%lld trajectories, floor %.0f) p=1/%llu: failure "
                             "rate %.4f (limit 0.07), max relative deviation %.4f, runtime %.1fs",
                             setup.l1, zsize, setup.trajectories, setup.trajectory_floor,
                             static_cast<unsigned long long>(setup.plan.inv_p), rate, worst_ratio, secs);
    out.seconds = secs;
    return out;
}

inline Outcome distinct_count_bound() {
    detail::Stopwatch clock;
    Outcome out{5, "distinct-count", false, {}, 0.0};
    const auto& setup = detail::subsample_setup();
    const double log_n = setup.cls.log_covering_number_f(setup.plan.eps0);
    const double bound = 2304.0 * setup.l1 * (std::log(4.0) + log_n - std::log(setup.delta)) /
                         (setup.eps * setup.eps);
    const int trials = 500;
    int exceed = 0;
    std::size_t most = 0;
    std::uint64_t most_kept = 0;
    for (int t = 0; t < trials; ++t) {
        const auto sampled = uniform_sample(setup.z, setup.plan, derive_seed(5, static_cast<std::uint64_t>(t)));
        exceed += static_cast<double>(sampled.distinct()) > bound;
        most = std::max(most, sampled.distinct());
        most_kept = std::max(most_kept, sampled.kept_occurrences);
    }
    const double rate = static_cast<double>(exceed) / trials;
    out.passed = rate <= setup.delta / 4.0 + 0.02;
    out.detail = detail::fmt("bound %.4g, max distinct %zu, max kept occurrences %llu: exceedance "
                             "%.4f (limit %.3f)",
                             bound, most, static_cast<unsigned long long>(most_kept), rate,
                             setup.delta / 4.0 + 0.02);
    out.seconds = clock.seconds();
    return out;
}

inline Outcome width_correctness() {
    detail::Stopwatch clock;
    Outcome out{6, "width", false, {}, 0.0};
    const double res = 1e-3;
    Rng rng(6);
    int checks = 0, failures = 0;
    double worst_gap = 0.0;
    for (int t = 0; t < 50; ++t) {
        const int S = 1 + t % 3, A = 1 + (t / 3) % 2, H = 1 + t % 2;
        TabularClass cls(S, A, H);
        const auto f = cls.random_handle(rng);
        StateActionSet z;
        std::uniform_int_distribution<int> ps(0, S - 1), pa(0, A - 1), pn(1, 4);
        const int n = static_cast<int>(t % 4);
        for (int i = 0; i < n; ++i)
            z.add(ps(rng), pa(rng), static_cast<std::uint64_t>(pn(rng)));
        const double radius = 3.0 * uniform01(rng);
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                const double exact = width_at(cls, f, z, radius, s, a);
                const double grid = oracle::brute_force_width(cls, f, z, radius, s, a, res);
                const double tol = 2.0 * res;
                ++checks;
                worst_gap = std::max(worst_gap, std::abs(exact - grid));
                failures += grid > exact + 1e-9 || exact - grid > tol;
            }
    }
    for (int t = 0; t < 50; ++t) {
        const int d = 1 + t % 3, S = 3, A = 2;
        Eigen::MatrixXd phi(S * A, d);
        for (Eigen::Index i = 0; i < phi.rows(); ++i) {
            for (Eigen::Index j = 0; j < d; ++j)
                phi(i, j) = 2.0 * uniform01(rng) - 1.0;
            phi.row(i) /= std::max(1.0, phi.row(i).norm());
        }
        LinearClass cls(std::make_shared<const FeatureMap>(S, A, phi), 2);
        Eigen::VectorXd w(d);
        for (Eigen::Index j = 0; j < d; ++j)
            w[j] = 2.0 * uniform01(rng) - 1.0;
        const auto f = cls.from_weights(w);
        StateActionSet z;
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a)
                z.add(s, a, 1 + static_cast<std::uint64_t>(uniform01(rng) * 3.0));
        const Eigen::MatrixXd inv = lsvi::detail::gram_of(cls.features(), z).inverse();
        // Radius scaled so the lattice over the ellipsoid's bounding box stays small.
        const double half_cap = d == 1 ? 1.0 : d == 2 ? 0.3 : 0.04;
        double radius = (0.2 + uniform01(rng));
        for (int j = 0; j < d; ++j)
            radius = std::min(radius, half_cap * half_cap / inv(j, j));
        oracle::Box box;
        for (int j = 0; j < d; ++j) {
            const double half = std::sqrt(radius * inv(j, j)) * 1.001;
            box.lo.push_back(w[j] - half);
            box.hi.push_back(w[j] + half);
        }
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                const double exact = width_at(cls, f, z, radius, s, a);
                const double grid = oracle::brute_force_width(cls, f, z, radius, s, a, res, box);
                const double tol = 2.0 * res * cls.features().row(s, a).lpNorm<1>();
                ++checks;
                worst_gap = std::max(worst_gap, std::abs(exact - grid));
                failures += grid > exact + 1e-9 || exact - grid > tol;
            }
    }
    out.passed = failures == 0;
    out.detail = detail::fmt("50 tabular + 50 linear sets, %d probes, %d disagreements, largest gap %.2e",
                             checks, failures, worst_gap);
    out.seconds = clock.seconds();
    return out;
}

inline Outcome optimism() {
    detail::Stopwatch clock;
    Outcome out{7, "optimism", false, {}, 0.0};
    Rng rng(42);
    const auto mdp = make_random_tabular(5, 3, 4, 0.05, rng);
    const auto plan = exact_value_iteration(mdp);
    const TabularClass cls(5, 3, 4);
    std::string detail;
    double best_fraction = 1.0;
    bool best_upper_ok = false;
    for (double c : {0.01, 0.1, 1.0}) {
        AgentConfig cfg;
        cfg.m_max = 13;
        cfg.delta = 0.1;
        cfg.l1 = 1.0;
        cfg.c_prime = c;
        std::size_t checks = 0, violations = 0, upper = 0;
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            const auto audit = optimism_audit(run(mdp, cls, cfg, seed), plan, mdp, 1e-9);
            checks += audit.checks;
            violations += audit.violations;
            upper += audit.upper_violations;
        }
        const double fraction = checks ? static_cast<double>(violations) / static_cast<double>(checks) : 0.0;
        detail += detail::fmt("c'=%g: %zu/%zu below Q* (%.4f), %zu upper violations; ", c, violations,
                              checks, fraction, upper);
        if (fraction < best_fraction || (fraction == best_fraction && upper == 0)) {
            best_fraction = fraction;
            best_upper_ok = upper == 0 && checks > 0;
        }
    }
    out.passed = best_fraction <= 0.15 && best_upper_ok;
    out.detail = detail + detail::fmt("best fraction %.4f (limit 0.15)", best_fraction);
    out.seconds = clock.seconds();
    return out;
}

inline Outcome sublinear_regret() {
    detail::Stopwatch clock;
    Outcome out{8, "sublinear-regret", false, {}, 0.0};
    const auto cfg = regret_experiment_config();
    const auto result = run_experiment(cfg);
    int lsvi_ok = 0, uniform_ok = 0, errors = 0;
    std::string slopes = "lsvi slopes:", uslopes = " uniform slopes:";
    for (const auto& s : result.seeds) {
        if (s.error) {
            ++errors;
            continue;
        }
        const auto& u = s.baseline_reports.at("uniform_random");
        lsvi_ok += s.report.slope && *s.report.slope <= 0.70;
        uniform_ok += u.slope && *u.slope >= 0.90;
        slopes += detail::fmt(" %.3f", s.report.slope.value_or(NAN));
        uslopes += detail::fmt(" %.3f", u.slope.value_or(NAN));
    }
    const double secs = clock.seconds();
    out.passed = errors == 0 && lsvi_ok >= 8 && uniform_ok >= 8 && secs < 600.0;
    out.detail = detail::fmt("c'=%g: lsvi slope <= 0.70 in %d/10, uniform slope >= 0.90 in %d/10, "
                             "runtime %.1fs; ",
                             cfg.algorithm.c_prime, lsvi_ok, uniform_ok, secs) +
                 slopes + uslopes;
    out.seconds = secs;
    return out;
}

inline Outcome decomposition() {
    detail::Stopwatch clock;
    Outcome out{9, "decomposition", false, {}, 0.0};
    const auto cfg = regret_experiment_config();
    const auto env = make_environment(cfg.environment);
    const auto plan = exact_value_iteration(env.mdp);
    const TabularClass cls(5, 3, 4);
    int holds = 0;
    double tightest = std::numeric_limits<double>::infinity();
    for (auto seed : cfg.seeds) {
        const auto log = run(env.mdp, cls, agent_config(cfg.algorithm), seed);
        const auto check = decomposition_check(log, plan, env.mdp, cfg.algorithm.delta, 1e-6);
        holds += check.holds;
        tightest = std::min(tightest, check.rhs - check.realized_regret);
    }
    out.passed = holds == static_cast<int>(cfg.seeds.size());
    out.detail = detail::fmt("holds in %d/%zu runs, smallest slack %.2f", holds, cfg.seeds.size(), tightest);
    out.seconds = clock.seconds();
    return out;
}

inline Outcome surprise_bound() {
    detail::Stopwatch clock;
    Outcome out{10, "surprise-bound", false, {}, 0.0};
    int ok = 0, total = 0;
    double tightest = 0.0;
    Rng rng(10);
    for (int t = 0; t < 20; ++t) {
        const auto mdp = make_linear_mdp(3, 3, 2, 2, rng);
        const auto policies = exhaustive_policies(3, 2, 2);
        const auto est = surprise_bound_linear(mdp, policies);
        const LinearClass cls(mdp.features, 2);
        const double ratio = empirical_surprise_ratio(cls, mdp.tabular, policies, 10000, rng);
        ++total;
        ok += ratio <= est.l1_upper;
        if (est.finite)
            tightest = std::max(tightest, ratio / est.l1_upper);
    }
    for (int t = 0; t < 10; ++t) {
        LinearMdpOptions opt;
        opt.sparsity = 2;
        const auto mdp = make_linear_mdp(8, 8, 2, 2, rng, opt);
        auto policies = probe_policies(8, 2, 2, 50, rng);
        const auto est = surprise_bound_sparse(mdp, policies, 2);
        const SparseLinearClass cls(mdp.features, 2, 2);
        const double ratio = empirical_surprise_ratio(cls, mdp.tabular, policies, 10000, rng);
        ++total;
        ok += ratio <= est.l1_upper;
        if (est.finite)
            tightest = std::max(tightest, ratio / est.l1_upper);
    }
    out.passed = ok == total;
    out.detail = detail::fmt("%d/%d instances with ratio <= bound, largest ratio/bound %.4f", ok, total,
                             tightest);
    out.seconds = clock.seconds();
    return out;
}

inline Outcome misspecification() {
    detail::Stopwatch clock;
    Outcome out{11, "misspecification", false, {}, 0.0};
    const double zeta = 0.01;
    auto base = regret_experiment_config();
    base.baselines.clear();
    auto perturbed = base;
    perturbed.environment.reward_perturbation = zeta;
    perturbed.algorithm.zeta = zeta;

    const TabularClass cls(5, 3, 4);
    BonusConfig bc;
    bc.delta = base.algorithm.delta;
    bc.t_total = 4 * 8191;
    bc.l1 = base.algorithm.l1;
    bc.c_prime = base.algorithm.c_prime;
    bc.horizon = 4;
    const double b0 = beta(cls, bc);
    bc.zeta = zeta;
    const double b1 = beta(cls, bc);
    const double expected = bc.c_prime * 4.0 * static_cast<double>(bc.t_total) * zeta;
    const double gap = std::abs((b1 - b0) - expected);
    const bool beta_ok = gap <= 4.0 * std::numeric_limits<double>::epsilon() * b1;

    const auto r0 = run_experiment(base);
    const auto r1 = run_experiment(perturbed);
    double m0 = 0.0, m1 = 0.0;
    int errors = 0;
    for (std::size_t i = 0; i < r0.seeds.size(); ++i) {
        errors += r0.seeds[i].error.has_value() + r1.seeds[i].error.has_value();
        m0 += r0.seeds[i].report.final_regret / static_cast<double>(r0.seeds.size());
        m1 += r1.seeds[i].report.final_regret / static_cast<double>(r1.seeds.size());
    }
    const bool regret_ok = m1 <= 3.0 * m0 && m0 <= 3.0 * m1;
    out.passed = errors == 0 && beta_ok && regret_ok;
    out.detail = detail::fmt("beta(zeta)-beta(0)=%.12g vs c'HT zeta=%.12g (gap %.2e); mean final regret "
                             "%.1f (zeta=0) vs %.1f (zeta=%.2f)",
                             b1 - b0, expected, gap, m0, m1, zeta);
    out.seconds = clock.seconds();
    return out;
}

inline Outcome determinism(const std::filesystem::path& scratch) {
    detail::Stopwatch clock;
    Outcome out{12, "determinism", false, {}, 0.0};
    auto cfg = regret_experiment_config();
    auto read = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    };
    std::vector<std::string> csvs;
    for (int threads : {1, 1, 2}) {
        cfg.threads = threads;
        const auto dir = scratch / ("determinism_" + std::to_string(csvs.size()));
        emit_outputs(run_experiment(cfg), dir);
        csvs.push_back(read(dir / "regret.csv"));
    }
    const std::size_t rows = static_cast<std::size_t>(std::count(csvs[0].begin(), csvs[0].end(), '\n'));
    out.passed = !csvs[0].empty() && csvs[0] == csvs[1] && csvs[0] == csvs[2] && rows == 1 + 10 * 8191;
    out.detail = detail::fmt("three reruns (1, 1 and 2 threads): regret.csv %s, %zu bytes, %zu lines",
                             csvs[0] == csvs[1] && csvs[0] == csvs[2] ? "byte-identical" : "DIFFERS",
                             csvs[0].size(), rows);
    out.seconds = clock.seconds();
    return out;
}

struct Entry {
    std::string name;
    std::function<Outcome()> run;
};

inline std::vector<Entry> registry(const std::filesystem::path& scratch) {
    return {{"erm-count", erm_count},
            {"schedule", schedule},
            {"subsample-size", subsample_size},
            {"norm-preservation", norm_preservation},
            {"distinct-count", distinct_count_bound},
            {"width", width_correctness},
            {"optimism", optimism},
            {"sublinear-regret", sublinear_regret},
            {"decomposition", decomposition},
            {"surprise-bound", surprise_bound},
            {"misspecification", misspecification},
            {"determinism", [scratch] { return determinism(scratch); }}};
}

inline std::string format(const Outcome& o) {
    return detail::fmt("%s criterion %d (%s): ", o.passed ? "PASS" : "FAIL", o.criterion, o.name.c_str()) +
           o.detail;
}

} // namespace lsvi::suites
