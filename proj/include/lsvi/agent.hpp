#pragma once

#include "lsvi/bonus.hpp"
#include "lsvi/mdp.hpp"

namespace lsvi {

/// Doubling schedule: epoch m starts at episode tau_m = 2^(m-1); K = 2^M - 1 episodes in total.
struct EpochSchedule {
    int m0 = 1;
    int m_max = 1;
    int horizon = 1;
    long long episodes = 1;
    long long t_total = 1;

    static long long tau(int m) { return 1LL << (m - 1); }

    long long first_episode(int m) const { return tau(m); }
    long long last_episode(int m) const { return std::min(tau(m + 1) - 1, episodes); }
    long long epoch_length(int m) const { return last_episode(m) - first_episode(m) + 1; }

    /// Epoch containing episode k (1-based).
    int epoch_of(long long k) const {
        int m = 1;
        while (tau(m + 1) <= k)
            ++m;
        return m;
    }
};

inline EpochSchedule make_schedule(int m_max, int m0, int horizon) {
    require(m_max >= 1 && m_max <= 40, "schedule: m_max must lie in [1, 40]");
    require(horizon >= 1, "schedule: horizon must be positive");
    EpochSchedule s;
    s.m0 = m0;
    s.m_max = m_max;
    s.horizon = horizon;
    s.episodes = (1LL << m_max) - 1;
    s.t_total = s.episodes * horizon;
    return s;
}

struct WarmupResult {
    int m0 = 1;
    /// 16 L1^2 (ln(128T/delta) + 2 lnN), the argument of the outer logarithm.
    double inner = 0.0;
    /// Value before flooring at 1 and capping at M.
    long long uncapped = 1;
    bool capped = false;
};

inline WarmupResult warmup_epochs_from_inner(double inner, int m_max) {
    require(inner > 0.0, "warmup_epochs: inner value must be positive");
    WarmupResult out;
    out.inner = inner;
    out.uncapped = std::max<long long>(1, ceil_exact(std::log(inner)));
    out.capped = out.uncapped > m_max;
    out.m0 = static_cast<int>(std::min<long long>(out.uncapped, m_max));
    return out;
}

/// M0 = ceil(ln(16 L1^2 ln(128 T N^2 / delta))), N = N(F, delta/(9216 T^2)) given as lnN.
inline WarmupResult warmup_epochs(double l1, double t_total, double delta, double log_cover,
                                  int m_max) {
    require(l1 > 0.0 && t_total > 0.0 && delta > 0.0, "warmup_epochs: inputs must be positive");
    require(log_cover >= 0.0, "warmup_epochs: log covering number must be nonnegative");
    const double inner = 16.0 * l1 * l1 * (std::log(128.0 * t_total / delta) + 2.0 * log_cover);
    return warmup_epochs_from_inner(inner, m_max);
}

struct AgentConfig {
    int m_max = 13;
    double delta = 0.1;
    double l1 = 1.0;
    double c_prime = 1.0;
    double zeta = 0.0;
    double sampling_constant = 384.0;
    bool use_bonus = true;

    void validate() const {
        require(m_max >= 1 && m_max <= 30, "agent config: m_max must lie in [1, 30]");
        require(delta > 0.0 && delta < 1.0, "agent config: delta must lie in (0,1)");
        require(l1 > 0.0, "agent config: l1 must be positive");
        require(c_prime > 0.0, "agent config: c_prime must be positive");
        require(zeta >= 0.0, "agent config: zeta must be nonnegative");
        require(sampling_constant > 0.0, "agent config: sampling constant must be positive");
    }
};

/// Replayable description of one bonus: anchor, kept set (aggregated) and radius.
struct BonusRecord {
    FunctionHandle anchor;
    std::vector<StateActionSet::Entry> kept;
    double radius = 0.0;
    BonusDiagnostics diagnostics;
};

/**
 * Frozen model of one optimistic epoch. Tables are [h][s][a] with 0-based h;
 * q = min(fit + bonus, H) and the policy is greedy in q with lowest-index ties.
 */
struct EpochModel {
    int epoch = 0;
    long long first_episode = 0;
    long long last_episode = 0;
    int horizon = 0;
    int n_states = 0;
    int n_actions = 0;
    std::vector<FunctionHandle> fits;
    std::vector<double> erm_objective;
    std::vector<char> erm_converged;
    std::vector<BonusRecord> bonuses;
    std::vector<double> fit_values;
    std::vector<double> bonus_values;
    std::vector<double> q;

    std::size_t cell(int h, int s, int a) const {
        return (static_cast<std::size_t>(h) * n_states + s) * n_actions + a;
    }
    double fit_at(int h, int s, int a) const { return fit_values[cell(h, s, a)]; }
    double bonus_at(int h, int s, int a) const { return bonus_values[cell(h, s, a)]; }
    double q_at(int h, int s, int a) const { return q[cell(h, s, a)]; }

    double v_at(int h, int s) const {
        if (h >= horizon)
            return 0.0;
        double best = q_at(h, s, 0);
        for (int a = 1; a < n_actions; ++a)
            best = std::max(best, q_at(h, s, a));
        return best;
    }

    Policy policy() const {
        return Policy::greedy(q, horizon, n_states, n_actions, "epoch" + std::to_string(epoch));
    }
};

/// min(f_h(s,a) + b_h(s,a), H).
inline double q_value(const EpochModel& model, int h, int s, int a) {
    return std::min(model.fit_at(h, s, a) + model.bonus_at(h, s, a),
                    static_cast<double>(model.horizon));
}

struct RunCounters {
    long long erm_solves = 0;
    long long bonus_builds = 0;
    long long guard_trips = 0;
    long long erm_nonconverged = 0;
    /// Bonus evaluations that came from the local-search width fallback.
    long long width_lower_bounds = 0;
};

/// H (M - M0 + 1) for a normal run, 0 when M0 was capped (the run is all warm-up).
inline long long expected_erm_solves(const WarmupResult& w, int m_max, int horizon) {
    return w.capped ? 0 : static_cast<long long>(horizon) * (m_max - w.m0 + 1);
}

struct RunLog {
    std::string algorithm = "lsvi";
    std::string class_kind;
    std::uint64_t seed = 0;
    AgentConfig config;
    EpochSchedule schedule;
    WarmupResult warmup;
    double beta = 0.0;
    std::vector<Trajectory> trajectories;
    std::vector<EpochModel> epochs;
    RunCounters counters;

    /// Model executed in episode k, or nullptr for uniform (warm-up) episodes.
    const EpochModel* model_for_episode(long long k) const {
        for (const auto& e : epochs)
            if (k >= e.first_episode && k <= e.last_episode)
                return &e;
        return nullptr;
    }

    int epoch_of(long long k) const { return schedule.epoch_of(k); }
};

namespace detail {

template <FunctionClass C>
EpochModel build_epoch_model(const TabularMDP& env, const C& cls, const RunLog& log, int m,
                             const BonusConfig& bonus_cfg, RunCounters& counters) {
    const int H = env.horizon(), S = env.n_states(), A = env.n_actions();
    EpochModel model;
    model.epoch = m;
    model.first_episode = log.schedule.first_episode(m);
    model.last_episode = log.schedule.last_episode(m);
    model.horizon = H;
    model.n_states = S;
    model.n_actions = A;
    const std::size_t cells = static_cast<std::size_t>(H) * S * A;
    model.fit_values.assign(cells, 0.0);
    model.bonus_values.assign(cells, 0.0);
    model.q.assign(cells, 0.0);
    model.fits.resize(static_cast<std::size_t>(H));
    model.erm_objective.assign(static_cast<std::size_t>(H), 0.0);
    model.erm_converged.assign(static_cast<std::size_t>(H), 1);
    model.bonuses.resize(static_cast<std::size_t>(H));

    // All episodes before tau_m have completed; log.trajectories holds exactly those.
    StateActionSet z;
    for (const auto& traj : log.trajectories)
        for (const auto& st : traj.steps)
            z.add(st.state, st.action);

    std::vector<double> v_next(static_cast<std::size_t>(S), 0.0);
    LabeledSet data;
    data.reserve(z.entries().size());
    for (int h = H - 1; h >= 0; --h) {
        data.clear();
        for (const auto& traj : log.trajectories)
            for (const auto& st : traj.steps)
                data.push_back({st.state, st.action, st.reward + v_next[st.next_state]});
        auto fit = cls.erm_fit(data);
        ++counters.erm_solves;
        if (!fit.converged)
            ++counters.erm_nonconverged;
        model.erm_objective[h] = fit.objective;
        model.erm_converged[h] = fit.converged ? 1 : 0;

        std::optional<BonusFunction<C>> bonus;
        if (log.config.use_bonus) {
            Rng rng(derive_seed(log.seed, 1000u + static_cast<std::uint64_t>(m) * 64u + h));
            bonus.emplace(compute_bonus(cls, fit.handle, z, bonus_cfg, rng));
            ++counters.bonus_builds;
            if (bonus->diagnostics().guard_tripped())
                ++counters.guard_trips;
            auto& rec = model.bonuses[h];
            rec.anchor = fit.handle;
            for (const auto& [sa, n] : bonus->kept().aggregated())
                rec.kept.push_back({sa, n});
            rec.radius = bonus->radius();
            rec.diagnostics = bonus->diagnostics();
        }

        std::vector<double> v_cur(static_cast<std::size_t>(S), 0.0);
        for (int s = 0; s < S; ++s) {
            double best = 0.0;
            for (int a = 0; a < A; ++a) {
                const auto c = model.cell(h, s, a);
                model.fit_values[c] = evaluate(cls, fit.handle, s, a);
                if (bonus) {
                    const auto w = bonus->detailed(s, a);
                    model.bonus_values[c] = w.value;
                    counters.width_lower_bounds += w.lower_bound ? 1 : 0;
                }
                model.q[c] = q_value(model, h, s, a);
                best = a == 0 ? model.q[c] : std::max(best, model.q[c]);
            }
            v_cur[s] = best;
        }
        model.fits[h] = std::move(fit.handle);
        v_next = std::move(v_cur);
    }
    return model;
}

inline void check_compatible(const TabularMDP& env, int n_states, int n_actions, int horizon) {
    require(env.n_states() == n_states && env.n_actions() == n_actions,
            "run: function class and environment disagree on S x A");
    require(env.horizon() == horizon, "run: function class and environment disagree on H");
}

} // namespace detail

/**
 * Optimistic LSVI on the doubling schedule. Warm-up episodes 1 .. tau_{M0} - 1 act
 * uniformly; each later epoch refits all H steps once from the completed
 * episodes and then executes its frozen greedy policy.
 */
template <FunctionClass C>
RunLog run(const TabularMDP& env, const C& cls, const AgentConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    detail::check_compatible(env, cls.n_states(), cls.n_actions(), cls.horizon());
    const int H = env.horizon();
    RunLog log;
    log.algorithm = cfg.use_bonus ? "lsvi" : "lsvi_no_bonus";
    log.class_kind = C::kind_tag;
    log.seed = seed;
    log.config = cfg;
    log.schedule = make_schedule(cfg.m_max, 1, H);
    const double T = static_cast<double>(log.schedule.t_total);
    log.warmup = warmup_epochs(cfg.l1, T, cfg.delta,
                               cls.log_covering_number_f(cfg.delta / (9216.0 * T * T)), cfg.m_max);
    log.schedule.m0 = log.warmup.m0;
    const BonusConfig bonus_cfg{cfg.delta,  static_cast<std::uint64_t>(log.schedule.t_total),
                                cfg.l1,     cfg.c_prime,
                                cfg.zeta,   H,
                                cfg.sampling_constant};
    log.beta = beta(cls, bonus_cfg);

    Rng env_rng(derive_seed(seed, 0));
    const Policy uniform = Policy::uniform(env.n_actions(), "uniform");
    log.trajectories.reserve(static_cast<std::size_t>(log.schedule.episodes));
    // A capped M0 means the formula asked for more warm-up than the budget holds.
    const long long warmup_end =
        log.warmup.capped ? log.schedule.episodes + 1 : EpochSchedule::tau(log.schedule.m0);
    for (long long k = 1; k < warmup_end; ++k)
        log.trajectories.push_back(rollout(env, uniform, env_rng, k));
    if (log.warmup.capped)
        return log;

    for (int m = log.schedule.m0; m <= cfg.m_max; ++m) {
        auto model = detail::build_epoch_model(env, cls, log, m, bonus_cfg, log.counters);
        const Policy policy = model.policy();
        for (long long k = model.first_episode; k <= model.last_episode; ++k)
            log.trajectories.push_back(rollout(env, policy, env_rng, k));
        log.epochs.push_back(std::move(model));
    }
    return log;
}

/// The same loop with the bonus fixed at zero.
template <FunctionClass C>
RunLog baseline_lsvi_no_bonus(const TabularMDP& env, const C& cls, AgentConfig cfg,
                              std::uint64_t seed) {
    cfg.use_bonus = false;
    return run(env, cls, cfg, seed);
}

/// K episodes of the uniform policy on the same environment stream as run().
inline RunLog baseline_uniform(const TabularMDP& env, const AgentConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    RunLog log;
    log.algorithm = "uniform_random";
    log.class_kind = "none";
    log.seed = seed;
    log.config = cfg;
    log.schedule = make_schedule(cfg.m_max, cfg.m_max, env.horizon());
    log.warmup.m0 = cfg.m_max;
    Rng env_rng(derive_seed(seed, 0));
    const Policy uniform = Policy::uniform(env.n_actions(), "uniform");
    for (long long k = 1; k <= log.schedule.episodes; ++k)
        log.trajectories.push_back(rollout(env, uniform, env_rng, k));
    return log;
}

struct GridSearchResult {
    double best_l1 = 0.0;
    std::vector<double> candidates;
    std::vector<double> mean_returns;
    std::vector<RunLog> probes;
    RunLog exploit;
};

/**
 * Probes L1 in {l_min 2^i} within [l_min, l_max] with short runs, then exploits the
 * candidate with the highest mean per-episode return for the remaining budget of
 * 2^(cfg.m_max) - 1 episodes. A single candidate skips probing entirely.
 */
template <FunctionClass C>
GridSearchResult grid_search_l1(const TabularMDP& env, const C& cls, double l_min, double l_max,
                                long long per_candidate_episodes, const AgentConfig& cfg,
                                std::uint64_t seed) {
    require(l_min > 0.0 && l_min <= l_max, "grid_search_l1: need 0 < l_min <= l_max");
    require(per_candidate_episodes >= 1, "grid_search_l1: probe budget must be positive");
    GridSearchResult out;
    for (double l = l_min; l <= l_max * (1.0 + 1e-12); l *= 2.0)
        out.candidates.push_back(l);
    if (out.candidates.size() == 1) {
        AgentConfig c = cfg;
        c.l1 = l_min;
        out.best_l1 = l_min;
        out.exploit = run(env, cls, c, seed);
        return out;
    }
    int probe_m = 0;
    while ((1LL << (probe_m + 1)) - 1 <= per_candidate_episodes)
        ++probe_m;
    const long long probe_k = (1LL << probe_m) - 1;
    const long long total = (1LL << cfg.m_max) - 1;
    const long long remaining = total - probe_k * static_cast<long long>(out.candidates.size());
    require(remaining >= 1, "grid_search_l1: probes exhaust the episode budget");

    std::size_t best = 0;
    for (std::size_t i = 0; i < out.candidates.size(); ++i) {
        AgentConfig c = cfg;
        c.l1 = out.candidates[i];
        c.m_max = probe_m;
        auto probe = run(env, cls, c, derive_seed(seed, 100 + i));
        double sum = 0.0;
        for (const auto& t : probe.trajectories)
            sum += t.total_return();
        out.mean_returns.push_back(sum / static_cast<double>(probe.trajectories.size()));
        if (out.mean_returns[i] > out.mean_returns[best])
            best = i;
        out.probes.push_back(std::move(probe));
    }
    out.best_l1 = out.candidates[best];
    int exploit_m = 0;
    while ((1LL << (exploit_m + 1)) - 1 <= remaining)
        ++exploit_m;
    AgentConfig c = cfg;
    c.l1 = out.best_l1;
    c.m_max = exploit_m;
    out.exploit = run(env, cls, c, derive_seed(seed, 99));
    return out;
}

} // namespace lsvi
