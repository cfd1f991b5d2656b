#pragma once

#include "lsvi/agent.hpp"

#include <functional>
#include <limits>
#include <map>

namespace lsvi {

struct SurpriseEstimate {
    double l1_upper = std::numeric_limits<double>::infinity();
    std::string method;
    std::size_t policies_probed = 0;
    std::string worst_policy_tag;
    int worst_step = 0;
    /// Smallest eigenvalue (or restricted eigenvalue) found over all probes.
    double min_eigenvalue = 0.0;
    bool finite = false;
};

/// Every deterministic Markov policy; only for S * H * log2(A) <= 20.
inline std::vector<Policy> exhaustive_policies(int n_states, int n_actions, int horizon) {
    const double bits = n_states * horizon * std::log2(static_cast<double>(n_actions));
    require(bits <= 20.0 + 1e-9, "exhaustive_policies: too many policies to enumerate");
    const std::size_t cells = static_cast<std::size_t>(horizon) * n_states;
    std::size_t total = 1;
    for (std::size_t i = 0; i < cells; ++i)
        total *= static_cast<std::size_t>(n_actions);
    std::vector<Policy> out;
    out.reserve(total);
    for (std::size_t code = 0; code < total; ++code) {
        std::vector<int> actions(cells);
        std::size_t c = code;
        for (auto& a : actions) {
            a = static_cast<int>(c % static_cast<std::size_t>(n_actions));
            c /= static_cast<std::size_t>(n_actions);
        }
        out.push_back(Policy::deterministic(horizon, n_states, n_actions, std::move(actions),
                                            "det" + std::to_string(code)));
    }
    return out;
}

/// The uniform policy followed by n_random uniformly drawn deterministic policies.
inline std::vector<Policy> probe_policies(int n_states, int n_actions, int horizon, int n_random,
                                          Rng& rng) {
    std::vector<Policy> out{Policy::uniform(n_actions, "uniform")};
    std::uniform_int_distribution<int> pick(0, n_actions - 1);
    for (int i = 0; i < n_random; ++i) {
        std::vector<int> actions(static_cast<std::size_t>(horizon) * n_states);
        for (auto& a : actions)
            a = pick(rng);
        out.push_back(Policy::deterministic(horizon, n_states, n_actions, std::move(actions),
                                            "random" + std::to_string(i)));
    }
    return out;
}

/// E_{s ~ D_h(pi), a ~ pi_h(s)}[phi phi^T] for every step h, from exact occupancies.
inline std::vector<Eigen::MatrixXd> feature_covariances(const TabularMDP& mdp,
                                                        const FeatureMap& phi,
                                                        const Policy& policy) {
    const int S = mdp.n_states(), A = mdp.n_actions();
    std::vector<Eigen::MatrixXd> out;
    for (const auto& d : occupancy(mdp, policy)) {
        const int h = static_cast<int>(out.size());
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(phi.dim(), phi.dim());
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                const double w = d[s] * policy.prob(h, s, a);
                if (w == 0.0)
                    continue;
                const Eigen::VectorXd f = phi.row(s, a).transpose();
                cov.noalias() += w * f * f.transpose();
            }
        out.push_back(std::move(cov));
    }
    return out;
}

inline double min_eigenvalue(const Eigen::MatrixXd& m) {
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m, Eigen::EigenvaluesOnly)
        .eigenvalues()
        .minCoeff();
}

/**
 * Minimum over supports of size min(k, d) of the restricted covariance's smallest
 * eigenvalue. Smaller supports cannot go lower (eigenvalue interlacing).
 */
inline double restricted_eigenvalue(const Eigen::MatrixXd& cov, int k) {
    const int d = static_cast<int>(cov.rows());
    k = std::min(k, d);
    require(k >= 1, "restricted_eigenvalue: support size must be positive");
    if (k == d)
        return min_eigenvalue(cov);
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> support(static_cast<std::size_t>(k));
    Eigen::MatrixXd sub(k, k);
    std::function<void(int, int)> walk = [&](int start, int depth) {
        if (depth == k) {
            for (int i = 0; i < k; ++i)
                for (int j = 0; j < k; ++j)
                    sub(i, j) = cov(support[i], support[j]);
            best = std::min(best, min_eigenvalue(sub));
            return;
        }
        for (int i = start; i <= d - (k - depth); ++i) {
            support[depth] = i;
            walk(i + 1, depth + 1);
        }
    };
    walk(0, 0);
    return best;
}

namespace detail {

template <class Score>
SurpriseEstimate surprise_from_probes(const LinearMDP& mdp, const std::vector<Policy>& policies,
                                      double numerator, std::string method, Score score) {
    SurpriseEstimate est;
    est.method = std::move(method);
    est.policies_probed = policies.size();
    est.min_eigenvalue = std::numeric_limits<double>::infinity();
    for (const auto& pi : policies) {
        const auto covs = feature_covariances(mdp.tabular, *mdp.features, pi);
        for (std::size_t h = 0; h < covs.size(); ++h) {
            const double lam = score(covs[h]);
            if (lam < est.min_eigenvalue) {
                est.min_eigenvalue = lam;
                est.worst_policy_tag = pi.tag();
                est.worst_step = static_cast<int>(h);
            }
        }
    }
    est.finite = est.min_eigenvalue > 1e-12;
    est.l1_upper = est.finite ? numerator / est.min_eigenvalue
                              : std::numeric_limits<double>::infinity();
    return est;
}

} // namespace detail

/// L1 <= 1 / min over probes of lambda_min(E[phi phi^T]) (dense regime).
inline SurpriseEstimate surprise_bound_linear(const LinearMDP& mdp,
                                              const std::vector<Policy>& policies) {
    return detail::surprise_from_probes(mdp, policies, 1.0, "min_eigenvalue",
                                        [](const Eigen::MatrixXd& c) { return min_eigenvalue(c); });
}

/// L1 <= 4s / psi_min with psi_min the restricted eigenvalue over supports of size 4s.
inline SurpriseEstimate surprise_bound_sparse(const LinearMDP& mdp,
                                              const std::vector<Policy>& policies, int sparsity) {
    require(sparsity >= 1, "surprise_bound_sparse: sparsity must be positive");
    require(mdp.dim <= 16, "surprise_bound_sparse: support enumeration limited to d <= 16");
    return detail::surprise_from_probes(
        mdp, policies, 4.0 * sparsity, "restricted_eigenvalue",
        [&](const Eigen::MatrixXd& c) { return restricted_eigenvalue(c, 4 * sparsity); });
}

/**
 * max over sampled pairs f, f' of max_{s,a} (f - f')^2(s,a) / min_{pi,h} E_{D_h(pi)}[(f - f')^2],
 * on the class's parametric values. Pairs equal everywhere are skipped.
 */
template <FunctionClass C>
double empirical_surprise_ratio(const C& cls, const TabularMDP& mdp,
                                const std::vector<Policy>& policies, int n_pairs, Rng& rng) {
    const int S = mdp.n_states(), A = mdp.n_actions();
    std::vector<std::vector<std::vector<double>>> weights; // [probe][h][s*A+a]
    for (const auto& pi : policies) {
        std::vector<std::vector<double>> per_h;
        const auto occ = occupancy(mdp, pi);
        for (std::size_t h = 0; h < occ.size(); ++h) {
            std::vector<double> w(static_cast<std::size_t>(S) * A, 0.0);
            for (int s = 0; s < S; ++s)
                for (int a = 0; a < A; ++a)
                    w[static_cast<std::size_t>(s) * A + a] = occ[h][s] * pi.prob(static_cast<int>(h), s, a);
            per_h.push_back(std::move(w));
        }
        weights.push_back(std::move(per_h));
    }
    double worst = 0.0;
    std::vector<double> sq(static_cast<std::size_t>(S) * A);
    for (int t = 0; t < n_pairs; ++t) {
        const auto f = cls.random_handle(rng), g = cls.random_handle(rng);
        double top = 0.0;
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                const double d = cls.raw(f, s, a) - cls.raw(g, s, a);
                sq[static_cast<std::size_t>(s) * A + a] = d * d;
                top = std::max(top, d * d);
            }
        if (top == 0.0)
            continue;
        double bottom = std::numeric_limits<double>::infinity();
        for (const auto& per_h : weights)
            for (const auto& w : per_h) {
                double e = 0.0;
                for (std::size_t i = 0; i < w.size(); ++i)
                    e += w[i] * sq[i];
                bottom = std::min(bottom, e);
            }
        worst = std::max(worst, bottom > 0.0 ? top / bottom : std::numeric_limits<double>::infinity());
    }
    return worst;
}

struct RegretReport {
    std::vector<double> per_episode;
    std::vector<double> cumulative;
    /// V*_1(s_1^k) - V^{pi_k}_1(s_1^k) at the realized start states.
    std::vector<double> realized;
    std::optional<double> slope;
    double v_star = 0.0;
    double final_regret = 0.0;
    std::map<std::string, double> baseline_final;
};

/**
 * OLS slope of log(cumulative) on log(k) over episodes k in [K/2, K]. Undefined when
 * fewer than two points in that window have positive cumulative regret.
 */
inline std::optional<double> log_log_slope(const std::vector<double>& cumulative) {
    const auto K = static_cast<long long>(cumulative.size());
    if (K < 2)
        return std::nullopt;
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    long long n = 0;
    for (long long k = (K + 1) / 2; k <= K; ++k) {
        const double c = cumulative[static_cast<std::size_t>(k - 1)];
        if (!(c > 0.0))
            continue;
        const double x = std::log(static_cast<double>(k)), y = std::log(c);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    if (n < 2)
        return std::nullopt;
    const double denom = static_cast<double>(n) * sxx - sx * sx;
    if (denom <= 0.0)
        return std::nullopt;
    return (static_cast<double>(n) * sxy - sx * sy) / denom;
}

/// Policy executed in episode k of the run.
inline Policy episode_policy(const RunLog& log, long long k, int n_actions) {
    const auto* model = log.model_for_episode(k);
    return model ? model->policy() : Policy::uniform(n_actions, "uniform");
}

inline RegretReport regret_report(const RunLog& log, const PlanningResult& plan,
                                  const TabularMDP& mdp) {
    RegretReport rep;
    rep.v_star = plan.initial_value(mdp);
    const auto uniform = Policy::uniform(mdp.n_actions(), "uniform");
    const double uniform_value = policy_value(mdp, uniform);
    const auto uniform_states = policy_state_values(mdp, uniform);
    std::map<int, std::pair<double, std::vector<double>>> cache;
    for (const auto& e : log.epochs) {
        const auto pi = e.policy();
        cache[e.epoch] = {policy_value(mdp, pi), policy_state_values(mdp, pi)};
    }
    double cum = 0.0;
    for (const auto& traj : log.trajectories) {
        const auto* model = log.model_for_episode(traj.episode);
        const double value = model ? cache[model->epoch].first : uniform_value;
        const auto& states = model ? cache[model->epoch].second : uniform_states;
        const double r = rep.v_star - value;
        cum += r;
        rep.per_episode.push_back(r);
        rep.cumulative.push_back(cum);
        const int s1 = traj.steps.front().state;
        rep.realized.push_back(plan.v_at(0, s1) - states[s1]);
    }
    rep.final_regret = cum;
    rep.slope = log_log_slope(rep.cumulative);
    return rep;
}

struct OptimismAudit {
    std::size_t checks = 0;
    std::size_t violations = 0;
    double violation_fraction = 0.0;
    std::size_t upper_violations = 0;
    double max_upper_excess = -std::numeric_limits<double>::infinity();
};

/**
 * Over distinct visited (m, h, s, a): counts Q^m_h < Q*_h - tol, and checks
 * Q^m_h <= r + P V^m_{h+1} + 2 b^m_h + tol.
 */
inline OptimismAudit optimism_audit(const RunLog& log, const PlanningResult& plan,
                                    const TabularMDP& mdp, double tol = 1e-9) {
    OptimismAudit audit;
    const int S = mdp.n_states(), A = mdp.n_actions();
    for (const auto& model : log.epochs) {
        std::vector<char> seen(static_cast<std::size_t>(model.horizon) * S * A, 0);
        for (long long k = model.first_episode; k <= model.last_episode; ++k) {
            const auto& traj = log.trajectories[static_cast<std::size_t>(k - 1)];
            for (int h = 0; h < model.horizon; ++h) {
                const auto& st = traj.steps[static_cast<std::size_t>(h)];
                const auto c = model.cell(h, st.state, st.action);
                if (seen[c])
                    continue;
                seen[c] = 1;
                ++audit.checks;
                const double q = model.q[c];
                if (q < plan.q_at(h, st.state, st.action) - tol)
                    ++audit.violations;
                double backup = mdp.reward(st.state, st.action);
                const auto row = mdp.transition_row(st.state, st.action);
                for (int n = 0; n < S; ++n)
                    backup += row[n] * model.v_at(h + 1, n);
                const double excess = q - (backup + 2.0 * model.bonus_values[c]);
                audit.max_upper_excess = std::max(audit.max_upper_excess, excess);
                if (excess > tol)
                    ++audit.upper_violations;
            }
        }
    }
    audit.violation_fraction =
        audit.checks ? static_cast<double>(audit.violations) / static_cast<double>(audit.checks) : 0.0;
    return audit;
}

struct DecompositionCheck {
    double realized_regret = 0.0;
    double warmup_term = 0.0;
    double bonus_term = 0.0;
    double martingale_term = 0.0;
    double rhs = 0.0;
    bool holds = false;
};

/// Reg <= tau_{M0+1} H + 2 sum_{m > M0} sum_k sum_h b + 8 H sqrt(T ln(16/delta)).
inline DecompositionCheck decomposition_check(const RunLog& log, const PlanningResult& plan,
                                              const TabularMDP& mdp, double delta,
                                              double tol = 1e-6) {
    DecompositionCheck out;
    const auto rep = regret_report(log, plan, mdp);
    for (double r : rep.realized)
        out.realized_regret += r;
    const int H = mdp.horizon();
    const int m0 = log.warmup.capped ? log.schedule.m_max : log.schedule.m0;
    out.warmup_term = static_cast<double>(EpochSchedule::tau(m0 + 1)) * H;
    double bonus_sum = 0.0;
    for (const auto& model : log.epochs) {
        if (model.epoch < m0 + 1)
            continue;
        for (long long k = model.first_episode; k <= model.last_episode; ++k) {
            const auto& traj = log.trajectories[static_cast<std::size_t>(k - 1)];
            for (int h = 0; h < H; ++h) {
                const auto& st = traj.steps[static_cast<std::size_t>(h)];
                bonus_sum += model.bonus_at(h, st.state, st.action);
            }
        }
    }
    out.bonus_term = 2.0 * bonus_sum;
    const double T = static_cast<double>(log.schedule.t_total);
    out.martingale_term = 8.0 * H * std::sqrt(T * std::log(16.0 / delta));
    out.rhs = out.warmup_term + out.bonus_term + out.martingale_term;
    out.holds = out.realized_regret <= out.rhs + tol;
    return out;
}

} // namespace lsvi
