#pragma once

#include "lsvi/common.hpp"

#include <Eigen/Dense>

#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lsvi {

// Steps are 0-based internally (h = 0 .. H-1); episodes and epochs are 1-based.

/**
 * Finite episodic MDP with time-homogeneous dynamics and deterministic rewards.
 *
 * transition is stored row-major as [s][a][s'], reward as [s][a].
 */
class TabularMDP {
public:
    TabularMDP() = default;

    TabularMDP(int n_states, int n_actions, int horizon, std::vector<double> transition,
               std::vector<double> reward, std::vector<double> initial)
        : n_states_(n_states), n_actions_(n_actions), horizon_(horizon),
          transition_(std::move(transition)), reward_(std::move(reward)),
          initial_(std::move(initial)) {
        validate();
    }

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }
    int horizon() const { return horizon_; }

    double transition(int s, int a, int next) const {
        return transition_[row_offset(s, a) + static_cast<std::size_t>(next)];
    }
    std::span<const double> transition_row(int s, int a) const {
        return {transition_.data() + row_offset(s, a), static_cast<std::size_t>(n_states_)};
    }
    double reward(int s, int a) const { return reward_[index(s, a)]; }
    std::span<const double> initial_dist() const { return initial_; }

    const std::vector<double>& transitions() const { return transition_; }
    const std::vector<double>& rewards() const { return reward_; }

    std::size_t index(int s, int a) const {
        return static_cast<std::size_t>(s) * static_cast<std::size_t>(n_actions_) +
               static_cast<std::size_t>(a);
    }

    int sample_initial(Rng& rng) const { return sample_from(initial_, rng); }
    int sample_next(int s, int a, Rng& rng) const { return sample_from(transition_row(s, a), rng); }

    /// Same dynamics with a replaced reward table.
    TabularMDP with_rewards(std::vector<double> reward) const {
        return TabularMDP(n_states_, n_actions_, horizon_, transition_, std::move(reward), initial_);
    }

private:
    std::size_t row_offset(int s, int a) const {
        return index(s, a) * static_cast<std::size_t>(n_states_);
    }

    static int sample_from(std::span<const double> probs, Rng& rng) {
        const double u = uniform01(rng);
        double acc = 0.0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc)
                return static_cast<int>(i);
        }
        // u landed in the rounding gap at the end: return the last supported index.
        for (std::size_t i = probs.size(); i-- > 0;)
            if (probs[i] > 0.0)
                return static_cast<int>(i);
        return 0;
    }

    static void check_distribution(std::span<const double> p, const std::string& what) {
        double sum = 0.0;
        for (double x : p) {
            require(std::isfinite(x) && x >= 0.0, what + " has a negative or non-finite entry");
            sum += x;
        }
        require(std::abs(sum - 1.0) <= 1e-12, what + " does not sum to 1");
    }

    void validate() const {
        require(n_states_ >= 1 && n_actions_ >= 1 && horizon_ >= 1,
                "TabularMDP: S, A and H must be positive");
        const auto sa = static_cast<std::size_t>(n_states_) * static_cast<std::size_t>(n_actions_);
        require(transition_.size() == sa * static_cast<std::size_t>(n_states_),
                "TabularMDP: transition tensor has the wrong size");
        require(reward_.size() == sa, "TabularMDP: reward table has the wrong size");
        require(initial_.size() == static_cast<std::size_t>(n_states_),
                "TabularMDP: initial distribution has the wrong size");
        for (int s = 0; s < n_states_; ++s)
            for (int a = 0; a < n_actions_; ++a) {
                check_distribution(transition_row(s, a),
                                   "transition row (" + std::to_string(s) + "," +
                                       std::to_string(a) + ")");
                const double r = reward(s, a);
                require(std::isfinite(r) && r >= 0.0 && r <= 1.0, "reward outside [0,1]");
            }
        check_distribution(initial_, "initial distribution");
    }

    int n_states_ = 0;
    int n_actions_ = 0;
    int horizon_ = 0;
    std::vector<double> transition_;
    std::vector<double> reward_;
    std::vector<double> initial_;
};

/// Dense feature tensor phi(s,a) in R^d over a finite state-action space.
class FeatureMap {
public:
    FeatureMap() = default;
    FeatureMap(int n_states, int n_actions, Eigen::MatrixXd rows)
        : n_states_(n_states), n_actions_(n_actions), rows_(std::move(rows)) {
        require(rows_.rows() == static_cast<Eigen::Index>(n_states) * n_actions,
                "FeatureMap: expected one row per state-action pair");
        require(rows_.cols() >= 1, "FeatureMap: dimension must be positive");
    }

    static FeatureMap one_hot(int n_states, int n_actions) {
        const int n = n_states * n_actions;
        return FeatureMap(n_states, n_actions, Eigen::MatrixXd::Identity(n, n));
    }

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }
    int dim() const { return static_cast<int>(rows_.cols()); }

    auto row(int s, int a) const { return rows_.row(static_cast<Eigen::Index>(s) * n_actions_ + a); }
    const Eigen::MatrixXd& matrix() const { return rows_; }

private:
    int n_states_ = 0;
    int n_actions_ = 0;
    Eigen::MatrixXd rows_;
};

/**
 * Low-rank MDP: P(s'|s,a) = phi(s,a)^T mu(s'), r(s,a) = phi(s,a)^T theta.
 *
 * Realized over finite S and A so that it carries an exact tabular view.
 * renormalization_gap is the largest entry-wise change made when projecting
 * phi^T mu onto valid probability rows (0 when the factorization is exact).
 */
struct LinearMDP {
    int dim = 0;
    std::optional<int> sparsity;
    std::shared_ptr<const FeatureMap> features;
    std::vector<double> reward_param;
    std::vector<double> measures; // [i][s'], d x S
    TabularMDP tabular;
    double renormalization_gap = 0.0;

    int horizon() const { return tabular.horizon(); }
};

struct Step {
    int state = 0;
    int action = 0;
    double reward = 0.0;
    int next_state = 0;
};

struct Trajectory {
    std::vector<Step> steps;
    long long episode = 0;
    std::string policy_tag;

    double total_return() const {
        double sum = 0.0;
        for (const auto& st : steps)
            sum += st.reward;
        return sum;
    }
};

/// Markov policy: either uniform over actions or deterministic per (h, s).
class Policy {
public:
    enum class Kind { uniform_random, greedy_from_q };

    static Policy uniform(int n_actions, std::string tag = "uniform") {
        Policy p;
        p.kind_ = Kind::uniform_random;
        p.n_actions_ = n_actions;
        p.tag_ = std::move(tag);
        return p;
    }

    /// actions indexed [h][s].
    static Policy deterministic(int horizon, int n_states, int n_actions, std::vector<int> actions,
                                std::string tag) {
        require(actions.size() == static_cast<std::size_t>(horizon) * n_states,
                "Policy: action table has the wrong size");
        for (int a : actions)
            require(a >= 0 && a < n_actions, "Policy: action out of range");
        Policy p;
        p.kind_ = Kind::greedy_from_q;
        p.horizon_ = horizon;
        p.n_states_ = n_states;
        p.n_actions_ = n_actions;
        p.actions_ = std::move(actions);
        p.tag_ = std::move(tag);
        return p;
    }

    /// Greedy with respect to q indexed [h][s][a]; ties go to the lowest action index.
    static Policy greedy(std::span<const double> q, int horizon, int n_states, int n_actions,
                         std::string tag) {
        std::vector<int> actions(static_cast<std::size_t>(horizon) * n_states, 0);
        for (int h = 0; h < horizon; ++h)
            for (int s = 0; s < n_states; ++s) {
                const auto base = (static_cast<std::size_t>(h) * n_states + s) * n_actions;
                int best = 0;
                for (int a = 1; a < n_actions; ++a)
                    if (q[base + a] > q[base + best])
                        best = a;
                actions[static_cast<std::size_t>(h) * n_states + s] = best;
            }
        return deterministic(horizon, n_states, n_actions, std::move(actions), std::move(tag));
    }

    Kind kind() const { return kind_; }
    const std::string& tag() const { return tag_; }
    const std::vector<int>& actions() const { return actions_; }

    int action(int h, int s) const {
        return actions_[static_cast<std::size_t>(h) * n_states_ + static_cast<std::size_t>(s)];
    }

    double prob(int h, int s, int a) const {
        if (kind_ == Kind::uniform_random)
            return 1.0 / n_actions_;
        return action(h, s) == a ? 1.0 : 0.0;
    }

    int act(int h, int s, Rng& rng) const {
        if (kind_ == Kind::uniform_random)
            return std::uniform_int_distribution<int>(0, n_actions_ - 1)(rng);
        return action(h, s);
    }

private:
    Kind kind_ = Kind::uniform_random;
    int horizon_ = 0;
    int n_states_ = 0;
    int n_actions_ = 1;
    std::vector<int> actions_;
    std::string tag_;
};

inline Trajectory rollout(const TabularMDP& mdp, const Policy& policy, Rng& rng,
                          long long episode = 0) {
    Trajectory traj;
    traj.episode = episode;
    traj.policy_tag = policy.tag();
    traj.steps.reserve(static_cast<std::size_t>(mdp.horizon()));
    int s = mdp.sample_initial(rng);
    for (int h = 0; h < mdp.horizon(); ++h) {
        const int a = policy.act(h, s, rng);
        const int next = mdp.sample_next(s, a, rng);
        traj.steps.push_back({s, a, mdp.reward(s, a), next});
        s = next;
    }
    return traj;
}

/// Per-step optimal values. q is [h][s][a], v is [h][s] with v at h = H identically zero.
struct PlanningResult {
    int horizon = 0;
    int n_states = 0;
    int n_actions = 0;
    std::vector<double> q;
    std::vector<double> v;

    double q_at(int h, int s, int a) const {
        return q[(static_cast<std::size_t>(h) * n_states + s) * n_actions + a];
    }
    double v_at(int h, int s) const { return v[static_cast<std::size_t>(h) * n_states + s]; }

    double initial_value(const TabularMDP& mdp) const {
        double sum = 0.0;
        for (int s = 0; s < n_states; ++s)
            sum += mdp.initial_dist()[s] * v_at(0, s);
        return sum;
    }
};

inline PlanningResult exact_value_iteration(const TabularMDP& mdp) {
    const int H = mdp.horizon(), S = mdp.n_states(), A = mdp.n_actions();
    PlanningResult out{H, S, A, std::vector<double>(static_cast<std::size_t>(H) * S * A, 0.0),
                       std::vector<double>(static_cast<std::size_t>(H + 1) * S, 0.0)};
    for (int h = H - 1; h >= 0; --h) {
        const double* v_next = out.v.data() + static_cast<std::size_t>(h + 1) * S;
        for (int s = 0; s < S; ++s) {
            double best = -1.0;
            for (int a = 0; a < A; ++a) {
                const auto row = mdp.transition_row(s, a);
                double backup = mdp.reward(s, a);
                for (int n = 0; n < S; ++n)
                    backup += row[n] * v_next[n];
                out.q[(static_cast<std::size_t>(h) * S + s) * A + a] = backup;
                best = std::max(best, backup);
            }
            out.v[static_cast<std::size_t>(h) * S + s] = best;
        }
    }
    return out;
}

/// V_1^pi(s) for every start state, by backward dynamic programming.
inline std::vector<double> policy_state_values(const TabularMDP& mdp, const Policy& policy) {
    const int H = mdp.horizon(), S = mdp.n_states(), A = mdp.n_actions();
    std::vector<double> v_next(static_cast<std::size_t>(S), 0.0), v(static_cast<std::size_t>(S));
    for (int h = H - 1; h >= 0; --h) {
        for (int s = 0; s < S; ++s) {
            double value = 0.0;
            for (int a = 0; a < A; ++a) {
                const double pa = policy.prob(h, s, a);
                if (pa == 0.0)
                    continue;
                const auto row = mdp.transition_row(s, a);
                double backup = mdp.reward(s, a);
                for (int n = 0; n < S; ++n)
                    backup += row[n] * v_next[n];
                value += pa * backup;
            }
            v[s] = value;
        }
        std::swap(v, v_next);
    }
    return v_next;
}

/// E_{s1 ~ mu}[V_1^pi(s1)].
inline double policy_value(const TabularMDP& mdp, const Policy& policy) {
    const auto v = policy_state_values(mdp, policy);
    double sum = 0.0;
    for (int s = 0; s < mdp.n_states(); ++s)
        sum += mdp.initial_dist()[s] * v[s];
    return sum;
}

/// State distributions D_h(pi) for h = 0 .. H-1, by forward recursion.
inline std::vector<std::vector<double>> occupancy(const TabularMDP& mdp, const Policy& policy) {
    const int H = mdp.horizon(), S = mdp.n_states(), A = mdp.n_actions();
    std::vector<std::vector<double>> out;
    out.reserve(static_cast<std::size_t>(H));
    std::vector<double> d(mdp.initial_dist().begin(), mdp.initial_dist().end());
    for (int h = 0; h < H; ++h) {
        out.push_back(d);
        std::vector<double> next(static_cast<std::size_t>(S), 0.0);
        for (int s = 0; s < S; ++s) {
            if (d[s] == 0.0)
                continue;
            for (int a = 0; a < A; ++a) {
                const double w = d[s] * policy.prob(h, s, a);
                if (w == 0.0)
                    continue;
                const auto row = mdp.transition_row(s, a);
                for (int n = 0; n < S; ++n)
                    next[n] += w * row[n];
            }
        }
        d = std::move(next);
    }
    return out;
}

namespace detail {

/// Flat Dirichlet(1,...,1) sample of the given size.
inline std::vector<double> dirichlet_flat(std::size_t n, Rng& rng) {
    std::exponential_distribution<double> expo(1.0);
    std::vector<double> x(n);
    double sum = 0.0;
    for (auto& v : x) {
        v = expo(rng);
        sum += v;
    }
    for (auto& v : x)
        v /= sum;
    return x;
}

/// Random distribution over n outcomes with every entry >= min_prob, summing to 1.
inline std::vector<double> floored_distribution(std::size_t n, double min_prob, Rng& rng) {
    auto x = dirichlet_flat(n, rng);
    const double free_mass = 1.0 - static_cast<double>(n) * min_prob;
    for (auto& v : x)
        v = min_prob + free_mass * v;
    // renormalize away accumulated rounding so rows sum to 1 to machine precision
    const double sum = std::accumulate(x.begin(), x.end(), 0.0);
    for (auto& v : x)
        v = std::max(v / sum, min_prob);
    return x;
}

} // namespace detail

/**
 * Random tabular MDP whose transition and initial entries are all >= min_prob.
 * Rewards are drawn uniformly from [0,1].
 */
inline TabularMDP make_random_tabular(int n_states, int n_actions, int horizon, double min_prob,
                                      Rng& rng) {
    require(n_states >= 1 && n_actions >= 1 && horizon >= 1,
            "make_random_tabular: S, A and H must be positive");
    require(min_prob >= 0.0, "make_random_tabular: min_prob must be nonnegative");
    require(min_prob * n_states <= 1.0 + 1e-12, "make_random_tabular: min_prob * S exceeds 1");
    const auto S = static_cast<std::size_t>(n_states);
    std::vector<double> transition;
    transition.reserve(S * S * static_cast<std::size_t>(n_actions));
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) {
            auto row = detail::floored_distribution(S, min_prob, rng);
            transition.insert(transition.end(), row.begin(), row.end());
        }
    std::vector<double> reward(S * static_cast<std::size_t>(n_actions));
    for (auto& r : reward)
        r = uniform01(rng);
    auto initial = detail::floored_distribution(S, min_prob, rng);
    return TabularMDP(n_states, n_actions, horizon, std::move(transition), std::move(reward),
                      std::move(initial));
}

struct LinearMdpOptions {
    /// Every feature vector and the reward parameter get at most this many nonzeros.
    std::optional<int> sparsity;
    /// Floor applied to every entry of the factor measures and the initial distribution.
    double min_prob = 0.0;
    /// Mass placed on the anchor coordinate (s mod d) of phi(s,a); 0 disables anchoring.
    double anchor_weight = 0.0;
    /// Std-dev of Gaussian noise added to the measures, making them signed.
    double measure_noise = 0.0;
};

/**
 * Random low-rank MDP. Features are probability vectors over d latent factors
 * (restricted to an s-sparse support in the sparse regime), so ||phi||_1 = 1 and
 * both ||phi||_2 <= 1 and ||phi||_inf <= 1 hold. Each factor measure is a
 * distribution over S; with measure_noise > 0 they become signed and the realized
 * rows are clipped at 0 and renormalized, with the gap recorded.
 */
inline LinearMDP make_linear_mdp(int dim, int n_states, int n_actions, int horizon, Rng& rng,
                                 const LinearMdpOptions& options = {}) {
    require(dim >= 1, "make_linear_mdp: d must be positive");
    require(n_states >= 1 && n_actions >= 1 && horizon >= 1,
            "make_linear_mdp: S, A and H must be positive");
    if (options.sparsity)
        require(*options.sparsity >= 1 && *options.sparsity <= dim,
                "make_linear_mdp: sparsity must lie in [1, d]");
    require(options.min_prob >= 0.0 && options.min_prob * n_states <= 1.0 + 1e-12,
            "make_linear_mdp: min_prob * S exceeds 1");
    require(options.anchor_weight >= 0.0 && options.anchor_weight <= 1.0,
            "make_linear_mdp: anchor_weight must lie in [0,1]");
    require(options.measure_noise >= 0.0, "make_linear_mdp: measure_noise must be nonnegative");

    const int support_size = options.sparsity.value_or(dim);
    const auto S = static_cast<std::size_t>(n_states);
    const auto d = static_cast<std::size_t>(dim);

    Eigen::MatrixXd phi = Eigen::MatrixXd::Zero(n_states * n_actions, dim);
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) {
            const int anchor = s % dim;
            std::vector<int> support{anchor};
            if (support_size == dim) {
                support.resize(d);
                std::iota(support.begin(), support.end(), 0);
            } else {
                std::vector<int> others;
                for (int i = 0; i < dim; ++i)
                    if (i != anchor)
                        others.push_back(i);
                std::shuffle(others.begin(), others.end(), rng);
                support.insert(support.end(), others.begin(),
                               others.begin() + (support_size - 1));
            }
            auto weights = detail::dirichlet_flat(support.size(), rng);
            const auto row = static_cast<Eigen::Index>(s) * n_actions + a;
            for (std::size_t j = 0; j < support.size(); ++j)
                phi(row, support[j]) = (1.0 - options.anchor_weight) * weights[j];
            phi(row, anchor) += options.anchor_weight;
        }

    std::vector<double> measures;
    measures.reserve(d * S);
    for (int i = 0; i < dim; ++i) {
        auto mu = detail::floored_distribution(S, options.min_prob, rng);
        if (options.measure_noise > 0.0) {
            std::normal_distribution<double> noise(0.0, options.measure_noise);
            for (auto& v : mu)
                v += noise(rng);
        }
        measures.insert(measures.end(), mu.begin(), mu.end());
    }

    std::vector<double> theta(d, 0.0);
    {
        std::vector<int> coords(d);
        std::iota(coords.begin(), coords.end(), 0);
        std::shuffle(coords.begin(), coords.end(), rng);
        for (int j = 0; j < support_size; ++j)
            theta[static_cast<std::size_t>(coords[j])] = uniform01(rng);
    }

    std::vector<double> transition;
    transition.reserve(S * S * static_cast<std::size_t>(n_actions));
    std::vector<double> reward;
    double gap = 0.0;
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) {
            const auto row = static_cast<Eigen::Index>(s) * n_actions + a;
            std::vector<double> p(S, 0.0);
            for (int i = 0; i < dim; ++i)
                for (std::size_t n = 0; n < S; ++n)
                    p[n] += phi(row, i) * measures[static_cast<std::size_t>(i) * S + n];
            std::vector<double> clipped(S);
            double sum = 0.0;
            for (std::size_t n = 0; n < S; ++n) {
                clipped[n] = std::max(p[n], 0.0);
                sum += clipped[n];
            }
            require(sum > 0.0, "make_linear_mdp: realized transition row has no mass");
            for (std::size_t n = 0; n < S; ++n) {
                clipped[n] /= sum;
                gap = std::max(gap, std::abs(clipped[n] - p[n]));
            }
            transition.insert(transition.end(), clipped.begin(), clipped.end());
            double r = 0.0;
            for (int i = 0; i < dim; ++i)
                r += phi(row, i) * theta[static_cast<std::size_t>(i)];
            reward.push_back(clamp_to(r, 0.0, 1.0));
        }
    auto initial = detail::floored_distribution(S, options.min_prob, rng);

    LinearMDP out;
    out.dim = dim;
    out.sparsity = options.sparsity;
    out.features = std::make_shared<const FeatureMap>(n_states, n_actions, std::move(phi));
    out.reward_param = std::move(theta);
    out.measures = std::move(measures);
    out.tabular = TabularMDP(n_states, n_actions, horizon, std::move(transition), std::move(reward),
                             std::move(initial));
    out.renormalization_gap = gap;
    return out;
}

/// Rewards shifted by zeta * u(s,a), u ~ Unif[-1,1], clipped back into [0,1].
inline TabularMDP perturb_rewards(const TabularMDP& mdp, double zeta, Rng& rng) {
    require(zeta >= 0.0, "perturb_rewards: zeta must be nonnegative");
    std::vector<double> reward = mdp.rewards();
    for (auto& r : reward)
        r = clamp_to(r + zeta * (2.0 * uniform01(rng) - 1.0), 0.0, 1.0);
    return mdp.with_rewards(std::move(reward));
}

} // namespace lsvi
