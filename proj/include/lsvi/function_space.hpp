#pragma once

#include "lsvi/common.hpp"
#include "lsvi/mdp.hpp"

#include <Eigen/Dense>

#include <concepts>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace lsvi {

/// Parameters of one member of a function class; the class gives them meaning.
struct FunctionHandle {
    std::string class_tag;
    std::vector<double> params;

    friend bool operator==(const FunctionHandle&, const FunctionHandle&) = default;
};

/**
 * Multiset of state-action pairs, kept as (pair, multiplicity) entries in
 * insertion order. Insertion order is the canonical order in which the
 * subsampler draws its coins.
 */
class StateActionSet {
public:
    struct Entry {
        StateAction sa;
        std::uint64_t multiplicity = 0;
    };

    StateActionSet() = default;

    void add(StateAction sa, std::uint64_t multiplicity = 1) {
        if (multiplicity == 0)
            return;
        entries_.push_back({sa, multiplicity});
        total_ += multiplicity;
    }
    void add(int s, int a, std::uint64_t multiplicity = 1) { add(StateAction{s, a}, multiplicity); }

    const std::vector<Entry>& entries() const { return entries_; }
    std::uint64_t total() const { return total_; }
    bool empty() const { return total_ == 0; }

    /// Multiplicity of every distinct pair.
    std::map<StateAction, std::uint64_t> aggregated() const {
        std::map<StateAction, std::uint64_t> out;
        for (const auto& e : entries_)
            out[e.sa] += e.multiplicity;
        return out;
    }

    /// Multiplicities as a dense [s][a] table.
    std::vector<double> dense_counts(int n_states, int n_actions) const {
        std::vector<double> counts(static_cast<std::size_t>(n_states) * n_actions, 0.0);
        for (const auto& e : entries_)
            counts[static_cast<std::size_t>(e.sa.state) * n_actions + e.sa.action] +=
                static_cast<double>(e.multiplicity);
        return counts;
    }

private:
    std::vector<Entry> entries_;
    std::uint64_t total_ = 0;
};

/// Card_d: number of distinct state-action pairs.
inline std::size_t distinct_count(const StateActionSet& set) {
    std::set<StateAction> seen;
    for (const auto& e : set.entries())
        seen.insert(e.sa);
    return seen.size();
}

struct LabeledPoint {
    int state = 0;
    int action = 0;
    double target = 0.0;
};

using LabeledSet = std::vector<LabeledPoint>;

struct ErmResult {
    FunctionHandle handle;
    double objective = 0.0;
    bool converged = true;
};

struct WidthResult {
    double value = 0.0;
    /// Set when the value comes from a local search and may underestimate the width.
    bool lower_bound = false;
};

namespace detail {

/// Squared-loss sufficient statistics sum(n phi phi^T), sum(y phi), sum(y^2).
struct Normal {
    Eigen::MatrixXd gram;
    Eigen::VectorXd moment;
    double target_sq = 0.0;
};

inline Normal normal_equations(const FeatureMap& phi, const LabeledSet& data) {
    const int d = phi.dim();
    const int S = phi.n_states(), A = phi.n_actions();
    std::vector<double> count(static_cast<std::size_t>(S) * A, 0.0), sum(count.size(), 0.0);
    Normal out{Eigen::MatrixXd::Zero(d, d), Eigen::VectorXd::Zero(d), 0.0};
    for (const auto& p : data) {
        const auto i = static_cast<std::size_t>(p.state) * A + p.action;
        count[i] += 1.0;
        sum[i] += p.target;
        out.target_sq += p.target * p.target;
    }
    for (int s = 0; s < S; ++s)
        for (int a = 0; a < A; ++a) {
            const auto i = static_cast<std::size_t>(s) * A + a;
            if (count[i] == 0.0)
                continue;
            const Eigen::VectorXd f = phi.row(s, a).transpose();
            out.gram.noalias() += count[i] * f * f.transpose();
            out.moment.noalias() += sum[i] * f;
        }
    return out;
}

inline Eigen::MatrixXd gram_of(const FeatureMap& phi, const StateActionSet& z) {
    const int d = phi.dim();
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d, d);
    for (const auto& [sa, n] : z.aggregated()) {
        const Eigen::VectorXd f = phi.row(sa.state, sa.action).transpose();
        gram.noalias() += static_cast<double>(n) * f * f.transpose();
    }
    return gram;
}

inline double squared_loss(const Normal& ne, const Eigen::VectorXd& w) {
    return std::max(0.0, w.dot(ne.gram * w) - 2.0 * ne.moment.dot(w) + ne.target_sq);
}

/// Eigen-decomposition with eigenvalues below 1e-10 * max treated as exactly zero.
struct ThresholdedEigen {
    Eigen::MatrixXd vectors;
    Eigen::VectorXd values;
};

inline ThresholdedEigen thresholded_eigen(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
    ThresholdedEigen out{solver.eigenvectors(), solver.eigenvalues()};
    const double top = out.values.size() ? out.values.cwiseAbs().maxCoeff() : 0.0;
    for (Eigen::Index i = 0; i < out.values.size(); ++i)
        if (out.values[i] <= 1e-10 * top)
            out.values[i] = 0.0;
    return out;
}

/**
 * Least squares over the Euclidean ball of radius `bound`, minimum-norm among
 * minimizers. The unconstrained pseudo-inverse solution is returned when it fits
 * in the ball; otherwise the ridge path (G + gamma I)^-1 b is bisected to the boundary.
 */
inline Eigen::VectorXd ball_least_squares(const Normal& ne, double bound) {
    const auto eig = thresholded_eigen(ne.gram);
    const Eigen::VectorXd b = eig.vectors.transpose() * ne.moment;
    const Eigen::Index n = b.size();
    Eigen::VectorXd coef = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i)
        if (eig.values[i] > 0.0)
            coef[i] = b[i] / eig.values[i];
    if (coef.norm() <= bound)
        return eig.vectors * coef;
    auto norm_at = [&](double gamma) {
        double sq = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double x = b[i] / (eig.values[i] + gamma);
            sq += x * x;
        }
        return std::sqrt(sq);
    };
    double lo = 0.0, hi = std::max(b.norm() / bound, 1e-300);
    for (int it = 0; it < 400 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (norm_at(mid) > bound ? lo : hi) = mid;
    }
    for (Eigen::Index i = 0; i < n; ++i)
        coef[i] = b[i] / (eig.values[i] + hi);
    return eig.vectors * coef;
}

/**
 * Convex set {x : sum_i a_i (x_i - c_i)^2 <= r} intersected with {||x|| <= B},
 * expressed in the eigenbasis of the ellipsoid's shape matrix.
 */
struct EllipsoidBall {
    Eigen::VectorXd a;
    Eigen::VectorXd c;
    double radius = 0.0;
    double ball = 0.0;

    double ellipsoid_value(const Eigen::VectorXd& x) const {
        return (a.array() * (x - c).array().square()).sum();
    }
};

/// argmax over the ball of p.x - alpha * sum a_i (x_i - c_i)^2 (a trust-region subproblem).
inline Eigen::VectorXd penalized_ball_maximizer(const EllipsoidBall& e, const Eigen::VectorXd& p,
                                                double alpha) {
    const Eigen::Index n = p.size();
    Eigen::VectorXd num(n), den(n), x = Eigen::VectorXd::Zero(n);
    bool interior = true;
    for (Eigen::Index i = 0; i < n; ++i) {
        num[i] = p[i] + 2.0 * alpha * e.a[i] * e.c[i];
        den[i] = 2.0 * alpha * e.a[i];
        if (den[i] > 0.0)
            x[i] = num[i] / den[i];
        else if (num[i] != 0.0)
            interior = false;
    }
    if (interior && x.norm() <= e.ball)
        return x;
    auto at = [&](double gamma) {
        Eigen::VectorXd y(n);
        for (Eigen::Index i = 0; i < n; ++i)
            y[i] = num[i] / (den[i] + 2.0 * gamma);
        return y;
    };
    double lo = 0.0, hi = std::max(num.norm() / (2.0 * e.ball), 1e-300);
    for (int it = 0; it < 400 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (at(mid).norm() > e.ball ? lo : hi) = mid;
    }
    return at(hi);
}

/**
 * max p.x over an EllipsoidBall, solved through the one-dimensional Lagrange dual
 * on the ellipsoid constraint. The returned value is attained by a feasible point.
 */
inline double max_linear(const EllipsoidBall& e, const Eigen::VectorXd& p) {
    const Eigen::Index n = p.size();
    if (e.radius <= 0.0) {
        // Pinned on the range of the shape matrix; free along its null space.
        double value = 0.0, pinned_sq = 0.0, free_sq = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (e.a[i] > 0.0) {
                value += p[i] * e.c[i];
                pinned_sq += e.c[i] * e.c[i];
            } else {
                free_sq += p[i] * p[i];
            }
        }
        return value + std::sqrt(std::max(0.0, e.ball * e.ball - pinned_sq)) * std::sqrt(free_sq);
    }
    Eigen::VectorXd x = penalized_ball_maximizer(e, p, 0.0);
    if (e.ellipsoid_value(x) <= e.radius)
        return p.dot(x);
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 2000; ++it) {
        x = penalized_ball_maximizer(e, p, hi);
        if (e.ellipsoid_value(x) <= e.radius)
            break;
        lo = hi;
        hi *= 4.0;
    }
    for (int it = 0; it < 400 && hi - lo > 1e-14 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        const Eigen::VectorXd y = penalized_ball_maximizer(e, p, mid);
        if (e.ellipsoid_value(y) <= e.radius) {
            hi = mid;
            x = y;
        } else {
            lo = mid;
        }
    }
    return p.dot(x);
}

} // namespace detail

/// All functions S x A -> [0, H+1].
class TabularClass {
public:
    static constexpr const char* kind_tag = "tabular";

    struct WidthContext {
        std::vector<double> counts;
        std::vector<double> anchor;
        double radius = 0.0;
    };

    TabularClass(int n_states, int n_actions, int horizon, double cover_multiplier = 1.0)
        : n_states_(n_states), n_actions_(n_actions), horizon_(horizon),
          cover_multiplier_(cover_multiplier) {
        require(n_states >= 1 && n_actions >= 1 && horizon >= 1,
                "TabularClass: S, A and H must be positive");
        require(cover_multiplier > 0.0, "TabularClass: cover multiplier must be positive");
    }

    int n_states() const { return n_states_; }
    int n_actions() const { return n_actions_; }
    int horizon() const { return horizon_; }
    double range_high() const { return horizon_ + 1.0; }
    std::size_t n_params() const { return static_cast<std::size_t>(n_states_) * n_actions_; }

    FunctionHandle zero() const { return {kind_tag, std::vector<double>(n_params(), 0.0)}; }

    /// Handle whose table equals the given [s][a] values (clipped into range).
    FunctionHandle from_table(std::vector<double> table) const {
        require(table.size() == n_params(), "TabularClass: table has the wrong size");
        for (auto& v : table)
            v = clamp_to(v, 0.0, range_high());
        return {kind_tag, std::move(table)};
    }

    double raw(const FunctionHandle& f, int s, int a) const {
        return f.params[static_cast<std::size_t>(s) * n_actions_ + a];
    }

    bool contains(const FunctionHandle& f) const {
        if (f.params.size() != n_params())
            return false;
        return std::all_of(f.params.begin(), f.params.end(),
                           [&](double v) { return v >= 0.0 && v <= range_high(); });
    }

    FunctionHandle random_handle(Rng& rng) const {
        FunctionHandle f = zero();
        for (auto& v : f.params)
            v = range_high() * uniform01(rng);
        return f;
    }

    /// Per-pair mean of the targets; unobserved pairs stay at 0.
    ErmResult erm_fit(const LabeledSet& data) const {
        std::vector<double> sum(n_params(), 0.0), count(n_params(), 0.0);
        for (const auto& p : data) {
            const auto i = static_cast<std::size_t>(p.state) * n_actions_ + p.action;
            sum[i] += p.target;
            count[i] += 1.0;
        }
        FunctionHandle f = zero();
        for (std::size_t i = 0; i < n_params(); ++i)
            if (count[i] > 0.0)
                f.params[i] = clamp_to(sum[i] / count[i], 0.0, range_high());
        double objective = 0.0;
        for (const auto& p : data) {
            const double r = raw(f, p.state, p.action) - p.target;
            objective += r * r;
        }
        return {std::move(f), objective, true};
    }

    double log_covering_number_f(double eps) const {
        require(eps > 0.0, "log_covering_number_f: eps must be positive");
        return cover_multiplier_ * static_cast<double>(n_params()) *
               std::log1p(range_high() / eps);
    }

    double log_covering_number_sa(double eps) const {
        require(eps > 0.0, "log_covering_number_sa: eps must be positive");
        return std::log(static_cast<double>(n_params()));
    }

    WidthContext prepare_width(const FunctionHandle& anchor, const StateActionSet& z,
                               double radius) const {
        require(radius >= 0.0, "width: radius must be nonnegative");
        return {z.dense_counts(n_states_, n_actions_), anchor.params, radius};
    }

    /**
     * The confidence set decouples across pairs: a member may move the probed
     * entry by sqrt(radius / n) around the anchor, then the range clips it.
     */
    WidthResult width(const WidthContext& ctx, int s, int a) const {
        const auto i = static_cast<std::size_t>(s) * n_actions_ + a;
        const double n = ctx.counts[i];
        if (n <= 0.0)
            return {range_high(), false};
        const double centre = clamp_to(ctx.anchor[i], 0.0, range_high());
        const double half = std::sqrt(ctx.radius / n);
        const double hi = std::min(centre + half, range_high());
        const double lo = std::max(centre - half, 0.0);
        return {std::max(0.0, hi - lo), false};
    }

private:
    int n_states_;
    int n_actions_;
    int horizon_;
    double cover_multiplier_;
};

/// {(s,a) -> w^T phi(s,a) : ||w||_2 <= B}, B = 2H sqrt(d) unless overridden.
class LinearClass {
public:
    static constexpr const char* kind_tag = "linear";

    struct WidthContext {
        detail::ThresholdedEigen eig;
        detail::EllipsoidBall set;
    };

    LinearClass(std::shared_ptr<const FeatureMap> features, int horizon,
                std::optional<double> weight_bound = std::nullopt, double cover_multiplier = 1.0)
        : features_(std::move(features)), horizon_(horizon), cover_multiplier_(cover_multiplier) {
        require(features_ != nullptr, "LinearClass: feature map required");
        require(horizon >= 1, "LinearClass: horizon must be positive");
        bound_ = weight_bound.value_or(2.0 * horizon * std::sqrt(static_cast<double>(dim())));
        require(bound_ > 0.0, "LinearClass: weight bound must be positive");
        require(cover_multiplier > 0.0, "LinearClass: cover multiplier must be positive");
    }

    int n_states() const { return features_->n_states(); }
    int n_actions() const { return features_->n_actions(); }
    int horizon() const { return horizon_; }
    int dim() const { return features_->dim(); }
    double weight_bound() const { return bound_; }
    double range_high() const { return horizon_ + 1.0; }
    const FeatureMap& features() const { return *features_; }
    std::shared_ptr<const FeatureMap> feature_ptr() const { return features_; }

    FunctionHandle zero() const {
        return {kind_tag, std::vector<double>(static_cast<std::size_t>(dim()), 0.0)};
    }

    FunctionHandle from_weights(const Eigen::VectorXd& w) const {
        return {kind_tag, std::vector<double>(w.data(), w.data() + w.size())};
    }

    static Eigen::Map<const Eigen::VectorXd> weights(const FunctionHandle& f) {
        return {f.params.data(), static_cast<Eigen::Index>(f.params.size())};
    }

    double raw(const FunctionHandle& f, int s, int a) const {
        return features_->row(s, a).dot(weights(f));
    }

    bool contains(const FunctionHandle& f) const {
        return f.params.size() == static_cast<std::size_t>(dim()) &&
               weights(f).norm() <= bound_ * (1.0 + 1e-12);
    }

    FunctionHandle random_handle(Rng& rng) const {
        std::normal_distribution<double> g(0.0, 1.0);
        Eigen::VectorXd w(dim());
        for (auto& v : w)
            v = g(rng);
        const double radius = bound_ * std::pow(uniform01(rng), 1.0 / dim());
        return from_weights(w.normalized() * radius);
    }

    ErmResult erm_fit(const LabeledSet& data) const {
        const auto ne = detail::normal_equations(*features_, data);
        const Eigen::VectorXd w = detail::ball_least_squares(ne, bound_);
        return {from_weights(w), detail::squared_loss(ne, w), true};
    }

    double log_covering_number_f(double eps) const {
        require(eps > 0.0, "log_covering_number_f: eps must be positive");
        return cover_multiplier_ * dim() *
               std::log1p(12.0 * horizon_ * std::sqrt(static_cast<double>(dim())) / eps);
    }

    double log_covering_number_sa(double eps) const {
        require(eps > 0.0, "log_covering_number_sa: eps must be positive");
        return cover_multiplier_ * dim() * std::log1p(6.0 / eps);
    }

    WidthContext prepare_width(const FunctionHandle& anchor, const StateActionSet& z,
                               double radius) const {
        require(radius >= 0.0, "width: radius must be nonnegative");
        WidthContext ctx{detail::thresholded_eigen(detail::gram_of(*features_, z)), {}};
        ctx.set.a = ctx.eig.values;
        ctx.set.c = ctx.eig.vectors.transpose() * weights(anchor);
        ctx.set.radius = radius;
        ctx.set.ball = bound_;
        return ctx;
    }

    /// (min, max) of w^T phi(s,a) over the confidence set, before range clipping.
    std::pair<double, double> raw_extent(const WidthContext& ctx, int s, int a) const {
        const Eigen::VectorXd p = ctx.eig.vectors.transpose() * features_->row(s, a).transpose();
        return {-detail::max_linear(ctx.set, -p), detail::max_linear(ctx.set, p)};
    }

    WidthResult width(const WidthContext& ctx, int s, int a) const {
        const auto [lo, hi] = raw_extent(ctx, s, a);
        const double top = clamp_to(hi, 0.0, range_high());
        const double bottom = clamp_to(lo, 0.0, range_high());
        return {std::max(0.0, top - bottom), false};
    }

private:
    std::shared_ptr<const FeatureMap> features_;
    int horizon_;
    double bound_ = 0.0;
    double cover_multiplier_;
};

struct SparseSolverOptions {
    int restarts = 10;
    int iterations = 500;
    int width_restarts = 50;
    std::uint64_t seed = 0x5eedULL;
};

/// {(s,a) -> w^T phi(s,a) : ||w||_0 <= 2s, ||w||_inf <= B}, B = 2H sqrt(d) unless overridden.
class SparseLinearClass {
public:
    static constexpr const char* kind_tag = "sparse_linear";

    struct WidthContext {
        Eigen::MatrixXd gram;
        Eigen::VectorXd anchor;
        double radius = 0.0;
    };

    using SolverOptions = SparseSolverOptions;

    SparseLinearClass(std::shared_ptr<const FeatureMap> features, int horizon, int sparsity,
                      std::optional<double> weight_bound = std::nullopt,
                      double cover_multiplier = 1.0, SolverOptions solver = {})
        : features_(std::move(features)), horizon_(horizon), sparsity_(sparsity),
          cover_multiplier_(cover_multiplier), solver_(solver) {
        require(features_ != nullptr, "SparseLinearClass: feature map required");
        require(horizon >= 1, "SparseLinearClass: horizon must be positive");
        require(sparsity >= 1, "SparseLinearClass: sparsity must be positive");
        bound_ = weight_bound.value_or(2.0 * horizon * std::sqrt(static_cast<double>(dim())));
        require(bound_ > 0.0, "SparseLinearClass: weight bound must be positive");
        require(cover_multiplier > 0.0, "SparseLinearClass: cover multiplier must be positive");
    }

    int n_states() const { return features_->n_states(); }
    int n_actions() const { return features_->n_actions(); }
    int horizon() const { return horizon_; }
    int dim() const { return features_->dim(); }
    int sparsity() const { return sparsity_; }
    /// Largest support a member may have (2s, capped at d).
    int max_support() const { return std::min(2 * sparsity_, dim()); }
    double weight_bound() const { return bound_; }
    double range_high() const { return horizon_ + 1.0; }
    const FeatureMap& features() const { return *features_; }
    std::shared_ptr<const FeatureMap> feature_ptr() const { return features_; }
    const SolverOptions& solver() const { return solver_; }

    FunctionHandle zero() const {
        return {kind_tag, std::vector<double>(static_cast<std::size_t>(dim()), 0.0)};
    }

    FunctionHandle from_weights(const Eigen::VectorXd& w) const {
        return {kind_tag, std::vector<double>(w.data(), w.data() + w.size())};
    }

    static Eigen::Map<const Eigen::VectorXd> weights(const FunctionHandle& f) {
        return {f.params.data(), static_cast<Eigen::Index>(f.params.size())};
    }

    double raw(const FunctionHandle& f, int s, int a) const {
        return features_->row(s, a).dot(weights(f));
    }

    bool contains(const FunctionHandle& f) const {
        if (f.params.size() != static_cast<std::size_t>(dim()))
            return false;
        int nnz = 0;
        for (double v : f.params) {
            if (std::abs(v) > bound_ * (1.0 + 1e-12))
                return false;
            nnz += v != 0.0;
        }
        return nnz <= max_support();
    }

    FunctionHandle random_handle(Rng& rng) const {
        std::vector<int> coords(static_cast<std::size_t>(dim()));
        std::iota(coords.begin(), coords.end(), 0);
        std::shuffle(coords.begin(), coords.end(), rng);
        Eigen::VectorXd w = Eigen::VectorXd::Zero(dim());
        for (int j = 0; j < max_support(); ++j)
            w[coords[j]] = bound_ * (2.0 * uniform01(rng) - 1.0);
        return from_weights(w);
    }

    /// Keeps the max_support() largest magnitudes (lowest index on ties), then clips to the box.
    Eigen::VectorXd project(const Eigen::VectorXd& w) const {
        std::vector<int> order(static_cast<std::size_t>(w.size()));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int i, int j) { return std::abs(w[i]) > std::abs(w[j]); });
        Eigen::VectorXd out = Eigen::VectorXd::Zero(w.size());
        for (int j = 0; j < max_support(); ++j)
            out[order[j]] = clamp_to(w[order[j]], -bound_, bound_);
        return out;
    }

    /**
     * Iterative hard thresholding with restarts; each restart's support is then
     * refit by box-clipped least squares when that lowers the objective.
     * converged is false when no restart settled within the iteration budget.
     */
    ErmResult erm_fit(const LabeledSet& data) const {
        const auto ne = detail::normal_equations(*features_, data);
        const int d = dim();
        const double lipschitz = 2.0 * top_eigenvalue(ne.gram);
        Rng rng(solver_.seed);
        Eigen::VectorXd best = Eigen::VectorXd::Zero(d);
        double best_obj = detail::squared_loss(ne, best);
        bool any_converged = false;
        if (lipschitz <= 0.0)
            return {from_weights(best), best_obj, true};
        const double step = 1.0 / lipschitz;
        for (int r = 0; r < solver_.restarts; ++r) {
            Eigen::VectorXd w = r == 0 ? Eigen::VectorXd::Zero(d)
                                       : weights(random_handle(rng)).eval();
            bool converged = false;
            for (int it = 0; it < solver_.iterations; ++it) {
                const Eigen::VectorXd grad = 2.0 * (ne.gram * w - ne.moment);
                const Eigen::VectorXd next = project(w - step * grad);
                const double change = (next - w).norm();
                w = next;
                if (change <= 1e-10 * (1.0 + w.norm())) {
                    converged = true;
                    break;
                }
            }
            any_converged = any_converged || converged;
            const Eigen::VectorXd refit = refit_on_support(ne, w);
            if (detail::squared_loss(ne, refit) < detail::squared_loss(ne, w))
                w = refit;
            const double obj = detail::squared_loss(ne, w);
            if (obj < best_obj) {
                best_obj = obj;
                best = w;
            }
        }
        return {from_weights(best), best_obj, any_converged};
    }

    double log_covering_number_f(double eps) const {
        require(eps > 0.0, "log_covering_number_f: eps must be positive");
        return cover_multiplier_ * 2.0 * sparsity_ *
               (std::log(static_cast<double>(dim())) +
                std::log1p(12.0 * horizon_ * std::sqrt(static_cast<double>(dim())) / eps));
    }

    double log_covering_number_sa(double eps) const {
        require(eps > 0.0, "log_covering_number_sa: eps must be positive");
        return cover_multiplier_ * 2.0 * sparsity_ *
               (std::log(static_cast<double>(dim())) + std::log1p(6.0 / eps));
    }

    WidthContext prepare_width(const FunctionHandle& anchor, const StateActionSet& z,
                               double radius) const {
        require(radius >= 0.0, "width: radius must be nonnegative");
        return {detail::gram_of(*features_, z), weights(anchor), radius};
    }

    /**
     * No closed form: projected-gradient ascent over supports that contain the
     * anchor's support, each with an exact Dykstra projection onto box and
     * ellipsoid. Every returned extreme is attained by a feasible member, so the
     * width is reported as a lower bound.
     */
    WidthResult width(const WidthContext& ctx, int s, int a) const {
        const Eigen::VectorXd phi = features_->row(s, a).transpose();
        const double hi = search_extreme(ctx, phi, s, a);
        const double lo = -search_extreme(ctx, -phi, s, a);
        const double top = clamp_to(hi, 0.0, range_high());
        const double bottom = clamp_to(lo, 0.0, range_high());
        return {std::max(0.0, top - bottom), true};
    }

private:
    static double top_eigenvalue(const Eigen::MatrixXd& m) {
        if (m.size() == 0)
            return 0.0;
        Eigen::VectorXd v = Eigen::VectorXd::Ones(m.rows()).normalized();
        double lambda = 0.0;
        for (int it = 0; it < 200; ++it) {
            const Eigen::VectorXd next = m * v;
            const double norm = next.norm();
            if (norm == 0.0)
                return 0.0;
            lambda = norm;
            v = next / norm;
        }
        // The power estimate can sit slightly below the top eigenvalue; pad it.
        return 1.01 * lambda;
    }

    Eigen::VectorXd refit_on_support(const detail::Normal& ne, const Eigen::VectorXd& w) const {
        std::vector<int> support;
        for (Eigen::Index i = 0; i < w.size(); ++i)
            if (w[i] != 0.0)
                support.push_back(static_cast<int>(i));
        if (support.empty())
            return w;
        const auto k = static_cast<Eigen::Index>(support.size());
        detail::Normal sub{Eigen::MatrixXd(k, k), Eigen::VectorXd(k), ne.target_sq};
        for (Eigen::Index i = 0; i < k; ++i) {
            sub.moment[i] = ne.moment[support[i]];
            for (Eigen::Index j = 0; j < k; ++j)
                sub.gram(i, j) = ne.gram(support[i], support[j]);
        }
        const Eigen::VectorXd local = detail::ball_least_squares(sub, 1e300);
        Eigen::VectorXd out = Eigen::VectorXd::Zero(w.size());
        for (Eigen::Index i = 0; i < k; ++i)
            out[support[i]] = clamp_to(local[i], -bound_, bound_);
        return out;
    }

    struct Subproblem {
        std::vector<int> support;
        Eigen::MatrixXd vectors; // eigenbasis of the restricted gram
        Eigen::VectorXd values;
        Eigen::VectorXd centre;
        double radius = 0.0;
        double bound = 0.0;

        double ellipsoid_value(const Eigen::VectorXd& x) const {
            const Eigen::VectorXd u = vectors.transpose() * (x - centre);
            return (values.array() * u.array().square()).sum();
        }

        Eigen::VectorXd project_ellipsoid(const Eigen::VectorXd& y) const {
            if (ellipsoid_value(y) <= radius)
                return y;
            const Eigen::VectorXd u = vectors.transpose() * (y - centre);
            auto at = [&](double mu) {
                return Eigen::VectorXd(u.array() / (1.0 + mu * values.array()));
            };
            auto value = [&](double mu) {
                const Eigen::VectorXd v = at(mu);
                return (values.array() * v.array().square()).sum();
            };
            double lo = 0.0, hi = 1.0;
            while (value(hi) > radius && hi < 1e300)
                hi *= 4.0;
            for (int it = 0; it < 200 && hi - lo > 1e-14 * hi; ++it) {
                const double mid = 0.5 * (lo + hi);
                (value(mid) > radius ? lo : hi) = mid;
            }
            return centre + vectors * at(hi);
        }

        Eigen::VectorXd project_box(const Eigen::VectorXd& y) const {
            return y.cwiseMax(-bound).cwiseMin(bound);
        }

        /// Dykstra's alternating projections onto box and ellipsoid.
        Eigen::VectorXd project(const Eigen::VectorXd& y) const {
            Eigen::VectorXd x = y, p = Eigen::VectorXd::Zero(y.size()),
                            q = Eigen::VectorXd::Zero(y.size());
            for (int it = 0; it < 60; ++it) {
                const Eigen::VectorXd b = project_box(x + p);
                p = x + p - b;
                const Eigen::VectorXd next = project_ellipsoid(b + q);
                q = b + q - next;
                const double change = (next - x).norm();
                x = next;
                if (change <= 1e-12 * (1.0 + x.norm()))
                    break;
            }
            return x;
        }

        /// Pulls x toward the (feasible) centre until both constraints hold.
        Eigen::VectorXd make_feasible(const Eigen::VectorXd& x) const {
            double t = 1.0;
            const double ev = ellipsoid_value(x);
            if (ev > radius)
                t = std::min(t, std::sqrt(radius / ev));
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                const double dir = x[i] - centre[i];
                if (centre[i] + t * dir > bound)
                    t = std::min(t, (bound - centre[i]) / dir);
                if (centre[i] + t * dir < -bound)
                    t = std::min(t, (-bound - centre[i]) / dir);
            }
            return centre + std::max(t, 0.0) * (x - centre);
        }
    };

    double solve_on_support(const WidthContext& ctx, const Eigen::VectorXd& phi,
                            const std::vector<int>& support) const {
        const auto k = static_cast<Eigen::Index>(support.size());
        Subproblem sub;
        sub.support = support;
        Eigen::MatrixXd g(k, k);
        Eigen::VectorXd p(k);
        sub.centre.resize(k);
        for (Eigen::Index i = 0; i < k; ++i) {
            p[i] = phi[support[i]];
            sub.centre[i] = ctx.anchor[support[i]];
            for (Eigen::Index j = 0; j < k; ++j)
                g(i, j) = ctx.gram(support[i], support[j]);
        }
        const auto eig = detail::thresholded_eigen(g);
        sub.vectors = eig.vectors;
        sub.values = eig.values;
        sub.radius = ctx.radius;
        sub.bound = bound_;
        if (p.norm() == 0.0)
            return 0.0;
        const double step = 2.0 * bound_ / p.norm();
        Eigen::VectorXd x = sub.centre;
        for (int it = 0; it < 200; ++it) {
            const Eigen::VectorXd next = sub.project(x + step * p);
            const double change = (next - x).norm();
            x = next;
            if (change <= 1e-12 * (1.0 + x.norm()))
                break;
        }
        return p.dot(sub.make_feasible(x));
    }

    double search_extreme(const WidthContext& ctx, const Eigen::VectorXd& phi, int s,
                          int a) const {
        const int d = dim();
        std::vector<int> base, rest;
        for (int i = 0; i < d; ++i)
            (ctx.anchor[i] != 0.0 ? base : rest).push_back(i);
        const int extra = std::max(0, max_support() - static_cast<int>(base.size()));
        std::set<std::vector<int>> supports;
        {
            std::vector<int> greedy = rest;
            std::stable_sort(greedy.begin(), greedy.end(),
                             [&](int i, int j) { return std::abs(phi[i]) > std::abs(phi[j]); });
            std::vector<int> support = base;
            support.insert(support.end(), greedy.begin(),
                           greedy.begin() + std::min<std::size_t>(extra, greedy.size()));
            std::sort(support.begin(), support.end());
            supports.insert(support);
        }
        Rng rng(derive_seed(solver_.seed, static_cast<std::uint64_t>(s) * 7919u + a));
        for (int r = 1; r < solver_.width_restarts; ++r) {
            std::vector<int> shuffled = rest;
            std::shuffle(shuffled.begin(), shuffled.end(), rng);
            std::vector<int> support = base;
            support.insert(support.end(), shuffled.begin(),
                           shuffled.begin() + std::min<std::size_t>(extra, shuffled.size()));
            std::sort(support.begin(), support.end());
            supports.insert(support);
        }
        double best = phi.dot(ctx.anchor);
        for (const auto& support : supports)
            best = std::max(best, solve_on_support(ctx, phi, support));
        return best;
    }

    std::shared_ptr<const FeatureMap> features_;
    int horizon_;
    int sparsity_;
    double bound_ = 0.0;
    double cover_multiplier_;
    SolverOptions solver_;
};

template <class C>
concept FunctionClass = requires(const C& c, const FunctionHandle& f, const LabeledSet& data,
                                 const StateActionSet& z, double x, int s, int a, Rng& rng) {
    { c.n_states() } -> std::convertible_to<int>;
    { c.n_actions() } -> std::convertible_to<int>;
    { c.horizon() } -> std::convertible_to<int>;
    { c.range_high() } -> std::convertible_to<double>;
    { c.zero() } -> std::same_as<FunctionHandle>;
    { c.raw(f, s, a) } -> std::convertible_to<double>;
    { c.contains(f) } -> std::convertible_to<bool>;
    { c.random_handle(rng) } -> std::same_as<FunctionHandle>;
    { c.erm_fit(data) } -> std::same_as<ErmResult>;
    { c.log_covering_number_f(x) } -> std::convertible_to<double>;
    { c.log_covering_number_sa(x) } -> std::convertible_to<double>;
    { c.width(c.prepare_width(f, z, x), s, a) } -> std::same_as<WidthResult>;
};

static_assert(FunctionClass<TabularClass>);
static_assert(FunctionClass<LinearClass>);
static_assert(FunctionClass<SparseLinearClass>);

/// f(s,a), clipped into the class range [0, H+1].
template <FunctionClass C>
double evaluate(const C& cls, const FunctionHandle& f, int s, int a) {
    return clamp_to(cls.raw(f, s, a), 0.0, cls.range_high());
}

template <FunctionClass C>
ErmResult erm_fit(const C& cls, const LabeledSet& data) {
    return cls.erm_fit(data);
}

/// sum over data of (f(s,a) - target)^2 on the parametric (unclipped) values.
template <FunctionClass C>
double erm_objective(const C& cls, const FunctionHandle& f, const LabeledSet& data) {
    double sum = 0.0;
    for (const auto& p : data) {
        const double r = cls.raw(f, p.state, p.action) - p.target;
        sum += r * r;
    }
    return sum;
}

/// ||f - g||_Z with multiplicities, on the parametric values.
template <FunctionClass C>
double dataset_norm(const C& cls, const FunctionHandle& f, const FunctionHandle& g,
                    const StateActionSet& z) {
    double sum = 0.0;
    for (const auto& e : z.entries()) {
        const double diff = cls.raw(f, e.sa.state, e.sa.action) - cls.raw(g, e.sa.state, e.sa.action);
        sum += static_cast<double>(e.multiplicity) * diff * diff;
    }
    return std::sqrt(sum);
}

template <FunctionClass C>
double log_covering_number_f(const C& cls, double eps) {
    return cls.log_covering_number_f(eps);
}

template <FunctionClass C>
double log_covering_number_sa(const C& cls, double eps) {
    return cls.log_covering_number_sa(eps);
}

/// Width at (s,a) of {f in F : ||f - f_hat||^2_Z <= radius}.
template <FunctionClass C>
WidthResult width_at_detailed(const C& cls, const FunctionHandle& f_hat, const StateActionSet& z,
                              double radius, int s, int a) {
    return cls.width(cls.prepare_width(f_hat, z, radius), s, a);
}

template <FunctionClass C>
double width_at(const C& cls, const FunctionHandle& f_hat, const StateActionSet& z, double radius,
                int s, int a) {
    return width_at_detailed(cls, f_hat, z, radius, s, a).value;
}

} // namespace lsvi
