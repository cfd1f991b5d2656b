#pragma once

// Slow reference implementations used by the test suites to check the fast paths.

#include "lsvi/function_space.hpp"

#include <functional>

namespace lsvi::oracle {

namespace detail {

/// Values ŵ + res * k inside [lo, hi], plus the endpoints themselves.
inline std::vector<double> aligned_axis(double centre, double lo, double hi, double res) {
    std::vector<double> out{lo, hi};
    const double k_lo = std::ceil((lo - centre) / res);
    const double k_hi = std::floor((hi - centre) / res);
    for (double k = k_lo; k <= k_hi; k += 1.0)
        out.push_back(centre + k * res);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

} // namespace detail

/**
 * Exhaustive grid search for the width of {f : ||f - f_hat||^2_Z <= radius} at (s,a).
 *
 * Tabular: the probed entry is gridded over [0, H+1]; the other entries are held
 * at f_hat, which only relaxes the constraint. Linear: every weight vector on the
 * lattice f_hat + res * Z^d inside `box` is tested naively against the dataset
 * and the weight bound. Returns the spread of clipped values over feasible points.
 */
inline double brute_force_width(const TabularClass& cls, const FunctionHandle& f_hat,
                                const StateActionSet& z, double radius, int s, int a,
                                double resolution) {
    require(resolution > 0.0, "brute_force_width: resolution must be positive");
    double n = 0.0;
    for (const auto& e : z.entries())
        if (e.sa == StateAction{s, a})
            n += static_cast<double>(e.multiplicity);
    const double centre = cls.raw(f_hat, s, a);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double t : detail::aligned_axis(centre, 0.0, cls.range_high(), resolution)) {
        if (n * (t - centre) * (t - centre) > radius)
            continue;
        lo = std::min(lo, t);
        hi = std::max(hi, t);
    }
    return hi >= lo ? hi - lo : 0.0;
}

struct Box {
    std::vector<double> lo;
    std::vector<double> hi;
};

template <class LinearLike>
double brute_force_width(const LinearLike& cls, const FunctionHandle& f_hat,
                         const StateActionSet& z, double radius, int s, int a, double resolution,
                         const Box& box) {
    require(resolution > 0.0, "brute_force_width: resolution must be positive");
    const int d = cls.dim();
    require(d <= 4, "brute_force_width: more than 4 free parameters");
    require(static_cast<int>(box.lo.size()) == d && static_cast<int>(box.hi.size()) == d,
            "brute_force_width: box dimension mismatch");
    std::vector<std::vector<double>> axes;
    for (int i = 0; i < d; ++i)
        axes.push_back(detail::aligned_axis(f_hat.params[i], box.lo[i], box.hi[i], resolution));

    std::vector<std::pair<StateAction, double>> points;
    for (const auto& [sa, n] : z.aggregated())
        points.emplace_back(sa, static_cast<double>(n));

    FunctionHandle probe = f_hat;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::vector<std::size_t> idx(static_cast<std::size_t>(d), 0);
    while (true) {
        for (int i = 0; i < d; ++i)
            probe.params[i] = axes[i][idx[i]];
        if (cls.contains(probe)) {
            double dist = 0.0;
            for (const auto& [sa, n] : points) {
                const double diff = cls.raw(probe, sa.state, sa.action) -
                                    cls.raw(f_hat, sa.state, sa.action);
                dist += n * diff * diff;
            }
            if (dist <= radius) {
                const double v = evaluate(cls, probe, s, a);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        int i = 0;
        for (; i < d; ++i) {
            if (++idx[i] < axes[i].size())
                break;
            idx[i] = 0;
        }
        if (i == d)
            break;
    }
    return hi >= lo ? hi - lo : 0.0;
}

/// Minimizes sum (w^T phi - y)^2 over the box [-B, B]^k by cyclic coordinate descent.
inline Eigen::VectorXd box_least_squares(const Eigen::MatrixXd& gram, const Eigen::VectorXd& moment,
                                         double bound) {
    const Eigen::Index k = moment.size();
    Eigen::VectorXd w = Eigen::VectorXd::Zero(k);
    for (int sweep = 0; sweep < 20000; ++sweep) {
        double change = 0.0;
        for (Eigen::Index j = 0; j < k; ++j) {
            if (gram(j, j) <= 0.0)
                continue;
            const double rest = gram.row(j).dot(w) - gram(j, j) * w[j];
            const double next = clamp_to((moment[j] - rest) / gram(j, j), -bound, bound);
            change = std::max(change, std::abs(next - w[j]));
            w[j] = next;
        }
        if (change <= 1e-14 * (1.0 + w.norm()))
            break;
    }
    return w;
}

/// Exact sparse ERM by enumerating every support of the maximal size (d <= 12).
inline ErmResult sparse_erm_enumerate(const SparseLinearClass& cls, const LabeledSet& data) {
    const int d = cls.dim();
    require(d <= 12, "sparse_erm_enumerate: dimension above 12");
    const auto ne = lsvi::detail::normal_equations(cls.features(), data);
    const int k = cls.max_support();
    Eigen::VectorXd best = Eigen::VectorXd::Zero(d);
    double best_obj = lsvi::detail::squared_loss(ne, best);

    std::vector<int> support(static_cast<std::size_t>(k));
    std::function<void(int, int)> walk = [&](int start, int depth) {
        if (depth == k) {
            Eigen::MatrixXd g(k, k);
            Eigen::VectorXd m(k);
            for (int i = 0; i < k; ++i) {
                m[i] = ne.moment[support[i]];
                for (int j = 0; j < k; ++j)
                    g(i, j) = ne.gram(support[i], support[j]);
            }
            const Eigen::VectorXd local = box_least_squares(g, m, cls.weight_bound());
            Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
            for (int i = 0; i < k; ++i)
                w[support[i]] = local[i];
            const double obj = lsvi::detail::squared_loss(ne, w);
            if (obj < best_obj) {
                best_obj = obj;
                best = w;
            }
            return;
        }
        for (int i = start; i <= d - (k - depth); ++i) {
            support[depth] = i;
            walk(i + 1, depth + 1);
        }
    };
    walk(0, 0);
    return {cls.from_weights(best), best_obj, true};
}

} // namespace lsvi::oracle
