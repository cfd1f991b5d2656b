#pragma once

#include "lsvi/function_space.hpp"

namespace lsvi {

/// Keep-probability p = 1/inv_p and the quantities it was derived from.
struct SamplingPlan {
    double eps0 = 0.0;
    double p = 1.0;
    std::uint64_t inv_p = 1;
    double lambda = 0.0;
    double eps = 0.0;
    double delta = 0.0;
    double l1 = 0.0;
    /// Unrounded target x; p is the smallest unit fraction >= x (or 1 when x >= 1).
    double target = 0.0;
    double log_cover = 0.0;
    std::uint64_t z_size = 0;
    double sampling_constant = 384.0;
};

/// Subsample of a source set: every multiplicity is a multiple of inv_p.
struct SampledSet {
    StateActionSet set;
    std::uint64_t inv_p = 1;
    std::uint64_t source_total = 0;
    /// Source occurrences that survived their coin.
    std::uint64_t kept_occurrences = 0;
    std::optional<std::uint64_t> seed;

    std::size_t distinct() const { return distinct_count(set); }
};

/// Cover resolution eps/72 * sqrt(lambda * delta / |Z|).
inline double cover_resolution(double eps, double lambda, double delta, std::uint64_t z_size) {
    require(z_size > 0, "cover_resolution: |Z| must be positive");
    return eps / 72.0 * std::sqrt(lambda * delta / static_cast<double>(z_size));
}

inline SamplingPlan make_plan(double l1, double log_cover_at_eps0, double eps, double lambda,
                              double delta, std::uint64_t z_size,
                              double sampling_constant = 384.0) {
    require(l1 > 0.0, "make_plan: l1 must be positive");
    require(lambda > 0.0, "make_plan: lambda must be positive");
    require(eps > 0.0 && eps < 1.0, "make_plan: eps must lie in (0,1)");
    require(delta > 0.0 && delta < 1.0, "make_plan: delta must lie in (0,1)");
    require(z_size > 0, "make_plan: |Z| must be positive");
    require(log_cover_at_eps0 >= 0.0, "make_plan: log covering number must be nonnegative");
    require(sampling_constant > 0.0, "make_plan: sampling constant must be positive");

    SamplingPlan plan;
    plan.eps0 = cover_resolution(eps, lambda, delta, z_size);
    plan.lambda = lambda;
    plan.eps = eps;
    plan.delta = delta;
    plan.l1 = l1;
    plan.log_cover = log_cover_at_eps0;
    plan.z_size = z_size;
    plan.sampling_constant = sampling_constant;
    // ln(4 N / delta) with N given through its logarithm
    const double log_term = std::log(4.0) + log_cover_at_eps0 - std::log(delta);
    plan.target = sampling_constant * l1 * log_term / (eps * eps * static_cast<double>(z_size));
    if (plan.target >= 1.0) {
        plan.inv_p = 1;
        plan.p = 1.0;
        return plan;
    }
    const double inv = 1.0 / plan.target;
    const double rounded = std::round(inv);
    double whole = std::abs(inv - rounded) <= 1e-12 * inv ? rounded : std::floor(inv);
    whole = std::min(whole, 4.0e18);
    plan.inv_p = static_cast<std::uint64_t>(whole);
    plan.p = 1.0 / static_cast<double>(plan.inv_p);
    return plan;
}

/// make_plan with the covering number of `cls` evaluated at the plan's own resolution.
template <FunctionClass C>
SamplingPlan make_plan(const C& cls, double l1, double eps, double lambda, double delta,
                       std::uint64_t z_size, double sampling_constant = 384.0) {
    const double eps0 = cover_resolution(eps, lambda, delta, z_size);
    return make_plan(l1, cls.log_covering_number_f(eps0), eps, lambda, delta, z_size,
                     sampling_constant);
}

/**
 * One coin per source occurrence, in the set's insertion order; a kept occurrence
 * contributes inv_p copies. With p = 1 the source is returned unchanged and no
 * coins are drawn.
 */
inline SampledSet uniform_sample(const StateActionSet& z, const SamplingPlan& plan, Rng& rng) {
    SampledSet out;
    out.inv_p = plan.inv_p;
    out.source_total = z.total();
    if (plan.inv_p == 1) {
        out.set = z;
        out.kept_occurrences = z.total();
        return out;
    }
    // P(draw < threshold) = 1/inv_p up to 2^-64
    const std::uint64_t threshold = std::numeric_limits<std::uint64_t>::max() / plan.inv_p + 1;
    for (const auto& e : z.entries()) {
        std::uint64_t kept = 0;
        for (std::uint64_t i = 0; i < e.multiplicity; ++i)
            kept += rng() < threshold;
        if (kept > 0)
            out.set.add(e.sa, kept * plan.inv_p);
        out.kept_occurrences += kept;
    }
    return out;
}

inline SampledSet uniform_sample(const StateActionSet& z, const SamplingPlan& plan,
                                 std::uint64_t seed) {
    Rng rng(seed);
    auto out = uniform_sample(z, plan, rng);
    out.seed = seed;
    return out;
}

} // namespace lsvi
