#pragma once

#include "lsvi/subsampler.hpp"

namespace lsvi {

struct BonusConfig {
    double delta = 0.1;
    std::uint64_t t_total = 1;
    double l1 = 1.0;
    double c_prime = 1.0;
    double zeta = 0.0;
    int horizon = 1;
    double sampling_constant = 384.0;

    void validate() const {
        require(delta > 0.0 && delta < 1.0, "bonus config: delta must lie in (0,1)");
        require(t_total >= 1, "bonus config: T must be positive");
        require(l1 > 0.0, "bonus config: l1 must be positive");
        require(c_prime > 0.0, "bonus config: c_prime must be positive");
        require(zeta >= 0.0, "bonus config: zeta must be nonnegative");
        require(horizon >= 1, "bonus config: horizon must be positive");
    }
};

/// beta = c' (L1 H^2 ln^3(T/delta) lnN(F) lnN(SxA) + H T zeta), covers given as logs.
inline double beta_from_logs(const BonusConfig& cfg, double log_cover_f, double log_cover_sa) {
    cfg.validate();
    const double T = static_cast<double>(cfg.t_total);
    const double H = cfg.horizon;
    const double lt = std::log(T / cfg.delta);
    return cfg.c_prime * (cfg.l1 * H * H * lt * lt * lt * log_cover_f * log_cover_sa + H * T * cfg.zeta);
}

/// beta with N(F, delta/T^3) and N(SxA, delta/T^2) from the class.
template <FunctionClass C>
double beta(const C& cls, const BonusConfig& cfg) {
    const double T = static_cast<double>(cfg.t_total);
    return beta_from_logs(cfg, cls.log_covering_number_f(cfg.delta / (T * T * T)),
                          cls.log_covering_number_sa(cfg.delta / (T * T)));
}

struct BonusDiagnostics {
    SamplingPlan plan;
    std::uint64_t source_size = 0;
    std::uint64_t sampled_size = 0;
    std::size_t sampled_distinct = 0;
    bool size_guard = false;
    bool distinct_guard = false;
    double size_cap = 0.0;
    double distinct_cap = 0.0;
    /// Resolution of the covers the kept set would be rounded onto (rounding is the identity).
    double cover_resolution = 0.0;
    double beta = 0.0;

    bool guard_tripped() const { return size_guard || distinct_guard; }
};

/// Width of {f in F : ||f - anchor||^2_Zhat <= radius}, with its inputs kept for replay.
template <FunctionClass C>
class BonusFunction {
public:
    BonusFunction(C cls, FunctionHandle anchor, StateActionSet kept, double radius,
                  BonusDiagnostics diagnostics = {})
        : cls_(std::move(cls)), anchor_(std::move(anchor)), kept_(std::move(kept)),
          radius_(radius), diagnostics_(std::move(diagnostics)),
          ctx_(cls_.prepare_width(anchor_, kept_, radius_)) {}

    double operator()(int s, int a) const { return cls_.width(ctx_, s, a).value; }
    WidthResult detailed(int s, int a) const { return cls_.width(ctx_, s, a); }

    const C& function_class() const { return cls_; }
    const FunctionHandle& anchor() const { return anchor_; }
    const StateActionSet& kept() const { return kept_; }
    double radius() const { return radius_; }
    const BonusDiagnostics& diagnostics() const { return diagnostics_; }

private:
    C cls_;
    FunctionHandle anchor_;
    StateActionSet kept_;
    double radius_;
    BonusDiagnostics diagnostics_;
    decltype(std::declval<const C&>().prepare_width(std::declval<const FunctionHandle&>(),
                                                    std::declval<const StateActionSet&>(),
                                                    0.0)) ctx_;
};

/**
 * Subsamples Z with lambda = (delta/16T)^2, eps = 1/2 and failure budget delta/16T,
 * falls back to the empty set when either guard trips, and returns the width of
 * the radius-(3 beta + 2) set around f_bar. An empty Z gives the empty set directly.
 */
template <FunctionClass C>
BonusFunction<C> compute_bonus(const C& cls, const FunctionHandle& f_bar, const StateActionSet& z,
                               const BonusConfig& cfg, Rng& rng) {
    cfg.validate();
    const double T = static_cast<double>(cfg.t_total);
    const double delta = cfg.delta;
    BonusDiagnostics diag;
    diag.beta = beta(cls, cfg);
    diag.source_size = z.total();
    diag.size_cap = 64.0 * T * T / delta;
    diag.distinct_cap = 9216.0 * cfg.l1 *
                        (std::log(64.0 * T / delta) +
                         cls.log_covering_number_f(delta / (9216.0 * T * T)));
    diag.cover_resolution = 1.0 / (8.0 * std::sqrt(diag.size_cap));
    const double radius = 3.0 * diag.beta + 2.0;
    if (z.empty())
        return BonusFunction<C>(cls, f_bar, StateActionSet{}, radius, diag);

    const double lambda = (delta / (16.0 * T)) * (delta / (16.0 * T));
    diag.plan = make_plan(cls, cfg.l1, 0.5, lambda, delta / (16.0 * T), z.total(),
                          cfg.sampling_constant);
    auto sampled = uniform_sample(z, diag.plan, rng);
    diag.sampled_size = sampled.set.total();
    diag.sampled_distinct = sampled.distinct();
    diag.size_guard = static_cast<double>(diag.sampled_size) > diag.size_cap;
    diag.distinct_guard = static_cast<double>(diag.sampled_distinct) >= diag.distinct_cap;
    StateActionSet kept = diag.guard_tripped() ? StateActionSet{} : std::move(sampled.set);
    return BonusFunction<C>(cls, f_bar, std::move(kept), radius, diag);
}

struct SandwichReport {
    std::size_t checks = 0;
    std::size_t violations = 0;
    double violation_rate = 0.0;
};

/**
 * Recomputes the bonus n_trials times and counts probes where it leaves
 * [width(radius beta on Z), width(radius 12 beta + 12 on Z)].
 */
template <FunctionClass C>
SandwichReport sandwich_check(const C& cls, const FunctionHandle& f_bar, const StateActionSet& z,
                              const BonusConfig& cfg, int n_trials,
                              const std::vector<StateAction>& probes, std::uint64_t seed,
                              double tolerance = 1e-9) {
    const double b = beta(cls, cfg);
    const auto lower = cls.prepare_width(f_bar, z, b);
    const auto upper = cls.prepare_width(f_bar, z, 12.0 * b + 12.0);
    std::vector<std::pair<double, double>> bounds;
    for (const auto& p : probes)
        bounds.emplace_back(cls.width(lower, p.state, p.action).value,
                            cls.width(upper, p.state, p.action).value);
    SandwichReport report;
    for (int t = 0; t < n_trials; ++t) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
        const auto bonus = compute_bonus(cls, f_bar, z, cfg, rng);
        for (std::size_t i = 0; i < probes.size(); ++i) {
            const double w = bonus(probes[i].state, probes[i].action);
            ++report.checks;
            if (w < bounds[i].first - tolerance || w > bounds[i].second + tolerance)
                ++report.violations;
        }
    }
    report.violation_rate =
        report.checks ? static_cast<double>(report.violations) / static_cast<double>(report.checks) : 0.0;
    return report;
}

} // namespace lsvi
