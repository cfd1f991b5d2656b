#include "lsvi/analysis.hpp"

#include <gtest/gtest.h>

using namespace lsvi;

namespace {

TabularMDP uniform_dynamics(int S, int A, int H) {
    return TabularMDP(S, A, H, std::vector<double>(static_cast<std::size_t>(S) * A * S, 1.0 / S),
                      std::vector<double>(static_cast<std::size_t>(S) * A, 0.5),
                      std::vector<double>(static_cast<std::size_t>(S), 1.0 / S));
}

LinearMDP view_of(const TabularMDP& mdp, Eigen::MatrixXd phi) {
    LinearMDP view;
    view.dim = static_cast<int>(phi.cols());
    view.features = std::make_shared<const FeatureMap>(mdp.n_states(), mdp.n_actions(), std::move(phi));
    view.tabular = mdp;
    return view;
}

/// A run whose every epoch plays the given q table (m0 = 1, no warm-up).
RunLog scripted_log(const TabularMDP& mdp, const std::vector<double>& q, int M, std::uint64_t seed) {
    RunLog log;
    log.schedule = make_schedule(M, 1, mdp.horizon());
    log.warmup.m0 = 1;
    Rng rng(seed);
    for (int m = 1; m <= M; ++m) {
        EpochModel e;
        e.epoch = m;
        e.first_episode = log.schedule.first_episode(m);
        e.last_episode = log.schedule.last_episode(m);
        e.horizon = mdp.horizon();
        e.n_states = mdp.n_states();
        e.n_actions = mdp.n_actions();
        e.q = q;
        e.fit_values = q;
        e.bonus_values.assign(q.size(), 0.0);
        const auto pi = e.policy();
        for (long long k = e.first_episode; k <= e.last_episode; ++k)
            log.trajectories.push_back(rollout(mdp, pi, rng, k));
        log.epochs.push_back(std::move(e));
    }
    return log;
}

} // namespace

TEST(SurpriseLinear, OneHotUniformGivesSA) {
    const auto mdp = uniform_dynamics(3, 2, 2);
    const auto view = view_of(mdp, FeatureMap::one_hot(3, 2).matrix());
    const auto est = surprise_bound_linear(view, {Policy::uniform(2)});
    EXPECT_NEAR(est.min_eigenvalue, 1.0 / 6.0, 1e-12);
    EXPECT_NEAR(est.l1_upper, 6.0, 1e-9);
    EXPECT_TRUE(est.finite);
}

TEST(SurpriseLinear, ConstantFeatureGivesOne) {
    const auto mdp = uniform_dynamics(3, 2, 2);
    const auto view = view_of(mdp, Eigen::MatrixXd::Ones(6, 1));
    Rng rng(1);
    const auto est = surprise_bound_linear(view, probe_policies(3, 2, 2, 10, rng));
    EXPECT_NEAR(est.l1_upper, 1.0, 1e-12);
}

TEST(SurpriseLinear, SingularProbeReportsInfinity) {
    const auto mdp = uniform_dynamics(3, 2, 2);
    const auto view = view_of(mdp, FeatureMap::one_hot(3, 2).matrix());
    const auto est = surprise_bound_linear(view, exhaustive_policies(3, 2, 2));
    EXPECT_FALSE(est.finite);
    EXPECT_TRUE(std::isinf(est.l1_upper));
    EXPECT_FALSE(est.worst_policy_tag.empty());
    EXPECT_NE(est.worst_policy_tag, "uniform");
}

TEST(SurpriseLinear, EmpiricalRatioBelowBound) {
    Rng rng(2);
    for (int t = 0; t < 10; ++t) {
        const auto mdp = make_linear_mdp(3, 3, 2, 2, rng);
        const auto policies = exhaustive_policies(3, 2, 2);
        const auto est = surprise_bound_linear(mdp, policies);
        const LinearClass cls(mdp.features, 2);
        const double ratio = empirical_surprise_ratio(cls, mdp.tabular, policies, 10000, rng);
        EXPECT_LE(ratio, est.l1_upper);
        EXPECT_GE(est.l1_upper, 1.0);
    }
}

TEST(SurpriseLinear, ExhaustiveAndShuffledCoincide) {
    Rng rng(3);
    const auto mdp = make_linear_mdp(3, 3, 2, 2, rng);
    auto policies = exhaustive_policies(3, 2, 2);
    EXPECT_EQ(policies.size(), 64u);
    const auto a = surprise_bound_linear(mdp, policies);
    std::shuffle(policies.begin(), policies.end(), rng);
    const auto b = surprise_bound_linear(mdp, policies);
    EXPECT_DOUBLE_EQ(a.l1_upper, b.l1_upper);
}

TEST(SurpriseLinear, ExhaustiveRejectsLargeInstances) {
    EXPECT_THROW(exhaustive_policies(6, 2, 4), ModelError);
}

TEST(SurpriseSparse, OneHotGivesMinDiagonal) {
    const auto mdp = uniform_dynamics(4, 1, 2);
    const auto view = view_of(mdp, FeatureMap::one_hot(4, 1).matrix());
    const auto est = surprise_bound_sparse(view, {Policy::uniform(1)}, 1);
    EXPECT_NEAR(est.min_eigenvalue, 0.25, 1e-12);
    EXPECT_NEAR(est.l1_upper, 4.0 / 0.25, 1e-9);
}

TEST(SurpriseSparse, IdentityCovariance) {
    EXPECT_NEAR(restricted_eigenvalue(Eigen::MatrixXd::Identity(8, 8), 4), 1.0, 1e-12);
    // covariance I: the bound is 4s / 1
    const auto mdp = uniform_dynamics(1, 1, 1);
    const auto view = view_of(mdp, Eigen::MatrixXd::Ones(1, 1));
    EXPECT_NEAR(surprise_bound_sparse(view, {Policy::uniform(1)}, 2).l1_upper, 8.0, 1e-12);
}

TEST(SurpriseSparse, DiscretizedConeOracle) {
    Rng rng(4);
    LinearMdpOptions opt;
    opt.sparsity = 2;
    const auto mdp = make_linear_mdp(12, 12, 2, 2, rng, opt);
    const auto covs = feature_covariances(mdp.tabular, *mdp.features, Policy::uniform(2));
    std::normal_distribution<double> g(0.0, 1.0);
    for (const auto& cov : covs) {
        const double psi = restricted_eigenvalue(cov, 8);
        double oracle = std::numeric_limits<double>::infinity();
        for (int i = 0; i < 10000; ++i) {
            std::vector<int> idx(12);
            std::iota(idx.begin(), idx.end(), 0);
            std::shuffle(idx.begin(), idx.end(), rng);
            Eigen::VectorXd v = Eigen::VectorXd::Zero(12);
            for (int j = 0; j < 8; ++j)
                v[idx[j]] = g(rng);
            v.normalize();
            oracle = std::min(oracle, v.dot(cov * v));
        }
        EXPECT_GE(oracle, psi - 1e-12);
    }
}

TEST(SurpriseSparse, EmpiricalRatioBelowBound) {
    Rng rng(5);
    for (int t = 0; t < 5; ++t) {
        LinearMdpOptions opt;
        opt.sparsity = 2;
        const auto mdp = make_linear_mdp(8, 8, 2, 2, rng, opt);
        const auto policies = probe_policies(8, 2, 2, 50, rng);
        const auto est = surprise_bound_sparse(mdp, policies, 2);
        const SparseLinearClass cls(mdp.features, 2, 2);
        EXPECT_LE(empirical_surprise_ratio(cls, mdp.tabular, policies, 5000, rng), est.l1_upper);
    }
}

TEST(EmpiricalRatio, SingleStateAtMostOne) {
    const auto mdp = uniform_dynamics(1, 1, 3);
    const TabularClass cls(1, 1, 3);
    Rng rng(6);
    const double ratio = empirical_surprise_ratio(cls, mdp, {Policy::uniform(1)}, 1000, rng);
    EXPECT_LE(ratio, 1.0 + 1e-12);
    EXPECT_GT(ratio, 0.0);
}

TEST(EmpiricalRatio, IdenticalPairsExcluded) {
    const auto mdp = uniform_dynamics(2, 1, 1);
    const auto view = view_of(mdp, Eigen::MatrixXd::Zero(2, 1));
    const LinearClass cls(view.features, 1);
    Rng rng(7);
    EXPECT_EQ(empirical_surprise_ratio(cls, mdp, {Policy::uniform(1)}, 100, rng), 0.0);
}

TEST(LogLogSlope, PowerLawRecovered) {
    std::vector<double> cum;
    for (int k = 1; k <= 1000; ++k)
        cum.push_back(3.0 * std::pow(k, 0.5));
    EXPECT_NEAR(*log_log_slope(cum), 0.5, 1e-12);
}

TEST(LogLogSlope, UndefinedForZeroRegret) {
    EXPECT_FALSE(log_log_slope(std::vector<double>(100, 0.0)).has_value());
    EXPECT_FALSE(log_log_slope({}).has_value());
}

TEST(RegretReport, OptimalPolicyHasZeroRegret) {
    Rng rng(8);
    const auto mdp = make_random_tabular(4, 2, 3, 0.05, rng);
    const auto plan = exact_value_iteration(mdp);
    const auto log = scripted_log(mdp, plan.q, 6, 1);
    const auto rep = regret_report(log, plan, mdp);
    for (double r : rep.per_episode)
        EXPECT_EQ(r, 0.0);
    EXPECT_EQ(rep.final_regret, 0.0);
    EXPECT_FALSE(rep.slope.has_value());
}

TEST(RegretReport, ConstantRegretHasUnitSlope) {
    Rng rng(9);
    const auto mdp = make_random_tabular(4, 2, 3, 0.05, rng);
    const auto plan = exact_value_iteration(mdp);
    AgentConfig cfg;
    cfg.m_max = 12;
    const auto rep = regret_report(baseline_uniform(mdp, cfg, 1), plan, mdp);
    ASSERT_TRUE(rep.slope.has_value());
    EXPECT_NEAR(*rep.slope, 1.0, 1e-9);
    const double c = rep.per_episode.front();
    EXPECT_GT(c, 0.0);
    for (double r : rep.per_episode)
        EXPECT_DOUBLE_EQ(r, c);
}

TEST(RegretReport, NonnegativeAndNondecreasing) {
    Rng rng(10);
    const auto mdp = make_random_tabular(5, 3, 4, 0.05, rng);
    const auto plan = exact_value_iteration(mdp);
    AgentConfig cfg;
    cfg.m_max = 12;
    cfg.c_prime = 1e-7;
    const auto log = run(mdp, TabularClass(5, 3, 4), cfg, 2);
    const auto rep = regret_report(log, plan, mdp);
    ASSERT_EQ(rep.per_episode.size(), 4095u);
    for (std::size_t k = 0; k < rep.per_episode.size(); ++k) {
        EXPECT_GE(rep.per_episode[k], -1e-9);
        if (k > 0)
            EXPECT_GE(rep.cumulative[k], rep.cumulative[k - 1] - 1e-12);
    }
    // per-episode regret against the exact value of the executed policy
    const auto* model = log.model_for_episode(4095);
    ASSERT_NE(model, nullptr);
    EXPECT_NEAR(rep.per_episode.back(), plan.initial_value(mdp) - policy_value(mdp, model->policy()), 1e-12);
}

TEST(OptimismAudit, CountsPessimisticCells) {
    Rng rng(11);
    const auto mdp = make_random_tabular(3, 2, 2, 0.05, rng);
    const auto plan = exact_value_iteration(mdp);
    auto low = scripted_log(mdp, std::vector<double>(plan.q.size(), 0.0), 4, 2);
    const auto audit = optimism_audit(low, plan, mdp);
    EXPECT_GT(audit.checks, 0u);
    EXPECT_EQ(audit.violations, audit.checks);
    const auto exact = optimism_audit(scripted_log(mdp, plan.q, 4, 3), plan, mdp);
    EXPECT_EQ(exact.violations, 0u);
    EXPECT_EQ(exact.upper_violations, 0u);
}

TEST(Decomposition, HoldsOnSeededRuns) {
    Rng rng(42);
    const auto mdp = make_random_tabular(5, 3, 4, 0.05, rng);
    const auto plan = exact_value_iteration(mdp);
    AgentConfig cfg;
    cfg.c_prime = 1e-7;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto log = run(mdp, TabularClass(5, 3, 4), cfg, seed);
        const auto check = decomposition_check(log, plan, mdp, cfg.delta);
        EXPECT_TRUE(check.holds);
        EXPECT_DOUBLE_EQ(check.martingale_term, 8.0 * 4.0 * std::sqrt(4.0 * 8191.0 * std::log(160.0)));
        EXPECT_DOUBLE_EQ(check.warmup_term, static_cast<double>(EpochSchedule::tau(log.schedule.m0 + 1)) * 4.0);
    }
}
