#include "lsvi/mdp.hpp"

#include <gtest/gtest.h>

using namespace lsvi;

namespace {

// Deterministic chain 0 -> 1 -> ... -> H-1 (absorbing at the end); reward 1 only at the last step.
TabularMDP chain(int horizon) {
    const int S = horizon;
    std::vector<double> transition(static_cast<std::size_t>(S) * S, 0.0), reward(S, 0.0),
        initial(S, 0.0);
    for (int s = 0; s < S; ++s)
        transition[static_cast<std::size_t>(s) * S + std::min(s + 1, S - 1)] = 1.0;
    reward[S - 1] = 1.0;
    initial[0] = 1.0;
    return TabularMDP(S, 1, horizon, transition, reward, initial);
}

std::vector<Policy> all_deterministic(int H, int S, int A) {
    std::vector<Policy> out;
    const std::size_t cells = static_cast<std::size_t>(H) * S;
    std::size_t total = 1;
    for (std::size_t i = 0; i < cells; ++i)
        total *= static_cast<std::size_t>(A);
    for (std::size_t code = 0; code < total; ++code) {
        std::vector<int> actions(cells);
        std::size_t c = code;
        for (auto& a : actions) {
            a = static_cast<int>(c % A);
            c /= A;
        }
        out.push_back(Policy::deterministic(H, S, A, actions, "enum"));
    }
    return out;
}

} // namespace

TEST(TabularMDP, RejectsInvalidRows) {
    EXPECT_THROW(TabularMDP(1, 1, 1, {0.5}, {0.0}, {1.0}), ModelError);
    EXPECT_THROW(TabularMDP(1, 1, 1, {1.0}, {1.5}, {1.0}), ModelError);
    EXPECT_THROW(TabularMDP(2, 1, 1, {1.2, -0.2, 0.0, 1.0}, {0.0, 0.0}, {1.0, 0.0}), ModelError);
    EXPECT_THROW(TabularMDP(1, 1, 1, {1.0}, {0.0}, {0.9}), ModelError);
}

TEST(Rollout, SingleStateChainRepeatsState) {
    TabularMDP mdp(1, 2, 5, {1.0, 1.0}, {0.25, 0.75}, {1.0});
    Rng rng(3);
    const auto traj = rollout(mdp, Policy::uniform(2), rng);
    ASSERT_EQ(traj.steps.size(), 5u);
    for (const auto& st : traj.steps) {
        EXPECT_EQ(st.state, 0);
        EXPECT_EQ(st.next_state, 0);
        EXPECT_EQ(st.reward, st.action == 0 ? 0.25 : 0.75);
    }
}

TEST(Rollout, DeterministicChainRewards) {
    const auto mdp = chain(2);
    Rng rng(1);
    const auto traj = rollout(mdp, Policy::uniform(1), rng);
    ASSERT_EQ(traj.steps.size(), 2u);
    EXPECT_EQ(traj.steps[0].reward, 0.0);
    EXPECT_EQ(traj.steps[1].reward, 1.0);
}

TEST(Rollout, SeedDeterminismAndRewardLookup) {
    Rng gen(11);
    const auto mdp = make_random_tabular(4, 3, 5, 0.0, gen);
    Rng a(99), b(99);
    for (int i = 0; i < 20; ++i) {
        const auto ta = rollout(mdp, Policy::uniform(3), a, i);
        const auto tb = rollout(mdp, Policy::uniform(3), b, i);
        for (std::size_t h = 0; h < ta.steps.size(); ++h) {
            EXPECT_EQ(ta.steps[h].state, tb.steps[h].state);
            EXPECT_EQ(ta.steps[h].action, tb.steps[h].action);
            EXPECT_EQ(ta.steps[h].next_state, tb.steps[h].next_state);
            EXPECT_EQ(ta.steps[h].reward, mdp.reward(ta.steps[h].state, ta.steps[h].action));
            if (h + 1 < ta.steps.size())
                EXPECT_EQ(ta.steps[h].next_state, ta.steps[h + 1].state);
        }
    }
}

TEST(ValueIteration, ChainTerminalReward) {
    for (int H : {1, 2, 5}) {
        const auto mdp = chain(H);
        const auto plan = exact_value_iteration(mdp);
        EXPECT_DOUBLE_EQ(plan.v_at(0, 0), 1.0);
    }
}

TEST(ValueIteration, ZeroRewardsGiveZeroQ) {
    Rng gen(5);
    const auto base = make_random_tabular(3, 2, 4, 0.0, gen);
    const auto mdp = base.with_rewards(std::vector<double>(6, 0.0));
    const auto plan = exact_value_iteration(mdp);
    for (double q : plan.q)
        EXPECT_EQ(q, 0.0);
    EXPECT_EQ(policy_value(mdp, Policy::uniform(2)), 0.0);
}

TEST(ValueIteration, MatchesExhaustivePolicyEnumeration) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng gen(seed);
        const auto mdp = make_random_tabular(3, 2, 3, 0.0, gen);
        const auto plan = exact_value_iteration(mdp);
        const auto policies = all_deterministic(3, 3, 2);
        ASSERT_EQ(policies.size(), 512u);
        std::vector<double> best(3, -1.0);
        for (const auto& pi : policies) {
            const auto v = policy_state_values(mdp, pi);
            for (int s = 0; s < 3; ++s) {
                EXPECT_LE(v[s], plan.v_at(0, s) + 1e-12);
                best[s] = std::max(best[s], v[s]);
            }
        }
        for (int s = 0; s < 3; ++s)
            EXPECT_NEAR(best[s], plan.v_at(0, s), 1e-12);
    }
}

TEST(ValueIteration, PureAndInRange) {
    Rng gen(8);
    const auto mdp = make_random_tabular(6, 3, 5, 0.02, gen);
    const auto a = exact_value_iteration(mdp);
    const auto b = exact_value_iteration(mdp);
    EXPECT_EQ(a.q, b.q);
    EXPECT_EQ(a.v, b.v);
    for (int h = 0; h < 5; ++h)
        for (int s = 0; s < 6; ++s) {
            EXPECT_GE(a.v_at(h, s), 0.0);
            EXPECT_LE(a.v_at(h, s), 5 - h + 1e-12);
            for (int x = 0; x < 3; ++x)
                if (h == 4)
                    EXPECT_EQ(a.q_at(h, s, x), mdp.reward(s, x));
        }
}

TEST(PolicyValue, GreedyFromOptimalMatchesVStar) {
    Rng gen(21);
    const auto mdp = make_random_tabular(5, 3, 4, 0.05, gen);
    const auto plan = exact_value_iteration(mdp);
    const auto greedy = Policy::greedy(plan.q, 4, 5, 3, "opt");
    EXPECT_NEAR(policy_value(mdp, greedy), plan.initial_value(mdp), 1e-10);
}

TEST(PolicyValue, UniformMatchesMonteCarlo) {
    Rng gen(4);
    const auto mdp = make_random_tabular(4, 2, 3, 0.0, gen);
    const double exact = policy_value(mdp, Policy::uniform(2));
    Rng rng(77);
    const int n = 1000000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double g = rollout(mdp, Policy::uniform(2), rng).total_return();
        sum += g;
        sq += g * g;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sq / n - mean * mean) / n);
    EXPECT_LE(std::abs(mean - exact), 3.0 * se);
}

TEST(PolicyValue, OptimalDominatesEveryEnumerablePolicy) {
    Rng gen(12);
    const auto mdp = make_random_tabular(3, 2, 2, 0.0, gen);
    const double v_star = exact_value_iteration(mdp).initial_value(mdp);
    for (const auto& pi : all_deterministic(2, 3, 2))
        EXPECT_LE(policy_value(mdp, pi), v_star + 1e-12);
}

TEST(Occupancy, DistributionsSumToOne) {
    Rng gen(2);
    const auto mdp = make_random_tabular(5, 2, 4, 0.0, gen);
    for (const auto& d : occupancy(mdp, Policy::uniform(2))) {
        double sum = 0.0;
        for (double x : d)
            sum += x;
        EXPECT_NEAR(sum, 1.0, 1e-12);
    }
}

TEST(MakeRandomTabular, ForcedUniform) {
    Rng gen(1);
    const auto mdp = make_random_tabular(4, 2, 3, 0.25, gen);
    for (double p : mdp.transitions())
        EXPECT_NEAR(p, 0.25, 1e-15);
}

TEST(MakeRandomTabular, UnconstrainedRowsSumToOne) {
    Rng gen(2);
    const auto mdp = make_random_tabular(6, 3, 2, 0.0, gen);
    for (int s = 0; s < 6; ++s)
        for (int a = 0; a < 3; ++a) {
            double sum = 0.0;
            for (double p : mdp.transition_row(s, a))
                sum += p;
            EXPECT_NEAR(sum, 1.0, 1e-12);
        }
}

TEST(MakeRandomTabular, MinProbRespected) {
    Rng gen(3);
    const auto mdp = make_random_tabular(5, 3, 4, 0.05, gen);
    int rows = 0;
    for (int s = 0; s < 5; ++s)
        for (int a = 0; a < 3; ++a) {
            ++rows;
            for (double p : mdp.transition_row(s, a))
                EXPECT_GE(p, 0.05);
        }
    EXPECT_EQ(rows, 15);
    for (double p : mdp.initial_dist())
        EXPECT_GE(p, 0.05);
}

TEST(MakeRandomTabular, RejectsInfeasibleFloor) {
    Rng gen(0);
    EXPECT_THROW(make_random_tabular(5, 2, 2, 0.3, gen), ModelError);
}

TEST(MakeLinearMdp, ForcedUniformTransitions) {
    Rng gen(6);
    LinearMdpOptions opt;
    opt.min_prob = 1.0 / 4.0;
    const auto lm = make_linear_mdp(3, 4, 2, 3, gen, opt);
    for (double p : lm.tabular.transitions())
        EXPECT_NEAR(p, 0.25, 1e-12);
    EXPECT_LE(lm.renormalization_gap, 1e-12);
}

TEST(MakeLinearMdp, FeatureNormsAndSparsity) {
    Rng gen(7);
    const auto dense = make_linear_mdp(4, 6, 3, 3, gen);
    for (int s = 0; s < 6; ++s)
        for (int a = 0; a < 3; ++a)
            EXPECT_LE(dense.features->row(s, a).norm(), 1.0 + 1e-12);

    LinearMdpOptions opt;
    opt.sparsity = 2;
    opt.anchor_weight = 0.5;
    const auto sparse = make_linear_mdp(8, 10, 2, 3, gen, opt);
    for (int s = 0; s < 10; ++s)
        for (int a = 0; a < 2; ++a) {
            const auto row = sparse.features->row(s, a);
            EXPECT_LE(row.cwiseAbs().maxCoeff(), 1.0 + 1e-12);
            EXPECT_LE((row.array() != 0.0).count(), 2);
        }
    int nnz = 0;
    for (double t : sparse.reward_param)
        nnz += t != 0.0;
    EXPECT_LE(nnz, 2);
}

TEST(MakeLinearMdp, ExactFactorizationWithoutNoise) {
    Rng gen(8);
    const auto lm = make_linear_mdp(3, 5, 2, 3, gen);
    EXPECT_LE(lm.renormalization_gap, 1e-12);
    for (int s = 0; s < 5; ++s)
        for (int a = 0; a < 2; ++a)
            for (int n = 0; n < 5; ++n) {
                double p = 0.0;
                for (int i = 0; i < 3; ++i)
                    p += lm.features->row(s, a)[i] * lm.measures[static_cast<std::size_t>(i) * 5 + n];
                EXPECT_NEAR(p, lm.tabular.transition(s, a, n), 1e-12);
            }
}

TEST(MakeLinearMdp, NoisyMeasuresAreRenormalized) {
    Rng gen(9);
    LinearMdpOptions opt;
    opt.measure_noise = 0.2;
    const auto lm = make_linear_mdp(3, 6, 2, 3, gen, opt);
    EXPECT_GT(lm.renormalization_gap, 0.0);
    for (double p : lm.tabular.transitions())
        EXPECT_GE(p, 0.0);
}

TEST(MakeLinearMdp, SeedDeterminism) {
    Rng a(10), b(10);
    const auto x = make_linear_mdp(4, 5, 2, 3, a);
    const auto y = make_linear_mdp(4, 5, 2, 3, b);
    EXPECT_EQ(x.tabular.transitions(), y.tabular.transitions());
    EXPECT_EQ(x.features->matrix(), y.features->matrix());
}

TEST(MakeLinearMdp, RejectsInfeasibleParameters) {
    Rng gen(0);
    LinearMdpOptions opt;
    opt.sparsity = 5;
    EXPECT_THROW(make_linear_mdp(3, 4, 2, 2, gen, opt), ModelError);
    EXPECT_THROW(make_linear_mdp(0, 4, 2, 2, gen), ModelError);
}

TEST(PerturbRewards, StaysInRangeAndWithinZeta) {
    Rng gen(1);
    const auto mdp = make_random_tabular(5, 3, 4, 0.05, gen);
    Rng rng(2);
    const auto p = perturb_rewards(mdp, 0.01, rng);
    for (std::size_t i = 0; i < mdp.rewards().size(); ++i) {
        EXPECT_LE(std::abs(p.rewards()[i] - mdp.rewards()[i]), 0.01 + 1e-15);
        EXPECT_GE(p.rewards()[i], 0.0);
        EXPECT_LE(p.rewards()[i], 1.0);
    }
}
