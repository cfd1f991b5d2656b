#include "lsvi/function_space.hpp"
#include "lsvi/oracles.hpp"

#include <gtest/gtest.h>

#include <unordered_set>

using namespace lsvi;

namespace {

std::shared_ptr<const FeatureMap> random_features(int S, int A, int d, Rng& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::MatrixXd rows(S * A, d);
    for (Eigen::Index i = 0; i < rows.rows(); ++i) {
        for (Eigen::Index j = 0; j < d; ++j)
            rows(i, j) = g(rng);
        rows.row(i) /= std::max(1.0, rows.row(i).norm());
    }
    return std::make_shared<const FeatureMap>(S, A, rows);
}

StateActionSet random_set(int S, int A, int n_entries, int max_mult, Rng& rng) {
    StateActionSet z;
    std::uniform_int_distribution<int> ds(0, S - 1), da(0, A - 1), dm(1, max_mult);
    for (int i = 0; i < n_entries; ++i)
        z.add(ds(rng), da(rng), static_cast<std::uint64_t>(dm(rng)));
    return z;
}

template <class C>
double naive_norm(const C& cls, const FunctionHandle& f, const FunctionHandle& g,
                  const StateActionSet& z) {
    double sum = 0.0;
    for (const auto& e : z.entries())
        for (std::uint64_t i = 0; i < e.multiplicity; ++i) {
            const double d = cls.raw(f, e.sa.state, e.sa.action) - cls.raw(g, e.sa.state, e.sa.action);
            sum += d * d;
        }
    return std::sqrt(sum);
}

} // namespace

TEST(StateActionSet, TotalsAndDistinct) {
    StateActionSet z;
    EXPECT_EQ(distinct_count(z), 0u);
    z.add(0, 0);
    z.add(0, 0);
    z.add(1, 0);
    EXPECT_EQ(z.total(), 3u);
    EXPECT_EQ(distinct_count(z), 2u);
    z.add(2, 1, 0);
    EXPECT_EQ(z.entries().size(), 3u);
}

TEST(StateActionSet, DistinctCountMatchesHashSet) {
    Rng rng(1);
    for (int t = 0; t < 20; ++t) {
        const auto z = random_set(7, 3, 200, 3, rng);
        std::unordered_set<int> seen;
        for (const auto& e : z.entries())
            seen.insert(e.sa.state * 3 + e.sa.action);
        EXPECT_EQ(distinct_count(z), seen.size());
    }
}

TEST(Evaluate, ZeroHandleIsZero) {
    Rng rng(2);
    TabularClass tab(3, 2, 4);
    LinearClass lin(random_features(3, 2, 3, rng), 4);
    for (int s = 0; s < 3; ++s)
        for (int a = 0; a < 2; ++a) {
            EXPECT_EQ(evaluate(tab, tab.zero(), s, a), 0.0);
            EXPECT_EQ(evaluate(lin, lin.zero(), s, a), 0.0);
        }
}

TEST(Evaluate, TabularIdentity) {
    TabularClass tab(2, 2, 3);
    const std::vector<double> r{0.1, 0.2, 0.7, 1.0};
    const auto f = tab.from_table(r);
    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a)
            EXPECT_EQ(evaluate(tab, f, s, a), r[s * 2 + a]);
}

TEST(Evaluate, LinearManualDotProductAndClip) {
    Eigen::MatrixXd rows(2, 3);
    rows << 0.2, 0.3, 0.4, -0.5, 0.1, 0.0;
    LinearClass lin(std::make_shared<const FeatureMap>(2, 1, rows), 2);
    const auto f = lin.from_weights(Eigen::Vector3d(1.0, 2.0, 3.0));
    EXPECT_NEAR(evaluate(lin, f, 0, 0), 0.2 + 0.6 + 1.2, 1e-15);
    // -0.5 + 0.2 < 0 is clipped to the range floor
    EXPECT_EQ(evaluate(lin, f, 1, 0), 0.0);
    const auto big = lin.from_weights(Eigen::Vector3d(0.0, 0.0, 9.0));
    EXPECT_EQ(evaluate(lin, big, 0, 0), 3.0);
}

TEST(ErmFit, TabularInterpolatesObservedAndZeroesTheRest) {
    TabularClass tab(3, 2, 4);
    LabeledSet data{{0, 0, 2.5}, {0, 0, 2.5}, {1, 1, 0.75}, {2, 0, 1.0}};
    const auto fit = erm_fit(tab, data);
    EXPECT_EQ(tab.raw(fit.handle, 0, 0), 2.5);
    EXPECT_EQ(tab.raw(fit.handle, 1, 1), 0.75);
    EXPECT_EQ(tab.raw(fit.handle, 2, 0), 1.0);
    EXPECT_EQ(tab.raw(fit.handle, 0, 1), 0.0);
    EXPECT_EQ(tab.raw(fit.handle, 2, 1), 0.0);
    EXPECT_EQ(fit.objective, 0.0);
}

TEST(ErmFit, LinearRecoversGeneratingWeights) {
    Rng rng(3);
    LinearClass lin(random_features(6, 2, 2, rng), 3);
    const Eigen::Vector2d w_star(0.8, -0.4);
    LabeledSet data;
    for (int s = 0; s < 6; ++s)
        for (int a = 0; a < 2; ++a)
            data.push_back({s, a, lin.features().row(s, a).dot(w_star)});
    const auto fit = erm_fit(lin, data);
    EXPECT_LE(fit.objective, 1e-8);
    EXPECT_NEAR(LinearClass::weights(fit.handle)[0], 0.8, 1e-8);
    EXPECT_NEAR(LinearClass::weights(fit.handle)[1], -0.4, 1e-8);
}

TEST(ErmFit, LinearRespectsBallAndBeatsRandomMembers) {
    Rng rng(4);
    for (int t = 0; t < 10; ++t) {
        LinearClass lin(random_features(5, 3, 4, rng), 2);
        LabeledSet data;
        std::uniform_int_distribution<int> ds(0, 4), da(0, 2);
        std::uniform_real_distribution<double> y(0.0, 2.0 * 2 + 1);
        for (int i = 0; i < 40; ++i)
            data.push_back({ds(rng), da(rng), 40.0 * y(rng)}); // targets far out force the ball
        const auto fit = erm_fit(lin, data);
        EXPECT_TRUE(lin.contains(fit.handle));
        EXPECT_NEAR(fit.objective, erm_objective(lin, fit.handle, data), 1e-6 * (1 + fit.objective));
        for (int k = 0; k < 100; ++k)
            EXPECT_LE(fit.objective, erm_objective(lin, lin.random_handle(rng), data) + 1e-9);
    }
}

TEST(ErmFit, LinearMinimumNormAmongMinimizers) {
    // Both features equal: only w0 + w1 is identified, min-norm splits evenly.
    Eigen::MatrixXd rows(1, 2);
    rows << 0.5, 0.5;
    LinearClass lin(std::make_shared<const FeatureMap>(1, 1, rows), 2);
    const auto fit = erm_fit(lin, {{0, 0, 1.0}});
    EXPECT_NEAR(fit.handle.params[0], 1.0, 1e-12);
    EXPECT_NEAR(fit.handle.params[1], 1.0, 1e-12);
}

TEST(ErmFit, TabularBeatsRandomMembers) {
    Rng rng(5);
    TabularClass tab(4, 2, 3);
    LabeledSet data;
    std::uniform_int_distribution<int> ds(0, 3), da(0, 1);
    for (int i = 0; i < 50; ++i)
        data.push_back({ds(rng), da(rng), 7.0 * uniform01(rng)});
    const auto fit = erm_fit(tab, data);
    for (int k = 0; k < 100; ++k)
        EXPECT_LE(fit.objective, erm_objective(tab, tab.random_handle(rng), data) + 1e-9);
}

TEST(ErmFit, SparseMatchesSupportEnumeration) {
    Rng rng(6);
    for (int t = 0; t < 5; ++t) {
        // sparsity 1 gives members with at most two nonzeros: C(10,2) supports.
        SparseLinearClass cls(random_features(12, 2, 10, rng), 3, 1);
        Eigen::VectorXd w_star = Eigen::VectorXd::Zero(10);
        w_star[t] = 1.5;
        w_star[(t + 4) % 10] = -0.7;
        LabeledSet data;
        for (int s = 0; s < 12; ++s)
            for (int a = 0; a < 2; ++a)
                data.push_back({s, a, cls.features().row(s, a).dot(w_star)});
        const auto exact = oracle::sparse_erm_enumerate(cls, data);
        EXPECT_LE(exact.objective, 1e-12);
        EXPECT_LE((SparseLinearClass::weights(exact.handle) - w_star).norm(), 1e-6);
        const auto fit = erm_fit(cls, data);
        EXPECT_TRUE(cls.contains(fit.handle));
        EXPECT_LE(fit.objective, exact.objective + 1e-6);
    }
}

TEST(ErmFit, SparseNoisyTargetsCloseToEnumeration) {
    Rng rng(7);
    SparseLinearClass cls(random_features(8, 2, 6, rng), 2, 1);
    LabeledSet data;
    std::uniform_int_distribution<int> ds(0, 7), da(0, 1);
    for (int i = 0; i < 60; ++i)
        data.push_back({ds(rng), da(rng), 3.0 * uniform01(rng)});
    const auto exact = oracle::sparse_erm_enumerate(cls, data);
    const auto fit = erm_fit(cls, data);
    EXPECT_TRUE(cls.contains(fit.handle));
    EXPECT_LE(exact.objective, fit.objective + 1e-9);
    for (int k = 0; k < 100; ++k)
        EXPECT_LE(fit.objective, erm_objective(cls, cls.random_handle(rng), data) + 1e-9);
}

TEST(ErmFit, RealizableTargetsAreFitAtLeastAsWellAsTheTruth) {
    Rng rng(8);
    LinearClass lin(random_features(5, 2, 3, rng), 3);
    const auto truth = lin.random_handle(rng);
    LabeledSet data;
    for (int s = 0; s < 5; ++s)
        for (int a = 0; a < 2; ++a)
            data.push_back({s, a, lin.raw(truth, s, a)});
    EXPECT_LE(erm_fit(lin, data).objective, erm_objective(lin, truth, data) + 1e-9);
}

TEST(DatasetNorm, BasicCases) {
    TabularClass tab(2, 1, 2);
    const auto f = tab.from_table({1.0, 0.0});
    const auto g = tab.from_table({1.5, 0.0});
    StateActionSet z;
    z.add(0, 0, 4);
    EXPECT_EQ(dataset_norm(tab, f, f, z), 0.0);
    EXPECT_DOUBLE_EQ(dataset_norm(tab, f, g, z), 1.0);
}

TEST(DatasetNorm, MatchesNaiveSumAndTriangle) {
    Rng rng(9);
    LinearClass lin(random_features(6, 3, 3, rng), 3);
    for (int t = 0; t < 50; ++t) {
        const auto z = random_set(6, 3, 30, 4, rng);
        const auto f = lin.random_handle(rng), g = lin.random_handle(rng), h = lin.random_handle(rng);
        EXPECT_NEAR(dataset_norm(lin, f, g, z), naive_norm(lin, f, g, z), 1e-9);
        EXPECT_LE(dataset_norm(lin, f, h, z), dataset_norm(lin, f, g, z) + dataset_norm(lin, g, h, z) + 1e-12);
    }
}

TEST(CoveringNumbers, TabularFormulaAndGridCover) {
    TabularClass tab(2, 2, 1);
    EXPECT_NEAR(log_covering_number_f(tab, 1.0), 4.0 * std::log(3.0), 1e-12);
    // grid {0,1,2}^4 is a sup-norm 1-cover of [0,2]^4
    Rng rng(10);
    const std::vector<double> axis{0.0, 1.0, 2.0};
    for (int t = 0; t < 1000; ++t)
        for (int i = 0; i < 4; ++i) {
            const double x = 2.0 * uniform01(rng);
            double best = 1e9;
            for (double c : axis)
                best = std::min(best, std::abs(x - c));
            EXPECT_LE(best, 1.0);
        }
    EXPECT_NEAR(std::log(std::pow(3.0, 4)), log_covering_number_f(tab, 1.0), 1e-12);
    EXPECT_GT(log_covering_number_f(tab, 10.0), 0.0);
    EXPECT_NEAR(log_covering_number_f(tab, 2.0), 4.0 * std::log(2.0), 1e-12);
    EXPECT_NEAR(log_covering_number_sa(tab, 0.1), std::log(4.0), 1e-12);
    EXPECT_THROW(log_covering_number_f(tab, 0.0), ModelError);
}

TEST(CoveringNumbers, LinearHalvingAddsLogTwo) {
    Eigen::MatrixXd rows = Eigen::MatrixXd::Ones(1, 1);
    LinearClass lin(std::make_shared<const FeatureMap>(1, 1, rows), 1);
    const double diff = log_covering_number_f(lin, 5e-4) - log_covering_number_f(lin, 1e-3);
    EXPECT_NEAR(diff, std::log(2.0), 1e-4);
}

TEST(CoveringNumbers, StateActionCoverOfUnitDisk) {
    Rng rng(11);
    LinearClass lin(random_features(2, 1, 2, rng), 1);
    const double eps = 0.5;
    EXPECT_NEAR(log_covering_number_sa(lin, 1.0), 2.0 * std::log(7.0), 1e-12);
    // greedy eps-net of the unit disk from a fine grid; its size is within the formula
    std::vector<Eigen::Vector2d> pts, net;
    for (double x = -1.0; x <= 1.0; x += 0.02)
        for (double y = -1.0; y <= 1.0; y += 0.02)
            if (x * x + y * y <= 1.0)
                pts.emplace_back(x, y);
    for (const auto& p : pts) {
        bool covered = false;
        for (const auto& c : net)
            covered = covered || (p - c).norm() <= eps;
        if (!covered)
            net.push_back(p);
    }
    EXPECT_LE(std::log(static_cast<double>(net.size())), log_covering_number_sa(lin, eps));
}

TEST(CoveringNumbers, MonotoneInEps) {
    Rng rng(12);
    TabularClass tab(3, 2, 4);
    LinearClass lin(random_features(3, 2, 3, rng), 4);
    SparseLinearClass sp(random_features(3, 2, 6, rng), 4, 2);
    double prev[6] = {1e300, 1e300, 1e300, 1e300, 1e300, 1e300};
    for (double eps = 1e-6; eps < 100.0; eps *= 1.7) {
        const double cur[6] = {tab.log_covering_number_f(eps), tab.log_covering_number_sa(eps),
                               lin.log_covering_number_f(eps), lin.log_covering_number_sa(eps),
                               sp.log_covering_number_f(eps),  sp.log_covering_number_sa(eps)};
        for (int i = 0; i < 6; ++i) {
            EXPECT_LE(cur[i], prev[i]);
            prev[i] = cur[i];
        }
    }
    EXPECT_NEAR(sp.log_covering_number_f(1.0),
                4.0 * (std::log(6.0) + std::log1p(48.0 * std::sqrt(6.0))), 1e-12);
}

TEST(TabularWidth, PinnedAndEmptyCases) {
    TabularClass tab(2, 1, 2);
    const auto f = tab.from_table({1.5, 0.5});
    StateActionSet z;
    z.add(0, 0, 4);
    EXPECT_EQ(width_at(tab, f, z, 0.0, 0, 0), 0.0);
    EXPECT_EQ(width_at(tab, f, StateActionSet{}, 1.0, 0, 0), 3.0);
    EXPECT_DOUBLE_EQ(width_at(tab, f, z, 1.0, 0, 0), 1.0);
    EXPECT_EQ(width_at(tab, f, z, 1.0, 1, 0), 3.0);
    EXPECT_NEAR(oracle::brute_force_width(tab, f, z, 1.0, 0, 0, 1e-3), 1.0, 2e-3);
    EXPECT_NEAR(oracle::brute_force_width(tab, f, z, 1.0, 1, 0, 1e-3), 3.0, 2e-3);
}

TEST(TabularWidth, AgreesWithBruteForce) {
    Rng rng(13);
    for (int t = 0; t < 50; ++t) {
        TabularClass tab(3, 2, 1 + t % 3);
        const auto f = tab.random_handle(rng);
        const auto z = random_set(3, 2, 4, 3, rng);
        const double radius = 4.0 * uniform01(rng);
        for (int s = 0; s < 3; ++s)
            for (int a = 0; a < 2; ++a) {
                const double exact = width_at(tab, f, z, radius, s, a);
                const double grid = oracle::brute_force_width(tab, f, z, radius, s, a, 1e-3);
                EXPECT_LE(grid, exact + 1e-12);
                EXPECT_LE(exact - grid, 2e-3);
                EXPECT_GE(exact, 0.0);
                EXPECT_LE(exact, tab.range_high());
            }
    }
}

TEST(LinearWidth, EmptySetGivesRange) {
    Rng rng(14);
    LinearClass lin(random_features(3, 2, 3, rng), 2);
    const auto f = lin.zero();
    for (int s = 0; s < 3; ++s) {
        // with phi bounded away from zero the unconstrained ball reaches both range ends
        const double w = width_at(lin, f, StateActionSet{}, 1.0, s, 0);
        const double reach = lin.weight_bound() * lin.features().row(s, 0).norm();
        EXPECT_NEAR(w, std::min(reach, 3.0), 1e-9);
    }
}

TEST(LinearWidth, ClosedFormSelfConsistency) {
    Rng rng(15);
    for (int t = 0; t < 20; ++t) {
        LinearClass lin(random_features(4, 2, 3, rng), 3);
        const auto z = random_set(4, 2, 8, 3, rng);
        const double radius = 0.05 + uniform01(rng);
        const auto ctx = lin.prepare_width(lin.zero(), z, radius);
        Eigen::MatrixXd a = lsvi::detail::gram_of(lin.features(), z);
        Eigen::MatrixXd pinv = a.completeOrthogonalDecomposition().pseudoInverse();
        for (int s = 0; s < 4; ++s)
            for (int x = 0; x < 2; ++x) {
                const Eigen::VectorXd phi = lin.features().row(s, x).transpose();
                const auto [lo, hi] = lin.raw_extent(ctx, s, x);
                const double quad = phi.dot(pinv * phi);
                EXPECT_NEAR((hi - lo) * (hi - lo) / quad, 4.0 * radius, 1e-6 * radius);
            }
    }
}

TEST(LinearWidth, AgreesWithBruteForceFullRank) {
    Rng rng(16);
    int checked = 0;
    for (int t = 0; t < 12; ++t) {
        const int d = 2 + t % 2;
        LinearClass lin(random_features(4, 2, d, rng), 2);
        StateActionSet z;
        for (int s = 0; s < 4; ++s)
            for (int a = 0; a < 2; ++a)
                z.add(s, a, 3);
        const auto f = lin.from_weights(Eigen::VectorXd::Constant(d, 0.8));
        const double radius = d == 2 ? 0.05 : 0.002;
        const Eigen::MatrixXd inv = lsvi::detail::gram_of(lin.features(), z).inverse();
        oracle::Box box;
        for (int i = 0; i < d; ++i) {
            const double half = std::sqrt(radius * inv(i, i)) * 1.001;
            box.lo.push_back(f.params[i] - half);
            box.hi.push_back(f.params[i] + half);
        }
        for (int s = 0; s < 2; ++s) {
            const double res = 1e-3;
            const double exact = width_at(lin, f, z, radius, s, 0);
            const double grid = oracle::brute_force_width(lin, f, z, radius, s, 0, res, box);
            const double tol = 2.0 * res * lin.features().row(s, 0).lpNorm<1>();
            EXPECT_LE(grid, exact + 1e-9);
            EXPECT_LE(exact - grid, tol);
            ++checked;
        }
    }
    EXPECT_EQ(checked, 24);
}

TEST(LinearWidth, BallActiveInNullSpace) {
    // Z only constrains the first coordinate; the second is limited by the weight ball.
    Eigen::MatrixXd rows(2, 2);
    rows << 1.0, 0.0, 0.6, 0.8;
    LinearClass lin(std::make_shared<const FeatureMap>(2, 1, rows), 3, 1.0);
    StateActionSet z;
    z.add(0, 0, 2);
    const auto f = lin.from_weights(Eigen::Vector2d(0.5, 0.0));
    const double radius = 0.02;
    oracle::Box box{{-1.0, -1.0}, {1.0, 1.0}};
    const double exact = width_at(lin, f, z, radius, 1, 0);
    const double grid = oracle::brute_force_width(lin, f, z, radius, 1, 0, 1e-3, box);
    EXPECT_LE(grid, exact + 1e-9);
    EXPECT_LE(exact - grid, 2e-3 * 1.4);
    // w0 in [0.4, 0.6] and |w1| <= sqrt(1 - w0^2): the top is 0.6 * 0.6 + 0.8 * 0.8, the bottom clips at 0
    EXPECT_NEAR(exact, 1.0, 1e-9);
}

TEST(Width, MonotoneInRadiusAndData) {
    Rng rng(17);
    for (int t = 0; t < 100; ++t) {
        TabularClass tab(3, 2, 3);
        LinearClass lin(random_features(3, 2, 3, rng), 3);
        const auto ft = tab.random_handle(rng);
        const auto fl = lin.random_handle(rng);
        auto z = random_set(3, 2, 5, 3, rng);
        auto bigger = z;
        bigger.add(static_cast<int>(rng() % 3), static_cast<int>(rng() % 2), 2);
        const double r1 = uniform01(rng), r2 = r1 + uniform01(rng);
        for (int s = 0; s < 3; ++s)
            for (int a = 0; a < 2; ++a) {
                EXPECT_LE(width_at(tab, ft, z, r1, s, a), width_at(tab, ft, z, r2, s, a) + 1e-12);
                EXPECT_LE(width_at(tab, ft, bigger, r1, s, a), width_at(tab, ft, z, r1, s, a) + 1e-12);
                EXPECT_LE(width_at(lin, fl, z, r1, s, a), width_at(lin, fl, z, r2, s, a) + 1e-9);
                EXPECT_LE(width_at(lin, fl, bigger, r1, s, a), width_at(lin, fl, z, r1, s, a) + 1e-9);
            }
    }
}

TEST(SparseWidth, FlaggedLowerBoundAgreesWithGridWhenSparsityInactive) {
    Rng rng(18);
    for (int t = 0; t < 5; ++t) {
        // d = 2 with sparsity 1 allows two nonzeros: a plain box class
        SparseLinearClass cls(random_features(3, 2, 2, rng), 2, 1, 1.0);
        StateActionSet z;
        z.add(0, 0, 2);
        z.add(1, 1, 1);
        const auto f = cls.from_weights(Eigen::Vector2d(0.3, -0.2));
        const double radius = 0.01;
        oracle::Box box{{-1.0, -1.0}, {1.0, 1.0}};
        for (int s = 0; s < 3; ++s) {
            const auto w = width_at_detailed(cls, f, z, radius, s, 0);
            EXPECT_TRUE(w.lower_bound);
            const double grid = oracle::brute_force_width(cls, f, z, radius, s, 0, 2e-3, box);
            const double tol = 2.0 * 2e-3 * cls.features().row(s, 0).lpNorm<1>();
            EXPECT_NEAR(w.value, grid, tol + 1e-6);
        }
    }
}

TEST(SparseWidth, PinnedAndRange) {
    Rng rng(19);
    SparseLinearClass cls(random_features(6, 2, 5, rng), 2, 1);
    StateActionSet z;
    for (int s = 0; s < 6; ++s)
        for (int a = 0; a < 2; ++a)
            z.add(s, a);
    const auto f = cls.from_weights((Eigen::VectorXd(5) << 0.5, 0, 0, 0.4, 0).finished());
    for (int s = 0; s < 6; ++s) {
        const double w0 = width_at(cls, f, z, 0.0, s, 0);
        EXPECT_LE(w0, 1e-6);
        const double w = width_at(cls, f, z, 0.5, s, 0);
        EXPECT_GE(w, 0.0);
        EXPECT_LE(w, cls.range_high());
    }
}
