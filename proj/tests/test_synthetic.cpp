#include <cmath>
#include <numeric>
#include <vector>

#include <gtest/gtest.h>

#include <prefgp/synthetic.hpp>

#include "oracles.hpp"

using namespace prefgp;
using namespace prefgp::synthetic;

namespace {

// u(v) = 1 + (v0 - 1)^3, so v0 = 1 + cbrt(u - 1) hits a chosen utility.
UtilitySpec first_objective_only() {
    auto comp = make_component(Polynomial{1.0});
    auto flat = make_component(Polynomial{1.0});
    return {{1.0, 0.0}, {*comp, *flat}};
}

PolicyValue with_utility(double u) { return {1.0 + std::cbrt(u - 1.0), 0.5}; }

}  // namespace

TEST(ComponentTest, SigmoidRawValue) {
    // n = 1, b = 9 at x = 0: 1 / (1 + e^10)
    EXPECT_NEAR(raw_component(StackedSigmoid{20.0, 9.0, 1}, 0.0), 1.0 / (1.0 + std::exp(10.0)), 1e-18);
    // each term at x = 1 is 1 / (1 + exp(-(a - j) + b + j))
    const double want = 1.0 / (1.0 + std::exp(-(30.0 - 1) + 5.0 + 1)) + 1.0 / (1.0 + std::exp(-(30.0 - 2) + 5.0 + 2));
    EXPECT_NEAR(raw_component(StackedSigmoid{30.0, 5.0, 2}, 1.0), want, 1e-15);
}

TEST(ComponentTest, PolynomialEndpoints) {
    for (double c : {1.0, 2.5, 5.0}) {
        const auto spec = make_component(Polynomial{c});
        ASSERT_TRUE(spec);
        EXPECT_DOUBLE_EQ(raw_component(spec->shape, 0.0), -1.0);
        EXPECT_NEAR(raw_component(spec->shape, 1.0), std::pow(c - 1.0, 3), 1e-12);
        EXPECT_DOUBLE_EQ(eval_component(*spec, 0.0), 0.0);
        EXPECT_DOUBLE_EQ(eval_component(*spec, 1.0), 1.0);
    }
    EXPECT_THROW(eval_component(*make_component(Polynomial{2.0}), 1.2), InputError);
}

TEST(ComponentTest, SampledShapesAreMonotoneAndNormalized) {
    Rng rng(8);
    for (int i = 0; i < 300; ++i) {
        const auto shape = sample_shape(rng);
        const auto spec = make_component(shape);
        if (!spec) continue;
        EXPECT_NEAR(eval_component(*spec, 0.0), 0.0, 1e-12);
        EXPECT_NEAR(eval_component(*spec, 1.0), 1.0, 1e-12);
        double prev = 0.0;
        for (int k = 0; k <= 500; ++k) {
            const double y = eval_component(*spec, k / 500.0);
            EXPECT_GE(y, prev - 1e-12);
            prev = y;
        }
        if (const auto* s = std::get_if<StackedSigmoid>(&shape)) {
            EXPECT_GE(s->a, 10.0);
            EXPECT_LE(s->a, 50.0);
            EXPECT_GE(s->b, 1.0);
            EXPECT_LE(s->b, 20.0);
            EXPECT_GE(s->n, 1);
            EXPECT_LE(s->n, 10);
        } else {
            const double c = std::get<Polynomial>(shape).c;
            EXPECT_GE(c, 1.0);
            EXPECT_LE(c, 5.0);
        }
    }
}

TEST(UtilityTest, WeightsOnSimplex) {
    Rng rng(1);
    for (std::size_t d : {2u, 5u, 9u}) {
        const auto w = sample_simplex(rng, d);
        ASSERT_EQ(w.size(), d);
        EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-12);
        for (double x : w) EXPECT_GE(x, 0.0);
    }
}

TEST(UtilityTest, CornersAndMonotoneProbes) {
    Rng rng(21);
    for (int t = 0; t < 200; ++t) {
        const std::size_t d = 2 + rng.below(6);
        const auto u = sample_utility(rng, d);
        const auto di = static_cast<Eigen::Index>(d);
        EXPECT_NEAR(eval_utility(u, PolicyValue::constant(di, 0.0)), 0.0, 1e-12);
        EXPECT_NEAR(eval_utility(u, PolicyValue::constant(di, 1.0)), 1.0, 1e-12);
        for (int p = 0; p < 20; ++p) {
            Vector lo(di), hi(di);
            for (Eigen::Index i = 0; i < di; ++i) {
                lo[i] = rng.uniform();
                hi[i] = rng.uniform(lo[i], 1.0);
            }
            EXPECT_LE(eval_utility(u, PolicyValue(lo)), eval_utility(u, PolicyValue(hi)) + 1e-12);
        }
    }
    EXPECT_THROW(sample_utility(rng, 1), InputError);
}

TEST(UtilityTest, DeterministicPerSeed) {
    Rng a(99), b(99);
    EXPECT_EQ(sample_utility(a, 5), sample_utility(b, 5));
}

TEST(ParetoTest, DominanceExamples) {
    EXPECT_TRUE(dominates({0.5, 0.5}, {0.5, 0.4}));
    EXPECT_FALSE(dominates({0.5, 0.5}, {0.5, 0.5}));
    EXPECT_FALSE(dominates({0.6, 0.3}, {0.5, 0.4}));
    const std::vector<PolicyValue> pts = {{0.1, 0.9}, {0.5, 0.5}, {0.4, 0.4}, {0.9, 0.1}, {0.5, 0.5}, {0.2, 0.2}};
    const auto front = non_dominated(pts);
    EXPECT_EQ(front, (std::vector<PolicyValue>{{0.1, 0.9}, {0.5, 0.5}, {0.9, 0.1}}));
}

TEST(ParetoTest, GeneratedSetIsNonDominatedAndDeterministic) {
    Rng a(5), b(5);
    const auto pcs = generate_pcs(a, 5, 1000, 75);
    EXPECT_EQ(pcs, generate_pcs(b, 5, 1000, 75));
    EXPECT_EQ(pcs.points.size(), 75u);
    for (const auto& p : pcs.points)
        for (const auto& q : pcs.points) EXPECT_FALSE(dominates(p, q));

    Rng c(6);
    const auto small = generate_pcs(c, 2, 50, 40);  // 2-D fronts of 50 points are small
    EXPECT_LE(small.points.size(), 40u);
    EXPECT_GE(small.points.size(), 2u);
    EXPECT_THROW(generate_pcs(c, 5, 10, 75), InputError);
}

TEST(TwoMeansTest, ClusteringExample) {
    const std::vector<double> xs = {0.8, 0.79, 0.1, 0.11};
    const auto [upper, lower] = two_means(xs);
    EXPECT_EQ(upper, (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(lower, (std::vector<std::size_t>{2, 3}));
}

TEST(TwoMeansTest, LocallyOptimal) {
    Rng rng(13);
    for (int t = 0; t < 500; ++t) {
        std::vector<double> xs(1 + rng.below(20));
        for (auto& x : xs) x = rng.uniform();
        const auto [upper, lower] = two_means(xs);
        ASSERT_EQ(upper.size() + lower.size(), xs.size());
        if (lower.empty()) continue;
        auto mean = [&](const std::vector<std::size_t>& idx) {
            double s = 0;
            for (auto i : idx) s += xs[i];
            return s / static_cast<double>(idx.size());
        };
        const double hi = mean(upper), lo = mean(lower);
        EXPECT_GT(hi, lo);
        for (auto i : upper) EXPECT_LE(std::abs(xs[i] - hi), std::abs(xs[i] - lo) + 1e-12);
        for (auto i : lower) EXPECT_LE(std::abs(xs[i] - lo), std::abs(xs[i] - hi) + 1e-12);
    }
}

TEST(SimulatedUserTest, NoiselessClustering) {
    const auto spec = first_objective_only();
    const std::vector<std::pair<ItemId, PolicyValue>> items = {{ItemId{0}, with_utility(0.1)},
                                                               {ItemId{1}, with_utility(0.8)},
                                                               {ItemId{2}, with_utility(0.9)},
                                                               {ItemId{3}, with_utility(0.11)},
                                                               {ItemId{4}, with_utility(0.79)}};
    Rng rng(0);
    const auto r = std::get<Clustering>(simulate_response(spec, QueryType::clustering, items, 0.0, rng));
    EXPECT_EQ(r.best, ItemId{2});
    ASSERT_EQ(r.clusters.size(), 2u);
    EXPECT_EQ(r.clusters[0], (std::vector<ItemId>{ItemId{1}, ItemId{4}}));
    EXPECT_EQ(r.clusters[1], (std::vector<ItemId>{ItemId{3}, ItemId{0}}));
}

TEST(SimulatedUserTest, NoiselessRankingAndTopRank) {
    const auto spec = first_objective_only();
    const std::vector<std::pair<ItemId, PolicyValue>> items = {
        {ItemId{0}, with_utility(0.3)}, {ItemId{1}, with_utility(0.6)}, {ItemId{2}, with_utility(0.5)},
        {ItemId{3}, with_utility(0.9)}};
    Rng rng(0);
    const auto r = std::get<Ranking>(simulate_response(spec, QueryType::ranking, items, 0.0, rng));
    EXPECT_EQ(r.order, (std::vector<ItemId>{ItemId{3}, ItemId{1}, ItemId{2}, ItemId{0}}));
    const auto t = std::get<TopRank>(simulate_response(spec, QueryType::toprank, items, 0.0, rng, 2));
    EXPECT_EQ(t.top, (std::vector<ItemId>{ItemId{3}, ItemId{1}}));
    EXPECT_EQ(t.rest, (std::vector<ItemId>{ItemId{2}, ItemId{0}}));
    EXPECT_THROW(simulate_response(spec, QueryType::pairwise, items, 0.0, rng), InputError);
}

TEST(SimulatedUserTest, FreshNoiseSwapFrequency) {
    const auto spec = first_objective_only();
    const double sigma = 0.05, delta = 0.04;
    const std::vector<std::pair<ItemId, PolicyValue>> items = {{ItemId{0}, with_utility(0.5)},
                                                               {ItemId{1}, with_utility(0.5 + delta)}};
    const double du = eval_utility(spec, items[1].second) - eval_utility(spec, items[0].second);
    const double p = oracle::phi_via_erf(du / (std::sqrt(2.0) * sigma));
    Rng rng(77);
    const int n = 20000;
    int correct = 0;
    for (int i = 0; i < n; ++i)
        correct += std::get<PairwiseChoice>(simulate_response(spec, QueryType::pairwise, items, sigma, rng)).winner == ItemId{1};
    const double se = std::sqrt(p * (1 - p) / n);
    EXPECT_NEAR(static_cast<double>(correct) / n, p, 4 * se);
}
