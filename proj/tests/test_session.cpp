#include <algorithm>
#include <vector>

#include <gtest/gtest.h>

#include <prefgp/json_io.hpp>
#include <prefgp/session.hpp>

using namespace prefgp;

namespace {

SessionConfig synthetic_config(QueryType type, std::uint64_t seed = 7, std::size_t count = 20) {
    SessionConfig cfg;
    cfg.query_type = type;
    cfg.synthetic = SyntheticSource{3, 300, count};
    cfg.seed = seed;
    return cfg;
}

SessionConfig supplied_config(std::vector<std::vector<double>> values) {
    SessionConfig cfg;
    cfg.query_type = QueryType::ranking;
    for (std::size_t i = 0; i < values.size(); ++i)
        cfg.candidates.push_back({ItemId{static_cast<std::int64_t>(i)}, values[i], "p" + std::to_string(i)});
    return cfg;
}

/// Answers n queries with a simulated user (no-op once finished).
void drive(Session& s, std::size_t n, std::uint64_t seed = 1, double sigma = 0.01) {
    Rng urng(seed);
    const auto utility = synthetic::sample_utility(urng, static_cast<std::size_t>(s.candidates().dims()));
    for (std::size_t q = 0; q < n && !s.finished(); ++q) {
        std::vector<std::pair<ItemId, PolicyValue>> items;
        for (const auto& it : s.next_query().items) items.emplace_back(it.id, it.value);
        s.submit_response(synthetic::simulate_response(utility, s.config().query_type, items, sigma, urng, s.config().top_k));
    }
}

std::vector<ItemId> ids_of(const QueryPayload& p) {
    std::vector<ItemId> out;
    for (const auto& it : p.items) out.push_back(it.id);
    return out;
}

}  // namespace

TEST(SessionTest, StartsWithTwoNewItems) {
    Session s("a", synthetic_config(QueryType::ranking));
    const auto p = s.next_query();
    EXPECT_EQ(p.items.size(), 2u);
    EXPECT_TRUE(std::ranges::all_of(p.items, [](const auto& it) { return it.is_new; }));
    EXPECT_EQ(p.query_index, 0u);
    EXPECT_FALSE(p.previous);
    EXPECT_THROW(s.current_best(), StateError);
    EXPECT_EQ(s.events().size(), 2u);  // created, query
}

TEST(SessionTest, DeterministicForSameSeedAndAnswers) {
    for (auto type : {QueryType::pairwise, QueryType::ranking, QueryType::clustering, QueryType::toprank}) {
        Session a("x", synthetic_config(type)), b("x", synthetic_config(type));
        drive(a, 8);
        drive(b, 8);
        EXPECT_TRUE(a.same_state(b)) << to_string(type);
    }
    Session c("x", synthetic_config(QueryType::ranking, 8));
    Session d("x", synthetic_config(QueryType::ranking, 7));
    EXPECT_NE(c.candidates(), d.candidates());
}

TEST(SessionTest, RankingPayloadGrowsByOne) {
    Session s("r", synthetic_config(QueryType::ranking));
    for (std::size_t q = 0; q < 4; ++q) {
        const auto p = s.next_query();
        EXPECT_EQ(p.items.size(), q + 2);
        EXPECT_EQ(std::ranges::count_if(p.items, [](const auto& it) { return it.is_new; }), q == 0 ? 2 : 1);
        drive(s, 1);
    }
    // The shown items come back in the order last expressed.
    const auto prev = std::get<Ranking>(*s.next_query().previous).order;
    auto ids = ids_of(s.next_query());
    ids.pop_back();
    EXPECT_EQ(ids, prev);
}

TEST(SessionTest, PairwisePayloadStaysAtTwo) {
    Session s("p", synthetic_config(QueryType::pairwise));
    for (int q = 0; q < 6; ++q) {
        const auto p = s.next_query();
        ASSERT_EQ(p.items.size(), 2u);
        drive(s, 1);
        const auto winner = std::get<PairwiseChoice>(*s.next_query().previous).winner;
        EXPECT_EQ(s.next_query().items.front().id, winner);  // winner meets the next item
    }
}

TEST(SessionTest, VirtualComparisonsPerResponse) {
    Session s("v", synthetic_config(QueryType::ranking));
    drive(s, 1);
    EXPECT_EQ(s.dataset().count(Origin::virtual_), 4u);
    for (std::size_t q = 2; q <= 5; ++q) {
        drive(s, 1);
        EXPECT_EQ(s.dataset().count(Origin::virtual_), 4u + 2u * (q - 1));
    }
    auto cfg = synthetic_config(QueryType::ranking);
    cfg.virtual_mode = VirtualMode::off;
    Session off("o", cfg);
    drive(off, 5);
    EXPECT_EQ(off.dataset().count(Origin::virtual_), 0u);
    EXPECT_FALSE(off.dataset().items().contains(ItemId::nadir()));
}

TEST(SessionTest, PriorMeanSwitchesAtSixthRefit) {
    Session s("m", synthetic_config(QueryType::ranking));
    for (int q = 1; q <= 7; ++q) {
        drive(s, 1);
        const auto want = q <= 5 ? MeanKind::linear : MeanKind::zero;
        EXPECT_EQ(s.gp().mean_config().kind, want) << "after response " << q;
    }
}

TEST(SessionTest, TwoCandidatesFinishAfterOneAnswer) {
    Session s("t", supplied_config({{0.9, 0.2}, {0.2, 0.9}}));
    const auto p = s.next_query();
    ASSERT_EQ(p.items.size(), 2u);
    const auto a = p.items[1].id, b = p.items[0].id;
    s.submit_response(Ranking{{a, b}});
    EXPECT_TRUE(s.finished());
    EXPECT_EQ(s.current_best().first, a);
    EXPECT_THROW(s.next_query(), ExhaustedError);
    EXPECT_THROW(s.submit_response(Ranking{{a, b}}), ExhaustedError);
    EXPECT_EQ(s.events().back().kind, Event::Kind::finished);
}

TEST(SessionTest, BestIsNeverAReferencePoint) {
    Session s("b", synthetic_config(QueryType::clustering));
    for (int q = 0; q < 10; ++q) {
        drive(s, 1);
        const auto best = s.current_best().first;
        EXPECT_FALSE(best.is_virtual());
        EXPECT_TRUE(s.candidates().is_queried(best));
    }
}

TEST(SessionTest, RejectsMismatchedResponses) {
    Session s("x", synthetic_config(QueryType::ranking));
    drive(s, 2);
    const auto ids = ids_of(s.next_query());
    ASSERT_EQ(ids.size(), 4u);
    const auto before = s.events().size();
    EXPECT_THROW(s.submit_response(Ranking{{ids[0], ids[1], ids[2]}}), ItemMismatchError);
    EXPECT_THROW(s.submit_response(Ranking{{ids[0], ids[1], ids[2], ids[3], ItemId{999}}}), ItemMismatchError);
    EXPECT_THROW(s.submit_response(Ranking{{ids[0], ids[1], ids[2], ids[2]}}), InputError);
    EXPECT_THROW(s.submit_response(TopRank{{ids[0]}, {ids[1], ids[2], ids[3]}}), ItemMismatchError);
    EXPECT_THROW(s.submit_response(PairwiseChoice{ids[0], ids[1]}), ItemMismatchError);
    EXPECT_EQ(s.events().size(), before);
    EXPECT_EQ(s.query_count(), 2u);
}

TEST(SessionTest, TopRankNeedsMinOfKAndItems) {
    auto cfg = synthetic_config(QueryType::toprank);
    cfg.top_k = 3;
    Session s("k", cfg);
    auto ids = ids_of(s.next_query());
    EXPECT_THROW(s.submit_response(TopRank{{ids[0]}, {ids[1]}}), ItemMismatchError);
    s.submit_response(TopRank{{ids[0], ids[1]}, {}});
    ids = ids_of(s.next_query());
    EXPECT_THROW(s.submit_response(TopRank{{ids[0], ids[1]}, {ids[2]}}), ItemMismatchError);
    EXPECT_NO_THROW(s.submit_response(TopRank{{ids[2], ids[0], ids[1]}, {}}));
}

TEST(SessionTest, UserComparisonCountLaw) {
    for (auto type : {QueryType::pairwise, QueryType::ranking, QueryType::clustering, QueryType::toprank}) {
        Session s("c", synthetic_config(type, 11));
        std::size_t expected = 0;
        for (int q = 0; q < 8; ++q) {
            const auto n = s.next_query().items.size();
            drive(s, 1, 100 + q);
            const auto r = *s.next_query().previous;
            if (type == QueryType::ranking || type == QueryType::pairwise) {
                expected += n - 1;
            } else if (const auto* c = std::get_if<Clustering>(&r)) {
                expected += c->clusters[0].size() * (1 + c->clusters[1].size());
            } else {
                const auto& t = std::get<TopRank>(r);
                expected += t.top.size() - 1 + t.rest.size();
            }
            EXPECT_EQ(s.dataset().count(Origin::user), expected) << to_string(type);
        }
    }
}

TEST(SessionTest, SuppliedCandidates) {
    auto cfg = supplied_config({{10, 200}, {20, 100}, {15, 150}});
    EXPECT_THROW(Session("n", cfg), InputError);  // outside [0,1] without normalize
    cfg.normalize = true;
    Session s("n", cfg);
    EXPECT_EQ(s.candidates().value(ItemId{0}), (PolicyValue{0.0, 1.0}));
    EXPECT_EQ(s.candidates().value(ItemId{2}), (PolicyValue{0.5, 0.5}));
    const auto p = s.next_query();
    for (const auto& it : p.items) {
        EXPECT_EQ(it.label, "p" + std::to_string(it.id.value));
        EXPECT_EQ(it.raw, cfg.candidates[static_cast<std::size_t>(it.id.value)].values);
    }
    // extrema reference points for supplied data
    EXPECT_EQ(s.monotonicity().nadir, (PolicyValue{0.0, 0.0}));
    EXPECT_EQ(s.monotonicity().ideal, (PolicyValue{1.0, 1.0}));
}

TEST(SessionTest, ConfigValidation) {
    SessionConfig none;
    EXPECT_THROW(Session("z", none), InputError);
    auto both = synthetic_config(QueryType::ranking);
    both.candidates = supplied_config({{0.1, 0.2}, {0.3, 0.1}}).candidates;
    EXPECT_THROW(Session("z", both), InputError);
    auto one = supplied_config({{0.1, 0.2}});
    EXPECT_THROW(Session("z", one), InputError);
    auto dup = supplied_config({{0.1, 0.2}, {0.3, 0.1}});
    dup.candidates[1].id = ItemId{0};
    EXPECT_THROW(Session("z", dup), InputError);
    auto neg = supplied_config({{0.1, 0.2}, {0.3, 0.1}});
    neg.candidates[1].id = ItemId{-4};
    EXPECT_THROW(Session("z", neg), InputError);
}

TEST(SessionTest, FailedFitKeepsPreviousModel) {
    auto cfg = synthetic_config(QueryType::ranking);
    cfg.fit.max_iter = 3;
    cfg.fit.tol = 1e-300;  // unreachable
    Session s("f", cfg);
    drive(s, 3);
    EXPECT_EQ(s.query_count(), 3u);
    EXPECT_EQ(s.fit_failures(), 3u);
    EXPECT_FALSE(s.gp().fitted());
    EXPECT_EQ(std::ranges::count_if(s.events(), [](const auto& e) { return e.kind == Event::Kind::fit_failed; }), 3);
    EXPECT_NO_THROW(s.current_best());
    EXPECT_EQ(s.next_query().items.size(), 5u);
}

TEST(SessionTest, ReplayReproducesState) {
    for (auto type : {QueryType::pairwise, QueryType::ranking, QueryType::clustering, QueryType::toprank}) {
        Session s("rp", synthetic_config(type, 3));
        drive(s, 7, 9);
        const auto restored = Session::replay("rp", events_from_jsonl(events_to_jsonl(s.events())));
        EXPECT_TRUE(restored.same_state(s)) << to_string(type);
        for (std::size_t i = 0; i < s.events().size(); ++i)
            EXPECT_EQ(restored.events()[i].timestamp_ms, s.events()[i].timestamp_ms);
    }
}

TEST(SessionTest, ReplayRejectsForeignLog) {
    Session s("a", synthetic_config(QueryType::ranking, 3));
    drive(s, 2);
    auto log = s.events();
    log.front().config->seed = 4;  // different candidates and queries
    EXPECT_THROW(Session::replay("a", log), Error);
    EXPECT_THROW(Session::replay("a", {}), InputError);
}

TEST(SessionTest, FinishIsIdempotent) {
    Session s("e", synthetic_config(QueryType::ranking));
    drive(s, 1);
    s.finish();
    s.finish();
    EXPECT_TRUE(s.finished());
    EXPECT_EQ(std::ranges::count_if(s.events(), [](const auto& e) { return e.kind == Event::Kind::finished; }), 1);
    EXPECT_TRUE(s.pending().empty());
}

TEST(ConfigJsonTest, RoundTrip) {
    auto cfg = supplied_config({{0.1, 0.25}, {0.3, 0.125}});
    cfg.prior_switch_after = MonotonicityConfig::kAlwaysLinear;
    cfg.virtual_mode = VirtualMode::first_k;
    cfg.virtual_k = 3;
    cfg.reference_points = ReferencePoints::hypercube;
    cfg.objectives = {{"cost", "EUR"}, {"speed", "km/h"}};
    cfg.fit.sigma = 0.05;
    cfg.seed = 123456789012345ULL;
    EXPECT_EQ(config_from_json(json::parse(config_to_json(cfg).dump())), cfg);
    const auto syn = synthetic_config(QueryType::toprank);
    EXPECT_EQ(config_from_json(json::parse(config_to_json(syn).dump())), syn);
    EXPECT_THROW(config_from_json(json{{"query_type", "nope"}}), InputError);
    EXPECT_THROW(config_from_json(json{{"prior_switch_after", "later"}}), InputError);
    EXPECT_THROW(config_from_json(json{{"top_k", "three"}}), InputError);
}
