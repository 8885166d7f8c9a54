#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "support.hpp"
#include "trevo/pattern.hpp"

using namespace trevo;

namespace {

PatternQuery query(const std::string& preset, const std::string& trait) {
    auto q = find_preset(preset).value().query;
    q.primary_trait = trait;
    return q;
}

const RankedPair& find_pair(const Dataset& ds, const std::vector<RankedPair>& ranked, const std::string& a,
                            const std::string& b) {
    for (const auto& rp : ranked) {
        if (ds.tree.node(rp.metrics.leaf_a).id == a && ds.tree.node(rp.metrics.leaf_b).id == b) return rp;
    }
    FAIL("pair not found");
    return ranked.front();
}

}  // namespace

TEST_CASE("presets are the six feasible target triples") {
    CHECK(presets().size() == 6);
    const auto conv = find_preset("convergence").value();
    CHECK(conv.query.targets == std::array{Target::High, Target::High, Target::Low});
    CHECK(conv.query.weights == std::array{1.0, 1.0, 1.0});
    CHECK(conv.query.distance_mix == 0.5);
    std::set<std::array<Target, 3>> triples;
    for (const auto& p : presets()) {
        triples.insert(p.query.targets);
        // closeness high with delta low is infeasible
        CHECK_FALSE((p.query.targets[1] == Target::Low && p.query.targets[2] == Target::High));
    }
    CHECK(triples.size() == 6);
    CHECK_FALSE(find_preset("nope"));
}

TEST_CASE("fixture trajectories and metrics") {
    const auto& ds = testing::fixture7();
    const auto r = testing::idx(ds, "R");
    const auto a = testing::idx(ds, "A");
    const auto c = testing::idx(ds, "C");
    const auto tr = trajectory(ds, r, a, "svl");
    REQUIRE(tr.samples.size() == 3);
    const double expect[3][4] = {{0, 10, 8, 12}, {1, 12, 10, 14}, {2, 14, 14, 14}};
    for (int i = 0; i < 3; ++i) {
        CHECK(tr.samples[i].time == expect[i][0]);
        CHECK(tr.samples[i].estimate == expect[i][1]);
        CHECK(tr.samples[i].lower == expect[i][2]);
        CHECK(tr.samples[i].upper == expect[i][3]);
    }

    const auto d_ac = metric_distance(ds.tree, a, c);
    CHECK(d_ac.distance_time == 2.0);
    CHECK(d_ac.topo_edges == 4);
    const auto d_ab = metric_distance(ds.tree, a, testing::idx(ds, "B"));
    CHECK(d_ab.distance_time == 1.0);
    CHECK(d_ab.topo_edges == 2);

    // breakpoints {0, 0.5, 1, 2} give diffs {0, 3, 4.667, 8}
    const auto tc = trajectory(ds, r, c, "svl");
    CHECK(metric_delta(tr, tc) == 8.0);
    const oracle::PathSeries sa{{0, 1, 2}, {10, 12, 14}};
    const oracle::PathSeries sc{{0, 0.5, 2}, {10, 8, 6}};
    CHECK(std::abs(oracle::path_value(sa.times, sa.values, 1.0) - oracle::path_value(sc.times, sc.values, 1.0)) ==
          doctest::Approx(14.0 / 3.0));
    CHECK(std::abs(oracle::breakpoint_delta(sa, sc, 2.0) - 8.0) < 1e-12);
    CHECK(std::abs(oracle::dense_delta(sa, sc, 2.0, 10000) - 8.0) < 1e-9);
    CHECK(metric_closeness(ds, a, c, "svl") == 8.0);
}

TEST_CASE("metric errors") {
    const auto& ds = testing::fixture7();
    const auto a = testing::idx(ds, "A");
    auto code = [&](auto&& f) {
        try {
            f();
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::Io;
    };
    CHECK(code([&] { metric_distance(ds.tree, a, a); }) == ErrorCode::SamePair);
    CHECK(code([&] { metric_distance(ds.tree, a, testing::idx(ds, "N1")); }) == ErrorCode::UnknownLeaf);
    CHECK(code([&] { trajectory(ds, testing::idx(ds, "N2"), a, "svl"); }) == ErrorCode::NotAnAncestor);
    CHECK(code([&] { trajectory(ds, testing::idx(ds, "R"), a, "island"); }) == ErrorCode::KindMismatch);
    CHECK(code([&] {
        metric_delta(trajectory(ds, testing::idx(ds, "N1"), a, "svl"),
                     trajectory(ds, testing::idx(ds, "R"), testing::idx(ds, "C"), "svl"));
    }) == ErrorCode::MismatchedRoot);
    CHECK(code([&] { score_all_pairs(ds, query("convergence", "island")); }) == ErrorCode::KindMismatch);
    CHECK(code([&] { score_all_pairs(ds, query("convergence", "mass")); }) == ErrorCode::UnknownTrait);
}

TEST_CASE("query validation") {
    auto q = query("convergence", "svl");
    CHECK_NOTHROW(validate_query(q));
    auto bad = q;
    bad.weights[0] = -1;
    CHECK_THROWS_AS(validate_query(bad), Error);
    bad = q;
    bad.weights[1] = std::nan("");
    CHECK_THROWS_AS(validate_query(bad), Error);
    bad = q;
    bad.targets = {Target::Ignore, Target::Ignore, Target::Ignore};
    CHECK_THROWS_AS(validate_query(bad), Error);
    bad = q;
    bad.weights = {0, 0, 0};
    CHECK_THROWS_AS(validate_query(bad), Error);
    bad = q;
    bad.distance_mix = 1.5;
    CHECK_THROWS_AS(validate_query(bad), Error);
    // weight on an ignored metric does not count
    bad = q;
    bad.targets = {Target::Ignore, Target::High, Target::Low};
    bad.weights = {5, 0, 0};
    CHECK_THROWS_AS(validate_query(bad), Error);
}

TEST_CASE("fixture ranking") {
    const auto& ds = testing::fixture7();
    const auto ranked = score_all_pairs(ds, query("convergence", "svl"));
    REQUIRE(ranked.size() == 6);
    for (std::size_t i = 0; i < ranked.size(); ++i) CHECK(ranked[i].rank == i + 1);
    // (A,C): distance and delta at their maxima, closeness at its maximum too.
    const auto& ac = find_pair(ds, ranked, "A", "C");
    CHECK(ac.normalized[0] == 1.0);
    CHECK(ac.normalized[1] == 1.0);
    CHECK(ac.normalized[2] == 1.0);
    CHECK(ac.score == doctest::Approx(2.0 / 3.0));
    CHECK(ac.desirability[2] == 0.0);
    // Four cross pairs tie at 2/3 and keep lexicographic order.
    CHECK(ds.tree.node(ranked[0].metrics.leaf_a).id == "A");
    CHECK(ds.tree.node(ranked[0].metrics.leaf_b).id == "C");
    CHECK(ds.tree.node(ranked[1].metrics.leaf_b).id == "D");
    CHECK(ds.tree.node(ranked[2].metrics.leaf_a).id == "B");
    // heatmap: one cell per continuous trait; top-1% threshold is 1 for 6 pairs.
    CHECK(top_percent_threshold(6) == 1);
    for (const auto& rp : ranked) {
        REQUIRE(rp.heatmap.size() == 2);
        CHECK(rp.heatmap[0].rank == rp.rank);
        int top = 0;
        for (const auto& cell : rp.heatmap) top += cell.top1pct ? 1 : 0;
        CHECK(rp.top_rank_frequency == top);
    }
    CHECK(ranked[0].heatmap[0].saturation(6) == 1.0);
    CHECK(ranked[5].heatmap[0].saturation(6) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("top-1% threshold") {
    CHECK(top_percent_threshold(1) == 1);
    CHECK(top_percent_threshold(100) == 1);
    CHECK(top_percent_threshold(101) == 2);
    CHECK(top_percent_threshold(19900) == 199);
}

TEST_CASE("ignored metrics and custom weights") {
    const auto& ds = testing::fixture7();
    auto q = query("convergence", "svl");
    q.targets = {Target::Ignore, Target::Ignore, Target::Low};
    const auto ranked = score_all_pairs(ds, q);
    // closeness low only: C,D and A,B (|diff| 1) lead, in pair order.
    CHECK(ds.tree.node(ranked[0].metrics.leaf_a).id == "A");
    CHECK(ds.tree.node(ranked[0].metrics.leaf_b).id == "B");
    CHECK(ranked[0].score == 1.0);
    CHECK_FALSE(ranked[0].desirability[0].has_value());
    CHECK(ranked[0].desirability[2].has_value());

    q = query("convergence", "svl");
    q.weights = {0, 1, 0};
    const auto only_delta = score_all_pairs(ds, q);
    for (const auto& rp : only_delta) CHECK(rp.score == rp.normalized[1]);
}

TEST_CASE("minimum distance filter keeps pairs with score zero") {
    const auto& ds = testing::fixture7();
    auto q = query("convergence", "svl");
    q.min_distance_time = 1.2;
    const auto ranked = score_all_pairs(ds, q);
    CHECK(ranked.size() == 6);
    const auto& ab = find_pair(ds, ranked, "A", "B");
    CHECK(ab.filtered);
    CHECK(ab.score == 0.0);
    const auto& cd = find_pair(ds, ranked, "C", "D");
    CHECK_FALSE(cd.filtered);
    CHECK(ranked.back().filtered);
}

TEST_CASE("rank-frequency ordering") {
    const auto ds = testing::random_dataset(30, 5, 1);
    const auto ranked = score_all_pairs(ds, query("convergence", "trait1"));
    const auto by_freq = sort_by_rank_frequency(ranked);
    REQUIRE(by_freq.size() == ranked.size());
    for (std::size_t i = 1; i < by_freq.size(); ++i) {
        const auto& x = by_freq[i - 1];
        const auto& y = by_freq[i];
        CHECK(x.top_rank_frequency >= y.top_rank_frequency);
        if (x.top_rank_frequency == y.top_rank_frequency) {
            CHECK(x.score >= y.score);
            if (x.score == y.score) CHECK(x.rank < y.rank);
        }
    }
}

TEST_CASE("ranking equals the naive reference on random datasets") {
    for (std::uint64_t seed = 1000; seed < 1030; ++seed) {
        const auto ds = testing::random_dataset(10, 4, seed);
        for (const auto& preset : presets()) {
            auto q = preset.query;
            q.primary_trait = "trait" + std::to_string(1 + seed % 4);
            const auto ranked = score_all_pairs(ds, q);
            const auto naive = oracle::naive_rank(ds, q);
            REQUIRE(ranked.size() == naive.size());
            for (std::size_t i = 0; i < ranked.size(); ++i) {
                const auto& r = ranked[i];
                REQUIRE(ds.tree.node(r.metrics.leaf_a).id == naive[i].a);
                REQUIRE(ds.tree.node(r.metrics.leaf_b).id == naive[i].b);
                REQUIRE(r.score == naive[i].score);
                REQUIRE(r.rank == naive[i].rank);
                for (std::size_t k = 0; k < r.heatmap.size(); ++k) {
                    REQUIRE(r.heatmap[k].rank == naive[i].trait_ranks[k]);
                    REQUIRE(r.heatmap[k].top1pct == naive[i].top[k]);
                }
            }
        }
    }
}

TEST_CASE("metric invariants on integer-time trees") {
    std::mt19937_64 rng(4242);
    for (int rep = 0; rep < 100; ++rep) {
        const auto ds = testing::integer_time_dataset(rng, 3 + static_cast<int>(rng() % 10));
        const double present = ds.tree.present_time();
        const auto leaves = ds.tree.leaves();
        for (std::size_t i = 0; i < leaves.size(); ++i) {
            for (std::size_t j = i + 1; j < leaves.size(); ++j) {
                const auto pm = pair_metrics(ds, leaves[i], leaves[j], "x");
                CHECK(pm.closeness <= pm.delta + 1e-9);
                const auto sa = oracle::series(ds, 0, pm.mrca, pm.leaf_a);
                const auto sb = oracle::series(ds, 0, pm.mrca, pm.leaf_b);
                const int steps = static_cast<int>(std::lround(present - sa.times.front())) * 100;
                CHECK(std::abs(pm.delta - oracle::dense_delta(sa, sb, present, steps)) <= 1e-9);
                CHECK(std::abs(pm.delta - oracle::breakpoint_delta(sa, sb, present)) <= 1e-12);
            }
        }
    }
}
