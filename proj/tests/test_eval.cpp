#include <catch2/catch_amalgamated.hpp>

#include <algorithm>

#include "crowdloc/eval.hpp"
#include "crowdloc/rng.hpp"
#include "oracles.hpp"

using namespace crowdloc;

TEST_CASE("single prediction inside and outside the radius") {
    std::vector<GtPoint> gts = {{10.0, 10.0, 5.0}};

    MatchReport in = match_instances({{12.0, 11.0}}, gts);
    CHECK(in.tp == 1);
    CHECK(in.fp == 0);
    CHECK(in.fn == 0);
    REQUIRE(in.pairs.size() == 1);
    CHECK(in.pairs[0].dist == Catch::Approx(std::sqrt(5.0)));

    MatchReport out = match_instances({{20.0, 20.0}}, gts);
    CHECK(out.tp == 0);
    CHECK(out.fp == 1);
    CHECK(out.fn == 1);
}

TEST_CASE("optimal assignment beats greedy nearest-first") {
    // Greedy would give pred (3,0) to GT A (distance 3 beats 4 to B), leaving
    // pred (7,0) with only A available at distance 7 > sigma. Optimal matches
    // both.
    std::vector<GtPoint> gts = {{0.0, 0.0, 5.0}, {6.0, 0.0, 5.0}};
    MatchReport r = match_instances({{3.0, 0.0}, {7.0, 0.0}}, gts);
    CHECK(r.tp == 2);
    CHECK(r.fp == 0);
    CHECK(r.fn == 0);
}

TEST_CASE("empty inputs") {
    MatchReport none = match_instances({}, {});
    CHECK(none.tp == 0);
    CHECK(none.fp == 0);
    CHECK(none.fn == 0);

    MatchReport no_pred = match_instances({}, {{1.0, 1.0, 2.0}});
    CHECK(no_pred.fn == 1);

    MatchReport no_gt = match_instances({{1.0, 1.0}}, {});
    CHECK(no_gt.fp == 1);
}

TEST_CASE("matching is one-to-one and bounded") {
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const int m = static_cast<int>(rng.next_u64() % 7);
        const int n = static_cast<int>(rng.next_u64() % 7);
        std::vector<std::pair<double, double>> preds;
        std::vector<GtPoint> gts;
        for (int i = 0; i < m; ++i) preds.push_back({rng.uniform(0, 30), rng.uniform(0, 30)});
        for (int j = 0; j < n; ++j)
            gts.push_back({rng.uniform(0, 30), rng.uniform(0, 30), rng.uniform(1.0, 8.0)});
        MatchReport r = match_instances(preds, gts);
        CHECK(r.tp <= std::min(m, n));
        CHECK(r.tp + r.fp == m);
        CHECK(r.tp + r.fn == n);
        std::vector<char> used_p(m, 0), used_g(n, 0);
        for (const MatchPair& pr : r.pairs) {
            CHECK(!used_p[pr.pred]);
            CHECK(!used_g[pr.gt]);
            used_p[pr.pred] = 1;
            used_g[pr.gt] = 1;
            CHECK(pr.dist <= gts[pr.gt].sigma);
        }
    }
}

TEST_CASE("hungarian equals exhaustive enumeration on small instances") {
    Rng rng(5);
    for (int trial = 0; trial < 120; ++trial) {
        const int m = static_cast<int>(rng.next_u64() % 7);
        const int n = static_cast<int>(rng.next_u64() % 7);
        std::vector<std::pair<double, double>> preds;
        std::vector<GtPoint> gts;
        for (int i = 0; i < m; ++i) preds.push_back({rng.uniform(0, 20), rng.uniform(0, 20)});
        for (int j = 0; j < n; ++j)
            gts.push_back({rng.uniform(0, 20), rng.uniform(0, 20), rng.uniform(1.0, 9.0)});
        MatchReport got = match_instances(preds, gts);
        oracle::BruteMatch want = oracle::brute_match(preds, gts);
        REQUIRE(got.tp == want.tp);
        double total = 0.0;
        for (const MatchPair& p : got.pairs) total += p.dist;
        REQUIRE(total == Catch::Approx(want.total_dist).margin(1e-9));
    }
}

TEST_CASE("matching is invariant to the order of predictions and gts") {
    Rng rng(7);
    std::vector<std::pair<double, double>> preds;
    std::vector<GtPoint> gts;
    for (int i = 0; i < 6; ++i) preds.push_back({rng.uniform(0, 20), rng.uniform(0, 20)});
    for (int j = 0; j < 5; ++j)
        gts.push_back({rng.uniform(0, 20), rng.uniform(0, 20), rng.uniform(2.0, 8.0)});
    MatchReport base = match_instances(preds, gts);
    auto preds2 = preds;
    auto gts2 = gts;
    std::reverse(preds2.begin(), preds2.end());
    std::reverse(gts2.begin(), gts2.end());
    MatchReport perm = match_instances(preds2, gts2);
    CHECK(perm.tp == base.tp);
    CHECK(perm.fp == base.fp);
    CHECK(perm.fn == base.fn);
}

TEST_CASE("aggregate scores") {
    SECTION("perfect predictions") {
        std::vector<MatchReport> reps(3);
        for (auto& r : reps) r.tp = 4;
        LocScores s = localization_scores(reps);
        CHECK(s.pre == 1.0);
        CHECK(s.rec == 1.0);
        CHECK(s.f1 == 1.0);
    }
    SECTION("no predictions, nonempty gt") {
        std::vector<MatchReport> reps(1);
        reps[0].fn = 5;
        LocScores s = localization_scores(reps);
        CHECK(s.pre == 0.0);
        CHECK(s.rec == 0.0);
        CHECK(s.f1 == 0.0);
    }
    SECTION("hand-computed mixed case") {
        std::vector<MatchReport> reps(2);
        reps[0].tp = 2;
        reps[0].fp = 1;
        reps[0].fn = 1;
        reps[1].tp = 1;
        reps[1].fn = 1;
        LocScores s = localization_scores(reps);
        CHECK(s.pre == Catch::Approx(0.75));
        CHECK(s.rec == Catch::Approx(0.6));
        CHECK(s.f1 == Catch::Approx(2.0 / 3.0));
    }
    SECTION("empty everything scores zero") {
        LocScores s = localization_scores({});
        CHECK(s.pre == 0.0);
        CHECK(s.rec == 0.0);
        CHECK(s.f1 == 0.0);
    }
}

TEST_CASE("f1 is the harmonic mean") {
    Rng rng(11);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<MatchReport> reps(1);
        reps[0].tp = static_cast<int>(rng.next_u64() % 10);
        reps[0].fp = static_cast<int>(rng.next_u64() % 10);
        reps[0].fn = static_cast<int>(rng.next_u64() % 10);
        LocScores s = localization_scores(reps);
        CHECK(s.f1 <= 2.0 * s.pre + 1e-12);
        CHECK(s.f1 <= 2.0 * s.rec + 1e-12);
        if (s.pre * s.rec == 0.0) CHECK(s.f1 == 0.0);
        if (s.pre * s.rec > 0.0)
            CHECK(s.f1 == Catch::Approx(2.0 * s.pre * s.rec / (s.pre + s.rec)));
    }
}

TEST_CASE("counting errors") {
    SECTION("all exact") {
        CountReport r = counting_errors({{5, 5}, {2, 2}, {0, 0}});
        CHECK(r.mae == 0.0);
        CHECK(r.mse == 0.0);
        CHECK(r.nae == 0.0);
    }
    SECTION("hand-computed pair") {
        CountReport r = counting_errors({{10, 8}, {5, 5}});
        CHECK(r.mae == Catch::Approx(1.0));
        CHECK(r.mse == Catch::Approx(std::sqrt(2.0)));
        CHECK(r.nae == Catch::Approx(0.125));
    }
    SECTION("negative sample alone") {
        CountReport r = counting_errors({{3, 0}});
        CHECK(r.mae == 3.0);
        CHECK(r.mse == 3.0);
        CHECK(r.nae == 0.0);  // no image with gt > 0 contributes
    }
    SECTION("order invariance") {
        CountReport a = counting_errors({{10, 8}, {5, 5}, {7, 0}});
        CountReport b = counting_errors({{7, 0}, {10, 8}, {5, 5}});
        CHECK(a.mae == b.mae);
        CHECK(a.mse == b.mse);
        CHECK(a.nae == b.nae);
    }
}
