#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <vector>

#include "diffad/metrics.hpp"
#include "diffad/rng.hpp"
#include "diffad/scoring.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace diffad;

namespace {

ScoreMap make_map(int h, int w, std::vector<double> values, MapStage stage) {
    ScoreMap m;
    m.height = h;
    m.width = w;
    m.values = std::move(values);
    m.slide_id = "s";
    m.stage = stage;
    return m;
}

}  // namespace

TEST_CASE("anomaly_score") {
    SUBCASE("identical inputs score zero") {
        CHECK(anomaly_score({1.0, -2.0, 3.0}, {1.0, -2.0, 3.0}) == 0.0);
    }
    SUBCASE("hand arithmetic (1+1)/2") {
        CHECK(anomaly_score({1.0, 1.0}, {0.0, 0.0}) == 1.0);
    }
    SUBCASE("symmetry") {
        Rng rng(2);
        for (int i = 0; i < 20; ++i) {
            const Latent a = rng.normal_vec(5), b = rng.normal_vec(5);
            CHECK(anomaly_score(a, b) == anomaly_score(b, a));
            CHECK(anomaly_score(a, b) >= 0.0);
        }
    }
    SUBCASE("dimension mismatch") {
        CHECK_THROWS_AS(anomaly_score({1.0}, {1.0, 2.0}), InvariantError);
    }
}

TEST_CASE("fit_zstats and zscore") {
    SUBCASE("hand arithmetic on {0,2} repeated to satisfy the sample floor") {
        std::vector<double> scores;
        for (int i = 0; i < 15; ++i) {
            scores.push_back(0.0);
            scores.push_back(2.0);
        }
        const ZStats st = fit_zstats(scores, "validation");
        CHECK(st.mean == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(st.std == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(st.source == "validation");
        CHECK(zscore(2.0, st) == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(zscore(st.mean, st) == 0.0);
    }
    SUBCASE("population (not sample) standard deviation") {
        // 30 values alternating -1/+1: population var = 1, sample var = 30/29
        std::vector<double> scores(30);
        for (size_t i = 0; i < 30; ++i) scores[i] = i % 2 == 0 ? -1.0 : 1.0;
        const ZStats st = fit_zstats(scores, "t");
        CHECK(st.std == doctest::Approx(1.0).epsilon(1e-14));
    }
    SUBCASE("affine shift moves the mean, not the z-scores") {
        Rng rng(3);
        std::vector<double> scores(64);
        for (auto& s : scores) s = rng.normal();
        const ZStats st = fit_zstats(scores, "t");
        std::vector<double> shifted = scores;
        for (auto& s : shifted) s += 5.25;
        const ZStats st2 = fit_zstats(shifted, "t");
        CHECK(st2.mean == doctest::Approx(st.mean + 5.25).epsilon(1e-12));
        CHECK(st2.std == doctest::Approx(st.std).epsilon(1e-12));
        for (size_t i = 0; i < scores.size(); ++i)
            CHECK(zscore(shifted[i], st2) ==
                  doctest::Approx(zscore(scores[i], st)).epsilon(1e-9));
    }
    SUBCASE("fewer than 30 scores is an error") {
        std::vector<double> scores(29, 0.0);
        scores[0] = 1.0;
        CHECK_THROWS_AS(fit_zstats(scores, "t"), DataError);
    }
    SUBCASE("zero variance is an error") {
        const std::vector<double> scores(40, 3.5);
        CHECK_THROWS_AS(fit_zstats(scores, "t"), DataError);
    }
}

TEST_CASE("zmap applies the z transform and advances the stage") {
    std::vector<double> scores(32);
    for (size_t i = 0; i < scores.size(); ++i) scores[i] = static_cast<double>(i);
    const ZStats st = fit_zstats(scores, "t");

    const ScoreMap raw = make_map(2, 2, {0.0, 8.0, 16.0, 31.0}, MapStage::raw);
    const ScoreMap z = zmap(raw, st);
    CHECK(z.stage == MapStage::z);
    CHECK(z.slide_id == raw.slide_id);
    for (size_t i = 0; i < 4; ++i)
        CHECK(z.values[i] == doctest::Approx(zscore(raw.values[i], st)).epsilon(1e-15));

    const ScoreMap already_z = make_map(2, 2, {0.0, 0.0, 0.0, 0.0}, MapStage::z);
    CHECK_THROWS_AS(zmap(already_z, st), InvariantError);
}

TEST_CASE("erode hand cases") {
    SUBCASE("spec example [[5,1],[2,3]]") {
        const ScoreMap z = make_map(2, 2, {5.0, 1.0, 2.0, 3.0}, MapStage::z);
        const ScoreMap e = erode(z);
        CHECK(e.stage == MapStage::eroded);
        CHECK(e.values == std::vector<double>{1.0, 1.0, 2.0, 3.0});
    }
    SUBCASE("constant map unchanged") {
        const ScoreMap z = make_map(3, 3, std::vector<double>(9, 4.25), MapStage::z);
        const ScoreMap e = erode(z);
        for (double v : e.values) CHECK(v == 4.25);
    }
    SUBCASE("1x1 map unchanged") {
        const ScoreMap z = make_map(1, 1, {7.5}, MapStage::z);
        CHECK(erode(z).values == std::vector<double>{7.5});
    }
    SUBCASE("stage must be z") {
        const ScoreMap raw = make_map(1, 1, {7.5}, MapStage::raw);
        CHECK_THROWS_AS(erode(raw), InvariantError);
        const ScoreMap e = make_map(1, 1, {7.5}, MapStage::eroded);
        CHECK_THROWS_AS(erode(e), InvariantError);
    }
}

TEST_CASE("erode equals the brute-force min filter and contracts") {
    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const int h = rng.uniform_int(1, 9);
        const int w = rng.uniform_int(1, 9);
        std::vector<double> values(static_cast<size_t>(h) * w);
        for (auto& v : values) v = rng.normal();
        const ScoreMap z = make_map(h, w, values, MapStage::z);
        const ScoreMap e = erode(z);
        const std::vector<double> want = oracle::brute_erode(values, h, w);
        CHECK(e.values == want);
        for (size_t i = 0; i < values.size(); ++i) CHECK(e.values[i] <= values[i]);
    }
}

TEST_CASE("slide_scores hand cases") {
    SUBCASE("100 cells: z_99 collapses to z_max") {
        Rng rng(11);
        std::vector<double> values(100);
        for (auto& v : values) v = rng.normal();
        const ScoreMap m = make_map(10, 10, values, MapStage::eroded);
        const SlideScore s = slide_scores(m);
        CHECK(s.z_max == *std::max_element(values.begin(), values.end()));
        CHECK(s.z_99 == s.z_max);
    }
    SUBCASE("200 cells, top two {10, 8}: z_99 = 9") {
        std::vector<double> values(200, 0.0);
        for (size_t i = 0; i < values.size(); ++i)
            values[i] = static_cast<double>(i) / 100.0;  // all below 2
        values[57] = 10.0;
        values[163] = 8.0;
        const ScoreMap m = make_map(10, 20, values, MapStage::eroded);
        const SlideScore s = slide_scores(m);
        CHECK(s.z_max == 10.0);
        CHECK(s.z_99 == doctest::Approx(9.0).epsilon(1e-15));
    }
    SUBCASE("constant map v gives (v, v)") {
        const ScoreMap m = make_map(4, 4, std::vector<double>(16, -2.5),
                                    MapStage::eroded);
        const SlideScore s = slide_scores(m);
        CHECK(s.z_max == -2.5);
        CHECK(s.z_99 == -2.5);
    }
    SUBCASE("stage must be eroded") {
        const ScoreMap m = make_map(1, 1, {0.0}, MapStage::z);
        CHECK_THROWS_AS(slide_scores(m), InvariantError);
    }
}

TEST_CASE("slide_scores matches the nearest-rank oracle on random maps") {
    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = rng.uniform_int(1, 250);
        std::vector<double> values(static_cast<size_t>(n));
        for (auto& v : values) v = rng.normal();
        const ScoreMap m = make_map(1, n, values, MapStage::eroded);
        const SlideScore s = slide_scores(m);
        CHECK(s.z_99 == doctest::Approx(oracle::brute_z99(values)).epsilon(1e-15));
        CHECK(s.z_99 <= s.z_max);
        if (n <= 100) CHECK(s.z_99 == s.z_max);
    }
}

TEST_CASE("segment thresholds strictly above zero") {
    SUBCASE("all-negative map is all false") {
        const ScoreMap m = make_map(2, 2, {-1.0, -0.5, -2.0, -0.1}, MapStage::eroded);
        const auto pred = segment(m);
        for (uint8_t p : pred) CHECK(p == 0);
    }
    SUBCASE("exactly k positive cells give k true") {
        const ScoreMap m =
            make_map(2, 3, {0.5, -1.0, 0.01, -0.2, 3.0, -0.5}, MapStage::eroded);
        const auto pred = segment(m);
        int k = 0;
        for (uint8_t p : pred) k += p;
        CHECK(k == 3);
    }
    SUBCASE("z = 0 exactly is negative") {
        const ScoreMap m = make_map(1, 3, {0.0, -0.0, 1e-300}, MapStage::eroded);
        const auto pred = segment(m);
        CHECK(pred[0] == 0);
        CHECK(pred[1] == 0);
        CHECK(pred[2] == 1);
    }
    SUBCASE("stage must be eroded") {
        const ScoreMap m = make_map(1, 1, {1.0}, MapStage::z);
        CHECK_THROWS_AS(segment(m), InvariantError);
    }
}

TEST_CASE("auc and aupr hand cases") {
    SUBCASE("perfect separation") {
        const std::vector<double> pos = {3.0, 4.0, 5.0}, neg = {0.0, 1.0, 2.0};
        CHECK(auc(pos, neg) == 1.0);
        CHECK(aupr(pos, neg) == 1.0);
    }
    SUBCASE("all scores identical") {
        const std::vector<double> pos(5, 1.0), neg(7, 1.0);
        CHECK(auc(pos, neg) == 0.5);
    }
    SUBCASE("reversed separation") {
        const std::vector<double> pos = {0.0, 1.0}, neg = {2.0, 3.0};
        CHECK(auc(pos, neg) == 0.0);
    }
    SUBCASE("empty class is undefined") {
        const std::vector<double> some = {1.0};
        CHECK_THROWS_AS(auc({}, some), DataError);
        CHECK_THROWS_AS(auc(some, {}), DataError);
        CHECK_THROWS_AS(aupr({}, some), DataError);
        CHECK_THROWS_AS(aupr(some, {}), DataError);
    }
}

TEST_CASE("auc and aupr match brute force on randomized tied instances") {
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const int np = rng.uniform_int(1, 60);
        const int nn = rng.uniform_int(1, 60);
        std::vector<double> pos(static_cast<size_t>(np)), neg(static_cast<size_t>(nn));
        // draw from a small integer grid so ties are common
        for (auto& v : pos) v = static_cast<double>(rng.uniform_int(0, 8));
        for (auto& v : neg) v = static_cast<double>(rng.uniform_int(0, 8));
        CHECK(std::abs(auc(pos, neg) - oracle::brute_auc(pos, neg)) <= 1e-12);
        CHECK(std::abs(aupr(pos, neg) - oracle::brute_aupr(pos, neg)) <= 1e-12);
    }
}

TEST_CASE("argmax invariance: strictly increasing transforms preserve AUC") {
    Rng rng(19);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> pos(30), neg(40);
        for (auto& v : pos) v = rng.normal();
        for (auto& v : neg) v = rng.normal();
        const double base = auc(pos, neg);
        auto monotone = [](double x) { return std::exp(0.5 * x) + x; };
        std::vector<double> pos_t = pos, neg_t = neg;
        for (auto& v : pos_t) v = monotone(v);
        for (auto& v : neg_t) v = monotone(v);
        CHECK(std::abs(auc(pos_t, neg_t) - base) <= 1e-12);
    }
}

TEST_CASE("dice_iou and tnr") {
    SUBCASE("pred equals gt") {
        const std::vector<uint8_t> m = {1, 0, 1, 1, 0};
        const DiceIou d = dice_iou(m, m);
        CHECK(d.dice == 1.0);
        CHECK(d.iou == 1.0);
    }
    SUBCASE("disjoint masks") {
        const std::vector<uint8_t> pred = {1, 1, 0, 0}, gt = {0, 0, 1, 1};
        const DiceIou d = dice_iou(pred, gt);
        CHECK(d.dice == 0.0);
        CHECK(d.iou == 0.0);
    }
    SUBCASE("spec arithmetic: |P|=4, |G|=3, overlap 2") {
        const std::vector<uint8_t> pred = {1, 1, 1, 1, 0, 0, 0};
        const std::vector<uint8_t> gt = {1, 1, 0, 0, 1, 0, 0};
        const DiceIou d = dice_iou(pred, gt);
        CHECK(d.dice == doctest::Approx(4.0 / 7.0).epsilon(1e-15));
        CHECK(d.iou == doctest::Approx(0.4).epsilon(1e-15));
    }
    SUBCASE("empty ground truth is undefined") {
        const std::vector<uint8_t> pred = {1, 0}, gt = {0, 0};
        CHECK_THROWS_AS(dice_iou(pred, gt), DataError);
    }
    SUBCASE("size mismatch") {
        const std::vector<uint8_t> pred = {1, 0}, gt = {1};
        CHECK_THROWS_AS(dice_iou(pred, gt), InvariantError);
    }
    SUBCASE("tnr is the predicted-negative fraction") {
        const std::vector<uint8_t> pred = {0, 0, 1, 0};
        CHECK(tnr(pred) == 0.75);
        CHECK(tnr(std::vector<uint8_t>(10, 0)) == 1.0);
        CHECK_THROWS_AS(tnr({}), InvariantError);
    }
    SUBCASE("random instances match brute force exactly") {
        Rng rng(23);
        for (int trial = 0; trial < 100; ++trial) {
            const int n = rng.uniform_int(1, 200);
            std::vector<uint8_t> pred(static_cast<size_t>(n)), gt(pred.size());
            for (auto& v : pred) v = rng.uniform() < 0.3 ? 1 : 0;
            bool any = false;
            for (auto& v : gt) {
                v = rng.uniform() < 0.3 ? 1 : 0;
                any = any || v;
            }
            if (!any) gt[0] = 1;
            const DiceIou d = dice_iou(pred, gt);
            const oracle::BruteOverlap want = oracle::brute_dice_iou(pred, gt);
            CHECK(d.dice == want.dice);
            CHECK(d.iou == want.iou);
            CHECK(tnr(pred) == oracle::brute_tnr(pred));
        }
    }
}
