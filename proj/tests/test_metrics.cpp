#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "rav/metrics.hpp"
#include "rav/synth.hpp"

using namespace rav;

TEST_CASE("precision_recall basics") {
    SECTION("exact detections score 1/1") {
        const std::vector<Point2> gt = {{10, 10}, {20, 30}};
        const PrecisionRecall pr = precision_recall(gt, gt, 2.0);
        CHECK(pr.precision == 1.0);
        CHECK(pr.recall == 1.0);
        CHECK(pr.correct == 2);
    }
    SECTION("offset within tolerance still matches") {
        const PrecisionRecall pr = precision_recall({{10.4, 9.7}}, {{10, 10}}, 1.0);
        CHECK(pr.correct == 1);
    }
    SECTION("offset beyond tolerance does not") {
        const PrecisionRecall pr = precision_recall({{12, 10}}, {{10, 10}}, 1.0);
        CHECK(pr.correct == 0);
        CHECK(pr.precision == 0.0);
        CHECK(pr.recall == 0.0);
    }
    SECTION("spurious detections cost precision only") {
        const PrecisionRecall pr = precision_recall({{10, 10}, {100, 100}}, {{10, 10}}, 1.0);
        CHECK(pr.precision == 0.5);
        CHECK(pr.recall == 1.0);
    }
    SECTION("missed corners cost recall only") {
        const PrecisionRecall pr = precision_recall({{10, 10}}, {{10, 10}, {50, 50}}, 1.0);
        CHECK(pr.precision == 1.0);
        CHECK(pr.recall == 0.5);
    }
    SECTION("empty against empty is perfect, empty against gt is not") {
        CHECK(precision_recall({}, {}, 1.0).precision == 1.0);
        CHECK(precision_recall({}, {}, 1.0).recall == 1.0);
        CHECK(precision_recall({}, {{1, 1}}, 1.0).precision == 0.0);
        CHECK(precision_recall({}, {{1, 1}}, 1.0).recall == 0.0);
        CHECK(precision_recall({{1, 1}}, {}, 1.0).precision == 0.0);
        CHECK(precision_recall({{1, 1}}, {}, 1.0).recall == 1.0);
    }
    SECTION("negative tolerance rejected") {
        CHECK_THROWS_AS(precision_recall({}, {}, -1.0), std::invalid_argument);
    }
}

TEST_CASE("matching is one-to-one") {
    // two detections near one gt point: only one may claim it
    const PrecisionRecall pr = precision_recall({{10.1, 10}, {9.9, 10}}, {{10, 10}}, 1.0);
    CHECK(pr.correct == 1);
    CHECK(pr.precision == 0.5);
    // the nearer pair wins, so a far gt stays unmatched even within tol
    const PrecisionRecall pr2 =
        precision_recall({{10, 10}}, {{10, 10.2}, {10, 10.9}}, 1.0);
    CHECK(pr2.correct == 1);
    CHECK(pr2.recall == 0.5);
}

TEST_CASE("matching ignores detection input order") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Point2> gt, det;
        for (int i = 0; i < 12; ++i)
            gt.push_back({rng.uniform() * 100.0, rng.uniform() * 100.0});
        for (int i = 0; i < 15; ++i) {
            const auto& g = gt[rng.below(gt.size())];
            det.push_back({g.x + rng.uniform() * 3.0 - 1.5, g.y + rng.uniform() * 3.0 - 1.5});
        }
        const PrecisionRecall base = precision_recall(det, gt, 2.0);
        std::vector<Point2> shuffled = det;
        std::mt19937 shuffle_rng(static_cast<unsigned>(trial));
        std::shuffle(shuffled.begin(), shuffled.end(), shuffle_rng);
        const PrecisionRecall again = precision_recall(shuffled, gt, 2.0);
        CHECK(again.correct == base.correct);
        CHECK(again.precision == base.precision);
        CHECK(again.recall == base.recall);
    }
}

namespace {

FrameRecord frame(int idx, SimTime dur_us, bool dropped, double p, double r) {
    FrameRecord f;
    f.frame_index = idx;
    f.duration_us = dur_us;
    f.dropped = dropped;
    f.precision = p;
    f.recall = r;
    return f;
}

}  // namespace

TEST_CASE("summarize") {
    SECTION("drops lower throughput and the quality means") {
        std::vector<FrameRecord> records;
        for (int i = 0; i < 100; ++i) {
            const bool drop = i % 100 < 19;
            records.push_back(frame(i, drop ? 0 : 80 * us_per_ms, drop, drop ? 0.0 : 1.0,
                                    drop ? 0.0 : 1.0));
        }
        const RunSummary s = summarize(records, 100.0);
        CHECK(s.drop_count == 19);
        CHECK(s.throughput == Catch::Approx(0.81));
        CHECK(s.mean_precision == Catch::Approx(0.81));
        CHECK(s.mean_recall == Catch::Approx(0.81));
        CHECK(s.wcet_ratio == Catch::Approx(0.8));
    }
    SECTION("wcet ratio is the worst completed frame over nominal") {
        const std::vector<FrameRecord> records = {
            frame(0, 90 * us_per_ms, false, 1, 1),
            frame(1, 430 * us_per_ms, false, 1, 1),
            frame(2, 120 * us_per_ms, false, 1, 1),
        };
        CHECK(summarize(records, 100.0).wcet_ratio == Catch::Approx(4.3));
    }
    SECTION("dropped frames do not count toward the wcet max") {
        const std::vector<FrameRecord> records = {
            frame(0, 50 * us_per_ms, false, 1, 1),
            frame(1, 900 * us_per_ms, true, 0, 0),
        };
        const RunSummary s = summarize(records, 100.0);
        CHECK(s.wcet_ratio == Catch::Approx(0.5));
        CHECK(s.throughput == Catch::Approx(0.5));
    }
    SECTION("no drops means full throughput") {
        const std::vector<FrameRecord> records = {frame(0, 10 * us_per_ms, false, 0.9, 0.8)};
        const RunSummary s = summarize(records, 100.0);
        CHECK(s.throughput == 1.0);
        CHECK(s.mean_precision == Catch::Approx(0.9));
        CHECK(s.mean_recall == Catch::Approx(0.8));
    }
    SECTION("input validation") {
        CHECK_THROWS_AS(summarize({}, 100.0), std::invalid_argument);
        CHECK_THROWS_AS(summarize({frame(0, 1, false, 1, 1)}, 0.0), std::invalid_argument);
    }
}

TEST_CASE("summarize scales with the record count, not the order") {
    std::vector<FrameRecord> records;
    Rng rng(11);
    for (int i = 0; i < 64; ++i)
        records.push_back(frame(i, static_cast<SimTime>(rng.below(200)) * us_per_ms,
                                rng.below(4) == 0, rng.uniform(), rng.uniform()));
    const RunSummary base = summarize(records, 100.0);
    std::reverse(records.begin(), records.end());
    const RunSummary rev = summarize(records, 100.0);
    CHECK(rev.throughput == base.throughput);
    CHECK(rev.wcet_ratio == base.wcet_ratio);
    CHECK(rev.mean_precision == Catch::Approx(base.mean_precision));
    CHECK(rev.mean_recall == Catch::Approx(base.mean_recall));
    // doubling every record leaves the ratios unchanged
    std::vector<FrameRecord> doubled = records;
    doubled.insert(doubled.end(), records.begin(), records.end());
    const RunSummary two = summarize(doubled, 100.0);
    CHECK(two.throughput == Catch::Approx(base.throughput));
    CHECK(two.wcet_ratio == base.wcet_ratio);
}
