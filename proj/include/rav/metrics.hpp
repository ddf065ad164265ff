#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "rav/sim_time.hpp"

namespace rav {

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

struct PrecisionRecall {
    double precision = 0.0;
    double recall = 0.0;
    int correct = 0;
};

/// Greedy one-to-one matching within a pixel tolerance: candidate pairs are
/// taken nearest first (ties by detection position, then ground-truth index),
/// and each side is claimed at most once. Input order of the detections does
/// not affect the result.
inline PrecisionRecall precision_recall(const std::vector<Point2>& detected,
                                        const std::vector<Point2>& ground_truth, double tol) {
    if (tol < 0) throw std::invalid_argument("precision_recall: tol must be >= 0");
    struct Pair {
        double sq_dist;
        double dy, dx;  // detection position, for order-independent ties
        std::size_t det, gt;
    };
    std::vector<Pair> pairs;
    const double tol2 = tol * tol;
    for (std::size_t d = 0; d < detected.size(); ++d)
        for (std::size_t g = 0; g < ground_truth.size(); ++g) {
            const double ddx = detected[d].x - ground_truth[g].x;
            const double ddy = detected[d].y - ground_truth[g].y;
            const double sq = ddx * ddx + ddy * ddy;
            if (sq <= tol2) pairs.push_back({sq, detected[d].y, detected[d].x, d, g});
        }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        if (a.sq_dist != b.sq_dist) return a.sq_dist < b.sq_dist;
        if (a.dy != b.dy) return a.dy < b.dy;
        if (a.dx != b.dx) return a.dx < b.dx;
        return a.gt < b.gt;
    });
    std::vector<bool> det_used(detected.size(), false), gt_used(ground_truth.size(), false);
    int correct = 0;
    for (const auto& p : pairs) {
        if (det_used[p.det] || gt_used[p.gt]) continue;
        det_used[p.det] = true;
        gt_used[p.gt] = true;
        ++correct;
    }
    PrecisionRecall pr;
    pr.correct = correct;
    pr.precision = detected.empty() ? (ground_truth.empty() ? 1.0 : 0.0)
                                    : static_cast<double>(correct) / static_cast<double>(detected.size());
    pr.recall = ground_truth.empty() ? 1.0
                                     : static_cast<double>(correct) / static_cast<double>(ground_truth.size());
    return pr;
}

/// Per-frame outcome of a scenario run. A dropped frame has no detections
/// and scores zero precision and recall.
struct FrameRecord {
    int frame_index = 0;
    int granted_pes = 0;
    SimTime duration_us = 0;
    bool dropped = false;
    int detection_count = 0;
    int correct_count = 0;
    double precision = 0.0;
    double recall = 0.0;
};

struct RunSummary {
    double throughput = 0.0;   // fraction of frames processed
    double wcet_ratio = 0.0;   // max duration over non-dropped frames / nominal
    double mean_precision = 0.0;
    double mean_recall = 0.0;
    int drop_count = 0;
};

/// Means include dropped frames (their zeros pull the averages down);
/// the WCET max covers only frames that actually completed.
inline RunSummary summarize(const std::vector<FrameRecord>& records, double nominal_ms) {
    if (records.empty()) throw std::invalid_argument("summarize: no records");
    if (nominal_ms <= 0) throw std::invalid_argument("summarize: nominal_ms must be > 0");
    RunSummary s;
    SimTime max_dur = 0;
    double sp = 0.0, sr = 0.0;
    for (const auto& r : records) {
        if (r.dropped) {
            ++s.drop_count;
        } else {
            max_dur = std::max(max_dur, r.duration_us);
        }
        sp += r.precision;
        sr += r.recall;
    }
    const auto n = static_cast<double>(records.size());
    s.throughput = 1.0 - static_cast<double>(s.drop_count) / n;
    s.wcet_ratio = ms_from_us(max_dur) / nominal_ms;
    s.mean_precision = sp / n;
    s.mean_recall = sr / n;
    return s;
}

}  // namespace rav
