#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rav/gray_image.hpp"
#include "rav/runtime.hpp"
#include "rav/sim_time.hpp"

namespace rav {

/// Signed per-pixel gradient planes (same dimensions as the source image).
struct GradientPair {
    int width = 0;
    int height = 0;
    std::vector<int> ix;
    std::vector<int> iy;

    std::size_t pixel_count() const {
        return static_cast<std::size_t>(width) * height;
    }
};

enum class WindowKind { box, gaussian };

/// Windowed gradient products: a = sum W*Ix^2, b = sum W*Ix*Iy, c = sum W*Iy^2.
struct StructureTensorField {
    int width = 0;
    int height = 0;
    std::vector<double> a;
    std::vector<double> b;
    std::vector<double> c;
    WindowKind window_kind = WindowKind::box;
    int window_radius = 1;
};

struct Corner {
    int x = 0;
    int y = 0;
    double response = 0.0;

    bool operator==(const Corner&) const = default;
};

using CornerList = std::vector<Corner>;

/// 3x3 Sobel gradients with replicated-edge sampling.
inline GradientPair gradients(const GrayImage& img) {
    if (img.width < 3 || img.height < 3)
        throw std::invalid_argument("gradients: image smaller than 3x3");
    GradientPair g;
    g.width = img.width;
    g.height = img.height;
    g.ix.resize(img.pixel_count());
    g.iy.resize(img.pixel_count());
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            const int p00 = img.at_clamped(x - 1, y - 1), p01 = img.at_clamped(x, y - 1),
                      p02 = img.at_clamped(x + 1, y - 1);
            const int p10 = img.at_clamped(x - 1, y), p12 = img.at_clamped(x + 1, y);
            const int p20 = img.at_clamped(x - 1, y + 1), p21 = img.at_clamped(x, y + 1),
                      p22 = img.at_clamped(x + 1, y + 1);
            const std::size_t i = static_cast<std::size_t>(y) * img.width + x;
            g.ix[i] = (p02 + 2 * p12 + p22) - (p00 + 2 * p10 + p20);
            g.iy[i] = (p20 + 2 * p21 + p22) - (p00 + 2 * p01 + p02);
        }
    }
    return g;
}

namespace detail {

inline std::vector<double> window_weights(WindowKind kind, int radius) {
    const int side = 2 * radius + 1;
    std::vector<double> w(static_cast<std::size_t>(side) * side, 1.0);
    if (kind == WindowKind::gaussian) {
        // sigma = radius/2, kernel normalized to sum 1
        const double sigma = radius / 2.0;
        const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
        double sum = 0.0;
        for (int dy = -radius; dy <= radius; ++dy)
            for (int dx = -radius; dx <= radius; ++dx) {
                const double v = std::exp(-(dx * dx + dy * dy) * inv2s2);
                w[static_cast<std::size_t>(dy + radius) * side + (dx + radius)] = v;
                sum += v;
            }
        for (auto& v : w) v /= sum;
    }
    return w;
}

inline int clamp_coord(int v, int lo, int hi) {
    return v < lo ? lo : (v > hi ? hi : v);
}

// Tensor entries at a single pixel; shared by the dense and the sparse path.
inline void tensor_at(const GradientPair& g, const std::vector<double>& w, int radius,
                      int x, int y, double& a, double& b, double& c) {
    const int side = 2 * radius + 1;
    double sa = 0.0, sb = 0.0, sc = 0.0;
    for (int dy = -radius; dy <= radius; ++dy) {
        const int yy = clamp_coord(y + dy, 0, g.height - 1);
        for (int dx = -radius; dx <= radius; ++dx) {
            const int xx = clamp_coord(x + dx, 0, g.width - 1);
            const double weight = w[static_cast<std::size_t>(dy + radius) * side + (dx + radius)];
            const std::size_t i = static_cast<std::size_t>(yy) * g.width + xx;
            const double gx = g.ix[i];
            const double gy = g.iy[i];
            sa += weight * gx * gx;
            sb += weight * gx * gy;
            sc += weight * gy * gy;
        }
    }
    a = sa;
    b = sb;
    c = sc;
}

}  // namespace detail

inline StructureTensorField structure_tensor(const GradientPair& grads, WindowKind kind,
                                             int radius) {
    if (radius < 1)
        throw std::invalid_argument("structure_tensor: radius must be >= 1");
    StructureTensorField f;
    f.width = grads.width;
    f.height = grads.height;
    f.window_kind = kind;
    f.window_radius = radius;
    f.a.resize(grads.pixel_count());
    f.b.resize(grads.pixel_count());
    f.c.resize(grads.pixel_count());
    const auto w = detail::window_weights(kind, radius);
    for (int y = 0; y < grads.height; ++y)
        for (int x = 0; x < grads.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * grads.width + x;
            detail::tensor_at(grads, w, radius, x, y, f.a[i], f.b[i], f.c[i]);
        }
    return f;
}

inline double corner_response_at(double a, double b, double c, double k) {
    return (a * c - b * b) - k * (a + c) * (a + c);
}

/// R = (ac - b^2) - k*(a + c)^2 per pixel. Warns (once per call) for k
/// outside the empirical 0.04..0.06 range.
inline std::vector<double> corner_response(const StructureTensorField& field, double k) {
    if (k < 0.04 || k > 0.06)
        std::cerr << "warning: harris k=" << k << " outside empirical range [0.04, 0.06]\n";
    std::vector<double> r(field.a.size());
    for (std::size_t i = 0; i < r.size(); ++i)
        r[i] = corner_response_at(field.a[i], field.b[i], field.c[i], k);
    return r;
}

inline long long cr_value(const GradientPair& g, std::size_t i) {
    return std::llabs(static_cast<long long>(g.ix[i]) * g.iy[i]);
}

/// Pruning mask: keep pixels with CR = |Ix*Iy| >= cr_threshold.
inline std::vector<std::uint8_t> prune_mask(const GradientPair& grads, double cr_threshold) {
    if (cr_threshold < 0)
        throw std::invalid_argument("prune_mask: threshold must be >= 0");
    std::vector<std::uint8_t> mask(grads.pixel_count());
    for (std::size_t i = 0; i < mask.size(); ++i)
        mask[i] = static_cast<double>(cr_value(grads, i)) >= cr_threshold ? 1 : 0;
    return mask;
}

struct HarrisParams {
    double k = 0.04;
    double r_threshold = 1e8;
    int nms_radius = 1;
    WindowKind window_kind = WindowKind::box;
    int window_radius = 1;
};

namespace detail {

// Non-maximum suppression over a response plane where `defined[i]` marks
// pixels with a computed response. Candidates must themselves be defined;
// every defined neighbor participates in the comparison. Ties go to the
// earlier row-major position.
inline CornerList nms_corners(const std::vector<double>& r, const std::vector<std::uint8_t>* candidate,
                              int width, int height, double r_threshold, int nms_radius) {
    CornerList out;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * width + x;
            if (candidate && !(*candidate)[i]) continue;
            const double rv = r[i];
            if (!(rv > r_threshold)) continue;
            bool is_max = true;
            for (int dy = -nms_radius; dy <= nms_radius && is_max; ++dy) {
                const int yy = y + dy;
                if (yy < 0 || yy >= height) continue;
                for (int dx = -nms_radius; dx <= nms_radius; ++dx) {
                    const int xx = x + dx;
                    if (xx < 0 || xx >= width || (dx == 0 && dy == 0)) continue;
                    const std::size_t j = static_cast<std::size_t>(yy) * width + xx;
                    if (r[j] > rv || (r[j] == rv && j < i)) {
                        is_max = false;
                        break;
                    }
                }
            }
            if (is_max) out.push_back({x, y, rv});
        }
    }
    std::sort(out.begin(), out.end(), [width](const Corner& a, const Corner& b) {
        if (a.response != b.response) return a.response > b.response;
        return static_cast<long long>(a.y) * width + a.x <
               static_cast<long long>(b.y) * width + b.x;
    });
    return out;
}

}  // namespace detail

/// Full-image pipeline: gradients -> tensor -> response -> threshold -> NMS.
/// Output ordered by descending response, then row-major position.
inline CornerList detect_conventional(const GrayImage& img, const HarrisParams& p = {}) {
    const GradientPair g = gradients(img);
    const StructureTensorField f = structure_tensor(g, p.window_kind, p.window_radius);
    const std::vector<double> r = corner_response(f, p.k);
    return detail::nms_corners(r, nullptr, img.width, img.height, p.r_threshold, p.nms_radius);
}

namespace detail {

// CR histogram layout shared by select_cr_threshold and the adaptive
// detector: 256 equal-width bins over [0, max_cr]; candidate thresholds are
// the bin lower edges b*bin_width, plus 257*bin_width (> max, zero survivors).
struct CrHistogram {
    long long bin_width = 1;
    std::array<std::size_t, 257> survivors_at{};  // survivors of threshold b*bin_width

    static CrHistogram build(const GradientPair& g) {
        CrHistogram h;
        long long max_cr = 0;
        for (std::size_t i = 0; i < g.pixel_count(); ++i)
            max_cr = std::max(max_cr, cr_value(g, i));
        h.bin_width = max_cr / 256 + 1;
        std::array<std::size_t, 256> counts{};
        for (std::size_t i = 0; i < g.pixel_count(); ++i) {
            const long long bin = cr_value(g, i) / h.bin_width;
            counts[static_cast<std::size_t>(std::min(bin, 255LL))]++;
        }
        std::size_t suffix = 0;
        h.survivors_at[256] = 0;
        for (int b = 255; b >= 0; --b) {
            suffix += counts[static_cast<std::size_t>(b)];
            h.survivors_at[static_cast<std::size_t>(b)] = suffix;
        }
        return h;
    }

    double threshold(int b) const { return static_cast<double>(b) * bin_width; }
};

}  // namespace detail

/// Smallest 256-bin-histogram threshold whose survivor count fits the pixel
/// budget; 0 when the budget covers the whole image.
inline double select_cr_threshold(const GradientPair& grads, std::size_t pixel_budget) {
    if (pixel_budget >= grads.pixel_count()) return 0.0;
    const auto h = detail::CrHistogram::build(grads);
    for (int b = 0; b <= 256; ++b)
        if (h.survivors_at[static_cast<std::size_t>(b)] <= pixel_budget) return h.threshold(b);
    return h.threshold(257);  // unreachable: bin 256 has zero survivors
}

/// Per-pixel calibration constants for the detector cost model.
struct HarrisTiming {
    double t_full_pixel_ms = 100.0 / (640.0 * 480.0);  // full pipeline per pixel
    double t_cr_pixel_ms = 10.0 / (640.0 * 480.0);     // gradient + CR per pixel
};

struct AdaptiveResult {
    CornerList corners;
    SimTime duration_us = 0;
    double cr_threshold = 0.0;
    std::size_t computed_pixels = 0;  // pixels that ran the full pipeline
};

/// Resource-aware detector: a cheap CR pass over the whole image, then the
/// full Harris pipeline only on the pixels that fit the time budget.
///
/// The full pipeline runs on the surviving pixels plus their NMS
/// neighborhoods, so every suppression decision compares true responses and
/// the result is always a subset of detect_conventional's corners. The
/// neighborhood pixels are charged against the same pixel budget.
///
/// Returns nullopt (frame-skip) on a zero-PE claim or when the CR pass alone
/// exceeds the deadline.
inline std::optional<AdaptiveResult> detect_adaptive(const GrayImage& img, ResourceClaim& claim,
                                                     SimTime deadline_us, const HarrisTiming& timing,
                                                     const EtaModel& eta,
                                                     const HarrisParams& p = {}) {
    if (claim.empty() || claim.state == ClaimState::retreated) return std::nullopt;
    const int n = claim.size();
    const double eta_n = eta(n);
    const double capacity_ms = n * eta_n * ms_from_us(deadline_us);
    const double cr_cost_ms = static_cast<double>(img.pixel_count()) * timing.t_cr_pixel_ms;
    const double full_budget_ms = capacity_ms - cr_cost_ms;
    if (full_budget_ms < 0) return std::nullopt;
    const auto budget =
        static_cast<std::size_t>(std::max(0.0, std::floor(full_budget_ms / timing.t_full_pixel_ms)));

    const GradientPair g = gradients(img);
    const auto hist = detail::CrHistogram::build(g);

    // Survivors plus their nms_radius neighborhoods must fit the budget;
    // both sets shrink monotonically in the threshold, so walk the bins.
    const auto weights = detail::window_weights(p.window_kind, p.window_radius);
    std::vector<std::uint8_t> survive(g.pixel_count());
    std::vector<std::uint8_t> compute(g.pixel_count());
    int chosen_bin = -1;
    std::size_t computed_pixels = 0;
    for (int b = 0; b <= 256; ++b) {
        if (hist.survivors_at[static_cast<std::size_t>(b)] > budget) continue;
        const double thr = hist.threshold(b);
        std::fill(survive.begin(), survive.end(), 0);
        std::fill(compute.begin(), compute.end(), 0);
        std::size_t count = 0;
        for (int y = 0; y < g.height && count <= budget; ++y)
            for (int x = 0; x < g.width; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * g.width + x;
                if (static_cast<double>(cr_value(g, i)) < thr) continue;
                survive[i] = 1;
                for (int dy = -p.nms_radius; dy <= p.nms_radius; ++dy) {
                    const int yy = y + dy;
                    if (yy < 0 || yy >= g.height) continue;
                    for (int dx = -p.nms_radius; dx <= p.nms_radius; ++dx) {
                        const int xx = x + dx;
                        if (xx < 0 || xx >= g.width) continue;
                        std::uint8_t& cell = compute[static_cast<std::size_t>(yy) * g.width + xx];
                        if (!cell) {
                            cell = 1;
                            ++count;
                        }
                    }
                }
                if (count > budget) break;
            }
        if (count <= budget) {
            chosen_bin = b;
            computed_pixels = count;
            break;
        }
    }
    if (chosen_bin < 0) {  // only possible with budget == 0
        chosen_bin = 256;
        computed_pixels = 0;
        std::fill(survive.begin(), survive.end(), 0);
        std::fill(compute.begin(), compute.end(), 0);
    }

    std::vector<double> r(g.pixel_count(), -std::numeric_limits<double>::infinity());
    for (int y = 0; y < g.height; ++y)
        for (int x = 0; x < g.width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * g.width + x;
            if (!compute[i]) continue;
            double a, b2, c;
            detail::tensor_at(g, weights, p.window_radius, x, y, a, b2, c);
            r[i] = corner_response_at(a, b2, c, p.k);
        }

    AdaptiveResult res;
    res.corners = detail::nms_corners(r, &survive, g.width, g.height, p.r_threshold, p.nms_radius);
    res.cr_threshold = hist.threshold(chosen_bin);
    res.computed_pixels = computed_pixels;

    res.duration_us = infect(claim,
                             Workload{static_cast<double>(img.pixel_count()), timing.t_cr_pixel_ms},
                             eta) +
                      infect(claim, Workload{static_cast<double>(computed_pixels),
                                             timing.t_full_pixel_ms},
                             eta);
    return res;
}

}  // namespace rav
