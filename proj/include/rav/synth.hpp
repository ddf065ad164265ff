#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "rav/gray_image.hpp"
#include "rav/kdtree.hpp"
#include "rav/metrics.hpp"

namespace rav {

/// Deterministic generator (splitmix64). Hand-rolled so identical seeds give
/// identical streams on every standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, n).
    std::uint64_t below(std::uint64_t n) { return next() % n; }

    int range(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double gaussian() {
        // Box-Muller; consumes two uniforms per call
        const double u1 = std::max(uniform(), 1e-300);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

private:
    std::uint64_t state_;
};

/// Mixes a base seed with a frame index into a fresh stream.
inline Rng frame_rng(std::uint64_t seed, int frame) {
    Rng mix(seed ^ (0x517cc1b727220a95ULL * static_cast<std::uint64_t>(frame + 1)));
    return mix;
}

enum class SceneKind { checkerboard, blobs, white_square };

inline SceneKind parse_scene_kind(const std::string& s) {
    if (s == "checkerboard") return SceneKind::checkerboard;
    if (s == "blobs") return SceneKind::blobs;
    if (s == "white-square") return SceneKind::white_square;
    throw std::invalid_argument("unknown scene kind: " + s);
}

struct SceneParams {
    int width = 640;
    int height = 480;
    int cell_size = 40;     // checkerboard
    int blob_count = 6;     // blobs
    int square_size = 120;  // white-square
    int jitter = 8;         // max per-frame position shift, pixels
};

/// One synthetic frame plus its analytic corner ground truth.
struct SceneFrame {
    GrayImage image;
    std::vector<Point2> gt_corners;
};

namespace detail {

inline SceneFrame gen_checkerboard(const SceneParams& p, Rng& rng) {
    SceneFrame f;
    f.image = GrayImage(p.width, p.height, 0);
    const int ox = p.jitter > 0 ? rng.range(0, p.jitter) : 0;
    const int oy = p.jitter > 0 ? rng.range(0, p.jitter) : 0;
    for (int y = 0; y < p.height; ++y)
        for (int x = 0; x < p.width; ++x) {
            const int cx = (x + ox) / p.cell_size;
            const int cy = (y + oy) / p.cell_size;
            if ((cx + cy) % 2 == 0) f.image.at(x, y) = 255;
        }
    // interior junctions where four cells meet
    for (int jy = 1; jy * p.cell_size - oy < p.height; ++jy) {
        const int y = jy * p.cell_size - oy;
        if (y < 2 || y >= p.height - 2) continue;
        for (int jx = 1; jx * p.cell_size - ox < p.width; ++jx) {
            const int x = jx * p.cell_size - ox;
            if (x < 2 || x >= p.width - 2) continue;
            f.gt_corners.push_back({static_cast<double>(x) - 0.5, static_cast<double>(y) - 0.5});
        }
    }
    return f;
}

inline SceneFrame gen_white_square(const SceneParams& p, Rng& rng) {
    SceneFrame f;
    f.image = GrayImage(p.width, p.height, 0);
    const int s = p.square_size;
    const int margin = 8;
    const int x0 = margin + static_cast<int>(rng.below(
                                static_cast<std::uint64_t>(std::max(1, p.width - s - 2 * margin))));
    const int y0 = margin + static_cast<int>(rng.below(
                                static_cast<std::uint64_t>(std::max(1, p.height - s - 2 * margin))));
    for (int y = y0; y < y0 + s; ++y)
        for (int x = x0; x < x0 + s; ++x) f.image.at(x, y) = 255;
    const double x1 = x0 + s - 1.0, y1 = y0 + s - 1.0;
    f.gt_corners = {{static_cast<double>(x0), static_cast<double>(y0)},
                    {x1, static_cast<double>(y0)},
                    {static_cast<double>(x0), y1},
                    {x1, y1}};
    return f;
}

inline SceneFrame gen_blobs(const SceneParams& p, Rng& rng) {
    SceneFrame f;
    f.image = GrayImage(p.width, p.height, 0);
    struct Rect {
        int x0, y0, w, h;
    };
    std::vector<Rect> rects;
    const int margin = 6;
    const int gap = 10;  // separation so corner responses stay independent
    for (int i = 0; i < p.blob_count; ++i) {
        for (int attempt = 0; attempt < 200; ++attempt) {
            Rect r;
            r.w = std::min(rng.range(30, 80), std::max(1, p.width - 2 * margin));
            r.h = std::min(rng.range(30, 80), std::max(1, p.height - 2 * margin));
            r.x0 = rng.range(margin, std::max(margin, p.width - r.w - margin));
            r.y0 = rng.range(margin, std::max(margin, p.height - r.h - margin));
            bool ok = true;
            for (const auto& o : rects) {
                if (r.x0 < o.x0 + o.w + gap && o.x0 < r.x0 + r.w + gap &&
                    r.y0 < o.y0 + o.h + gap && o.y0 < r.y0 + r.h + gap) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                rects.push_back(r);
                break;
            }
        }
    }
    for (const auto& r : rects) {
        for (int y = r.y0; y < r.y0 + r.h; ++y)
            for (int x = r.x0; x < r.x0 + r.w; ++x) f.image.at(x, y) = 255;
        const double x1 = r.x0 + r.w - 1.0, y1 = r.y0 + r.h - 1.0;
        f.gt_corners.push_back({static_cast<double>(r.x0), static_cast<double>(r.y0)});
        f.gt_corners.push_back({x1, static_cast<double>(r.y0)});
        f.gt_corners.push_back({static_cast<double>(r.x0), y1});
        f.gt_corners.push_back({x1, y1});
    }
    return f;
}

}  // namespace detail

/// Deterministic per (seed, frame); ground truth is generated jointly with
/// the pixels.
inline SceneFrame generate_scene_frame(SceneKind kind, const SceneParams& p, std::uint64_t seed,
                                       int frame) {
    Rng rng = frame_rng(seed, frame);
    switch (kind) {
        case SceneKind::checkerboard: return detail::gen_checkerboard(p, rng);
        case SceneKind::white_square: return detail::gen_white_square(p, rng);
        case SceneKind::blobs: return detail::gen_blobs(p, rng);
    }
    throw std::invalid_argument("generate_scene_frame: unknown kind");
}

// ---------------------------------------------------------------------------
// Descriptor-cluster generator (object/background mixture stand-in)
// ---------------------------------------------------------------------------

struct DescriptorGenParams {
    int count = 1000;
    int clusters = 8;
    double cluster_sigma = 0.05;
};

inline std::vector<Descriptor> generate_descriptor_set(const DescriptorGenParams& p,
                                                       std::uint64_t seed) {
    if (p.count < 1) throw std::invalid_argument("generate_descriptor_set: count must be >= 1");
    Rng rng(seed);
    std::vector<std::array<double, kDescriptorDim>> centers(
        static_cast<std::size_t>(std::max(1, p.clusters)));
    for (auto& c : centers)
        for (auto& v : c) v = rng.uniform();
    std::vector<Descriptor> out;
    out.reserve(static_cast<std::size_t>(p.count));
    for (int i = 0; i < p.count; ++i) {
        Descriptor d;
        d.id = i;
        const auto& c = centers[rng.below(centers.size())];
        for (int j = 0; j < kDescriptorDim; ++j)
            d.values[static_cast<std::size_t>(j)] =
                c[static_cast<std::size_t>(j)] + p.cluster_sigma * rng.gaussian();
        out.push_back(d);
    }
    return out;
}

/// Queries sampled from a stored set, with optional additive noise. The
/// ground-truth NN is the source descriptor (generated before the noise).
struct QueryFrame {
    std::vector<Descriptor> queries;
    std::vector<int> gt_ids;
};

inline QueryFrame generate_query_frame(const std::vector<Descriptor>& base, int n_queries,
                                       double noise_sigma, std::uint64_t seed, int frame) {
    if (base.empty()) throw std::invalid_argument("generate_query_frame: empty base set");
    Rng rng = frame_rng(seed ^ 0xabcdef1234567890ULL, frame);
    QueryFrame out;
    for (int i = 0; i < n_queries; ++i) {
        const auto& src = base[rng.below(base.size())];
        Descriptor q = src;
        q.id = i;
        if (noise_sigma > 0)
            for (auto& v : q.values) v += noise_sigma * rng.gaussian();
        out.queries.push_back(q);
        out.gt_ids.push_back(src.id);
    }
    return out;
}

}  // namespace rav
