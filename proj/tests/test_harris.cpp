#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "rav/harris.hpp"
#include "rav/metrics.hpp"
#include "rav/synth.hpp"

using namespace rav;

namespace {

GrayImage ramp_x(int w, int h) {
    GrayImage img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img.at(x, y) = static_cast<std::uint8_t>(x);
    return img;
}

GrayImage random_image(int w, int h, std::uint64_t seed) {
    GrayImage img(w, h);
    Rng rng(seed);
    for (auto& px : img.data) px = static_cast<std::uint8_t>(rng.below(256));
    return img;
}

// Independent straight-line Harris reference: explicit Sobel, box sums,
// response, threshold and suppression, all in one pass of plain loops.
CornerList reference_harris(const GrayImage& img, double k, double r_threshold, int nms_radius,
                            int win_radius) {
    const int w = img.width, h = img.height;
    auto px = [&](int x, int y) {
        x = std::clamp(x, 0, w - 1);
        y = std::clamp(y, 0, h - 1);
        return static_cast<int>(img.at(x, y));
    };
    std::vector<double> r(static_cast<std::size_t>(w) * h);
    std::vector<double> gx(r.size()), gy(r.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            gx[static_cast<std::size_t>(y) * w + x] =
                px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1) - px(x - 1, y - 1) -
                2 * px(x - 1, y) - px(x - 1, y + 1);
            gy[static_cast<std::size_t>(y) * w + x] =
                px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1) - px(x - 1, y - 1) -
                2 * px(x, y - 1) - px(x + 1, y - 1);
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double a = 0, b = 0, c = 0;
            for (int dy = -win_radius; dy <= win_radius; ++dy)
                for (int dx = -win_radius; dx <= win_radius; ++dx) {
                    const int xx = std::clamp(x + dx, 0, w - 1);
                    const int yy = std::clamp(y + dy, 0, h - 1);
                    const double ix = gx[static_cast<std::size_t>(yy) * w + xx];
                    const double iy = gy[static_cast<std::size_t>(yy) * w + xx];
                    a += ix * ix;
                    b += ix * iy;
                    c += iy * iy;
                }
            r[static_cast<std::size_t>(y) * w + x] = (a * c - b * b) - k * (a + c) * (a + c);
        }
    CornerList out;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            if (!(r[i] > r_threshold)) continue;
            bool is_max = true;
            for (int dy = -nms_radius; dy <= nms_radius && is_max; ++dy)
                for (int dx = -nms_radius; dx <= nms_radius; ++dx) {
                    const int xx = x + dx, yy = y + dy;
                    if (xx < 0 || xx >= w || yy < 0 || yy >= h || (dx == 0 && dy == 0)) continue;
                    const std::size_t j = static_cast<std::size_t>(yy) * w + xx;
                    if (r[j] > r[i] || (r[j] == r[i] && j < i)) {
                        is_max = false;
                        break;
                    }
                }
            if (is_max) out.push_back({x, y, r[i]});
        }
    std::sort(out.begin(), out.end(), [w](const Corner& a, const Corner& b) {
        if (a.response != b.response) return a.response > b.response;
        return static_cast<long long>(a.y) * w + a.x < static_cast<long long>(b.y) * w + b.x;
    });
    return out;
}

ResourceClaim claim_of(int n) {
    ResourceClaim c;
    for (int i = 0; i < n; ++i) c.granted_pes.push_back(i);
    return c;
}

}  // namespace

TEST_CASE("gradients: flat field is zero") {
    const GrayImage img(8, 8, 77);
    const GradientPair g = gradients(img);
    for (auto v : g.ix) CHECK(v == 0);
    for (auto v : g.iy) CHECK(v == 0);
}

TEST_CASE("gradients: vertical step edge") {
    GrayImage img(9, 9, 0);
    for (int y = 0; y < 9; ++y)
        for (int x = 5; x < 9; ++x) img.at(x, y) = 255;
    const GradientPair g = gradients(img);
    int max_abs_ix = 0;
    for (int y = 2; y < 7; ++y)
        for (int x = 0; x < 9; ++x) {
            max_abs_ix = std::max(max_abs_ix, std::abs(g.ix[static_cast<std::size_t>(y) * 9 + x]));
            CHECK(g.iy[static_cast<std::size_t>(y) * 9 + x] == 0);
        }
    CHECK(max_abs_ix == 4 * 255);  // Sobel weight sum across the step
    // maximal response sits on the edge columns
    CHECK(std::abs(g.ix[4 * 9 + 4]) == max_abs_ix);
    CHECK(std::abs(g.ix[4 * 9 + 5]) == max_abs_ix);
}

TEST_CASE("gradients: x-ramp has interior ix = 8, iy = 0") {
    const GradientPair g = gradients(ramp_x(5, 5));
    for (int y = 0; y < 5; ++y)
        for (int x = 1; x < 4; ++x) {
            CHECK(g.ix[static_cast<std::size_t>(y) * 5 + x] == 8);
            CHECK(g.iy[static_cast<std::size_t>(y) * 5 + x] == 0);
        }
}

TEST_CASE("gradients: rejects images below 3x3") {
    CHECK_THROWS_AS(gradients(GrayImage(2, 5)), std::invalid_argument);
}

TEST_CASE("structure tensor closed forms") {
    SECTION("zero gradients give a zero field") {
        const StructureTensorField f = structure_tensor(gradients(GrayImage(6, 6, 9)),
                                                        WindowKind::box, 1);
        for (std::size_t i = 0; i < f.a.size(); ++i) {
            CHECK(f.a[i] == 0.0);
            CHECK(f.b[i] == 0.0);
            CHECK(f.c[i] == 0.0);
        }
    }
    SECTION("constant ix with box window sums g^2 over the window") {
        GradientPair g;
        g.width = g.height = 7;
        g.ix.assign(49, 5);
        g.iy.assign(49, 0);
        const StructureTensorField f = structure_tensor(g, WindowKind::box, 1);
        for (std::size_t i = 0; i < f.a.size(); ++i) {
            CHECK(f.a[i] == Catch::Approx(25.0 * 9));  // 9 window pixels, unit weight
            CHECK(f.b[i] == 0.0);
            CHECK(f.c[i] == 0.0);
        }
    }
    SECTION("gaussian window is normalized") {
        GradientPair g;
        g.width = g.height = 9;
        g.ix.assign(81, 3);
        g.iy.assign(81, 0);
        const StructureTensorField f = structure_tensor(g, WindowKind::gaussian, 2);
        CHECK(f.a[4 * 9 + 4] == Catch::Approx(9.0));  // sums to g^2 with unit-mass kernel
    }
    SECTION("Cauchy-Schwarz holds on random input") {
        const StructureTensorField f =
            structure_tensor(gradients(random_image(32, 24, 3)), WindowKind::box, 2);
        for (std::size_t i = 0; i < f.a.size(); ++i) {
            CHECK(f.a[i] >= 0.0);
            CHECK(f.c[i] >= 0.0);
            CHECK(f.b[i] * f.b[i] <= f.a[i] * f.c[i] * (1 + 1e-12));
        }
    }
    SECTION("radius below 1 rejected") {
        CHECK_THROWS_AS(structure_tensor(gradients(GrayImage(4, 4)), WindowKind::box, 0),
                        std::invalid_argument);
    }
}

TEST_CASE("corner response substitutions") {
    CHECK(corner_response_at(0, 0, 0, 0.04) == 0.0);
    const double s = 3.5;
    CHECK(corner_response_at(s, 0, s, 0.04) == Catch::Approx(s * s - 4 * 0.04 * s * s));
}

TEST_CASE("corner response equals the eigenvalue form") {
    // oracle: R = l1*l2 - k*(l1+l2)^2 via explicit 2x2 eigendecomposition
    Rng rng(11);
    for (int i = 0; i < 10000; ++i) {
        const double a = rng.uniform() * 1e6;
        const double c = rng.uniform() * 1e6;
        const double b = (rng.uniform() * 2 - 1) * std::sqrt(a * c);
        const double k = 0.04 + rng.uniform() * 0.02;
        const double tr = a + c;
        const double disc = std::sqrt((a - c) * (a - c) + 4 * b * b);
        const double l1 = (tr + disc) / 2, l2 = (tr - disc) / 2;
        const double expected = l1 * l2 - k * tr * tr;
        const double got = corner_response_at(a, b, c, k);
        const double scale = std::max({std::abs(expected), std::abs(got), 1.0});
        CHECK(std::abs(got - expected) / scale < 1e-9);
    }
}

TEST_CASE("prune mask") {
    SECTION("threshold zero keeps everything") {
        const auto mask = prune_mask(gradients(random_image(16, 16, 5)), 0.0);
        for (auto m : mask) CHECK(m == 1);
    }
    SECTION("flat image with positive threshold keeps nothing") {
        const auto mask = prune_mask(gradients(GrayImage(8, 8, 100)), 1.0);
        for (auto m : mask) CHECK(m == 0);
    }
    SECTION("x-ramp has CR = 0 everywhere") {
        const auto mask = prune_mask(gradients(ramp_x(16, 16)), 0.5);
        for (auto m : mask) CHECK(m == 0);
    }
    SECTION("negative threshold rejected") {
        CHECK_THROWS_AS(prune_mask(gradients(GrayImage(4, 4)), -1.0), std::invalid_argument);
    }
}

TEST_CASE("pruning is monotone in the threshold") {
    const GradientPair g = gradients(random_image(48, 36, 9));
    Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        double t1 = rng.uniform() * 2e5;
        double t2 = rng.uniform() * 2e5;
        if (t1 > t2) std::swap(t1, t2);
        const auto m1 = prune_mask(g, t1);
        const auto m2 = prune_mask(g, t2);
        for (std::size_t i = 0; i < m1.size(); ++i)
            if (m2[i]) CHECK(m1[i]);  // survivors(t2) subset of survivors(t1)
    }
}

TEST_CASE("select_cr_threshold inverts the histogram against the budget") {
    const GradientPair g = gradients(random_image(64, 48, 17));
    const std::size_t total = g.pixel_count();
    auto survivors = [&](double thr) {
        std::size_t n = 0;
        for (std::size_t i = 0; i < total; ++i)
            if (static_cast<double>(cr_value(g, i)) >= thr) ++n;
        return n;
    };
    SECTION("budget covering the image disables pruning") {
        CHECK(select_cr_threshold(g, total) == 0.0);
        CHECK(select_cr_threshold(g, total + 10) == 0.0);
    }
    SECTION("budget zero prunes everything") {
        CHECK(survivors(select_cr_threshold(g, 0)) == 0);
    }
    SECTION("minimal histogram threshold for various budgets") {
        long long max_cr = 0;
        for (std::size_t i = 0; i < total; ++i) max_cr = std::max(max_cr, cr_value(g, i));
        const long long bin_width = max_cr / 256 + 1;
        for (std::size_t budget : {total / 2, total / 4, total / 10, std::size_t{25}}) {
            const double thr = select_cr_threshold(g, budget);
            CHECK(survivors(thr) <= budget);
            // exhaustive scan: every lower histogram threshold overshoots
            const long long chosen_bin = static_cast<long long>(thr) / bin_width;
            for (long long b = 0; b < chosen_bin; ++b)
                CHECK(survivors(static_cast<double>(b * bin_width)) > budget);
        }
    }
}

TEST_CASE("conventional detection on synthetic scenes") {
    SECTION("flat image yields no corners") {
        CHECK(detect_conventional(GrayImage(32, 32, 128)).empty());
    }
    SECTION("white square yields its four vertices") {
        SceneParams p;
        p.width = 160;
        p.height = 120;
        p.square_size = 60;
        const SceneFrame f = generate_scene_frame(SceneKind::white_square, p, 3, 0);
        const CornerList corners = detect_conventional(f.image);
        REQUIRE(corners.size() == 4);
        std::vector<Point2> det;
        for (const auto& c : corners) det.push_back({static_cast<double>(c.x), static_cast<double>(c.y)});
        const PrecisionRecall pr = precision_recall(det, f.gt_corners, 2.0);
        CHECK(pr.precision == 1.0);
        CHECK(pr.recall == 1.0);
    }
    SECTION("checkerboard matches the brute-force reference exactly") {
        SceneParams p;
        p.width = 96;
        p.height = 96;
        p.cell_size = 16;
        const SceneFrame f = generate_scene_frame(SceneKind::checkerboard, p, 5, 2);
        const HarrisParams hp;
        const CornerList got = detect_conventional(f.image, hp);
        const CornerList want =
            reference_harris(f.image, hp.k, hp.r_threshold, hp.nms_radius, hp.window_radius);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].x == want[i].x);
            CHECK(got[i].y == want[i].y);
            CHECK(got[i].response == Catch::Approx(want[i].response).epsilon(1e-12));
        }
        CHECK_FALSE(got.empty());
    }
    SECTION("random image matches the brute-force reference") {
        const GrayImage img = random_image(40, 30, 77);
        const HarrisParams hp{0.05, 1e6, 2, WindowKind::box, 1};
        const CornerList got = detect_conventional(img, hp);
        const CornerList want = reference_harris(img, hp.k, hp.r_threshold, hp.nms_radius,
                                                 hp.window_radius);
        REQUIRE(got.size() == want.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            CHECK(got[i].x == want[i].x);
            CHECK(got[i].y == want[i].y);
        }
    }
}

TEST_CASE("adaptive detection") {
    SceneParams p;
    p.width = 320;
    p.height = 240;
    const SceneFrame f = generate_scene_frame(SceneKind::blobs, p, 9, 1);
    const HarrisTiming timing{200.0 / (320.0 * 240.0), 20.0 / (320.0 * 240.0)};
    const EtaModel eta;
    const SimTime deadline = 100 * us_per_ms;

    SECTION("abundant budget reproduces the conventional output") {
        ResourceClaim c = claim_of(4);  // capacity ~377ms covers full 220ms cost
        const auto res = detect_adaptive(f.image, c, deadline, timing, eta);
        REQUIRE(res.has_value());
        CHECK(res->cr_threshold == 0.0);
        CHECK(res->corners == detect_conventional(f.image));
        CHECK(c.state == ClaimState::infected);
    }
    SECTION("zero-PE claim signals a frame skip") {
        ResourceClaim empty;
        CHECK_FALSE(detect_adaptive(f.image, empty, deadline, timing, eta).has_value());
    }
    SECTION("CR pass exceeding the deadline signals a frame skip") {
        ResourceClaim c = claim_of(1);
        const HarrisTiming heavy{2.0, 0.01};  // CR pass alone far beyond any deadline
        CHECK_FALSE(detect_adaptive(f.image, c, deadline, heavy, eta).has_value());
    }
    SECTION("scarce budget stays within the deadline and a subset of conventional") {
        const CornerList conventional = detect_conventional(f.image);
        for (int n : {1, 2, 3}) {
            ResourceClaim c = claim_of(n);
            const auto res = detect_adaptive(f.image, c, deadline, timing, eta);
            REQUIRE(res.has_value());
            CHECK(res->duration_us <= deadline);
            for (const auto& corner : res->corners) {
                CHECK(std::find(conventional.begin(), conventional.end(), corner) !=
                      conventional.end());
            }
        }
    }
    SECTION("deterministic across repeated runs") {
        ResourceClaim c1 = claim_of(2), c2 = claim_of(2);
        const auto r1 = detect_adaptive(f.image, c1, deadline, timing, eta);
        const auto r2 = detect_adaptive(f.image, c2, deadline, timing, eta);
        REQUIRE(r1.has_value());
        REQUIRE(r2.has_value());
        CHECK(r1->corners == r2->corners);
        CHECK(r1->duration_us == r2->duration_us);
    }
}
