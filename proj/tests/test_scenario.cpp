#include <catch2/catch_amalgamated.hpp>

#include "rav/scenario.hpp"

using namespace rav;

namespace {

LoadTrace flat_trace(int busy) {
    LoadTrace t;
    t.entries = {{0, busy}};
    return t;
}

Scenario small_harris(Variant v) {
    Scenario s;
    s.kernel = Kernel::harris;
    s.variant = v;
    s.frame_count = 30;
    s.scene = SceneKind::white_square;
    s.scene_params.width = 320;
    s.scene_params.height = 240;
    s.scene_params.square_size = 80;
    // full frame costs 100 ms on one PE, the screening pass 10 ms
    s.harris_timing.t_full_pixel_ms = 100.0 / (320.0 * 240.0);
    s.harris_timing.t_cr_pixel_ms = 10.0 / (320.0 * 240.0);
    return s;
}

Scenario small_nn(Variant v) {
    Scenario s;
    s.kernel = Kernel::nn_search;
    s.variant = v;
    s.frame_count = 20;
    s.eta.gamma = 0.0;
    s.descriptor_gen.count = 400;
    s.n_queries_min = s.n_queries_max = 100;
    s.query_noise = 0.0;
    s.tfp = {0.05, 0.02};
    return s;
}

}  // namespace

TEST_CASE("scenario config") {
    SECTION("defaults survive an empty config") {
        const Scenario s = load_scenario(KeyValueConfig::parse(""));
        CHECK(s.kernel == Kernel::harris);
        CHECK(s.variant == Variant::conventional);
        CHECK(s.frame_count == 200);
        CHECK(s.frame_interval_ms == 100.0);
        CHECK(s.topology.total_pes() == 32);
    }
    SECTION("fields parse") {
        const Scenario s = load_scenario(KeyValueConfig::parse(
            "kernel = nnsearch\n"
            "variant = resource-aware\n"
            "frame_count = 50\n"
            "eta_gamma = 0\n"
            "eta_table = 2:0.9,4:0.8\n"
            "trace_heavy_busy = 30\n"
            "n_leaf_best = 60\n"
            "tfp_alpha_ms = 0.25\n"));
        CHECK(s.kernel == Kernel::nn_search);
        CHECK(s.variant == Variant::resource_aware);
        CHECK(s.frame_count == 50);
        CHECK(s.eta(2) == 0.9);
        CHECK(s.eta(4) == 0.8);
        CHECK(s.eta(3) == 1.0);  // gamma 0 elsewhere
        CHECK(s.trace.busy_at(5000 * us_per_ms) == 30);
        CHECK(s.n_leaf_best == 60);
        CHECK(s.tfp.alpha_ms == 0.25);
    }
    SECTION("bad values are config errors") {
        CHECK_THROWS_AS(load_scenario(KeyValueConfig::parse("variant = fancy\n")), ConfigError);
        CHECK_THROWS_AS(load_scenario(KeyValueConfig::parse("kernel = surf\n")), ConfigError);
        CHECK_THROWS_AS(load_scenario(KeyValueConfig::parse("frame_count = 0\n")), ConfigError);
        CHECK_THROWS_AS(load_scenario(KeyValueConfig::parse("frame_interval_ms = -5\n")), ConfigError);
        CHECK_THROWS_AS(load_scenario(KeyValueConfig::parse("window = round\n")), ConfigError);
        CHECK_THROWS_AS(load_scenario(KeyValueConfig::parse("typo_key = 1\n")), ConfigError);
    }
}

TEST_CASE("built-in square-wave trace") {
    const LoadTrace t = square_wave_trace();
    CHECK(t.busy_at(0) == 4);
    CHECK(t.busy_at(5000 * us_per_ms) == 28);
    CHECK(t.busy_at(9000 * us_per_ms) == 4);
    CHECK(t.busy_at(21000 * us_per_ms) == 4);   // cyclic
    CHECK(t.busy_at(25000 * us_per_ms) == 28);
}

TEST_CASE("pes_for_work picks the smallest sufficient count") {
    EtaModel ideal;
    ideal.gamma = 0.0;
    CHECK(pes_for_work(100.0, 100.0, ideal, 32) == 1);
    CHECK(pes_for_work(350.0, 100.0, ideal, 32) == 4);
    CHECK(pes_for_work(1e9, 100.0, ideal, 32) == 32);  // nothing fits: whole machine
    EtaModel lossy;  // default gamma keeps per-PE capacity sublinear
    CHECK(pes_for_work(350.0, 100.0, lossy, 32) >= 4);
}

TEST_CASE("conventional run on an idle machine processes every frame") {
    Scenario s = small_harris(Variant::conventional);
    s.trace = flat_trace(0);
    const RunResult r = run_scenario(s);
    CHECK(r.summary.drop_count == 0);
    CHECK(r.summary.throughput == 1.0);
    CHECK(r.summary.mean_precision == 1.0);
    CHECK(r.summary.mean_recall == 1.0);
    CHECK(r.summary.wcet_ratio <= 1.0);
    for (const auto& rec : r.records) CHECK(rec.granted_pes >= 1);
}

TEST_CASE("a saturated machine drops every frame") {
    Scenario s = small_harris(Variant::conventional);
    s.trace = flat_trace(32);
    const RunResult r = run_scenario(s);
    CHECK(r.summary.throughput == 0.0);
    CHECK(r.summary.drop_count == s.frame_count);
    CHECK(r.summary.mean_precision == 0.0);
}

TEST_CASE("resource-aware frames always finish inside the interval") {
    for (Kernel kernel : {Kernel::harris, Kernel::nn_search}) {
        Scenario s = kernel == Kernel::harris ? small_harris(Variant::resource_aware)
                                              : small_nn(Variant::resource_aware);
        s.frame_count = 60;
        s.trace = square_wave_trace();  // alternating abundance and scarcity
        const RunResult r = run_scenario(s);
        const SimTime interval_us = us_from_ms(s.frame_interval_ms);
        for (const auto& rec : r.records)
            if (!rec.dropped) CHECK(rec.duration_us <= interval_us);
        CHECK(r.summary.wcet_ratio <= 1.0);
    }
}

TEST_CASE("paired comparison on an abundant machine is a quality identity") {
    SECTION("corner detection") {
        Scenario s = small_harris(Variant::conventional);
        s.trace = flat_trace(0);
        s.eta.gamma = 0.0;
        const ComparisonReport rep = compare_variants(s);
        CHECK(rep.conventional.throughput == 1.0);
        CHECK(rep.resource_aware.throughput == 1.0);
        for (const auto& row : rep.rows) {
            CHECK_FALSE(row.scarce);
            CHECK(row.ra_quality == row.conv_quality);
        }
        CHECK(rep.resource_aware.mean_precision == rep.conventional.mean_precision);
        CHECK(rep.resource_aware.mean_recall == rep.conventional.mean_recall);
    }
    SECTION("feature matching") {
        Scenario s = small_nn(Variant::conventional);
        s.trace = flat_trace(0);
        const ComparisonReport rep = compare_variants(s);
        CHECK(rep.conventional.throughput == 1.0);
        CHECK(rep.resource_aware.throughput == 1.0);
        CHECK(rep.resource_aware.mean_recall == 1.0);
        for (const auto& row : rep.rows) CHECK(row.ra_quality == row.conv_quality);
    }
}

TEST_CASE("under scarcity the resource-aware variant degrades instead of dropping") {
    Scenario s = small_harris(Variant::conventional);
    s.frame_count = 60;
    s.trace = square_wave_trace(4, 31);  // heavy phase leaves one idle PE
    const ComparisonReport rep = compare_variants(s);
    CHECK(rep.resource_aware.throughput >= rep.conventional.throughput);
    bool any_scarce = false;
    for (const auto& row : rep.rows) any_scarce = any_scarce || row.scarce;
    CHECK(any_scarce);
}

TEST_CASE("identical scenarios render identical CSV") {
    Scenario s = small_harris(Variant::conventional);
    s.frame_count = 20;
    auto run_once = [&] {
        const ComparisonReport rep = compare_variants(s);
        return comparison_csv(rep) + summary_csv_row("c", rep.conventional) +
               summary_csv_row("r", rep.resource_aware);
    };
    CHECK(run_once() == run_once());

    Scenario n = small_nn(Variant::resource_aware);
    auto run_nn = [&] { return records_csv(run_scenario(n).records); };
    CHECK(run_nn() == run_nn());
}

TEST_CASE("impossible topologies are infeasible, not config errors") {
    Scenario s = small_harris(Variant::conventional);
    s.topology.tiles = 0;
    CHECK_THROWS_AS(run_scenario(s), InfeasibleError);
}
