#pragma once

#include <algorithm>
#include <filesystem>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rav/config.hpp"
#include "rav/harris.hpp"
#include "rav/io.hpp"
#include "rav/kdtree.hpp"
#include "rav/metrics.hpp"
#include "rav/nn_model.hpp"
#include "rav/runtime.hpp"
#include "rav/synth.hpp"

namespace rav {

/// A scenario that cannot run at all (zero-PE topology, trace exceeding the
/// machine, ...), as opposed to a malformed config.
class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Variant { conventional, resource_aware };
enum class Kernel { harris, nn_search };

/// Built-in square-wave trace alternating 4 s near-idle and 4 s heavy load
/// over a 20 s cycle.
inline LoadTrace square_wave_trace(int idle_busy = 4, int heavy_busy = 28) {
    LoadTrace t;
    t.entries = {{0, idle_busy},
                 {4000 * us_per_ms, heavy_busy},
                 {8000 * us_per_ms, idle_busy},
                 {12000 * us_per_ms, heavy_busy},
                 {16000 * us_per_ms, idle_busy}};
    t.duration = 20000 * us_per_ms;
    return t;
}

struct Scenario {
    Kernel kernel = Kernel::harris;
    Variant variant = Variant::conventional;
    int frame_count = 200;
    double frame_interval_ms = 100.0;
    std::uint64_t seed = 1;

    Topology topology;
    int max_grantable_pes = -1;  // -1: no cap
    EtaModel eta;
    LoadTrace trace = square_wave_trace();

    // harris
    SceneKind scene = SceneKind::white_square;
    SceneParams scene_params;
    std::string image_dir;  // overrides the synthetic scene when set
    HarrisParams harris;
    HarrisTiming harris_timing;
    double match_tol_px = 2.0;

    // nn-search
    std::string descriptor_file;  // overrides the synthetic set when set
    DescriptorGenParams descriptor_gen;
    int n_queries_min = 200;
    int n_queries_max = 200;
    double query_noise = 0.0;
    int leaf_capacity = 8;
    int n_leaf_best = 120;
    int n_leaf_min = 1;
    double match_threshold = 1e-9;
    TfpModel tfp;
};

inline Variant parse_variant(const std::string& s) {
    if (s == "conventional") return Variant::conventional;
    if (s == "resource-aware" || s == "resource_aware") return Variant::resource_aware;
    throw ConfigError("unknown variant: " + s);
}

inline Kernel parse_kernel(const std::string& s) {
    if (s == "harris") return Kernel::harris;
    if (s == "nnsearch" || s == "nn_search" || s == "nn") return Kernel::nn_search;
    throw ConfigError("unknown kernel: " + s);
}

inline const std::vector<std::string>& scenario_keys() {
    static const std::vector<std::string> keys = {
        "kernel", "variant", "frame_count", "frame_interval_ms", "seed",
        "tiles", "pes_per_tile", "max_grantable_pes", "eta_gamma", "eta_table",
        "load_trace", "trace_duration_ms", "trace_idle_busy", "trace_heavy_busy",
        "scene", "image_dir", "width", "height", "cell_size", "blob_count",
        "square_size", "jitter",
        "k", "r_threshold", "nms_radius", "window", "window_radius",
        "t_full_pixel_ms", "t_cr_pixel_ms", "match_tol_px",
        "descriptor_file", "n_descriptors", "clusters", "cluster_sigma",
        "n_queries", "n_queries_min", "n_queries_max", "query_noise",
        "leaf_capacity", "n_leaf_best", "n_leaf_min", "match_threshold",
        "tfp_alpha_ms", "tfp_beta_ms",
    };
    return keys;
}

inline std::map<int, double> parse_eta_table(const std::string& text) {
    std::map<int, double> table;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError("eta_table: expected n:eta entries");
        table[std::stoi(item.substr(0, colon))] = std::stod(item.substr(colon + 1));
    }
    return table;
}

/// Builds a Scenario from `key = value` text; every field defaults as in the
/// struct and is overridable.
inline Scenario load_scenario(const KeyValueConfig& cfg) {
    cfg.check_keys(scenario_keys());
    Scenario s;
    s.kernel = parse_kernel(cfg.get_string("kernel", "harris"));
    s.variant = parse_variant(cfg.get_string("variant", "conventional"));
    s.frame_count = static_cast<int>(cfg.get_int("frame_count", s.frame_count));
    s.frame_interval_ms = cfg.get_double("frame_interval_ms", s.frame_interval_ms);
    s.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 1));
    if (s.frame_count < 1) throw ConfigError("frame_count must be >= 1");
    if (s.frame_interval_ms <= 0) throw ConfigError("frame_interval_ms must be > 0");

    s.topology.tiles = static_cast<int>(cfg.get_int("tiles", s.topology.tiles));
    s.topology.pes_per_tile = static_cast<int>(cfg.get_int("pes_per_tile", s.topology.pes_per_tile));
    s.max_grantable_pes = static_cast<int>(cfg.get_int("max_grantable_pes", -1));
    s.eta.gamma = cfg.get_double("eta_gamma", s.eta.gamma);
    if (cfg.has("eta_table")) s.eta.table = parse_eta_table(cfg.get_string("eta_table", ""));

    const std::string trace_src = cfg.get_string("load_trace", "square-wave");
    if (trace_src == "square-wave") {
        s.trace = square_wave_trace(static_cast<int>(cfg.get_int("trace_idle_busy", 4)),
                                     static_cast<int>(cfg.get_int("trace_heavy_busy", 28)));
    } else {
        std::istringstream in(read_file(trace_src));
        s.trace = read_load_trace(in);
    }
    if (cfg.has("trace_duration_ms"))
        s.trace.duration = us_from_ms(cfg.get_double("trace_duration_ms", 0));

    s.scene = parse_scene_kind(cfg.get_string("scene", "white-square"));
    s.image_dir = cfg.get_string("image_dir", "");
    s.scene_params.width = static_cast<int>(cfg.get_int("width", s.scene_params.width));
    s.scene_params.height = static_cast<int>(cfg.get_int("height", s.scene_params.height));
    s.scene_params.cell_size = static_cast<int>(cfg.get_int("cell_size", s.scene_params.cell_size));
    s.scene_params.blob_count = static_cast<int>(cfg.get_int("blob_count", s.scene_params.blob_count));
    s.scene_params.square_size =
        static_cast<int>(cfg.get_int("square_size", s.scene_params.square_size));
    s.scene_params.jitter = static_cast<int>(cfg.get_int("jitter", s.scene_params.jitter));

    s.harris.k = cfg.get_double("k", s.harris.k);
    s.harris.r_threshold = cfg.get_double("r_threshold", s.harris.r_threshold);
    s.harris.nms_radius = static_cast<int>(cfg.get_int("nms_radius", s.harris.nms_radius));
    const std::string window = cfg.get_string("window", "box");
    if (window == "box")
        s.harris.window_kind = WindowKind::box;
    else if (window == "gaussian")
        s.harris.window_kind = WindowKind::gaussian;
    else
        throw ConfigError("unknown window kind: " + window);
    s.harris.window_radius = static_cast<int>(cfg.get_int("window_radius", s.harris.window_radius));
    s.harris_timing.t_full_pixel_ms =
        cfg.get_double("t_full_pixel_ms", s.harris_timing.t_full_pixel_ms);
    s.harris_timing.t_cr_pixel_ms = cfg.get_double("t_cr_pixel_ms", s.harris_timing.t_cr_pixel_ms);
    s.match_tol_px = cfg.get_double("match_tol_px", s.match_tol_px);

    s.descriptor_file = cfg.get_string("descriptor_file", "");
    s.descriptor_gen.count = static_cast<int>(cfg.get_int("n_descriptors", s.descriptor_gen.count));
    s.descriptor_gen.clusters = static_cast<int>(cfg.get_int("clusters", s.descriptor_gen.clusters));
    s.descriptor_gen.cluster_sigma = cfg.get_double("cluster_sigma", s.descriptor_gen.cluster_sigma);
    const int n_queries = static_cast<int>(cfg.get_int("n_queries", 200));
    s.n_queries_min = static_cast<int>(cfg.get_int("n_queries_min", n_queries));
    s.n_queries_max = static_cast<int>(cfg.get_int("n_queries_max", n_queries));
    s.query_noise = cfg.get_double("query_noise", s.query_noise);
    s.leaf_capacity = static_cast<int>(cfg.get_int("leaf_capacity", s.leaf_capacity));
    s.n_leaf_best = static_cast<int>(cfg.get_int("n_leaf_best", s.n_leaf_best));
    s.n_leaf_min = static_cast<int>(cfg.get_int("n_leaf_min", s.n_leaf_min));
    s.match_threshold = cfg.get_double("match_threshold", s.match_threshold);
    s.tfp.alpha_ms = cfg.get_double("tfp_alpha_ms", s.tfp.alpha_ms);
    s.tfp.beta_ms = cfg.get_double("tfp_beta_ms", s.tfp.beta_ms);
    return s;
}

/// Smallest PE count whose capacity covers `work_ms` within the interval;
/// falls back to the whole machine when nothing fits.
inline int pes_for_work(double work_ms, double interval_ms, const EtaModel& eta, int total_pes) {
    for (int n = 1; n <= total_pes; ++n)
        if (work_ms <= n * eta(n) * interval_ms) return n;
    return total_pes;
}

struct RunResult {
    std::vector<FrameRecord> records;
    RunSummary summary;
    std::vector<int> requested;  // per frame, PEs requested (0 when not invaded)
    std::vector<int> grants;     // per frame, PEs granted (0 when dropped)
};

/// Runs a scenario frame by frame: estimate, invade, compute (adapting in
/// the resource-aware variant), retreat, score. When `grant_override` is
/// given, frame i requests exactly grant_override[i] PEs (grant replay for
/// paired comparisons); an override of 0 drops the frame outright.
inline RunResult run_scenario(const Scenario& s, const std::vector<int>* grant_override = nullptr) {
    Runtime rt = [&] {
        try {
            return Runtime(s.topology, s.trace, s.eta, s.max_grantable_pes);
        } catch (const std::invalid_argument& e) {
            throw InfeasibleError(e.what());
        }
    }();
    const SimTime interval_us = us_from_ms(s.frame_interval_ms);
    const int total = s.topology.total_pes();

    // per-kernel fixed state
    std::vector<std::string> image_files;
    if (s.kernel == Kernel::harris && !s.image_dir.empty()) {
        for (const auto& entry : std::filesystem::directory_iterator(s.image_dir))
            if (entry.path().extension() == ".pgm") image_files.push_back(entry.path().string());
        std::sort(image_files.begin(), image_files.end());
        if (image_files.empty()) throw InfeasibleError("image_dir has no .pgm files: " + s.image_dir);
    }
    std::unique_ptr<KdTree> tree;
    std::vector<Descriptor> base_set;
    if (s.kernel == Kernel::nn_search) {
        if (!s.descriptor_file.empty()) {
            std::istringstream in(read_file(s.descriptor_file));
            base_set = read_descriptors_csv(in);
            if (base_set.empty()) throw InfeasibleError("descriptor file is empty");
        } else {
            base_set = generate_descriptor_set(s.descriptor_gen, s.seed);
        }
        tree = std::make_unique<KdTree>(base_set, s.leaf_capacity);
        s.tfp.validate();
    }

    RunResult result;
    SimTime busy_until = 0;
    for (int i = 0; i < s.frame_count; ++i) {
        const SimTime t = static_cast<SimTime>(i) * interval_us;
        FrameRecord rec;
        rec.frame_index = i;

        auto record_drop = [&] {
            rec.dropped = true;
            rec.duration_us = 0;
            rec.precision = 0.0;
            rec.recall = 0.0;
            result.requested.push_back(0);
            result.grants.push_back(0);
            result.records.push_back(rec);
        };

        // an arrival during ongoing processing is dropped, never queued
        if (t < busy_until) {
            record_drop();
            continue;
        }

        if (s.kernel == Kernel::harris) {
            SceneFrame frame;
            if (!image_files.empty()) {
                std::istringstream in(read_file(image_files[static_cast<std::size_t>(i) %
                                                            image_files.size()]));
                frame.image = read_pgm(in);
            } else {
                frame = generate_scene_frame(s.scene, s.scene_params, s.seed, i);
            }
            const double px = static_cast<double>(frame.image.pixel_count());
            const double full_ms = px * s.harris_timing.t_full_pixel_ms;
            const double adaptive_ms = full_ms + px * s.harris_timing.t_cr_pixel_ms;
            int request = s.variant == Variant::conventional
                              ? pes_for_work(full_ms, s.frame_interval_ms, s.eta, total)
                              : pes_for_work(adaptive_ms, s.frame_interval_ms, s.eta, total);
            if (grant_override) request = (*grant_override)[static_cast<std::size_t>(i)];
            if (request < 1) {
                record_drop();
                continue;
            }
            ResourceClaim claim = rt.invade({request, "harris"}, t);
            if (claim.empty()) {
                rt.retreat(claim);
                record_drop();
                continue;
            }
            CornerList corners;
            SimTime duration = 0;
            if (s.variant == Variant::conventional) {
                corners = detect_conventional(frame.image, s.harris);
                duration = rt.infect(claim, Workload{px, s.harris_timing.t_full_pixel_ms});
            } else {
                auto res = detect_adaptive(frame.image, claim, interval_us, s.harris_timing,
                                           rt.eta(), s.harris);
                if (!res) {
                    rt.retreat(claim);
                    record_drop();
                    continue;
                }
                corners = std::move(res->corners);
                duration = res->duration_us;
            }
            rt.retreat(claim);
            busy_until = t + duration;
            std::vector<Point2> detected;
            detected.reserve(corners.size());
            for (const auto& c : corners) detected.push_back({static_cast<double>(c.x),
                                                              static_cast<double>(c.y)});
            const PrecisionRecall pr = precision_recall(detected, frame.gt_corners, s.match_tol_px);
            rec.granted_pes = claim.size();
            rec.duration_us = duration;
            rec.detection_count = static_cast<int>(corners.size());
            rec.correct_count = pr.correct;
            rec.precision = pr.precision;
            rec.recall = pr.recall;
            result.requested.push_back(request);
            result.grants.push_back(claim.size());
            result.records.push_back(rec);
        } else {
            Rng nrng = frame_rng(s.seed ^ 0x5151515151515151ULL, i);
            const int n_fp = s.n_queries_min >= s.n_queries_max
                                 ? s.n_queries_min
                                 : nrng.range(s.n_queries_min, s.n_queries_max);
            const QueryFrame qf = generate_query_frame(base_set, n_fp, s.query_noise, s.seed, i);
            int request =
                std::clamp(required_pes(n_fp, s.tfp, s.n_leaf_best, s.frame_interval_ms), 1, total);
            if (grant_override) request = (*grant_override)[static_cast<std::size_t>(i)];
            if (request < 1) {
                record_drop();
                continue;
            }
            ResourceClaim claim = rt.invade({request, "nn-search"}, t);
            if (claim.empty()) {
                rt.retreat(claim);
                record_drop();
                continue;
            }
            int budget = s.n_leaf_best;
            if (s.variant == Variant::resource_aware) {
                const auto adapted = adapt_leaf_count(claim.size(), s.frame_interval_ms,
                                                      rt.eta()(claim.size()), n_fp, s.tfp,
                                                      s.n_leaf_best, s.n_leaf_min);
                if (!adapted) {
                    rt.retreat(claim);
                    record_drop();
                    continue;
                }
                budget = *adapted;
            }
            const MatchRun run = match_features(qf.queries, *tree, SearchBudget{budget},
                                                s.match_threshold, s.tfp);
            const SimTime duration = rt.infect(claim, Workload{run.total_cost_ms, 1.0});
            rt.retreat(claim);
            busy_until = t + duration;
            int correct = 0;
            for (const auto& m : run.matches)
                if (qf.gt_ids[static_cast<std::size_t>(m.query_id)] == m.tree_id) ++correct;
            rec.granted_pes = claim.size();
            rec.duration_us = duration;
            rec.detection_count = static_cast<int>(run.matches.size());
            rec.correct_count = correct;
            rec.precision = run.matches.empty() ? (n_fp == 0 ? 1.0 : 0.0)
                                                : static_cast<double>(correct) /
                                                      static_cast<double>(run.matches.size());
            rec.recall = n_fp == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(n_fp);
            result.requested.push_back(request);
            result.grants.push_back(claim.size());
            result.records.push_back(rec);
        }
    }
    result.summary = summarize(result.records, s.frame_interval_ms);
    return result;
}

struct ComparisonRow {
    int frame = 0;
    int busy_pes = 0;
    bool scarce = false;
    int conv_granted = 0;
    int ra_granted = 0;
    bool conv_dropped = false;
    bool ra_dropped = false;
    int conv_quality = 0;  // correct detections / matches
    int ra_quality = 0;
    SimTime conv_duration_us = 0;
    SimTime ra_duration_us = 0;
};

struct ComparisonReport {
    std::vector<ComparisonRow> rows;
    RunSummary conventional;
    RunSummary resource_aware;
};

/// Paired run with equalized grants: the resource-aware run goes first and
/// its grant sequence is replayed as the conventional run's requests, so
/// both variants see identical frames, traces and PE counts.
inline ComparisonReport compare_variants(const Scenario& base) {
    Scenario ra = base;
    ra.variant = Variant::resource_aware;
    const RunResult ra_run = run_scenario(ra);

    Scenario conv = base;
    conv.variant = Variant::conventional;
    const RunResult conv_run = run_scenario(conv, &ra_run.grants);

    ComparisonReport report;
    report.conventional = conv_run.summary;
    report.resource_aware = ra_run.summary;
    const SimTime interval_us = us_from_ms(base.frame_interval_ms);
    for (int i = 0; i < base.frame_count; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        ComparisonRow row;
        row.frame = i;
        row.busy_pes = base.trace.busy_at(static_cast<SimTime>(i) * interval_us);
        row.ra_granted = ra_run.grants[idx];
        row.conv_granted = conv_run.grants[idx];
        row.scarce = ra_run.grants[idx] < ra_run.requested[idx];
        row.conv_dropped = conv_run.records[idx].dropped;
        row.ra_dropped = ra_run.records[idx].dropped;
        row.conv_quality = conv_run.records[idx].correct_count;
        row.ra_quality = ra_run.records[idx].correct_count;
        row.conv_duration_us = conv_run.records[idx].duration_us;
        row.ra_duration_us = ra_run.records[idx].duration_us;
        report.rows.push_back(row);
    }
    return report;
}

// ---------------------------------------------------------------------------
// CSV rendering
// ---------------------------------------------------------------------------

inline std::string records_csv(const std::vector<FrameRecord>& records) {
    std::ostringstream out;
    out << "frame,granted_pes,duration_ms,dropped,detections,correct,precision,recall\n";
    for (const auto& r : records)
        out << r.frame_index << "," << r.granted_pes << "," << format_double(ms_from_us(r.duration_us))
            << "," << (r.dropped ? 1 : 0) << "," << r.detection_count << "," << r.correct_count << ","
            << format_double(r.precision) << "," << format_double(r.recall) << "\n";
    return out.str();
}

inline std::string summary_csv_header() { return "variant,throughput,wcet_ratio,precision,recall\n"; }

inline std::string summary_csv_row(const std::string& variant, const RunSummary& s) {
    std::ostringstream out;
    out << variant << "," << format_double(s.throughput) << "," << format_double(s.wcet_ratio) << ","
        << format_double(s.mean_precision) << "," << format_double(s.mean_recall) << "\n";
    return out.str();
}

inline std::string comparison_csv(const ComparisonReport& report) {
    std::ostringstream out;
    out << "frame,busy_pes,scarce,conv_granted,ra_granted,conv_dropped,ra_dropped,"
           "conv_quality,ra_quality,conv_duration_ms,ra_duration_ms\n";
    for (const auto& r : report.rows)
        out << r.frame << "," << r.busy_pes << "," << (r.scarce ? 1 : 0) << "," << r.conv_granted
            << "," << r.ra_granted << "," << (r.conv_dropped ? 1 : 0) << "," << (r.ra_dropped ? 1 : 0)
            << "," << r.conv_quality << "," << r.ra_quality << ","
            << format_double(ms_from_us(r.conv_duration_us)) << ","
            << format_double(ms_from_us(r.ra_duration_us)) << "\n";
    return out.str();
}

inline std::string corners_csv(const CornerList& corners, int frame = 0) {
    std::ostringstream out;
    out << "frame,x,y,response\n";
    for (const auto& c : corners)
        out << frame << "," << c.x << "," << c.y << "," << format_double(c.response) << "\n";
    return out.str();
}

inline std::string matches_csv(const std::vector<Match>& matches) {
    std::ostringstream out;
    out << "query_id,tree_id,sq_distance\n";
    for (const auto& m : matches)
        out << m.query_id << "," << m.tree_id << "," << format_double(m.sq_distance) << "\n";
    return out.str();
}

}  // namespace rav
