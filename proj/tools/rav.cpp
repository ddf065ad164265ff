// rav: resource-aware vision kernels on a simulated tiled many-core.
//
// Subcommands: gen, harris, nnsearch, calibrate, simulate, compare.
// Exit codes: 0 success, 1 usage error, 2 infeasible scenario.

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rav/config.hpp"
#include "rav/harris.hpp"
#include "rav/io.hpp"
#include "rav/nn_model.hpp"
#include "rav/scenario.hpp"
#include "rav/synth.hpp"

namespace {

rav::Scenario load_scenario_file(const std::string& path) {
    return rav::load_scenario(rav::KeyValueConfig::parse(rav::read_file(path)));
}

std::vector<rav::Descriptor> load_descriptor_file(const std::string& path, const std::string& format) {
    std::istringstream in(rav::read_file(path));
    if (format == "csv") return rav::read_descriptors_csv(in);
    if (format == "binary") return rav::read_descriptors_binary(in);
    throw rav::ConfigError("unknown descriptor format: " + format);
}

int run_gen(const std::string& kind, const std::string& out, int frames, std::uint64_t seed,
            int width, int height, int count, const std::string& format) {
    namespace fs = std::filesystem;
    if (kind == "descriptor-clusters") {
        rav::DescriptorGenParams p;
        p.count = count;
        const auto set = rav::generate_descriptor_set(p, seed);
        std::ostringstream buf;
        if (format == "csv")
            rav::write_descriptors_csv(buf, set);
        else if (format == "binary")
            rav::write_descriptors_binary(buf, set);
        else
            throw rav::ConfigError("unknown descriptor format: " + format);
        rav::write_file(out, buf.str());
        std::cout << "wrote " << set.size() << " descriptors to " << out << "\n";
        return 0;
    }
    const rav::SceneKind scene = rav::parse_scene_kind(kind);
    rav::SceneParams p;
    p.width = width;
    p.height = height;
    fs::create_directories(out);
    std::ostringstream gt;
    gt << "frame,x,y\n";
    for (int i = 0; i < frames; ++i) {
        const rav::SceneFrame f = rav::generate_scene_frame(scene, p, seed, i);
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%04d.pgm", i);
        rav::write_file((fs::path(out) / name).string(), rav::write_pgm(f.image));
        for (const auto& c : f.gt_corners)
            gt << i << "," << rav::format_double(c.x) << "," << rav::format_double(c.y) << "\n";
    }
    rav::write_file((fs::path(out) / "ground_truth.csv").string(), gt.str());
    std::cout << "wrote " << frames << " frames to " << out << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"resource-aware vision kernels on a simulated many-core"};
    app.require_subcommand(1);

    // --- gen ---
    auto* gen = app.add_subcommand("gen", "generate synthetic frames or descriptors");
    std::string gen_kind = "white-square";
    std::string gen_out = "out";
    std::string gen_format = "csv";
    int gen_frames = 1, gen_width = 640, gen_height = 480, gen_count = 1000;
    std::uint64_t gen_seed = 1;
    gen->add_option("--kind", gen_kind,
                    "checkerboard | blobs | white-square | descriptor-clusters");
    gen->add_option("--out", gen_out, "output directory (scenes) or file (descriptors)");
    gen->add_option("--frames", gen_frames, "number of frames");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--width", gen_width, "image width");
    gen->add_option("--height", gen_height, "image height");
    gen->add_option("--count", gen_count, "descriptor count");
    gen->add_option("--format", gen_format, "descriptor file format: csv | binary");

    // --- harris ---
    auto* harris = app.add_subcommand("harris", "detect corners in a PGM image");
    std::string h_image, h_out = "corners.csv";
    rav::HarrisParams h_params;
    std::string h_window = "box";
    harris->add_option("--image", h_image, "input PGM (P5) image")->required();
    harris->add_option("--out", h_out, "corner CSV output");
    harris->add_option("-k,--k", h_params.k, "Harris k constant");
    harris->add_option("--r-threshold", h_params.r_threshold, "response threshold");
    harris->add_option("--nms-radius", h_params.nms_radius, "non-maximum suppression radius");
    harris->add_option("--window", h_window, "averaging window: box | gaussian");
    harris->add_option("--window-radius", h_params.window_radius, "window radius");

    // --- nnsearch ---
    auto* nns = app.add_subcommand("nnsearch", "budgeted NN matching of descriptor files");
    std::string n_tree, n_queries, n_out = "matches.csv", n_format = "csv";
    int n_budget = 120, n_leaf_capacity = 8;
    double n_threshold = 0.25;
    nns->add_option("--tree", n_tree, "descriptor file for the kd-tree")->required();
    nns->add_option("--queries", n_queries, "descriptor file with queries")->required();
    nns->add_option("--out", n_out, "match CSV output");
    nns->add_option("--format", n_format, "descriptor file format: csv | binary");
    nns->add_option("--budget", n_budget, "max leaves visited per query");
    nns->add_option("--leaf-capacity", n_leaf_capacity, "kd-tree leaf capacity");
    nns->add_option("--threshold", n_threshold, "match threshold (squared distance)");

    // --- calibrate ---
    auto* cal = app.add_subcommand("calibrate", "fit the per-feature search-time model");
    std::string c_tree, c_format = "csv", c_budgets = "1,2,5,10,20,40";
    int c_leaf_capacity = 8, c_samples = 100;
    std::uint64_t c_seed = 1;
    double c_alpha = 0.05, c_beta = 0.02, c_noise = 0.05;
    cal->add_option("--tree", c_tree, "descriptor file for the kd-tree")->required();
    cal->add_option("--format", c_format, "descriptor file format: csv | binary");
    cal->add_option("--budgets", c_budgets, "comma-separated leaf budgets");
    cal->add_option("--leaf-capacity", c_leaf_capacity, "kd-tree leaf capacity");
    cal->add_option("--samples", c_samples, "number of sample queries");
    cal->add_option("--seed", c_seed, "sample query seed");
    cal->add_option("--alpha", c_alpha, "true per-query overhead, ms");
    cal->add_option("--beta", c_beta, "true per-leaf cost, ms");
    cal->add_option("--noise", c_noise, "sample query noise sigma");

    // --- simulate ---
    auto* sim = app.add_subcommand("simulate", "run a scenario file");
    std::string s_scenario, s_records = "frames.csv", s_summary = "summary.csv";
    sim->add_option("scenario", s_scenario, "scenario config file")->required();
    sim->add_option("--records", s_records, "per-frame record CSV output");
    sim->add_option("--summary", s_summary, "summary CSV output");

    // --- compare ---
    auto* cmp = app.add_subcommand("compare", "paired conventional vs resource-aware run");
    std::string p_scenario, p_series = "series.csv", p_summary = "summary.csv";
    cmp->add_option("scenario", p_scenario, "scenario config file")->required();
    cmp->add_option("--series", p_series, "per-frame comparison CSV output");
    cmp->add_option("--summary", p_summary, "summary CSV output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (gen->parsed())
            return run_gen(gen_kind, gen_out, gen_frames, gen_seed, gen_width, gen_height,
                           gen_count, gen_format);

        if (harris->parsed()) {
            if (h_window == "gaussian")
                h_params.window_kind = rav::WindowKind::gaussian;
            else if (h_window != "box")
                throw rav::ConfigError("unknown window kind: " + h_window);
            const rav::GrayImage img = rav::read_pgm(rav::read_file(h_image));
            const rav::CornerList corners = rav::detect_conventional(img, h_params);
            rav::write_file(h_out, rav::corners_csv(corners));
            std::cout << corners.size() << " corners -> " << h_out << "\n";
            return 0;
        }

        if (nns->parsed()) {
            const auto tree_set = load_descriptor_file(n_tree, n_format);
            const auto queries = load_descriptor_file(n_queries, n_format);
            if (tree_set.empty()) throw rav::InfeasibleError("tree descriptor set is empty");
            const rav::KdTree tree(tree_set, n_leaf_capacity);
            const rav::MatchRun run = rav::match_features(queries, tree, rav::SearchBudget{n_budget},
                                                          n_threshold, rav::TfpModel{});
            rav::write_file(n_out, rav::matches_csv(run.matches));
            std::cout << run.matches.size() << " matches -> " << n_out << "\n";
            return 0;
        }

        if (cal->parsed()) {
            const auto set = load_descriptor_file(c_tree, c_format);
            if (set.empty()) throw rav::InfeasibleError("tree descriptor set is empty");
            const rav::KdTree tree(set, c_leaf_capacity);
            std::vector<int> budgets;
            std::istringstream bs(c_budgets);
            std::string item;
            while (std::getline(bs, item, ',')) budgets.push_back(std::stoi(item));
            std::vector<rav::Descriptor> samples;
            rav::Rng rng(c_seed);
            for (int i = 0; i < c_samples; ++i) {
                rav::Descriptor q = set[rng.below(set.size())];
                q.id = i;
                // noise keeps the searches from terminating on an exact hit,
                // which would make every budget visit the same leaf count
                if (c_noise > 0)
                    for (auto& v : q.values) v += c_noise * rng.gaussian();
                samples.push_back(q);
            }
            const auto fit = rav::calibrate_tfp(tree, samples, budgets,
                                                rav::TfpModel{c_alpha, c_beta});
            std::cout << "alpha_ms,beta_ms,residual_ms\n"
                      << rav::format_double(fit.model.alpha_ms) << ","
                      << rav::format_double(fit.model.beta_ms) << ","
                      << rav::format_double(fit.residual) << "\n";
            return 0;
        }

        if (sim->parsed()) {
            const rav::Scenario s = load_scenario_file(s_scenario);
            const rav::RunResult result = rav::run_scenario(s);
            rav::write_file(s_records, rav::records_csv(result.records));
            const std::string name =
                s.variant == rav::Variant::conventional ? "conventional" : "resource-aware";
            rav::write_file(s_summary,
                            rav::summary_csv_header() + rav::summary_csv_row(name, result.summary));
            std::cout << name << ": throughput=" << rav::format_double(result.summary.throughput)
                      << " wcet_ratio=" << rav::format_double(result.summary.wcet_ratio)
                      << " precision=" << rav::format_double(result.summary.mean_precision)
                      << " recall=" << rav::format_double(result.summary.mean_recall) << "\n";
            return 0;
        }

        if (cmp->parsed()) {
            const rav::Scenario s = load_scenario_file(p_scenario);
            const rav::ComparisonReport report = rav::compare_variants(s);
            rav::write_file(p_series, rav::comparison_csv(report));
            rav::write_file(p_summary,
                            rav::summary_csv_header() +
                                rav::summary_csv_row("conventional", report.conventional) +
                                rav::summary_csv_row("resource-aware", report.resource_aware));
            std::cout << "conventional: throughput="
                      << rav::format_double(report.conventional.throughput)
                      << " wcet_ratio=" << rav::format_double(report.conventional.wcet_ratio) << "\n"
                      << "resource-aware: throughput="
                      << rav::format_double(report.resource_aware.throughput)
                      << " wcet_ratio=" << rav::format_double(report.resource_aware.wcet_ratio)
                      << "\n";
            return 0;
        }
    } catch (const rav::InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 2;
    } catch (const rav::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const rav::FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
