#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rav/kdtree.hpp"

namespace rav {

/// Linear per-query search cost: T_fp(n) = alpha + beta * leaves visited,
/// in milliseconds.
struct TfpModel {
    double alpha_ms = 0.0;
    double beta_ms = 0.05;

    double operator()(double leaves) const { return alpha_ms + beta_ms * leaves; }

    void validate() const {
        if (alpha_ms < 0 || beta_ms <= 0)
            throw std::invalid_argument("TfpModel: need alpha >= 0 and beta > 0");
    }
};

struct CalibrationResult {
    TfpModel model;
    double residual = 0.0;  // RMS of fit residuals, ms
};

class CalibrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Fits TfpModel from simulated runs: for each budget, run the sample
/// queries, record (mean leaves visited, mean simulated cost) where the cost
/// of a query is charged by `true_cost` at the leaves actually visited, then
/// least-squares over the per-budget points.
inline CalibrationResult calibrate_tfp(const KdTree& tree, const std::vector<Descriptor>& sample_queries,
                                       const std::vector<int>& budgets, const TfpModel& true_cost) {
    if (budgets.size() < 2)
        throw std::invalid_argument("calibrate_tfp: need at least 2 budgets");
    if (sample_queries.empty())
        throw std::invalid_argument("calibrate_tfp: need sample queries");
    std::vector<double> xs, ys;
    for (int b : budgets) {
        double leaves = 0.0, cost = 0.0;
        for (const auto& q : sample_queries) {
            const SearchResult r = tree.nn_search(q, SearchBudget{b});
            leaves += r.leaves_visited;
            cost += true_cost(r.leaves_visited);
        }
        xs.push_back(leaves / static_cast<double>(sample_queries.size()));
        ys.push_back(cost / static_cast<double>(sample_queries.size()));
    }
    const auto n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx == 0.0)
        throw CalibrationError("calibrate_tfp: degenerate fit, all budgets visit the same leaf count");
    CalibrationResult out;
    out.model.beta_ms = sxy / sxx;
    out.model.alpha_ms = my - out.model.beta_ms * mx;
    double ss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double e = ys[i] - out.model(xs[i]);
        ss += e * e;
    }
    out.residual = std::sqrt(ss / n);
    return out;
}

/// PEs needed to search n_fp features within t_search at the configured best
/// leaf count: ceil(n_fp * T_fp(n_leaf_best) / t_search).
inline int required_pes(int n_fp, const TfpModel& tfp, int n_leaf_best, double t_search_ms) {
    if (t_search_ms <= 0) throw std::invalid_argument("required_pes: t_search must be > 0");
    if (n_fp < 0) throw std::invalid_argument("required_pes: n_fp must be >= 0");
    if (n_fp == 0) return 0;
    return static_cast<int>(std::ceil(static_cast<double>(n_fp) * tfp(n_leaf_best) / t_search_ms));
}

/// Inverts the linear cost model so all n_fp features fit the granted
/// budget: n = floor((granted * t_search * eta / n_fp - alpha) / beta),
/// clamped to [n_leaf_min, n_leaf_best]. Returns nullopt when even
/// n_leaf_min does not fit (caller drops or queues the frame).
inline std::optional<int> adapt_leaf_count(int granted_pes, double t_search_ms, double eta,
                                           int n_fp, const TfpModel& tfp, int n_leaf_best,
                                           int n_leaf_min = 1) {
    if (granted_pes < 1) throw std::invalid_argument("adapt_leaf_count: granted_pes must be >= 1");
    if (n_fp < 1) throw std::invalid_argument("adapt_leaf_count: n_fp must be >= 1");
    tfp.validate();
    const double per_feature_ms = granted_pes * t_search_ms * eta / static_cast<double>(n_fp);
    // small nudge so an exact fixed point survives floating-point rounding
    const int n = static_cast<int>(
        std::floor((per_feature_ms - tfp.alpha_ms) / tfp.beta_ms + 1e-9));
    if (n < n_leaf_min) return std::nullopt;
    return std::min(n, n_leaf_best);
}

struct Match {
    int query_id = 0;
    int tree_id = 0;
    double sq_distance = 0.0;
};

struct MatchRun {
    std::vector<Match> matches;
    long long total_leaves_visited = 0;
    double total_cost_ms = 0.0;  // sum of T_fp at the actual leaves visited
};

/// Budgeted 1-NN matching with an absolute squared-distance threshold.
inline MatchRun match_features(const std::vector<Descriptor>& queries, const KdTree& tree,
                               const SearchBudget& budget, double match_threshold,
                               const TfpModel& tfp) {
    MatchRun run;
    for (const auto& q : queries) {
        const SearchResult r = tree.nn_search(q, budget);
        run.total_leaves_visited += r.leaves_visited;
        run.total_cost_ms += tfp(r.leaves_visited);
        if (r.sq_distance <= match_threshold)
            run.matches.push_back({q.id, r.id, r.sq_distance});
    }
    return run;
}

}  // namespace rav
