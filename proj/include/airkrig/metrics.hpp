#pragma once

#include <string>
#include <vector>

#include "airkrig/graph.hpp"

namespace airkrig {

/// Aggregate error metrics over an evaluation index set, in original units.
struct MetricsReport {
    double mae = 0.0;
    double mape = 0.0;  ///< ratio; entries with |truth| < 1 ug/m3 excluded
    double mre = 0.0;   ///< ratio of summed absolute error to summed |truth|
    std::int64_t n_points = 0;
    std::int64_t n_mape_excluded = 0;

    struct PerNode {
        std::string id;
        double mae = 0.0;
        std::int64_t n_points = 0;
    };
    std::vector<PerNode> per_node;
};

/// MAE / MAPE / MRE over the index set `omega` into y_true / y_pred.
/// Throws std::runtime_error when omega is empty.
MetricsReport compute_metrics(const std::vector<double>& y_true, const std::vector<double>& y_pred,
                              const std::vector<std::int64_t>& omega);

/// Fills the per-node breakdown assuming frame-major indexing
/// (index = frame * n_nodes + node).
void add_per_node_breakdown(MetricsReport& report, const std::vector<double>& y_true,
                            const std::vector<double>& y_pred,
                            const std::vector<std::int64_t>& omega, int n_nodes,
                            const std::vector<std::string>& node_ids);

/// Per-frame K-nearest-neighbor interpolation: each unobserved station takes
/// the mean of its k geographically nearest observed stations' values.
/// `y_obs` is frame-major (frame * n + i); entries of unobserved stations are
/// ignored, entries with avail_mask 0 are skipped in the averaging.
/// Returns predictions for every (frame, station) cell.
std::vector<double> knn_baseline(const StationGraph& graph, const std::vector<double>& y_obs,
                                 const std::vector<double>& avail_mask,
                                 const std::vector<std::uint8_t>& observed, int frames, int k);

/// Per-frame mean of observed available values (the k = N_obs limit of KNN).
std::vector<double> mean_baseline(const std::vector<double>& y_obs,
                                  const std::vector<double>& avail_mask,
                                  const std::vector<std::uint8_t>& observed, int frames, int n);

/// Published reference metrics for report context.
struct ReferenceRow {
    const char* model;
    double mae;
    double mape;
    double mre;
};
const std::vector<ReferenceRow>& reference_table();

}  // namespace airkrig
