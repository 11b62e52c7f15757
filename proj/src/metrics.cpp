#include "airkrig/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace airkrig {

MetricsReport compute_metrics(const std::vector<double>& y_true, const std::vector<double>& y_pred,
                              const std::vector<std::int64_t>& omega) {
    if (omega.empty()) throw std::runtime_error("compute_metrics: empty index set");
    if (y_true.size() != y_pred.size())
        throw std::invalid_argument("compute_metrics: prediction/truth size mismatch");

    MetricsReport r;
    double abs_err_sum = 0.0;
    double abs_true_sum = 0.0;
    double mape_sum = 0.0;
    std::int64_t mape_count = 0;
    for (std::int64_t i : omega) {
        if (i < 0 || i >= static_cast<std::int64_t>(y_true.size()))
            throw std::invalid_argument("compute_metrics: index out of range");
        const double err = std::abs(y_true[i] - y_pred[i]);
        abs_err_sum += err;
        abs_true_sum += std::abs(y_true[i]);
        if (std::abs(y_true[i]) >= 1.0) {
            mape_sum += err / std::abs(y_true[i]);
            ++mape_count;
        } else {
            ++r.n_mape_excluded;
        }
    }
    r.n_points = static_cast<std::int64_t>(omega.size());
    r.mae = abs_err_sum / static_cast<double>(r.n_points);
    r.mape = mape_count > 0 ? mape_sum / static_cast<double>(mape_count) : 0.0;
    r.mre = abs_true_sum > 0.0 ? abs_err_sum / abs_true_sum : 0.0;
    return r;
}

void add_per_node_breakdown(MetricsReport& report, const std::vector<double>& y_true,
                            const std::vector<double>& y_pred,
                            const std::vector<std::int64_t>& omega, int n_nodes,
                            const std::vector<std::string>& node_ids) {
    std::map<int, std::pair<double, std::int64_t>> acc;
    for (std::int64_t i : omega) {
        const int node = static_cast<int>(i % n_nodes);
        auto& slot = acc[node];
        slot.first += std::abs(y_true[i] - y_pred[i]);
        slot.second += 1;
    }
    report.per_node.clear();
    for (const auto& [node, slot] : acc) {
        MetricsReport::PerNode pn;
        pn.id = node < static_cast<int>(node_ids.size()) ? node_ids[node] : std::to_string(node);
        pn.mae = slot.first / static_cast<double>(slot.second);
        pn.n_points = slot.second;
        report.per_node.push_back(std::move(pn));
    }
}

std::vector<double> knn_baseline(const StationGraph& graph, const std::vector<double>& y_obs,
                                 const std::vector<double>& avail_mask,
                                 const std::vector<std::uint8_t>& observed, int frames, int k) {
    const int n = graph.size();
    if (k < 1) throw std::invalid_argument("knn_baseline: k must be >= 1");
    int n_obs = 0;
    for (int i = 0; i < n; ++i) n_obs += observed[i] ? 1 : 0;
    if (k > n_obs) throw std::invalid_argument("knn_baseline: k exceeds observed station count");

    const Matrix dist = pairwise_distances(graph.stations);

    // k nearest observed stations per target, fixed across frames.
    std::vector<std::vector<int>> neighbors(n);
    for (int i = 0; i < n; ++i) {
        std::vector<std::pair<double, int>> cand;
        for (int j = 0; j < n; ++j) {
            if (j == i || !observed[j]) continue;
            cand.push_back({dist(i, j), j});
        }
        std::sort(cand.begin(), cand.end());
        const int take = std::min<int>(k, static_cast<int>(cand.size()));
        for (int t = 0; t < take; ++t) neighbors[i].push_back(cand[t].second);
    }

    std::vector<double> pred(static_cast<std::size_t>(frames) * n, 0.0);
    for (int f = 0; f < frames; ++f) {
        const std::size_t row = static_cast<std::size_t>(f) * n;
        // Frame mean of observed values as the no-neighbor fallback.
        double mean = 0.0;
        int mean_count = 0;
        for (int j = 0; j < n; ++j) {
            if (observed[j] && avail_mask[row + j] > 0.0) {
                mean += y_obs[row + j];
                ++mean_count;
            }
        }
        mean = mean_count > 0 ? mean / mean_count : 0.0;

        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            int count = 0;
            for (int j : neighbors[i]) {
                if (avail_mask[row + j] > 0.0) {
                    acc += y_obs[row + j];
                    ++count;
                }
            }
            pred[row + i] = count > 0 ? acc / count : mean;
        }
    }
    return pred;
}

std::vector<double> mean_baseline(const std::vector<double>& y_obs,
                                  const std::vector<double>& avail_mask,
                                  const std::vector<std::uint8_t>& observed, int frames, int n) {
    std::vector<double> pred(static_cast<std::size_t>(frames) * n, 0.0);
    for (int f = 0; f < frames; ++f) {
        const std::size_t row = static_cast<std::size_t>(f) * n;
        double mean = 0.0;
        int count = 0;
        for (int j = 0; j < n; ++j) {
            if (observed[j] && avail_mask[row + j] > 0.0) {
                mean += y_obs[row + j];
                ++count;
            }
        }
        mean = count > 0 ? mean / count : 0.0;
        for (int i = 0; i < n; ++i) pred[row + i] = mean;
    }
    return pred;
}

const std::vector<ReferenceRow>& reference_table() {
    static const std::vector<ReferenceRow> rows = {
        {"KNN", 18.35, 0.50, 0.24},    {"KCN", 20.64, 0.62, 0.29},
        {"IGNNK", 23.35, 0.78, 0.31},  {"DualSTN", 22.77, 0.90, 0.32},
        {"INCREASE", 22.90, 1.07, 0.32}, {"KITS", 16.59, 0.39, 0.24},
        {"PGITS", 16.36, 0.37, 0.23},
    };
    return rows;
}

}  // namespace airkrig
