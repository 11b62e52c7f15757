#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "airkrig/graph.hpp"
#include "airkrig/model.hpp"

namespace airkrig {

/// Hourly observation grid over a station set. Values are stored
/// station-major is avoided: index (hour, station) = hour * n_stations + i.
/// Missing pm25 cells carry 0 in `pm25` and 0 in `available`.
struct ObservationTable {
    std::vector<std::string> station_ids;
    std::vector<std::int64_t> hours;  ///< hours since epoch, strictly increasing
    std::vector<double> pm25;
    std::vector<std::uint8_t> available;
    std::vector<double> wind_u;
    std::vector<double> wind_v;

    int n_stations() const { return static_cast<int>(station_ids.size()); }
    int n_hours() const { return static_cast<int>(hours.size()); }
    std::size_t cell(int hour_idx, int station_idx) const {
        return static_cast<std::size_t>(hour_idx) * station_ids.size() + station_idx;
    }
};

/// Test-period selection by calendar month plus the validation-node fraction.
struct SplitSpec {
    std::vector<int> test_months = {3, 6, 9, 12};
    double val_fraction = 0.1;
};

/// z-score statistics fitted on training-split observed values only.
struct NormStats {
    double mean = 0.0;
    double std = 1.0;

    double normalize(double v) const { return (v - mean) / (std > 1e-8 ? std : 1e-8); }
    double denormalize(double v) const { return v * (std > 1e-8 ? std : 1e-8) + mean; }
};

/// Observation CSV: header `station_id,timestamp,pm25,wind_u,wind_v`,
/// ISO-8601 timestamps, blank pm25 = missing. Rows may arrive in any order;
/// the grid is built over the union of hours. Malformed rows and unknown
/// stations raise errors with the line number.
ObservationTable load_observations_csv(const std::string& path,
                                       const std::vector<std::string>& station_ids);

void save_observations_csv(const std::string& path, const ObservationTable& table);

/// Calendar helpers (civil-from-days arithmetic on epoch hours).
int month_of_epoch_hour(std::int64_t hour);
std::int64_t parse_iso8601_hour(const std::string& ts, bool* ok);
std::string format_iso8601_hour(std::int64_t hour);

NormStats fit_normalization(const ObservationTable& table, const std::vector<int>& hour_indices,
                            const std::vector<std::uint8_t>& node_observed);

/// Chops a contiguous hour-index range into windows of length t (stride
/// defaults to t: non-overlapping). Values are normalized, masked entries
/// forced to 0. `node_visible` marks stations whose data the model may see;
/// `node_scored` marks stations counted by the supervised loss.
std::vector<WindowBatch> make_windows(const ObservationTable& table,
                                      const std::vector<int>& hour_indices, int t, int stride,
                                      const NormStats& stats,
                                      const std::vector<std::uint8_t>& node_visible,
                                      const std::vector<std::uint8_t>& node_scored);

/// A window paired with raw-unit ground truth for scoring hidden nodes.
struct EvalWindow {
    WindowBatch batch;
    std::vector<double> truth;        ///< raw units, T x n
    std::vector<double> target_mask;  ///< 1 = entry scored (hidden node, truth present)
};

/// Everything the trainer and evaluator need, derived deterministically from
/// one observation table, a station set, alpha and a seed.
struct Dataset {
    StationGraph observed_graph;   ///< kernel graph over observed stations only
    StationGraph full_graph;       ///< kernel graph over every real station
    std::vector<int> observed_nodes;   ///< indices into the full station list
    std::vector<int> hidden_nodes;     ///< kriging targets, disjoint from observed
    std::vector<int> val_nodes;        ///< indices (into observed station list) of validation targets
    NormStats stats;
    std::vector<WindowBatch> train_windows;  ///< over observed stations
    std::vector<EvalWindow> val_windows;     ///< over observed stations, val nodes hidden
    std::vector<EvalWindow> test_windows;    ///< over all stations, hidden nodes scored
};

struct DatasetConfig {
    double alpha = 0.5;
    int window = 24;
    int stride = 24;
    double gamma = 0.0;  ///< <=0 selects the distance-std default
    double delta = 0.1;
    SplitSpec split;
    std::uint64_t seed = 1;
};

/// Builds the full training/validation/test layout:
/// - hides round(alpha * n) stations as test kriging targets (seeded),
/// - splits hours into train (non-test months) and test (test months),
/// - fits normalization on train-hours x observed-stations values,
/// - holds out ceil(val_fraction * observed) stations as validation targets.
Dataset build_dataset(const ObservationTable& table, const std::vector<Station>& stations,
                      const DatasetConfig& cfg);

/// Synthetic data generation settings; the defaults give a stable,
/// spatially structured advection-diffusion system.
struct SyntheticConfig {
    int hours = 2000;
    double diffusion_k = 0.05;
    double advection_scale = 0.35;  ///< edge flow rate per unit projected wind
    double wind_amplitude = 3.0;    ///< m/s
    double wind_period_hours = 160.0;
    double wind_noise = 0.3;
    double obs_noise = 1.0;         ///< additive measurement noise, ug/m3
    int substeps_per_hour = 10;
    double base_level = 35.0;
    double init_spread = 30.0;
};

/// Simulates hourly concentrations on the station graph with the flux-form
/// advection operator and the kernel diffusion operator. Returns the noisy
/// observation table; `ground_truth` (if non-null) receives the clean twin.
ObservationTable generate_synthetic(const StationGraph& graph, const SyntheticConfig& cfg,
                                    std::uint64_t seed, std::int64_t start_hour,
                                    ObservationTable* ground_truth);

}  // namespace airkrig
