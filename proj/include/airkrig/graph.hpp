#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "airkrig/matrix.hpp"

namespace airkrig {

/// A monitoring site. Virtual stations are label-free placeholders inserted
/// during training to mimic unobserved sensors; they inherit the coordinates
/// of the real station they were anchored to.
struct Station {
    std::string id;
    double lat = 0.0;  ///< degrees, [-90, 90]
    double lon = 0.0;  ///< degrees, [-180, 180]
    bool is_virtual = false;
};

/// Sensor-network graph over real + virtual stations.
///
/// Node order is stable: real stations first (index 0..n_real-1), virtual
/// stations appended. All matrices in the library are indexed in this order.
struct StationGraph {
    std::vector<Station> stations;
    int n_real = 0;
    int n_virtual = 0;
    /// Distance-kernel adjacency, symmetric, zero diagonal, entries in [0,1].
    Matrix adjacency_distance;
    /// For each virtual station (in append order), the index of the real
    /// station it was anchored to; virtual stations take their wind from it.
    std::vector<int> virtual_anchor;

    int size() const { return n_real + n_virtual; }
};

/// Per-window node visibility mask; 1 = value visible to the model.
struct NodeMask {
    std::vector<std::uint8_t> values;

    int count_ones() const {
        int c = 0;
        for (auto v : values) c += v ? 1 : 0;
        return c;
    }
};

/// Great-circle distances in km between all station pairs (haversine).
/// Throws std::invalid_argument for fewer than 2 stations or coordinates
/// outside their valid ranges.
Matrix pairwise_distances(const std::vector<Station>& stations);

/// Thresholded Gaussian kernel adjacency. Distances are normalized by the
/// maximum pairwise distance first, so `delta` and `gamma` operate on [0,1]
/// values; entries with normalized distance above `delta` are 0 and the
/// diagonal is forced to 0.
Matrix gaussian_kernel_adjacency(const Matrix& dist_km, double gamma, double delta);

/// Kernel width default: standard deviation of the normalized off-diagonal
/// pairwise distances.
double default_gamma(const Matrix& dist_km);

/// Builds the real-station graph from coordinates with the kernel adjacency.
/// gamma <= 0 selects the default (distance standard deviation).
StationGraph build_station_graph(const std::vector<Station>& stations,
                                 double gamma = 0.0, double delta = 0.1);

/// Appends `m` virtual stations. Each one connects to a uniformly chosen real
/// anchor with weight 1 and, with a single probability p ~ U[0,1] drawn per
/// virtual node, independently to each real neighbor of that anchor (also
/// weight 1). Deterministic given rng_seed.
StationGraph insert_virtual_nodes(const StationGraph& graph, int m, std::uint64_t rng_seed);

/// Builds the training visibility mask and its inverse. Real stations start
/// observed (1) and virtual stations are always hidden (0); when the virtual
/// count falls short of the target unobserved fraction `alpha`, additional
/// real stations are hidden at random to reach it.
std::pair<NodeMask, NodeMask> make_training_masks(const StationGraph& graph, double alpha,
                                                  std::uint64_t rng_seed);

/// Number of virtual nodes needed so a training graph over n_observed real
/// stations matches the inference graph at missing rate alpha.
int virtual_count_for_alpha(int n_observed, double alpha);

/// Reads station metadata CSV: header `station_id,latitude,longitude`.
std::vector<Station> load_stations_csv(const std::string& path);

/// Writes station metadata in the same schema.
void save_stations_csv(const std::string& path, const std::vector<Station>& stations);

}  // namespace airkrig
