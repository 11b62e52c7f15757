#include "airkrig/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "airkrig/rng.hpp"

namespace airkrig {

namespace {

constexpr double kEarthRadiusKm = 6371.0088;
constexpr double kDegToRad = 0.017453292519943295;

void validate_station(const Station& s) {
    if (s.lat < -90.0 || s.lat > 90.0)
        throw std::invalid_argument("station " + s.id + ": latitude out of range");
    if (s.lon < -180.0 || s.lon > 180.0)
        throw std::invalid_argument("station " + s.id + ": longitude out of range");
}

double haversine_km(const Station& a, const Station& b) {
    const double lat1 = a.lat * kDegToRad;
    const double lat2 = b.lat * kDegToRad;
    const double dlat = (b.lat - a.lat) * kDegToRad;
    const double dlon = (b.lon - a.lon) * kDegToRad;
    const double s1 = std::sin(dlat / 2.0);
    const double s2 = std::sin(dlon / 2.0);
    const double h = s1 * s1 + std::cos(lat1) * std::cos(lat2) * s2 * s2;
    return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(std::min(1.0, h)));
}

}  // namespace

Matrix pairwise_distances(const std::vector<Station>& stations) {
    const int n = static_cast<int>(stations.size());
    if (n < 2) throw std::invalid_argument("pairwise_distances: need at least 2 stations");
    std::set<std::string> ids;
    for (const auto& s : stations) {
        validate_station(s);
        if (!ids.insert(s.id).second)
            throw std::invalid_argument("duplicate station id: " + s.id);
    }
    Matrix d(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double km = haversine_km(stations[i], stations[j]);
            d(i, j) = km;
            d(j, i) = km;
        }
    }
    return d;
}

Matrix gaussian_kernel_adjacency(const Matrix& dist_km, double gamma, double delta) {
    if (!dist_km.square()) throw std::invalid_argument("gaussian_kernel_adjacency: non-square input");
    if (gamma <= 0.0) throw std::invalid_argument("gaussian_kernel_adjacency: gamma must be > 0");
    if (delta <= 0.0 || delta > 1.0)
        throw std::invalid_argument("gaussian_kernel_adjacency: delta must be in (0,1]");
    const int n = dist_km.rows();
    double dmax = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) dmax = std::max(dmax, dist_km(i, j));

    Matrix w(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            const double dn = dmax > 0.0 ? dist_km(i, j) / dmax : 0.0;
            if (dn <= delta) w(i, j) = std::exp(-(dn * dn) / gamma);
        }
    }
    return w;
}

double default_gamma(const Matrix& dist_km) {
    const int n = dist_km.rows();
    double dmax = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) dmax = std::max(dmax, dist_km(i, j));
    if (dmax <= 0.0) return 1.0;

    // Population std over off-diagonal normalized distances.
    double sum = 0.0, sumsq = 0.0;
    int count = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j) continue;
            const double dn = dist_km(i, j) / dmax;
            sum += dn;
            sumsq += dn * dn;
            ++count;
        }
    }
    const double mean = sum / count;
    const double var = std::max(0.0, sumsq / count - mean * mean);
    const double sd = std::sqrt(var);
    return sd > 1e-12 ? sd : 1.0;
}

StationGraph build_station_graph(const std::vector<Station>& stations, double gamma, double delta) {
    StationGraph g;
    g.stations = stations;
    g.n_real = static_cast<int>(stations.size());
    g.n_virtual = 0;
    for (auto& s : g.stations) s.is_virtual = false;
    if (g.n_real >= 2) {
        Matrix dist = pairwise_distances(g.stations);
        const double gam = gamma > 0.0 ? gamma : default_gamma(dist);
        g.adjacency_distance = gaussian_kernel_adjacency(dist, gam, delta);
    } else {
        g.adjacency_distance = Matrix(g.n_real, g.n_real);
    }
    return g;
}

StationGraph insert_virtual_nodes(const StationGraph& graph, int m, std::uint64_t rng_seed) {
    if (m < 0) throw std::invalid_argument("insert_virtual_nodes: m must be >= 0");
    if (graph.n_real < 1) throw std::invalid_argument("insert_virtual_nodes: graph has no real nodes");
    if (m == 0) return graph;

    const int n_old = graph.size();
    const int n_new = n_old + m;
    StationGraph g;
    g.stations = graph.stations;
    g.n_real = graph.n_real;
    g.n_virtual = graph.n_virtual + m;
    g.virtual_anchor = graph.virtual_anchor;
    g.adjacency_distance = Matrix(n_new, n_new);
    for (int i = 0; i < n_old; ++i)
        for (int j = 0; j < n_old; ++j) g.adjacency_distance(i, j) = graph.adjacency_distance(i, j);

    Rng rng(rng_seed);
    for (int v = 0; v < m; ++v) {
        const int vi = n_old + v;
        const int anchor = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(graph.n_real)));
        Station s = graph.stations[anchor];
        s.id = "virtual_" + std::to_string(graph.n_virtual + v);
        s.is_virtual = true;
        g.stations.push_back(s);
        g.virtual_anchor.push_back(anchor);

        g.adjacency_distance(vi, anchor) = 1.0;
        g.adjacency_distance(anchor, vi) = 1.0;

        // One connection probability per virtual node, Bernoulli per real
        // neighbor of the anchor.
        const double p = rng.next_double();
        for (int j = 0; j < graph.n_real; ++j) {
            if (j == anchor || graph.adjacency_distance(anchor, j) <= 0.0) continue;
            if (rng.next_double() < p) {
                g.adjacency_distance(vi, j) = 1.0;
                g.adjacency_distance(j, vi) = 1.0;
            }
        }
    }
    return g;
}

int virtual_count_for_alpha(int n_observed, double alpha) {
    if (alpha < 0.0 || alpha >= 1.0)
        throw std::invalid_argument("virtual_count_for_alpha: alpha must be in [0,1)");
    return static_cast<int>(std::ceil(alpha / (1.0 - alpha) * n_observed - 1e-12));
}

std::pair<NodeMask, NodeMask> make_training_masks(const StationGraph& graph, double alpha,
                                                  std::uint64_t rng_seed) {
    if (alpha < 0.0 || alpha >= 1.0)
        throw std::invalid_argument("make_training_masks: alpha must be in [0,1)");
    const int n = graph.size();
    NodeMask mask, inv;
    mask.values.assign(n, 0);
    inv.values.assign(n, 0);
    for (int i = 0; i < graph.n_real; ++i) mask.values[i] = 1;

    // Virtual nodes already account for part (usually all) of the unobserved
    // fraction; hide extra real nodes only if they fall short of alpha.
    const int target_unobserved = static_cast<int>(std::llround(alpha * n));
    int to_hide = target_unobserved - graph.n_virtual;
    if (to_hide > 0) {
        Rng rng(rng_seed);
        std::vector<int> real_idx(graph.n_real);
        for (int i = 0; i < graph.n_real; ++i) real_idx[i] = i;
        for (int i = graph.n_real - 1; i > 0; --i) {
            const int j = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(i + 1)));
            std::swap(real_idx[i], real_idx[j]);
        }
        for (int k = 0; k < std::min(to_hide, graph.n_real); ++k) mask.values[real_idx[k]] = 0;
    }

    for (int i = 0; i < n; ++i) inv.values[i] = mask.values[i] ? 0 : 1;
    return {mask, inv};
}

std::vector<Station> load_stations_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open stations file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty stations file: " + path);
    std::vector<Station> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string id, lat, lon;
        if (!std::getline(ss, id, ',') || !std::getline(ss, lat, ',') || !std::getline(ss, lon, ','))
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed station row");
        Station s;
        s.id = id;
        try {
            s.lat = std::stod(lat);
            s.lon = std::stod(lon);
        } catch (const std::exception&) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad coordinate");
        }
        validate_station(s);
        out.push_back(std::move(s));
    }
    return out;
}

void save_stations_csv(const std::string& path, const std::vector<Station>& stations) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write stations file: " + path);
    out << "station_id,latitude,longitude\n";
    char buf[64];
    for (const auto& s : stations) {
        std::snprintf(buf, sizeof(buf), "%.8f,%.8f", s.lat, s.lon);
        out << s.id << ',' << buf << '\n';
    }
}

}  // namespace airkrig
