#include "airkrig/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "airkrig/rng.hpp"

namespace airkrig {

// ---- calendar ----

namespace {

// Hinnant civil-date algorithms.
std::int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2u) / 5u + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

}  // namespace

int month_of_epoch_hour(std::int64_t hour) {
    int y, m, d;
    civil_from_days(floor_div(hour, 24), y, m, d);
    return m;
}

std::int64_t parse_iso8601_hour(const std::string& ts, bool* ok) {
    int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
    char sep = 0;
    const int got = std::sscanf(ts.c_str(), "%d-%d-%d%c%d:%d:%d", &y, &mo, &d, &sep, &h, &mi, &s);
    const bool valid = got >= 5 && (sep == 'T' || sep == ' ') && mo >= 1 && mo <= 12 && d >= 1 &&
                       d <= 31 && h >= 0 && h <= 23;
    if (ok) *ok = valid;
    if (!valid) return 0;
    return days_from_civil(y, mo, d) * 24 + h;
}

std::string format_iso8601_hour(std::int64_t hour) {
    int y, m, d;
    const std::int64_t day = floor_div(hour, 24);
    civil_from_days(day, y, m, d);
    const int h = static_cast<int>(hour - day * 24);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:00:00", y, m, d, h);
    return buf;
}

// ---- observation IO ----

ObservationTable load_observations_csv(const std::string& path,
                                       const std::vector<std::string>& station_ids) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open observations file: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty observations file: " + path);

    std::map<std::string, int> station_index;
    for (std::size_t i = 0; i < station_ids.size(); ++i)
        station_index[station_ids[i]] = static_cast<int>(i);

    struct Cell {
        double pm25 = 0.0;
        bool available = false;
        double wind_u = 0.0;
        double wind_v = 0.0;
    };
    std::map<std::pair<std::int64_t, int>, Cell> cells;

    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string sid, ts, pm, wu, wv;
        if (!std::getline(ss, sid, ',') || !std::getline(ss, ts, ',') ||
            !std::getline(ss, pm, ',')) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": malformed row");
        }
        std::getline(ss, wu, ',');
        std::getline(ss, wv, ',');

        auto it = station_index.find(sid);
        if (it == station_index.end())
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": unknown station " + sid);
        bool ok = false;
        const std::int64_t hour = parse_iso8601_hour(ts, &ok);
        if (!ok)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad timestamp " + ts);

        Cell c;
        if (!pm.empty()) {
            try {
                c.pm25 = std::stod(pm);
            } catch (const std::exception&) {
                throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad pm25 value");
            }
            if (c.pm25 < 0.0)
                throw std::runtime_error(path + ":" + std::to_string(lineno) + ": negative pm25");
            c.available = true;
        }
        auto parse_wind = [&](const std::string& s) {
            if (s.empty()) return 0.0;
            try {
                return std::stod(s);
            } catch (const std::exception&) {
                throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad wind value");
            }
        };
        c.wind_u = parse_wind(wu);
        c.wind_v = parse_wind(wv);

        const auto key = std::make_pair(hour, it->second);
        if (!cells.emplace(key, c).second)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": duplicate cell for " +
                                     sid + " at " + ts);
    }

    ObservationTable t;
    t.station_ids = station_ids;
    for (const auto& [key, c] : cells) {
        if (t.hours.empty() || t.hours.back() != key.first) t.hours.push_back(key.first);
    }
    const int n = t.n_stations();
    const std::size_t total = static_cast<std::size_t>(t.n_hours()) * n;
    t.pm25.assign(total, 0.0);
    t.available.assign(total, 0);
    t.wind_u.assign(total, 0.0);
    t.wind_v.assign(total, 0.0);
    std::map<std::int64_t, int> hour_index;
    for (int i = 0; i < t.n_hours(); ++i) hour_index[t.hours[i]] = i;
    for (const auto& [key, c] : cells) {
        const std::size_t k = t.cell(hour_index[key.first], key.second);
        t.pm25[k] = c.pm25;
        t.available[k] = c.available ? 1 : 0;
        t.wind_u[k] = c.wind_u;
        t.wind_v[k] = c.wind_v;
    }
    return t;
}

void save_observations_csv(const std::string& path, const ObservationTable& table) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write observations file: " + path);
    out << "station_id,timestamp,pm25,wind_u,wind_v\n";
    char num[48];
    for (int h = 0; h < table.n_hours(); ++h) {
        const std::string ts = format_iso8601_hour(table.hours[h]);
        for (int i = 0; i < table.n_stations(); ++i) {
            const std::size_t k = table.cell(h, i);
            out << table.station_ids[i] << ',' << ts << ',';
            if (table.available[k]) {
                std::snprintf(num, sizeof(num), "%.6f", table.pm25[k]);
                out << num;
            }
            std::snprintf(num, sizeof(num), ",%.6f,%.6f", table.wind_u[k], table.wind_v[k]);
            out << num << '\n';
        }
    }
}

// ---- normalization and windows ----

NormStats fit_normalization(const ObservationTable& table, const std::vector<int>& hour_indices,
                            const std::vector<std::uint8_t>& node_observed) {
    double sum = 0.0, sumsq = 0.0;
    std::int64_t count = 0;
    for (int h : hour_indices) {
        for (int i = 0; i < table.n_stations(); ++i) {
            if (!node_observed[i]) continue;
            const std::size_t k = table.cell(h, i);
            if (!table.available[k]) continue;
            sum += table.pm25[k];
            sumsq += table.pm25[k] * table.pm25[k];
            ++count;
        }
    }
    NormStats s;
    if (count > 0) {
        s.mean = sum / count;
        s.std = std::sqrt(std::max(0.0, sumsq / count - s.mean * s.mean));
    }
    return s;
}

std::vector<WindowBatch> make_windows(const ObservationTable& table,
                                      const std::vector<int>& hour_indices, int t, int stride,
                                      const NormStats& stats,
                                      const std::vector<std::uint8_t>& node_visible,
                                      const std::vector<std::uint8_t>& node_scored) {
    if (t < 2) throw std::invalid_argument("make_windows: window length must be >= 2");
    if (stride < 1) throw std::invalid_argument("make_windows: stride must be >= 1");
    const int n = table.n_stations();
    if (static_cast<int>(node_visible.size()) != n || static_cast<int>(node_scored.size()) != n)
        throw std::invalid_argument("make_windows: node flag size mismatch");
    if (static_cast<int>(hour_indices.size()) < t)
        throw std::invalid_argument("make_windows: window longer than series");

    std::vector<WindowBatch> out;
    // Window only within contiguous hour runs; month splits create gaps.
    std::size_t run_start = 0;
    for (std::size_t e = 1; e <= hour_indices.size(); ++e) {
        const bool boundary = e == hour_indices.size() ||
                              table.hours[hour_indices[e]] != table.hours[hour_indices[e - 1]] + 1;
        if (!boundary) continue;
        const int run_len = static_cast<int>(e - run_start);
        for (int off = 0; off + t <= run_len; off += stride) {
            WindowBatch w;
            w.n_nodes = n;
            w.window = t;
            w.x.assign(static_cast<std::size_t>(t) * n, 0.0);
            w.wind_u.assign(w.x.size(), 0.0);
            w.wind_v.assign(w.x.size(), 0.0);
            w.mask.assign(w.x.size(), 0.0);
            w.loss_mask.assign(w.x.size(), 0.0);
            w.timestamps.resize(t);
            for (int f = 0; f < t; ++f) {
                const int h = hour_indices[run_start + off + f];
                w.timestamps[f] = table.hours[h];
                for (int i = 0; i < n; ++i) {
                    const std::size_t src = table.cell(h, i);
                    const std::size_t dst = static_cast<std::size_t>(f) * n + i;
                    w.wind_u[dst] = table.wind_u[src];
                    w.wind_v[dst] = table.wind_v[src];
                    const bool visible = node_visible[i] && table.available[src];
                    if (visible) {
                        w.x[dst] = stats.normalize(table.pm25[src]);
                        w.mask[dst] = 1.0;
                        if (node_scored[i]) w.loss_mask[dst] = 1.0;
                    }
                }
            }
            out.push_back(std::move(w));
        }
        run_start = e;
    }
    return out;
}

// ---- dataset assembly ----

namespace {

ObservationTable subset_stations(const ObservationTable& table, const std::vector<int>& keep) {
    ObservationTable t;
    t.hours = table.hours;
    for (int i : keep) t.station_ids.push_back(table.station_ids[i]);
    const int n = static_cast<int>(keep.size());
    const std::size_t total = static_cast<std::size_t>(t.n_hours()) * n;
    t.pm25.assign(total, 0.0);
    t.available.assign(total, 0);
    t.wind_u.assign(total, 0.0);
    t.wind_v.assign(total, 0.0);
    for (int h = 0; h < t.n_hours(); ++h) {
        for (int j = 0; j < n; ++j) {
            const std::size_t src = table.cell(h, keep[j]);
            const std::size_t dst = t.cell(h, j);
            t.pm25[dst] = table.pm25[src];
            t.available[dst] = table.available[src];
            t.wind_u[dst] = table.wind_u[src];
            t.wind_v[dst] = table.wind_v[src];
        }
    }
    return t;
}

std::vector<EvalWindow> attach_truth(std::vector<WindowBatch> windows,
                                     const ObservationTable& table,
                                     const std::vector<std::uint8_t>& node_target) {
    // Index windows back into the table by timestamp.
    std::map<std::int64_t, int> hour_index;
    for (int i = 0; i < table.n_hours(); ++i) hour_index[table.hours[i]] = i;
    std::vector<EvalWindow> out;
    out.reserve(windows.size());
    const int n = table.n_stations();
    for (auto& w : windows) {
        EvalWindow ew;
        ew.truth.assign(w.cells(), 0.0);
        ew.target_mask.assign(w.cells(), 0.0);
        for (int f = 0; f < w.window; ++f) {
            const int h = hour_index.at(w.timestamps[f]);
            for (int i = 0; i < n; ++i) {
                const std::size_t src = table.cell(h, i);
                const std::size_t dst = static_cast<std::size_t>(f) * n + i;
                ew.truth[dst] = table.pm25[src];
                if (node_target[i] && table.available[src]) ew.target_mask[dst] = 1.0;
            }
        }
        ew.batch = std::move(w);
        out.push_back(std::move(ew));
    }
    return out;
}

}  // namespace

Dataset build_dataset(const ObservationTable& table, const std::vector<Station>& stations,
                      const DatasetConfig& cfg) {
    if (cfg.alpha < 0.0 || cfg.alpha >= 1.0)
        throw std::invalid_argument("build_dataset: alpha must be in [0,1)");
    const int n = static_cast<int>(stations.size());
    if (n != table.n_stations()) throw std::invalid_argument("build_dataset: station count mismatch");
    for (int m : cfg.split.test_months)
        if (m < 1 || m > 12) throw std::invalid_argument("build_dataset: bad test month");

    Dataset ds;
    Rng root(cfg.seed);

    // Hidden kriging targets.
    const int n_hidden = static_cast<int>(std::llround(cfg.alpha * n));
    {
        std::vector<int> idx(n);
        for (int i = 0; i < n; ++i) idx[i] = i;
        Rng r = root.split(1);
        for (int i = n - 1; i > 0; --i) {
            const int j = static_cast<int>(r.next_below(static_cast<std::uint64_t>(i + 1)));
            std::swap(idx[i], idx[j]);
        }
        ds.hidden_nodes.assign(idx.begin(), idx.begin() + n_hidden);
        ds.observed_nodes.assign(idx.begin() + n_hidden, idx.end());
        std::sort(ds.hidden_nodes.begin(), ds.hidden_nodes.end());
        std::sort(ds.observed_nodes.begin(), ds.observed_nodes.end());
    }
    if (ds.observed_nodes.empty()) throw std::invalid_argument("build_dataset: no observed stations");

    std::vector<Station> observed_stations;
    for (int i : ds.observed_nodes) observed_stations.push_back(stations[i]);
    ds.observed_graph = build_station_graph(observed_stations, cfg.gamma, cfg.delta);
    ds.full_graph = build_station_graph(stations, cfg.gamma, cfg.delta);

    // Hour split by calendar month.
    std::vector<int> train_hours, test_hours;
    for (int h = 0; h < table.n_hours(); ++h) {
        const int m = month_of_epoch_hour(table.hours[h]);
        const bool is_test = std::find(cfg.split.test_months.begin(), cfg.split.test_months.end(),
                                       m) != cfg.split.test_months.end();
        (is_test ? test_hours : train_hours).push_back(h);
    }

    const int n_obs = static_cast<int>(ds.observed_nodes.size());
    ObservationTable table_obs = subset_stations(table, ds.observed_nodes);

    std::vector<std::uint8_t> all_obs(n_obs, 1);
    ds.stats = fit_normalization(table_obs, train_hours, all_obs);

    // Validation kriging targets among the observed stations.
    const int n_val = cfg.split.val_fraction > 0.0
                          ? static_cast<int>(std::ceil(cfg.split.val_fraction * n_obs - 1e-12))
                          : 0;
    {
        std::vector<int> idx(n_obs);
        for (int i = 0; i < n_obs; ++i) idx[i] = i;
        Rng r = root.split(2);
        for (int i = n_obs - 1; i > 0; --i) {
            const int j = static_cast<int>(r.next_below(static_cast<std::uint64_t>(i + 1)));
            std::swap(idx[i], idx[j]);
        }
        ds.val_nodes.assign(idx.begin(), idx.begin() + std::min(n_val, n_obs));
        std::sort(ds.val_nodes.begin(), ds.val_nodes.end());
    }

    std::vector<std::uint8_t> is_val(n_obs, 0);
    for (int i : ds.val_nodes) is_val[i] = 1;

    // Training windows: every observed station visible; validation stations
    // excluded from the supervised-loss index set.
    std::vector<std::uint8_t> scored(n_obs);
    for (int i = 0; i < n_obs; ++i) scored[i] = is_val[i] ? 0 : 1;
    ds.train_windows = make_windows(table_obs, train_hours, cfg.window, cfg.stride, ds.stats,
                                    all_obs, scored);

    // Validation windows: validation stations masked out of the input and
    // scored against their recorded values.
    std::vector<std::uint8_t> visible_no_val(n_obs);
    for (int i = 0; i < n_obs; ++i) visible_no_val[i] = is_val[i] ? 0 : 1;
    std::vector<std::uint8_t> none(n_obs, 0);
    if (!ds.val_nodes.empty()) {
        auto vw = make_windows(table_obs, train_hours, cfg.window, cfg.stride, ds.stats,
                               visible_no_val, none);
        ds.val_windows = attach_truth(std::move(vw), table_obs, is_val);
    }

    // Test windows: full station set, hidden stations masked and scored.
    if (!test_hours.empty() && static_cast<int>(test_hours.size()) >= cfg.window) {
        std::vector<std::uint8_t> visible_full(n, 0), hidden_full(n, 0), none_full(n, 0);
        for (int i : ds.observed_nodes) visible_full[i] = 1;
        for (int i : ds.hidden_nodes) hidden_full[i] = 1;
        auto tw = make_windows(table, test_hours, cfg.window, cfg.stride, ds.stats, visible_full,
                               none_full);
        ds.test_windows = attach_truth(std::move(tw), table, hidden_full);
    }

    return ds;
}

// ---- synthetic generation ----

ObservationTable generate_synthetic(const StationGraph& graph, const SyntheticConfig& cfg,
                                    std::uint64_t seed, std::int64_t start_hour,
                                    ObservationTable* ground_truth) {
    const int n = graph.size();
    if (n < 2) throw std::invalid_argument("generate_synthetic: need at least 2 nodes");
    if (cfg.hours < 0) throw std::invalid_argument("generate_synthetic: negative hours");
    if (cfg.substeps_per_hour < 1)
        throw std::invalid_argument("generate_synthetic: substeps must be >= 1");

    Rng root(seed);
    Rng init_rng = root.split(1);
    Rng wind_rng = root.split(2);
    Rng noise_rng = root.split(3);

    Matrix w_diff = cfg.diffusion_k > 0.0
                        ? diffusion_adjacency(graph.adjacency_distance, cfg.diffusion_k)
                        : Matrix(n, n);

    // Local east/north unit directions per edge for projecting wind.
    struct Edge {
        int i, j;
        double ex, ey, weight;
    };
    std::vector<Edge> edges;
    constexpr double kDegToRad = 0.017453292519943295;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            if (i == j || graph.adjacency_distance(i, j) <= 0.0) continue;
            const double mean_lat = 0.5 * (graph.stations[i].lat + graph.stations[j].lat);
            const double dx = (graph.stations[j].lon - graph.stations[i].lon) *
                              std::cos(mean_lat * kDegToRad);
            const double dy = graph.stations[j].lat - graph.stations[i].lat;
            const double norm = std::sqrt(dx * dx + dy * dy);
            if (norm < 1e-12) continue;  // co-located pair, no direction
            edges.push_back({i, j, dx / norm, dy / norm, graph.adjacency_distance(i, j)});
        }
    }

    std::vector<double> phase_u(n), phase_v(n);
    for (int i = 0; i < n; ++i) {
        phase_u[i] = wind_rng.next_uniform(0.0, 6.283185307179586);
        phase_v[i] = wind_rng.next_uniform(0.0, 6.283185307179586);
    }

    std::vector<double> x(n);
    for (int i = 0; i < n; ++i)
        x[i] = cfg.base_level + cfg.init_spread * init_rng.next_double();

    ObservationTable obs;
    for (const auto& s : graph.stations) obs.station_ids.push_back(s.id);
    const std::size_t total = static_cast<std::size_t>(cfg.hours) * n;
    obs.pm25.assign(total, 0.0);
    obs.available.assign(total, 1);
    obs.wind_u.assign(total, 0.0);
    obs.wind_v.assign(total, 0.0);
    obs.hours.resize(cfg.hours);
    ObservationTable truth = obs;

    const double two_pi = 6.283185307179586;
    std::vector<double> wu(n), wv(n);
    for (int t = 0; t < cfg.hours; ++t) {
        obs.hours[t] = start_hour + t;
        truth.hours[t] = start_hour + t;

        for (int i = 0; i < n; ++i) {
            const double arg = cfg.wind_period_hours > 0.0
                                   ? two_pi * t / cfg.wind_period_hours
                                   : 0.0;
            wu[i] = cfg.wind_amplitude * std::sin(arg + phase_u[i]) +
                    cfg.wind_noise * wind_rng.next_normal();
            wv[i] = cfg.wind_amplitude * std::sin(arg + phase_v[i]) +
                    cfg.wind_noise * wind_rng.next_normal();
        }

        // Record state at the start of hour t, then advance one hour.
        for (int i = 0; i < n; ++i) {
            const std::size_t k = obs.cell(t, i);
            truth.pm25[k] = x[i];
            obs.pm25[k] = std::max(0.0, x[i] + cfg.obs_noise * noise_rng.next_normal());
            obs.wind_u[k] = wu[i];
            obs.wind_v[k] = wv[i];
            truth.wind_u[k] = wu[i];
            truth.wind_v[k] = wv[i];
        }

        Matrix rates(n, n);
        for (const auto& e : edges) {
            const double proj = 0.5 * (wu[e.i] + wu[e.j]) * e.ex + 0.5 * (wv[e.i] + wv[e.j]) * e.ey;
            if (proj > 0.0) rates(e.i, e.j) = cfg.advection_scale * e.weight * proj;
        }
        const Matrix w_flux = advection_flux_operator(rates);
        auto traj = integrate_advection_diffusion(x, w_diff, w_flux, cfg.substeps_per_hour,
                                                  1.0 / cfg.substeps_per_hour);
        x = traj.back();
    }

    if (ground_truth) *ground_truth = std::move(truth);
    return obs;
}

}  // namespace airkrig
