#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "airkrig/graph.hpp"
#include "airkrig/rng.hpp"

using namespace airkrig;

namespace {

std::vector<Station> beijing_like(int n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Station> s(n);
    for (int i = 0; i < n; ++i) {
        s[i].id = "s" + std::to_string(i);
        s[i].lat = 39.8 + rng.next_uniform(0.0, 0.5);
        s[i].lon = 116.2 + rng.next_uniform(0.0, 0.6);
    }
    return s;
}

// Independent great-circle oracle: spherical law of cosines.
double law_of_cosines_km(const Station& a, const Station& b) {
    constexpr double rad = 0.017453292519943295;
    constexpr double R = 6371.0088;
    const double c = std::sin(a.lat * rad) * std::sin(b.lat * rad) +
                     std::cos(a.lat * rad) * std::cos(b.lat * rad) *
                         std::cos((b.lon - a.lon) * rad);
    return R * std::acos(std::min(1.0, std::max(-1.0, c)));
}

}  // namespace

TEST_CASE("pairwise distances: zero for identical coordinates, symmetric") {
    std::vector<Station> s = {{"a", 39.9, 116.4, false}, {"b", 39.9, 116.4, false},
                              {"c", 40.1, 116.2, false}};
    const Matrix d = pairwise_distances(s);
    CHECK(d(0, 1) == doctest::Approx(0.0));
    for (int i = 0; i < 3; ++i) {
        CHECK(d(i, i) == 0.0);
        for (int j = 0; j < 3; ++j) CHECK(d(i, j) == d(j, i));
    }
}

TEST_CASE("pairwise distances match an independent great-circle oracle") {
    std::vector<Station> s = {{"a", 39.9, 116.4, false}, {"b", 39.9, 116.5, false}};
    const Matrix d = pairwise_distances(s);
    const double expect = law_of_cosines_km(s[0], s[1]);
    CHECK(d(0, 1) == doctest::Approx(expect).epsilon(1e-9));
    CHECK(d(0, 1) > 8.0);  // ~8.5 km for 0.1 deg longitude at this latitude
    CHECK(d(0, 1) < 9.0);

    // The law-of-cosines oracle carries ~1e-4 km rounding noise near zero
    // distance, so compare with a small absolute floor.
    auto stations = beijing_like(12, 99);
    const Matrix dd = pairwise_distances(stations);
    for (int i = 0; i < 12; ++i)
        for (int j = 0; j < 12; ++j) {
            const double oracle = law_of_cosines_km(stations[i], stations[j]);
            CHECK(std::abs(dd(i, j) - oracle) < std::max(1e-3, 1e-7 * oracle));
        }
}

TEST_CASE("pairwise distances input validation") {
    CHECK_THROWS_AS(pairwise_distances({{"a", 0, 0, false}}), std::invalid_argument);
    CHECK_THROWS_AS(pairwise_distances({{"a", 95.0, 0, false}, {"b", 0, 0, false}}),
                    std::invalid_argument);
    CHECK_THROWS_AS(pairwise_distances({{"a", 0, 0, false}, {"a", 1, 1, false}}),
                    std::invalid_argument);
}

TEST_CASE("gaussian kernel: duplicate location weight 1, threshold zeroes, hand value") {
    Matrix d(3, 3);
    d(0, 1) = d(1, 0) = 5.0;
    d(0, 2) = d(2, 0) = 100.0;
    d(1, 2) = d(2, 1) = 100.0;
    // normalized: 0.05 and 1.0
    const Matrix w = gaussian_kernel_adjacency(d, 0.01, 0.1);
    CHECK(w(0, 1) == doctest::Approx(std::exp(-0.25)).epsilon(1e-12));
    CHECK(w(0, 1) == doctest::Approx(0.7788007831).epsilon(1e-8));
    CHECK(w(0, 2) == 0.0);  // above threshold
    for (int i = 0; i < 3; ++i) CHECK(w(i, i) == 0.0);

    Matrix dup(2, 2);  // identical locations -> normalized distance 0
    const Matrix w2 = gaussian_kernel_adjacency(dup, 0.5, 0.1);
    CHECK(w2(0, 1) == doctest::Approx(1.0));

    CHECK_THROWS_AS(gaussian_kernel_adjacency(d, 0.0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(gaussian_kernel_adjacency(Matrix(2, 3), 1.0, 0.1), std::invalid_argument);
}

TEST_CASE("graph adjacency invariants: symmetric, zero diagonal, entries in [0,1]") {
    auto g = build_station_graph(beijing_like(20, 3));
    for (int i = 0; i < 20; ++i) {
        CHECK(g.adjacency_distance(i, i) == 0.0);
        for (int j = 0; j < 20; ++j) {
            CHECK(g.adjacency_distance(i, j) == g.adjacency_distance(j, i));
            CHECK(g.adjacency_distance(i, j) >= 0.0);
            CHECK(g.adjacency_distance(i, j) <= 1.0);
        }
    }
}

TEST_CASE("insert_virtual_nodes: identity for m=0, single-node anchor only") {
    auto g = build_station_graph(beijing_like(5, 4));
    auto same = insert_virtual_nodes(g, 0, 1);
    CHECK(same.size() == 5);
    CHECK(same.adjacency_distance.data() == g.adjacency_distance.data());

    StationGraph one;
    one.stations = {{"only", 39.9, 116.4, false}};
    one.n_real = 1;
    one.adjacency_distance = Matrix(1, 1);
    auto aug = insert_virtual_nodes(one, 1, 7);
    CHECK(aug.size() == 2);
    CHECK(aug.adjacency_distance(1, 0) == 1.0);
    CHECK(aug.adjacency_distance(0, 1) == 1.0);
    CHECK(aug.stations[1].is_virtual);
    CHECK(aug.stations[1].lat == one.stations[0].lat);

    CHECK_THROWS_AS(insert_virtual_nodes(g, -1, 1), std::invalid_argument);
}

TEST_CASE("insert_virtual_nodes: degree bounds and anchor-neighborhood containment") {
    auto g = build_station_graph(beijing_like(10, 5));
    auto aug = insert_virtual_nodes(g, 5, 42);
    CHECK(aug.n_real == 10);
    CHECK(aug.n_virtual == 5);
    REQUIRE(aug.virtual_anchor.size() == 5);

    for (int v = 0; v < 5; ++v) {
        const int vi = 10 + v;
        const int anchor = aug.virtual_anchor[v];
        int degree = 0;
        for (int j = 0; j < aug.size(); ++j)
            if (aug.adjacency_distance(vi, j) > 0.0) ++degree;
        int anchor_degree = 0;
        for (int j = 0; j < 10; ++j)
            if (g.adjacency_distance(anchor, j) > 0.0) ++anchor_degree;
        CHECK(degree >= 1);
        CHECK(degree <= 1 + anchor_degree);
        // every link lands on the anchor or one of its real neighbors
        for (int j = 0; j < aug.size(); ++j) {
            if (aug.adjacency_distance(vi, j) <= 0.0 || j == anchor) continue;
            CHECK(j < 10);
            CHECK(g.adjacency_distance(anchor, j) > 0.0);
        }
    }
}

TEST_CASE("insert_virtual_nodes is bit-identical under a fixed seed") {
    auto g = build_station_graph(beijing_like(12, 6));
    auto a = insert_virtual_nodes(g, 6, 123);
    auto b = insert_virtual_nodes(g, 6, 123);
    CHECK(a.adjacency_distance.data() == b.adjacency_distance.data());
    CHECK(a.virtual_anchor == b.virtual_anchor);
    auto c = insert_virtual_nodes(g, 6, 124);
    CHECK(a.adjacency_distance.data() != c.adjacency_distance.data());
}

TEST_CASE("training masks: complementarity and virtual-node zeros") {
    auto g = build_station_graph(beijing_like(36, 8));
    auto aug = insert_virtual_nodes(g, 36, 9);
    auto [mask, inv] = make_training_masks(aug, 0.5, 10);
    REQUIRE(mask.values.size() == 72);
    CHECK(mask.count_ones() == 36);
    CHECK(inv.count_ones() == 36);
    for (int i = 0; i < 72; ++i) {
        CHECK(mask.values[i] + inv.values[i] == 1);       // complementarity, exact
        CHECK((mask.values[i] & inv.values[i]) == 0);     // m AND inverse(m) = 0
        if (i >= 36) CHECK(mask.values[i] == 0);
    }
}

TEST_CASE("training masks: alpha=0 with no virtual nodes is all ones") {
    auto g = build_station_graph(beijing_like(7, 11));
    auto [mask, inv] = make_training_masks(g, 0.0, 1);
    CHECK(mask.count_ones() == 7);
    CHECK(inv.count_ones() == 0);
    CHECK_THROWS_AS(make_training_masks(g, 1.0, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_training_masks(g, -0.1, 1), std::invalid_argument);
}

TEST_CASE("training masks hide extra real nodes when virtual count falls short") {
    auto g = build_station_graph(beijing_like(36, 12));
    auto [mask, inv] = make_training_masks(g, 0.5, 5);  // no virtual nodes at all
    CHECK(mask.count_ones() == 18);
    auto [mask2, inv2] = make_training_masks(g, 0.5, 5);
    CHECK(mask.values == mask2.values);  // seeded determinism
}

TEST_CASE("virtual_count_for_alpha matches the inference-graph target") {
    CHECK(virtual_count_for_alpha(18, 0.5) == 18);
    CHECK(virtual_count_for_alpha(36, 0.5) == 36);
    CHECK(virtual_count_for_alpha(10, 0.3) == 5);   // ceil(4.2857)
    CHECK(virtual_count_for_alpha(10, 0.0) == 0);
    CHECK_THROWS_AS(virtual_count_for_alpha(10, 1.0), std::invalid_argument);
}

TEST_CASE("stations CSV round trip and error reporting") {
    const char* path = "test_stations_tmp.csv";
    {
        std::ofstream out(path);
        out << "station_id,latitude,longitude\n";
        out << "a,39.9,116.4\n";
        out << "b,40.05,116.32\n";
    }
    auto s = load_stations_csv(path);
    REQUIRE(s.size() == 2);
    CHECK(s[0].id == "a");
    CHECK(s[1].lat == doctest::Approx(40.05));

    save_stations_csv("test_stations_tmp2.csv", s);
    auto s2 = load_stations_csv("test_stations_tmp2.csv");
    REQUIRE(s2.size() == 2);
    CHECK(s2[1].lon == doctest::Approx(116.32).epsilon(1e-9));

    {
        std::ofstream out(path);
        out << "station_id,latitude,longitude\n";
        out << "a,not_a_number,116.4\n";
    }
    CHECK_THROWS_WITH_AS(load_stations_csv(path), doctest::Contains(":2"), std::runtime_error);
    std::remove(path);
    std::remove("test_stations_tmp2.csv");
}
