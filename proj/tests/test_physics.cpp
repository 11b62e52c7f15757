#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "airkrig/physics.hpp"
#include "airkrig/rng.hpp"
#include "test_helpers.hpp"

using namespace airkrig;
using airkrig::test::finite_difference_check;

namespace {

Matrix random_symmetric_adjacency(int n, std::uint64_t seed, double density = 0.7) {
    Rng rng(seed);
    Matrix w(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (rng.next_double() < density) w(i, j) = w(j, i) = rng.next_uniform(0.1, 1.0);
    return w;
}

Eigen::MatrixXd to_eigen(const Matrix& m) {
    Eigen::MatrixXd e(m.rows(), m.cols());
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
    return e;
}

double total(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
}

}  // namespace

TEST_CASE("diffusion operator: two-node hand value") {
    Matrix w(2, 2);
    w(0, 1) = w(1, 0) = 1.0;
    const Matrix d = diffusion_adjacency(w, 0.1);
    CHECK(d(0, 0) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(d(0, 1) == doctest::Approx(-0.1).epsilon(1e-12));
    CHECK(d(1, 0) == doctest::Approx(-0.1).epsilon(1e-12));
    CHECK(d(1, 1) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("diffusion operator: empty graph gives K * I (isolated-node convention)") {
    const Matrix d = diffusion_adjacency(Matrix(3, 3), 0.1);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(d(i, j) == doctest::Approx(i == j ? 0.1 : 0.0));
    CHECK_THROWS_AS(diffusion_adjacency(Matrix(2, 3), 0.1), std::invalid_argument);
    CHECK_THROWS_AS(diffusion_adjacency(Matrix(2, 2), 0.0), std::invalid_argument);
}

TEST_CASE("diffusion operator: symmetric, PSD, spectrum in [0, 2K] (eigensolver oracle)") {
    const double k = 0.1;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const int n = 2 + static_cast<int>(seed % 5);  // up to 6 nodes
        const Matrix w = random_symmetric_adjacency(n, seed);
        const Matrix d = diffusion_adjacency(w, k);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) CHECK(d(i, j) == doctest::Approx(d(j, i)).epsilon(1e-12));

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen(d));
        REQUIRE(es.info() == Eigen::Success);
        for (int i = 0; i < n; ++i) {
            CHECK(es.eigenvalues()[i] >= -1e-9);
            CHECK(es.eigenvalues()[i] <= 2.0 * k + 1e-9);
        }
    }
}

TEST_CASE("diffusion operator: zero row sums on degree-regular graphs") {
    // 4-cycle, complete K4, and a single edge are degree-regular; the
    // normalized Laplacian has exactly zero row sums there.
    auto check_rows = [](const Matrix& w) {
        const Matrix d = diffusion_adjacency(w, 0.1);
        for (int i = 0; i < d.rows(); ++i) {
            double s = 0.0;
            for (int j = 0; j < d.cols(); ++j) s += d(i, j);
            CHECK(std::abs(s) < 1e-9);
        }
    };
    Matrix cycle(4, 4);
    for (int i = 0; i < 4; ++i) {
        cycle(i, (i + 1) % 4) = 1.0;
        cycle((i + 1) % 4, i) = 1.0;
    }
    check_rows(cycle);

    Matrix complete(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            if (i != j) complete(i, j) = 0.6;
    check_rows(complete);

    Matrix pair(2, 2);
    pair(0, 1) = pair(1, 0) = 0.37;
    check_rows(pair);
}

TEST_CASE("advection flux operator: exact zero column sums, hand Euler step") {
    Rng rng(5);
    Matrix rates(5, 5);
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j)
            if (i != j) rates(i, j) = rng.next_uniform(0.0, 0.8);
    const Matrix w = advection_flux_operator(rates);
    for (int j = 0; j < 5; ++j) {
        double s = 0.0;
        for (int i = 0; i < 5; ++i) s += w(i, j);
        CHECK(std::abs(s) < 1e-15);
    }

    // one unit of flux 1 -> 2 at rate 0.5, dt 0.1 moves 5% of the mass
    Matrix r2(2, 2);
    r2(0, 1) = 0.5;
    const Matrix wf = advection_flux_operator(r2);
    auto traj = integrate_advection_diffusion({1.0, 0.0}, Matrix(2, 2), wf, 1, 0.1);
    REQUIRE(traj.size() == 2);
    CHECK(traj[1][0] == doctest::Approx(0.95).epsilon(1e-12));
    CHECK(traj[1][1] == doctest::Approx(0.05).epsilon(1e-12));

    Matrix neg(2, 2);
    neg(0, 1) = -0.1;
    CHECK_THROWS_AS(advection_flux_operator(neg), std::invalid_argument);
}

TEST_CASE("integrator: zero operators hold the state constant") {
    auto traj = integrate_advection_diffusion({3.0, 1.0, 2.0}, Matrix(3, 3), Matrix(3, 3), 10, 0.5);
    REQUIRE(traj.size() == 11);
    for (const auto& x : traj) {
        CHECK(x[0] == 3.0);
        CHECK(x[1] == 1.0);
        CHECK(x[2] == 2.0);
    }
}

TEST_CASE("integrator: closed two-node diffusion conserves mass per step") {
    Matrix w(2, 2);
    w(0, 1) = w(1, 0) = 1.0;
    const Matrix d = diffusion_adjacency(w, 0.1);
    auto traj = integrate_advection_diffusion({1.0, 0.0}, d, Matrix(2, 2), 50, 0.5);
    for (std::size_t s = 1; s < traj.size(); ++s)
        CHECK(std::abs(total(traj[s]) - total(traj[s - 1])) < 1e-8);
}

TEST_CASE("integrator: 100-step closed-system conservation with both operators") {
    // degree-regular diffusion graph (4-cycle) + arbitrary nonnegative fluxes
    Matrix cycle(4, 4);
    for (int i = 0; i < 4; ++i) {
        cycle(i, (i + 1) % 4) = 0.8;
        cycle((i + 1) % 4, i) = 0.8;
    }
    const Matrix d = diffusion_adjacency(cycle, 0.1);
    Rng rng(9);
    Matrix rates(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            if (i != j) rates(i, j) = rng.next_uniform(0.0, 0.5);
    const Matrix wf = advection_flux_operator(rates);
    auto traj = integrate_advection_diffusion({10.0, 20.0, 5.0, 8.0}, d, wf, 100, 0.1);
    const double m0 = total(traj.front());
    for (const auto& x : traj) CHECK(std::abs(total(x) - m0) < 1e-6);
}

TEST_CASE("integrator: unstable dt raises a parameter error with the bound") {
    Matrix w(2, 2);
    w(0, 1) = w(1, 0) = 1.0;
    const Matrix d = diffusion_adjacency(w, 1.0);  // row norm 2 -> dt must be < 0.25
    CHECK_THROWS_WITH_AS(integrate_advection_diffusion({1.0, 0.0}, d, Matrix(2, 2), 1, 0.3),
                         doctest::Contains("0.25"), std::invalid_argument);
    CHECK_NOTHROW(integrate_advection_diffusion({1.0, 0.0}, d, Matrix(2, 2), 1, 0.2));
}

TEST_CASE("wind field embed: per-node map properties") {
    ParamT<double> w1("w1", {2, 4}), b1("b1", {1, 4}), w2("w2", {4, 1}), b2("b2", {1, 1});
    Rng rng(3);
    for (auto& v : w1.value) v = rng.next_uniform(-0.5, 0.5);
    for (auto& v : w2.value) v = rng.next_uniform(-0.5, 0.5);
    b2.value[0] = 0.25;

    TapeT<double> tape;
    auto wind = tape.constant({3, 2}, {1.0, 2.0, 1.0, 2.0, -3.0, 0.5});
    auto p = wind_field_embed(wind, tape.leaf(w1), tape.leaf(b1), tape.leaf(w2), tape.leaf(b2));
    // identical wind rows agree
    CHECK(p.data()[0] == doctest::Approx(p.data()[1]).epsilon(1e-12));

    // perturbing node 2's wind changes only node 2
    TapeT<double> tape2;
    auto wind2 = tape2.constant({3, 2}, {1.0, 2.0, 1.0, 2.0, -2.5, 0.5});
    auto p2 = wind_field_embed(wind2, tape2.leaf(w1), tape2.leaf(b1), tape2.leaf(w2),
                               tape2.leaf(b2));
    CHECK(p2.data()[0] == doctest::Approx(p.data()[0]).epsilon(1e-12));
    CHECK(p2.data()[1] == doctest::Approx(p.data()[1]).epsilon(1e-12));
    CHECK(p2.data()[2] != doctest::Approx(p.data()[2]).epsilon(1e-12));

    // zero hidden-to-output weights: p equals the output bias
    std::fill(w2.value.begin(), w2.value.end(), 0.0);
    TapeT<double> tape3;
    auto p3 = wind_field_embed(tape3.constant({3, 2}, {9.0, -9.0, 0.0, 0.0, 1.0, 1.0}),
                               tape3.leaf(w1), tape3.leaf(b1), tape3.leaf(w2), tape3.leaf(b2));
    for (double v : p3.data()) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));

    // NaN wind rejected
    TapeT<double> tape4;
    auto bad = tape4.constant({1, 2}, {std::nan(""), 0.0});
    CHECK_THROWS_AS(
        wind_field_embed(bad, tape4.leaf(w1), tape4.leaf(b1), tape4.leaf(w2), tape4.leaf(b2)),
        std::runtime_error);
}

TEST_CASE("advection adjacency: uniform p gives the identity, W_p antisymmetric") {
    TapeT<double> tape;
    auto p = tape.constant({3, 1}, {2.0, 2.0, 2.0});
    std::vector<double> full_mask = {0, 1, 1, 1, 0, 1, 1, 1, 0};
    auto mask = tape.constant({3, 3}, std::vector<double>(full_mask.begin(), full_mask.end()));
    auto adv = advection_adjacency(p, mask);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(adv.w_adv.data()[i * 3 + j] == doctest::Approx(i == j ? 1.0 : 0.0));

    Rng rng(12);
    TapeT<double> t2;
    std::vector<double> pv = {rng.next_normal(), rng.next_normal(), rng.next_normal(),
                              rng.next_normal()};
    auto p2 = t2.constant({4, 1}, pv);
    std::vector<double> m2(16, 1.0);
    for (int i = 0; i < 4; ++i) m2[i * 4 + i] = 0.0;
    auto adv2 = advection_adjacency(p2, t2.constant({4, 4}, m2));
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(adv2.w_p.data()[i * 4 + j] == -adv2.w_p.data()[j * 4 + i]);  // exact
}

TEST_CASE("advection adjacency: 3-node line hand normalization") {
    // p = (2, 1, 0) on a path 0-1-2:
    //   W_p rows: [0, 1, 0 | -1, 0, 1 | 0, -1, 0], |W_p| row sums (1, 2, 1)
    //   W_adv = I - D^-1/2 W_p D^-1/2 with off-diagonal magnitude 1/sqrt(2)
    TapeT<double> tape;
    auto p = tape.constant({3, 1}, {2.0, 1.0, 0.0});
    std::vector<double> line_mask = {0, 1, 0, 1, 0, 1, 0, 1, 0};
    auto adv = advection_adjacency(p, tape.constant({3, 3}, line_mask));

    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    const std::vector<double> expect = {1.0, -inv_sqrt2, 0.0,  inv_sqrt2, 1.0,
                                        -inv_sqrt2, 0.0,  inv_sqrt2, 1.0};
    for (int k = 0; k < 9; ++k)
        CHECK(adv.w_adv.data()[k] == doctest::Approx(expect[k]).epsilon(1e-5));
}

TEST_CASE("fuse: sigmoid(0) mixes operators equally; elementwise oracle at mu=0.3") {
    TapeT<double> tape;
    Rng rng(77);
    std::vector<double> av(16), dv(16);
    for (auto& v : av) v = rng.next_normal();
    for (auto& v : dv) v = rng.next_normal();
    auto w_adv = tape.constant({4, 4}, av);
    auto w_diff = tape.constant({4, 4}, dv);

    ParamT<double> mu_raw("mu_raw", {1});
    auto fused0 = fuse_physics(w_adv, w_diff, tape.leaf(mu_raw));
    CHECK(fused0.mu.scalar() == doctest::Approx(0.5));
    for (int k = 0; k < 16; ++k)
        CHECK(fused0.w_phy.data()[k] == doctest::Approx(0.5 * (av[k] + dv[k])).epsilon(1e-12));

    mu_raw.value[0] = std::log(0.3 / 0.7);  // sigmoid -> 0.3
    TapeT<double> t2;
    auto a2 = t2.constant({4, 4}, av);
    auto d2 = t2.constant({4, 4}, dv);
    auto fused = fuse_physics(a2, d2, t2.leaf(mu_raw));
    CHECK(fused.mu.scalar() == doctest::Approx(0.3).epsilon(1e-12));
    for (int k = 0; k < 16; ++k)
        CHECK(fused.w_phy.data()[k] ==
              doctest::Approx(0.3 * av[k] + 0.7 * dv[k]).epsilon(1e-9));

    // saturating mu_raw collapses onto the diffusion operator
    mu_raw.value[0] = -40.0;
    TapeT<double> t3;
    auto fused_d = fuse_physics(t3.constant({4, 4}, av), t3.constant({4, 4}, dv),
                                t3.leaf(mu_raw));
    for (int k = 0; k < 16; ++k)
        CHECK(fused_d.w_phy.data()[k] == doctest::Approx(dv[k]).epsilon(1e-9));

    // convexity: w_phy is elementwise between the inputs for any mu in (0,1)
    for (int k = 0; k < 16; ++k) {
        const double lo = std::min(av[k], dv[k]);
        const double hi = std::max(av[k], dv[k]);
        CHECK(fused.w_phy.data()[k] >= lo - 1e-12);
        CHECK(fused.w_phy.data()[k] <= hi + 1e-12);
    }

    TapeT<double> t4;
    CHECK_THROWS_AS(fuse_physics(t4.constant({2, 2}, {1., 2., 3., 4.}),
                                 t4.constant({1, 1}, {1.}), t4.scalar_constant(0.0)),
                    std::invalid_argument);
}

TEST_CASE("operator construction is differentiable end to end (finite differences)") {
    ParamT<double> w1("w1", {2, 4}), b1("b1", {1, 4}), w2("w2", {4, 1}), b2("b2", {1, 1});
    ParamT<double> mu_raw("mu_raw", {1});
    Rng rng(31);
    for (auto& v : w1.value) v = rng.next_uniform(-0.7, 0.7);
    for (auto& v : b1.value) v = rng.next_uniform(-0.2, 0.2);
    for (auto& v : w2.value) v = rng.next_uniform(-0.7, 0.7);
    b2.value[0] = 0.1;
    mu_raw.value[0] = 0.2;

    const int n = 4;
    std::vector<double> wind(n * 2), probe(n * n), mask(n * n, 1.0), diff(n * n);
    for (auto& v : wind) v = rng.next_uniform(-2.0, 2.0);
    for (auto& v : probe) v = rng.next_normal();
    for (auto& v : diff) v = rng.next_normal();
    for (int i = 0; i < n; ++i) mask[i * n + i] = 0.0;

    auto build = [&](TapeT<double>& tape) {
        auto wind_c = tape.constant({n, 2}, wind);
        auto p = wind_field_embed(wind_c, tape.leaf(w1), tape.leaf(b1), tape.leaf(w2),
                                  tape.leaf(b2));
        auto adv = advection_adjacency(p, tape.constant({n, n}, mask));
        auto fused = fuse_physics(adv.w_adv, tape.constant({n, n}, diff), tape.leaf(mu_raw));
        return sum_all(mul(fused.w_phy_minus, tape.constant({n, n}, probe)));
    };

    std::vector<ParamT<double>*> params{&w1, &b1, &w2, &b2, &mu_raw};
    for (auto* p : params) p->zero_grad();
    {
        TapeT<double> tape;
        tape.backward(build(tape));
    }
    auto loss_fn = [&]() {
        TapeT<double> tape;
        return build(tape).scalar();
    };
    auto r = finite_difference_check(params, loss_fn, 1e-4, 1e-6);
    INFO("worst: ", r.worst_param, " rel=", r.max_rel_err);
    CHECK(r.max_rel_err < 1e-3);
}
