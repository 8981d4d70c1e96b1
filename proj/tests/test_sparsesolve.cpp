#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <vector>

#include "reprocs/rng.hpp"
#include "reprocs/sparse_solver.hpp"
#include "reprocs/subspace.hpp"

using namespace reprocs;

namespace {

Eigen::MatrixXd gaussian_matrix(int rows, int cols, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = rng.gaussian();
    return m;
}

SubspaceEstimate random_subspace(int n, int r, std::uint64_t seed) {
    Eigen::MatrixXd training =
        gaussian_matrix(n, r, seed) * gaussian_matrix(r, 4 * n, seed + 1);
    return SubspaceEstimate::init_truncated_svd(training, 0.0);
}

// Enumerate supports up to the given size; on each, the least-squares point is
// the only candidate when epsilon is (numerically) zero, so the minimum l1 over
// feasible supports is the exact optimum of the sparse program.
double brute_force_l1(const Eigen::MatrixXd& a, const Eigen::VectorXd& y,
                      int max_support) {
    const int n = static_cast<int>(a.cols());
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> idx;
    auto recurse = [&](auto&& self, int start) -> void {
        if (!idx.empty()) {
            Eigen::MatrixXd cols(a.rows(), idx.size());
            for (std::size_t k = 0; k < idx.size(); ++k) cols.col(k) = a.col(idx[k]);
            const Eigen::VectorXd x =
                cols.colPivHouseholderQr().solve(y);
            if ((cols * x - y).norm() <= 1e-9 * std::max(1.0, y.norm()))
                best = std::min(best, x.lpNorm<1>());
        }
        if (static_cast<int>(idx.size()) == max_support) return;
        for (int i = start; i < n; ++i) {
            idx.push_back(i);
            self(self, i + 1);
            idx.pop_back();
        }
    };
    recurse(recurse, 0);
    return best;
}

}  // namespace

TEST_CASE("operator adjoint consistency and projector idempotence") {
    const auto est = random_subspace(10, 3, 7);
    const SenseOperator proj = SenseOperator::projector(est);
    const SenseOperator dense = SenseOperator::dense(gaussian_matrix(6, 10, 8));
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd u = gaussian_matrix(10, 1, 100 + trial);
        Eigen::VectorXd v = gaussian_matrix(10, 1, 200 + trial);
        CHECK(proj.apply(u).dot(v) ==
              doctest::Approx(u.dot(proj.apply_adjoint(v))).epsilon(1e-10));
        Eigen::VectorXd v6 = gaussian_matrix(6, 1, 300 + trial);
        CHECK(dense.apply(u).dot(v6) ==
              doctest::Approx(u.dot(dense.apply_adjoint(v6))).epsilon(1e-10));
        CHECK((proj.apply(proj.apply(u)) - proj.apply(u)).norm() < 1e-10);
    }
}

TEST_CASE("projector shifted inverse agrees with a dense factorization") {
    const auto est = random_subspace(12, 4, 17);
    const SenseOperator op = SenseOperator::projector(est);
    const Eigen::MatrixXd p =
        Eigen::MatrixXd::Identity(12, 12) - est.basis * est.basis.transpose();
    const Eigen::MatrixXd shifted = Eigen::MatrixXd::Identity(12, 12) + p * p;
    Eigen::VectorXd rhs = gaussian_matrix(12, 1, 18);
    CHECK((op.solve_shifted(rhs) - shifted.llt().solve(rhs)).norm() < 1e-10);
}

TEST_CASE("zero measurements give the zero solution") {
    const SenseOperator op = SenseOperator::dense(gaussian_matrix(4, 6, 27));
    SolveConfig cfg;
    cfg.epsilon = 0.5;
    const auto res = solve_l1(op, Eigen::VectorXd::Zero(4), cfg);
    CHECK(res.s.norm() < 1e-12);
    CHECK(res.converged);
}

TEST_CASE("1-sparse exact recovery with and without known support") {
    const Eigen::MatrixXd a = gaussian_matrix(4, 6, 37);
    const SenseOperator op = SenseOperator::dense(a);
    Eigen::VectorXd s_star = Eigen::VectorXd::Zero(6);
    s_star(2) = 1.7;
    const Eigen::VectorXd y = a * s_star;

    // Oracle: s_star is the unique minimum-l1 interpolant among sparse points.
    CHECK(brute_force_l1(a, y, 2) == doctest::Approx(1.7).epsilon(1e-9));

    SolveConfig cfg;
    cfg.epsilon = 0.0;
    auto res = solve_l1(op, y, cfg);
    CHECK((res.s - s_star).norm() < 1e-6);

    cfg.known_support = {2};
    res = solve_l1(op, y, cfg);
    CHECK((res.s - s_star).norm() < 1e-8);
}

TEST_CASE("feasibility certificate holds on noisy instances") {
    const Eigen::MatrixXd a = gaussian_matrix(6, 9, 47);
    const SenseOperator op = SenseOperator::dense(a);
    Rng rng(48);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::VectorXd s = Eigen::VectorXd::Zero(9);
        s(trial % 9) = 3.0 * rng.gaussian();
        Eigen::VectorXd noise = gaussian_matrix(6, 1, 500 + trial);
        const Eigen::VectorXd y = a * s + 0.05 * noise;
        SolveConfig cfg;
        cfg.epsilon = 0.05 * noise.norm();
        const auto res = solve_l1(op, y, cfg);
        CHECK(res.residual_norm <=
              cfg.epsilon * (1.0 + cfg.tol) + 1e-8 * y.norm());
    }
}

TEST_CASE("known support never worsens the objective") {
    const Eigen::MatrixXd a = gaussian_matrix(5, 8, 57);
    const SenseOperator op = SenseOperator::dense(a);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(8);
    s(1) = 2.0;
    s(6) = -1.0;
    const Eigen::VectorXd y = a * s + 0.02 * Eigen::VectorXd(gaussian_matrix(5, 1, 58));
    SolveConfig cfg;
    cfg.epsilon = 0.1;
    const double plain = solve_l1(op, y, cfg).objective;
    cfg.known_support = {1};
    const double with_t = solve_l1(op, y, cfg).objective;
    CHECK(with_t <= plain + 1e-8);
}

TEST_CASE("solver objective matches exhaustive enumeration on tiny instances") {
    Rng rng(67);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 6 + static_cast<int>(rng.uniform_below(5));   // 6..10
        const int m = 4 + static_cast<int>(rng.uniform_below(5));   // 4..8
        const int k = 1 + static_cast<int>(rng.uniform_below(2));   // 1..2
        const Eigen::MatrixXd a = gaussian_matrix(m, n, 1000 + trial);
        Eigen::VectorXd s_star = Eigen::VectorXd::Zero(n);
        for (int j = 0; j < k; ++j)
            s_star(static_cast<int>(rng.uniform_below(n))) =
                (rng.uniform() < 0.5 ? -1.0 : 1.0) * (1.0 + rng.uniform());
        const Eigen::VectorXd y = a * s_star;
        const double oracle = brute_force_l1(a, y, 2);
        SolveConfig cfg;
        cfg.epsilon = 0.0;
        const auto res = solve_l1(SenseOperator::dense(a), y, cfg);
        CHECK(res.objective <= oracle + 1e-5);
        CHECK(res.residual_norm <= 1e-8 * std::max(1.0, y.norm()) + 1e-10);
    }
}

TEST_CASE("least squares on the empty set is zero") {
    const SenseOperator op = SenseOperator::dense(gaussian_matrix(4, 6, 77));
    const auto res = least_squares_on(op, Eigen::VectorXd::Ones(4), {});
    CHECK(res.ok);
    CHECK(res.s.norm() == 0.0);
}

TEST_CASE("least squares reproduces a consistent single column") {
    const Eigen::MatrixXd a = gaussian_matrix(5, 7, 87);
    const SenseOperator op = SenseOperator::dense(a);
    const Eigen::VectorXd y = a.col(3);
    const auto res = least_squares_on(op, y, {3});
    REQUIRE(res.ok);
    CHECK(res.s(3) == doctest::Approx(1.0).epsilon(1e-10));
    for (int i = 0; i < 7; ++i)
        if (i != 3) CHECK(res.s(i) == 0.0);
}

TEST_CASE("least squares matches the dense pseudo-inverse oracle") {
    const Eigen::MatrixXd a = gaussian_matrix(8, 12, 97);
    const SenseOperator op = SenseOperator::dense(a);
    const Eigen::VectorXd y = gaussian_matrix(8, 1, 98);
    const std::vector<int> t = {1, 5, 9};
    const auto res = least_squares_on(op, y, t);
    REQUIRE(res.ok);
    Eigen::MatrixXd cols(8, 3);
    for (int k = 0; k < 3; ++k) cols.col(k) = a.col(t[k]);
    const Eigen::VectorXd oracle =
        cols.completeOrthogonalDecomposition().pseudoInverse() * y;
    for (int k = 0; k < 3; ++k)
        CHECK(res.s(t[k]) == doctest::Approx(oracle(k)).epsilon(1e-10));

    // residual orthogonal to the retained columns
    const Eigen::VectorXd resid = y - op.apply(res.s);
    CHECK((cols.transpose() * resid).norm() < 1e-8 * y.norm());
}

TEST_CASE("least squares rejects an ill-conditioned restriction") {
    Eigen::MatrixXd a = gaussian_matrix(6, 4, 107);
    a.col(3) = a.col(0) + 1e-12 * a.col(1);  // nearly dependent pair
    const SenseOperator op = SenseOperator::dense(a);
    const auto res = least_squares_on(op, Eigen::VectorXd(a.col(0)), {0, 3});
    CHECK(!res.ok);
}

TEST_CASE("projector gram restriction matches explicit columns") {
    const auto est = random_subspace(14, 4, 117);
    const SenseOperator op = SenseOperator::projector(est);
    const std::vector<int> t = {0, 3, 7, 11};
    const Eigen::MatrixXd g = op.gram_on(t);
    const Eigen::MatrixXd cols = op.columns(t);
    CHECK((g - cols.transpose() * cols).norm() < 1e-12);
}

TEST_CASE("projected-psi operator composes measurement and projection") {
    const auto est = random_subspace(10, 2, 127);
    const Eigen::MatrixXd psi = gaussian_matrix(10, 10, 128);
    const SenseOperator op = SenseOperator::projected_psi(est, psi);
    Eigen::VectorXd v = gaussian_matrix(10, 1, 129);
    CHECK((op.apply(v) - est.project_perp(psi * v)).norm() < 1e-12);
    const std::vector<int> t = {2, 5};
    const Eigen::MatrixXd cols = op.columns(t);
    CHECK((op.gram_on(t) - cols.transpose() * cols).norm() < 1e-10);
}
