#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <algorithm>
#include <vector>

#include "reprocs/recovery.hpp"
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

// Explicit orthonormal complement of the basis, for oracle comparisons.
Eigen::MatrixXd complement_of(const SubspaceEstimate& est) {
    const int n = est.n();
    Eigen::MatrixXd full = Eigen::MatrixXd::Identity(n, n) -
                           est.basis * est.basis.transpose();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(full, Eigen::ComputeThinU);
    return svd.matrixU().leftCols(n - est.rank());
}

}  // namespace

TEST_CASE("adaptive epsilon is the complement-space energy") {
    const auto est = random_subspace(8, 2, 7);
    CHECK(adapt_epsilon(est, est.basis.col(0)) < 1e-12);

    Eigen::VectorXd v = gaussian_matrix(8, 1, 8);
    Eigen::VectorXd orth = est.project_perp(v);
    CHECK(adapt_epsilon(est, orth) == doctest::Approx(orth.norm()).epsilon(1e-12));

    const Eigen::MatrixXd comp = complement_of(est);
    CHECK(adapt_epsilon(est, v) ==
          doctest::Approx((comp.transpose() * v).norm()).epsilon(1e-12));
}

TEST_CASE("threshold below every entry yields an empty support") {
    const SenseOperator op = SenseOperator::dense(gaussian_matrix(5, 8, 17));
    Eigen::VectorXd s_raw = 0.3 * Eigen::VectorXd(gaussian_matrix(8, 1, 18));
    const auto res = threshold_ls(op, Eigen::VectorXd::Zero(5), s_raw, 10.0);
    CHECK(res.support.empty());
    CHECK(res.s_hat.norm() == 0.0);
}

TEST_CASE("threshold keeps signal entries and debiases against the LS oracle") {
    const Eigen::MatrixXd a = gaussian_matrix(7, 10, 27);
    const SenseOperator op = SenseOperator::dense(a);
    Eigen::VectorXd truth = Eigen::VectorXd::Zero(10);
    truth(2) = 5.0;
    truth(6) = -3.0;
    const Eigen::VectorXd y = a * truth;
    Eigen::VectorXd s_raw = truth;
    for (int i = 0; i < 10; ++i)
        if (i != 2 && i != 6) s_raw(i) = 0.4 * std::sin(1.0 + i);  // noise < 1

    const auto res = threshold_ls(op, y, s_raw, 2.0);
    CHECK(res.support == std::vector<int>{2, 6});
    Eigen::MatrixXd cols(7, 2);
    cols.col(0) = a.col(2);
    cols.col(1) = a.col(6);
    const Eigen::VectorXd oracle =
        cols.completeOrthogonalDecomposition().pseudoInverse() * y;
    CHECK(res.s_hat(2) == doctest::Approx(oracle(0)).epsilon(1e-10));
    CHECK(res.s_hat(6) == doctest::Approx(oracle(1)).epsilon(1e-10));
    for (int i = 0; i < 10; ++i)
        if (i != 2 && i != 6) CHECK(res.s_hat(i) == 0.0);
}

TEST_CASE("magnitude-100 sparse part is exact through the projector") {
    // gamma = a * min|S_i| with a = 0.2
    const auto est = random_subspace(40, 5, 37);
    const SenseOperator op = SenseOperator::projector(est);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(40);
    for (int i = 10; i < 19; ++i) s(i) = 100.0;
    const Eigen::VectorXd l = est.basis * Eigen::VectorXd(gaussian_matrix(5, 1, 38));
    const Eigen::VectorXd y = op.apply(l + s);

    SolveConfig cfg;
    cfg.epsilon = 0.0;
    const auto sol = solve_l1(op, y, cfg);
    const auto res = threshold_ls(op, y, sol.s, 20.0);
    REQUIRE(res.support.size() == 9);
    CHECK((res.s_hat - s).norm() < 1e-6);
}

TEST_CASE("add-ls-del keeps a clean known support untouched") {
    const Eigen::MatrixXd a = gaussian_matrix(8, 12, 47);
    const SenseOperator op = SenseOperator::dense(a);
    Eigen::VectorXd truth = Eigen::VectorXd::Zero(12);
    truth(3) = 4.0;
    truth(7) = -6.0;
    const Eigen::VectorXd y = a * truth;
    const auto res = add_ls_del(op, y, truth, {3, 7}, 0.5, 1.0);
    CHECK(res.support == std::vector<int>{3, 7});
    CHECK((res.s_hat - truth).norm() < 1e-8);
}

TEST_CASE("add-ls-del admits misses and deletes extras") {
    const Eigen::MatrixXd a = gaussian_matrix(9, 12, 57);
    const SenseOperator op = SenseOperator::dense(a);
    Eigen::VectorXd truth = Eigen::VectorXd::Zero(12);
    truth(2) = 10.0;
    truth(5) = 10.0;
    truth(9) = 10.0;
    const Eigen::VectorXd y = a * truth;

    // Prediction misses index 9 and carries extra index 11.
    const std::vector<int> t_pred = {2, 5, 11};
    Eigen::VectorXd s_raw = truth;
    s_raw(11) = 0.2;  // solver leaves a small residual value on the extra
    const auto res = add_ls_del(op, y, s_raw, t_pred, 0.5, 1.0);
    CHECK(res.support == std::vector<int>{2, 5, 9});
    CHECK((res.s_hat - truth).norm() < 1e-8);

    // The refined support also wins against exhaustive LS over candidates.
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> best_t;
    const std::vector<std::vector<int>> candidates = {
        {2, 5}, {2, 5, 9}, {2, 5, 11}, {2, 5, 9, 11}};
    for (const auto& t : candidates) {
        const auto ls = least_squares_on(op, y, t);
        const double resid = (y - op.apply(ls.s)).norm();
        if (ls.ok && resid < best) {
            best = resid;
            best_t = t;
        }
    }
    CHECK(best_t == std::vector<int>{2, 5, 9});
}

TEST_CASE("add stage uses strict thresholds on both sides") {
    const Eigen::MatrixXd a = gaussian_matrix(6, 8, 67);
    const SenseOperator op = SenseOperator::dense(a);
    Eigen::VectorXd s_raw = Eigen::VectorXd::Zero(8);
    s_raw(0) = 0.5;  // exactly alpha_add: strict >, not admitted
    s_raw(4) = 2.0;  // above alpha_add: admitted, survives deletion
    const Eigen::VectorXd y = a * Eigen::VectorXd(s_raw);
    const auto res = add_ls_del(op, y, s_raw, {}, 0.5, 0.5);
    CHECK(std::find(res.support.begin(), res.support.end(), 0) == res.support.end());
    CHECK(std::find(res.support.begin(), res.support.end(), 4) != res.support.end());
}

TEST_CASE("debiasing never worsens the fit on a covering support") {
    const auto est = random_subspace(30, 4, 77);
    const SenseOperator op = SenseOperator::projector(est);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(30);
    s(4) = 7.0;
    s(20) = -5.0;
    const Eigen::VectorXd y = op.apply(s);
    SolveConfig cfg;
    cfg.epsilon = 0.0;
    const auto sol = solve_l1(op, y, cfg);
    const auto res = threshold_ls(op, y, sol.s, 1.0);
    CHECK(res.residual_norm <= (y - op.apply(sol.s)).norm() + 1e-8);
}

TEST_CASE("noise-free exactness certified by support enumeration") {
    // Exact subspace, epsilon 0: whenever the unique-sparsest check passes,
    // threshold_ls returns S exactly for any gamma below min |S_i|.
    const int n = 12, r = 3, k = 2;
    const auto est = random_subspace(n, r, 87);
    const SenseOperator op = SenseOperator::projector(est);
    Rng rng(88);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
        std::vector<int> supp;
        while (static_cast<int>(supp.size()) < k) {
            const int i = static_cast<int>(rng.uniform_below(n));
            if (std::find(supp.begin(), supp.end(), i) == supp.end()) supp.push_back(i);
        }
        for (int i : supp) s(i) = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (2.0 + rng.uniform());
        const Eigen::VectorXd y = op.apply(s);

        // Brute-force uniqueness: no other support of size <= k interpolates y.
        bool unique = true;
        std::vector<int> idx;
        auto recurse = [&](auto&& self, int start) -> void {
            if (!idx.empty() && idx != supp) {
                const auto ls = least_squares_on(op, y, idx);
                if (ls.ok && (y - op.apply(ls.s)).norm() < 1e-9 * y.norm() &&
                    ls.s.lpNorm<1>() <= s.lpNorm<1>() + 1e-9)
                    unique = false;
            }
            if (static_cast<int>(idx.size()) == k) return;
            for (int i = start; i < n; ++i) {
                idx.push_back(i);
                self(self, i + 1);
                idx.pop_back();
            }
        };
        recurse(recurse, 0);
        if (!unique) continue;

        SolveConfig cfg;
        cfg.epsilon = 0.0;
        const auto sol = solve_l1(op, y, cfg);
        const auto res = threshold_ls(op, y, sol.s, 1.0);
        std::vector<int> sorted_supp = supp;
        std::sort(sorted_supp.begin(), sorted_supp.end());
        CHECK(res.support == sorted_supp);
        CHECK((res.s_hat - s).norm() < 1e-6);
    }
}
