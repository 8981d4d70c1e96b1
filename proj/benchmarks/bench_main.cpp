#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "reprocs/recovery.hpp"
#include "reprocs/rng.hpp"
#include "reprocs/sparse_solver.hpp"
#include "reprocs/subspace.hpp"
#include "reprocs/tracker.hpp"

using namespace reprocs;

namespace {

Eigen::MatrixXd gaussian_matrix(int rows, int cols, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = rng.gaussian();
    return m;
}

SubspaceEstimate make_subspace(int n, int r, std::uint64_t seed) {
    const Eigen::MatrixXd training =
        gaussian_matrix(n, r, seed) * gaussian_matrix(r, 3 * r, seed + 1);
    return SubspaceEstimate::init_truncated_svd(training, 0.0);
}

void bm_solve_projector(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const int r = static_cast<int>(state.range(1));
    const auto est = make_subspace(n, r, 1);
    const SenseOperator op = SenseOperator::projector(est);
    Rng rng(2);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < n / 20; ++k)
        s(static_cast<int>(rng.uniform_below(n))) = 50.0;
    const Eigen::VectorXd l =
        est.basis * Eigen::VectorXd(gaussian_matrix(r, 1, 3));
    const Eigen::VectorXd y = op.apply(l + s);
    SolveConfig cfg;
    cfg.epsilon = 1e-8 * y.norm();
    for (auto _ : state) {
        const auto res = solve_l1(op, y, cfg);
        benchmark::DoNotOptimize(res.s.data());
    }
}
BENCHMARK(bm_solve_projector)->Args({256, 16})->Args({1024, 32});

void bm_threshold_ls(benchmark::State& state) {
    const int n = 1024, r = 32;
    const auto est = make_subspace(n, r, 5);
    const SenseOperator op = SenseOperator::projector(est);
    Rng rng(6);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < 50; ++k)
        s(static_cast<int>(rng.uniform_below(n))) = 40.0;
    const Eigen::VectorXd y = op.apply(s);
    SolveConfig cfg;
    cfg.epsilon = 0.0;
    const auto sol = solve_l1(op, y, cfg);
    for (auto _ : state) {
        const auto res = threshold_ls(op, y, sol.s, 10.0);
        benchmark::DoNotOptimize(res.s_hat.data());
    }
}
BENCHMARK(bm_threshold_ls);

void bm_subspace_cycle(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const int r = static_cast<int>(state.range(1));
    const int tau = 20;
    const SubspaceEstimate base = make_subspace(n, r, 7);
    const Eigen::MatrixXd frames = gaussian_matrix(n, tau, 8);
    for (auto _ : state) {
        state.PauseTiming();
        SubspaceEstimate est = base;
        est.tau = tau;
        est.alpha = 0.0;
        state.ResumeTiming();
        for (int j = 0; j < tau; ++j) est.push_frame(frames.col(j));
        benchmark::DoNotOptimize(est.basis.data());
    }
}
BENCHMARK(bm_subspace_cycle)->Args({256, 16})->Args({1024, 32});

void bm_kf_step(benchmark::State& state) {
    TrackState st;
    st.g << 10.0, 0.2;
    st.Q = 2.5e-5;
    st.R = 1e-4;
    double obs = 10.0;
    for (auto _ : state) {
        kf_predict(st);
        kf_update(st, obs);
        obs += 0.2;
        benchmark::DoNotOptimize(st.Sigma.data());
    }
}
BENCHMARK(bm_kf_step);

}  // namespace

BENCHMARK_MAIN();
