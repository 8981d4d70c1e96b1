#ifndef REPROCS_SPARSE_SOLVER_HPP_
#define REPROCS_SPARSE_SOLVER_HPP_

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "reprocs/subspace.hpp"

namespace reprocs {

// Measurement operator A in y = A s. Either an explicit matrix, the implicit
// projector v -> (I - P P') v, or the projected sensing form (I - P P') Psi v.
//
// The optional fast paths (solve_shifted, gram_on) keep the solver and the
// restricted least squares free of O(n^2) work in the projector case:
//   (I + A'A)^-1 = (2I - PP')^-1 = (I + PP')/2
//   (A_T)'(A_T)  = I - B B'   with B the T-rows of the basis.
class SenseOperator {
public:
    int n = 0;  // signal dimension
    int m = 0;  // measurement dimension

    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> apply;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> apply_adjoint;
    // x -> (I + A'A)^-1 x; empty means fall back to conjugate gradients.
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> solve_shifted;
    // (A_T)'(A_T) for an index subset; empty means build columns explicitly.
    std::function<Eigen::MatrixXd(const std::vector<int>&)> gram_on;

    std::optional<Eigen::MatrixXd> psi;

    // Number of effective measurements (n - r for the projector form).
    int effective_measurements = 0;

    static SenseOperator dense(const Eigen::MatrixXd& a);
    static SenseOperator projector(const SubspaceEstimate& est);
    static SenseOperator projected_psi(const SubspaceEstimate& est,
                                       const Eigen::MatrixXd& psi);

    Eigen::MatrixXd columns(const std::vector<int>& idx) const;
};

struct SolveConfig {
    double epsilon = 0.0;
    std::vector<int> known_support;  // T; no l1 penalty on these indices
    int max_iters = 5000;
    double tol = 1e-6;
};

struct SolveResult {
    Eigen::VectorXd s;
    bool converged = false;
    int iters = 0;
    double residual_norm = 0.0;   // ||y - A s||
    double objective = 0.0;       // ||s_{T^c}||_1
};

// Solves  min ||s_{T^c}||_1  s.t.  ||y - A s||_2 <= epsilon  by ADMM on the
// split (s, v=s, r=A s) with a weighted shrink (zero weight on T) and a
// projection of r onto the epsilon-ball around y. A zero epsilon is floored
// at 1e-10 ||y||. After convergence the detected support is polished by a
// least-squares fit, accepted only when it is feasible and does not increase
// the objective.
SolveResult solve_l1(const SenseOperator& op, const Eigen::VectorXd& y,
                     const SolveConfig& cfg,
                     const Eigen::VectorXd* warm_start = nullptr);

struct LeastSquaresResult {
    Eigen::VectorXd s;
    bool ok = false;
    double cond = 0.0;  // estimated condition number of A_T
};

// s_T = (A_T)^dagger y, zero elsewhere. Rejects restrictions whose estimated
// condition number exceeds 1e8.
LeastSquaresResult least_squares_on(const SenseOperator& op,
                                    const Eigen::VectorXd& y,
                                    const std::vector<int>& support);

}  // namespace reprocs

#endif  // REPROCS_SPARSE_SOLVER_HPP_
