#ifndef REPROCS_RECOVERY_HPP_
#define REPROCS_RECOVERY_HPP_

#include <Eigen/Dense>
#include <vector>

#include "reprocs/sparse_solver.hpp"
#include "reprocs/subspace.hpp"

namespace reprocs {

struct RecoveryResult {
    Eigen::VectorXd s_raw;       // solver output before debiasing
    std::vector<int> support;    // final support estimate, sorted
    Eigen::VectorXd s_hat;       // debiased sparse estimate, zero off support
    Eigen::VectorXd l_hat;       // M_t - s_hat, filled in by the pipeline
    double epsilon_used = 0.0;
    double residual_norm = 0.0;
    bool ok = true;
};

// Adaptive constraint level: ||(I - P P') l_hat_prev||.
double adapt_epsilon(const SubspaceEstimate& est, const Eigen::VectorXd& l_hat_prev);

// Single-threshold support estimation followed by least-squares debiasing.
// Thresholds on |s_raw_i| >= gamma. If the restriction is ill conditioned the
// support is truncated to the largest-magnitude entries that pass.
RecoveryResult threshold_ls(const SenseOperator& op, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& s_raw, double gamma);

// Add-LS-Del support refinement around a predicted support T:
//   T_add = T u { i in T^c : |s_raw_i| > alpha_add }      (strict >)
//   LS on T_add, delete entries with |value| < alpha_del  (strict <)
//   final LS on the surviving support.
// T_add is capped at the measurement-count/conditioning limit by keeping the
// largest-|s_raw| candidates.
RecoveryResult add_ls_del(const SenseOperator& op, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& s_raw, const std::vector<int>& t,
                          double alpha_add, double alpha_del);

}  // namespace reprocs

#endif  // REPROCS_RECOVERY_HPP_
