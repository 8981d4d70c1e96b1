#include "reprocs/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace reprocs {

namespace {

// LS with progressive truncation: drops smallest-|s_raw| indices until the
// restriction is acceptably conditioned. Returns the surviving support.
LeastSquaresResult ls_with_truncation(const SenseOperator& op,
                                      const Eigen::VectorXd& y,
                                      const Eigen::VectorXd& s_raw,
                                      std::vector<int>* support) {
    auto by_mag_desc = [&s_raw](int a, int b) {
        return std::abs(s_raw(a)) > std::abs(s_raw(b));
    };
    std::sort(support->begin(), support->end(), by_mag_desc);
    const int cap = std::max(1, op.effective_measurements);
    if (static_cast<int>(support->size()) > cap) support->resize(cap);

    while (true) {
        LeastSquaresResult ls = least_squares_on(op, y, *support);
        if (ls.ok || support->empty()) {
            std::sort(support->begin(), support->end());
            return ls;
        }
        // Shrink by ~5%, at least one index, from the small-magnitude end.
        const auto drop = std::max<std::size_t>(1, support->size() / 20);
        support->resize(support->size() - drop);
    }
}

}  // namespace

double adapt_epsilon(const SubspaceEstimate& est, const Eigen::VectorXd& l_hat_prev) {
    return est.project_perp(l_hat_prev).norm();
}

RecoveryResult threshold_ls(const SenseOperator& op, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& s_raw, double gamma) {
    if (gamma <= 0.0) throw std::invalid_argument("gamma must be positive");
    RecoveryResult res;
    res.s_raw = s_raw;
    for (int i = 0; i < op.n; ++i)
        if (std::abs(s_raw(i)) >= gamma) res.support.push_back(i);

    const LeastSquaresResult ls = ls_with_truncation(op, y, s_raw, &res.support);
    if (!ls.ok && !res.support.empty()) {
        res.ok = false;
        res.s_hat = Eigen::VectorXd::Zero(op.n);
    } else {
        res.s_hat = ls.s;
    }
    res.residual_norm = (y - op.apply(res.s_hat)).norm();
    return res;
}

RecoveryResult add_ls_del(const SenseOperator& op, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& s_raw, const std::vector<int>& t,
                          double alpha_add, double alpha_del) {
    if (!(alpha_add > 0.0) || alpha_add > alpha_del)
        throw std::invalid_argument("require 0 < alpha_add <= alpha_del");
    RecoveryResult res;
    res.s_raw = s_raw;

    std::vector<bool> in_t(static_cast<std::size_t>(op.n), false);
    for (int i : t) in_t[static_cast<std::size_t>(i)] = true;

    std::vector<int> candidates;
    for (int i = 0; i < op.n; ++i)
        if (!in_t[static_cast<std::size_t>(i)] && std::abs(s_raw(i)) > alpha_add)
            candidates.push_back(i);

    // Cap T_add, preferring the known support then largest-|s_raw| additions.
    const int cap = std::max(1, op.effective_measurements);
    std::vector<int> t_add = t;
    if (static_cast<int>(t_add.size()) > cap) {
        std::sort(t_add.begin(), t_add.end(), [&s_raw](int a, int b) {
            return std::abs(s_raw(a)) > std::abs(s_raw(b));
        });
        t_add.resize(cap);
    }
    std::sort(candidates.begin(), candidates.end(), [&s_raw](int a, int b) {
        return std::abs(s_raw(a)) > std::abs(s_raw(b));
    });
    for (int i : candidates) {
        if (static_cast<int>(t_add.size()) >= cap) break;
        t_add.push_back(i);
    }

    LeastSquaresResult add_ls = ls_with_truncation(op, y, s_raw, &t_add);
    if (!add_ls.ok && !t_add.empty()) {
        res.ok = false;
        res.s_hat = Eigen::VectorXd::Zero(op.n);
        res.residual_norm = y.norm();
        return res;
    }

    for (int i : t_add)
        if (std::abs(add_ls.s(i)) >= alpha_del) res.support.push_back(i);

    LeastSquaresResult final_ls = ls_with_truncation(op, y, s_raw, &res.support);
    if (!final_ls.ok && !res.support.empty()) {
        res.ok = false;
        res.s_hat = Eigen::VectorXd::Zero(op.n);
    } else {
        res.s_hat = final_ls.s;
    }
    res.residual_norm = (y - op.apply(res.s_hat)).norm();
    return res;
}

}  // namespace reprocs
