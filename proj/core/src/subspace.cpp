#include "reprocs/subspace.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cstdint>
#include <fstream>
#include <stdexcept>

namespace reprocs {

void fix_column_signs(Eigen::MatrixXd& m) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
        const double floor = 1e-12 * std::max(1.0, m.col(j).cwiseAbs().maxCoeff());
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            if (std::abs(m(i, j)) > floor) {
                if (m(i, j) < 0.0) m.col(j) = -m.col(j);
                break;
            }
        }
    }
}

namespace {

SubspaceEstimate init_common(const Eigen::MatrixXd& training, bool subtract_mean,
                             Eigen::MatrixXd* u_out, Eigen::VectorXd* sv_out) {
    if (training.cols() == 0) throw std::invalid_argument("empty training block");
    if (!training.allFinite()) throw std::invalid_argument("non-finite training data");

    SubspaceEstimate est;
    Eigen::MatrixXd data = training;
    if (subtract_mean) {
        Eigen::VectorXd mu = training.rowwise().mean();
        data.colwise() -= mu;
        est.mean = std::move(mu);
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(data, Eigen::ComputeThinU);
    *u_out = svd.matrixU();
    *sv_out = svd.singularValues();
    return est;
}

void finalize(SubspaceEstimate& est, const Eigen::MatrixXd& u,
              const Eigen::VectorXd& sv, int keep) {
    est.basis = u.leftCols(keep);
    est.singvals = sv.head(keep);
    fix_column_signs(est.basis);
    est.sigma_min_sq = keep > 0 ? sv(keep - 1) * sv(keep - 1) : 0.0;
}

}  // namespace

SubspaceEstimate SubspaceEstimate::init_truncated_svd(const Eigen::MatrixXd& training,
                                                      double alpha0,
                                                      bool subtract_mean) {
    Eigen::MatrixXd u;
    Eigen::VectorXd sv;
    SubspaceEstimate est = init_common(training, subtract_mean, &u, &sv);
    est.alpha0 = alpha0;
    // Relative floor: numerically-zero singular values of exactly rank-deficient
    // data never count as retained directions, even with alpha0 = 0.
    const double floor = sv.size() > 0 ? 1e-12 * sv(0) : 0.0;
    int keep = 0;
    while (keep < sv.size() && sv(keep) > std::max(alpha0, floor)) ++keep;
    finalize(est, u, sv, keep);
    return est;
}

SubspaceEstimate SubspaceEstimate::init_energy(const Eigen::MatrixXd& training,
                                               double energy_fraction,
                                               bool subtract_mean) {
    Eigen::MatrixXd u;
    Eigen::VectorXd sv;
    SubspaceEstimate est = init_common(training, subtract_mean, &u, &sv);
    const double total = sv.squaredNorm();
    int keep = 0;
    double acc = 0.0;
    while (keep < sv.size() && acc < energy_fraction * total && sv(keep) > 0.0) {
        acc += sv(keep) * sv(keep);
        ++keep;
    }
    est.alpha0 = keep < sv.size() ? sv(keep) : 0.0;
    finalize(est, u, sv, keep);
    return est;
}

Eigen::VectorXd SubspaceEstimate::project_perp(const Eigen::VectorXd& v) const {
    if (v.size() != basis.rows() && rank() > 0)
        throw std::invalid_argument("project_perp: dimension mismatch");
    if (rank() == 0) return v;
    return v - basis * (basis.transpose() * v);
}

Eigen::VectorXd SubspaceEstimate::project_coeffs(const Eigen::VectorXd& v) const {
    if (rank() == 0) return Eigen::VectorXd::Zero(0);
    return basis.transpose() * v;
}

Eigen::MatrixXd SubspaceEstimate::buffer_matrix() const {
    const auto n_rows = buffer.empty() ? basis.rows() : buffer.front().size();
    Eigen::MatrixXd d(n_rows, static_cast<Eigen::Index>(buffer.size()));
    for (std::size_t j = 0; j < buffer.size(); ++j) d.col(static_cast<Eigen::Index>(j)) = buffer[j];
    return d;
}

void SubspaceEstimate::push_frame(const Eigen::VectorXd& lhat) {
    if (rank() > 0 && lhat.size() != basis.rows())
        throw std::invalid_argument("push_frame: dimension mismatch");
    buffer.push_back(mean ? Eigen::VectorXd(lhat - *mean) : lhat);
    if (static_cast<int>(buffer.size()) >= tau) {
        const int r_before_cycle = rank();
        remove_decayed();
        (void)r_before_cycle;
        const int r_before = rank();
        incremental_update();
        retain_new(r_before);
    }
}

void SubspaceEstimate::remove_decayed() {
    if (rank() == 0) return;
    const Eigen::MatrixXd d = buffer_matrix();
    const Eigen::MatrixXd c = basis.transpose() * d;  // r x tau
    const double inv_tau = 1.0 / static_cast<double>(buffer.size());
    std::vector<int> keep;
    for (int i = 0; i < rank(); ++i) {
        if (c.row(i).squaredNorm() * inv_tau >= alpha) keep.push_back(i);
    }
    if (static_cast<int>(keep.size()) == rank()) return;
    Eigen::MatrixXd nb(basis.rows(), static_cast<Eigen::Index>(keep.size()));
    Eigen::VectorXd ns(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
        nb.col(static_cast<Eigen::Index>(k)) = basis.col(keep[k]);
        ns(static_cast<Eigen::Index>(k)) = singvals(keep[k]);
    }
    basis = std::move(nb);
    singvals = std::move(ns);
}

void SubspaceEstimate::incremental_update() {
    const Eigen::MatrixXd d = buffer_matrix();
    const Eigen::Index nrows = d.rows();
    const Eigen::Index ncols = d.cols();
    const int r = rank();

    Eigen::MatrixXd c(r, ncols);
    Eigen::MatrixXd e = d;
    if (r > 0) {
        c = basis.transpose() * d;
        e.noalias() -= basis * c;
    }

    // Rank-reveal the orthogonal component; columns of E below the scaled
    // floor contribute no new direction.
    const double floor = 1e-10 * std::max(1.0, d.norm());
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(e);
    int q = 0;
    {
        const Eigen::MatrixXd& rmat = qr.matrixR();
        const Eigen::Index kmax = std::min(nrows, ncols);
        for (Eigen::Index i = 0; i < kmax; ++i) {
            if (std::abs(rmat(i, i)) >= floor) ++q; else break;
        }
    }
    Eigen::MatrixXd j;
    if (q > 0) {
        j = qr.householderQ() * Eigen::MatrixXd::Identity(nrows, q);
        if (r > 0) {
            // One reorthogonalization pass against the existing basis keeps
            // the orthonormality invariant tight over many cycles.
            j.noalias() -= basis * (basis.transpose() * j);
            Eigen::HouseholderQR<Eigen::MatrixXd> rq(j);
            j = rq.householderQ() * Eigen::MatrixXd::Identity(nrows, q);
        }
    } else {
        j.resize(nrows, 0);
    }
    Eigen::MatrixXd k = j.transpose() * e;  // q x tau

    Eigen::MatrixXd block = Eigen::MatrixXd::Zero(r + q, r + ncols);
    if (r > 0) {
        block.topLeftCorner(r, r) = singvals.asDiagonal();
        block.topRightCorner(r, ncols) = c;
    }
    if (q > 0) block.bottomRightCorner(q, ncols) = k;

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(block, Eigen::ComputeThinU);
    Eigen::MatrixXd pj(nrows, r + q);
    if (r > 0) pj.leftCols(r) = basis;
    if (q > 0) pj.rightCols(q) = j;

    basis = pj * svd.matrixU();
    singvals = svd.singularValues().head(r + q);
    fix_column_signs(basis);
}

void SubspaceEstimate::retain_new(int r_before) {
    const double tau_d = static_cast<double>(buffer.size());
    std::vector<int> keep;
    for (int i = 0; i < rank(); ++i) {
        if (i < r_before || singvals(i) * singvals(i) / tau_d >= alpha)
            keep.push_back(i);
    }
    if (static_cast<int>(keep.size()) != rank()) {
        Eigen::MatrixXd nb(basis.rows(), static_cast<Eigen::Index>(keep.size()));
        Eigen::VectorXd ns(static_cast<Eigen::Index>(keep.size()));
        for (std::size_t m = 0; m < keep.size(); ++m) {
            nb.col(static_cast<Eigen::Index>(m)) = basis.col(keep[m]);
            ns(static_cast<Eigen::Index>(m)) = singvals(keep[m]);
        }
        basis = std::move(nb);
        singvals = std::move(ns);
    }
    buffer.clear();
}

double SubspaceEstimate::alignment(const Eigen::MatrixXd& u_sub) const {
    const double denom = u_sub.squaredNorm();
    if (denom == 0.0) return 0.0;
    if (rank() == 0) return 0.0;
    return (basis.transpose() * u_sub).squaredNorm() / denom;
}

void SubspaceEstimate::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    const char magic[4] = {'R', 'P', 'S', 'S'};
    out.write(magic, 4);
    const std::int64_t n64 = basis.rows(), r64 = basis.cols(), tau64 = tau;
    const std::int64_t has_mean = mean ? 1 : 0;
    out.write(reinterpret_cast<const char*>(&n64), 8);
    out.write(reinterpret_cast<const char*>(&r64), 8);
    out.write(reinterpret_cast<const char*>(&tau64), 8);
    out.write(reinterpret_cast<const char*>(&alpha), 8);
    out.write(reinterpret_cast<const char*>(&alpha0), 8);
    out.write(reinterpret_cast<const char*>(&sigma_min_sq), 8);
    out.write(reinterpret_cast<const char*>(&has_mean), 8);
    // Row-major basis dump.
    for (Eigen::Index i = 0; i < basis.rows(); ++i)
        for (Eigen::Index j = 0; j < basis.cols(); ++j) {
            const double v = basis(i, j);
            out.write(reinterpret_cast<const char*>(&v), 8);
        }
    out.write(reinterpret_cast<const char*>(singvals.data()),
              static_cast<std::streamsize>(singvals.size() * 8));
    if (mean)
        out.write(reinterpret_cast<const char*>(mean->data()),
                  static_cast<std::streamsize>(mean->size() * 8));
    if (!out) throw std::runtime_error("write failure: " + path);
}

SubspaceEstimate SubspaceEstimate::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || magic[0] != 'R' || magic[1] != 'P' || magic[2] != 'S' || magic[3] != 'S')
        throw std::runtime_error("bad basis checkpoint: " + path);
    std::int64_t n64, r64, tau64, has_mean;
    SubspaceEstimate est;
    in.read(reinterpret_cast<char*>(&n64), 8);
    in.read(reinterpret_cast<char*>(&r64), 8);
    in.read(reinterpret_cast<char*>(&tau64), 8);
    in.read(reinterpret_cast<char*>(&est.alpha), 8);
    in.read(reinterpret_cast<char*>(&est.alpha0), 8);
    in.read(reinterpret_cast<char*>(&est.sigma_min_sq), 8);
    in.read(reinterpret_cast<char*>(&has_mean), 8);
    est.tau = static_cast<int>(tau64);
    est.basis.resize(n64, r64);
    for (Eigen::Index i = 0; i < n64; ++i)
        for (Eigen::Index j = 0; j < r64; ++j) {
            double v;
            in.read(reinterpret_cast<char*>(&v), 8);
            est.basis(i, j) = v;
        }
    est.singvals.resize(r64);
    in.read(reinterpret_cast<char*>(est.singvals.data()),
            static_cast<std::streamsize>(r64 * 8));
    if (has_mean) {
        Eigen::VectorXd mu(n64);
        in.read(reinterpret_cast<char*>(mu.data()),
                static_cast<std::streamsize>(n64 * 8));
        est.mean = std::move(mu);
    }
    if (!in) throw std::runtime_error("truncated basis checkpoint: " + path);
    return est;
}

}  // namespace reprocs
