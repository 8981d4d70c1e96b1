#ifndef REPROCS_SUBSPACE_HPP_
#define REPROCS_SUBSPACE_HPP_

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace reprocs {

// Estimate of the slowly-changing principal subspace of the low-rank part.
// Holds the orthonormal basis, the associated singular values, and the frame
// buffer used for the periodic incremental update.
//
// The orthonormal complement of the basis is never materialized; everything
// downstream uses the projector v -> (I - P P') v.
class SubspaceEstimate {
public:
    SubspaceEstimate() = default;

    // Truncated-SVD initialization from a training block. Singular values
    // strictly greater than alpha0 are retained. When subtract_mean is set,
    // the empirical column mean is stored and removed from the training data
    // (and from every frame buffered later).
    static SubspaceEstimate init_truncated_svd(const Eigen::MatrixXd& training,
                                               double alpha0,
                                               bool subtract_mean = false);

    // Same, but alpha0 is derived from a p%-energy request: the smallest set
    // of leading singular values carrying at least energy_fraction of the
    // total squared singular-value mass is retained.
    static SubspaceEstimate init_energy(const Eigen::MatrixXd& training,
                                        double energy_fraction,
                                        bool subtract_mean = false);

    int n() const { return static_cast<int>(basis.rows()); }
    int rank() const { return static_cast<int>(basis.cols()); }

    // (I - P P') v. With an empty basis this is the identity.
    Eigen::VectorXd project_perp(const Eigen::VectorXd& v) const;

    // Coefficients P' v.
    Eigen::VectorXd project_coeffs(const Eigen::VectorXd& v) const;

    // Buffers one low-rank estimate (mean-subtracted when a mean is
    // configured). When the buffer reaches tau frames the full update cycle
    // runs: remove_decayed -> incremental_update -> retain_new.
    void push_frame(const Eigen::VectorXd& lhat);

    // Update-cycle steps. Exposed individually for testing; push_frame is the
    // normal entry point. All three require a full buffer.
    void remove_decayed();
    void incremental_update();
    void retain_new(int r_before);

    // ||P' U_sub||_F^2 / ||U_sub||_F^2 for an orthonormal U_sub.
    double alignment(const Eigen::MatrixXd& u_sub) const;

    void save(const std::string& path) const;
    static SubspaceEstimate load(const std::string& path);

    Eigen::MatrixXd basis;        // n x r, orthonormal columns
    Eigen::VectorXd singvals;     // nonincreasing, all > 0
    std::vector<Eigen::VectorXd> buffer;
    int tau = 20;
    double alpha = 0.0;           // variance retention threshold
    double alpha0 = 0.0;          // initialization singular-value threshold
    double sigma_min_sq = 0.0;    // square of smallest retained init singval
    std::optional<Eigen::VectorXd> mean;

private:
    Eigen::MatrixXd buffer_matrix() const;
};

// Makes the first entry of each column with magnitude above a scaled floor
// nonnegative, for reproducible SVD output.
void fix_column_signs(Eigen::MatrixXd& m);

}  // namespace reprocs

#endif  // REPROCS_SUBSPACE_HPP_
