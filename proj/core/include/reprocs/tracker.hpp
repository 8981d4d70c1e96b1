#ifndef REPROCS_TRACKER_HPP_
#define REPROCS_TRACKER_HPP_

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

namespace reprocs {

enum class ObserveMode { kCentroid, kMedian };

// Constant-velocity Kalman filter over one coordinate of one object, plus the
// support prediction derived from the filtered location. The object occupies
// 2w+1 consecutive indices centered at its (rounded) position.
struct TrackState {
    Eigen::Vector2d g = Eigen::Vector2d::Zero();   // [position; velocity]
    Eigen::Matrix2d Sigma = Eigen::Matrix2d::Zero();
    double Q = 0.0;   // acceleration variance (velocity component)
    double R = 0.0;   // observation-noise variance
    int w = 0;        // half-width
    std::optional<std::pair<double, double>> intensity_range;

    static Eigen::Matrix2d motion_matrix() {
        Eigen::Matrix2d g;
        g << 1.0, 1.0, 0.0, 1.0;
        return g;
    }
};

// g <- G g, Sigma <- G Sigma G' + diag(0, Q). The predicted support is
// [round(p) - w, round(p) + w] clipped to [0, n).
void kf_predict(TrackState& state);
std::vector<int> predicted_support(const TrackState& state, int n, bool* clipped = nullptr);

// Observed location from an updated support estimate. Empty support returns
// nullopt (caller skips the update and the track coasts). Median mode takes
// the lower median on even cardinality.
std::optional<double> observe_location(const std::vector<int>& support, ObserveMode mode);

// Standard KF measurement update with H = [1 0]; Sigma is re-symmetrized.
void kf_update(TrackState& state, double p_obs);

// Diagnostic bound on the centroid observation error given the counted misses
// and the extras' positions. Returns infinity when the bound is undefined
// (misses >= 2w+1, i.e. track loss; or extras present with w = 0).
double omega_bound(const TrackState& state, int misses,
                   const std::vector<int>& extras_indices, double p_true);

// Splits estimated-support indices among tracks by intensity range. Ranges
// must be pairwise disjoint; indices falling in no range are ignored.
std::vector<std::vector<int>> assign_supports(const Eigen::VectorXd& s_hat,
                                              const std::vector<TrackState>& tracks);

// R = B^2 / 3: maximum-variance (uniform) observation noise for a bound B.
inline double observation_variance_from_bound(double b) { return b * b / 3.0; }

}  // namespace reprocs

#endif  // REPROCS_TRACKER_HPP_
