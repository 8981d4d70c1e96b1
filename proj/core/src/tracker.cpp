#include "reprocs/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace reprocs {

void kf_predict(TrackState& state) {
    const Eigen::Matrix2d g = TrackState::motion_matrix();
    state.g = g * state.g;
    state.Sigma = g * state.Sigma * g.transpose();
    state.Sigma(1, 1) += state.Q;
    state.Sigma = 0.5 * (state.Sigma + state.Sigma.transpose().eval());
}

std::vector<int> predicted_support(const TrackState& state, int n, bool* clipped) {
    // round-half-away-from-zero, matching std::round
    const int p = static_cast<int>(std::llround(state.g(0)));
    std::vector<int> support;
    bool clip = false;
    for (int i = p - state.w; i <= p + state.w; ++i) {
        if (i < 0 || i >= n) {
            clip = true;
            continue;
        }
        support.push_back(i);
    }
    if (clipped) *clipped = clip;
    return support;
}

std::optional<double> observe_location(const std::vector<int>& support,
                                       ObserveMode mode) {
    if (support.empty()) return std::nullopt;
    std::vector<int> s = support;
    std::sort(s.begin(), s.end());
    if (mode == ObserveMode::kCentroid) {
        double sum = 0.0;
        for (int i : s) sum += i;
        return sum / static_cast<double>(s.size());
    }
    // lower median
    return static_cast<double>(s[(s.size() - 1) / 2]);
}

void kf_update(TrackState& state, double p_obs) {
    const double innov_var = state.Sigma(0, 0) + state.R;
    Eigen::Vector2d k = Eigen::Vector2d::Zero();
    if (innov_var > 0.0) k = state.Sigma.col(0) / innov_var;
    state.g += k * (p_obs - state.g(0));
    const Eigen::Matrix2d khs = k * state.Sigma.row(0);
    state.Sigma -= khs;
    state.Sigma = 0.5 * (state.Sigma + state.Sigma.transpose().eval());
}

double omega_bound(const TrackState& state, int misses,
                   const std::vector<int>& extras_indices, double p_true) {
    if (misses < 0) throw std::invalid_argument("negative miss count");
    const int width = 2 * state.w + 1;
    if (misses >= width) return std::numeric_limits<double>::infinity();
    double bound = misses * static_cast<double>(state.w) /
                   static_cast<double>(width - misses);
    if (!extras_indices.empty()) {
        if (state.w == 0) return std::numeric_limits<double>::infinity();
        double far = 0.0;
        for (int j : extras_indices) far = std::max(far, std::abs(j - p_true));
        bound += static_cast<double>(extras_indices.size()) * far /
                 (2.0 * state.w);
    }
    return bound;
}

std::vector<std::vector<int>> assign_supports(const Eigen::VectorXd& s_hat,
                                              const std::vector<TrackState>& tracks) {
    for (std::size_t a = 0; a < tracks.size(); ++a) {
        if (!tracks[a].intensity_range)
            throw std::invalid_argument("track missing intensity range");
        for (std::size_t b = a + 1; b < tracks.size(); ++b) {
            const auto& ra = *tracks[a].intensity_range;
            const auto& rb = *tracks[b].intensity_range;
            if (ra.first < rb.second && rb.first < ra.second)
                throw std::invalid_argument("overlapping intensity ranges");
        }
    }
    std::vector<std::vector<int>> out(tracks.size());
    for (Eigen::Index i = 0; i < s_hat.size(); ++i) {
        const double v = s_hat(i);
        if (v == 0.0) continue;
        for (std::size_t k = 0; k < tracks.size(); ++k) {
            const auto& r = *tracks[k].intensity_range;
            if (v > r.first && v < r.second) {
                out[k].push_back(static_cast<int>(i));
                break;
            }
        }
    }
    return out;
}

}  // namespace reprocs
