#ifndef REPROCS_SYNTH_HPP_
#define REPROCS_SYNTH_HPP_

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "reprocs/rng.hpp"

namespace reprocs {

// Deterministic random orthonormal matrix (thin QR of a Gaussian draw, signs
// fixed). k defaults to n (square).
Eigen::MatrixXd generate_basis(int n, std::uint64_t seed, int k = -1);

// One scheduled change of the latent support: at frame t the indices in
// `add` become active (variance ramps up from theta * Sigma_ii) and the
// indices in `decay` start an exponential decay, never to return.
struct SupportChange {
    int t = 0;
    std::vector<int> add;
    std::vector<int> decay;
};

// Autoregressive latent-factor model driving the low-rank part L_t = U x_t.
// Diagonal AR(1) with parameter f on steady indices, decay parameter f_d on
// decaying ones, and fresh starts with variance theta * Sigma_ii.
struct GeneratorSpec {
    int n = 0;
    std::uint64_t seed = 0;
    Eigen::VectorXd variances;            // diag of Sigma, length n
    double f = 0.5;
    double f_d = 0.1;
    double theta = 0.5;
    int d = 0;                            // nominal support-change period
    std::vector<int> initial_support;
    std::vector<SupportChange> schedule;  // sorted by t

    void validate() const;
};

// Stateful simulator of the latent process.
class LowRankProcess {
public:
    LowRankProcess(const GeneratorSpec& spec, Rng rng);

    // Advances one frame and returns x_t (length n).
    const Eigen::VectorXd& step();

    int t() const { return t_; }
    const Eigen::VectorXd& x() const { return x_; }
    // Currently active indices (steady + ramping + decaying above floor).
    std::vector<int> active_set() const;

private:
    enum class State { kOff, kActive, kDecaying, kDead };
    GeneratorSpec spec_;
    Rng rng_;
    Eigen::VectorXd x_;
    std::vector<State> state_;
    std::vector<int> activated_at_;
    int t_ = 0;
    std::size_t next_change_ = 0;
};

enum class SupportKind { kStrips1d, kBlocks2d, kConstantVelocity };

struct ObjectSpec {
    // strips: height = 1, width = strip length; blocks: height x width
    int height = 1;
    int width = 1;
    double magnitude = 0.0;
    double row0 = 0.0;  // top index (walk kinds) or center (constant velocity)
    double col0 = 0.0;
    double vrow0 = 0.0;
    double vcol0 = 0.0;
};

struct SupportProcessSpec {
    SupportKind kind = SupportKind::kStrips1d;
    int frame_height = 0;   // 1 for 1D
    int frame_width = 0;    // n for 1D
    double p_static = 0.8;
    double p_move = 0.1;    // per direction
    double accel_variance = 0.0;  // constant-velocity kind
    std::vector<ObjectSpec> objects;

    int n() const { return frame_height * frame_width; }
};

// Stateful simulator of the sparse-support process. Every frame yields the
// union support T_t and the overlay values O_t (object magnitude on its
// footprint, zero elsewhere). Objects clip at frame borders and stay.
class SupportProcess {
public:
    SupportProcess(const SupportProcessSpec& spec, Rng rng);

    void step();
    const std::vector<int>& support() const { return support_; }
    const Eigen::VectorXd& overlay() const { return overlay_; }
    // Per-object centers (row, col) in index units.
    const std::vector<Eigen::Vector4d>& states() const { return states_; }
    // Footprint of one object as linear indices.
    std::vector<int> object_support(std::size_t k) const;
    bool clipped() const { return clipped_; }

private:
    void rebuild();
    SupportProcessSpec spec_;
    Rng rng_;
    std::vector<Eigen::Vector4d> states_;  // [prow, pcol, vrow, vcol]
    std::vector<int> support_;
    Eigen::VectorXd overlay_;
    bool clipped_ = false;
};

enum class ComposeMode { kAdditive, kOverlay };

struct ComposedFrame {
    Eigen::VectorXd m;
    Eigen::VectorXd s;
};

// Additive: S = O, M = L + S. Overlay: M equals O on T and L off T, so
// S = (O - L) on T and zero elsewhere.
ComposedFrame compose(const Eigen::VectorXd& l, const Eigen::VectorXd& o,
                      const std::vector<int>& t, ComposeMode mode);

// Uniformly sampled size-subset of {0..n-1}, sorted.
std::vector<int> uniform_support(int n, int size, Rng& rng);

}  // namespace reprocs

#endif  // REPROCS_SYNTH_HPP_
