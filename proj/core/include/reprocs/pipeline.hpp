#ifndef REPROCS_PIPELINE_HPP_
#define REPROCS_PIPELINE_HPP_

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "reprocs/recovery.hpp"
#include "reprocs/sparse_solver.hpp"
#include "reprocs/subspace.hpp"
#include "reprocs/synth.hpp"
#include "reprocs/tracker.hpp"

namespace reprocs {

enum class PipelineMode { kReprocs, kReprocsModcs };

// One tracked object: a Kalman filter per coordinate axis. 1D objects use
// only the row axis over the linear index.
struct ObjectTrackConfig {
    double p_row0 = 0.0, v_row0 = 0.0;
    double p_col0 = 0.0, v_col0 = 0.0;
    int w_row = 0, w_col = 0;
    double q = 0.0;  // acceleration variance
    double r = 0.0;  // observation-noise variance
    std::pair<double, double> intensity_range{0.0, 0.0};
};

struct PipelineConfig {
    PipelineMode mode = PipelineMode::kReprocs;
    double gamma = 1.0;
    double alpha_add = 0.5;
    double alpha_del = 1.0;
    SolveConfig solver;           // epsilon is overwritten per frame
    int tau = 20;
    double alpha = 5.0;
    std::optional<Eigen::MatrixXd> psi;
    ObserveMode observe_mode = ObserveMode::kMedian;
    int frame_height = 1;         // 2D object geometry; 1 for 1D signals
    int frame_width = 0;
    std::vector<ObjectTrackConfig> tracks;
    double epsilon_floor_factor = 1e-8;  // floor = factor * ||M_t||
};

struct TrackFrameInfo {
    double p_row = 0.0, v_row = 0.0, p_col = 0.0, v_col = 0.0;
    Eigen::Matrix2d sigma_row = Eigen::Matrix2d::Zero();
    Eigen::Matrix2d sigma_col = Eigen::Matrix2d::Zero();
    std::optional<double> p_obs_row, p_obs_col;
    std::vector<int> predicted;  // linear indices
    std::vector<int> assigned;   // linear indices from the updated support
};

struct FrameOutput {
    RecoveryResult recovery;
    std::vector<int> predicted_support;  // union across tracks (modcs only)
    double epsilon = 0.0;
    int solver_iters = 0;
    bool solver_converged = true;
    bool failed = false;  // solver/LS failure; S_hat forced to zero
    std::vector<TrackFrameInfo> tracks;
};

// Frame-by-frame orchestration of the separation loop: project, solve the
// sparse program, refine the support, debias, and feed the residual low-rank
// estimate back into the subspace tracker.
class ReprocsPipeline {
public:
    ReprocsPipeline(SubspaceEstimate est, PipelineConfig cfg);

    FrameOutput step(const Eigen::VectorXd& m_t);

    // Seeds the adaptive epsilon with the last training-phase low-rank frame.
    void set_initial_lowrank(const Eigen::VectorXd& l0);

    const SubspaceEstimate& subspace() const { return est_; }
    const PipelineConfig& config() const { return cfg_; }

private:
    struct Track {
        TrackState row, col;
        bool two_d = false;
        bool fresh = true;  // first frame uses the initial state as prediction
        std::pair<double, double> range;
    };

    FrameOutput step_reprocs(const Eigen::VectorXd& m_t, const Eigen::VectorXd& m_in);
    FrameOutput step_modcs(const Eigen::VectorXd& m_t, const Eigen::VectorXd& m_in);
    SenseOperator make_operator() const;
    std::vector<int> track_predicted_support(Track& tr) const;
    void finish_frame(const Eigen::VectorXd& m_t, FrameOutput& out);

    SubspaceEstimate est_;
    PipelineConfig cfg_;
    std::vector<Track> tracks_;
    Eigen::VectorXd l_prev_ms_;   // previous L-hat, mean-subtracted
    Eigen::VectorXd warm_;
    bool have_warm_ = false;
    int frames_since_update_ = 0;
};

// ---------------------------------------------------------------------------
// Experiment harness

struct UniformSupportSource {
    int size = 0;
    double magnitude = 0.0;
};

struct ExperimentSpec {
    std::string name;
    int n = 0;
    int frame_height = 1, frame_width = 0;
    int t0 = 0;        // training frames (sparse part absent)
    int horizon = 0;   // test frames
    int mc_runs = 1;
    std::uint64_t seed = 0;
    double alpha0 = 1.0;        // init singular-value threshold
    bool subtract_mean = false;
    double mean_offset = 0.0;   // nonzero background mean magnitude
    GeneratorSpec lowrank;      // schedule times are absolute frame numbers
    int basis_cols = -1;        // columns of U to generate (-1: all n)
    std::optional<SupportProcessSpec> support_process;
    std::optional<UniformSupportSource> uniform_support_source;
    ComposeMode compose_mode = ComposeMode::kAdditive;
    PipelineConfig pipe;
    bool compare_modes = false;  // run plain ReProCS and modCS on the same data
    std::vector<int> align_new_cols;  // U columns whose alignment is tracked
    std::vector<int> align_old_cols;
};

struct FrameMetrics {
    int run = 0;
    int t = 0;  // 1-based test-frame index
    double err_s = 0.0, den_s = 0.0;
    double err_l = 0.0, den_l = 0.0;
    double err_o = 0.0, den_o = 0.0;
    int miss_pred = -1, extra_pred = -1;  // -1: no prediction (plain mode)
    int miss_upd = 0, extra_upd = 0;
    double align_new = -1.0, align_old = -1.0;  // -1: not tracked
    double epsilon = 0.0;
    int solver_iters = 0;
    bool converged = true;
    bool failed = false;
};

struct TrackRow {
    int run = 0, t = 0, track = 0;
    char axis = 'r';
    double p = 0.0, v = 0.0;
    double s00 = 0.0, s01 = 0.0, s11 = 0.0;
    double p_obs = 0.0;
    bool has_obs = false;
    double bound = 0.0;  // omega bound from the counted misses/extras
    double omega = 0.0;  // measured |p_obs - p_true|
};

struct ModeReport {
    std::string mode;
    std::vector<FrameMetrics> frames;
    std::vector<TrackRow> track_rows;

    double cum_nmse_s() const;
    double cum_nmse_l() const;
    double cum_nmse_o() const;
    double mean_miss_pred() const;
    double mean_extra_pred() const;
    double mean_miss_upd() const;
    double mean_extra_upd() const;
    double final_align_new() const;
    double final_align_old() const;
};

struct MetricsReport {
    std::string name;
    std::uint64_t seed = 0;
    int mc_runs = 0, horizon = 0;
    std::vector<ModeReport> modes;
};

// Ground truth for one Monte-Carlo run: training segment plus per-frame
// M/L/S/O, the true support, and per-object footprints and states.
struct GeneratedRun {
    Eigen::MatrixXd basis;     // n x basis_cols
    Eigen::MatrixXd training;  // n x t0
    std::vector<Eigen::VectorXd> m, l, s, o;
    std::vector<std::vector<int>> t_true;
    std::vector<std::vector<std::vector<int>>> object_supports;  // [frame][object]
    std::vector<std::vector<Eigen::Vector4d>> object_states;     // [frame][object]
};

// Deterministic given (spec.seed, run); every mode consumes identical data.
GeneratedRun generate_run(const ExperimentSpec& spec, int run);

// Generates data, trains the initial subspace on the S-free segment, runs the
// pipeline(s) for `horizon` frames, and aggregates over mc_runs independent
// seed streams. Deterministic given the spec. jobs > 1 distributes runs over
// threads; the merge order is fixed by run index.
MetricsReport run_experiment(const ExperimentSpec& spec, int jobs = 1);

double subspace_alignment(const SubspaceEstimate& est, const Eigen::MatrixXd& u_sub);

void write_frame_csv(const MetricsReport& report, const std::string& path);
void write_summary_csv(const MetricsReport& report, const std::string& path);
void write_track_csv(const MetricsReport& report, const std::string& path);

}  // namespace reprocs

#endif  // REPROCS_PIPELINE_HPP_
