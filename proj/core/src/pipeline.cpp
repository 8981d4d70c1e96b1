#include "reprocs/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <set>
#include <stdexcept>
#include <thread>

namespace reprocs {

ReprocsPipeline::ReprocsPipeline(SubspaceEstimate est, PipelineConfig cfg)
    : est_(std::move(est)), cfg_(std::move(cfg)) {
    est_.tau = cfg_.tau;
    est_.alpha = cfg_.alpha;
    for (const auto& tc : cfg_.tracks) {
        Track tr;
        tr.row.g << tc.p_row0, tc.v_row0;
        tr.col.g << tc.p_col0, tc.v_col0;
        tr.row.Q = tr.col.Q = tc.q;
        tr.row.R = tr.col.R = tc.r;
        tr.row.w = tc.w_row;
        tr.col.w = tc.w_col;
        tr.two_d = cfg_.frame_height > 1;
        tr.range = tc.intensity_range;
        tr.row.intensity_range = tc.intensity_range;
        tr.col.intensity_range = tc.intensity_range;
        tracks_.push_back(tr);
    }
    l_prev_ms_ = Eigen::VectorXd::Zero(est_.n());
}

void ReprocsPipeline::set_initial_lowrank(const Eigen::VectorXd& l0) {
    l_prev_ms_ = est_.mean ? Eigen::VectorXd(l0 - *est_.mean) : l0;
}

SenseOperator ReprocsPipeline::make_operator() const {
    if (cfg_.psi) return SenseOperator::projected_psi(est_, *cfg_.psi);
    return SenseOperator::projector(est_);
}

std::vector<int> ReprocsPipeline::track_predicted_support(Track& tr) const {
    if (!tr.two_d) {
        return predicted_support(tr.row, est_.n());
    }
    const int h = cfg_.frame_height, w = cfg_.frame_width;
    const auto rows = predicted_support(tr.row, h);
    const auto cols = predicted_support(tr.col, w);
    std::vector<int> out;
    out.reserve(rows.size() * cols.size());
    for (int r : rows)
        for (int c : cols) out.push_back(r * w + c);
    return out;
}

FrameOutput ReprocsPipeline::step(const Eigen::VectorXd& m_t) {
    if (m_t.size() != est_.n()) throw std::invalid_argument("frame dimension mismatch");
    const Eigen::VectorXd m_in = est_.mean ? Eigen::VectorXd(m_t - *est_.mean) : m_t;
    if (cfg_.mode == PipelineMode::kReprocs) return step_reprocs(m_t, m_in);
    return step_modcs(m_t, m_in);
}

FrameOutput ReprocsPipeline::step_reprocs(const Eigen::VectorXd& m_t,
                                          const Eigen::VectorXd& m_in) {
    FrameOutput out;
    const SenseOperator op = make_operator();
    out.epsilon = std::max(adapt_epsilon(est_, l_prev_ms_),
                           cfg_.epsilon_floor_factor * m_t.norm());
    const Eigen::VectorXd y = est_.project_perp(m_in);
    SolveConfig sc = cfg_.solver;
    sc.epsilon = out.epsilon;
    sc.known_support.clear();
    const SolveResult sr = solve_l1(op, y, sc, have_warm_ ? &warm_ : nullptr);
    warm_ = sr.s;
    have_warm_ = true;
    out.solver_iters = sr.iters;
    out.solver_converged = sr.converged;

    out.recovery = threshold_ls(op, y, sr.s, cfg_.gamma);
    if (!out.recovery.ok) {
        out.failed = true;
        out.recovery.s_hat = Eigen::VectorXd::Zero(est_.n());
        out.recovery.support.clear();
    }
    out.recovery.epsilon_used = out.epsilon;
    finish_frame(m_t, out);
    return out;
}

FrameOutput ReprocsPipeline::step_modcs(const Eigen::VectorXd& m_t,
                                        const Eigen::VectorXd& m_in) {
    FrameOutput out;
    out.tracks.resize(tracks_.size());

    std::set<int> pred_union;
    for (std::size_t k = 0; k < tracks_.size(); ++k) {
        Track& tr = tracks_[k];
        if (!tr.fresh) {
            kf_predict(tr.row);
            if (tr.two_d) kf_predict(tr.col);
        }
        out.tracks[k].predicted = track_predicted_support(tr);
        pred_union.insert(out.tracks[k].predicted.begin(),
                          out.tracks[k].predicted.end());
    }
    out.predicted_support.assign(pred_union.begin(), pred_union.end());

    const SenseOperator op = make_operator();
    out.epsilon = std::max(adapt_epsilon(est_, l_prev_ms_),
                           cfg_.epsilon_floor_factor * m_t.norm());
    const Eigen::VectorXd y = est_.project_perp(m_in);
    SolveConfig sc = cfg_.solver;
    sc.epsilon = out.epsilon;
    sc.known_support = out.predicted_support;
    const SolveResult sr = solve_l1(op, y, sc, have_warm_ ? &warm_ : nullptr);
    warm_ = sr.s;
    have_warm_ = true;
    out.solver_iters = sr.iters;
    out.solver_converged = sr.converged;

    out.recovery = add_ls_del(op, y, sr.s, out.predicted_support,
                              cfg_.alpha_add, cfg_.alpha_del);
    if (!out.recovery.ok) {
        out.failed = true;
        out.recovery.s_hat = Eigen::VectorXd::Zero(est_.n());
        out.recovery.support.clear();
    }
    out.recovery.epsilon_used = out.epsilon;

    // Observed locations from the updated support, split by intensity.
    std::vector<TrackState> range_holders;
    for (const auto& tr : tracks_) range_holders.push_back(tr.row);
    const auto assigned = assign_supports(out.recovery.s_hat, range_holders);
    const int w = cfg_.frame_width > 0 ? cfg_.frame_width : est_.n();
    for (std::size_t k = 0; k < tracks_.size(); ++k) {
        Track& tr = tracks_[k];
        out.tracks[k].assigned = assigned[k];
        std::vector<int> rows, cols;
        for (int i : assigned[k]) {
            rows.push_back(tr.two_d ? i / w : i);
            cols.push_back(i % w);
        }
        const auto p_row = observe_location(rows, cfg_.observe_mode);
        out.tracks[k].p_obs_row = p_row;
        if (p_row) kf_update(tr.row, *p_row);
        if (tr.two_d) {
            const auto p_col = observe_location(cols, cfg_.observe_mode);
            out.tracks[k].p_obs_col = p_col;
            if (p_col) kf_update(tr.col, *p_col);
        }
        tr.fresh = false;
        out.tracks[k].p_row = tr.row.g(0);
        out.tracks[k].v_row = tr.row.g(1);
        out.tracks[k].sigma_row = tr.row.Sigma;
        out.tracks[k].p_col = tr.col.g(0);
        out.tracks[k].v_col = tr.col.g(1);
        out.tracks[k].sigma_col = tr.col.Sigma;
    }

    finish_frame(m_t, out);
    return out;
}

void ReprocsPipeline::finish_frame(const Eigen::VectorXd& m_t, FrameOutput& out) {
    out.recovery.l_hat = m_t - out.recovery.s_hat;
    l_prev_ms_ = est_.mean ? Eigen::VectorXd(out.recovery.l_hat - *est_.mean)
                           : out.recovery.l_hat;
    est_.push_frame(out.recovery.l_hat);
}

double subspace_alignment(const SubspaceEstimate& est, const Eigen::MatrixXd& u_sub) {
    return est.alignment(u_sub);
}

// ---------------------------------------------------------------------------

double ModeReport::cum_nmse_s() const {
    double num = 0.0, den = 0.0;
    for (const auto& f : frames) { num += f.err_s; den += f.den_s; }
    return den > 0.0 ? num / den : 0.0;
}
double ModeReport::cum_nmse_l() const {
    double num = 0.0, den = 0.0;
    for (const auto& f : frames) { num += f.err_l; den += f.den_l; }
    return den > 0.0 ? num / den : 0.0;
}
double ModeReport::cum_nmse_o() const {
    double num = 0.0, den = 0.0;
    for (const auto& f : frames) { num += f.err_o; den += f.den_o; }
    return den > 0.0 ? num / den : 0.0;
}
namespace {
double mean_of(const std::vector<FrameMetrics>& fs, int FrameMetrics::*field) {
    double sum = 0.0;
    int count = 0;
    for (const auto& f : fs) {
        if (f.*field >= 0) { sum += f.*field; ++count; }
    }
    return count > 0 ? sum / count : 0.0;
}
double last_align(const std::vector<FrameMetrics>& fs, double FrameMetrics::*field) {
    // Mean of the final-frame values across runs.
    int t_max = 0;
    for (const auto& f : fs) t_max = std::max(t_max, f.t);
    double sum = 0.0;
    int count = 0;
    for (const auto& f : fs) {
        if (f.t == t_max && f.*field >= 0.0) { sum += f.*field; ++count; }
    }
    return count > 0 ? sum / count : -1.0;
}
}  // namespace
double ModeReport::mean_miss_pred() const { return mean_of(frames, &FrameMetrics::miss_pred); }
double ModeReport::mean_extra_pred() const { return mean_of(frames, &FrameMetrics::extra_pred); }
double ModeReport::mean_miss_upd() const { return mean_of(frames, &FrameMetrics::miss_upd); }
double ModeReport::mean_extra_upd() const { return mean_of(frames, &FrameMetrics::extra_upd); }
double ModeReport::final_align_new() const { return last_align(frames, &FrameMetrics::align_new); }
double ModeReport::final_align_old() const { return last_align(frames, &FrameMetrics::align_old); }

GeneratedRun generate_run(const ExperimentSpec& spec, int run) {
    const int n = spec.n;
    const std::uint64_t basis_seed =
        Rng::stream(spec.seed, static_cast<std::uint64_t>(run) * 8 + 0).next_u64();
    GeneratedRun data;
    data.basis = generate_basis(n, basis_seed, spec.basis_cols);
    LowRankProcess lp(spec.lowrank,
                      Rng::stream(spec.seed, static_cast<std::uint64_t>(run) * 8 + 1));
    Rng support_rng = Rng::stream(spec.seed, static_cast<std::uint64_t>(run) * 8 + 2);

    Eigen::VectorXd mu0 = Eigen::VectorXd::Zero(n);
    if (spec.mean_offset > 0.0) {
        Rng mean_rng = Rng::stream(spec.seed, static_cast<std::uint64_t>(run) * 8 + 3);
        for (int i = 0; i < n; ++i)
            mu0(i) = spec.mean_offset * (1.0 + 0.25 * mean_rng.gaussian());
    }

    data.training.resize(n, spec.t0);
    for (int t = 0; t < spec.t0; ++t) {
        const Eigen::VectorXd& x = lp.step();
        data.training.col(t) = data.basis * x.head(data.basis.cols()) + mu0;
    }

    std::optional<SupportProcess> sp;
    if (spec.support_process) sp.emplace(*spec.support_process, support_rng);
    for (int t = 1; t <= spec.horizon; ++t) {
        const Eigen::VectorXd& x = lp.step();
        const Eigen::VectorXd l = data.basis * x.head(data.basis.cols()) + mu0;
        std::vector<int> t_set;
        Eigen::VectorXd o = Eigen::VectorXd::Zero(n);
        if (sp) {
            if (t > 1) sp->step();
            t_set = sp->support();
            o = sp->overlay();
            std::vector<std::vector<int>> objs;
            for (std::size_t k = 0; k < spec.support_process->objects.size(); ++k)
                objs.push_back(sp->object_support(k));
            data.object_supports.push_back(std::move(objs));
            data.object_states.push_back(sp->states());
        } else if (spec.uniform_support_source) {
            t_set = uniform_support(n, spec.uniform_support_source->size, support_rng);
            for (int i : t_set) o(i) = spec.uniform_support_source->magnitude;
        }
        ComposedFrame cf = compose(l, o, t_set, spec.compose_mode);
        data.m.push_back(std::move(cf.m));
        data.l.push_back(l);
        data.s.push_back(std::move(cf.s));
        data.o.push_back(std::move(o));
        data.t_true.push_back(std::move(t_set));
    }
    return data;
}

namespace {

struct RunResult {
    // one entry per mode
    std::vector<std::vector<FrameMetrics>> frames;
    std::vector<std::vector<TrackRow>> track_rows;
};

int set_difference_size(const std::vector<int>& a, const std::vector<int>& b) {
    // both sorted
    std::vector<int> d;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(d));
    return static_cast<int>(d.size());
}

RunResult execute_run(const ExperimentSpec& spec, int run) {
    const int n = spec.n;
    const GeneratedRun data = generate_run(spec, run);
    const Eigen::MatrixXd& u = data.basis;
    SubspaceEstimate est = SubspaceEstimate::init_truncated_svd(
        data.training, spec.alpha0, spec.subtract_mean);
    est.tau = spec.pipe.tau;
    est.alpha = spec.pipe.alpha;

    Eigen::MatrixXd u_new(n, 0), u_old(n, 0);
    if (!spec.align_new_cols.empty()) {
        u_new.resize(n, static_cast<Eigen::Index>(spec.align_new_cols.size()));
        for (std::size_t j = 0; j < spec.align_new_cols.size(); ++j)
            u_new.col(static_cast<Eigen::Index>(j)) = u.col(spec.align_new_cols[j]);
    }
    if (!spec.align_old_cols.empty()) {
        u_old.resize(n, static_cast<Eigen::Index>(spec.align_old_cols.size()));
        for (std::size_t j = 0; j < spec.align_old_cols.size(); ++j)
            u_old.col(static_cast<Eigen::Index>(j)) = u.col(spec.align_old_cols[j]);
    }

    std::vector<PipelineMode> modes;
    if (spec.compare_modes) {
        modes = {PipelineMode::kReprocs, PipelineMode::kReprocsModcs};
    } else {
        modes = {spec.pipe.mode};
    }

    RunResult result;
    for (PipelineMode mode : modes) {
        PipelineConfig cfg = spec.pipe;
        cfg.mode = mode;
        if (mode == PipelineMode::kReprocs) cfg.tracks.clear();
        ReprocsPipeline pipe(est, cfg);
        pipe.set_initial_lowrank(data.training.col(spec.t0 - 1));

        std::vector<FrameMetrics> fms;
        std::vector<TrackRow> trs;
        for (int t = 1; t <= spec.horizon; ++t) {
            const FrameOutput fo = pipe.step(data.m[static_cast<std::size_t>(t - 1)]);
            const auto& truth_t = data.t_true[static_cast<std::size_t>(t - 1)];
            FrameMetrics fm;
            fm.run = run;
            fm.t = t;
            fm.err_s = (data.s[t - 1] - fo.recovery.s_hat).squaredNorm();
            fm.den_s = data.s[t - 1].squaredNorm();
            fm.err_l = (data.l[t - 1] - fo.recovery.l_hat).squaredNorm();
            fm.den_l = data.l[t - 1].squaredNorm();
            // Foreground estimate: overlay data carries O verbatim in M on the
            // support; additive data recovers O as the debiased sparse part.
            Eigen::VectorXd o_hat = Eigen::VectorXd::Zero(n);
            if (spec.compose_mode == ComposeMode::kOverlay) {
                for (int i : fo.recovery.support) o_hat(i) = data.m[t - 1](i);
            } else {
                o_hat = fo.recovery.s_hat;
            }
            fm.err_o = (data.o[t - 1] - o_hat).squaredNorm();
            fm.den_o = data.o[t - 1].squaredNorm();
            fm.miss_upd = set_difference_size(truth_t, fo.recovery.support);
            fm.extra_upd = set_difference_size(fo.recovery.support, truth_t);
            if (mode == PipelineMode::kReprocsModcs) {
                fm.miss_pred = set_difference_size(truth_t, fo.predicted_support);
                fm.extra_pred = set_difference_size(fo.predicted_support, truth_t);
            }
            if (u_new.cols() > 0) fm.align_new = pipe.subspace().alignment(u_new);
            if (u_old.cols() > 0) fm.align_old = pipe.subspace().alignment(u_old);
            fm.epsilon = fo.epsilon;
            fm.solver_iters = fo.solver_iters;
            fm.converged = fo.solver_converged;
            fm.failed = fo.failed;
            fms.push_back(fm);

            if (mode == PipelineMode::kReprocsModcs && !fo.tracks.empty() &&
                !data.object_supports.empty()) {
                const auto& objs = data.object_supports[static_cast<std::size_t>(t - 1)];
                const auto& ostates = data.object_states[static_cast<std::size_t>(t - 1)];
                const int fw = spec.frame_width > 0 ? spec.frame_width : n;
                for (std::size_t k = 0; k < fo.tracks.size() && k < objs.size(); ++k) {
                    const auto& ti = fo.tracks[k];
                    std::vector<int> truth_sorted = objs[k];
                    std::sort(truth_sorted.begin(), truth_sorted.end());
                    std::vector<int> assigned_sorted = ti.assigned;
                    std::sort(assigned_sorted.begin(), assigned_sorted.end());
                    const int misses =
                        set_difference_size(truth_sorted, assigned_sorted);
                    std::vector<int> extras;
                    std::set_difference(assigned_sorted.begin(), assigned_sorted.end(),
                                        truth_sorted.begin(), truth_sorted.end(),
                                        std::back_inserter(extras));
                    const bool two_d = spec.frame_height > 1;
                    for (int axis = 0; axis < (two_d ? 2 : 1); ++axis) {
                        TrackRow tr;
                        tr.run = run;
                        tr.t = t;
                        tr.track = static_cast<int>(k);
                        tr.axis = axis == 0 ? 'r' : 'c';
                        const bool is_row = axis == 0;
                        tr.p = is_row ? ti.p_row : ti.p_col;
                        tr.v = is_row ? ti.v_row : ti.v_col;
                        const Eigen::Matrix2d& sg = is_row ? ti.sigma_row : ti.sigma_col;
                        tr.s00 = sg(0, 0);
                        tr.s01 = sg(0, 1);
                        tr.s11 = sg(1, 1);
                        const auto& obs = is_row ? ti.p_obs_row : ti.p_obs_col;
                        tr.has_obs = obs.has_value();
                        tr.p_obs = obs.value_or(0.0);
                        // Axis-projected truth: object center along this axis.
                        double p_true = is_row ? ostates[k](0) : ostates[k](1);
                        if (spec.support_process &&
                            spec.support_process->kind != SupportKind::kConstantVelocity) {
                            // states store the top/left corner for walk kinds
                            const auto& ob = spec.support_process->objects[k];
                            p_true += is_row ? (ob.height - 1) / 2.0 : (ob.width - 1) / 2.0;
                        }
                        std::vector<int> extras_axis;
                        for (int i : extras)
                            extras_axis.push_back(two_d ? (is_row ? i / fw : i % fw) : i);
                        TrackState bstate;
                        bstate.w = is_row
                                       ? (spec.support_process
                                              ? (spec.support_process->objects[k].height - 1) / 2
                                              : 0)
                                       : (spec.support_process
                                              ? (spec.support_process->objects[k].width - 1) / 2
                                              : 0);
                        tr.bound = omega_bound(bstate, misses, extras_axis, p_true);
                        tr.omega = tr.has_obs ? std::abs(tr.p_obs - p_true) : 0.0;
                        trs.push_back(tr);
                    }
                }
            }
        }
        result.frames.push_back(std::move(fms));
        result.track_rows.push_back(std::move(trs));
    }
    return result;
}

}  // namespace

MetricsReport run_experiment(const ExperimentSpec& spec, int jobs) {
    MetricsReport rep;
    rep.name = spec.name;
    rep.seed = spec.seed;
    rep.mc_runs = spec.mc_runs;
    rep.horizon = spec.horizon;
    const int n_modes = spec.compare_modes ? 2 : 1;
    rep.modes.resize(static_cast<std::size_t>(n_modes));
    if (spec.compare_modes) {
        rep.modes[0].mode = "reprocs";
        rep.modes[1].mode = "reprocs_modcs";
    } else {
        rep.modes[0].mode =
            spec.pipe.mode == PipelineMode::kReprocs ? "reprocs" : "reprocs_modcs";
    }

    std::vector<RunResult> results(static_cast<std::size_t>(spec.mc_runs));
    if (jobs <= 1) {
        for (int run = 0; run < spec.mc_runs; ++run)
            results[static_cast<std::size_t>(run)] = execute_run(spec, run);
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        for (int j = 0; j < jobs; ++j) {
            pool.emplace_back([&]() {
                while (true) {
                    const int run = next.fetch_add(1);
                    if (run >= spec.mc_runs) break;
                    results[static_cast<std::size_t>(run)] = execute_run(spec, run);
                }
            });
        }
        for (auto& th : pool) th.join();
    }

    for (int run = 0; run < spec.mc_runs; ++run) {
        auto& rr = results[static_cast<std::size_t>(run)];
        for (int m = 0; m < n_modes && m < static_cast<int>(rr.frames.size()); ++m) {
            auto& mode_rep = rep.modes[static_cast<std::size_t>(m)];
            mode_rep.frames.insert(mode_rep.frames.end(),
                                   rr.frames[static_cast<std::size_t>(m)].begin(),
                                   rr.frames[static_cast<std::size_t>(m)].end());
            mode_rep.track_rows.insert(mode_rep.track_rows.end(),
                                       rr.track_rows[static_cast<std::size_t>(m)].begin(),
                                       rr.track_rows[static_cast<std::size_t>(m)].end());
        }
    }
    return rep;
}

void write_frame_csv(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "mode,run,t,nmse_s,nmse_l,nmse_o,miss_pred,extra_pred,miss_upd,extra_upd,"
           "align_new,align_old,epsilon,solver_iters,converged,failed\n";
    out.precision(12);
    for (const auto& mode : report.modes) {
        for (const auto& f : mode.frames) {
            out << mode.mode << ',' << f.run << ',' << f.t << ','
                << (f.den_s > 0 ? f.err_s / f.den_s : 0.0) << ','
                << (f.den_l > 0 ? f.err_l / f.den_l : 0.0) << ','
                << (f.den_o > 0 ? f.err_o / f.den_o : 0.0) << ',' << f.miss_pred
                << ',' << f.extra_pred << ',' << f.miss_upd << ',' << f.extra_upd
                << ',' << f.align_new << ',' << f.align_old << ',' << f.epsilon
                << ',' << f.solver_iters << ',' << (f.converged ? 1 : 0) << ','
                << (f.failed ? 1 : 0) << '\n';
        }
    }
}

void write_summary_csv(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "name,seed,mode,mc_runs,horizon,cum_nmse_s,cum_nmse_l,cum_nmse_o,"
           "mean_miss_pred,mean_extra_pred,mean_miss_upd,mean_extra_upd,"
           "final_align_new,final_align_old\n";
    out.precision(12);
    for (const auto& mode : report.modes) {
        out << report.name << ',' << report.seed << ',' << mode.mode << ','
            << report.mc_runs << ',' << report.horizon << ',' << mode.cum_nmse_s()
            << ',' << mode.cum_nmse_l() << ',' << mode.cum_nmse_o() << ','
            << mode.mean_miss_pred() << ',' << mode.mean_extra_pred() << ','
            << mode.mean_miss_upd() << ',' << mode.mean_extra_upd() << ','
            << mode.final_align_new() << ',' << mode.final_align_old() << '\n';
    }
}

void write_track_csv(const MetricsReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "mode,run,t,track,axis,p,v,sigma00,sigma01,sigma11,has_obs,p_obs,bound,omega\n";
    out.precision(12);
    for (const auto& mode : report.modes) {
        for (const auto& tr : mode.track_rows) {
            out << mode.mode << ',' << tr.run << ',' << tr.t << ',' << tr.track
                << ',' << tr.axis << ',' << tr.p << ',' << tr.v << ',' << tr.s00
                << ',' << tr.s01 << ',' << tr.s11 << ',' << (tr.has_obs ? 1 : 0)
                << ',' << tr.p_obs << ',' << tr.bound << ',' << tr.omega << '\n';
        }
    }
}

}  // namespace reprocs
