// Command-line front end: preset and config-driven experiment runs, ground
// truth generation, and basis initialization from external frame files.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "reprocs/frame_io.hpp"
#include "reprocs/pipeline.hpp"
#include "reprocs/presets.hpp"

namespace fs = std::filesystem;
using namespace reprocs;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

ConfigMap resolve_config(const std::string& preset, const std::string& config_path,
                         const std::vector<std::string>& sets) {
    ConfigMap cfg;
    if (!config_path.empty()) {
        cfg = parse_config_file(config_path);
        const auto it = cfg.find("preset");
        if (it != cfg.end()) {
            ConfigMap base = preset_config(it->second);
            cfg.erase(it);
            for (const auto& [k, v] : cfg) base[k] = v;
            cfg = std::move(base);
        }
    } else if (!preset.empty()) {
        cfg = preset_config(preset);
    } else {
        throw std::invalid_argument("run needs a preset name or --config PATH");
    }
    for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects key=value, got '" + s + "'");
        cfg[s.substr(0, eq)] = s.substr(eq + 1);
    }
    return cfg;
}

// Per-frame means across runs, for plot-ready output.
void write_plot_csvs(const MetricsReport& report, const fs::path& dir) {
    struct Acc {
        double s = 0, l = 0, o = 0;
        double mp = 0, ep = 0, mu = 0, eu = 0;
        double an = 0, ao = 0;
        int count = 0, pred_count = 0, align_count = 0;
    };
    std::ofstream nmse(dir / "plot_nmse.csv");
    std::ofstream supp(dir / "plot_support.csv");
    std::ofstream align(dir / "plot_align.csv");
    nmse << "mode,t,nmse_s,nmse_l,nmse_o\n";
    supp << "mode,t,miss_pred,extra_pred,miss_upd,extra_upd\n";
    align << "mode,t,align_new,align_old\n";
    nmse.precision(12);
    supp.precision(12);
    align.precision(12);
    for (const auto& mode : report.modes) {
        std::map<int, Acc> by_t;
        for (const auto& f : mode.frames) {
            Acc& a = by_t[f.t];
            a.s += f.den_s > 0 ? f.err_s / f.den_s : 0.0;
            a.l += f.den_l > 0 ? f.err_l / f.den_l : 0.0;
            a.o += f.den_o > 0 ? f.err_o / f.den_o : 0.0;
            a.mu += f.miss_upd;
            a.eu += f.extra_upd;
            ++a.count;
            if (f.miss_pred >= 0) {
                a.mp += f.miss_pred;
                a.ep += f.extra_pred;
                ++a.pred_count;
            }
            if (f.align_new >= 0.0 || f.align_old >= 0.0) {
                a.an += f.align_new >= 0.0 ? f.align_new : 0.0;
                a.ao += f.align_old >= 0.0 ? f.align_old : 0.0;
                ++a.align_count;
            }
        }
        for (const auto& [t, a] : by_t) {
            const double c = a.count;
            nmse << mode.mode << ',' << t << ',' << a.s / c << ',' << a.l / c
                 << ',' << a.o / c << '\n';
            supp << mode.mode << ',' << t << ','
                 << (a.pred_count ? a.mp / a.pred_count : -1.0) << ','
                 << (a.pred_count ? a.ep / a.pred_count : -1.0) << ','
                 << a.mu / c << ',' << a.eu / c << '\n';
            if (a.align_count)
                align << mode.mode << ',' << t << ',' << a.an / a.align_count
                      << ',' << a.ao / a.align_count << '\n';
        }
    }
}

int run_ingested(const RunPlan& plan, const fs::path& out_dir) {
    SubspaceEstimate est = SubspaceEstimate::load(plan.basis_checkpoint);
    const Eigen::MatrixXd frames = read_frames(plan.frames_file);
    if (frames.rows() != est.n()) {
        std::cerr << "frame dimension " << frames.rows()
                  << " does not match checkpoint dimension " << est.n() << "\n";
        return kExitValidation;
    }
    const int horizon = plan.spec.horizon > 0
                            ? std::min<int>(plan.spec.horizon,
                                            static_cast<int>(frames.cols()))
                            : static_cast<int>(frames.cols());
    ReprocsPipeline pipe(std::move(est), plan.spec.pipe);
    if (horizon > 0) pipe.set_initial_lowrank(frames.col(0));

    std::ofstream out(out_dir / "frames.csv");
    out << "t,support_size,epsilon,solver_iters,converged,failed\n";
    out.precision(12);
    for (int t = 1; t <= horizon; ++t) {
        const FrameOutput fo = pipe.step(frames.col(t - 1));
        out << t << ',' << fo.recovery.support.size() << ',' << fo.epsilon << ','
            << fo.solver_iters << ',' << (fo.solver_converged ? 1 : 0) << ','
            << (fo.failed ? 1 : 0) << '\n';
    }
    std::ofstream summary(out_dir / "summary.csv");
    summary << "name,frames,rank\n"
            << plan.spec.name << ',' << horizon << ',' << pipe.subspace().rank()
            << '\n';
    std::cout << "processed " << horizon << " ingested frames\n";
    return 0;
}

int cmd_run(const std::string& preset, const std::string& config_path,
            const std::vector<std::string>& sets, std::int64_t seed,
            int mc_runs, int jobs, const std::string& out) {
    RunPlan plan;
    try {
        ConfigMap cfg = resolve_config(preset, config_path, sets);
        if (seed >= 0) cfg["seed"] = std::to_string(seed);
        if (mc_runs > 0) cfg["mc_runs"] = std::to_string(mc_runs);
        plan = build_run(cfg);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    try {
        const fs::path out_dir(out);
        fs::create_directories(out_dir);
        if (!plan.frames_file.empty()) return run_ingested(plan, out_dir);

        const MetricsReport report = run_experiment(plan.spec, jobs);
        write_summary_csv(report, (out_dir / "summary.csv").string());
        write_frame_csv(report, (out_dir / "frames.csv").string());
        bool any_tracks = false;
        for (const auto& m : report.modes) any_tracks |= !m.track_rows.empty();
        if (any_tracks) write_track_csv(report, (out_dir / "tracks.csv").string());
        write_plot_csvs(report, out_dir);
        for (const auto& m : report.modes)
            std::cout << m.mode << ": cumulative NMSE S=" << m.cum_nmse_s()
                      << " L=" << m.cum_nmse_l() << " O=" << m.cum_nmse_o()
                      << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int cmd_generate(const std::string& spec_path, const std::string& out) {
    RunPlan plan;
    try {
        ConfigMap cfg = resolve_config("", spec_path, {});
        plan = build_run(cfg);
        if (!plan.frames_file.empty())
            throw std::invalid_argument("generate needs a synthetic spec");
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    try {
        const fs::path out_dir(out);
        fs::create_directories(out_dir);
        const GeneratedRun data = generate_run(plan.spec, 0);
        const int n = plan.spec.n, h = plan.spec.horizon;
        Eigen::MatrixXd m(n, h), l(n, h), s(n, h), o(n, h), mask(n, h);
        mask.setZero();
        for (int t = 0; t < h; ++t) {
            m.col(t) = data.m[static_cast<std::size_t>(t)];
            l.col(t) = data.l[static_cast<std::size_t>(t)];
            s.col(t) = data.s[static_cast<std::size_t>(t)];
            o.col(t) = data.o[static_cast<std::size_t>(t)];
            for (int i : data.t_true[static_cast<std::size_t>(t)]) mask(i, t) = 1.0;
        }
        write_frames((out_dir / "M.frames").string(), m);
        write_frames((out_dir / "L.frames").string(), l);
        write_frames((out_dir / "S.frames").string(), s);
        write_frames((out_dir / "O.frames").string(), o);
        write_frames((out_dir / "T.frames").string(), mask);
        write_frames((out_dir / "train.frames").string(), data.training);
        std::cout << "wrote " << h << " frames of dimension " << n << "\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return kExitRuntime;
    }
}

int cmd_ingest(const std::string& frames_path, int train, double alpha0,
               const std::string& out) {
    Eigen::MatrixXd frames;
    try {
        if (train < 1) throw std::invalid_argument("--train must be >= 1");
        frames = read_frames(frames_path);
        if (train > frames.cols())
            throw std::invalid_argument("--train exceeds the frame count");
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    try {
        SubspaceEstimate est = SubspaceEstimate::init_truncated_svd(
            frames.leftCols(train), alpha0, /*subtract_mean=*/true);
        est.save(out);
        std::cout << "checkpoint rank " << est.rank() << " from " << train
                  << " training frames\n";
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return kExitRuntime;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse + low-rank frame separation"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "Run an experiment preset or config");
    std::string preset, config_path, out = ".";
    std::vector<std::string> sets;
    std::int64_t seed = -1;
    int mc_runs = 0;
    int jobs = static_cast<int>(std::thread::hardware_concurrency());
    if (jobs < 1) jobs = 1;
    run->add_option("preset", preset, "Preset name");
    run->add_option("--config", config_path, "Config file path");
    run->add_option("--seed", seed, "Override the base seed");
    run->add_option("--mc-runs", mc_runs, "Override the Monte-Carlo run count");
    run->add_option("--jobs", jobs, "Parallel Monte-Carlo workers");
    run->add_option("--out", out, "Output directory");
    run->add_option("--set", sets, "key=value config override (repeatable)");

    auto* gen = app.add_subcommand("generate", "Write ground-truth frame files");
    std::string gen_spec, gen_out;
    gen->add_option("--spec", gen_spec, "Config file describing the generator")
        ->required();
    gen->add_option("--out", gen_out, "Output directory")->required();

    auto* ing = app.add_subcommand("ingest", "Initialize a basis from frames");
    std::string ing_frames, ing_out;
    int ing_train = 0;
    double ing_alpha0 = 1.0;
    ing->add_option("--frames", ing_frames, "Input frame file")->required();
    ing->add_option("--train", ing_train, "Number of training frames")->required();
    ing->add_option("--alpha0", ing_alpha0, "Singular-value retention threshold");
    ing->add_option("--out", ing_out, "Checkpoint output path")->required();

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return cmd_run(preset, config_path, sets, seed, mc_runs, jobs, out);
    if (gen->parsed()) return cmd_generate(gen_spec, gen_out);
    return cmd_ingest(ing_frames, ing_train, ing_alpha0, ing_out);
}
