// hakf: dataset generation, tuner and curvature training, evaluation,
// single-run simulation and benchmark suites.
//
// Exit codes: 0 success, 1 module error, 2 usage error.

#include "hakf/bench.hpp"
#include "hakf/curvature.hpp"
#include "hakf/error.hpp"
#include "hakf/io.hpp"
#include "hakf/qlearn.hpp"
#include "hakf/random.hpp"
#include "hakf/runtime.hpp"
#include "hakf/trajectory.hpp"
#include "hakf/tuner.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace hakf;

namespace {

struct AppConfig {
    std::uint64_t seed = 1;
    std::string out_dir = ".";
    std::size_t threads = 1;
    double dt = models::kDefaultDt;
    std::size_t xi = kalman::kDefaultInnovationWindow;
    std::size_t n_window = curvature::kDefaultWindowSize;
    std::string candidates_path;  // empty: the built-in set
};

fs::path out_path(const AppConfig& app, const std::string& name) {
    const fs::path p(name);
    return p.is_absolute() ? p : fs::path(app.out_dir) / p;
}

std::vector<double> load_candidates(const AppConfig& app) {
    if (app.candidates_path.empty()) return qlearn::default_candidates();
    const std::string text = io::read_file(app.candidates_path);
    std::vector<double> out;
    std::size_t line = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        ++line;
        std::string_view row(text.data() + pos, end - pos);
        pos = end + 1;
        if (!row.empty() && row.back() == '\r') row.remove_suffix(1);
        if (row.empty() || row.front() == '#') continue;
        for (auto field : io::split(row)) {
            const double q = io::parse_double(field, line);
            if (!(q >= 0.0)) throw ParseError("candidate must be >= 0", line);
            out.push_back(q);
        }
    }
    if (out.empty()) throw FormatError("candidate file is empty: " + app.candidates_path);
    std::sort(out.begin(), out.end());
    return out;
}

// Written next to the outputs so every artifact carries the settings that made it.
void echo_config(const CLI::App& root, const AppConfig& app, const std::string& command) {
    fs::create_directories(app.out_dir);
    // Global keys plus this subcommand's, minus unset ones, so the file loads back via --config.
    std::istringstream all(root.config_to_str(true, false));
    std::string line, kept;
    while (std::getline(all, line)) {
        const auto key = line.substr(0, line.find('='));
        if (line.ends_with("=\"\"")) continue;
        if (key.find('.') == std::string::npos || key.starts_with(command + '.')) kept += line + '\n';
    }
    io::write_atomic(fs::path(app.out_dir) / (command + ".config.toml"), kept);
}

std::vector<models::ModelKind> parse_models(const std::vector<std::string>& names) {
    std::vector<models::ModelKind> out;
    for (const auto& n : names) out.push_back(models::parse_model_kind(n));
    return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report_progress(std::size_t done, std::size_t total) {
    if (done == total || done % 10 == 0) std::fprintf(stderr, "\r%zu/%zu", done, total);
    if (done == total) std::fputc('\n', stderr);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App root{"Hybrid adaptive Kalman filter toolkit"};
    root.require_subcommand(1);
    root.set_config("--config", "", "TOML config file; flags override it");

    AppConfig app;
    root.add_option("--seed", app.seed, "Base seed")->capture_default_str();
    root.add_option("--out-dir", app.out_dir, "Output directory")->envname("HAKF_OUT_DIR")->capture_default_str();
    root.add_option("--threads", app.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    root.add_option("--dt", app.dt, "Filter step, s")->check(CLI::PositiveNumber)->capture_default_str();
    root.add_option("--xi", app.xi, "Innovation window")->check(CLI::PositiveNumber)->capture_default_str();
    root.add_option("--n-window,--n", app.n_window, "Curvature window length")->check(CLI::Range(5, 10000))->capture_default_str();
    root.add_option("--candidates", app.candidates_path, "File of q candidates (comma or newline separated)")
        ->check(CLI::ExistingFile);

    // gen-dataset
    auto* gen = root.add_subcommand("gen-dataset", "Grid-search q* over a (kappa, speed, r) grid");
    std::string gen_model = "cv", gen_grid = "desk", gen_out;
    std::size_t gen_mc = qlearn::kDefaultMcIters;
    gen->add_option("--model", gen_model, "cv or ca")->capture_default_str();
    gen->add_option("--grid", gen_grid, "desk, full, or a kappa,speed,r CSV")->capture_default_str();
    gen->add_option("--mc", gen_mc, "Monte-Carlo runs per candidate")->check(CLI::PositiveNumber)->capture_default_str();
    gen->add_option("-o,--output,--out", gen_out, "Dataset CSV (default qgrid_<model>.csv)");

    // train
    auto* train = root.add_subcommand("train", "Fit the q* tuner on an oracle dataset");
    std::string train_data, train_algo = "knn", train_out;
    tuner::TrainConfig tcfg;
    train->add_option("--dataset", train_data, "Oracle dataset CSV")->required()->check(CLI::ExistingFile);
    train->add_option("--algorithm,--algo", train_algo, "knn or tree")->capture_default_str();
    train->add_option("--k", tcfg.k, "Neighbours")->check(CLI::PositiveNumber)->capture_default_str();
    train->add_option("--folds", tcfg.folds, "Cross-validation folds")->capture_default_str();
    train->add_option("-o,--output,--out", train_out, "Tuner JSON (default tuner_<model>.json)");

    // train-curvature
    auto* tcurv = root.add_subcommand("train-curvature", "Generate labeled windows and fit the curvature regressor");
    curvature::WindowDatasetConfig wcfg;
    std::string tc_model = "ca", tc_tuner, tc_windows, tc_save_windows, tc_out = "curvature.json";
    double tc_q = -1.0, tc_bar = 0.02;
    tcurv->add_option("--model", tc_model, "Filter model producing the windows")->capture_default_str();
    tcurv->add_option("--tuner", tc_tuner, "Tuner deciding each window's filter q")->check(CLI::ExistingFile);
    tcurv->add_option("--q", tc_q, "Constant filter q instead of a tuner");
    tcurv->add_option("--count", wcfg.count, "Windows to generate")->capture_default_str();
    tcurv->add_option("--sample-distance", wcfg.sampler.sample_distance, "Path distance between window points, m")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    tcurv->add_option("--windows", tc_windows, "Train on this window file instead of generating")->check(CLI::ExistingFile);
    tcurv->add_option("--save-windows", tc_save_windows, "Also write the generated windows");
    tcurv->add_option("--rmse-bar", tc_bar, "Fail if held-out RMSE exceeds this (<= 0 disables)")->capture_default_str();
    tcurv->add_option("-o,--output,--out", tc_out, "Estimator JSON")->capture_default_str();

    // curvature-eval
    auto* ceval = root.add_subcommand("curvature-eval", "RMSE of an estimator over a labeled window file");
    std::string ce_est = "analytic", ce_windows;
    ceval->add_option("--estimator", ce_est, "Estimator JSON or 'analytic'")->capture_default_str();
    ceval->add_option("--windows", ce_windows, "Labeled window CSV")->required()->check(CLI::ExistingFile);

    // simulate
    auto* sim = root.add_subcommand("simulate", "Run the tracker over one trajectory");
    runtime::RunConfig rc;
    std::string sim_input, sim_segments, sim_model = "cv", sim_adapt = "learned", sim_tuner, sim_est, sim_speed = "windowed",
                                         sim_init = "two-point", sim_out = "track.csv";
    auto* sim_in_opt = sim->add_option("--input,--traj", sim_input, "Trajectory CSV: t,zx,zy[,gt_x,gt_y]")->check(CLI::ExistingFile);
    sim->add_option("--segments,--compose", sim_segments, "Synthesize instead: line:L:S,arc:L:S:R,...")->excludes(sim_in_opt);
    sim->add_option("--model", sim_model, "cv or ca")->capture_default_str();
    sim->add_option("--adapt", sim_adapt, "q-zero, q-inf, const, innovation, generative, scaling, learned")
        ->capture_default_str();
    sim->add_option("--q0", rc.q0, "Initial / constant q")->capture_default_str();
    sim->add_option("--r", rc.r, "Measurement noise variance per axis, m^2")->capture_default_str();
    sim->add_option("--tuner", sim_tuner, "Tuner JSON (learned)")->check(CLI::ExistingFile);
    sim->add_option("--estimator", sim_est, "Curvature estimator JSON (learned; analytic if absent)")->check(CLI::ExistingFile);
    sim->add_option("--speed-mode", sim_speed, "instant or windowed")->capture_default_str();
    sim->add_option("--init", sim_init, "two-point or first-measurement")->capture_default_str();
    sim->add_option("--skip-warmup", rc.skip_warmup, "Steps excluded from metrics")->capture_default_str();
    sim->add_option("-o,--output,--out", sim_out, "Track CSV")->capture_default_str();

    // bench
    auto* bn = root.add_subcommand("bench", "Benchmark methods over a seeded trajectory suite");
    bench::SuiteConfig scfg;
    bench::BenchConfig bcfg;
    std::string bn_suite, bn_out = "bench", bn_tuner_cv, bn_tuner_ca, bn_est_cv, bn_est_ca;
    std::vector<std::string> bn_models{"cv", "ca"};
    std::vector<std::string> bn_adapts{"q-zero", "q-inf", "const", "innovation", "generative", "scaling"};
    bn->add_option("--suite", bn_suite, "Suite file, one compose spec per line")->check(CLI::ExistingFile);
    bn->add_option("--trajectories", scfg.trajectories, "Generated suite size")->capture_default_str();
    bn->add_option("--suite-seed", scfg.seed, "Generated suite seed")->capture_default_str();
    bn->add_option("--models", bn_models, "Models")->delimiter(',')->capture_default_str();
    bn->add_option("--adapts", bn_adapts, "Methods")->delimiter(',')->capture_default_str();
    bn->add_option("--rs,--r-list", bcfg.rs, "Measurement noise variances")->delimiter(',')->capture_default_str();
    bn->add_option("--const-qs", bcfg.const_qs, "Constant-q sweep")->delimiter(',')->capture_default_str();
    bn->add_option("--q0", bcfg.q0, "Initial q of adaptive methods")->capture_default_str();
    bn->add_option("--mc", bcfg.mc, "Noise realizations per trajectory")->check(CLI::PositiveNumber)->capture_default_str();
    bn->add_option("--skip-warmup", bcfg.skip_warmup, "Steps excluded from metrics")->capture_default_str();
    bn->add_option("--tuner-cv", bn_tuner_cv, "CV tuner JSON (enables cv/learned)")->check(CLI::ExistingFile);
    bn->add_option("--tuner-ca", bn_tuner_ca, "CA tuner JSON (enables ca/learned)")->check(CLI::ExistingFile);
    bn->add_option("--estimator-cv", bn_est_cv, "CV curvature estimator JSON")->check(CLI::ExistingFile);
    bn->add_option("--estimator-ca", bn_est_ca, "CA curvature estimator JSON")->check(CLI::ExistingFile);
    bn->add_option("-o,--output,--out", bn_out, "Output stem: <stem>.csv, <stem>.txt, <stem>.suite")->capture_default_str();

    if (argc < 2) {
        std::cout << root.help();
        return 2;
    }
    try {
        root.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc_parse = root.exit(e);
        return rc_parse == 0 ? 0 : 2;
    }

    try {
        const auto t0 = std::chrono::steady_clock::now();

        if (*gen) {
            echo_config(root, app, "gen-dataset");
            qlearn::BuildConfig cfg;
            cfg.model = models::parse_model_kind(gen_model);
            cfg.candidates = load_candidates(app);
            cfg.mc_iters = gen_mc;
            cfg.seed = app.seed;
            cfg.threads = app.threads;
            cfg.oracle.dt = app.dt;
            std::vector<qlearn::FeatureVector> grid;
            if (gen_grid == "desk") grid = qlearn::desk_grid();
            else if (gen_grid == "full") grid = qlearn::full_grid();
            else grid = qlearn::load_grid(gen_grid);
            const fs::path out =
                out_path(app, gen_out.empty() ? "qgrid_" + std::string(models::to_string(cfg.model)) + ".csv" : gen_out);
            const auto records = qlearn::build_dataset_file(grid, cfg, out, report_progress);
            std::printf("%zu records -> %s (%.1f s)\n", records.size(), out.c_str(), seconds_since(t0));
        } else if (*train) {
            echo_config(root, app, "train");
            tcfg.algorithm = tuner::parse_algorithm(train_algo);
            tcfg.seed = app.seed;
            const auto data = qlearn::load_dataset(train_data);
            const auto model = tuner::train_tuner(data, tcfg, load_candidates(app));
            const fs::path out =
                out_path(app, train_out.empty() ? "tuner_" + std::string(models::to_string(model.model_kind)) + ".json"
                                                : train_out);
            tuner::save_tuner(model, out);
            std::printf("%s tuner on %zu records", std::string(tuner::to_string(model.algorithm)).c_str(), data.size());
            if (model.cv_rmse) std::printf(", cv_rmse=%s", io::format_double(*model.cv_rmse).c_str());
            std::printf(" -> %s\n", out.c_str());
        } else if (*tcurv) {
            echo_config(root, app, "train-curvature");
            std::vector<curvature::LabeledWindow> windows;
            if (!tc_windows.empty()) {
                windows = curvature::load_windows(tc_windows);
            } else {
                wcfg.model = models::parse_model_kind(tc_model);
                wcfg.sampler.n = app.n_window;
                wcfg.sampler.dt = app.dt;
                wcfg.seed = app.seed;
                curvature::QPolicy policy;
                tuner::TunerModel tm;
                if (!tc_tuner.empty()) {
                    tm = tuner::load_tuner(tc_tuner);
                    if (tm.model_kind != wcfg.model) throw ConfigError("tuner model differs from --model");
                    policy = [&tm](double k, double s, double r) { return tuner::predict_q(tm, {k, s, r}); };
                } else if (tc_q >= 0.0) {
                    policy = [q = tc_q](double, double, double) { return q; };
                } else {
                    throw ConfigError("train-curvature needs --tuner, --q or --windows");
                }
                windows = curvature::make_window_dataset(wcfg, policy);
                if (!tc_save_windows.empty()) curvature::save_windows(windows, out_path(app, tc_save_windows));
            }
            curvature::FitConfig fc;
            fc.seed = app.seed;
            fc.sample_distance = wcfg.sampler.sample_distance;
            fc.rmse_bar.reset();  // checked below, after saving, so a near miss can be inspected
            const auto fit = curvature::fit_curvature_estimator(windows, fc);
            std::vector<curvature::LabeledWindow> test;
            for (std::size_t i : fit.test_indices) test.push_back(windows[i]);
            const double analytic = curvature::rmse(curvature::analytic_estimator(fit.estimator.n), test);
            const fs::path out = out_path(app, tc_out);
            curvature::save_estimator(fit.estimator, out);
            std::printf("%zu windows, held-out rmse=%s analytic=%s -> %s (%.1f s)\n", windows.size(),
                        io::format_double(*fit.estimator.train_rmse).c_str(), io::format_double(analytic).c_str(),
                        out.c_str(), seconds_since(t0));
            if (tc_bar > 0.0 && *fit.estimator.train_rmse > tc_bar) {
                throw TrainingError("curvature estimator missed the RMSE bar of " + io::format_double(tc_bar),
                                    *fit.estimator.train_rmse);
            }
        } else if (*ceval) {
            const auto windows = curvature::load_windows(ce_windows);
            const auto est = ce_est == "analytic"
                                 ? curvature::analytic_estimator(windows.empty() ? app.n_window : windows.front().window.size())
                                 : curvature::load_estimator(ce_est);
            std::printf("rmse=%s windows=%zu\n", io::format_double(curvature::rmse(est, windows)).c_str(), windows.size());
        } else if (*sim) {
            echo_config(root, app, "simulate");
            rc.model = models::parse_model_kind(sim_model);
            rc.adapt = runtime::parse_adapt_mode(sim_adapt);
            rc.speed_mode = runtime::parse_speed_mode(sim_speed);
            rc.init = runtime::parse_init_policy(sim_init);
            rc.xi = app.xi;
            rc.n_window = app.n_window;
            rc.seed = app.seed;
            rc.dt = app.dt;

            std::vector<kalman::Vec2> measurements;
            std::optional<std::vector<kalman::Vec2>> truth;
            if (!sim_input.empty()) {
                auto file = io::load_trajectory(sim_input);
                if (file.dt > 0.0) rc.dt = file.dt;
                measurements = std::move(file.measurements);
                truth = std::move(file.truth);
            } else if (!sim_segments.empty()) {
                const auto tr = traj::compose_mixed_trajectory(traj::parse_segments(sim_segments), rc.dt, rc.r, app.seed);
                measurements = tr.measurements;
                truth = tr.truth;
            } else {
                throw ConfigError("simulate needs --input or --segments");
            }

            tuner::TunerModel tm;
            curvature::CurvatureEstimator est;
            if (rc.adapt == runtime::AdaptMode::Learned) {
                if (sim_tuner.empty()) throw ConfigError("learned mode needs --tuner");
                tm = tuner::load_tuner(sim_tuner);
                rc.tuner = &tm;
                if (!sim_est.empty()) {
                    est = curvature::load_estimator(sim_est);
                    rc.curvature = &est;
                }
            }
            const auto out = runtime::run_adaptive_filter(measurements, rc, truth ? &*truth : nullptr);
            const fs::path path = out_path(app, sim_out);
            runtime::save_track(out, rc.model, path);
            std::printf("%zu steps -> %s", out.steps.size(), path.c_str());
            if (out.metrics) {
                std::printf(" prmse=%s pmae=%s", io::format_double(out.metrics->prmse).c_str(),
                            io::format_double(out.metrics->pmae).c_str());
            }
            std::printf("\n");
        } else if (*bn) {
            echo_config(root, app, "bench");
            const bench::Suite suite = bn_suite.empty() ? bench::make_suite(scfg) : bench::load_suite(bn_suite);
            bcfg.models = parse_models(bn_models);
            bcfg.adapts.clear();
            for (const auto& a : bn_adapts) bcfg.adapts.push_back(runtime::parse_adapt_mode(a));
            bcfg.dt = app.dt;
            bcfg.xi = app.xi;
            bcfg.n_window = app.n_window;
            bcfg.seed = app.seed;
            bcfg.threads = app.threads;

            std::map<models::ModelKind, tuner::TunerModel> tuners;
            std::map<models::ModelKind, curvature::CurvatureEstimator> estimators;
            auto attach = [&](models::ModelKind kind, const std::string& tpath, const std::string& epath) {
                if (tpath.empty()) return;
                tuners[kind] = tuner::load_tuner(tpath);
                if (tuners[kind].model_kind != kind) throw ConfigError("tuner " + tpath + " is for another model");
                bcfg.tuners[kind] = &tuners[kind];
                if (!epath.empty()) {
                    estimators[kind] = curvature::load_estimator(epath);
                    bcfg.estimators[kind] = &estimators[kind];
                }
            };
            attach(models::ModelKind::CV, bn_tuner_cv, bn_est_cv);
            attach(models::ModelKind::CA, bn_tuner_ca, bn_est_ca);
            if (!bcfg.tuners.empty() &&
                std::find(bcfg.adapts.begin(), bcfg.adapts.end(), runtime::AdaptMode::Learned) == bcfg.adapts.end()) {
                bcfg.adapts.push_back(runtime::AdaptMode::Learned);
            }
            // Learned rows only for models with a tuner.
            std::vector<metrics::BenchRow> rows;
            const bool learned = std::find(bcfg.adapts.begin(), bcfg.adapts.end(), runtime::AdaptMode::Learned) !=
                                 bcfg.adapts.end();
            if (learned && bcfg.tuners.size() < bcfg.models.size()) {
                auto with = bcfg, without = bcfg;
                with.models.clear();
                without.models.clear();
                for (auto m : bcfg.models) (bcfg.tuners.count(m) ? with : without).models.push_back(m);
                std::erase(without.adapts, runtime::AdaptMode::Learned);
                if (!without.models.empty()) rows = bench::run_bench(suite, without);
                if (!with.models.empty()) {
                    auto more = bench::run_bench(suite, with);
                    rows.insert(rows.end(), more.begin(), more.end());
                }
            } else {
                rows = bench::run_bench(suite, bcfg);
            }
            const auto table = metrics::bench_table(rows);
            const fs::path stem = out_path(app, bn_out);
            io::write_atomic(fs::path(stem).concat(".csv"), table.csv);
            io::write_atomic(fs::path(stem).concat(".txt"), table.text);
            bench::save_suite(suite, fs::path(stem).concat(".suite"));
            std::cout << table.text << "(" << seconds_since(t0) << " s)\n";
        }
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "hakf: %s\n", e.what());
        return 1;
    }
}
