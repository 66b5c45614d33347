#pragma once

// Benchmark harness: a seeded suite of line/arc trajectories, run through
// every (model, r, method) combination on shared noise realizations.

#include "hakf/curvature.hpp"
#include "hakf/metrics.hpp"
#include "hakf/runtime.hpp"
#include "hakf/trajectory.hpp"
#include "hakf/tuner.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace hakf::bench {

using Suite = std::vector<std::vector<traj::Segment>>;

struct SuiteConfig {
    std::size_t trajectories = 20;
    std::size_t segments = 5;  // alternating line / arc, starting with a line
    double min_speed = 2.0;
    double max_speed = 40.0;
    double min_kappa = 1.0 / 200.0;  // arcs: log-uniform curvature
    double max_kappa = 1.0;
    double min_segment_time = 5.0;  // s
    double max_segment_time = 15.0;
    std::uint64_t seed = 7;
};

Suite make_suite(const SuiteConfig& cfg = {});

/// One trajectory per line in the compose syntax ("line:L:S,arc:L:S:R,...").
std::string format_suite(const Suite& suite);
Suite parse_suite(std::string_view text);
void save_suite(const Suite& suite, const std::filesystem::path& path);
Suite load_suite(const std::filesystem::path& path);

struct Method {
    models::ModelKind model = models::ModelKind::CV;
    runtime::AdaptMode mode = runtime::AdaptMode::Const;
    double q0 = 0.04;

    std::string label() const;  // "cv/innovation", "ca/const:0.1", ...
};

struct BenchConfig {
    std::vector<models::ModelKind> models{models::ModelKind::CV, models::ModelKind::CA};
    std::vector<runtime::AdaptMode> adapts{runtime::AdaptMode::QZero,      runtime::AdaptMode::QInf,
                                           runtime::AdaptMode::Const,      runtime::AdaptMode::Innovation,
                                           runtime::AdaptMode::Generative, runtime::AdaptMode::Scaling};
    std::vector<double> rs{0.5, 2.0, 4.0};
    std::vector<double> const_qs{0.01, 0.1, 1.0, 10.0, 30.0};  // one Const method per value
    double q0 = 0.04;  // starting Q of the adaptive methods
    std::size_t mc = 1;
    double dt = models::kDefaultDt;
    std::size_t xi = kalman::kDefaultInnovationWindow;
    std::size_t n_window = curvature::kDefaultWindowSize;
    std::size_t skip_warmup = 0;
    std::uint64_t seed = 11;
    std::size_t threads = 1;
    std::map<models::ModelKind, const tuner::TunerModel*> tuners;                  // for Learned
    std::map<models::ModelKind, const curvature::CurvatureEstimator*> estimators;  // for Learned
};

/// The methods a config expands to, in table order.
std::vector<Method> methods(const BenchConfig& cfg);

/// Mean metrics per (method, r) over every trajectory and MC realization.
/// A diverged run scores +∞.
std::vector<metrics::BenchRow> run_bench(const Suite& suite, const BenchConfig& cfg);

}  // namespace hakf::bench
