#pragma once

// Curvature of a short window of estimated positions.
//
// The analytic estimate averages |det(L′, L″)| / ‖L′‖³ over interior points
// using central differences. The fitted estimator maps rotation-invariant
// window features to κ with a small network; it exists because finite
// differences of noisy filter output are biased high.

#include "hakf/mlp.hpp"
#include "hakf/motion_model.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace hakf::curvature {

using Vec2 = Eigen::Vector2d;

inline constexpr std::size_t kDefaultWindowSize = 20;
inline constexpr std::size_t kMinWindowSize = 5;

// Path distance between consecutive window samples. At 200 Hz twenty
// consecutive estimates cover a few centimetres, far too little to see a
// turn through the filter noise, so the window is decimated by distance.
inline constexpr double kDefaultSampleDistance = 0.35;

// Range of the training curvatures; fitted predictions are clamped to it.
inline constexpr double kMinCurvature = 0.0;
inline constexpr double kMaxCurvature = 1.0;

struct PositionWindow {
    std::vector<Vec2> points;  // oldest first
    double spacing = 1.0;      // seconds between consecutive points

    std::size_t size() const { return points.size(); }
};

/// Throws ConfigError unless N ≥ 5, spacing > 0, all points finite and not all identical.
void validate(const PositionWindow& w);

/// Signed curvature det(d1, d2) / ‖d1‖³. Throws UndefinedCurvatureError when ‖d1‖ ≤ 1e-9.
double point_curvature(const Vec2& d1, const Vec2& d2);

/// Mean |κ| over the interior points using central differences.
double segment_curvature(const PositionWindow& w);

/// Rotation- and translation-invariant summary of a window, fed to the network.
inline constexpr int kFeatureCount = 8;
Eigen::VectorXd window_features(const PositionWindow& w);

/// Picks every stride-th estimate so samples sit ~sample_distance apart.
struct WindowSampler {
    std::size_t n = kDefaultWindowSize;
    double sample_distance = kDefaultSampleDistance;
    double dt = models::kDefaultDt;
    double min_speed = 2.0;  // slowest training speed; bounds the stride

    std::size_t stride(double speed) const;
    std::size_t max_stride() const { return stride(min_speed); }
    /// Estimates that must be retained to cut a window at any speed.
    std::size_t history_needed() const { return (n - 1) * max_stride() + 1; }
};

/// Cuts a window ending at the newest entry of `history` (oldest first).
/// Returns nullopt while the history is too short for the current stride.
std::optional<PositionWindow> sample_window(std::span<const Vec2> history, double speed,
                                            const WindowSampler& sampler);

enum class EstimatorKind { Analytic, Fitted };

struct CurvatureEstimator {
    EstimatorKind kind = EstimatorKind::Analytic;
    std::size_t n = kDefaultWindowSize;
    double sample_distance = kDefaultSampleDistance;
    Eigen::VectorXd feature_mean;
    Eigen::VectorXd feature_scale;
    nn::Mlp net;
    std::optional<double> train_rmse;  // held-out RMSE of a fitted estimator, 1/m
};

CurvatureEstimator analytic_estimator(std::size_t n = kDefaultWindowSize);

/// Nonnegative curvature. Throws ConfigError when the window length differs from est.n.
double estimate_curvature(const CurvatureEstimator& est, const PositionWindow& w);

struct LabeledWindow {
    PositionWindow window;
    double kappa = 0.0;
    double speed = 0.0;  // generating speed and noise, when known
    double r = 0.0;
};

/// RMSE of `est` over a labeled set.
double rmse(const CurvatureEstimator& est, std::span<const LabeledWindow> data);

struct FitConfig {
    nn::MlpConfig mlp;
    double test_fraction = 0.2;
    double sample_distance = kDefaultSampleDistance;  // recorded for the runtime sampler
    std::optional<double> rmse_bar = 0.02;  // TrainingError if the held-out RMSE exceeds it
    std::uint64_t seed = 1;
};

struct FitResult {
    CurvatureEstimator estimator;
    std::vector<std::size_t> test_indices;  // rows of the input held out for evaluation
};

/// Shuffles, holds out test_fraction, trains on the rest, records held-out RMSE.
FitResult fit_curvature_estimator(std::span<const LabeledWindow> data, const FitConfig& cfg);

/// Process-noise intensity the dataset filter runs at for a given circle.
using QPolicy = std::function<double(double kappa, double speed, double r)>;

struct WindowDatasetConfig {
    models::ModelKind model = models::ModelKind::CA;
    std::size_t count = 30000;
    WindowSampler sampler;
    double kappa_min = 1.0 / 200.0;
    double kappa_max = 1.0;
    double speed_min = 2.0;
    double speed_max = 40.0;
    double r_min = 0.2;
    double r_max = 4.0;
    double line_fraction = 0.05;  // straight windows with κ = 0
    double clean_fraction = 0.02;  // windows cut from the exact path instead of the filter output
    double settle_time = 2.0;     // filter run-in before the window starts, s
    std::uint64_t seed = 1;
};

/// Labeled windows cut from the posterior of a constant-q filter run on
/// randomly rotated noisy circles (and a few lines), parameters drawn
/// uniformly from the configured ranges.
std::vector<LabeledWindow> make_window_dataset(const WindowDatasetConfig& cfg, const QPolicy& q_policy);

void save_estimator(const CurvatureEstimator& est, const std::filesystem::path& path);
CurvatureEstimator load_estimator(const std::filesystem::path& path);
nlohmann::json to_json(const CurvatureEstimator& est);
CurvatureEstimator estimator_from_json(const nlohmann::json& j);

/// Labeled window file: one window per line, "kappa,spacing,x0,y0,x1,y1,...".
void save_windows(std::span<const LabeledWindow> data, const std::filesystem::path& path);
std::vector<LabeledWindow> load_windows(const std::filesystem::path& path);

}  // namespace hakf::curvature
