#pragma once

// Online tracker: a Kalman filter whose process noise is chosen each step by
// one of the fixed, model-based adaptive or learned policies.

#include "hakf/curvature.hpp"
#include "hakf/kalman.hpp"
#include "hakf/metrics.hpp"
#include "hakf/motion_model.hpp"
#include "hakf/tuner.hpp"

#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hakf::runtime {

using kalman::Vec2;
using kalman::Vector;

enum class AdaptMode {
    QZero,       // q = 1e-9
    QInf,        // q = 1e9, measurement-only
    Const,       // q = q0 throughout
    Innovation,  // Q̂ = K C Kᵀ
    Generative,  // residual covariance of posterior states
    Scaling,     // Q̂ = sqrt(α) Q̂_prev
    Learned,     // tuner(κ̂, ŝ, r), hedged
};

std::string_view to_string(AdaptMode m);
AdaptMode parse_adapt_mode(std::string_view text);

enum class SpeedMode { Instant, Windowed };
std::string_view to_string(SpeedMode m);
SpeedMode parse_speed_mode(std::string_view text);

enum class InitPolicy {
    TwoPoint,          // x from z0, z1 differencing with its exact error covariance
    FirstMeasurement,  // x = (z0, 0), P0 = diag(r, r, 100, 100[, 10, 10])
};
std::string_view to_string(InitPolicy p);
InitPolicy parse_init_policy(std::string_view text);

inline constexpr double kFirstMeasurementVelocityVar = 100.0;
inline constexpr double kInitAccelVariance = 10.0;

struct RunConfig {
    models::ModelKind model = models::ModelKind::CV;
    double dt = models::kDefaultDt;
    std::size_t xi = kalman::kDefaultInnovationWindow;
    std::size_t n_window = curvature::kDefaultWindowSize;
    double q0 = 0.04;
    double r = 1.0;
    AdaptMode adapt = AdaptMode::Const;
    SpeedMode speed_mode = SpeedMode::Windowed;
    InitPolicy init = InitPolicy::TwoPoint;
    double q_cap = 30.0;  // adaptive Q diagonal ceiling, the largest candidate
    std::size_t skip_warmup = 0;
    const tuner::TunerModel* tuner = nullptr;                  // Learned only
    const curvature::CurvatureEstimator* curvature = nullptr;  // Learned; analytic if null
    std::uint64_t seed = 0;  // provenance only; a run draws no random numbers
};

/// Throws ConfigError on out-of-range fields or a tuner/model mismatch.
void validate(const RunConfig& cfg);

struct StepRecord {
    Vector x_hat;
    Vector p_diag;
    double q_applied = 0.0;  // mean of the trailing diagonal of the Q used to reach this step
    double kappa = std::numeric_limits<double>::quiet_NaN();  // NaN until a window exists
    double speed = std::numeric_limits<double>::quiet_NaN();
};

struct TrackOutput {
    std::vector<StepRecord> steps;
    std::optional<metrics::MetricsReport> metrics;

    std::vector<Vec2> positions() const;
};

/// ‖(vx, vy)‖; throws ConfigError for a state without velocity.
double estimate_speed(const Vector& x_hat);

/// ‖mean of the velocity estimates‖.
double windowed_speed(std::span<const Vec2> velocities);

/// Runs the tracker. Throws DivergenceError (with step) when the state turns non-finite.
TrackOutput run_adaptive_filter(std::span<const Vec2> measurements, const RunConfig& cfg,
                                const std::vector<Vec2>* truth = nullptr);

/// Rows "k,x..,q,kappa,speed", then a "# prmse=.. pmae=.." footer when metrics exist.
std::string format_track(const TrackOutput& out, models::ModelKind model);
void save_track(const TrackOutput& out, models::ModelKind model, const std::filesystem::path& path);

}  // namespace hakf::runtime
