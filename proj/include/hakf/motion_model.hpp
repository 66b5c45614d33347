#pragma once

#include "hakf/kalman.hpp"

#include <string>
#include <string_view>

namespace hakf::models {

using kalman::Matrix;

enum class ModelKind { CV, CA };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);  // "cv" / "ca", case-insensitive

int state_dim(ModelKind kind);

// 200 Hz. See README ("Step size") for why this is not 10 Hz.
inline constexpr double kDefaultDt = 0.005;

/// Φ, H and the process-noise placement for a nearly-CV or nearly-CA model.
struct MotionModel {
    ModelKind kind = ModelKind::CV;
    double dt = kDefaultDt;
    Matrix phi;
    Matrix h;
    int state_dim = 4;
};

/// Throws ConfigError when dt is not a positive finite number.
MotionModel make_model(ModelKind kind, double dt = kDefaultDt);

struct NoiseSpec {
    double q_x = 0.0;
    double q_y = 0.0;
    double r_x = 1.0;
    double r_y = 1.0;

    static NoiseSpec isotropic(double q, double r) { return {q, q, r, r}; }
};

void validate(const NoiseSpec& spec);

/// Zero everywhere except diag(q_x, q_y) on the trailing 2x2 block.
Matrix q_matrix(const MotionModel& model, const NoiseSpec& spec);

/// Shorthand for q_matrix with q_x = q_y = q.
Matrix q_matrix(const MotionModel& model, double q);

/// diag(r_x, r_y).
Matrix r_matrix(const NoiseSpec& spec);
Matrix r_matrix(double r);

}  // namespace hakf::models
