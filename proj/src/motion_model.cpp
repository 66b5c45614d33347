#include "hakf/motion_model.hpp"

#include "hakf/error.hpp"

#include <cctype>
#include <cmath>
#include <string>

namespace hakf::models {

std::string_view to_string(ModelKind kind) { return kind == ModelKind::CV ? "cv" : "ca"; }

ModelKind parse_model_kind(std::string_view text) {
    std::string lower(text);
    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lower == "cv") return ModelKind::CV;
    if (lower == "ca") return ModelKind::CA;
    throw ConfigError("unknown model kind '" + std::string(text) + "' (expected cv or ca)");
}

int state_dim(ModelKind kind) { return kind == ModelKind::CV ? 4 : 6; }

MotionModel make_model(ModelKind kind, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw ConfigError("step size must be positive, got " + std::to_string(dt));
    }
    const int n = state_dim(kind);
    MotionModel m{.kind = kind, .dt = dt, .phi = Matrix::Identity(n, n), .h = Matrix::Zero(2, n), .state_dim = n};
    const auto i2 = Eigen::Matrix2d::Identity();
    m.phi.block<2, 2>(0, 2) = dt * i2;
    if (kind == ModelKind::CA) {
        m.phi.block<2, 2>(0, 4) = 0.5 * dt * dt * i2;
        m.phi.block<2, 2>(2, 4) = dt * i2;
    }
    m.h.block<2, 2>(0, 0) = i2;
    return m;
}

void validate(const NoiseSpec& spec) {
    for (double v : {spec.q_x, spec.q_y, spec.r_x, spec.r_y}) {
        if (!std::isfinite(v)) throw ConfigError("noise parameters must be finite");
    }
    if (spec.q_x < 0.0 || spec.q_y < 0.0) throw ConfigError("process noise intensity must be >= 0");
    if (spec.r_x <= 0.0 || spec.r_y <= 0.0) throw ConfigError("measurement variance must be > 0");
}

Matrix q_matrix(const MotionModel& model, const NoiseSpec& spec) {
    validate(spec);
    const int n = model.state_dim;
    Matrix q = Matrix::Zero(n, n);
    q(n - 2, n - 2) = spec.q_x;
    q(n - 1, n - 1) = spec.q_y;
    return q;
}

Matrix q_matrix(const MotionModel& model, double q) {
    return q_matrix(model, NoiseSpec::isotropic(q, 1.0));
}

Matrix r_matrix(const NoiseSpec& spec) {
    validate(spec);
    return Eigen::Vector2d(spec.r_x, spec.r_y).asDiagonal();
}

Matrix r_matrix(double r) { return r_matrix(NoiseSpec::isotropic(0.0, r)); }

}  // namespace hakf::models
