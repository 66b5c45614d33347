#include "hakf/kalman.hpp"

#include "hakf/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hakf::kalman {

namespace {

constexpr double kSymmetryTol = 1e-9;
constexpr double kPsdTol = 1e-9;

std::string shape(const Matrix& m) {
    return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, std::string_view what) {
    if (m.rows() != rows || m.cols() != cols) {
        throw ConfigError(std::string(what) + " must be " + std::to_string(rows) + "x" +
                          std::to_string(cols) + ", got " + shape(m));
    }
}

// Eigenvalues of a symmetric 2x2 matrix, ascending.
std::pair<double, double> eig2(const Mat2& s) {
    const double mean = 0.5 * (s(0, 0) + s(1, 1));
    const double half_diff = 0.5 * (s(0, 0) - s(1, 1));
    const double rad = std::hypot(half_diff, s(0, 1));
    return {mean - rad, mean + rad};
}

}  // namespace

InnovationWindow::InnovationWindow(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("innovation window capacity must be >= 1");
}

void InnovationWindow::push(const Vec2& nu) {
    if (items_.size() == capacity_) items_.pop_front();
    items_.push_back(nu);
}

bool is_state_dim(Eigen::Index n) { return n == 4 || n == 6; }

void validate_state(const Vector& x) {
    if (!is_state_dim(x.size())) {
        throw ConfigError("state vector length must be 4 or 6, got " + std::to_string(x.size()));
    }
    if (!x.allFinite()) throw ConfigError("state vector has non-finite entries");
}

void validate_covariance(const Matrix& p, std::string_view what) {
    const std::string name(what);
    if (p.rows() != p.cols()) throw ConfigError(name + " must be square, got " + shape(p));
    if (!p.allFinite()) throw ConfigError(name + " has non-finite entries");
    if (p.size() == 0) return;
    const double scale = std::max(p.cwiseAbs().maxCoeff(), 1e-300);
    if ((p - p.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol * scale) {
        throw ConfigError(name + " is not symmetric");
    }
    const Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(p), Eigen::EigenvaluesOnly);
    const double lmax = es.eigenvalues().maxCoeff();
    if (es.eigenvalues().minCoeff() < -kPsdTol * std::max(lmax, 0.0) - 1e-300) {
        throw ConfigError(name + " is not positive semidefinite");
    }
}

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

FilterState initialize(const Vector& x0, const Matrix& p0, std::size_t window_capacity) {
    validate_state(x0);
    if (p0.rows() != x0.size() || p0.cols() != x0.size()) {
        throw ConfigError("initial covariance " + shape(p0) + " does not match state length " +
                          std::to_string(x0.size()));
    }
    validate_covariance(p0, "initial covariance");
    FilterState fs{.x_hat = x0,
                   .p = p0,
                   .k_gain = Matrix::Zero(x0.size(), 2),
                   .innovations = InnovationWindow(window_capacity)};
    return fs;
}

FilterState propagate(FilterState fs, const Matrix& phi, const Matrix& q) {
    const Eigen::Index n = fs.dim();
    require_shape(phi, n, n, "transition matrix");
    require_shape(q, n, n, "process noise");
    // Cheap necessary conditions only; full PSD checks happen at construction.
    if ((q.diagonal().array() < 0.0).any()) throw ConfigError("process noise has a negative variance");

    fs.x_hat = phi * fs.x_hat;
    fs.p = symmetrize(phi * fs.p * phi.transpose() + q);
    if (!fs.x_hat.allFinite() || !fs.p.allFinite()) {
        throw NumericalError("non-finite result in propagation", fs.step);
    }
    return fs;
}

Matrix gain(const Matrix& p_minus, const Matrix& h, const Matrix& r) {
    const Eigen::Index n = p_minus.rows();
    require_shape(p_minus, n, n, "prior covariance");
    require_shape(h, 2, n, "observation matrix");
    require_shape(r, 2, 2, "measurement noise");

    const Mat2 s = symmetrize(h * p_minus * h.transpose() + r);
    const auto [lmin, lmax] = eig2(s);
    if (!(lmin > 0.0) || lmax / lmin > kMaxConditionNumber) {
        throw NumericalError("innovation covariance is singular or ill-conditioned");
    }
    const Eigen::LLT<Mat2> llt(s);
    // K = P⁻Hᵀ S⁻¹  ⇔  Kᵀ = S⁻¹ H P⁻ (S and P⁻ symmetric).
    return llt.solve(h * p_minus).transpose();
}

FilterState update(FilterState fs, const Measurement& z, const Matrix& h, const Matrix& r) {
    const Eigen::Index n = fs.dim();
    Matrix k;
    try {
        k = gain(fs.p, h, r);
    } catch (const NumericalError& e) {
        throw NumericalError(e.what(), z.step_index);
    }
    const Vec2 nu = z.z - h * fs.x_hat;

    fs.innovation_cov = symmetrize(h * fs.p * h.transpose() + r);
    fs.x_hat += k * nu;
    fs.p = symmetrize((Matrix::Identity(n, n) - k * h) * fs.p);
    fs.k_gain = std::move(k);
    fs.last_innovation = nu;
    fs.innovations.push(nu);
    ++fs.step;

    if (!fs.x_hat.allFinite() || !fs.p.allFinite()) {
        throw NumericalError("non-finite result in measurement update", z.step_index);
    }
    return fs;
}

Matrix limit_gain_q_zero(const Matrix& p_prev, const Matrix& phi, const Matrix& h,
                         const Matrix& r) {
    const Eigen::Index n = p_prev.rows();
    require_shape(p_prev, n, n, "covariance");
    require_shape(phi, n, n, "transition matrix");
    require_shape(h, 2, n, "observation matrix");
    require_shape(r, 2, 2, "measurement noise");

    const Matrix m = phi * p_prev * phi.transpose();
    const Eigen::FullPivLU<Matrix> lu(m);
    if (!lu.isInvertible()) throw NumericalError("Φ P Φᵀ is singular");
    const Matrix r_inv = r.inverse();
    const Matrix info = lu.inverse() + h.transpose() * r_inv * h;
    return info.inverse() * h.transpose() * r_inv;
}

PartialState lse_estimate(const Measurement& z, const Matrix& h, const Matrix& r) {
    if (h.rows() != 2) throw ConfigError("observation matrix must have 2 rows, got " + shape(h));
    require_shape(r, 2, 2, "measurement noise");

    PartialState out;
    for (Eigen::Index c = 0; c < h.cols(); ++c) {
        if (h.col(c).cwiseAbs().maxCoeff() > 0.0) out.components.push_back(c);
    }
    const auto m = static_cast<Eigen::Index>(out.components.size());
    Matrix hs(2, m);
    for (Eigen::Index j = 0; j < m; ++j) hs.col(j) = h.col(out.components[static_cast<std::size_t>(j)]);

    const Matrix r_inv = r.inverse();
    const Matrix normal = hs.transpose() * r_inv * hs;
    const Eigen::FullPivLU<Matrix> lu(normal);
    if (m == 0 || lu.rank() < m) throw NumericalError("HᵀR⁻¹H is rank deficient on the observed subspace");
    out.values = lu.solve(hs.transpose() * r_inv * z.z);
    return out;
}

double normalized_innovation_squared(const FilterState& fs) {
    if (fs.step == 0) throw StateError("no measurement update has been applied");
    return fs.last_innovation.dot(fs.innovation_cov.ldlt().solve(fs.last_innovation));
}

}  // namespace hakf::kalman
