#include "hakf/adaptive.hpp"

#include "hakf/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hakf::adaptive {

InnovationMatrix innovation_matrix(std::span<const Vec2> window) {
    if (window.empty()) throw StateError("innovation window is empty");
    Mat2 acc = Mat2::Zero();
    for (const auto& nu : window) acc.noalias() += nu * nu.transpose();
    return {acc / static_cast<double>(window.size()), window.size()};
}

InnovationMatrix innovation_matrix(const kalman::InnovationWindow& window) {
    const auto items = window.to_vector();
    return innovation_matrix(std::span<const Vec2>(items));
}

Matrix innovation_q(const InnovationMatrix& c, const Matrix& k_gain) {
    if (k_gain.cols() != 2) {
        throw ConfigError("gain must have 2 columns, got " + std::to_string(k_gain.cols()));
    }
    return kalman::symmetrize(k_gain * c.c * k_gain.transpose());
}

Matrix generative_q(std::span<const Vector> states, const Matrix& phi) {
    if (states.size() < 2) throw StateError("generative learning needs at least 2 states");
    const Eigen::Index n = phi.rows();
    if (phi.cols() != n) throw ConfigError("transition matrix must be square");
    Matrix acc = Matrix::Zero(n, n);
    for (std::size_t k = 1; k < states.size(); ++k) {
        if (states[k].size() != n || states[k - 1].size() != n) {
            throw ConfigError("state length does not match the transition matrix");
        }
        const Vector e = states[k] - phi * states[k - 1];
        acc.noalias() += e * e.transpose();
    }
    return acc / static_cast<double>(states.size() - 1);
}

double scaling_alpha(std::span<const Vec2> window, const Mat2& r, const Mat2& s_theory) {
    const double denom = s_theory.trace();
    if (!(denom > 1e-15)) throw NumericalError("trace(H P⁻ Hᵀ) is not positive");
    const InnovationMatrix c = innovation_matrix(window);
    return (c.c - r).trace() / denom;
}

Matrix scaling_q(const Matrix& q_prev, double alpha, double alpha_floor) {
    return std::sqrt(std::max(alpha, alpha_floor)) * q_prev;
}

}  // namespace hakf::adaptive
