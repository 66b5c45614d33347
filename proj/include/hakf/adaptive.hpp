#pragma once

// Model-based adaptive process-noise estimators: innovation covariance
// matching, generative (maximum-likelihood) learning and trace scaling.

#include "hakf/kalman.hpp"

#include <span>

namespace hakf::adaptive {

using kalman::Mat2;
using kalman::Matrix;
using kalman::Vec2;
using kalman::Vector;

// α can go ≤ 0 when the innovations are smaller than R; clamp before sqrt.
inline constexpr double kAlphaFloor = 1e-4;

struct InnovationMatrix {
    Mat2 c = Mat2::Zero();
    std::size_t window_len = 0;
};

/// C = (1/ξ) Σ ν νᵀ over the window. Throws StateError on an empty window.
InnovationMatrix innovation_matrix(std::span<const Vec2> window);
InnovationMatrix innovation_matrix(const kalman::InnovationWindow& window);

/// Q̂ = K C Kᵀ.
Matrix innovation_q(const InnovationMatrix& c, const Matrix& k_gain);

/// Q* = (1/M) Σ (x_k − Φ x_{k−1})(x_k − Φ x_{k−1})ᵀ over the M consecutive pairs.
Matrix generative_q(std::span<const Vector> states, const Matrix& phi);

/// α = trace(C − R) / trace(H P⁻ Hᵀ), with s_theory = H P⁻ Hᵀ.
double scaling_alpha(std::span<const Vec2> window, const Mat2& r, const Mat2& s_theory);

/// sqrt(max(α, floor)) · Q̂_{k−1}.
Matrix scaling_q(const Matrix& q_prev, double alpha, double alpha_floor = kAlphaFloor);

}  // namespace hakf::adaptive
