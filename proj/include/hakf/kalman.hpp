#pragma once

// Discrete linear Kalman filter primitives.
//
//   x⁻ = Φ x̂            P⁻ = Φ P Φᵀ + Q
//   K  = P⁻Hᵀ (H P⁻ Hᵀ + R)⁻¹
//   ν  = z − H x⁻        x̂ = x⁻ + K ν        P = (I − K H) P⁻
//
// All operations are pure: they take a FilterState by value and return the
// successor, so Monte-Carlo runs can each own an independent state.

#include <Eigen/Dense>

#include <cstddef>
#include <deque>
#include <string_view>
#include <vector>

namespace hakf::kalman {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

inline constexpr std::size_t kDefaultInnovationWindow = 10;

// Numerical stand-ins for the limits Q → 0 and ‖Q‖ → ∞.
inline constexpr double kQZero = 1e-9;
inline constexpr double kQInfinity = 1e9;

// Innovation covariance with a larger condition number is treated as singular.
inline constexpr double kMaxConditionNumber = 1e12;

struct Measurement {
    Vec2 z = Vec2::Zero();
    std::size_t step_index = 0;
};

/// Bounded FIFO of the most recent innovations.
class InnovationWindow {
public:
    explicit InnovationWindow(std::size_t capacity = kDefaultInnovationWindow);

    void push(const Vec2& nu);
    void clear() { items_.clear(); }

    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return items_.empty(); }
    bool full() const { return items_.size() == capacity_; }

    const Vec2& operator[](std::size_t i) const { return items_[i]; }
    auto begin() const { return items_.begin(); }
    auto end() const { return items_.end(); }

    std::vector<Vec2> to_vector() const { return {items_.begin(), items_.end()}; }

private:
    std::size_t capacity_;
    std::deque<Vec2> items_;
};

struct FilterState {
    Vector x_hat;
    Matrix p;
    Matrix k_gain;  // state_dim × 2, gain of the last update (zero before the first)
    InnovationWindow innovations;
    Vec2 last_innovation = Vec2::Zero();
    Mat2 innovation_cov = Mat2::Zero();  // S = H P⁻ Hᵀ + R of the last update
    std::size_t step = 0;                // number of measurement updates applied

    Eigen::Index dim() const { return x_hat.size(); }
};

/// True for the supported state dimensions (4 for CV, 6 for CA).
bool is_state_dim(Eigen::Index n);

/// Throws ConfigError unless `x` has a supported length and finite entries.
void validate_state(const Vector& x);

/// Throws ConfigError unless `p` is square, finite, symmetric to 1e-9 relative
/// and PSD up to −1e-9·λmax.
void validate_covariance(const Matrix& p, std::string_view what = "covariance");

/// (M + Mᵀ)/2.
Matrix symmetrize(const Matrix& m);

FilterState initialize(const Vector& x0, const Matrix& p0,
                       std::size_t window_capacity = kDefaultInnovationWindow);

FilterState propagate(FilterState fs, const Matrix& phi, const Matrix& q);

/// Optimal gain via a Cholesky solve on S; throws NumericalError when S is
/// singular or its condition number exceeds kMaxConditionNumber.
Matrix gain(const Matrix& p_minus, const Matrix& h, const Matrix& r);

/// Measurement update. `fs` must hold the propagated (prior) estimate.
FilterState update(FilterState fs, const Measurement& z, const Matrix& h, const Matrix& r);

/// Closed-form gain for Q = 0 written with explicit inverses:
///   K = [(Φ P Φᵀ)⁻¹ + Hᵀ R⁻¹ H]⁻¹ Hᵀ R⁻¹
/// Used as an independent oracle for `gain`.
Matrix limit_gain_q_zero(const Matrix& p_prev, const Matrix& phi, const Matrix& h,
                         const Matrix& r);

/// Weighted least-squares estimate restricted to the observed components.
struct PartialState {
    std::vector<Eigen::Index> components;  // state indices with a nonzero H column
    Vector values;
};

/// x = (HᵀR⁻¹H)⁻¹ HᵀR⁻¹ z over the observed columns of H.
PartialState lse_estimate(const Measurement& z, const Matrix& h, const Matrix& r);

/// νᵀ S⁻¹ ν for the most recent update.
double normalized_innovation_squared(const FilterState& fs);

}  // namespace hakf::kalman
