#pragma once

// Fixed-size filter kernel for Monte-Carlo sweeps.
//
// With constant Q and R the covariance recursion does not depend on the
// measurements, so the gain sequence can be computed once per (q, r) and
// replayed over every noise realization. This is the same filter as
// kalman::propagate/update, just split so the expensive half is shared.

#include "hakf/motion_model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace hakf::fast {

using Vec2 = Eigen::Vector2d;

template <int D>
using State = Eigen::Matrix<double, D, 1>;
template <int D>
using Cov = Eigen::Matrix<double, D, D>;
template <int D>
using Gain = Eigen::Matrix<double, D, 2>;

// Prior variance of the acceleration states when initializing a CA filter.
inline constexpr double kInitAccelVariance = 10.0;

/// Two-point differencing start: position z1, velocity (z1 − z0)/dt,
/// acceleration 0, with the matching error covariance per axis
///   [[r, r/dt], [r/dt, 2r/dt²]].
template <int D>
State<D> two_point_state(const Vec2& z0, const Vec2& z1, double dt) {
    State<D> x = State<D>::Zero();
    x.template head<2>() = z1;
    x.template segment<2>(2) = (z1 - z0) / dt;
    return x;
}

template <int D>
Cov<D> two_point_covariance(double r, double dt) {
    Cov<D> p = Cov<D>::Zero();
    for (int a = 0; a < 2; ++a) {
        p(a, a) = r;
        p(a, 2 + a) = p(2 + a, a) = r / dt;
        p(2 + a, 2 + a) = 2.0 * r / (dt * dt);
        if constexpr (D == 6) p(4 + a, 4 + a) = kInitAccelVariance;
    }
    return p;
}

template <int D>
Cov<D> transition(double dt) {
    Cov<D> phi = Cov<D>::Identity();
    for (int a = 0; a < 2; ++a) {
        phi(a, 2 + a) = dt;
        if constexpr (D == 6) {
            phi(a, 4 + a) = 0.5 * dt * dt;
            phi(2 + a, 4 + a) = dt;
        }
    }
    return phi;
}

/// Gains for filtered steps 2, 3, ...; once converged the last gain repeats.
template <int D>
class GainSchedule {
public:
    GainSchedule(double q, double r, double dt, std::size_t steps) {
        const Cov<D> phi = transition<D>(dt);
        Cov<D> qm = Cov<D>::Zero();
        qm(D - 2, D - 2) = q;
        qm(D - 1, D - 1) = q;
        Cov<D> p = two_point_covariance<D>(r, dt);
        gains_.reserve(std::min<std::size_t>(steps, 4096));
        for (std::size_t i = 0; i < steps; ++i) {
            p = phi * p * phi.transpose() + qm;
            const Eigen::Matrix2d s = p.template topLeftCorner<2, 2>() + r * Eigen::Matrix2d::Identity();
            const Gain<D> k = p.template leftCols<2>() * s.inverse();
            p -= k * p.template topRows<2>();
            p = 0.5 * (p + p.transpose());
            if (!k.allFinite()) {
                finite_ = false;
                break;
            }
            if (!gains_.empty() && (k - gains_.back()).cwiseAbs().maxCoeff() <=
                                       1e-15 * std::max(1.0, k.cwiseAbs().maxCoeff())) {
                break;
            }
            gains_.push_back(k);
        }
    }

    bool finite() const { return finite_ && !gains_.empty(); }
    const Gain<D>& at(std::size_t i) const { return gains_[std::min(i, gains_.size() - 1)]; }
    std::size_t stored() const { return gains_.size(); }

private:
    std::vector<Gain<D>> gains_;
    bool finite_ = true;
};

/// Filters `z` with a precomputed schedule; writes posterior positions to `out`
/// (out[0] = z0, out[1] = z1, then filtered). Returns false on divergence.
template <int D>
bool run_positions(const GainSchedule<D>& gains, double dt, std::span<const Vec2> z,
                   std::vector<Vec2>& out) {
    out.clear();
    if (z.size() < 2) {
        out.assign(z.begin(), z.end());
        return true;
    }
    const Cov<D> phi = transition<D>(dt);
    out.reserve(z.size());
    out.push_back(z[0]);
    State<D> x = two_point_state<D>(z[0], z[1], dt);
    out.push_back(x.template head<2>());
    for (std::size_t k = 2; k < z.size(); ++k) {
        x = phi * x;
        const Vec2 nu = z[k] - x.template head<2>();
        x.noalias() += gains.at(k - 2) * nu;
        out.push_back(x.template head<2>());
    }
    return x.allFinite();
}

/// Same as run_positions but also returns the full posterior states.
template <int D>
bool run_states(const GainSchedule<D>& gains, double dt, std::span<const Vec2> z,
                std::vector<State<D>>& out) {
    out.clear();
    if (z.size() < 2) return false;
    const Cov<D> phi = transition<D>(dt);
    out.reserve(z.size());
    State<D> x0 = State<D>::Zero();
    x0.template head<2>() = z[0];
    out.push_back(x0);
    State<D> x = two_point_state<D>(z[0], z[1], dt);
    out.push_back(x);
    for (std::size_t k = 2; k < z.size(); ++k) {
        x = phi * x;
        const Vec2 nu = z[k] - x.template head<2>();
        x.noalias() += gains.at(k - 2) * nu;
        out.push_back(x);
    }
    return x.allFinite();
}

}  // namespace hakf::fast
