#pragma once

// Synthetic ground truth and noisy position measurements.

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace hakf::traj {

using Vec2 = Eigen::Vector2d;

struct Trajectory {
    double dt = 0.0;
    std::vector<Vec2> truth;
    std::vector<Vec2> truth_velocity;
    std::vector<Vec2> measurements;
    double path_length = 0.0;  // analytic length of the generating path

    std::size_t size() const { return truth.size(); }
};

/// Largest angular step per sample accepted by generate_circle.
inline constexpr double kMaxAngularStep = 0.7853981633974483;  // π/4

/// Circle of radius 1/κ traversed counter-clockwise from (1/κ, 0) at angular
/// rate ω = s·κ, sampled every dt for `duration` seconds (inclusive of t = 0).
/// Measurements add N(0, r) noise per axis; r = 0 gives exact measurements.
Trajectory generate_circle(double kappa, double speed, double r, double duration, double dt,
                           std::uint64_t seed);

enum class SegmentKind { Line, Arc };

struct Segment {
    SegmentKind kind = SegmentKind::Line;
    double length = 0.0;       // path length along the segment, m
    double speed = 1.0;        // m/s
    double turn_radius = 0.0;  // arcs only; > 0 turns left (CCW), < 0 turns right
    std::optional<double> heading;  // start heading (rad); must match the previous segment's end
};

struct Pose {
    Vec2 position = Vec2::Zero();
    double heading = 0.0;
};

/// Chains lines and arcs with C¹ joints and samples them at constant dt.
/// Throws ConfigError on a heading discontinuity or a degenerate segment.
Trajectory compose_mixed_trajectory(const std::vector<Segment>& segments, double dt, double r,
                                    std::uint64_t seed, const Pose& start = {});

/// Parses "line:100:10,arc:50:10:20,..." (kind:length:speed[:radius]).
std::vector<Segment> parse_segments(std::string_view spec);

}  // namespace hakf::traj
