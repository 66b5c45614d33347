#include "hakf/trajectory.hpp"

#include "hakf/error.hpp"
#include "hakf/random.hpp"

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>

namespace hakf::traj {

namespace {

std::size_t sample_count(double duration, double dt) {
    return static_cast<std::size_t>(std::floor(duration / dt + 1e-9)) + 1;
}

class NoiseSource {
public:
    NoiseSource(double r, std::uint64_t seed) : sigma_(std::sqrt(r)), rng_(seed) {}

    Vec2 operator()() {
        const double nx = normal_(rng_);
        const double ny = normal_(rng_);
        return sigma_ * Vec2(nx, ny);
    }

private:
    double sigma_;
    Rng rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

double wrap_angle(double a) { return std::remainder(a, 2.0 * std::numbers::pi); }

}  // namespace

Trajectory generate_circle(double kappa, double speed, double r, double duration, double dt,
                           std::uint64_t seed) {
    if (!(kappa > 0.0)) throw ConfigError("circle curvature must be > 0");
    if (!(speed > 0.0)) throw ConfigError("circle speed must be > 0");
    if (!(r >= 0.0)) throw ConfigError("measurement variance must be >= 0");
    if (!(dt > 0.0)) throw ConfigError("step size must be > 0");
    if (!(duration >= 0.0)) throw ConfigError("duration must be >= 0");
    const double omega = speed * kappa;
    if (omega * dt > kMaxAngularStep) {
        throw ConfigError("circle under-sampled: ω·dt = " + std::to_string(omega * dt) + " > π/4");
    }

    const std::size_t n = sample_count(duration, dt);
    const double radius = 1.0 / kappa;
    Trajectory out;
    out.dt = dt;
    out.path_length = speed * static_cast<double>(n - 1) * dt;
    out.truth.reserve(n);
    out.truth_velocity.reserve(n);
    out.measurements.reserve(n);
    NoiseSource noise(r, seed);
    for (std::size_t k = 0; k < n; ++k) {
        const double a = omega * static_cast<double>(k) * dt;
        const Vec2 p(radius * std::cos(a), radius * std::sin(a));
        out.truth.push_back(p);
        out.truth_velocity.emplace_back(-speed * std::sin(a), speed * std::cos(a));
        out.measurements.push_back(p + noise());
    }
    return out;
}

Trajectory compose_mixed_trajectory(const std::vector<Segment>& segments, double dt, double r,
                                    std::uint64_t seed, const Pose& start) {
    if (segments.empty()) throw ConfigError("trajectory needs at least one segment");
    if (!(dt > 0.0)) throw ConfigError("step size must be > 0");
    if (!(r >= 0.0)) throw ConfigError("measurement variance must be >= 0");

    struct Piece {
        Segment seg;
        Pose pose;
        double t0;
        double duration;
    };
    std::vector<Piece> pieces;
    Pose pose = start;
    if (segments.front().heading) pose.heading = *segments.front().heading;
    double t = 0.0;
    double length = 0.0;
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const Segment& s = segments[i];
        if (!(s.length > 0.0) || !(s.speed > 0.0)) {
            throw ConfigError("segment " + std::to_string(i) + " needs positive length and speed");
        }
        if (s.kind == SegmentKind::Arc && !(std::abs(s.turn_radius) > 0.0)) {
            throw ConfigError("arc segment " + std::to_string(i) + " needs a nonzero turn radius");
        }
        if (i > 0 && s.heading && std::abs(wrap_angle(*s.heading - pose.heading)) > 1e-9) {
            throw ConfigError("heading discontinuity at joint before segment " + std::to_string(i));
        }
        const double duration = s.length / s.speed;
        pieces.push_back({s, pose, t, duration});
        if (s.kind == SegmentKind::Line) {
            pose.position += s.length * Vec2(std::cos(pose.heading), std::sin(pose.heading));
        } else {
            const double phi = s.length / s.turn_radius;
            const double rad = s.turn_radius;
            pose.position += rad * Vec2(std::sin(pose.heading + phi) - std::sin(pose.heading),
                                        -std::cos(pose.heading + phi) + std::cos(pose.heading));
            pose.heading += phi;
        }
        t += duration;
        length += s.length;
    }

    const std::size_t n = sample_count(t, dt);
    Trajectory out;
    out.dt = dt;
    out.path_length = length;
    out.truth.reserve(n);
    out.truth_velocity.reserve(n);
    out.measurements.reserve(n);
    NoiseSource noise(r, seed);
    std::size_t idx = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double tk = static_cast<double>(k) * dt;
        while (idx + 1 < pieces.size() && tk >= pieces[idx + 1].t0) ++idx;
        const Piece& pc = pieces[idx];
        const double tau = std::min(tk - pc.t0, pc.duration);
        const double d = pc.seg.speed * tau;
        const double th = pc.pose.heading;
        Vec2 p;
        Vec2 v;
        if (pc.seg.kind == SegmentKind::Line) {
            const Vec2 dir(std::cos(th), std::sin(th));
            p = pc.pose.position + d * dir;
            v = pc.seg.speed * dir;
        } else {
            const double rad = pc.seg.turn_radius;
            const double phi = d / rad;
            p = pc.pose.position +
                rad * Vec2(std::sin(th + phi) - std::sin(th), -std::cos(th + phi) + std::cos(th));
            v = pc.seg.speed * Vec2(std::cos(th + phi), std::sin(th + phi));
        }
        out.truth.push_back(p);
        out.truth_velocity.push_back(v);
        out.measurements.push_back(p + noise());
    }
    return out;
}

std::vector<Segment> parse_segments(std::string_view spec) {
    std::vector<Segment> out;
    std::stringstream ss{std::string(spec)};
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        std::vector<std::string> parts;
        std::stringstream is(item);
        std::string tok;
        while (std::getline(is, tok, ':')) parts.push_back(tok);
        Segment s;
        try {
            if (parts.size() == 3 && parts[0] == "line") {
                s.kind = SegmentKind::Line;
            } else if (parts.size() == 4 && parts[0] == "arc") {
                s.kind = SegmentKind::Arc;
                s.turn_radius = std::stod(parts[3]);
            } else {
                throw ConfigError("bad segment '" + item + "' (expected line:L:S or arc:L:S:R)");
            }
            s.length = std::stod(parts[1]);
            s.speed = std::stod(parts[2]);
        } catch (const std::invalid_argument&) {
            throw ConfigError("bad number in segment '" + item + "'");
        } catch (const std::out_of_range&) {
            throw ConfigError("number out of range in segment '" + item + "'");
        }
        out.push_back(s);
    }
    if (out.empty()) throw ConfigError("empty segment list");
    return out;
}

}  // namespace hakf::traj
