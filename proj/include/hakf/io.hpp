#pragma once

// File formats and write discipline shared by every artifact.

#include <Eigen/Core>

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hakf::io {

using Vec2 = Eigen::Vector2d;

/// Shortest round-trip decimal form; byte-stable across runs.
std::string format_double(double v);

/// Strict full-field parse; throws ParseError(line) on junk.
double parse_double(std::string_view field, std::size_t line);

std::vector<std::string_view> split(std::string_view line, char sep = ',');

/// Writes to PATH.partial and renames over PATH.
void write_atomic(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path);

/// Measurement file: header "t,zx,zy[,gt_x,gt_y]", one row per step.
struct TrajectoryFile {
    double dt = 0.0;
    std::vector<double> t;
    std::vector<Vec2> measurements;
    std::optional<std::vector<Vec2>> truth;
};

/// Rows must have strictly increasing t with constant Δt (1e-6 relative);
/// otherwise FormatError. Malformed rows raise ParseError with the line number.
TrajectoryFile load_trajectory(const std::filesystem::path& path);
TrajectoryFile parse_trajectory(std::string_view text);

void save_trajectory(const std::filesystem::path& path, double dt, const std::vector<Vec2>& measurements,
                     const std::vector<Vec2>* truth = nullptr);

}  // namespace hakf::io
