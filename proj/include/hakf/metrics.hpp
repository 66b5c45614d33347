#pragma once

// Position error metrics and comparison tables.
//
//   PRMSE = sqrt( (1/T) Σ_k (ex_k² + ey_k²) )
//   PMAE  = (1/T) Σ_k (|ex_k| + |ey_k|)          (both axes, divided by T only)

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

namespace hakf::metrics {

using Vec2 = Eigen::Vector2d;

struct MetricsReport {
    double prmse = 0.0;
    double pmae = 0.0;
    std::size_t steps = 0;
    double rmse_x = 0.0;
    double rmse_y = 0.0;
    double mae_x = 0.0;
    double mae_y = 0.0;
};

/// Both throw ConfigError on a length mismatch or empty input.
double prmse(std::span<const Vec2> truth, std::span<const Vec2> estimate);
double pmae(std::span<const Vec2> truth, std::span<const Vec2> estimate);

/// Metrics over [skip, T).
MetricsReport evaluate(std::span<const Vec2> truth, std::span<const Vec2> estimate, std::size_t skip = 0);

struct BenchRow {
    std::string method;
    double r = 0.0;
    MetricsReport report;
};

struct BenchTable {
    std::string text;  // aligned, per-r minima marked with '*'
    std::string csv;   // method,r,prmse,pmae,steps
};

/// Methods keep their first-seen order; r columns are sorted ascending.
BenchTable bench_table(std::span<const BenchRow> rows);

/// Inverse of the CSV half of bench_table.
std::vector<BenchRow> parse_bench_csv(std::string_view csv);

}  // namespace hakf::metrics
