#pragma once

// Monte-Carlo oracle for the best constant process-noise intensity on a
// circle of given (κ, s, r), and the grids of such records used to train
// the tuner.

#include "hakf/motion_model.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace hakf::qlearn {

/// The 33 published candidates plus 0.04, ascending.
const std::vector<double>& default_candidates();

inline constexpr std::size_t kDefaultMcIters = 50;

struct FeatureRanges {
    double kappa_min = 1.0 / 200.0;
    double kappa_max = 1.0;
    double speed_min = 2.0;
    double speed_max = 40.0;
    double r_min = 0.2;
    double r_max = 4.0;
};

inline constexpr FeatureRanges kTrainingRanges{};

struct FeatureVector {
    double kappa = 0.0;  // 1/m
    double speed = 0.0;  // m/s
    double r = 0.0;      // m²
};

FeatureVector clamp(const FeatureVector& f, const FeatureRanges& ranges = kTrainingRanges);

struct QGridRecord {
    FeatureVector features;
    models::ModelKind model_kind = models::ModelKind::CV;
    double q_star = 0.0;
    double achieved_prmse = 0.0;
    std::size_t mc_iters = 0;
    std::uint64_t seed = 0;
};

struct OracleConfig {
    double dt = models::kDefaultDt;
    double min_duration = 10.0;   // s
    double max_duration = 120.0;  // s
};

/// One revolution, clamped to [min_duration, max_duration].
double circle_duration(double kappa, double speed, const OracleConfig& cfg = {});

/// Mean PRMSE over mc_iters seeded circles for each candidate; +∞ for
/// candidates whose filter diverges. Entry i belongs to candidates[i].
std::vector<double> candidate_prmse(const FeatureVector& f, models::ModelKind kind,
                                    std::span<const double> candidates, std::size_t mc_iters,
                                    std::uint64_t seed, const OracleConfig& cfg = {});

/// Argmin of candidate_prmse, ties toward the smaller q.
QGridRecord grid_search_qstar(const FeatureVector& f, models::ModelKind kind, std::span<const double> candidates,
                              std::size_t mc_iters, std::uint64_t seed, const OracleConfig& cfg = {});

/// (κ, s, r) points of a grid, in the order records are produced.
std::vector<FeatureVector> full_grid();  // 10 κ × 20 s × 20 r training nodes
std::vector<FeatureVector> desk_grid();  // 10 κ × 10 s × 5 r subsample
std::vector<FeatureVector> load_grid(const std::filesystem::path& path);  // "kappa,speed,r" rows
std::vector<FeatureVector> make_grid(std::span<const double> kappas, std::span<const double> speeds,
                                     std::span<const double> rs);

struct BuildConfig {
    models::ModelKind model = models::ModelKind::CV;
    std::vector<double> candidates = default_candidates();
    std::size_t mc_iters = kDefaultMcIters;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
    OracleConfig oracle;
};

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// One record per grid point. Record i uses seed derive_seed(cfg.seed, {i}).
std::vector<QGridRecord> build_dataset(std::span<const FeatureVector> grid, const BuildConfig& cfg,
                                       const ProgressFn& progress = {});

/// Streams records to PATH.partial as they finish (in grid order), resumes
/// from an existing PATH.partial and renames to PATH on completion.
std::vector<QGridRecord> build_dataset_file(std::span<const FeatureVector> grid, const BuildConfig& cfg,
                                            const std::filesystem::path& path, const ProgressFn& progress = {});

std::string dataset_header();
std::string format_record(const QGridRecord& rec);
void save_dataset(std::span<const QGridRecord> records, const std::filesystem::path& path);
std::vector<QGridRecord> load_dataset(const std::filesystem::path& path);
std::vector<QGridRecord> parse_dataset(std::string_view text);

}  // namespace hakf::qlearn
