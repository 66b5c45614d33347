#pragma once

// Supervised map (κ, s, r) → q* learned from oracle records, plus the
// hedging projection applied to any proposed process-noise matrix.

#include "hakf/kalman.hpp"
#include "hakf/qlearn.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace hakf::tuner {

enum class Algorithm { Knn, Tree };

std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view text);

struct TrainConfig {
    Algorithm algorithm = Algorithm::Knn;
    std::size_t k = 5;
    std::size_t folds = 5;
    std::size_t tree_min_leaf = 5;
    std::size_t tree_max_depth = 12;
    std::uint64_t seed = 1;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double log_q = 0.0;  // leaf value
};

struct TunerModel {
    models::ModelKind model_kind = models::ModelKind::CV;
    Algorithm algorithm = Algorithm::Knn;
    std::size_t k = 5;
    std::vector<qlearn::QGridRecord> records;
    Eigen::Vector3d feature_mean = Eigen::Vector3d::Zero();
    Eigen::Vector3d feature_scale = Eigen::Vector3d::Ones();
    double q_min = 0.0;  // output bounds, those of the candidate set
    double q_max = 0.0;
    std::vector<TreeNode> tree;
    std::optional<double> cv_rmse;  // k-fold RMSE on q*; absent with fewer records than folds
};

/// Throws ConfigError for an empty dataset or mixed model kinds.
TunerModel train_tuner(std::span<const qlearn::QGridRecord> data, const TrainConfig& cfg = {},
                       std::span<const double> candidates = qlearn::default_candidates());

/// Features are clamped to the training ranges; output lies in [q_min, q_max].
double predict_q(const TunerModel& tuner, const qlearn::FeatureVector& f);

/// Diagonal part, negatives set to 0, and zeros outside the trailing 2x2 block.
kalman::Matrix hedge_q(const kalman::Matrix& q_raw);

nlohmann::json to_json(const TunerModel& t);
TunerModel tuner_from_json(const nlohmann::json& j);
void save_tuner(const TunerModel& t, const std::filesystem::path& path);
TunerModel load_tuner(const std::filesystem::path& path);

}  // namespace hakf::tuner
