#pragma once

// Small fully-connected regressor (leaky-ReLU hidden layers, linear output)
// trained with Adam on mean squared error. Samples are stored as columns.

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <vector>

namespace hakf::nn {

struct MlpConfig {
    std::vector<int> hidden{64, 64};
    double learning_rate = 1e-3;
    int max_epochs = 300;
    int batch_size = 64;
    double validation_fraction = 0.1;  // carved from the training data for early stopping
    int patience = 30;                 // epochs without validation improvement
    std::uint64_t seed = 1;
};

struct TrainReport {
    int epochs = 0;
    double best_validation_mse = 0.0;
};

class Mlp {
public:
    Mlp() = default;
    Mlp(int inputs, const std::vector<int>& hidden, std::uint64_t seed);

    int inputs() const { return weights_.empty() ? 0 : static_cast<int>(weights_.front().cols()); }
    bool empty() const { return weights_.empty(); }

    double predict(const Eigen::VectorXd& x) const;
    Eigen::VectorXd predict_batch(const Eigen::MatrixXd& x) const;

    void set_output_bias(double b);

    /// Trains from the current weights. `x` is inputs × samples.
    TrainReport fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const MlpConfig& cfg);

    nlohmann::json to_json() const;
    static Mlp from_json(const nlohmann::json& j);

private:
    std::vector<Eigen::MatrixXd> weights_;
    std::vector<Eigen::VectorXd> biases_;
};

}  // namespace hakf::nn
