#include "hakf/error.hpp"
#include "hakf/mlp.hpp"
#include "hakf/random.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace hakf;
using hakf::nn::Mlp;
using hakf::nn::MlpConfig;

TEST(Mlp, FitsSmoothFunction) {
    Rng rng(1);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int n = 2000;
    Eigen::MatrixXd x(2, n);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        x(0, i) = u(rng);
        x(1, i) = u(rng);
        y(i) = std::sin(2.0 * x(0, i)) + 0.5 * x(1, i) * x(1, i);
    }
    Mlp net(2, {32, 32}, 3);
    MlpConfig cfg;
    cfg.max_epochs = 200;
    const auto rep = net.fit(x, y, cfg);
    EXPECT_GT(rep.epochs, 0);
    EXPECT_LT(rep.best_validation_mse, 1e-3);
    EXPECT_NEAR(net.predict(Eigen::Vector2d(0.3, -0.4)), std::sin(0.6) + 0.08, 0.05);
}

TEST(Mlp, SameSeedSameWeights) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 100);
    Eigen::VectorXd y = x.colwise().sum().transpose();
    Mlp a(3, {8}, 5), b(3, {8}, 5);
    MlpConfig cfg;
    cfg.max_epochs = 5;
    a.fit(x, y, cfg);
    b.fit(x, y, cfg);
    EXPECT_EQ(a.predict_batch(x), b.predict_batch(x));
}

TEST(Mlp, BatchMatchesSingle) {
    Mlp net(4, {16, 8}, 9);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 10);
    const auto batch = net.predict_batch(x);
    for (int i = 0; i < 10; ++i) EXPECT_NEAR(batch(i), net.predict(x.col(i)), 1e-12);
}

TEST(Mlp, JsonRoundTrip) {
    Mlp net(3, {5, 4}, 2);
    const auto back = Mlp::from_json(net.to_json());
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 20);
    EXPECT_EQ(back.predict_batch(x), net.predict_batch(x));
}

TEST(Mlp, ErrorPaths) {
    EXPECT_THROW(Mlp(0, {4}, 1), ConfigError);
    EXPECT_THROW(Mlp(2, {0}, 1), ConfigError);
    Mlp empty;
    EXPECT_THROW(empty.predict(Eigen::Vector2d::Zero()), StateError);
    Mlp net(2, {4}, 1);
    EXPECT_THROW(net.predict(Eigen::Vector3d::Zero()), ConfigError);
    EXPECT_THROW(net.fit(Eigen::MatrixXd(2, 3), Eigen::VectorXd(2), MlpConfig{}), ConfigError);
    EXPECT_THROW(Mlp::from_json(nlohmann::json{{"layers", "nope"}}), FormatError);
}

TEST(Mlp, DivergenceIsNumericalError) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(2, 200) * 1e6;
    Eigen::VectorXd y = Eigen::VectorXd::Constant(200, 1e200);  // squared error overflows
    Mlp net(2, {4}, 1);
    MlpConfig cfg;
    cfg.learning_rate = 1e3;
    cfg.max_epochs = 50;
    EXPECT_THROW(net.fit(x, y, cfg), NumericalError);
}
