#include "hakf/mlp.hpp"

#include "hakf/error.hpp"
#include "hakf/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hakf::nn {

namespace {

constexpr double kLeak = 0.01;

Eigen::MatrixXd activate(const Eigen::MatrixXd& z) {
    return z.unaryExpr([](double v) { return v > 0.0 ? v : kLeak * v; });
}

Eigen::MatrixXd activate_grad(const Eigen::MatrixXd& z) {
    return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : kLeak; });
}

Eigen::MatrixXd gather(const Eigen::MatrixXd& x, const std::vector<Eigen::Index>& idx,
                       std::size_t from, std::size_t to) {
    Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(to - from));
    for (std::size_t i = from; i < to; ++i) out.col(static_cast<Eigen::Index>(i - from)) = x.col(idx[i]);
    return out;
}

Eigen::VectorXd gather(const Eigen::VectorXd& y, const std::vector<Eigen::Index>& idx,
                       std::size_t from, std::size_t to) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(to - from));
    for (std::size_t i = from; i < to; ++i) out(static_cast<Eigen::Index>(i - from)) = y(idx[i]);
    return out;
}

struct Adam {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long t = 0;
    std::vector<Eigen::MatrixXd> mw, vw;
    std::vector<Eigen::VectorXd> mb, vb;
};

}  // namespace

Mlp::Mlp(int inputs, const std::vector<int>& hidden, std::uint64_t seed) {
    if (inputs < 1) throw ConfigError("network needs at least one input");
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    int fan_in = inputs;
    std::vector<int> widths = hidden;
    widths.push_back(1);
    for (std::size_t l = 0; l < widths.size(); ++l) {
        const int w = widths[l];
        if (w < 1) throw ConfigError("layer width must be >= 1");
        // He initialization for the leaky-ReLU layers; the output layer starts
        // at zero so an untrained net is constant.
        const double scale = l + 1 == widths.size() ? 0.0 : std::sqrt(2.0 / fan_in);
        Eigen::MatrixXd m(w, fan_in);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * normal(rng);
        weights_.push_back(std::move(m));
        biases_.push_back(Eigen::VectorXd::Zero(w));
        fan_in = w;
    }
}

Eigen::VectorXd Mlp::predict_batch(const Eigen::MatrixXd& x) const {
    if (empty()) throw StateError("network has no weights");
    if (x.rows() != inputs()) throw ConfigError("network input size mismatch");
    Eigen::MatrixXd a = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        Eigen::MatrixXd z = (weights_[l] * a).colwise() + biases_[l];
        a = l + 1 < weights_.size() ? activate(z) : std::move(z);
    }
    return a.row(0).transpose();
}

double Mlp::predict(const Eigen::VectorXd& x) const { return predict_batch(x)(0); }

void Mlp::set_output_bias(double b) {
    if (empty()) throw StateError("network has no weights");
    biases_.back()(0) = b;
}

TrainReport Mlp::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const MlpConfig& cfg) {
    if (empty()) throw StateError("network has no weights");
    if (x.cols() != y.size() || x.cols() == 0) throw ConfigError("training data is empty or misaligned");
    if (x.rows() != inputs()) throw ConfigError("network input size mismatch");
    if (cfg.batch_size < 1 || cfg.max_epochs < 1) throw ConfigError("batch size and epochs must be >= 1");

    Rng rng(cfg.seed);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(x.cols()));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t n_val = static_cast<std::size_t>(std::floor(cfg.validation_fraction * order.size()));
    if (order.size() < 10) n_val = 0;
    const Eigen::MatrixXd x_val = gather(x, order, 0, n_val);
    const Eigen::VectorXd y_val = gather(y, order, 0, n_val);
    std::vector<Eigen::Index> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

    const std::size_t layers = weights_.size();
    Adam opt;
    for (std::size_t l = 0; l < layers; ++l) {
        opt.mw.push_back(Eigen::MatrixXd::Zero(weights_[l].rows(), weights_[l].cols()));
        opt.vw.push_back(opt.mw.back());
        opt.mb.push_back(Eigen::VectorXd::Zero(biases_[l].size()));
        opt.vb.push_back(opt.mb.back());
    }

    auto val_mse = [&] {
        if (n_val == 0) return 0.0;
        return (predict_batch(x_val) - y_val).squaredNorm() / static_cast<double>(n_val);
    };

    TrainReport report;
    report.best_validation_mse = std::numeric_limits<double>::infinity();
    std::vector<Eigen::MatrixXd> best_w = weights_;
    std::vector<Eigen::VectorXd> best_b = biases_;
    int stale = 0;
    std::vector<Eigen::MatrixXd> acts(layers + 1), pre(layers);

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::shuffle(train.begin(), train.end(), rng);
        for (std::size_t start = 0; start < train.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(train.size(), start + static_cast<std::size_t>(cfg.batch_size));
            acts[0] = gather(x, train, start, stop);
            const Eigen::VectorXd yb = gather(y, train, start, stop);
            const double m = static_cast<double>(stop - start);
            for (std::size_t l = 0; l < layers; ++l) {
                pre[l] = (weights_[l] * acts[l]).colwise() + biases_[l];
                acts[l + 1] = l + 1 < layers ? activate(pre[l]) : pre[l];
            }
            Eigen::MatrixXd delta = (2.0 / m) * (acts[layers].row(0).transpose() - yb).transpose();
            ++opt.t;
            const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.t));
            const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.t));
            for (std::size_t li = layers; li-- > 0;) {
                const Eigen::MatrixXd gw = delta * acts[li].transpose();
                const Eigen::VectorXd gb = delta.rowwise().sum();
                if (li > 0) delta = (weights_[li].transpose() * delta).cwiseProduct(activate_grad(pre[li - 1]));
                opt.mw[li] = opt.beta1 * opt.mw[li] + (1.0 - opt.beta1) * gw;
                opt.vw[li] = opt.beta2 * opt.vw[li] + (1.0 - opt.beta2) * gw.cwiseAbs2();
                opt.mb[li] = opt.beta1 * opt.mb[li] + (1.0 - opt.beta1) * gb;
                opt.vb[li] = opt.beta2 * opt.vb[li] + (1.0 - opt.beta2) * gb.cwiseAbs2();
                weights_[li].array() -= cfg.learning_rate * (opt.mw[li].array() / c1) /
                                        ((opt.vw[li].array() / c2).sqrt() + opt.eps);
                biases_[li].array() -= cfg.learning_rate * (opt.mb[li].array() / c1) /
                                       ((opt.vb[li].array() / c2).sqrt() + opt.eps);
            }
        }
        report.epochs = epoch + 1;
        if (n_val == 0) continue;
        const double v = val_mse();
        if (!std::isfinite(v)) throw NumericalError("network training diverged");
        if (v < report.best_validation_mse) {
            report.best_validation_mse = v;
            best_w = weights_;
            best_b = biases_;
            stale = 0;
        } else if (++stale >= cfg.patience) {
            break;
        }
    }
    if (n_val > 0) {
        weights_ = std::move(best_w);
        biases_ = std::move(best_b);
    } else {
        report.best_validation_mse = 0.0;
    }
    return report;
}

nlohmann::json Mlp::to_json() const {
    nlohmann::json layers = nlohmann::json::array();
    for (std::size_t l = 0; l < weights_.size(); ++l) {
        const auto& w = weights_[l];
        layers.push_back({{"rows", w.rows()},
                          {"cols", w.cols()},
                          {"weights", std::vector<double>(w.data(), w.data() + w.size())},
                          {"bias", std::vector<double>(biases_[l].data(), biases_[l].data() + biases_[l].size())}});
    }
    return {{"activation", "leaky_relu"}, {"layers", layers}};
}

Mlp Mlp::from_json(const nlohmann::json& j) {
    Mlp out;
    try {
        for (const auto& layer : j.at("layers")) {
            const auto rows = layer.at("rows").get<Eigen::Index>();
            const auto cols = layer.at("cols").get<Eigen::Index>();
            const auto w = layer.at("weights").get<std::vector<double>>();
            const auto b = layer.at("bias").get<std::vector<double>>();
            if (rows < 1 || cols < 1 || static_cast<Eigen::Index>(w.size()) != rows * cols ||
                static_cast<Eigen::Index>(b.size()) != rows) {
                throw FormatError("network layer has inconsistent shape");
            }
            if (!out.weights_.empty() && out.weights_.back().rows() != cols) {
                throw FormatError("network layers do not chain");
            }
            out.weights_.push_back(Eigen::Map<const Eigen::MatrixXd>(w.data(), rows, cols));
            out.biases_.push_back(Eigen::Map<const Eigen::VectorXd>(b.data(), rows));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad network description: ") + e.what());
    }
    if (out.weights_.empty() || out.weights_.back().rows() != 1) throw FormatError("network must end in one output");
    return out;
}

}  // namespace hakf::nn
