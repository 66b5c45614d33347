#include "hakf/curvature.hpp"

#include "hakf/error.hpp"
#include "hakf/fast_filter.hpp"
#include "hakf/io.hpp"
#include "hakf/random.hpp"
#include "hakf/trajectory.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace hakf::curvature {

namespace {

constexpr double kMinDerivative = 1e-9;
constexpr double kLogFloor = 1e-3;
constexpr int kFormatVersion = 1;
// Standardized features are clipped so windows cleaner (or rougher) than
// anything in training don't send the network into extrapolation.
constexpr double kFeatureClip = 5.0;

// Curvature of the algebraic circle fit a(x²+y²) + bx + cy + d = 0 with
// ‖(a,b,c,d)‖ = 1; collinear points give a = 0 and hence κ = 0.
double conic_curvature(std::span<const Vec2> rel, double scale) {
    Eigen::Matrix<double, Eigen::Dynamic, 4> a(static_cast<Eigen::Index>(rel.size()), 4);
    for (std::size_t i = 0; i < rel.size(); ++i) {
        const Vec2 u = rel[i] / scale;
        a.row(static_cast<Eigen::Index>(i)) << u.squaredNorm(), u.x(), u.y(), 1.0;
    }
    const Eigen::JacobiSVD<Eigen::Matrix<double, Eigen::Dynamic, 4>> svd(a, Eigen::ComputeFullV);
    const Eigen::Vector4d v = svd.matrixV().col(3);
    const double disc = v(1) * v(1) + v(2) * v(2) - 4.0 * v(0) * v(3);
    if (!(disc > 0.0)) return kMaxCurvature * scale;
    return 2.0 * std::abs(v(0)) / std::sqrt(disc) / scale;
}

template <class Fn>
double guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const UndefinedCurvatureError&) {
        return kMaxCurvature;
    }
}

std::string_view kind_name(EstimatorKind k) { return k == EstimatorKind::Analytic ? "analytic" : "fitted"; }

}  // namespace

void validate(const PositionWindow& w) {
    if (w.size() < kMinWindowSize) {
        throw ConfigError("position window needs >= " + std::to_string(kMinWindowSize) + " points, got " +
                          std::to_string(w.size()));
    }
    if (!(w.spacing > 0.0) || !std::isfinite(w.spacing)) throw ConfigError("window spacing must be > 0");
    bool moved = false;
    for (const auto& p : w.points) {
        if (!p.allFinite()) throw ConfigError("position window has non-finite points");
        if (p != w.points.front()) moved = true;
    }
    if (!moved) throw ConfigError("position window points are all identical");
}

double point_curvature(const Vec2& d1, const Vec2& d2) {
    const double speed = d1.norm();
    if (!(speed > kMinDerivative)) throw UndefinedCurvatureError("first derivative vanishes");
    return (d1.x() * d2.y() - d1.y() * d2.x()) / (speed * speed * speed);
}

double segment_curvature(const PositionWindow& w) {
    validate(w);
    const double h = w.spacing;
    double sum = 0.0;
    for (std::size_t i = 1; i + 1 < w.size(); ++i) {
        const Vec2 d1 = (w.points[i + 1] - w.points[i - 1]) / (2.0 * h);
        const Vec2 d2 = (w.points[i + 1] - 2.0 * w.points[i] + w.points[i - 1]) / (h * h);
        sum += std::abs(point_curvature(d1, d2));
    }
    return sum / static_cast<double>(w.size() - 2);
}

Eigen::VectorXd window_features(const PositionWindow& w) {
    validate(w);
    const std::size_t n = w.size();
    Vec2 centroid = Vec2::Zero();
    for (const auto& p : w.points) centroid += p;
    centroid /= static_cast<double>(n);
    std::vector<Vec2> rel;
    rel.reserve(n);
    double ms = 0.0;
    for (const auto& p : w.points) {
        rel.push_back(p - centroid);
        ms += rel.back().squaredNorm();
    }
    const double rms = std::sqrt(ms / static_cast<double>(n));

    std::vector<double> len(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) len[i] = (w.points[i + 1] - w.points[i]).norm();
    const double path = std::accumulate(len.begin(), len.end(), 0.0);
    const double mean_len = path / static_cast<double>(n - 1);
    double var_len = 0.0;
    for (double l : len) var_len += (l - mean_len) * (l - mean_len);
    const double cv_len = std::sqrt(var_len / static_cast<double>(n - 1)) / mean_len;

    double turn = 0.0;
    double abs_turn = 0.0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const Vec2 a = w.points[i] - w.points[i - 1];
        const Vec2 b = w.points[i + 1] - w.points[i];
        const double ang = std::atan2(a.x() * b.y() - a.y() * b.x(), a.dot(b));
        turn += ang;
        abs_turn += std::abs(ang);
    }

    const double fd = guarded([&] { return segment_curvature(w); });
    Eigen::VectorXd f(kFeatureCount);
    f << std::log(path / (static_cast<double>(n - 1) * w.spacing)),
        std::log(fd + kLogFloor),
        std::log(conic_curvature(rel, rms) + kLogFloor),
        std::log(std::abs(turn) / path + kLogFloor),
        std::log(path),
        std::log(rms),
        std::log(cv_len + kLogFloor),
        abs_turn / static_cast<double>(n - 2);
    return f;
}

std::size_t WindowSampler::stride(double speed) const {
    if (!(dt > 0.0) || !(sample_distance > 0.0) || !(min_speed > 0.0)) {
        throw ConfigError("window sampler needs positive dt, sample distance and minimum speed");
    }
    const double s = std::isfinite(speed) ? std::max(speed, min_speed) : min_speed;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(sample_distance / (s * dt))));
}

std::optional<PositionWindow> sample_window(std::span<const Vec2> history, double speed,
                                            const WindowSampler& sampler) {
    if (sampler.n < kMinWindowSize) throw ConfigError("window size must be >= 5");
    const std::size_t stride = sampler.stride(speed);
    const std::size_t span = (sampler.n - 1) * stride;
    if (history.size() < span + 1) return std::nullopt;
    PositionWindow w;
    w.spacing = static_cast<double>(stride) * sampler.dt;
    w.points.reserve(sampler.n);
    const std::size_t first = history.size() - 1 - span;
    for (std::size_t j = 0; j < sampler.n; ++j) w.points.push_back(history[first + j * stride]);
    return w;
}

CurvatureEstimator analytic_estimator(std::size_t n) {
    if (n < kMinWindowSize) throw ConfigError("window size must be >= 5");
    CurvatureEstimator est;
    est.kind = EstimatorKind::Analytic;
    est.n = n;
    return est;
}

double estimate_curvature(const CurvatureEstimator& est, const PositionWindow& w) {
    if (w.size() != est.n) {
        throw ConfigError("window has " + std::to_string(w.size()) + " points, estimator expects " +
                          std::to_string(est.n));
    }
    if (est.kind == EstimatorKind::Analytic) return segment_curvature(w);
    const Eigen::VectorXd f = (window_features(w) - est.feature_mean)
                                  .cwiseQuotient(est.feature_scale)
                                  .cwiseMax(-kFeatureClip)
                                  .cwiseMin(kFeatureClip);
    return std::clamp(est.net.predict(f), kMinCurvature, kMaxCurvature);
}

double rmse(const CurvatureEstimator& est, std::span<const LabeledWindow> data) {
    if (data.empty()) throw ConfigError("empty evaluation set");
    double se = 0.0;
    for (const auto& d : data) {
        const double e = guarded([&] { return estimate_curvature(est, d.window); }) - d.kappa;
        se += e * e;
    }
    return std::sqrt(se / static_cast<double>(data.size()));
}

FitResult fit_curvature_estimator(std::span<const LabeledWindow> data, const FitConfig& cfg) {
    if (data.size() < 2) throw ConfigError("need at least two labeled windows");
    if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0)) throw ConfigError("test fraction must be in (0, 1)");
    const std::size_t n = data.front().window.size();
    for (const auto& d : data) {
        if (d.window.size() != n) throw ConfigError("labeled windows have mixed lengths");
    }

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(cfg.seed, {0}));
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t n_test = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::round(cfg.test_fraction * static_cast<double>(data.size()))));
    FitResult out;
    out.test_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    const std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());

    Eigen::MatrixXd x(kFeatureCount, static_cast<Eigen::Index>(train.size()));
    Eigen::VectorXd y(static_cast<Eigen::Index>(train.size()));
    for (std::size_t i = 0; i < train.size(); ++i) {
        x.col(static_cast<Eigen::Index>(i)) = window_features(data[train[i]].window);
        y(static_cast<Eigen::Index>(i)) = data[train[i]].kappa;
    }
    CurvatureEstimator& est = out.estimator;
    est.kind = EstimatorKind::Fitted;
    est.n = n;
    est.sample_distance = cfg.sample_distance;
    est.feature_mean = x.rowwise().mean();
    const Eigen::MatrixXd centered = x.colwise() - est.feature_mean;
    est.feature_scale = (centered.rowwise().squaredNorm() / static_cast<double>(x.cols())).cwiseSqrt();
    for (Eigen::Index i = 0; i < est.feature_scale.size(); ++i) {
        if (!(est.feature_scale(i) > 1e-12)) est.feature_scale(i) = 1.0;
    }
    const Eigen::MatrixXd xs =
        (centered.array().colwise() / est.feature_scale.array()).cwiseMax(-kFeatureClip).cwiseMin(kFeatureClip);

    est.net = nn::Mlp(kFeatureCount, cfg.mlp.hidden, derive_seed(cfg.seed, {1}));
    nn::MlpConfig mcfg = cfg.mlp;
    mcfg.seed = derive_seed(cfg.seed, {2});
    est.net.set_output_bias(y.mean());
    est.net.fit(xs, y, mcfg);

    std::vector<LabeledWindow> test;
    test.reserve(n_test);
    for (std::size_t i : out.test_indices) test.push_back(data[i]);
    est.train_rmse = rmse(est, test);
    if (cfg.rmse_bar && *est.train_rmse > *cfg.rmse_bar) {
        throw TrainingError("curvature estimator missed the RMSE bar of " + io::format_double(*cfg.rmse_bar),
                            *est.train_rmse);
    }
    return out;
}

std::vector<LabeledWindow> make_window_dataset(const WindowDatasetConfig& cfg, const QPolicy& q_policy) {
    if (!q_policy) throw ConfigError("window dataset needs a q policy");
    if (!(cfg.kappa_min > 0.0 && cfg.kappa_min <= cfg.kappa_max) || !(cfg.speed_min > 0.0 && cfg.speed_min <= cfg.speed_max) ||
        !(cfg.r_min >= 0.0 && cfg.r_min <= cfg.r_max)) {
        throw ConfigError("window dataset ranges are invalid");
    }
    const WindowSampler& ws = cfg.sampler;
    const double dt = ws.dt;
    const std::size_t settle = static_cast<std::size_t>(std::ceil(cfg.settle_time / dt));
    std::vector<LabeledWindow> out;
    out.reserve(cfg.count);
    std::vector<fast::State<6>> s6;
    std::vector<fast::State<4>> s4;
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    for (std::size_t i = 0; i < cfg.count; ++i) {
        Rng rng(derive_seed(cfg.seed, {i}));
        const bool line = unit(rng) < cfg.line_fraction;
        const double kappa = line ? 0.0 : cfg.kappa_min + (cfg.kappa_max - cfg.kappa_min) * unit(rng);
        const double speed = cfg.speed_min + (cfg.speed_max - cfg.speed_min) * unit(rng);
        const double r = cfg.r_min + (cfg.r_max - cfg.r_min) * unit(rng);
        const double rot = 2.0 * std::numbers::pi * unit(rng);
        const std::uint64_t noise_seed = rng();
        const bool clean = unit(rng) < cfg.clean_fraction;

        // Long enough for the slowest stride, so the window never depends on the true speed.
        const std::size_t span = (ws.n - 1) * ws.max_stride();
        const double duration = static_cast<double>(settle + span + 1) * dt;
        traj::Trajectory tr;
        if (line) {
            traj::Segment seg;
            seg.length = speed * duration;
            seg.speed = speed;
            tr = traj::compose_mixed_trajectory({seg}, dt, r, noise_seed, {Vec2::Zero(), rot});
        } else {
            tr = traj::generate_circle(kappa, speed, r, duration, dt, noise_seed);
            const Eigen::Rotation2Dd rm(rot);
            for (auto& z : tr.measurements) z = rm * z;
            for (auto& p : tr.truth) p = rm * p;
        }
        if (clean) {
            auto w = sample_window(tr.truth, speed, ws);
            if (!w) throw NumericalError("window dataset trajectory too short");
            out.push_back({std::move(*w), kappa, speed, 0.0});
            continue;
        }

        const double q = q_policy(kappa, speed, r);
        std::vector<Vec2> pos;
        Vec2 vel_sum = Vec2::Zero();
        auto consume = [&](const auto& states) {
            pos.reserve(states.size());
            for (const auto& s : states) pos.push_back(s.template head<2>());
            const std::size_t m = std::min(ws.n, states.size());
            for (std::size_t k = states.size() - m; k < states.size(); ++k) vel_sum += states[k].template segment<2>(2);
            vel_sum /= static_cast<double>(m);
        };
        if (cfg.model == models::ModelKind::CA) {
            fast::GainSchedule<6> g(q, r, dt, tr.size());
            fast::run_states<6>(g, dt, tr.measurements, s6);
            consume(s6);
        } else {
            fast::GainSchedule<4> g(q, r, dt, tr.size());
            fast::run_states<4>(g, dt, tr.measurements, s4);
            consume(s4);
        }
        auto w = sample_window(pos, vel_sum.norm(), ws);
        if (!w) throw NumericalError("window dataset trajectory too short");
        out.push_back({std::move(*w), kappa, speed, r});
    }
    return out;
}

nlohmann::json to_json(const CurvatureEstimator& est) {
    nlohmann::json j{{"format", "hakf-curvature-estimator"},
                     {"version", kFormatVersion},
                     {"kind", kind_name(est.kind)},
                     {"n", est.n},
                     {"sample_distance", est.sample_distance}};
    if (est.train_rmse) j["train_rmse"] = *est.train_rmse;
    if (est.kind == EstimatorKind::Fitted) {
        j["feature_mean"] = std::vector<double>(est.feature_mean.data(), est.feature_mean.data() + est.feature_mean.size());
        j["feature_scale"] =
            std::vector<double>(est.feature_scale.data(), est.feature_scale.data() + est.feature_scale.size());
        j["network"] = est.net.to_json();
    }
    return j;
}

CurvatureEstimator estimator_from_json(const nlohmann::json& j) {
    CurvatureEstimator est;
    try {
        if (j.at("format") != "hakf-curvature-estimator") throw FormatError("not a curvature estimator file");
        if (j.at("version").get<int>() != kFormatVersion) throw FormatError("unsupported estimator version");
        const auto kind = j.at("kind").get<std::string>();
        if (kind == "analytic") {
            est.kind = EstimatorKind::Analytic;
        } else if (kind == "fitted") {
            est.kind = EstimatorKind::Fitted;
        } else {
            throw FormatError("unknown estimator kind '" + kind + "'");
        }
        est.n = j.at("n").get<std::size_t>();
        if (est.n < kMinWindowSize) throw FormatError("estimator window size must be >= 5");
        est.sample_distance = j.at("sample_distance").get<double>();
        if (j.contains("train_rmse")) est.train_rmse = j.at("train_rmse").get<double>();
        if (est.kind == EstimatorKind::Fitted) {
            const auto mean = j.at("feature_mean").get<std::vector<double>>();
            const auto scale = j.at("feature_scale").get<std::vector<double>>();
            if (mean.size() != kFeatureCount || scale.size() != kFeatureCount) {
                throw FormatError("estimator feature normalization has the wrong length");
            }
            est.feature_mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), kFeatureCount);
            est.feature_scale = Eigen::Map<const Eigen::VectorXd>(scale.data(), kFeatureCount);
            est.net = nn::Mlp::from_json(j.at("network"));
            if (est.net.inputs() != kFeatureCount) throw FormatError("estimator network input size mismatch");
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad estimator file: ") + e.what());
    }
    return est;
}

void save_estimator(const CurvatureEstimator& est, const std::filesystem::path& path) {
    io::write_atomic(path, to_json(est).dump(1) + "\n");
}

CurvatureEstimator load_estimator(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return estimator_from_json(j);
}

void save_windows(std::span<const LabeledWindow> data, const std::filesystem::path& path) {
    std::string s;
    for (const auto& d : data) {
        s += io::format_double(d.kappa) + ',' + io::format_double(d.window.spacing);
        for (const auto& p : d.window.points) s += ',' + io::format_double(p.x()) + ',' + io::format_double(p.y());
        s += '\n';
    }
    io::write_atomic(path, s);
}

std::vector<LabeledWindow> load_windows(const std::filesystem::path& path) {
    const std::string text = io::read_file(path);
    std::vector<LabeledWindow> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        const std::string_view line(text.data() + pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.empty()) continue;
        const auto f = io::split(line);
        if (f.size() < 2 + 2 * kMinWindowSize || f.size() % 2 != 0) {
            throw ParseError("window row needs kappa, spacing and >= 5 x,y pairs", line_no);
        }
        LabeledWindow lw;
        lw.kappa = io::parse_double(f[0], line_no);
        lw.window.spacing = io::parse_double(f[1], line_no);
        for (std::size_t i = 2; i < f.size(); i += 2) {
            lw.window.points.emplace_back(io::parse_double(f[i], line_no), io::parse_double(f[i + 1], line_no));
        }
        out.push_back(std::move(lw));
    }
    return out;
}

}  // namespace hakf::curvature
