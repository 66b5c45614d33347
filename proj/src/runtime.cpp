#include "hakf/runtime.hpp"

#include "hakf/adaptive.hpp"
#include "hakf/error.hpp"
#include "hakf/fast_filter.hpp"
#include "hakf/io.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>

namespace hakf::runtime {

namespace {

std::string lower(std::string_view text) {
    std::string s(text);
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

double trailing_mean(const kalman::Matrix& q) {
    const Eigen::Index n = q.rows();
    return 0.5 * (q(n - 2, n - 2) + q(n - 1, n - 1));
}

// Template-conformant, nonnegative and capped.
kalman::Matrix bound(const kalman::Matrix& q, double cap) {
    kalman::Matrix out = tuner::hedge_q(q);
    const Eigen::Index n = out.rows();
    for (Eigen::Index i = n - 2; i < n; ++i) out(i, i) = std::min(out(i, i), cap);
    return out;
}

double fixed_q(const RunConfig& cfg) {
    switch (cfg.adapt) {
        case AdaptMode::QZero: return kalman::kQZero;
        case AdaptMode::QInf: return kalman::kQInfinity;
        default: return cfg.q0;
    }
}

template <class T>
void push_bounded(std::deque<T>& d, T v, std::size_t cap) {
    d.push_back(std::move(v));
    while (d.size() > cap) d.pop_front();
}

}  // namespace

std::string_view to_string(AdaptMode m) {
    switch (m) {
        case AdaptMode::QZero: return "q-zero";
        case AdaptMode::QInf: return "q-inf";
        case AdaptMode::Const: return "const";
        case AdaptMode::Innovation: return "innovation";
        case AdaptMode::Generative: return "generative";
        case AdaptMode::Scaling: return "scaling";
        case AdaptMode::Learned: return "learned";
    }
    return "?";
}

AdaptMode parse_adapt_mode(std::string_view text) {
    const std::string s = lower(text);
    for (auto m : {AdaptMode::QZero, AdaptMode::QInf, AdaptMode::Const, AdaptMode::Innovation, AdaptMode::Generative,
                   AdaptMode::Scaling, AdaptMode::Learned}) {
        if (s == to_string(m)) return m;
    }
    if (s == "none") return AdaptMode::Const;
    if (s == "lse") return AdaptMode::QInf;
    throw ConfigError("unknown adapt mode '" + std::string(text) +
                      "' (expected q-zero, q-inf, const, innovation, generative, scaling or learned)");
}

std::string_view to_string(SpeedMode m) { return m == SpeedMode::Instant ? "instant" : "windowed"; }

SpeedMode parse_speed_mode(std::string_view text) {
    const std::string s = lower(text);
    if (s == "instant") return SpeedMode::Instant;
    if (s == "windowed") return SpeedMode::Windowed;
    throw ConfigError("unknown speed mode '" + std::string(text) + "' (expected instant or windowed)");
}

std::string_view to_string(InitPolicy p) { return p == InitPolicy::TwoPoint ? "two-point" : "first-measurement"; }

InitPolicy parse_init_policy(std::string_view text) {
    const std::string s = lower(text);
    if (s == "two-point") return InitPolicy::TwoPoint;
    if (s == "first-measurement") return InitPolicy::FirstMeasurement;
    throw ConfigError("unknown init policy '" + std::string(text) + "' (expected two-point or first-measurement)");
}

void validate(const RunConfig& cfg) {
    if (!(cfg.dt > 0.0) || !std::isfinite(cfg.dt)) throw ConfigError("dt must be > 0");
    if (cfg.xi < 1) throw ConfigError("xi must be >= 1");
    if (cfg.n_window < curvature::kMinWindowSize) throw ConfigError("n_window must be >= 5");
    if (!(cfg.q0 >= 0.0) || !std::isfinite(cfg.q0)) throw ConfigError("q0 must be >= 0");
    if (!(cfg.r > 0.0) || !std::isfinite(cfg.r)) throw ConfigError("r must be > 0");
    if (!(cfg.q_cap > 0.0)) throw ConfigError("q_cap must be > 0");
    if (cfg.adapt == AdaptMode::Learned) {
        if (!cfg.tuner) throw ConfigError("learned mode needs a tuner");
        if (cfg.tuner->model_kind != cfg.model) {
            throw ConfigError("tuner was trained for " + std::string(models::to_string(cfg.tuner->model_kind)) +
                              " but the run uses " + std::string(models::to_string(cfg.model)));
        }
        if (cfg.curvature && cfg.curvature->n != cfg.n_window) {
            throw ConfigError("curvature estimator expects " + std::to_string(cfg.curvature->n) +
                              "-point windows, run uses " + std::to_string(cfg.n_window));
        }
    }
}

std::vector<Vec2> TrackOutput::positions() const {
    std::vector<Vec2> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back(s.x_hat.head<2>());
    return out;
}

double estimate_speed(const Vector& x_hat) {
    if (x_hat.size() < 4) throw ConfigError("state has no velocity components");
    return x_hat.segment<2>(2).norm();
}

double windowed_speed(std::span<const Vec2> velocities) {
    if (velocities.empty()) throw StateError("no velocity estimates");
    Vec2 sum = Vec2::Zero();
    for (const auto& v : velocities) sum += v;
    return (sum / static_cast<double>(velocities.size())).norm();
}

TrackOutput run_adaptive_filter(std::span<const Vec2> z, const RunConfig& cfg, const std::vector<Vec2>* truth) {
    validate(cfg);
    if (z.size() < 2) throw ConfigError("need at least two measurements");
    if (truth && truth->size() != z.size()) throw ConfigError("truth and measurement lengths differ");

    const models::MotionModel model = models::make_model(cfg.model, cfg.dt);
    const int n = model.state_dim;
    const kalman::Matrix r_mat = models::r_matrix(cfg.r);
    const kalman::Matrix q0 = models::q_matrix(model, fixed_q(cfg));
    const bool adaptive = cfg.adapt == AdaptMode::Innovation || cfg.adapt == AdaptMode::Generative ||
                          cfg.adapt == AdaptMode::Scaling || cfg.adapt == AdaptMode::Learned;
    const curvature::CurvatureEstimator analytic = curvature::analytic_estimator(cfg.n_window);
    const curvature::CurvatureEstimator& curv = cfg.curvature ? *cfg.curvature : analytic;
    const curvature::WindowSampler sampler{cfg.n_window, curv.sample_distance, cfg.dt, qlearn::kTrainingRanges.speed_min};

    TrackOutput out;
    out.steps.reserve(z.size());
    std::vector<Vec2> history;
    const std::size_t history_cap = cfg.adapt == AdaptMode::Learned ? sampler.history_needed() : 1;
    std::deque<Vec2> velocities;
    std::deque<Vector> states;

    auto record = [&](const kalman::FilterState& fs, const kalman::Matrix& q_used) {
        StepRecord rec;
        rec.x_hat = fs.x_hat;
        rec.p_diag = fs.p.diagonal();
        rec.q_applied = trailing_mean(q_used);
        const Vec2 v = fs.x_hat.segment<2>(2);
        push_bounded(velocities, v, cfg.n_window);
        if (cfg.speed_mode == SpeedMode::Instant) {
            rec.speed = v.norm();
        } else {
            Vec2 sum = Vec2::Zero();
            for (const auto& u : velocities) sum += u;
            rec.speed = (sum / static_cast<double>(velocities.size())).norm();
        }
        history.push_back(fs.x_hat.head<2>());
        if (history.size() > 2 * history_cap) history.erase(history.begin(), history.end() - static_cast<std::ptrdiff_t>(history_cap));
        if (cfg.adapt == AdaptMode::Generative) push_bounded(states, fs.x_hat, cfg.xi + 1);
        out.steps.push_back(std::move(rec));
    };

    kalman::FilterState fs;
    std::size_t first_step;
    if (cfg.init == InitPolicy::FirstMeasurement) {
        Vector x0 = Vector::Zero(n);
        x0.head<2>() = z[0];
        Vector d = Vector::Constant(n, kInitAccelVariance);
        d.head<2>().setConstant(cfg.r);
        d.segment<2>(2).setConstant(kFirstMeasurementVelocityVar);
        fs = kalman::initialize(x0, d.asDiagonal(), cfg.xi);
        record(fs, q0);
        first_step = 1;
    } else {
        Vector x0 = Vector::Zero(n);
        x0.head<2>() = z[0];
        kalman::Matrix p0 = kalman::Matrix::Zero(n, n);
        p0.diagonal().head<2>().setConstant(cfg.r);
        record(kalman::initialize(x0, p0, cfg.xi), q0);
        if (n == 4) {
            fs = kalman::initialize(fast::two_point_state<4>(z[0], z[1], cfg.dt),
                                    fast::two_point_covariance<4>(cfg.r, cfg.dt), cfg.xi);
        } else {
            fs = kalman::initialize(fast::two_point_state<6>(z[0], z[1], cfg.dt),
                                    fast::two_point_covariance<6>(cfg.r, cfg.dt), cfg.xi);
        }
        record(fs, q0);
        first_step = 2;
    }

    kalman::Matrix q_next = q0;
    for (std::size_t k = first_step; k < z.size(); ++k) {
        const kalman::Matrix q_now = q_next;
        kalman::Matrix p_minus;
        try {
            fs = kalman::propagate(std::move(fs), model.phi, q_now);
            p_minus = fs.p;
            fs = kalman::update(std::move(fs), {z[k], k}, model.h, r_mat);
        } catch (const NumericalError& e) {
            throw DivergenceError(std::string("filter diverged: ") + e.what(), k);
        }
        if (!fs.x_hat.allFinite()) throw DivergenceError("non-finite state estimate", k);
        record(fs, q_now);

        // The Q computed from step k first acts on step k + 1, so every step
        // up to ξ runs on Q0.
        if (!adaptive || k < cfg.xi) continue;
        switch (cfg.adapt) {
            case AdaptMode::Innovation:
                if (fs.innovations.full()) {
                    q_next = bound(adaptive::innovation_q(adaptive::innovation_matrix(fs.innovations), fs.k_gain),
                                   cfg.q_cap);
                }
                break;
            case AdaptMode::Generative:
                if (states.size() == cfg.xi + 1) {
                    const std::vector<Vector> st(states.begin(), states.end());
                    q_next = bound(adaptive::generative_q(st, model.phi), cfg.q_cap);
                }
                break;
            case AdaptMode::Scaling:
                if (fs.innovations.full()) {
                    const kalman::Mat2 s_theory = model.h * p_minus * model.h.transpose();
                    const auto window = fs.innovations.to_vector();
                    const double alpha = adaptive::scaling_alpha(window, r_mat, s_theory);
                    q_next = bound(adaptive::scaling_q(q_now, alpha), cfg.q_cap);
                }
                break;
            case AdaptMode::Learned: {
                StepRecord& rec = out.steps.back();
                const auto w = curvature::sample_window(history, rec.speed, sampler);
                if (!w) break;
                try {
                    rec.kappa = curvature::estimate_curvature(curv, *w);
                } catch (const NumericalError&) {
                    break;  // stationary window: keep the current Q
                } catch (const ConfigError&) {
                    break;
                }
                const double q = tuner::predict_q(*cfg.tuner, {rec.kappa, rec.speed, cfg.r});
                q_next = bound(models::q_matrix(model, q), cfg.q_cap);
                break;
            }
            default: break;
        }
    }

    if (truth) {
        const auto est = out.positions();
        out.metrics = metrics::evaluate(*truth, est, std::min(cfg.skip_warmup, z.size() - 1));
    }
    return out;
}

std::string format_track(const TrackOutput& out, models::ModelKind model) {
    std::string s = model == models::ModelKind::CV ? "k,px,py,vx,vy,q,kappa,speed\n"
                                                   : "k,px,py,vx,vy,ax,ay,q,kappa,speed\n";
    auto num = [](double v) { return std::isfinite(v) ? io::format_double(v) : std::string{}; };
    for (std::size_t k = 0; k < out.steps.size(); ++k) {
        const auto& r = out.steps[k];
        s += std::to_string(k);
        for (Eigen::Index i = 0; i < r.x_hat.size(); ++i) s += ',' + io::format_double(r.x_hat(i));
        s += ',' + io::format_double(r.q_applied) + ',' + num(r.kappa) + ',' + num(r.speed) + '\n';
    }
    if (out.metrics) {
        s += "# prmse=" + io::format_double(out.metrics->prmse) + ",pmae=" + io::format_double(out.metrics->pmae) +
             ",steps=" + std::to_string(out.metrics->steps) + '\n';
    }
    return s;
}

void save_track(const TrackOutput& out, models::ModelKind model, const std::filesystem::path& path) {
    io::write_atomic(path, format_track(out, model));
}

}  // namespace hakf::runtime
