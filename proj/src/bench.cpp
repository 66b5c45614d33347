#include "hakf/bench.hpp"

#include "hakf/error.hpp"
#include "hakf/io.hpp"
#include "hakf/random.hpp"

#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <thread>

namespace hakf::bench {

Suite make_suite(const SuiteConfig& cfg) {
    if (cfg.trajectories == 0 || cfg.segments == 0) throw ConfigError("suite needs trajectories and segments");
    if (!(cfg.min_speed > 0.0 && cfg.min_speed <= cfg.max_speed) ||
        !(cfg.min_kappa > 0.0 && cfg.min_kappa <= cfg.max_kappa) ||
        !(cfg.min_segment_time > 0.0 && cfg.min_segment_time <= cfg.max_segment_time)) {
        throw ConfigError("suite ranges are invalid");
    }
    Suite suite;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t t = 0; t < cfg.trajectories; ++t) {
        Rng rng(derive_seed(cfg.seed, {t}));
        const double speed = cfg.min_speed + (cfg.max_speed - cfg.min_speed) * unit(rng);
        std::vector<traj::Segment> segs;
        for (std::size_t i = 0; i < cfg.segments; ++i) {
            traj::Segment s;
            s.speed = speed;
            const double duration = cfg.min_segment_time + (cfg.max_segment_time - cfg.min_segment_time) * unit(rng);
            s.length = speed * duration;
            if (i % 2 == 1) {
                s.kind = traj::SegmentKind::Arc;
                const double kappa = cfg.min_kappa * std::pow(cfg.max_kappa / cfg.min_kappa, unit(rng));
                s.turn_radius = (unit(rng) < 0.5 ? 1.0 : -1.0) / kappa;
            }
            // Round so the text form reproduces the suite exactly.
            s.length = std::round(s.length * 1e3) / 1e3;
            s.speed = std::round(s.speed * 1e3) / 1e3;
            s.turn_radius = std::round(s.turn_radius * 1e3) / 1e3;
            segs.push_back(s);
        }
        suite.push_back(std::move(segs));
    }
    return suite;
}

std::string format_suite(const Suite& suite) {
    std::string s;
    for (const auto& segs : suite) {
        for (std::size_t i = 0; i < segs.size(); ++i) {
            const auto& g = segs[i];
            if (i) s += ',';
            s += g.kind == traj::SegmentKind::Line ? "line:" : "arc:";
            s += io::format_double(g.length) + ':' + io::format_double(g.speed);
            if (g.kind == traj::SegmentKind::Arc) s += ':' + io::format_double(g.turn_radius);
        }
        s += '\n';
    }
    return s;
}

Suite parse_suite(std::string_view text) {
    Suite suite;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#') continue;
        try {
            suite.push_back(traj::parse_segments(line));
        } catch (const ConfigError& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    if (suite.empty()) throw FormatError("suite has no trajectories");
    return suite;
}

void save_suite(const Suite& suite, const std::filesystem::path& path) { io::write_atomic(path, format_suite(suite)); }

Suite load_suite(const std::filesystem::path& path) { return parse_suite(io::read_file(path)); }

std::string Method::label() const {
    std::string s = std::string(models::to_string(model)) + '/' + std::string(runtime::to_string(mode));
    if (mode == runtime::AdaptMode::Const) s += ':' + io::format_double(q0);
    return s;
}

std::vector<Method> methods(const BenchConfig& cfg) {
    std::vector<Method> out;
    for (auto model : cfg.models) {
        for (auto mode : cfg.adapts) {
            if (mode == runtime::AdaptMode::Const) {
                for (double q : cfg.const_qs) out.push_back({model, mode, q});
            } else {
                out.push_back({model, mode, cfg.q0});
            }
        }
    }
    return out;
}

std::vector<metrics::BenchRow> run_bench(const Suite& suite, const BenchConfig& cfg) {
    if (suite.empty()) throw ConfigError("empty suite");
    if (cfg.mc == 0) throw ConfigError("mc must be >= 1");
    if (cfg.rs.empty()) throw ConfigError("r list is empty");
    const auto ms = methods(cfg);
    for (const auto& m : ms) {
        if (m.mode != runtime::AdaptMode::Learned) continue;
        auto it = cfg.tuners.find(m.model);
        if (it == cfg.tuners.end() || !it->second) {
            throw ConfigError("learned mode needs a " + std::string(models::to_string(m.model)) + " tuner");
        }
    }

    struct Item {
        std::size_t method;
        std::size_t r;
    };
    std::vector<Item> items;
    for (std::size_t ri = 0; ri < cfg.rs.size(); ++ri)
        for (std::size_t mi = 0; mi < ms.size(); ++mi) items.push_back({mi, ri});
    std::vector<metrics::BenchRow> rows(items.size());

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex mu;
    auto worker = [&] {
        while (true) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= items.size()) return;
            try {
                const Method& m = ms[items[idx].method];
                const double r = cfg.rs[items[idx].r];
                runtime::RunConfig rc;
                rc.model = m.model;
                rc.dt = cfg.dt;
                rc.xi = cfg.xi;
                rc.n_window = cfg.n_window;
                rc.q0 = m.q0;
                rc.r = r;
                rc.adapt = m.mode;
                rc.skip_warmup = cfg.skip_warmup;
                if (m.mode == runtime::AdaptMode::Learned) {
                    rc.tuner = cfg.tuners.at(m.model);
                    auto est = cfg.estimators.find(m.model);
                    rc.curvature = est == cfg.estimators.end() ? nullptr : est->second;
                }
                metrics::MetricsReport sum;
                std::size_t runs = 0;
                for (std::size_t t = 0; t < suite.size(); ++t) {
                    for (std::size_t mc = 0; mc < cfg.mc; ++mc) {
                        // Noise depends on (trajectory, realization, r) only, so
                        // every method sees the same measurements.
                        const auto tr = traj::compose_mixed_trajectory(
                            suite[t], cfg.dt, r, derive_seed(cfg.seed, {t, mc, items[idx].r}));
                        metrics::MetricsReport rep;
                        try {
                            rep = *runtime::run_adaptive_filter(tr.measurements, rc, &tr.truth).metrics;
                        } catch (const DivergenceError&) {
                            rep.prmse = rep.pmae = std::numeric_limits<double>::infinity();
                        }
                        sum.prmse += rep.prmse;
                        sum.pmae += rep.pmae;
                        sum.rmse_x += rep.rmse_x;
                        sum.rmse_y += rep.rmse_y;
                        sum.mae_x += rep.mae_x;
                        sum.mae_y += rep.mae_y;
                        sum.steps += rep.steps;
                        ++runs;
                    }
                }
                const double nr = static_cast<double>(runs);
                sum.prmse /= nr;
                sum.pmae /= nr;
                sum.rmse_x /= nr;
                sum.rmse_y /= nr;
                sum.mae_x /= nr;
                sum.mae_y /= nr;
                rows[idx] = {m.label(), r, sum};
            } catch (...) {
                std::lock_guard lk(mu);
                if (!failure) failure = std::current_exception();
                next = items.size();
                return;
            }
        }
    };
    const std::size_t threads = std::max<std::size_t>(1, cfg.threads);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
    return rows;
}

}  // namespace hakf::bench
