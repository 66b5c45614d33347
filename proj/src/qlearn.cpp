#include "hakf/qlearn.hpp"

#include "hakf/error.hpp"
#include "hakf/fast_filter.hpp"
#include "hakf/io.hpp"
#include "hakf/metrics.hpp"
#include "hakf/random.hpp"
#include "hakf/trajectory.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <condition_variable>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <thread>

namespace hakf::qlearn {

namespace {

template <int D>
std::vector<double> sweep(const std::vector<traj::Trajectory>& runs, std::span<const double> candidates, double r,
                          double dt) {
    std::vector<double> out;
    out.reserve(candidates.size());
    std::vector<fast::Vec2> est;
    for (double q : candidates) {
        const fast::GainSchedule<D> gains(q, r, dt, runs.front().size());
        if (!gains.finite()) {
            out.push_back(std::numeric_limits<double>::infinity());
            continue;
        }
        double acc = 0.0;
        for (const auto& tr : runs) {
            if (!fast::run_positions<D>(gains, dt, tr.measurements, est)) {
                acc = std::numeric_limits<double>::infinity();
                break;
            }
            acc += metrics::prmse(tr.truth, est);
        }
        out.push_back(std::isfinite(acc) ? acc / static_cast<double>(runs.size())
                                         : std::numeric_limits<double>::infinity());
    }
    return out;
}

void check_features(const FeatureVector& f) {
    if (!(f.kappa > 0.0) || !(f.speed > 0.0) || !(f.r >= 0.0) || !std::isfinite(f.kappa) ||
        !std::isfinite(f.speed) || !std::isfinite(f.r)) {
        throw ConfigError("oracle needs κ > 0, s > 0, r >= 0");
    }
}

std::vector<double> steps(double first, double last, double step) {
    std::vector<double> out;
    for (int i = 0;; ++i) {
        const double v = first + step * i;
        if (v > last + 1e-9) break;
        out.push_back(std::round(v * 1e9) / 1e9);
    }
    return out;
}

}  // namespace

const std::vector<double>& default_candidates() {
    static const std::vector<double> c{0.005, 0.01, 0.02, 0.03, 0.04, 0.05, 0.07, 0.1, 0.2, 0.3, 0.5, 0.7,
                                       1,     1.2,  1.3,  1.5,  2,    2.5,  3,    3.5, 4,   4.5, 5,   6,
                                       7,     8,    10,   12,   14,   16,   18,   20,  25,  30};
    return c;
}

FeatureVector clamp(const FeatureVector& f, const FeatureRanges& ranges) {
    auto c = [](double v, double lo, double hi) { return std::isfinite(v) ? std::clamp(v, lo, hi) : lo; };
    return {c(f.kappa, ranges.kappa_min, ranges.kappa_max), c(f.speed, ranges.speed_min, ranges.speed_max),
            c(f.r, ranges.r_min, ranges.r_max)};
}

double circle_duration(double kappa, double speed, const OracleConfig& cfg) {
    const double revolution = 2.0 * std::numbers::pi / (kappa * speed);
    return std::clamp(revolution, cfg.min_duration, cfg.max_duration);
}

std::vector<double> candidate_prmse(const FeatureVector& f, models::ModelKind kind,
                                    std::span<const double> candidates, std::size_t mc_iters,
                                    std::uint64_t seed, const OracleConfig& cfg) {
    check_features(f);
    if (candidates.empty()) throw ConfigError("candidate list is empty");
    if (mc_iters == 0) throw ConfigError("mc_iters must be >= 1");
    for (double q : candidates) {
        if (!(q >= 0.0) || !std::isfinite(q)) throw ConfigError("candidates must be finite and >= 0");
    }
    const double duration = circle_duration(f.kappa, f.speed, cfg);
    std::vector<traj::Trajectory> runs;
    runs.reserve(mc_iters);
    for (std::size_t m = 0; m < mc_iters; ++m) {
        runs.push_back(traj::generate_circle(f.kappa, f.speed, f.r, duration, cfg.dt, derive_seed(seed, {m})));
    }
    // r = 0 makes the gain schedule singular; the filter then trusts the
    // measurements, which is what a vanishing r means.
    const double r = std::max(f.r, 1e-12);
    return kind == models::ModelKind::CV ? sweep<4>(runs, candidates, r, cfg.dt)
                                         : sweep<6>(runs, candidates, r, cfg.dt);
}

QGridRecord grid_search_qstar(const FeatureVector& f, models::ModelKind kind, std::span<const double> candidates,
                              std::size_t mc_iters, std::uint64_t seed, const OracleConfig& cfg) {
    const auto scores = candidate_prmse(f, kind, candidates, mc_iters, seed, cfg);
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (scores[i] < scores[best] || (scores[i] == scores[best] && candidates[i] < candidates[best])) best = i;
    }
    if (!std::isfinite(scores[best])) throw DivergenceError("every candidate diverged");
    return {f, kind, candidates[best], scores[best], mc_iters, seed};
}

std::vector<FeatureVector> make_grid(std::span<const double> kappas, std::span<const double> speeds,
                                     std::span<const double> rs) {
    std::vector<FeatureVector> out;
    out.reserve(kappas.size() * speeds.size() * rs.size());
    for (double k : kappas)
        for (double s : speeds)
            for (double r : rs) out.push_back({k, s, r});
    return out;
}

std::vector<FeatureVector> full_grid() {
    const auto kappas = steps(1.0 / 200.0, 1.0, 0.1);
    const auto speeds = steps(2.0, 40.0, 2.0);
    const auto rs = steps(0.2, 4.0, 0.2);
    return make_grid(kappas, speeds, rs);
}

std::vector<FeatureVector> desk_grid() {
    const auto kappas = steps(1.0 / 200.0, 1.0, 0.1);
    const auto speeds = steps(2.0, 38.0, 4.0);
    const std::vector<double> rs{0.2, 1.0, 2.0, 3.0, 4.0};
    return make_grid(kappas, speeds, rs);
}

std::vector<FeatureVector> load_grid(const std::filesystem::path& path) {
    const std::string text = io::read_file(path);
    std::vector<FeatureVector> out;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string::npos) end = text.size();
        std::string_view line(text.data() + pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty() || line.front() == '#' || line.starts_with("kappa")) continue;
        const auto f = io::split(line);
        if (f.size() != 3) throw ParseError("grid row needs kappa,speed,r", line_no);
        FeatureVector fv{io::parse_double(f[0], line_no), io::parse_double(f[1], line_no),
                         io::parse_double(f[2], line_no)};
        const auto& b = kTrainingRanges;
        if (fv.kappa < b.kappa_min - 1e-12 || fv.kappa > b.kappa_max + 1e-12 || fv.speed < b.speed_min - 1e-12 ||
            fv.speed > b.speed_max + 1e-12 || fv.r < b.r_min - 1e-12 || fv.r > b.r_max + 1e-12) {
            throw ParseError("grid point outside the training ranges", line_no);
        }
        out.push_back(fv);
    }
    if (out.empty()) throw FormatError(path.string() + ": grid file has no points");
    return out;
}

namespace {

void run_pool(std::size_t begin, std::span<const FeatureVector> grid, const BuildConfig& cfg,
              const std::function<void(std::size_t, QGridRecord)>& sink) {
    const std::size_t threads = std::max<std::size_t>(1, cfg.threads);
    std::atomic<std::size_t> next{begin};
    std::exception_ptr failure;
    std::mutex fail_mu;
    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= grid.size()) return;
            try {
                sink(i, grid_search_qstar(grid[i], cfg.model, cfg.candidates, cfg.mc_iters, derive_seed(cfg.seed, {i}),
                                          cfg.oracle));
            } catch (...) {
                std::lock_guard lk(fail_mu);
                if (!failure) failure = std::current_exception();
                next = grid.size();
                return;
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    if (failure) std::rethrow_exception(failure);
}

}  // namespace

std::vector<QGridRecord> build_dataset(std::span<const FeatureVector> grid, const BuildConfig& cfg,
                                       const ProgressFn& progress) {
    std::vector<QGridRecord> out(grid.size());
    std::mutex mu;
    std::size_t done = 0;
    run_pool(0, grid, cfg, [&](std::size_t i, QGridRecord rec) {
        std::lock_guard lk(mu);
        out[i] = rec;
        if (progress) progress(++done, grid.size());
    });
    return out;
}

std::vector<QGridRecord> build_dataset_file(std::span<const FeatureVector> grid, const BuildConfig& cfg,
                                            const std::filesystem::path& path, const ProgressFn& progress) {
    std::filesystem::path partial = path;
    partial += ".partial";
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());

    std::vector<QGridRecord> out;
    if (std::filesystem::exists(partial)) {
        // Keep only complete lines; a crash can leave a torn last row.
        std::string text = io::read_file(partial);
        const std::size_t cut = text.rfind('\n');
        text = cut == std::string::npos ? std::string{} : text.substr(0, cut + 1);
        if (text.starts_with(dataset_header())) {
            out = parse_dataset(text);
            bool consistent = out.size() <= grid.size();
            for (std::size_t i = 0; consistent && i < out.size(); ++i) {
                const auto& f = out[i].features;
                consistent = out[i].model_kind == cfg.model && out[i].mc_iters == cfg.mc_iters &&
                             out[i].seed == derive_seed(cfg.seed, {i}) && f.kappa == grid[i].kappa &&
                             f.speed == grid[i].speed && f.r == grid[i].r;
            }
            if (!consistent) out.clear();
        }
        std::string keep = dataset_header();
        for (const auto& rec : out) keep += format_record(rec);
        std::ofstream(partial, std::ios::binary | std::ios::trunc) << keep;
    } else {
        std::ofstream(partial, std::ios::binary | std::ios::trunc) << dataset_header();
    }

    std::ofstream append(partial, std::ios::binary | std::ios::app);
    if (!append) throw Error("cannot open " + partial.string());
    const std::size_t start = out.size();
    std::vector<std::optional<QGridRecord>> pending(grid.size());
    std::mutex mu;
    std::size_t written = start;
    out.resize(grid.size());
    run_pool(start, grid, cfg, [&](std::size_t i, QGridRecord rec) {
        std::lock_guard lk(mu);
        pending[i] = rec;
        while (written < grid.size() && pending[written]) {
            out[written] = *pending[written];
            append << format_record(out[written]);
            append.flush();
            ++written;
            if (progress) progress(written, grid.size());
        }
    });
    append.close();
    std::filesystem::rename(partial, path);
    return out;
}

std::string dataset_header() { return "model_kind,kappa,speed,r,q_star,prmse,mc_iters,seed\n"; }

std::string format_record(const QGridRecord& rec) {
    return std::string(models::to_string(rec.model_kind)) + ',' + io::format_double(rec.features.kappa) + ',' +
           io::format_double(rec.features.speed) + ',' + io::format_double(rec.features.r) + ',' +
           io::format_double(rec.q_star) + ',' + io::format_double(rec.achieved_prmse) + ',' +
           std::to_string(rec.mc_iters) + ',' + std::to_string(rec.seed) + '\n';
}

void save_dataset(std::span<const QGridRecord> records, const std::filesystem::path& path) {
    std::string s = dataset_header();
    for (const auto& rec : records) s += format_record(rec);
    io::write_atomic(path, s);
}

std::vector<QGridRecord> parse_dataset(std::string_view text) {
    std::vector<QGridRecord> out;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line_no == 1) {
            if (std::string(line) + '\n' != dataset_header()) throw ParseError("unexpected dataset header", 1);
            continue;
        }
        if (line.empty()) continue;
        const auto f = io::split(line);
        if (f.size() != 8) throw ParseError("dataset row needs 8 fields", line_no);
        QGridRecord rec;
        try {
            rec.model_kind = models::parse_model_kind(f[0]);
        } catch (const ConfigError& e) {
            throw ParseError(e.what(), line_no);
        }
        rec.features = {io::parse_double(f[1], line_no), io::parse_double(f[2], line_no),
                        io::parse_double(f[3], line_no)};
        rec.q_star = io::parse_double(f[4], line_no);
        rec.achieved_prmse = io::parse_double(f[5], line_no);
        try {
            rec.mc_iters = std::stoull(std::string(f[6]));
            rec.seed = std::stoull(std::string(f[7]));
        } catch (const std::exception&) {
            throw ParseError("bad integer field", line_no);
        }
        out.push_back(rec);
    }
    if (line_no == 0) throw ParseError("empty dataset file", 1);
    return out;
}

std::vector<QGridRecord> load_dataset(const std::filesystem::path& path) { return parse_dataset(io::read_file(path)); }

}  // namespace hakf::qlearn
