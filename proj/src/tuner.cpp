#include "hakf/tuner.hpp"

#include "hakf/error.hpp"
#include "hakf/io.hpp"
#include "hakf/random.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

namespace hakf::tuner {

namespace {

constexpr int kFormatVersion = 1;
constexpr double kExactMatch = 1e-12;

double safe_log(double q) { return std::log(std::max(q, 1e-12)); }

Eigen::Vector3d raw(const qlearn::FeatureVector& f) { return {f.kappa, f.speed, f.r}; }

Eigen::Vector3d normalized(const TunerModel& t, const qlearn::FeatureVector& f) {
    return (raw(f) - t.feature_mean).cwiseQuotient(t.feature_scale);
}

struct Sample {
    Eigen::Vector3d z;
    double log_q;
};

int grow(std::vector<TreeNode>& nodes, std::vector<Sample>& s, std::size_t lo, std::size_t hi, std::size_t depth,
         const TrainConfig& cfg) {
    const int id = static_cast<int>(nodes.size());
    nodes.push_back({});
    double mean = 0.0;
    for (std::size_t i = lo; i < hi; ++i) mean += s[i].log_q;
    mean /= static_cast<double>(hi - lo);
    nodes[id].log_q = mean;
    const std::size_t n = hi - lo;
    if (depth >= cfg.tree_max_depth || n < 2 * cfg.tree_min_leaf) return id;

    double base = 0.0;
    for (std::size_t i = lo; i < hi; ++i) base += (s[i].log_q - mean) * (s[i].log_q - mean);
    double best_sse = base - 1e-12;
    int best_feature = -1;
    double best_threshold = 0.0;
    for (int f = 0; f < 3; ++f) {
        std::sort(s.begin() + lo, s.begin() + hi, [f](const Sample& a, const Sample& b) { return a.z(f) < b.z(f); });
        double sum_l = 0.0, sq_l = 0.0;
        double sum_t = 0.0, sq_t = 0.0;
        for (std::size_t i = lo; i < hi; ++i) {
            sum_t += s[i].log_q;
            sq_t += s[i].log_q * s[i].log_q;
        }
        for (std::size_t i = lo; i + 1 < hi; ++i) {
            sum_l += s[i].log_q;
            sq_l += s[i].log_q * s[i].log_q;
            const std::size_t nl = i + 1 - lo;
            const std::size_t nr = n - nl;
            if (nl < cfg.tree_min_leaf || nr < cfg.tree_min_leaf || s[i].z(f) == s[i + 1].z(f)) continue;
            const double sse = (sq_l - sum_l * sum_l / nl) + (sq_t - sq_l - (sum_t - sum_l) * (sum_t - sum_l) / nr);
            if (sse < best_sse) {
                best_sse = sse;
                best_feature = f;
                best_threshold = 0.5 * (s[i].z(f) + s[i + 1].z(f));
            }
        }
    }
    if (best_feature < 0) return id;
    const auto mid = std::partition(s.begin() + lo, s.begin() + hi,
                                    [&](const Sample& a) { return a.z(best_feature) <= best_threshold; });
    const std::size_t cut = static_cast<std::size_t>(mid - s.begin());
    nodes[id].feature = best_feature;
    nodes[id].threshold = best_threshold;
    const int left = grow(nodes, s, lo, cut, depth + 1, cfg);
    const int right = grow(nodes, s, cut, hi, depth + 1, cfg);
    nodes[id].left = left;
    nodes[id].right = right;
    return id;
}

TunerModel fit(std::span<const qlearn::QGridRecord> data, const TrainConfig& cfg, double q_min, double q_max) {
    TunerModel t;
    t.model_kind = data.front().model_kind;
    t.algorithm = cfg.algorithm;
    t.k = cfg.k;
    t.records.assign(data.begin(), data.end());
    t.q_min = q_min;
    t.q_max = q_max;
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    for (const auto& r : data) mean += raw(r.features);
    mean /= static_cast<double>(data.size());
    Eigen::Vector3d var = Eigen::Vector3d::Zero();
    for (const auto& r : data) var += (raw(r.features) - mean).cwiseAbs2();
    var /= static_cast<double>(data.size());
    t.feature_mean = mean;
    for (int i = 0; i < 3; ++i) t.feature_scale(i) = var(i) > 1e-24 ? std::sqrt(var(i)) : 1.0;

    if (cfg.algorithm == Algorithm::Tree) {
        std::vector<Sample> s;
        s.reserve(data.size());
        for (const auto& r : data) s.push_back({normalized(t, r.features), safe_log(r.q_star)});
        grow(t.tree, s, 0, s.size(), 0, cfg);
    }
    return t;
}

double knn(const TunerModel& t, const Eigen::Vector3d& z) {
    std::vector<std::pair<double, std::size_t>> d;
    d.reserve(t.records.size());
    for (std::size_t i = 0; i < t.records.size(); ++i) {
        d.emplace_back((normalized(t, t.records[i].features) - z).norm(), i);
    }
    const std::size_t k = std::min(std::max<std::size_t>(t.k, 1), d.size());
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
    if (d.front().first <= kExactMatch) {
        double sum = 0.0;
        std::size_t m = 0;
        for (std::size_t i = 0; i < k && d[i].first <= kExactMatch; ++i, ++m) sum += safe_log(t.records[d[i].second].q_star);
        return std::exp(sum / static_cast<double>(m));
    }
    double wsum = 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const double w = 1.0 / d[i].first;
        wsum += w;
        acc += w * safe_log(t.records[d[i].second].q_star);
    }
    return std::exp(acc / wsum);
}

double tree(const TunerModel& t, const Eigen::Vector3d& z) {
    if (t.tree.empty()) throw StateError("tree tuner has no nodes");
    int id = 0;
    while (t.tree[static_cast<std::size_t>(id)].feature >= 0) {
        const auto& node = t.tree[static_cast<std::size_t>(id)];
        id = z(node.feature) <= node.threshold ? node.left : node.right;
    }
    return std::exp(t.tree[static_cast<std::size_t>(id)].log_q);
}

}  // namespace

std::string_view to_string(Algorithm a) { return a == Algorithm::Knn ? "knn" : "tree"; }

Algorithm parse_algorithm(std::string_view text) {
    std::string lower(text);
    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lower == "knn") return Algorithm::Knn;
    if (lower == "tree") return Algorithm::Tree;
    throw ConfigError("unknown tuner algorithm '" + std::string(text) + "' (expected knn or tree)");
}

TunerModel train_tuner(std::span<const qlearn::QGridRecord> data, const TrainConfig& cfg,
                       std::span<const double> candidates) {
    if (data.empty()) throw ConfigError("tuner needs at least one record");
    if (cfg.k == 0) throw ConfigError("k must be >= 1");
    for (const auto& r : data) {
        if (r.model_kind != data.front().model_kind) throw ConfigError("dataset mixes CV and CA records");
    }
    double q_min = std::numeric_limits<double>::infinity();
    double q_max = -q_min;
    for (double q : candidates) {
        q_min = std::min(q_min, q);
        q_max = std::max(q_max, q);
    }
    for (const auto& r : data) {
        q_min = std::min(q_min, r.q_star);
        q_max = std::max(q_max, r.q_star);
    }

    TunerModel out = fit(data, cfg, q_min, q_max);
    if (cfg.folds >= 2 && data.size() >= cfg.folds) {
        std::vector<std::size_t> order(data.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(cfg.seed);
        std::shuffle(order.begin(), order.end(), rng);
        double se = 0.0;
        for (std::size_t fold = 0; fold < cfg.folds; ++fold) {
            std::vector<qlearn::QGridRecord> train;
            std::vector<qlearn::QGridRecord> test;
            for (std::size_t i = 0; i < order.size(); ++i) {
                (i % cfg.folds == fold ? test : train).push_back(data[order[i]]);
            }
            const TunerModel m = fit(train, cfg, q_min, q_max);
            for (const auto& r : test) {
                const double e = predict_q(m, r.features) - r.q_star;
                se += e * e;
            }
        }
        out.cv_rmse = std::sqrt(se / static_cast<double>(data.size()));
    }
    return out;
}

double predict_q(const TunerModel& t, const qlearn::FeatureVector& f) {
    if (t.records.empty()) throw StateError("tuner has not been trained");
    const Eigen::Vector3d z = normalized(t, qlearn::clamp(f));
    const double q = t.algorithm == Algorithm::Knn ? knn(t, z) : tree(t, z);
    return std::clamp(q, t.q_min, t.q_max);
}

kalman::Matrix hedge_q(const kalman::Matrix& q_raw) {
    if (q_raw.rows() != q_raw.cols()) throw ConfigError("process noise must be square");
    const Eigen::Index n = q_raw.rows();
    kalman::Matrix out = kalman::Matrix::Zero(n, n);
    for (Eigen::Index i = std::max<Eigen::Index>(0, n - 2); i < n; ++i) {
        const double v = q_raw(i, i);
        out(i, i) = v > 0.0 && std::isfinite(v) ? v : 0.0;
    }
    return out;
}

nlohmann::json to_json(const TunerModel& t) {
    nlohmann::json recs = nlohmann::json::array();
    for (const auto& r : t.records) {
        recs.push_back({r.features.kappa, r.features.speed, r.features.r, r.q_star, r.achieved_prmse, r.mc_iters,
                        r.seed});
    }
    nlohmann::json j{{"format", "hakf-tuner"},
                     {"version", kFormatVersion},
                     {"model_kind", models::to_string(t.model_kind)},
                     {"algorithm", to_string(t.algorithm)},
                     {"k", t.k},
                     {"feature_mean", {t.feature_mean(0), t.feature_mean(1), t.feature_mean(2)}},
                     {"feature_scale", {t.feature_scale(0), t.feature_scale(1), t.feature_scale(2)}},
                     {"q_min", t.q_min},
                     {"q_max", t.q_max},
                     {"records", recs}};
    j["cv_rmse"] = t.cv_rmse ? nlohmann::json(*t.cv_rmse) : nlohmann::json(nullptr);
    if (t.algorithm == Algorithm::Tree) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : t.tree) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.log_q});
        j["tree"] = nodes;
    }
    return j;
}

TunerModel tuner_from_json(const nlohmann::json& j) {
    TunerModel t;
    try {
        if (j.at("format") != "hakf-tuner") throw FormatError("not a tuner file");
        if (j.at("version").get<int>() != kFormatVersion) throw FormatError("unsupported tuner version");
        t.model_kind = models::parse_model_kind(j.at("model_kind").get<std::string>());
        t.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
        t.k = j.at("k").get<std::size_t>();
        for (int i = 0; i < 3; ++i) {
            t.feature_mean(i) = j.at("feature_mean").at(i).get<double>();
            t.feature_scale(i) = j.at("feature_scale").at(i).get<double>();
        }
        t.q_min = j.at("q_min").get<double>();
        t.q_max = j.at("q_max").get<double>();
        for (const auto& r : j.at("records")) {
            qlearn::QGridRecord rec;
            rec.features = {r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<double>()};
            rec.model_kind = t.model_kind;
            rec.q_star = r.at(3).get<double>();
            rec.achieved_prmse = r.at(4).get<double>();
            rec.mc_iters = r.at(5).get<std::size_t>();
            rec.seed = r.at(6).get<std::uint64_t>();
            t.records.push_back(rec);
        }
        if (!j.at("cv_rmse").is_null()) t.cv_rmse = j.at("cv_rmse").get<double>();
        if (t.algorithm == Algorithm::Tree) {
            for (const auto& n : j.at("tree")) {
                t.tree.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(), n.at(3).get<int>(),
                                  n.at(4).get<double>()});
            }
            const int size = static_cast<int>(t.tree.size());
            for (const auto& n : t.tree) {
                if (n.feature >= 3 || (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || n.left >= size || n.right >= size))) {
                    throw FormatError("tree node references are out of range");
                }
            }
            if (t.tree.empty()) throw FormatError("tree tuner has no nodes");
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad tuner file: ") + e.what());
    } catch (const ConfigError& e) {
        throw FormatError(std::string("bad tuner file: ") + e.what());
    }
    if (t.records.empty()) throw FormatError("tuner file has no records");
    return t;
}

void save_tuner(const TunerModel& t, const std::filesystem::path& path) {
    io::write_atomic(path, to_json(t).dump(1) + "\n");
}

TunerModel load_tuner(const std::filesystem::path& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return tuner_from_json(j);
}

}  // namespace hakf::tuner
