#include "hakf/metrics.hpp"

#include "hakf/error.hpp"
#include "hakf/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

namespace hakf::metrics {

namespace {

void check(std::span<const Vec2> truth, std::span<const Vec2> estimate) {
    if (truth.size() != estimate.size()) {
        throw ConfigError("truth has " + std::to_string(truth.size()) + " points, estimate has " +
                          std::to_string(estimate.size()));
    }
    if (truth.empty()) throw ConfigError("metrics need at least one step");
}

std::string fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::string pad(const std::string& s, std::size_t width) {
    return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

}  // namespace

double prmse(std::span<const Vec2> truth, std::span<const Vec2> estimate) {
    check(truth, estimate);
    double se = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k) se += (estimate[k] - truth[k]).squaredNorm();
    return std::sqrt(se / static_cast<double>(truth.size()));
}

double pmae(std::span<const Vec2> truth, std::span<const Vec2> estimate) {
    check(truth, estimate);
    double ae = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k) ae += (estimate[k] - truth[k]).cwiseAbs().sum();
    return ae / static_cast<double>(truth.size());
}

MetricsReport evaluate(std::span<const Vec2> truth, std::span<const Vec2> estimate, std::size_t skip) {
    check(truth, estimate);
    if (skip >= truth.size()) throw ConfigError("warm-up skip leaves no steps to evaluate");
    const auto t = truth.subspan(skip);
    const auto e = estimate.subspan(skip);
    MetricsReport rep;
    rep.steps = t.size();
    rep.prmse = prmse(t, e);
    rep.pmae = pmae(t, e);
    Vec2 se = Vec2::Zero();
    Vec2 ae = Vec2::Zero();
    for (std::size_t k = 0; k < t.size(); ++k) {
        const Vec2 err = e[k] - t[k];
        se += err.cwiseAbs2();
        ae += err.cwiseAbs();
    }
    const double n = static_cast<double>(t.size());
    rep.rmse_x = std::sqrt(se.x() / n);
    rep.rmse_y = std::sqrt(se.y() / n);
    rep.mae_x = ae.x() / n;
    rep.mae_y = ae.y() / n;
    return rep;
}

BenchTable bench_table(std::span<const BenchRow> rows) {
    std::vector<std::string> methods;
    std::vector<double> rs;
    std::map<std::pair<std::string, double>, MetricsReport> cell;
    for (const auto& row : rows) {
        if (std::find(methods.begin(), methods.end(), row.method) == methods.end()) methods.push_back(row.method);
        if (std::find(rs.begin(), rs.end(), row.r) == rs.end()) rs.push_back(row.r);
        cell[{row.method, row.r}] = row.report;
    }
    std::sort(rs.begin(), rs.end());

    std::map<double, std::pair<double, double>> best;
    for (double r : rs) {
        double bp = std::numeric_limits<double>::infinity();
        double bm = bp;
        for (const auto& m : methods) {
            auto it = cell.find({m, r});
            if (it == cell.end()) continue;
            bp = std::min(bp, it->second.prmse);
            bm = std::min(bm, it->second.pmae);
        }
        best[r] = {bp, bm};
    }

    std::size_t name_w = 6;
    for (const auto& m : methods) name_w = std::max(name_w, m.size());
    constexpr std::size_t col_w = 10;
    BenchTable out;
    std::string header = std::string("method") + std::string(name_w - 6, ' ');
    for (double r : rs) {
        header += " | " + pad("PRMSE r=" + io::format_double(r), col_w + 1) + " " +
                  pad("PMAE r=" + io::format_double(r), col_w + 1);
    }
    out.text = header + "\n" + std::string(header.size(), '-') + "\n";
    for (const auto& m : methods) {
        std::string line = m + std::string(name_w - m.size(), ' ');
        for (double r : rs) {
            auto it = cell.find({m, r});
            if (it == cell.end()) {
                line += " | " + pad("-", col_w + 1) + " " + pad("-", col_w + 1);
                continue;
            }
            const auto& rep = it->second;
            const std::string p = fixed(rep.prmse) + (rep.prmse == best[r].first ? "*" : " ");
            const std::string a = fixed(rep.pmae) + (rep.pmae == best[r].second ? "*" : " ");
            line += " | " + pad(p, col_w + 1) + " " + pad(a, col_w + 1);
        }
        out.text += line + "\n";
    }

    out.csv = "method,r,prmse,pmae,steps\n";
    for (const auto& row : rows) {
        out.csv += row.method + ',' + io::format_double(row.r) + ',' + io::format_double(row.report.prmse) + ',' +
                   io::format_double(row.report.pmae) + ',' + std::to_string(row.report.steps) + '\n';
    }
    return out;
}

std::vector<BenchRow> parse_bench_csv(std::string_view csv) {
    std::vector<BenchRow> out;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < csv.size()) {
        std::size_t end = csv.find('\n', pos);
        if (end == std::string_view::npos) end = csv.size();
        const std::string_view line = csv.substr(pos, end - pos);
        pos = end + 1;
        if (++line_no == 1 || line.empty()) continue;
        const auto f = io::split(line);
        if (f.size() != 5) throw ParseError("bench row needs 5 fields", line_no);
        BenchRow row;
        row.method = std::string(f[0]);
        row.r = io::parse_double(f[1], line_no);
        row.report.prmse = io::parse_double(f[2], line_no);
        row.report.pmae = io::parse_double(f[3], line_no);
        row.report.steps = static_cast<std::size_t>(io::parse_double(f[4], line_no));
        out.push_back(std::move(row));
    }
    return out;
}

}  // namespace hakf::metrics
