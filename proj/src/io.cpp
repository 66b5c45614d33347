#include "hakf/io.hpp"

#include "hakf/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

namespace hakf::io {

namespace {

constexpr double kDtRelTol = 1e-6;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return {buf, res.ptr};
}

double parse_double(std::string_view field, std::size_t line) {
    field = trim(field);
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    double v = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size()) {
        throw ParseError("not a number: '" + std::string(field) + "'", line);
    }
    return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

void write_atomic(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".partial";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw Error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

TrajectoryFile parse_trajectory(std::string_view text) {
    TrajectoryFile out;
    std::size_t line_no = 0;
    std::size_t columns = 0;
    std::size_t pos = 0;
    std::vector<Vec2> truth;
    while (pos <= text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const std::string_view line = trim(text.substr(pos, end - pos));
        pos = end + 1;
        ++line_no;
        if (line.empty()) {
            if (end == text.size()) break;
            continue;
        }
        const auto fields = split(line);
        if (columns == 0) {
            std::vector<std::string> names;
            for (auto f : fields) names.emplace_back(trim(f));
            const bool base = names.size() >= 3 && names[0] == "t" && names[1] == "zx" && names[2] == "zy";
            if (base && names.size() == 3) {
                columns = 3;
            } else if (base && names.size() == 5 && names[3] == "gt_x" && names[4] == "gt_y") {
                columns = 5;
            } else {
                throw ParseError("header must be 't,zx,zy' or 't,zx,zy,gt_x,gt_y'", line_no);
            }
            continue;
        }
        if (fields.size() != columns) {
            throw ParseError("expected " + std::to_string(columns) + " fields, got " +
                                 std::to_string(fields.size()),
                             line_no);
        }
        double v[5];
        for (std::size_t i = 0; i < columns; ++i) {
            v[i] = parse_double(fields[i], line_no);
            if (!std::isfinite(v[i])) throw ParseError("non-finite value", line_no);
        }
        out.t.push_back(v[0]);
        out.measurements.emplace_back(v[1], v[2]);
        if (columns == 5) truth.emplace_back(v[3], v[4]);
        if (end == text.size()) break;
    }
    if (columns == 0) throw ParseError("missing header", 1);
    if (out.t.empty()) throw FormatError("trajectory has no rows");
    if (out.t.size() >= 2) {
        out.dt = out.t[1] - out.t[0];
        if (!(out.dt > 0.0)) throw FormatError("timestamps must be strictly increasing");
        for (std::size_t i = 1; i < out.t.size(); ++i) {
            const double step = out.t[i] - out.t[i - 1];
            if (!(step > 0.0)) throw FormatError("timestamps must be strictly increasing at row " + std::to_string(i + 1));
            if (std::abs(step - out.dt) > kDtRelTol * out.dt) {
                throw FormatError("non-constant step size at row " + std::to_string(i + 1));
            }
        }
    }
    if (columns == 5) out.truth = std::move(truth);
    return out;
}

TrajectoryFile load_trajectory(const std::filesystem::path& path) { return parse_trajectory(read_file(path)); }

void save_trajectory(const std::filesystem::path& path, double dt, const std::vector<Vec2>& measurements,
                     const std::vector<Vec2>* truth) {
    if (truth && truth->size() != measurements.size()) throw ConfigError("truth and measurement lengths differ");
    std::string s = truth ? "t,zx,zy,gt_x,gt_y\n" : "t,zx,zy\n";
    for (std::size_t i = 0; i < measurements.size(); ++i) {
        s += format_double(static_cast<double>(i) * dt);
        s += ',' + format_double(measurements[i].x()) + ',' + format_double(measurements[i].y());
        if (truth) s += ',' + format_double((*truth)[i].x()) + ',' + format_double((*truth)[i].y());
        s += '\n';
    }
    write_atomic(path, s);
}

}  // namespace hakf::io
