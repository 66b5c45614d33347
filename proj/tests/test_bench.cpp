#include "hakf/bench.hpp"
#include "hakf/error.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace hakf;
using namespace hakf::bench;
using runtime::AdaptMode;

namespace {

Suite small_suite() {
    SuiteConfig sc;
    sc.trajectories = 2;
    sc.segments = 3;
    sc.min_segment_time = 1.0;
    sc.max_segment_time = 2.0;
    return make_suite(sc);
}

}  // namespace

TEST(Suite, ShapeAndRanges) {
    const auto s = make_suite();
    ASSERT_EQ(s.size(), 20u);
    for (const auto& segs : s) {
        ASSERT_EQ(segs.size(), 5u);
        for (std::size_t i = 0; i < segs.size(); ++i) {
            EXPECT_EQ(segs[i].kind, i % 2 ? traj::SegmentKind::Arc : traj::SegmentKind::Line);
            EXPECT_GE(segs[i].speed, 2.0 - 1e-3);
            EXPECT_LE(segs[i].speed, 40.0 + 1e-3);
            if (segs[i].kind == traj::SegmentKind::Arc) {
                const double k = 1.0 / std::abs(segs[i].turn_radius);
                EXPECT_GE(k, 1.0 / 200.0 * 0.999);
                EXPECT_LE(k, 1.0 * 1.001);
            }
        }
        EXPECT_NO_THROW(traj::compose_mixed_trajectory(segs, 0.005, 1.0, 1));
    }
}

TEST(Suite, TextRoundTripIsExact) {
    const auto s = make_suite();
    const std::string text = format_suite(s);
    EXPECT_EQ(format_suite(parse_suite(text)), text);
    const auto p = std::filesystem::temp_directory_path() / "hakf_test_suite.txt";
    save_suite(s, p);
    EXPECT_EQ(format_suite(load_suite(p)), text);
    EXPECT_NE(format_suite(make_suite({.seed = 8})), text);
}

TEST(Suite, ParseErrors) {
    EXPECT_THROW(parse_suite("# only a comment\n"), FormatError);
    try {
        parse_suite("line:10:2\nline:oops:2\n");
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 2u);
    }
    EXPECT_THROW(make_suite({.trajectories = 0}), ConfigError);
}

TEST(Methods, Expansion) {
    BenchConfig cfg;
    const auto ms = methods(cfg);
    EXPECT_EQ(ms.size(), 2u * (5u + 5u));
    EXPECT_EQ(ms.front().label(), "cv/q-zero");
    EXPECT_EQ(ms[2].label(), "cv/const:0.01");
    EXPECT_EQ(ms[6].label(), "cv/const:30");
    EXPECT_EQ(ms.back().label(), "ca/scaling");
}

TEST(RunBench, OneRowPerMethodAndR) {
    BenchConfig cfg;
    cfg.rs = {0.5, 2.0};
    cfg.const_qs = {0.1};
    cfg.threads = 3;
    const auto rows = run_bench(small_suite(), cfg);
    EXPECT_EQ(rows.size(), 2u * methods(cfg).size());
    for (const auto& row : rows) {
        EXPECT_GT(row.report.steps, 0u);
        EXPECT_GE(row.report.prmse, 0.0);
    }
}

TEST(RunBench, CsvIdenticalAcrossRunsAndThreads) {
    BenchConfig cfg;
    cfg.rs = {1.0};
    cfg.const_qs = {1.0};
    cfg.mc = 2;
    cfg.threads = 1;
    const auto a = metrics::bench_table(run_bench(small_suite(), cfg)).csv;
    cfg.threads = 4;
    const auto b = metrics::bench_table(run_bench(small_suite(), cfg)).csv;
    EXPECT_EQ(a, b);
}

TEST(RunBench, LearnedNeedsTuner) {
    BenchConfig cfg;
    cfg.adapts = {AdaptMode::Learned};
    EXPECT_THROW(run_bench(small_suite(), cfg), ConfigError);
    cfg.adapts = {AdaptMode::Const};
    cfg.mc = 0;
    EXPECT_THROW(run_bench(small_suite(), cfg), ConfigError);
    cfg.mc = 1;
    EXPECT_THROW(run_bench(Suite{}, cfg), ConfigError);
}
