#include "hakf/io.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "hakf_test_cli";

int run(const std::string& args) {
    fs::create_directories(kWork);
    const std::string cmd = std::string("\"") + HAKF_CLI_PATH + "\" --out-dir \"" + kWork.string() + "\" " + args +
                            " >\"" + (kWork / "stdout.txt").string() + "\" 2>\"" + (kWork / "stderr.txt").string() + "\"";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t lines(const std::string& s) {
    std::size_t n = 0;
    for (char c : s) n += c == '\n';
    return n;
}

}  // namespace

TEST(Cli, NoArgumentsPrintsHelpAndExitsTwo) {
    const std::string cmd = std::string("\"") + HAKF_CLI_PATH + "\" >/dev/null";
    const int status = std::system(cmd.c_str());
    ASSERT_TRUE(WIFEXITED(status));
    EXPECT_EQ(WEXITSTATUS(status), 2);
}

TEST(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(run("frobnicate"), 2);
    EXPECT_EQ(run("simulate --no-such-flag"), 2);
    EXPECT_EQ(run("simulate --help"), 0);
}

TEST(Cli, SimulateThreeRows) {
    const auto in = kWork / "three.csv";
    fs::create_directories(kWork);
    hakf::io::write_atomic(in, "t,zx,zy,gt_x,gt_y\n0,0,0,0,0\n0.005,0.05,0,0.05,0\n0.01,0.1,0.01,0.1,0\n");
    const auto out = kWork / "track.csv";
    ASSERT_EQ(run("simulate --input \"" + in.string() + "\" --adapt const --r 0.5 -o \"" + out.string() + "\""), 0);
    const std::string text = hakf::io::read_file(out);
    EXPECT_TRUE(text.starts_with("k,px,py,vx,vy,q,kappa,speed\n"));
    EXPECT_EQ(lines(text), 1u + 3u + 1u);  // header, rows, metrics footer
    EXPECT_NE(text.find("# prmse="), std::string::npos);
    EXPECT_TRUE(fs::exists(kWork / "simulate.config.toml"));
}

TEST(Cli, SimulateComposedTrajectory) {
    const auto out = kWork / "composed.csv";
    ASSERT_EQ(run("simulate --segments line:20:10,arc:10:10:20 --model ca --adapt innovation -o \"" + out.string() +
                  "\""),
              0);
    EXPECT_GT(lines(hakf::io::read_file(out)), 500u);
}

TEST(Cli, BenchIsByteIdentical) {
    const std::string args =
        "bench --trajectories 2 --adapts q-inf,const,innovation --const-qs 0.1 --rs 0.5 --models cv -o ";
    ASSERT_EQ(run("--threads 1 " + args + "\"" + (kWork / "b1").string() + "\""), 0);
    ASSERT_EQ(run("--threads 3 " + args + "\"" + (kWork / "b2").string() + "\""), 0);
    const std::string a = hakf::io::read_file(kWork / "b1.csv");
    EXPECT_EQ(a, hakf::io::read_file(kWork / "b2.csv"));
    EXPECT_EQ(lines(a), 1u + 3u);
    EXPECT_TRUE(fs::exists(kWork / "b1.txt"));
    EXPECT_TRUE(fs::exists(kWork / "b1.suite"));
}

TEST(Cli, ConfigEchoReloads) {
    const auto out = kWork / "composed2.csv";
    ASSERT_EQ(run("simulate --segments line:5:5 --adapt q-zero -o \"" + out.string() + "\""), 0);
    const auto cfg = kWork / "simulate.config.toml";
    ASSERT_TRUE(fs::exists(cfg));
    fs::remove(out);
    ASSERT_EQ(run("--config \"" + cfg.string() + "\" simulate"), 0);
    EXPECT_TRUE(fs::exists(out));
}

TEST(Cli, ModuleErrorsExitOne) {
    const auto in = kWork / "jitter.csv";
    fs::create_directories(kWork);
    hakf::io::write_atomic(in, "t,zx,zy\n0,0,0\n0.1,0,0\n0.25,0,0\n");
    EXPECT_EQ(run("simulate --input \"" + in.string() + "\" --adapt const"), 1);
    EXPECT_NE(hakf::io::read_file(kWork / "stderr.txt").find("hakf:"), std::string::npos);
    EXPECT_EQ(run("simulate --segments line:10:5 --adapt learned"), 1);  // no tuner
}
