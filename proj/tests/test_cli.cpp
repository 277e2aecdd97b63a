// SPDX-License-Identifier: Apache-2.0

#include "bdris/io.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = -1;
    std::string out;
};

Outcome cli(const std::string& args)
{
    const std::string cmd = std::string(BDRIS_CLI_PATH) + " " + args + " 2>/dev/null";
    Outcome o;
    FILE* p = ::popen(cmd.c_str(), "r");
    if (!p)
        return o;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0)
        o.out.append(buf, n);
    const int status = ::pclose(p);
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return o;
}

std::string spec(const char* name) { return std::string(BDRIS_SPECS_DIR) + "/" + name; }

fs::path scratch(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / "bdris_cli_test";
    fs::create_directories(dir);
    return dir / name;
}

std::vector<std::string> lines(const std::string& text)
{
    std::vector<std::string> v;
    std::istringstream is(text);
    for (std::string l; std::getline(is, l);)
        v.push_back(l);
    return v;
}

std::vector<std::string> fields(const std::string& line)
{
    std::vector<std::string> v;
    std::istringstream is(line);
    for (std::string f; std::getline(is, f, ',');)
        v.push_back(f);
    return v;
}

}  // namespace

TEST(Cli, MinOverhead)
{
    const Outcome o = cli("min-overhead --m 8 --n 4 --k 1 --u 2");
    EXPECT_EQ(o.code, 0);
    EXPECT_EQ(o.out, "q=4 tau1=16 tau2=2 tau=18\n");
    EXPECT_EQ(cli("min-overhead --m 16 --n 12 --k 1 --u 4").out, "q=12 tau1=32 tau2=4 tau=36\n");
    EXPECT_EQ(cli("min-overhead --m 3 --n 2 --k 2 --u 2").out, "q=2 tau1=6 tau2=5 tau=11\n");
}

TEST(Cli, UsageErrorsExitOne)
{
    EXPECT_EQ(cli("").code, 1);
    EXPECT_EQ(cli("frobnicate").code, 1);
    EXPECT_EQ(cli("min-overhead --m 8").code, 1);
    EXPECT_EQ(cli("min-overhead --m 0 --n 4 --k 1 --u 1").code, 1);
    EXPECT_EQ(cli("run /nonexistent/spec.yaml").code, 1);
    EXPECT_EQ(cli("figure fig9").code, 1);
    EXPECT_EQ(cli("--help").code, 0);
}

TEST(Cli, MalformedSpecExitsOne)
{
    const fs::path bad = scratch("bad.yaml");
    std::ofstream(bad) << "config: {M: 3, N: 2}\nunknown_key: 1\n";
    EXPECT_EQ(cli("run " + bad.string()).code, 1);
}

TEST(Cli, RunWritesCsv)
{
    const Outcome o = cli("run " + spec("noise_free_minimum.yaml"));
    ASSERT_EQ(o.code, 0);
    const auto l = lines(o.out);
    ASSERT_EQ(l.size(), 41u);
    EXPECT_EQ(l[0], "scenario,M,N,K,U,tau,tau1,tau2,rho,estimator,trial,seed,nmse,ms");
    EXPECT_EQ(l[1].rfind("exact,8,4,1,2,18,16,2,0,proposed_noisefree,0,", 0), 0u);
    for (std::size_t i = 1; i < l.size(); i += 2) {
        const auto f = fields(l[i]);
        ASSERT_EQ(f.size(), 14u);
        EXPECT_LE(std::stod(f[12]), 1e-12) << l[i];
    }
}

TEST(Cli, RunIsDeterministicAcrossWorkerCounts)
{
    const fs::path a = scratch("a.csv");
    const fs::path b = scratch("b.csv");
    ASSERT_EQ(cli("run " + spec("fixed_rho.yaml") + " --out " + a.string()).code, 0);
    ASSERT_EQ(cli("run " + spec("fixed_rho.yaml") + " --out " + b.string()).code, 0);
    const std::string env = "env BDRIS_WORKERS=4 ";
    const std::string cmd = env + BDRIS_CLI_PATH + " run " + spec("fixed_rho.yaml");
    FILE* p = ::popen(cmd.c_str(), "r");
    ASSERT_NE(p, nullptr);
    std::string c;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, p)) > 0)
        c.append(buf, n);
    ::pclose(p);
    auto slurp = [](const fs::path& f) {
        std::ifstream is(f, std::ios::binary);
        return std::string(std::istreambuf_iterator<char>(is), {});
    };
    EXPECT_EQ(slurp(a), slurp(b));
    EXPECT_EQ(slurp(a), c);
    EXPECT_EQ(lines(c).size(), 11u);
}

TEST(Cli, TimingFlagFillsMs)
{
    const auto l = lines(cli("run " + spec("fixed_rho.yaml") + " --timing").out);
    ASSERT_GT(l.size(), 1u);
    EXPECT_NE(l[1].substr(l[1].rfind(',') + 1), "0");
}

TEST(Cli, VerifyGrid)
{
    const Outcome ok = cli("verify --grid " + spec("verify_grid.yaml"));
    EXPECT_EQ(ok.code, 0);
    EXPECT_NE(ok.out.find("all checks passed"), std::string::npos);
    EXPECT_EQ(ok.out.find("FAIL"), std::string::npos);

    // one element: Phase I has a single pair, and one instant short of the minimum leaves Phase II empty
    const fs::path g = scratch("grid1.yaml");
    std::ofstream(g) << "M: [1]\nN: [2]\nK: [1]\nU: [2]\n";
    const Outcome edge = cli("verify --grid " + g.string());
    EXPECT_EQ(edge.code, 0) << edge.out;

    const fs::path bad = scratch("grid_bad.yaml");
    std::ofstream(bad) << "M: [0]\nN: [2]\nK: [1]\nU: [2]\n";
    EXPECT_EQ(cli("verify --grid " + bad.string()).code, 1);
}

TEST(Cli, FigureWritesSummary)
{
    const fs::path out = scratch("fig8.csv");
    const fs::path sum = scratch("fig8_summary.csv");
    ASSERT_EQ(cli("figure fig8 --trials 2 --out " + out.string() + " --summary " + sum.string()).code, 0);
    std::ifstream is(sum);
    std::string header;
    std::getline(is, header);
    EXPECT_EQ(header, "scenario,estimator,rho,count,failures,mean_nmse,lo95,hi95");
    std::ifstream rows(out);
    int n = 0;
    for (std::string l; std::getline(rows, l);)
        ++n;
    EXPECT_EQ(n, 1 + 6 * 2 * 2);
}

TEST(Cli, DumpChannelAndSchedule)
{
    const Outcome ch = cli("dump channel --m 3 --n 2 --k 2 --u 2 --seed 5");
    ASSERT_EQ(ch.code, 0);
    std::istringstream cs(ch.out);
    const bdris::ChannelSet set = bdris::read_channel_dump(cs);
    EXPECT_EQ(set.dims.M, 3);
    EXPECT_EQ(set.seed, 5u);

    const Outcome sc = cli("dump schedule --m 3 --n 2 --k 2 --u 2 --tau 15");
    ASSERT_EQ(sc.code, 0);
    std::istringstream ss(sc.out);
    const bdris::PilotSchedule s = bdris::read_schedule(ss);
    EXPECT_EQ(s.tau(), 15);
    EXPECT_EQ(s.tau1, 6);
    EXPECT_EQ(cli("dump schedule --m 3 --n 2 --k 2 --u 2 --tau 10").code, 1);
}
