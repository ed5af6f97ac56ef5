#include <gtest/gtest.h>

#include <unistd.h>

#include <sstream>

#include "rackcoop/cli.hpp"

using namespace rackcoop;

namespace {

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult run(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = fs::temp_directory_path() / ("rackcoop_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    std::string operator/(const std::string& name) const { return (path_ / name).string(); }

private:
    fs::path path_;
};

void write_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream(path, std::ios::binary | std::ios::trunc) << bytes;
}

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(Cli, TradeoffCorners) {
    const CliResult r = run({"tradeoff", "--params", "8,4,2,4,2,2"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("MSRCR alpha=9/2 gamma=27/4"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("MBRCR alpha=5 gamma=5"), std::string::npos) << r.out;
}

TEST(Cli, TradeoffSweepAndCsv) {
    TempDir dir;
    const CliResult r = run({"tradeoff", "--params", "8,4,2,4,2,2", "--B", "18", "--sweep", "2", "--csv", dir / "c.csv"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("curve (3 points)"), std::string::npos);
    EXPECT_EQ(read_bytes(dir / "c.csv"),
              "alpha_num,alpha_den,gamma_num,gamma_den,role\n9,2,27,4,MSRCR\n19,4,47,8,custom\n5,1,5,1,MBRCR\n");
}

TEST(Cli, VerifyMincutAgrees) {
    const CliResult r = run({"verify-mincut", "--params", "8,4,2,4,2,2", "--alpha", "5", "--beta1", "2", "--beta2", "1"});
    ASSERT_EQ(r.code, 0) << r.err << r.out;
    EXPECT_NE(r.out.find("bound  18"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("oracle 18"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("agree"), std::string::npos);
}

TEST(Cli, VerifyMincutFractional) {
    const CliResult r = run({"verify-mincut", "--params", "8,4,2,4,2,2", "--alpha", "5", "--beta1", "2", "--beta2", "1/2"});
    ASSERT_EQ(r.code, 0) << r.err << r.out;
    EXPECT_NE(r.out.find("bound  17"), std::string::npos) << r.out;
}

TEST(Cli, EncodeCollectRepairRoundTrip) {
    TempDir dir;
    const std::string payload = "cooperative rack";
    write_bytes(dir / "in.bin", payload.substr(0, 14));
    CliResult r = run({"encode", "--params", "8,4,2,4,2,2", "--seed", "3", "--in", dir / "in.bin", "--out", dir / "c"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("B=18"), std::string::npos);

    r = run({"repair", "--dir", dir / "c", "--racks", "1,3", "--nodes", "1:1,3:2", "--helpers", "2,4"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("rack 1 cross-rack download 5 (gamma 5)"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("rack 3 cross-rack download 5 (gamma 5)"), std::string::npos) << r.out;

    r = run({"collect", "--out", dir / "c", "--nodes", "1:1,2:2,3:1,4:2", "--recover", dir / "out.bin"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_bytes(dir / "out.bin"), payload.substr(0, 14));
}

TEST(Cli, RawInputMustBeExactlyB) {
    TempDir dir;
    write_bytes(dir / "in.bin", std::string(17, 'x'));
    CliResult r = run({"encode", "--params", "8,4,2,4,2,2", "--in", dir / "in.bin", "--out", dir / "c", "--raw"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("B = 18"), std::string::npos) << r.err;

    write_bytes(dir / "in.bin", std::string(18, 'x'));
    r = run({"encode", "--params", "8,4,2,4,2,2", "--in", dir / "in.bin", "--out", dir / "c", "--raw"});
    ASSERT_EQ(r.code, 0) << r.err;
    r = run({"collect", "--out", dir / "c", "--nodes", "2:1,2:2,4:1,4:2", "--recover", dir / "out.bin", "--raw"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_bytes(dir / "out.bin"), std::string(18, 'x'));
}

TEST(Cli, TamperedClusterIsIntegrityFailure) {
    TempDir dir;
    write_bytes(dir / "in.bin", "abc");
    ASSERT_EQ(run({"encode", "--params", "8,4,2,4,2,2", "--in", dir / "in.bin", "--out", dir / "c"}).code, 0);
    write_bytes(dir / "c/rack_2/node_1.bin", "zzzzz");
    const CliResult r = run({"collect", "--out", dir / "c", "--nodes", "1:1,2:1,3:1,4:1", "--recover", dir / "o"});
    EXPECT_EQ(r.code, 2);
}

TEST(Cli, ValidationErrors) {
    EXPECT_EQ(run({"tradeoff", "--params", "8,4,2,4,3,2"}).code, 1);
    EXPECT_EQ(run({"tradeoff", "--params", "8,4"}).code, 1);
    EXPECT_EQ(run({"tradeoff", "--params", "8,4,2,4,2,2", "--bogus"}).code, 1);
    EXPECT_EQ(run({"verify-mincut", "--params", "8,4,2,4,2,2", "--alpha", "x", "--beta1", "1", "--beta2", "1"}).code, 1);
    EXPECT_EQ(run({}).code, 1);
    TempDir dir;
    write_bytes(dir / "in.bin", "abc");
    ASSERT_EQ(run({"encode", "--params", "8,4,2,4,2,2", "--in", dir / "in.bin", "--out", dir / "c"}).code, 0);
    EXPECT_EQ(run({"repair", "--dir", dir / "c", "--racks", "1,3", "--nodes", "1:1,1:2,3:1,3:2", "--helpers", "2"}).code, 1);
    EXPECT_EQ(run({"repair", "--dir", dir / "c", "--racks", "1,2", "--nodes", "1:1,1:2,3:1,3:2", "--helpers", "2,4"}).code, 1);
    EXPECT_EQ(run({"collect", "--out", dir / "c", "--nodes", "1:1,1:2,3:1", "--recover", dir / "o"}).code, 1);
}

TEST(Cli, HelpExitsZero) {
    const CliResult r = run({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("verify-mincut"), std::string::npos);
}

TEST(Cli, BenchReportsLedger) {
    const CliResult r = run({"bench", "--params", "8,4,2,4,2,2", "--rounds", "3", "--probes", "4"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("probes 4/4 recovered"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("construction 5, MBRCR point 5"), std::string::npos);
}
