#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "mpest/csv.hpp"

namespace fs = std::filesystem;
using mpest::cli::run;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "mpest");
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("mpest_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static mpest::csv::Table table(const std::string& p) {
    std::ifstream in(p);
    return mpest::csv::read(in);
  }

  void write(const std::string& name, const std::string& text) const { std::ofstream(path(name)) << text; }

  fs::path dir_;
};

const std::vector<std::string> kSmallGa = {"--ga.population_size", "10", "--ga.max_generations", "3",
                                           "--estimate.restarts", "1"};

std::vector<std::string> with(std::vector<std::string> args, const std::vector<std::string>& more) {
  args.insert(args.end(), more.begin(), more.end());
  return args;
}

}  // namespace

TEST_F(CliTest, SynthWritesRecords) {
  const Result r = invoke({"synth", "--out", path("s")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto t = table(path("s/received.csv"));
  ASSERT_EQ(t.rows.size(), 1000u);
  EXPECT_EQ(t.header, (std::vector<std::string>{"index", "value"}));
  for (std::size_t n = 0; n < 200; ++n) EXPECT_EQ(mpest::csv::parse_double(t.rows[n][1]), 0.0);
  EXPECT_EQ(table(path("s/pulse.csv")).rows.size(), 750u);
  EXPECT_EQ(t.comments[1], "master_seed: 1");
  EXPECT_NE(r.out.find("record power"), std::string::npos);
}

TEST_F(CliTest, SynthIsBitIdentical) {
  ASSERT_EQ(invoke({"synth", "--out", path("a"), "--noise.snr_db", "5"}).code, 0);
  ASSERT_EQ(invoke({"synth", "--out", path("b"), "--noise.snr_db", "5"}).code, 0);
  EXPECT_EQ(slurp(path("a/received.csv")), slurp(path("b/received.csv")));
  ASSERT_EQ(invoke({"synth", "--out", path("c"), "--noise.snr_db", "5", "--seed", "2"}).code, 0);
  EXPECT_NE(slurp(path("a/received.csv")), slurp(path("c/received.csv")));
}

TEST_F(CliTest, SynthReportsEmpiricalSnr) {
  const Result r = invoke({"synth", "--out", path("s"), "--noise.snr_db", "0", "--seed", "9"});
  ASSERT_EQ(r.code, 0);
  const auto pos = r.out.find("empirical SNR (dB): ");
  ASSERT_NE(pos, std::string::npos);
  EXPECT_NEAR(std::stod(r.out.substr(pos + 20)), 0.0, 0.5);
}

TEST_F(CliTest, SweepFindsTruth) {
  const Result r = invoke({"sweep", "--param", "tau1", "--from", "0", "--to", "999", "--steps", "1000", "--out",
                           path("sweep.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("argmin tau1 = 200 "), std::string::npos) << r.out;
  const auto t = table(path("sweep.csv"));
  EXPECT_EQ(t.header, (std::vector<std::string>{"parameter_value", "E_c"}));
  EXPECT_EQ(t.rows.size(), 1000u);
}

TEST_F(CliTest, SweepDottedFlagsAndUnknownParameter) {
  EXPECT_EQ(invoke({"sweep", "--sweep.param", "a3", "--out", path("a.csv")}).code, 0);
  EXPECT_EQ(table(path("a.csv")).rows.size(), 401u);
  const Result bad = invoke({"sweep", "--param", "tau9", "--out", path("b.csv")});
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.err.find("tau9"), std::string::npos);
}

TEST_F(CliTest, EstimateHybridSeedOne) {
  const Result r = invoke({"estimate", "--mode", "hybrid", "--seed", "1", "--out", path("e")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto t = table(path("e/estimate.csv"));
  std::map<std::string, double> v;
  for (const auto& row : t.rows) v[row[0]] = mpest::csv::parse_double(row[1]);
  EXPECT_LE(v.at("objective"), 1e-6 * v.at("reference_energy"));
  EXPECT_NEAR(v.at("tau1"), 200.0, 0.5);
  EXPECT_EQ(v.at("generations"), 60.0);
  const auto h = table(path("e/history.csv"));
  EXPECT_EQ(h.header, (std::vector<std::string>{"generation", "best_E_c", "mean_E_c"}));
  EXPECT_EQ(h.rows.size(), 60u);
  EXPECT_NE(r.out.find("wall time"), std::string::npos);
}

TEST_F(CliTest, EstimateIsReproducible) {
  const auto args = with({"estimate", "--mode", "hybrid", "--seed", "3"}, kSmallGa);
  ASSERT_EQ(invoke(with(args, {"--out", path("x")})).code, 0);
  ASSERT_EQ(invoke(with(args, {"--out", path("y")})).code, 0);
  EXPECT_EQ(slurp(path("x/estimate.csv")), slurp(path("y/estimate.csv")));
  EXPECT_EQ(slurp(path("x/history.csv")), slurp(path("y/history.csv")));
}

TEST_F(CliTest, EstimateWithMorePathsThanTheRecord) {
  const Result r = invoke(with({"estimate", "--estimate.num_paths", "4", "--out", path("m")}, kSmallGa));
  ASSERT_EQ(r.code, 0) << r.err;
  const auto t = table(path("m/estimate.csv"));
  EXPECT_EQ(t.rows[3][0], "a4");
  EXPECT_EQ(t.rows[7][0], "tau4");
}

TEST_F(CliTest, BenchRowCountAndDeterminism) {
  const auto args = with({"bench", "--mode", "hybrid", "--bench.trials", "2", "--seed", "5"}, kSmallGa);
  ASSERT_EQ(invoke(with(args, {"--out", path("b1.csv"), "--bench.threads", "1"})).code, 0);
  ASSERT_EQ(invoke(with(args, {"--out", path("b2.csv"), "--bench.threads", "3"})).code, 0);
  const auto t = table(path("b1.csv"));
  EXPECT_EQ(t.header, (std::vector<std::string>{"snr_db", "parameter_name", "mse", "trials"}));
  EXPECT_EQ(t.rows.size(), 24u);
  EXPECT_EQ(t.rows[0][1], "a1");
  EXPECT_EQ(t.rows[5][1], "tau3");
  EXPECT_EQ(t.rows[23][0], "-10");
  EXPECT_EQ(slurp(path("b1.csv")), slurp(path("b2.csv")));
  EXPECT_EQ(slurp(path("b1.csv.trials.csv")), slurp(path("b2.csv.trials.csv")));
  EXPECT_EQ(table(path("b1.csv.trials.csv")).rows.size(), 8u);
}

TEST_F(CliTest, BenchNoiselessEntry) {
  const Result r = invoke({"bench", "--mode", "hybrid", "--bench.trials", "3", "--bench.snr_list", "noiseless",
                           "--out", path("n.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto t = table(path("n.csv"));
  ASSERT_EQ(t.rows.size(), 6u);
  EXPECT_EQ(t.rows[0][0], "inf");
  for (const auto& row : t.rows) {
    const double limit = row[1][0] == 'a' ? 4e-4 : 0.25;
    EXPECT_LT(mpest::csv::parse_double(row[2]), limit) << row[1];
  }
}

TEST_F(CliTest, ConfigFileAndOverridePrecedence) {
  write("s.cfg", "seed = 4\n[noise]\nsnr_db = 3\n");
  ASSERT_EQ(invoke({"synth", "--config", path("s.cfg"), "--out", path("a")}).code, 0);
  ASSERT_EQ(invoke({"synth", "--seed", "4", "--noise.snr_db", "3", "--out", path("b")}).code, 0);
  EXPECT_EQ(slurp(path("a/received.csv")), slurp(path("b/received.csv")));
  ASSERT_EQ(invoke({"synth", "--config", path("s.cfg"), "--seed", "5", "--out", path("c")}).code, 0);
  EXPECT_NE(slurp(path("a/received.csv")), slurp(path("c/received.csv")));
  EXPECT_NE(table(path("c/received.csv")).comments[1].find("5"), std::string::npos);
}

TEST_F(CliTest, ConfigErrorsExitTwoWithLine) {
  write("bad.cfg", "seed = 1\n\nchirp.f1 = 0.3\nchirp.f2 = 0.2\n");
  const Result r = invoke({"synth", "--config", path("bad.cfg"), "--out", path("o")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bad.cfg:3"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(path("o")));

  write("unknown.cfg", "seedd = 1\n");
  const Result u = invoke({"synth", "--config", path("unknown.cfg")});
  EXPECT_EQ(u.code, 2);
  EXPECT_NE(u.err.find("unknown.cfg:1"), std::string::npos);

  EXPECT_EQ(invoke({"synth", "--mode", "fast"}).code, 2);
  EXPECT_EQ(invoke({"synth", "--no-such-flag", "1"}).code, 2);
  EXPECT_EQ(invoke({}).code, 2);
  EXPECT_EQ(invoke({"--help"}).code, 0);
}

TEST_F(CliTest, IoErrorsExitFour) {
  EXPECT_EQ(invoke({"synth", "--config", path("missing.cfg")}).code, 4);
  write("file", "x");
  EXPECT_EQ(invoke({"synth", "--out", path("file")}).code, 4);
  EXPECT_EQ(invoke({"sweep", "--out", path("no/such/dir/sweep.csv")}).code, 4);
}

TEST_F(CliTest, EstimationErrorsExitThree) {
  const Result r = invoke({"estimate", "--mode", "hybrid", "--estimate.threshold_frac", "0.999", "--out", path("e")});
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.err.find("usable bins"), std::string::npos) << r.err;
}
