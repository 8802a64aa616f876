// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "midg/cli.hpp"
#include "midg/errors.hpp"

namespace fs = std::filesystem;
using midg::cli::run_cli;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "midg");
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("midg_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::size_t file_count() const {
    return static_cast<std::size_t>(std::distance(fs::directory_iterator(dir_), fs::directory_iterator{}));
  }
  fs::path dir_;
};

}  // namespace

TEST_F(Cli, GenIsDeterministic) {
  ASSERT_EQ(run({"gen", "--samples", "100", "--seed", "7", "--out", path("a.txt")}).code, 0);
  ASSERT_EQ(run({"gen", "--samples", "100", "--seed", "7", "--out", path("b.txt")}).code, 0);
  EXPECT_EQ(slurp(path("a.txt")), slurp(path("b.txt")));
  EXPECT_EQ(slurp(path("a.txt")).rfind("MIDG1 8 4 6\n", 0), 0u);
}

TEST_F(Cli, GenSimsRangeRestrictsLabels) {
  ASSERT_EQ(run({"gen", "--samples", "200", "--sims", "--out", path("s.txt")}).code, 0);
  std::istringstream in(slurp(path("s.txt")));
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string id, split;
    int domain;
    double label;
    row >> id >> split >> domain >> label;
    EXPECT_GE(label, -1.0);
    EXPECT_LE(label, 1.0);
  }
}

TEST_F(Cli, EvalWithoutParameterFileIsUsageError) {
  ASSERT_EQ(run({"gen", "--samples", "20", "--out", path("d.txt")}).code, 0);
  const auto r = run({"eval", "--data", path("d.txt")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run({"eval", "--data", path("d.txt"), "--params", path("missing.json")}).code, 2);
}

TEST_F(Cli, UnknownFlagIsUsageErrorWithoutSideEffects) {
  const auto r = run({"gen", "--samples", "20", "--bogus", "3", "--out", path("d.txt")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(file_count(), 0u);
  EXPECT_EQ(run({}).code, 2);
  EXPECT_EQ(run({"frobnicate"}).code, 2);
}

TEST_F(Cli, InvalidValuesAreUsageErrorsWithoutSideEffects) {
  EXPECT_EQ(run({"gen", "--samples", "abc", "--out", path("d.txt")}).code, 2);
  EXPECT_EQ(run({"gen", "--domains", "0", "--out", path("d.txt")}).code, 2);
  EXPECT_EQ(file_count(), 0u);
  ASSERT_EQ(run({"gen", "--samples", "20", "--out", path("d.txt")}).code, 0);
  EXPECT_EQ(run({"train", "--data", path("d.txt"), "--out", path("p.json"), "--w1", "0.9"}).code, 2);
  EXPECT_EQ(run({"train", "--data", path("d.txt"), "--out", path("p.json"), "--kv-mode", "odd"}).code, 2);
  EXPECT_EQ(file_count(), 1u);
}

TEST_F(Cli, TrainEvalRoundTrip) {
  ASSERT_EQ(run({"gen", "--samples", "200", "--test-domain", "2", "--out", path("d.txt")}).code, 0);
  const auto t = run({"train", "--data", path("d.txt"), "--out", path("p.json"), "--log", path("log.jsonl"),
                      "--epochs", "3"});
  ASSERT_EQ(t.code, 0) << t.err;
  std::istringstream log(slurp(path("log.jsonl")));
  std::string line;
  std::size_t n = 0;
  while (std::getline(log, line)) {
    const auto j = nlohmann::json::parse(line);
    ++n;
    EXPECT_EQ(j.at("epoch").get<std::size_t>(), n);
    for (const char* key : {"l_dis", "l_in", "l_out", "l_reg", "total"}) EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_EQ(n, 3u);
  const auto e = run({"eval", "--params", path("p.json"), "--data", path("d.txt"), "--out", path("m.json")});
  ASSERT_EQ(e.code, 0) << e.err;
  const auto m = nlohmann::json::parse(slurp(path("m.json")));
  for (const char* key : {"acc", "f1", "mae", "corr", "n"}) EXPECT_TRUE(m.contains(key)) << key;
  EXPECT_GT(m.at("n").get<std::size_t>(), 0u);
}

TEST_F(Cli, TrainLogIsReproducible) {
  ASSERT_EQ(run({"gen", "--samples", "150", "--out", path("d.txt")}).code, 0);
  for (const char* name : {"a", "b"}) {
    ASSERT_EQ(run({"train", "--data", path("d.txt"), "--out", path(std::string(name) + ".json"), "--log",
                   path(std::string(name) + ".jsonl"), "--epochs", "2", "--seed", "5"})
                  .code,
              0);
  }
  EXPECT_EQ(slurp(path("a.jsonl")), slurp(path("b.jsonl")));
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
}

TEST_F(Cli, ConfigFileIsOverriddenByFlags) {
  ASSERT_EQ(run({"gen", "--samples", "60", "--out", path("d.txt")}).code, 0);
  std::ofstream(path("c.cfg")) << "# training setup\nepochs = 3\nbatch_size = 16\nlr = 0.01\nno_moie = true\n";
  ASSERT_EQ(run({"train", "--config", path("c.cfg"), "--data", path("d.txt"), "--out", path("p.json"), "--epochs",
                 "1", "--log", path("l.jsonl")})
                .code,
            0);
  std::istringstream log(slurp(path("l.jsonl")));
  std::string line;
  std::size_t n = 0;
  while (std::getline(log, line)) ++n;
  EXPECT_EQ(n, 1u);
  const auto cp = nlohmann::json::parse(slurp(path("p.json")));
  EXPECT_EQ(cp.at("train").at("batch_size").get<std::size_t>(), 16u);
  EXPECT_DOUBLE_EQ(cp.at("train").at("lr").get<double>(), 0.01);
  EXPECT_FALSE(cp.at("model").at("use_moie").get<bool>());
}

TEST_F(Cli, BadConfigFileIsUsageError) {
  ASSERT_EQ(run({"gen", "--samples", "20", "--out", path("d.txt")}).code, 0);
  std::ofstream(path("bad.cfg")) << "epochs 3\n";
  EXPECT_EQ(run({"train", "--config", path("bad.cfg"), "--data", path("d.txt"), "--out", path("p.json")}).code, 2);
  std::ofstream(path("unknown.cfg")) << "colour = blue\n";
  EXPECT_EQ(run({"train", "--config", path("unknown.cfg"), "--data", path("d.txt"), "--out", path("p.json")}).code,
            2);
  EXPECT_FALSE(fs::exists(path("p.json")));
}

TEST_F(Cli, MalformedDatasetIsRuntimeFailure) {
  std::ofstream(path("d.txt")) << "MIDG1 1 1 1\na train 0 0.5 1 two 3\n";
  const auto r = run({"train", "--data", path("d.txt"), "--out", path("p.json")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;
  EXPECT_FALSE(fs::exists(path("p.json")));
}

TEST_F(Cli, AblateEmitsJsonAndCsv) {
  ASSERT_EQ(run({"gen", "--samples", "90", "--test-domain", "2", "--out", path("d.txt")}).code, 0);
  const auto r = run({"ablate", "--data", path("d.txt"), "--epochs", "1", "--out", path("t.json"), "--csv",
                      path("t.csv")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto t = nlohmann::json::parse(slurp(path("t.json")));
  ASSERT_EQ(t.size(), 4u);
  for (const auto& row : t)
    for (const char* key : {"moie", "adapter", "acc", "f1", "mae", "corr", "n", "parameters"})
      EXPECT_TRUE(row.contains(key)) << key;
  std::istringstream csv(slurp(path("t.csv")));
  std::string line;
  std::size_t lines = 0;
  while (std::getline(csv, line)) ++lines;
  EXPECT_EQ(lines, 5u);
}

TEST_F(Cli, GradcheckPasses) {
  const auto r = run({"gradcheck"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("pipeline.full_graph"), std::string::npos);
  EXPECT_NE(r.out.find("gradcheck passed"), std::string::npos);
}

TEST(ConfigText, ParsesKeysValuesAndComments) {
  const auto e = midg::cli::parse_config_text("a = 1\n\n  # note\nb_c=x y # trailing\n");
  ASSERT_EQ(e.size(), 2u);
  EXPECT_EQ(e[0], (std::pair<std::string, std::string>{"a", "1"}));
  EXPECT_EQ(e[1], (std::pair<std::string, std::string>{"b_c", "x y"}));
  EXPECT_THROW(midg::cli::parse_config_text("novalue\n"), midg::ParseError);
  EXPECT_THROW(midg::cli::parse_config_text(" = 3\n"), midg::ParseError);
}
