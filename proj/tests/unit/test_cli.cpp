#include "umaxent/serialize.hpp"

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using umaxent::Json;

namespace {

struct CliRun {
  int code;
  std::string output;
};

/// Runs the CLI with stderr folded into the captured output.
CliRun cli(const std::string& args) {
  const std::string command = std::string(UMAXENT_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(command.c_str(), "r");
  if (!pipe) return {-1, ""};
  std::string output;
  char buffer[4096];
  while (std::size_t n = std::fread(buffer, 1, sizeof buffer, pipe)) output.append(buffer, n);
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, output};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("umaxent_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& content) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << content;
    return p;
  }

  fs::path dir_;
};

const std::string kDemo = UMAXENT_DEMO_DIR;
const std::string kCorpus = UMAXENT_CORPUS_DIR;

const char* kTinyConfig = R"({
  "version": 1,
  "em": {"restarts": 2, "max_em_iterations": 200},
  "experiment": {"x_size": 3, "omega_sizes": [4, 5], "alpha": 2, "beta": 3,
                 "sample_schedule": [1, 4], "repeats": 2, "master_seed": 9,
                 "x_sizes": [3], "labeled_samples": 300}
})";

}  // namespace

TEST_F(CliTest, SolveMaxentUniform) {
  const auto p = write("p.json", R"({"mode": "maxent", "empirical_x": [0.5, 0.5]})");
  const CliRun r = cli("solve " + p.string() + " --out " + (dir_ / "out").string());
  ASSERT_EQ(r.code, 0) << r.output;
  const Json result = Json::parse(slurp(dir_ / "out" / "result.json"));
  EXPECT_NEAR(result["posterior"]["probs"][0].get<double>(), 0.5, 1e-12);
  EXPECT_EQ(result["stop_reason"], "converged");
  EXPECT_EQ(result["mode"], "maxent");
}

TEST_F(CliTest, SolveIdentityUmaxentEqualsMaxent) {
  const auto m = write("m.json", R"({"mode": "maxent", "empirical_x": [0.6, 0.4]})");
  const auto u = write("u.json",
                       R"({"mode": "umaxent", "empirical_omega": [0.6, 0.4], "channel": [[1, 0], [0, 1]]})");
  const CliRun a = cli("solve " + m.string());
  const CliRun b = cli("solve " + u.string());
  ASSERT_EQ(a.code, 0) << a.output;
  ASSERT_EQ(b.code, 0) << b.output;
  const Json ja = Json::parse(a.output);
  const Json jb = Json::parse(b.output);
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(ja["posterior"]["probs"][i].get<double>(), jb["posterior"]["probs"][i].get<double>(), 1e-6);
  }
}

TEST_F(CliTest, NonConvergedExitsTwo) {
  const auto p = write("p.json", R"({"mode": "maxent", "empirical_x": [0.9, 0.1]})");
  const auto c = write("c.json", R"({"version": 1, "solver": {"max_iterations": 3}})");
  const CliRun r = cli("solve " + p.string() + " --config " + c.string() + " --out " + dir_.string());
  EXPECT_EQ(r.code, 2) << r.output;
  EXPECT_TRUE(fs::exists(dir_ / "result.json"));
}

TEST_F(CliTest, MissingChannelNamesField) {
  const CliRun r = cli("solve " + kCorpus + "/problem_missing_channel.json");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.output.find("channel"), std::string::npos) << r.output;
}

TEST_F(CliTest, MalformedCorpusExitsOne) {
  int checked = 0;
  for (const auto& entry : fs::directory_iterator(kCorpus)) {
    const std::string name = entry.path().filename().string();
    if (entry.path().extension() != ".json") continue;
    CliRun r{};
    if (name.starts_with("problem_")) {
      r = cli("solve " + entry.path().string());
    } else if (name.starts_with("config_")) {
      r = cli("solve " + kDemo + "/problems/maxent.json --config " + entry.path().string());
    } else {
      continue;
    }
    ++checked;
    EXPECT_EQ(r.code, 1) << name << ": " << r.output;
    EXPECT_NE(r.output.find("error"), std::string::npos) << name << ": " << r.output;
  }
  EXPECT_GE(checked, 25);
}

TEST_F(CliTest, UnknownSubcommandListsValidOnes) {
  const CliRun r = cli("frobnicate");
  EXPECT_EQ(r.code, 1);
  for (const char* s : {"solve", "random-models", "negative-obs", "blackbox"}) {
    EXPECT_NE(r.output.find(s), std::string::npos) << r.output;
  }
  EXPECT_EQ(cli("").code, 1);
  EXPECT_EQ(cli("solve").code, 1);
  EXPECT_EQ(cli("random-models --jobs 0").code, 1);
  EXPECT_EQ(cli("--help").code, 0);
}

TEST_F(CliTest, DemoProblemsSolve) {
  for (const char* name : {"maxent", "umaxent", "latent", "blackbox"}) {
    const CliRun r = cli("solve " + kDemo + "/problems/" + name + ".json");
    EXPECT_EQ(r.code, 0) << name << ": " << r.output;
    EXPECT_EQ(Json::parse(r.output)["mode"], name);
  }
}

TEST_F(CliTest, RandomModelsCellCountAndDeterminism) {
  const auto c = write("c.json", kTinyConfig);
  const CliRun a = cli("random-models --config " + c.string() + " --out " + (dir_ / "a").string());
  const CliRun b = cli("random-models --config " + c.string() + " --out " + (dir_ / "b").string());
  ASSERT_EQ(a.code, 0) << a.output;
  ASSERT_EQ(b.code, 0) << b.output;
  EXPECT_NE(a.output.find("units"), std::string::npos);  // progress on stderr
  const std::string csv = slurp(dir_ / "a" / "random-models.csv");
  EXPECT_EQ(csv, slurp(dir_ / "b" / "random-models.csv"));
  std::istringstream lines(csv);
  std::string line;
  std::map<std::string, int> per_config;
  std::getline(lines, line);
  EXPECT_EQ(line, umaxent::kCsvHeader);
  while (std::getline(lines, line)) {
    const auto first = line.find(',');
    per_config[line.substr(first + 1, line.find(',', first + 1) - first - 1)] += 1;
  }
  ASSERT_EQ(per_config.size(), 2u);
  for (const auto& [omega, rows] : per_config) EXPECT_EQ(rows, 6 * 2 * 2) << omega;
  const Json meta = Json::parse(slurp(dir_ / "a" / "random-models.meta.json"));
  EXPECT_EQ(meta["master_seed"], 9);
  EXPECT_EQ(meta["rows"], 48);
  EXPECT_NE(meta["std_convention"].get<std::string>().find("population"), std::string::npos);
}

TEST_F(CliTest, SeedOverrideChangesOutput) {
  const auto c = write("c.json", kTinyConfig);
  ASSERT_EQ(cli("negative-obs --config " + c.string() + " --out " + (dir_ / "a").string()).code, 0);
  ASSERT_EQ(cli("negative-obs --config " + c.string() + " --seed 10 --out " + (dir_ / "b").string()).code,
            0);
  ASSERT_EQ(cli("negative-obs --config " + c.string() + " --seed 10 --jobs 2 --out " +
                (dir_ / "c").string())
                .code,
            0);
  EXPECT_NE(slurp(dir_ / "a" / "negative-obs.csv"), slurp(dir_ / "b" / "negative-obs.csv"));
  EXPECT_EQ(slurp(dir_ / "b" / "negative-obs.csv"), slurp(dir_ / "c" / "negative-obs.csv"));
  EXPECT_EQ(Json::parse(slurp(dir_ / "b" / "negative-obs.meta.json"))["master_seed"], 10);
}

TEST_F(CliTest, NegativeObsUsesNegativeChannel) {
  // With |X| = 3 and N = 1 the single observation rules out one X, so the
  // posterior lives on the other two.
  const auto c = write("c.json", R"({"version": 1, "em": {"restarts": 1},
    "experiment": {"x_sizes": [3], "alpha": 0, "sample_schedule": [1], "repeats": 1}})");
  const CliRun r = cli("negative-obs --config " + c.string() + " --out " + dir_.string());
  ASSERT_EQ(r.code, 0) << r.output;
  const std::string csv = slurp(dir_ / "negative-obs.csv");
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  bool saw_umaxent = false;
  while (std::getline(lines, line)) {
    if (!line.starts_with("umaxent,")) continue;
    saw_umaxent = true;
    // Entropy column: at most ln 2 for a two-point support.
    std::vector<std::string> cols;
    std::istringstream fields(line);
    for (std::string f; std::getline(fields, f, ',');) cols.push_back(f);
    EXPECT_LT(std::stod(cols[7]), std::log(2.0) + 1e-3);
    EXPECT_GT(std::stod(cols[7]), 0.3);
    EXPECT_EQ(cols[1], "3");
  }
  EXPECT_TRUE(saw_umaxent);
}

TEST_F(CliTest, BlackboxExperimentWritesCsv) {
  const auto c = write("c.json", kTinyConfig);
  const CliRun r = cli("blackbox --config " + c.string() + " --jobs 2 --out " + dir_.string());
  ASSERT_EQ(r.code, 0) << r.output;
  EXPECT_TRUE(fs::exists(dir_ / "blackbox.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "blackbox.meta.json"));
}
