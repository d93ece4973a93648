#include <gtest/gtest.h>

#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "cli_support.hpp"
#include "loadcast/evaluation.hpp"
#include "loadcast/model.hpp"
#include "loadcast/pipeline.hpp"
#include "loadcast/sequences.hpp"
#include "support.hpp"

namespace loadcast {
namespace {

namespace fs = std::filesystem;

class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = new testkit::TempDir("pipeline");
    first_ = testkit::run_pipeline(root_->path() / "a", {});
    second_ = testkit::run_pipeline(root_->path() / "b", {});
  }
  static void TearDownTestSuite() {
    delete root_;
    root_ = nullptr;
  }
  static fs::path a() { return root_->path() / "a"; }
  static fs::path b() { return root_->path() / "b"; }

  static testkit::TempDir* root_;
  static testkit::PipelineRun first_, second_;
};
testkit::TempDir* Pipeline::root_ = nullptr;
testkit::PipelineRun Pipeline::first_, Pipeline::second_;

TEST_F(Pipeline, EveryStageSucceeds) {
  for (const auto& [stage, code] : first_.exits) EXPECT_EQ(code, 0) << stage << "\n" << testkit::read_text(a() / "cli.log");
  EXPECT_EQ(first_.exits.size(), 11u);
  ASSERT_TRUE(second_.ok());
}

TEST_F(Pipeline, OutputsAreBitIdenticalAcrossRuns) {
  ASSERT_TRUE(first_.ok() && second_.ok());
  const auto da = testkit::tree_digests(a()), db = testkit::tree_digests(b());
  EXPECT_GT(da.size(), 25u);
  EXPECT_EQ(da, db);
}

TEST_F(Pipeline, ManifestIsComplete) {
  ASSERT_TRUE(first_.ok());
  const auto m = RunManifest::load(a() / "manifest.json");
  EXPECT_EQ(m.tool_version, kToolVersion);
  const std::vector<std::string> stages{"generate", "ingest", "features", "select", "sequences", "train",
                                        "evaluate", "horizon", "categories", "sweep", "predict"};
  ASSERT_EQ(m.stages.size(), stages.size());
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto& s = m.stages[i];
    EXPECT_EQ(s.name, stages[i]);
    EXPECT_EQ(s.config_hash.size(), 64u);
    EXPECT_FALSE(s.outputs.empty()) << s.name;
    // Every recorded output exists and still has the recorded digest.
    for (const auto& [path, digest] : s.outputs) {
      ASSERT_TRUE(fs::exists(a() / path)) << path;
      EXPECT_EQ(sha256_file(a() / path), digest) << path;
    }
    if (s.name != "generate")
      for (const auto& [path, digest] : s.inputs) EXPECT_EQ(sha256_file(a() / path), digest) << path;
  }
  EXPECT_EQ(m.find("generate")->seed, 7u);
  EXPECT_EQ(m.find("generate")->arguments.front(), "--seed");
  // The train stage consumes exactly what sequences produced.
  const auto& seq_out = m.find("sequences")->outputs;
  EXPECT_EQ(m.find("train")->inputs.at("work/seq/samples.bin"), seq_out.at("work/seq/samples.bin"));
}

TEST_F(Pipeline, StageOutputsPresent) {
  ASSERT_TRUE(first_.ok());
  for (const char* f : {"data/reservations.csv", "data/airports.csv", "data/holidays.csv", "data/routes.csv",
                        "work/flights.csv", "work/features.csv", "work/selection_report.json",
                        "work/seq/samples.bin", "work/seq/split_manifest.csv", "work/seq/skipped.csv",
                        "runs/DLSTM-HA/7/best.ckpt", "runs/DLSTM-HA/7/train_log.csv", "runs/SLSTM-H/1/best.ckpt",
                        "runs/SLSTM-H/2/best.ckpt", "eval/leaderboard.csv", "eval/predictions.csv",
                        "horizon/horizon.csv", "horizon/horizon_mae.svg", "horizon/horizon_r2.svg",
                        "categories/categories.csv", "categories/categories_mae.svg",
                        "categories/categories_mape.svg", "sweep/sweep.csv", "sweep/winner.toml", "predict/plf.csv"})
    EXPECT_TRUE(fs::exists(a() / f)) << f;

  const auto leaderboard = testkit::read_text(a() / "eval/leaderboard.csv");
  for (const char* model : {"\nSLSTM-H,2,", "\nlinear,2,", "\nnaive,2,"})
    EXPECT_NE(leaderboard.find(model), std::string::npos) << model;
  const auto report = nlohmann::json::parse(testkit::read_text(a() / "work/selection_report.json"));
  EXPECT_TRUE(report.at("horizontal").contains("stages"));
  EXPECT_EQ(report.at("last_stage"), 7);
  const auto log = testkit::read_text(a() / "runs/DLSTM-HA/7/train_log.csv");
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 3);

  const auto winner = KeyValueConfig::load(a() / "sweep/winner.toml");
  EXPECT_EQ(winner.get_int("sequences.horizontal_window", 0), 3);
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(testkit::read_text(path));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

TEST_F(Pipeline, PredictCapacityAddsPassengers) {
  ASSERT_TRUE(first_.ok());
  const std::string base = "predict --checkpoint runs/DLSTM-HA/7/best.ckpt --samples work/seq/samples.bin";
  ASSERT_EQ(testkit::run_cli(a(), base + " --out predict/cap.csv --capacity 162"), 0);
  const auto plf = csv_rows(a() / "predict/plf.csv");
  const auto cap = csv_rows(a() / "predict/cap.csv");
  ASSERT_EQ(plf.size(), cap.size());
  EXPECT_EQ(plf[0], (std::vector<std::string>{"route_id", "flight_date", "d", "predicted_plf"}));
  EXPECT_EQ(cap[0].back(), "passengers");
  const auto corpus = read_sample_cache(a() / "work/seq/samples.bin");
  EXPECT_EQ(plf.size(), corpus.test.size() + 1);
  for (std::size_t i = 1; i < plf.size(); ++i) {
    ASSERT_EQ(cap[i].size(), 5u);
    for (int c = 0; c < 4; ++c) EXPECT_EQ(plf[i][c], cap[i][c]);
    EXPECT_EQ(std::stoll(cap[i][4]), std::llround(std::stod(plf[i][3]) / 100.0 * 162));
  }

  // The CLI forecasts agree with in-process inference on the same checkpoint.
  auto ck = load_checkpoint(a() / "runs/DLSTM-HA/7/best.ckpt");
  const auto preds = predict_samples(*ck.model, corpus.test, corpus.scaler);
  for (std::size_t i = 0; i < preds.size(); ++i)
    EXPECT_NEAR(std::stod(plf[i + 1][3]), preds[i].predicted, 1e-9 * std::max(1.0, std::abs(preds[i].predicted)));

  EXPECT_EQ(testkit::run_cli(a(), base + " --out predict/x.csv --capacity 162 --plf-only"), 2);
  EXPECT_EQ(testkit::run_cli(a(), base + " --out predict/x.csv --capacity 0"), 2);
}

TEST_F(Pipeline, RerunIsIdempotent) {
  ASSERT_TRUE(first_.ok());
  const auto before = testkit::tree_digests(a());
  ASSERT_EQ(testkit::run_cli(a(), "--seed 7 ingest --reservations data/reservations.csv --out work/flights.csv"), 0);
  ASSERT_EQ(testkit::run_cli(a(), "--seed 7 sequences --features work/features.csv --out-dir work/seq"), 0);
  const auto after = testkit::tree_digests(a());
  for (const char* f : {"work/flights.csv", "work/seq/samples.bin", "manifest.json"}) EXPECT_EQ(before.at(f), after.at(f)) << f;
}

// ---------------------------------------------------------------- exit codes

TEST(Cli, ExitCodes) {
  testkit::TempDir dir("cli");
  EXPECT_EQ(testkit::run_cli(dir.path(), ""), 2);
  EXPECT_EQ(testkit::run_cli(dir.path(), "frobnicate"), 2);
  EXPECT_EQ(testkit::run_cli(dir.path(), "generate"), 2);                       // missing --out-dir
  EXPECT_EQ(testkit::run_cli(dir.path(), "generate --out-dir d --churn 2"), 2);  // invalid config
  EXPECT_EQ(testkit::run_cli(dir.path(), "ingest --reservations nope.csv --out x.csv"), 3);
  EXPECT_EQ(testkit::run_cli(dir.path(), "train --samples nope.bin --variant SLSTM-H"), 3);
  EXPECT_EQ(testkit::run_cli(dir.path(), "--help"), 0);
  EXPECT_FALSE(fs::exists(dir.path() / "manifest.json"));

  testkit::write_text(dir.path() / "bad.csv", "route_id,flight_date\nR1,2024-01-01\n");
  EXPECT_EQ(testkit::run_cli(dir.path(), "ingest --reservations bad.csv --out x.csv"), 3);
}

TEST(Cli, SeedFallsBackToEnvironment) {
  testkit::TempDir dir("cli");
  ASSERT_EQ(testkit::run_cli(dir.path(), "generate --out-dir x --routes 1 --flights 25"), 0);
  ASSERT_EQ(std::system(("cd '" + dir.path().string() + "' && LOADCAST_SEED=7 '" + LOADCAST_CLI +
                         "' generate --out-dir y --routes 1 --flights 25 > /dev/null")
                            .c_str()),
            0);
  ASSERT_EQ(testkit::run_cli(dir.path(), "--seed 7 generate --out-dir z --routes 1 --flights 25"), 0);
  const auto x = sha256_file(dir.path() / "x/reservations.csv");
  const auto y = sha256_file(dir.path() / "y/reservations.csv");
  const auto z = sha256_file(dir.path() / "z/reservations.csv");
  EXPECT_EQ(y, z);
  EXPECT_NE(x, y);
}

TEST(Cli, DivergenceExitsWithNumericCode) {
  testkit::TempDir dir("cli");
  ASSERT_EQ(testkit::run_pipeline(dir.path(), {1, 40, 1, 500}).exits.size(), 11u);
  const int code = testkit::run_cli(dir.path(),
                                    "train --samples work/seq/samples.bin --variant SLSTM-H --runs-dir huge --lr 1e300 "
                                    "--max-epochs 3");
  EXPECT_EQ(code, 4);
  EXPECT_TRUE(fs::exists(dir.path() / "huge/SLSTM-H/0/train_log.csv"));
}

// ---------------------------------------------------------------- help vs README

// Flags per subcommand from the README "Command line" section: a "### name"
// heading followed by a table whose rows start with `--flag`.
std::map<std::string, std::set<std::string>> readme_flags() {
  std::map<std::string, std::set<std::string>> out;
  std::istringstream in(testkit::read_text(LOADCAST_README));
  std::string line, current;
  const std::regex heading(R"(^### `?([a-z]+)`?\s*$)");
  const std::regex row(R"(^\| `(--[a-z-]+)`)");
  std::smatch m;
  while (std::getline(in, line)) {
    if (std::regex_search(line, m, heading)) current = m[1];
    else if (line.rfind("## ", 0) == 0) current.clear();
    else if (!current.empty() && std::regex_search(line, m, row)) out[current].insert(m[1]);
  }
  return out;
}

std::set<std::string> help_flags(const std::string& sub) {
  testkit::TempDir dir("cli");
  testkit::run_cli(dir.path(), sub + " --help", "help.txt");
  const auto text = testkit::read_text(dir.path() / "help.txt");
  std::set<std::string> out;
  const std::regex flag(R"((--[a-z][a-z-]*))");
  for (auto it = std::sregex_iterator(text.begin(), text.end(), flag); it != std::sregex_iterator(); ++it)
    out.insert((*it)[1]);
  out.erase("--help");
  return out;
}

TEST(Cli, HelpMatchesReadme) {
  const auto documented = readme_flags();
  const std::vector<std::string> subs{"generate", "ingest",  "features",   "select", "sequences", "train",
                                      "evaluate", "horizon", "categories", "sweep",  "predict"};
  ASSERT_TRUE(documented.count("global"));
  EXPECT_EQ(documented.at("global"), help_flags(""));
  for (const auto& sub : subs) {
    ASSERT_TRUE(documented.count(sub)) << sub;
    auto help = help_flags(sub);
    // Subcommand help repeats nothing global except shadowed names.
    for (const auto& g : documented.at("global"))
      if (!documented.at(sub).count(g)) help.erase(g);
    EXPECT_EQ(documented.at(sub), help) << sub;
  }
}

}  // namespace
}  // namespace loadcast
