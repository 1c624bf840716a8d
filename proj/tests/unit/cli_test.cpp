#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "eegtl/binary_io.hpp"
#include "eegtl/cli.hpp"
#include "eegtl/metrics.hpp"

namespace eegtl::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

fs::path temp_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("eegtl_cli_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

json small_config_doc(std::uint64_t seed = 7, std::size_t subjects = 3) {
  return json{{"seed", seed},
              {"data",
               {{"synth",
                 {{"n_subjects", subjects}, {"n_trials", 16}, {"n_samples", 64}, {"sample_rate_hz", 64.0}}}}},
              {"plan", {{"strategy", "standard"}, {"epochs", 3}, {"batch_size", 8}}},
              {"architecture", {{"temporal_kernel_len", 16}, {"pool1", 2}, {"pool2", 4}}}};
}

ExperimentConfig small_config(const fs::path& out, std::uint64_t seed = 7, std::size_t subjects = 3) {
  ExperimentConfig c = ExperimentConfig::from_json(small_config_doc(seed, subjects));
  c.out = out;
  return c;
}

std::map<std::string, std::string> tree(const fs::path& root, bool skip_manifest = true) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    if (skip_manifest && entry.path().filename() == "run_manifest.json") continue;
    files[fs::relative(entry.path(), root).generic_string()] = slurp(entry.path());
  }
  return files;
}

TEST(Config, SnapshotRoundTrips) {
  ExperimentConfig c = small_config("somewhere");
  c.filter = FilterSpec{};
  c.channels = {"C3", "Cz", "C4"};
  c.plan.freeze_depth = FreezeDepth::block1;
  c.plan.retrain_lr = 5e-4;
  const json snapshot = c.to_json();
  EXPECT_EQ(ExperimentConfig::from_json(snapshot).to_json(), snapshot);
}

TEST(Config, RejectsUnknownKeysAndWrongTypes) {
  json doc = small_config_doc();
  doc["plan"]["epoch"] = 3;
  try {
    ExperimentConfig::from_json(doc);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("'epoch' in plan"), std::string::npos);
  }
  doc = small_config_doc();
  doc["plan"]["epochs"] = "many";
  EXPECT_THROW(ExperimentConfig::from_json(doc), ValidationError);
  doc = small_config_doc();
  doc["kappa"] = "fleiss";
  EXPECT_THROW(ExperimentConfig::from_json(doc), ValidationError);
}

TEST(Config, NeedsExactlyOneDataSource) {
  ExperimentConfig c = small_config("x");
  c.data_path = "/nonexistent";
  EXPECT_THROW(c.validate(), ValidationError);
  c.synth.reset();
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(Config, FlagsOverrideEnvironmentOverrideFile) {
  ExperimentConfig c = small_config("from_file");
  ::setenv("EEGTL_OUT", "from_env", 1);
  apply_overrides(c, {});
  EXPECT_EQ(c.out, "from_env");
  Overrides o;
  o.out = "from_flag";
  o.seed = 99;
  o.strategy = "frozen";
  o.freeze_depth = "block1+2";
  o.kappa = "cohen";
  apply_overrides(c, o);
  ::unsetenv("EEGTL_OUT");
  EXPECT_EQ(c.out, "from_flag");
  EXPECT_EQ(c.seed, 99u);
  EXPECT_EQ(c.plan.seed, 99u);
  EXPECT_EQ(c.synth->seed, 99u);
  EXPECT_EQ(c.plan.strategy, Strategy::frozen);
  EXPECT_EQ(c.plan.freeze_depth, FreezeDepth::block1_2);
  EXPECT_EQ(c.plan.kappa_mode, KappaMode::cohen);
}

TEST(Synth, WritesOneDirectoryPerSubjectSession) {
  const fs::path out = temp_dir("synth");
  ExperimentConfig c = small_config(out, 7, 8);
  cmd_synth(c);
  std::size_t dirs = 0;
  for (const auto& e : fs::directory_iterator(out)) dirs += e.is_directory();
  EXPECT_EQ(dirs, 16u);
  EXPECT_EQ(load_datasets(out), synth_generate(*c.synth));
}

TEST(Train, ProducesEveryOutputAndSucceededManifest) {
  const fs::path out = temp_dir("outputs");
  cmd_train(small_config(out));
  const json manifest = io::read_json(out / "run_manifest.json");
  EXPECT_EQ(manifest["status"], "succeeded");
  EXPECT_TRUE(manifest["timings_s"].contains("train"));
  for (const auto& a : manifest["artifacts"]) EXPECT_TRUE(fs::exists(out / a.get<std::string>())) << a;
  ASSERT_TRUE(fs::exists(out / "report.json"));
  for (int u = 1; u <= 3; ++u) {
    const fs::path dir = out / ("subject" + std::to_string(u));
    for (const char* f : {"report.json", "confusion.csv", "history.csv", "checkpoint/manifest.json",
                          "checkpoint/params.bin"}) {
      EXPECT_TRUE(fs::exists(dir / f)) << dir / f;
    }
    for (int k = 0; k < 4; ++k) EXPECT_TRUE(fs::exists(dir / ("pr_class" + std::to_string(k) + ".csv")));
  }
}

TEST(Train, RerunIsByteIdentical) {
  const fs::path a = temp_dir("rerun_a"), b = temp_dir("rerun_b");
  cmd_train(small_config(a));
  cmd_train(small_config(b));
  const auto ta = tree(a), tb = tree(b);
  ASSERT_EQ(ta.size(), tb.size());
  for (const auto& [name, bytes] : ta) EXPECT_EQ(bytes, tb.at(name)) << name;
}

TEST(Train, ResolvedSnapshotReproducesMetrics) {
  const fs::path a = temp_dir("snap_a"), b = temp_dir("snap_b");
  ExperimentConfig c = small_config(a, 11);
  c.plan.strategy = Strategy::split;
  cmd_train(c);
  ExperimentConfig again = ExperimentConfig::from_json(io::read_json(a / "run_manifest.json")["config"]);
  again.out = b;
  cmd_train(again);
  EXPECT_EQ(slurp(a / "report.json"), slurp(b / "report.json"));
}

TEST(Train, DistributedSharesOneCheckpoint) {
  const fs::path out = temp_dir("distributed");
  ExperimentConfig c = small_config(out);
  c.plan.strategy = Strategy::distributed;
  cmd_train(c);
  EXPECT_TRUE(fs::exists(out / "checkpoint" / "params.bin"));
  EXPECT_FALSE(fs::exists(out / "subject1" / "checkpoint"));
  EXPECT_EQ(io::read_json(out / "report.json")["subjects"]["2"]["checkpoint"], "checkpoint");
}

TEST(Train, FailureLeavesFailedManifest) {
  const fs::path out = temp_dir("failed");
  ExperimentConfig c = small_config(out);
  c.plan.architecture.pool1 = 40;
  c.plan.architecture.pool2 = 30;
  EXPECT_THROW(cmd_train(c), ValidationError);
  const json manifest = io::read_json(out / "run_manifest.json");
  EXPECT_EQ(manifest["status"], "failed");
  const auto error = manifest["error"].get<std::string>();
  EXPECT_NE(error.find("stage 'train'"), std::string::npos);
  EXPECT_NE(error.find("after pool2: 0"), std::string::npos);
}

TEST(Train, LoadFailureIsAStageError) {
  const fs::path out = temp_dir("stage_error");
  const fs::path data = temp_dir("stage_error_data");
  ExperimentConfig c = small_config(out);
  save_datasets(synth_generate(*c.synth), data);
  std::ofstream(data / "subject1_session1" / "epochs.bin", std::ios::binary | std::ios::app) << 'x';
  c.synth.reset();
  c.data_path = data;
  try {
    cmd_train(c);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "prepare data");
  }
  EXPECT_EQ(io::read_json(out / "run_manifest.json")["status"], "failed");
}

TEST(Hypersearch, UnavailableChannelSetFailsBeforeSearching) {
  const fs::path out = temp_dir("search_channels");
  ExperimentConfig c = small_config(out);
  c.search.channel_sets = {ChannelSet::all, ChannelSet::five};
  try {
    cmd_hypersearch(c);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("'five' needs Fz, Pz"), std::string::npos) << e.what();
  }
  const json manifest = io::read_json(out / "run_manifest.json");
  EXPECT_EQ(manifest["status"], "failed");
  EXPECT_FALSE(manifest["timings_s"].contains("search"));
}

TEST(Hypersearch, WritesTableAndResult) {
  const fs::path out = temp_dir("search");
  ExperimentConfig c = small_config(out, 5, 2);
  c.plan.epochs = 1;
  c.folds = 2;
  c.search.dropout_grid = {0.0, 0.5};
  c.search.channel_sets = {ChannelSet::all, ChannelSet::no_eog};
  cmd_hypersearch(c);
  EXPECT_TRUE(fs::exists(out / "search_table.csv"));
  const json result = io::read_json(out / "search_result.json");
  EXPECT_EQ(result["stage_order"], (json{"dropout", "filter", "channels"}));
  EXPECT_EQ(io::read_json(out / "run_manifest.json")["status"], "succeeded");
}

TEST(Train, RefusesTransferStrategies) {
  ExperimentConfig c = small_config(temp_dir("refuse"));
  c.plan.strategy = Strategy::transfer_split;
  EXPECT_THROW(cmd_train(c), ValidationError);
  c.plan.strategy = Strategy::standard;
  EXPECT_THROW(cmd_transfer(c), ValidationError);
}

TEST(Transfer, RetrainsPretrainedCheckpoint) {
  const fs::path source = temp_dir("transfer_source"), target = temp_dir("transfer_target");
  ExperimentConfig c = small_config(source);
  c.plan.strategy = Strategy::distributed;
  cmd_train(c);
  ExperimentConfig t = small_config(target, 21, 2);
  t.synth->n_classes = 2;
  t.plan.strategy = Strategy::transfer_split;
  t.plan.pretrained = source / "checkpoint";
  cmd_transfer(t);
  const json report = io::read_json(target / "report.json");
  EXPECT_EQ(report["n_classes"], 2);
  const ModelCheckpoint ckpt = load_checkpoint(target / "subject1" / "checkpoint");
  EXPECT_EQ(ckpt.provenance.source_checkpoint, (source / "checkpoint").string());
}

TEST(Report, SummaryMeansAndKappa) {
  const fs::path root = temp_dir("report");
  std::vector<fs::path> runs;
  for (Strategy s : {Strategy::standard, Strategy::distributed, Strategy::split, Strategy::frozen}) {
    ExperimentConfig c = small_config(root / to_string(s), 5, 8);
    c.plan.strategy = s;
    if (s == Strategy::frozen) c.plan.freeze_depth = FreezeDepth::block1;
    c.plan.epochs = 1;
    c.plan.retrain_epochs = 1;
    cmd_train(c);
    runs.push_back(c.out);
  }
  cmd_report(runs, root / "summary");
  const auto summary = read_csv(root / "summary" / "summary.csv");
  ASSERT_EQ(summary.size(), 33u);
  EXPECT_EQ(summary[0], (std::vector<std::string>{"run", "strategy", "group", "subject", "n_classes", "accuracy",
                                                  "kappa"}));

  std::map<std::string, std::vector<double>> acc;
  for (std::size_t i = 1; i < summary.size(); ++i) {
    const auto& row = summary[i];
    acc[row[2]].push_back(std::stod(row[5]));
    const json subject = io::read_json(root / row[0] / ("subject" + row[3]) / "report.json");
    const auto counts = subject["confusion"]["counts"].get<std::vector<std::size_t>>();
    std::vector<int> pred, truth;
    for (int t = 0; t < 4; ++t) {
      for (int p = 0; p < 4; ++p) {
        for (std::size_t n = 0; n < counts[t * 4 + p]; ++n) truth.push_back(t), pred.push_back(p);
      }
    }
    EXPECT_EQ(std::stod(row[6]), kappa(accuracy(pred, truth), truth, 4)) << row[0] << " " << row[3];
  }
  const auto means = read_csv(root / "summary" / "strategy_means.csv");
  ASSERT_EQ(means.size(), 5u);
  for (std::size_t i = 1; i < means.size(); ++i) {
    const auto& values = acc.at(means[i][0]);
    double sum = 0.0;
    for (double v : values) sum += v;
    EXPECT_EQ(means[i][1], "8");
    EXPECT_NEAR(std::stod(means[i][2]), sum / values.size(), 1e-9);
  }
  const auto bars = read_csv(root / "summary" / "grouped_bar.csv");
  EXPECT_EQ(bars.size(), 9u);
  EXPECT_EQ(bars[0].size(), 5u);
}

TEST(Report, IncompatibleClassCountsGroupPerRun) {
  const fs::path root = temp_dir("report_mixed");
  ExperimentConfig four = small_config(root / "four", 5, 2);
  four.plan.epochs = 1;
  cmd_train(four);
  ExperimentConfig two = small_config(root / "two", 5, 2);
  two.plan.epochs = 1;
  two.synth->n_classes = 2;
  cmd_train(two);
  cmd_report({four.out, two.out}, root / "summary");
  const auto means = read_csv(root / "summary" / "strategy_means.csv");
  ASSERT_EQ(means.size(), 3u);
  EXPECT_EQ(means[1][0], "standard@four");
  EXPECT_EQ(means[2][0], "standard@two");
}

TEST(Report, NeedsAtLeastOneRun) { EXPECT_THROW(cmd_report({}, temp_dir("empty")), ValidationError); }

}  // namespace
}  // namespace eegtl::cli
