#include "support.hpp"

#include "modelraider/bench.hpp"
#include "modelraider/cli.hpp"
#include "modelraider/extractor.hpp"
#include "modelraider/glyphs.hpp"
#include "modelraider/io.hpp"
#include "modelraider/scenario.hpp"

#include <gtest/gtest.h>

#include <set>
#include <sstream>

using namespace modelraider;
using namespace modelraider::testing;
namespace fs = std::filesystem;

namespace {

/// A scenario small enough to build in seconds: narrow base, few samples,
/// two grid points on a 30-layer reference so grid values equal unfrozen
/// layers.
Scenario small_scenario() {
  Scenario s = default_scenario();
  s.pretrained_classes = {"disk", "square", "cross", "small-ring"};
  s.pretrain_samples_per_class = 100;
  s.pretrain = {2e-3, 0.9, 0.999, 1e-7, 20, 16, 0, false};
  s.tasks = {{"tiny", {"ring", "plus", "frame"}, "ring", {"ring", "frame"}, 40}};
  s.transfer_grid = {0, 20};
  s.grid_reference_depth = kBaseDepth;
  s.finetune = {2e-3, 0.9, 0.999, 1e-7, 30, 16, 0, false};
  s.accuracy_floor = 0.0;
  s.seeds = {1, 2};
  s.algorithms = {AttackAlgorithm::FGSM};
  s.epsilons = {{"fgsm", {0.05}}};
  s.grid_algorithm = AttackAlgorithm::FGSM;
  s.source_count = 8;
  s.source_pool = 24;
  s.collected_per_class = 60;
  s.craft.train.epochs = 1;
  s.craft.max_epochs = 3;
  return s;
}

/// Fixtures and a bench report shared by the tests below.
struct SmallWorld {
  TempDir dir{"harness"};
  Fixtures fixtures;
  BenchReport report;

  static SmallWorld &get() {
    static SmallWorld w;
    return w;
  }

private:
  SmallWorld() {
    fixtures = make_fixtures(small_scenario(), dir.path() / "fx");
    report = bench(fixtures, 1);
    write_report(report, dir.path() / "report");
  }
};

int run_cli(std::vector<std::string> args, std::string *out_text = nullptr) {
  args.insert(args.begin(), "modelraider");
  std::vector<const char *> argv;
  for (const auto &a : args)
    argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (out_text)
    *out_text = out.str() + err.str();
  return code;
}

} // namespace

TEST(Glyphs, DatasetIsDeterministicAndBounded) {
  GlyphStyle style;
  const auto a = make_glyph_dataset({"ring", "plus"}, 5, style, 3);
  const auto b = make_glyph_dataset({"ring", "plus"}, 5, style, 3);
  ASSERT_EQ(a.size(), 10u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.images[i].data, b.images[i].data);
    EXPECT_EQ(a.labels[i], static_cast<int>(i % 2));
    EXPECT_GE(a.images[i].data.minCoeff(), 0.0f);
    EXPECT_LE(a.images[i].data.maxCoeff(), 1.0f);
  }
  EXPECT_THROW(make_glyph_dataset({"no-such-glyph"}, 1, style, 1), std::invalid_argument);
}

TEST(Scenario, JsonRoundTrip) {
  const auto s = small_scenario();
  const auto j = nlohmann::json::parse(to_json(s).dump());
  EXPECT_EQ(to_json(scenario_from_json(j)), to_json(s));
}

TEST(Scenario, UnknownKeysRejected) {
  auto j = nlohmann::json::parse(to_json(default_scenario()).dump());
  j["no_such_key"] = 1;
  EXPECT_THROW(scenario_from_json(j), std::invalid_argument);
}

TEST(Scenario, ValidationCatchesBadInput) {
  auto s = default_scenario();
  EXPECT_NO_THROW(s.validate());
  s.tasks[0].targeted = "not-a-class";
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s = default_scenario();
  s.tasks[0].classes.push_back(s.pretrained_classes.front()); // overlaps pre-training
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(Scenario, DefaultTasksAreDisjointFromPretraining) {
  const auto s = default_scenario();
  const std::set<std::string> pre(s.pretrained_classes.begin(), s.pretrained_classes.end());
  for (const auto &t : s.tasks)
    for (const auto &c : t.classes)
      EXPECT_FALSE(pre.count(c)) << c;
}

TEST(Scenario, GridScalesToBaseDepth) {
  const auto s = default_scenario();
  std::vector<int> scaled;
  for (int g : s.transfer_grid)
    scaled.push_back(scaled_unfrozen(s, g));
  EXPECT_EQ(scaled, (std::vector<int>{0, 5, 10, 15, 20, 30}));
}

TEST(Scenario, DeriveSeedSeparatesTags) {
  EXPECT_EQ(derive_seed(1, "a"), derive_seed(1, "a"));
  EXPECT_NE(derive_seed(1, "a"), derive_seed(1, "b"));
  EXPECT_NE(derive_seed(1, "a"), derive_seed(2, "a"));
}

TEST(Fixtures, GridPointZeroIsFeatureExtraction) {
  auto &w = SmallWorld::get();
  const auto registry = load_registry(w.fixtures.registry_dir());
  const auto &v = w.fixtures.victim("tiny", 0);
  const auto rep = extract_models(read_file(w.fixtures.dir / v.package), default_model_suffixes());
  ASSERT_EQ(rep.extracted.size(), 1u);
  const auto t = identify(rep.extracted[0].model, registry);
  EXPECT_EQ(t.approach, TransferApproach::FeatureExtraction);
  EXPECT_EQ(t.matched_id, kPretrainedId);
  EXPECT_EQ(t.frozen_layers, kBaseDepth);
}

TEST(Fixtures, TwentyUnfrozenOnThirtyLayerBaseGivesTen) {
  auto &w = SmallWorld::get();
  const auto registry = load_registry(w.fixtures.registry_dir());
  const auto &v = w.fixtures.victim("tiny", 20);
  const auto rep = extract_models(read_file(w.fixtures.dir / v.package), default_model_suffixes());
  const auto t = identify(rep.extracted.at(0).model, registry);
  EXPECT_EQ(t.approach, TransferApproach::FineTuning);
  EXPECT_EQ(t.frozen_layers, 10);
  EXPECT_EQ(v.frozen, 10);
}

TEST(Fixtures, RegistryHoldsPretrainedAndDecoy) {
  auto &w = SmallWorld::get();
  const auto registry = load_registry(w.fixtures.registry_dir());
  std::set<std::string> ids;
  for (const auto &r : registry)
    ids.insert(r.model_id);
  EXPECT_EQ(ids, (std::set<std::string>{kPretrainedId, kDecoyId}));
}

TEST(Fixtures, SameSeedGivesIdenticalPackages) {
  auto &w = SmallWorld::get();
  TempDir again("fixtures-again");
  const auto fx = make_fixtures(small_scenario(), again.path());
  ASSERT_EQ(fx.victims.size(), w.fixtures.victims.size());
  for (std::size_t i = 0; i < fx.victims.size(); ++i)
    EXPECT_EQ(read_file(fx.dir / fx.victims[i].package),
              read_file(w.fixtures.dir / w.fixtures.victims[i].package));
  EXPECT_EQ(read_file(fx.registry_dir() / (std::string(kPretrainedId) + ".dsm")),
            read_file(w.fixtures.registry_dir() / (std::string(kPretrainedId) + ".dsm")));
}

TEST(Fixtures, LoadMatchesMake) {
  auto &w = SmallWorld::get();
  const auto loaded = load_fixtures(w.fixtures.dir);
  EXPECT_EQ(to_json(loaded.scenario), to_json(w.fixtures.scenario));
  EXPECT_EQ(loaded.victims.size(), w.fixtures.victims.size());
}

TEST(Fixtures, AccuracyFloorRejects) {
  auto s = small_scenario();
  s.accuracy_floor = 1.0;
  s.finetune.epochs = 1;
  s.transfer_grid = {0};
  TempDir dir("floor");
  EXPECT_THROW(make_fixtures(s, dir.path()), FixtureRejected);
}

TEST(Bench, OneRowPerSettingAndBoundedAsr) {
  auto &w = SmallWorld::get();
  const auto &s = w.fixtures.scenario;
  // 2 seeds x 2 grid points x 3 settings with one algorithm/epsilon.
  EXPECT_EQ(w.report.cells.size(), 12u);
  std::set<AttackSetting> settings;
  for (const auto &c : w.report.cells) {
    ASSERT_TRUE(c.ok) << c.id << ": " << c.error;
    settings.insert(c.setting);
    EXPECT_EQ(c.t, s.source_count);
    EXPECT_GE(c.asr, 0.0);
    EXPECT_LE(c.asr, 1.0);
    EXPECT_EQ(c.asr, static_cast<double>(c.m) / static_cast<double>(c.t));
  }
  EXPECT_EQ(settings.size(), 3u);
  const auto md = markdown_tables(w.report);
  for (const char *row : {"| pma |", "| bama |", "| e-bama |"})
    EXPECT_NE(md.find(row), std::string::npos) << row;
}

TEST(Bench, CsvHasDocumentedColumns) {
  auto &w = SmallWorld::get();
  const auto csv = read_text(w.dir.path() / "report" / "cells.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "cell_id,setting,algorithm,epsilon,unfrozen,dataset,asr,m,t,seed,runtime_ms");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 13);
}

TEST(Bench, ReplayReproducesEveryCell) {
  auto &w = SmallWorld::get();
  const auto loaded = load_report(w.dir.path() / "report");
  for (const auto &c : w.report.cells) {
    const auto r = replay(loaded, c.id);
    EXPECT_EQ(r.asr, c.asr) << c.id;
    EXPECT_EQ(r.m, c.m) << c.id;
  }
}

TEST(Bench, CellIdsAreUnique) {
  const auto cells = plan_cells(default_scenario());
  std::set<std::string> ids;
  for (const auto &c : cells)
    EXPECT_TRUE(ids.insert(c.id).second) << c.id;
}

TEST(Cli, UnknownSubcommandIsUsageError) {
  EXPECT_EQ(run_cli({"frobnicate"}), 2);
  EXPECT_EQ(run_cli({}), 2);
  EXPECT_EQ(run_cli({"scan", "--bogus"}), 2);
}

TEST(Cli, MissingInputIsPipelineError) {
  TempDir dir("cli-missing");
  EXPECT_EQ(run_cli({"scan", "--package", (dir.path() / "none.zip").string(), "--out",
                     (dir.path() / "r.json").string()}),
            1);
}

TEST(Cli, ScanIdentifyAttack) {
  auto &w = SmallWorld::get();
  TempDir dir("cli");
  const auto pkg = (w.fixtures.dir / w.fixtures.victim("tiny", 20).package).string();
  const auto registry = w.fixtures.registry_dir().string();
  ASSERT_EQ(run_cli({"scan", "--package", pkg, "--out", (dir.path() / "scan.json").string()}), 0);
  const auto scan = nlohmann::json::parse(read_text(dir.path() / "scan.json"));
  EXPECT_EQ(scan.at("extracted").size(), 1u);

  ASSERT_EQ(run_cli({"identify", "--package", pkg, "--registry", registry, "--out",
                     (dir.path() / "id.json").string()}),
            0);
  const auto id = nlohmann::json::parse(read_text(dir.path() / "id.json"));
  EXPECT_EQ(id.at("approach"), "fine-tuning");
  EXPECT_EQ(id.at("frozen_layers"), 10);

  const auto scenario_path = dir.path() / "s.json";
  write_text(scenario_path, to_json(small_scenario()).dump());
  std::string text;
  ASSERT_EQ(run_cli({"attack", "--package", pkg, "--registry", registry, "--setting", "bama",
                     "--algo", "fgsm", "--target", "ring", "--seed", "3", "--scenario",
                     scenario_path.string(), "--out", (dir.path() / "run.json").string()},
                    &text),
            0)
      << text;
  const auto run = nlohmann::json::parse(read_text(dir.path() / "run.json"));
  EXPECT_EQ(run.at("setting"), "bama");
  EXPECT_EQ(run.at("t"), 8);
}

TEST(Cli, BenchAndReplay) {
  auto &w = SmallWorld::get();
  TempDir dir("cli-bench");
  const auto scenario_path = dir.path() / "s.json";
  write_text(scenario_path, to_json(small_scenario()).dump());
  const auto out = dir.path() / "report";
  std::string text;
  ASSERT_EQ(run_cli({"bench", "--scenario", scenario_path.string(), "--fixtures",
                     w.fixtures.dir.string(), "--out", out.string()},
                    &text),
            0)
      << text;
  for (const char *f : {"report.json", "cells.csv", "tables.md"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  const auto &cell = w.report.cells.front();
  ASSERT_EQ(run_cli({"replay", "--cell", cell.id, "--report", out.string()}, &text), 0) << text;
  EXPECT_EQ(run_cli({"replay", "--cell", "no/such/cell", "--report", out.string()}), 1);
}
