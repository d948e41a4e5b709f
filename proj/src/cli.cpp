#include "modelraider/cli.hpp"

#include "modelraider/bench.hpp"
#include "modelraider/dsm.hpp"
#include "modelraider/extractor.hpp"

#include <CLI11.hpp>

#include <ostream>

namespace modelraider {

namespace fs = std::filesystem;

namespace {

Scenario scenario_or_default(const std::string &path) {
  return path.empty() ? default_scenario()
                      : scenario_from_json(nlohmann::json::parse(read_text(path)));
}

void write_json(const fs::path &path, const Json &j) { write_text(path, j.dump(2) + "\n"); }

const ExtractedModel &pick_model(const ScanReport &report, const std::string &name) {
  if (report.extracted.empty())
    throw std::runtime_error("no operable model found in " + report.package);
  if (name.empty())
    return report.extracted.front();
  if (const auto *m = report.find(name))
    return *m;
  throw std::runtime_error("package has no operable model named '" + name + "'");
}

Json registry_scores(const Model &model, const std::vector<FingerprintRecord> &registry) {
  Json a = Json::array();
  const auto seq = to_sequence(model);
  for (const auto &r : registry)
    a.push_back({{"model_id", r.model_id}, {"stru_sim", stru_sim(seq, r.layers)}});
  return a;
}

} // namespace

int cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
  CLI::App app{"modelraider: extract, fingerprint and attack on-device models"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  // make-fixtures
  std::string scenario_path, out_path;
  auto *make = app.add_subcommand("make-fixtures", "Train the registry base and victim apps");
  make->add_option("--scenario", scenario_path, "Scenario JSON (default scenario if omitted)");
  make->add_option("--out", out_path, "Output directory")->required();

  // scan
  std::string package_path;
  std::vector<std::string> suffixes;
  std::uint64_t seed = 0;
  auto *scan = app.add_subcommand("scan", "Locate and validate model files in an app package");
  scan->add_option("--package", package_path, "App package (ZIP)")->required();
  scan->add_option("--suffix", suffixes, "Model file suffix (repeatable)");
  scan->add_option("--seed", seed, "Operability-check seed");
  scan->add_option("--out", out_path, "Scan report JSON")->required();
  std::string extract_dir;
  scan->add_option("--extract-to", extract_dir, "Also write operable containers here");

  // fingerprint
  std::string model_path, registry_path;
  auto *fp = app.add_subcommand("fingerprint", "Fingerprint a model and score it against a registry");
  fp->add_option("--model", model_path, "Model container")->required();
  fp->add_option("--registry", registry_path, "Registry directory");
  fp->add_option("--out", out_path, "Report JSON")->required();

  // identify
  std::string model_name;
  auto *ident = app.add_subcommand("identify", "Identify the pre-trained model and transfer approach");
  auto *ident_src = ident->add_option_group("source");
  ident_src->add_option("--model", model_path, "Model container");
  ident_src->add_option("--package", package_path, "App package (ZIP)");
  ident_src->require_option(1);
  ident->add_option("--name", model_name, "Model inside the package (default: first)");
  ident->add_option("--registry", registry_path, "Registry directory")->required();
  ident->add_option("--out", out_path, "Transfer report JSON")->required();

  // attack
  std::string setting_str = "e-bama", algo_str = "can", target;
  std::optional<double> epsilon;
  auto *attack = app.add_subcommand("attack", "Run one attack setting against an app's model");
  attack->add_option("--package", package_path, "App package (ZIP)")->required();
  attack->add_option("--name", model_name, "Model inside the package (default: first)");
  attack->add_option("--registry", registry_path, "Registry directory")->required();
  attack->add_option("--setting", setting_str, "pma | bama | e-bama")
      ->check(CLI::IsMember({"pma", "bama", "e-bama"}));
  attack->add_option("--algo", algo_str, "fgsm | cw | can")
      ->check(CLI::IsMember({"fgsm", "cw", "can"}));
  attack->add_option("--epsilon", epsilon, "Budget (default per algorithm)");
  attack->add_option("--target", target, "Targeted class name")->required();
  attack->add_option("--seed", seed, "Attack seed");
  attack->add_option("--scenario", scenario_path, "Scenario JSON for image pools and budgets");
  attack->add_option("--out", out_path, "Attack run JSON")->required();

  // bench
  std::string fixtures_path;
  unsigned threads = 0;
  auto *bench_cmd = app.add_subcommand("bench", "Run the scenario's experiment grid");
  bench_cmd->add_option("--scenario", scenario_path, "Scenario JSON (default scenario if omitted)");
  bench_cmd->add_option("--fixtures", fixtures_path,
                        "Existing fixture directory (built under --out if omitted)");
  bench_cmd->add_option("--threads", threads, "Worker threads (default MODELRAIDER_THREADS)");
  bench_cmd->add_option("--out", out_path, "Report directory")->required();

  // replay
  std::string cell_id, report_path;
  auto *replay_cmd = app.add_subcommand("replay", "Re-run one bench cell from its recorded seed");
  replay_cmd->add_option("--cell", cell_id, "Cell id")->required();
  replay_cmd->add_option("--report", report_path, "Report directory")->required();
  replay_cmd->add_option("--out", out_path, "Replayed cell JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::CallForAllHelp &e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError &e) {
    app.exit(e, out, err);
    if (e.get_exit_code() == 0)
      return kExitOk;
    err << app.help();
    return kExitUsage;
  }

  try {
    if (*make) {
      const Scenario s = scenario_or_default(scenario_path);
      const auto fx = make_fixtures(s, out_path, &out);
      out << fx.victims.size() << " victims written to " << out_path << "\n";
    } else if (*scan) {
      if (suffixes.empty())
        suffixes = default_model_suffixes();
      const auto report = extract_models(read_file(package_path), suffixes, seed, package_path);
      write_json(out_path, to_json(report));
      if (!extract_dir.empty())
        for (const auto &m : report.extracted)
          write_file(fs::path(extract_dir) / fs::path(m.path).filename(), m.container);
      out << report.candidates.size() << " candidates, " << report.extracted.size()
          << " extracted, " << report.rejected.size() << " rejected\n";
    } else if (*fp) {
      const Model model = parse_model(read_file(model_path));
      Json j;
      j["fingerprint"] = fingerprint_to_json(fingerprint(fs::path(model_path).stem().string(), model));
      if (!registry_path.empty())
        j["registry"] = registry_scores(model, load_registry(registry_path));
      write_json(out_path, j);
    } else if (*ident) {
      const auto registry = load_registry(registry_path);
      Model model;
      if (!model_path.empty()) {
        model = parse_model(read_file(model_path));
      } else {
        const auto report = extract_models(read_file(package_path), default_model_suffixes(), 0,
                                           package_path);
        model = pick_model(report, model_name).model;
      }
      const auto rep = identify(model, registry);
      write_json(out_path, to_json(rep));
      out << "approach " << approach_name(rep.approach) << ", F = " << rep.frozen_layers << "\n";
    } else if (*attack) {
      const Scenario s = scenario_or_default(scenario_path);
      const auto report =
          extract_models(read_file(package_path), default_model_suffixes(), seed, package_path);
      const auto &victim = pick_model(report, model_name);
      if (!victim.labels_present)
        throw AttackRefused("label file missing or inconsistent; cannot target '" + target + "'");
      const auto it = std::find(victim.labels.begin(), victim.labels.end(), target);
      if (it == victim.labels.end())
        throw std::runtime_error("class '" + target + "' is not in the label file");
      const int targeted = static_cast<int>(it - victim.labels.begin());
      AttackConfig cfg;
      cfg.algorithm = *algorithm_from_name(algo_str);
      cfg.epsilon = epsilon.value_or(default_epsilon(cfg.algorithm));
      cfg.pixel_scale = s.pixel_scale;
      cfg.reference_dims = s.reference_dims;
      cfg.can_resamples = s.can_resamples;
      cfg.source_count = s.source_count;
      cfg.craft = s.craft;
      cfg.seed = seed;
      const auto pools = make_pools(s, victim.labels, targeted, derive_seed(seed, "pools"));
      const auto run = run_attack(*setting_from_name(setting_str),
                                  VictimInfo{&victim.model, victim.labels_present},
                                  load_registry(registry_path), pools, targeted, cfg);
      write_json(out_path, to_json(run));
      for (const auto &w : run.warnings)
        err << "warning: " << w << "\n";
      out << "ASR " << run.m << "/" << run.t << " = " << run.asr << "\n";
    } else if (*bench_cmd) {
      Fixtures fx;
      if (!fixtures_path.empty()) {
        fx = load_fixtures(fixtures_path);
        if (!scenario_path.empty()) {
          auto s = scenario_or_default(scenario_path);
          if (fixture_inputs(s) != fixture_inputs(fx.scenario))
            throw std::runtime_error("fixtures in " + fixtures_path +
                                     " were built from a different scenario");
          fx.scenario = std::move(s);
        }
      } else {
        fx = make_fixtures(scenario_or_default(scenario_path), fs::path(out_path) / "fixtures",
                           &out);
      }
      const auto report = bench(fx, threads ? threads : bench_threads(), &out);
      write_report(report, out_path);
      out << "report written to " << out_path << "\n";
    } else if (*replay_cmd) {
      const auto report = load_report(report_path);
      const auto &recorded = report.cell(cell_id);
      const auto again = replay(report, cell_id);
      if (!out_path.empty())
        write_json(out_path, {{"id", again.id},
                              {"asr", again.asr},
                              {"m", again.m},
                              {"t", again.t},
                              {"recorded_asr", recorded.asr},
                              {"ok", again.ok},
                              {"error", again.error}});
      if (!again.ok)
        throw std::runtime_error("replay failed: " + again.error);
      const bool same = again.asr == recorded.asr && again.m == recorded.m && again.t == recorded.t;
      out << cell_id << ": recorded " << recorded.asr << ", replayed " << again.asr
          << (same ? " (identical)" : " (MISMATCH)") << "\n";
      if (!same)
        return kExitPipelineError;
    }
  } catch (const std::exception &e) {
    err << "error: " << e.what() << "\n";
    return kExitPipelineError;
  }
  return kExitOk;
}

} // namespace modelraider
