#include "modelraider/bench.hpp"

#include "modelraider/extractor.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

namespace modelraider {

namespace fs = std::filesystem;

namespace {

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string cell_id(std::uint64_t seed, const std::string &task, int unfrozen,
                    AttackAlgorithm a, double eps, AttackSetting s) {
  return "s" + std::to_string(seed) + "/" + task + "/u" + std::to_string(unfrozen) + "/" +
         std::string(algorithm_name(a)) + "/e" + format_number(eps) + "/" +
         std::string(setting_name(s));
}

} // namespace

const BenchCell &BenchReport::cell(const std::string &id) const {
  for (const auto &c : cells)
    if (c.id == id)
      return c;
  throw std::invalid_argument("report has no cell '" + id + "'");
}

std::vector<BenchCell> plan_cells(const Scenario &s) {
  s.validate();
  std::vector<BenchCell> cells;
  std::set<std::string> seen;
  auto add = [&](std::uint64_t seed, const VictimTask &task, int g, AttackAlgorithm a,
                 double eps) {
    const int u = scaled_unfrozen(s, g);
    for (auto setting : s.settings) {
      BenchCell c;
      c.id = cell_id(seed, task.name, u, a, eps, setting);
      if (!seen.insert(c.id).second)
        continue;
      c.seed = seed;
      c.cell_seed = derive_seed(seed, c.id);
      c.task = task.name;
      c.grid_value = g;
      c.unfrozen = u;
      c.setting = setting;
      c.algorithm = a;
      c.epsilon = eps;
      cells.push_back(std::move(c));
    }
  };
  for (auto seed : s.seeds)
    for (const auto &task : s.tasks) {
      for (int g : s.transfer_grid)
        for (double eps : s.epsilons_for(s.grid_algorithm))
          add(seed, task, g, s.grid_algorithm, eps);
      for (auto a : s.algorithms)
        for (double eps : s.epsilons_for(a))
          add(seed, task, s.transfer_grid.front(), a, eps);
    }
  return cells;
}

BenchCell run_cell(const Fixtures &fx, const std::vector<FingerprintRecord> &registry,
                   BenchCell cell) {
  const auto start = std::chrono::steady_clock::now();
  const Scenario &s = fx.scenario;
  cell.ok = false;
  cell.error.clear();
  cell.warnings.clear();
  try {
    const auto &victim = fx.victim(cell.task, cell.unfrozen);
    const auto report =
        extract_models(read_file(fx.dir / victim.package), default_model_suffixes(),
                       cell.cell_seed, victim.package);
    if (report.extracted.empty())
      throw std::runtime_error("no operable model in " + victim.package);
    const auto &model = report.extracted.front();
    const auto &task = s.task(cell.task);
    int targeted = -1;
    for (std::size_t i = 0; i < model.labels.size(); ++i)
      if (model.labels[i] == task.targeted)
        targeted = static_cast<int>(i);
    if (model.labels_present && targeted < 0)
      throw std::runtime_error("label file does not name the targeted class " + task.targeted);

    // Pools depend on the scenario seed and task only, so every setting and
    // algorithm of a seed sees the same images.
    const auto pools = make_pools(s, model.labels, std::max(targeted, 0),
                                  derive_seed(cell.seed, "pools/" + cell.task));
    AttackConfig cfg;
    cfg.algorithm = cell.algorithm;
    cfg.epsilon = cell.epsilon;
    cfg.pixel_scale = s.pixel_scale;
    cfg.reference_dims = s.reference_dims;
    cfg.can_resamples = s.can_resamples;
    cfg.source_count = s.source_count;
    cfg.craft = s.craft;
    cfg.seed = cell.cell_seed;
    const auto run = run_attack(cell.setting, VictimInfo{&model.model, model.labels_present},
                                registry, pools, targeted, cfg);
    cell.asr = run.asr;
    cell.m = run.m;
    cell.t = run.t;
    cell.counter_class = run.counter_class;
    cell.constraint_met = run.constraint_met;
    cell.warnings = run.warnings;
    cell.ok = true;
  } catch (const std::exception &e) {
    cell.error = e.what();
  }
  cell.runtime_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return cell;
}

unsigned bench_threads() {
  if (const char *env = std::getenv("MODELRAIDER_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0)
      return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

BenchReport bench(const Fixtures &fx, unsigned threads, std::ostream *log) {
  BenchReport report;
  report.scenario = fx.scenario;
  report.fixtures_dir = fs::absolute(fx.dir);
  report.cells = plan_cells(fx.scenario);
  const auto registry = load_registry(fx.registry_dir());

  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < report.cells.size();) {
      report.cells[i] = run_cell(fx, registry, report.cells[i]);
      if (log) {
        std::lock_guard lock(log_mutex);
        const auto &c = report.cells[i];
        *log << "[" << i + 1 << "/" << report.cells.size() << "] " << c.id << ": "
             << (c.ok ? "asr " + format_number(c.asr) : "error: " + c.error) << "\n";
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, report.cells.size()));
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < n; ++k)
    pool.emplace_back(worker);
  worker();
  for (auto &t : pool)
    t.join();
  return report;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

Json cell_to_json(const BenchCell &c) {
  Json j;
  j["id"] = c.id;
  j["seed"] = c.seed;
  j["cell_seed"] = c.cell_seed;
  j["task"] = c.task;
  j["grid_value"] = c.grid_value;
  j["unfrozen"] = c.unfrozen;
  j["setting"] = setting_name(c.setting);
  j["algorithm"] = algorithm_name(c.algorithm);
  j["epsilon"] = c.epsilon;
  j["ok"] = c.ok;
  j["error"] = c.error;
  j["asr"] = c.asr;
  j["m"] = c.m;
  j["t"] = c.t;
  j["counter_class"] = c.counter_class;
  j["constraint_met"] = c.constraint_met;
  j["runtime_ms"] = c.runtime_ms;
  j["warnings"] = c.warnings;
  return j;
}

BenchCell cell_from_json(const nlohmann::json &j) {
  BenchCell c;
  c.id = j.at("id").get<std::string>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.cell_seed = j.at("cell_seed").get<std::uint64_t>();
  c.task = j.at("task").get<std::string>();
  c.grid_value = j.at("grid_value").get<int>();
  c.unfrozen = j.at("unfrozen").get<int>();
  c.setting = setting_from_name(j.at("setting").get<std::string>()).value();
  c.algorithm = algorithm_from_name(j.at("algorithm").get<std::string>()).value();
  c.epsilon = j.at("epsilon").get<double>();
  c.ok = j.at("ok").get<bool>();
  c.error = j.at("error").get<std::string>();
  c.asr = j.at("asr").get<double>();
  c.m = j.at("m").get<std::int64_t>();
  c.t = j.at("t").get<std::int64_t>();
  c.counter_class = j.at("counter_class").get<int>();
  c.constraint_met = j.at("constraint_met").get<bool>();
  c.runtime_ms = j.at("runtime_ms").get<double>();
  c.warnings = j.at("warnings").get<std::vector<std::string>>();
  return c;
}

double mean_of(const std::vector<double> &v) {
  double s = 0.0;
  for (double x : v)
    s += x;
  return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
}

std::string pct(double v) {
  if (std::isnan(v))
    return "n/a";
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

} // namespace

SettingMeans setting_means(const BenchReport &report, AttackAlgorithm algorithm,
                           std::optional<int> unfrozen) {
  std::map<AttackSetting, std::vector<double>> by;
  const double eps = report.scenario.epsilons_for(algorithm).front();
  for (const auto &c : report.cells)
    if (c.ok && c.algorithm == algorithm && c.epsilon == eps &&
        (!unfrozen || c.unfrozen == *unfrozen))
      by[c.setting].push_back(c.asr);
  SettingMeans m;
  m.pma = mean_of(by[AttackSetting::PMA]);
  m.bama = mean_of(by[AttackSetting::BAMA]);
  m.ebama = mean_of(by[AttackSetting::EBAMA]);
  m.cells = static_cast<int>(std::min({by[AttackSetting::PMA].size(),
                                       by[AttackSetting::BAMA].size(),
                                       by[AttackSetting::EBAMA].size()}));
  return m;
}

std::string csv_table(const BenchReport &report) {
  std::ostringstream out;
  out << "cell_id,setting,algorithm,epsilon,unfrozen,dataset,asr,m,t,seed,runtime_ms\n";
  for (const auto &c : report.cells) {
    out << c.id << ',' << setting_name(c.setting) << ',' << algorithm_name(c.algorithm) << ','
        << format_number(c.epsilon) << ',' << c.unfrozen << ',' << c.task << ',';
    if (c.ok) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", c.asr);
      out << buf << ',' << c.m << ',' << c.t;
    } else {
      out << ",,";
    }
    char rt[32];
    std::snprintf(rt, sizeof rt, "%.1f", c.runtime_ms);
    out << ',' << c.seed << ',' << rt << '\n';
  }
  return out.str();
}

std::string markdown_tables(const BenchReport &report) {
  const Scenario &s = report.scenario;
  std::ostringstream md;
  md << "# Attack success rates\n\n";
  md << "Mean ASR over " << s.seeds.size() << " seeds; t = " << s.source_count
     << " source images per cell.\n";

  // mean ASR keyed by (task, setting, column label)
  auto table = [&](const std::string &title, const std::vector<std::string> &columns,
                   auto column_of) {
    std::map<std::tuple<std::string, AttackSetting, std::string>, std::vector<double>> acc;
    for (const auto &c : report.cells)
      if (c.ok)
        if (auto col = column_of(c))
          acc[{c.task, c.setting, *col}].push_back(c.asr);
    for (const auto &task : s.tasks) {
      md << "\n## " << title << " (" << task.name << ", target " << task.targeted << ")\n\n";
      md << "| setting |";
      for (const auto &col : columns)
        md << ' ' << col << " |";
      md << "\n|---|";
      for (std::size_t i = 0; i < columns.size(); ++i)
        md << "---|";
      md << '\n';
      for (auto setting : s.settings) {
        md << "| " << setting_name(setting) << " |";
        for (const auto &col : columns) {
          const auto it = acc.find({task.name, setting, col});
          md << ' ' << (it == acc.end() ? "n/a" : pct(mean_of(it->second))) << " |";
        }
        md << '\n';
      }
    }
  };

  const double grid_eps = s.epsilons_for(s.grid_algorithm).front();
  std::vector<std::string> grid_cols;
  std::set<int> seen;
  for (int g : s.transfer_grid) {
    const int u = scaled_unfrozen(s, g);
    if (seen.insert(u).second)
      grid_cols.push_back(std::to_string(g) + " (" + std::to_string(u) + ")");
  }
  table("ASR vs fine-tuned layers, " + std::string(algorithm_name(s.grid_algorithm)) +
            " eps " + format_number(grid_eps) + "; grid value (unfrozen layers)",
        grid_cols, [&](const BenchCell &c) -> std::optional<std::string> {
          if (c.algorithm != s.grid_algorithm || c.epsilon != grid_eps)
            return std::nullopt;
          return std::to_string(c.grid_value) + " (" + std::to_string(c.unfrozen) + ")";
        });

  std::vector<std::string> algo_cols;
  for (auto a : s.algorithms)
    for (double e : s.epsilons_for(a))
      algo_cols.push_back(std::string(algorithm_name(a)) + " " + format_number(e));
  const int u0 = scaled_unfrozen(s, s.transfer_grid.front());
  table("ASR vs attack algorithm, " + std::to_string(u0) + " unfrozen layers", algo_cols,
        [&](const BenchCell &c) -> std::optional<std::string> {
          if (c.unfrozen != u0)
            return std::nullopt;
          return std::string(algorithm_name(c.algorithm)) + " " + format_number(c.epsilon);
        });

  std::size_t failed = 0, warned = 0;
  for (const auto &c : report.cells) {
    failed += !c.ok;
    warned += !c.warnings.empty();
  }
  md << "\n" << report.cells.size() << " cells, " << failed << " failed, " << warned
     << " with warnings.\n";
  return md.str();
}

void write_report(const BenchReport &report, const fs::path &dir) {
  fs::create_directories(dir);
  Json j;
  j["scenario"] = to_json(report.scenario);
  j["fixtures_dir"] = report.fixtures_dir.string();
  j["cells"] = Json::array();
  for (const auto &c : report.cells)
    j["cells"].push_back(cell_to_json(c));
  write_text(dir / "report.json", j.dump(2) + "\n");
  write_text(dir / "cells.csv", csv_table(report));
  write_text(dir / "tables.md", markdown_tables(report));
}

BenchReport load_report(const fs::path &dir) {
  const auto j = nlohmann::json::parse(read_text(dir / "report.json"));
  BenchReport r;
  r.scenario = scenario_from_json(j.at("scenario"));
  r.fixtures_dir = j.at("fixtures_dir").get<std::string>();
  for (const auto &c : j.at("cells"))
    r.cells.push_back(cell_from_json(c));
  return r;
}

BenchCell replay(const BenchReport &report, const std::string &cell_id) {
  const auto &recorded = report.cell(cell_id);
  const Fixtures fx = load_fixtures(report.fixtures_dir);
  return run_cell(fx, load_registry(fx.registry_dir()), recorded);
}

} // namespace modelraider
