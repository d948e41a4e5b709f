#ifndef MODELRAIDER_BENCH_HPP
#define MODELRAIDER_BENCH_HPP

#include "modelraider/scenario.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace modelraider {

/// One experiment: a victim (task, unfrozen layers), an attack setting and
/// an algorithm/epsilon pair under one scenario seed.
struct BenchCell {
  std::string id;
  std::uint64_t seed = 0;      // scenario seed this cell belongs to
  std::uint64_t cell_seed = 0; // derived from (seed, id); drives the attack
  std::string task;
  int grid_value = 0;
  int unfrozen = 0;
  AttackSetting setting = AttackSetting::BAMA;
  AttackAlgorithm algorithm = AttackAlgorithm::CAN;
  double epsilon = 0.0;

  // results
  bool ok = false;
  std::string error;
  double asr = 0.0;
  std::int64_t m = 0, t = 0;
  int counter_class = -1;
  bool constraint_met = true;
  double runtime_ms = 0.0;
  std::vector<std::string> warnings;
};

struct BenchReport {
  Scenario scenario;
  std::filesystem::path fixtures_dir;
  std::vector<BenchCell> cells;

  const BenchCell &cell(const std::string &id) const;
};

/// Every cell of the scenario's grids, results empty: the transfer grid
/// with the grid algorithm, plus every algorithm/epsilon on the first grid
/// victim; each crossed with every setting, task and seed.
std::vector<BenchCell> plan_cells(const Scenario &s);

/// extract -> fingerprint -> identify -> attack for one cell. Pipeline
/// errors are recorded in the cell rather than thrown.
BenchCell run_cell(const Fixtures &fx, const std::vector<FingerprintRecord> &registry,
                   BenchCell cell);

/// MODELRAIDER_THREADS if set and positive, else the hardware concurrency.
unsigned bench_threads();

BenchReport bench(const Fixtures &fx, unsigned threads, std::ostream *log = nullptr);

/// report.json (replayable), cells.csv and tables.md.
void write_report(const BenchReport &report, const std::filesystem::path &dir);
BenchReport load_report(const std::filesystem::path &dir);

/// Re-runs a recorded cell from its seed.
BenchCell replay(const BenchReport &report, const std::string &cell_id);

struct SettingMeans {
  double pma = 0.0, bama = 0.0, ebama = 0.0;
  int cells = 0; // successful cells per setting that entered the means
};

/// Mean ASR per setting over successful cells matching the filters.
SettingMeans setting_means(const BenchReport &report, AttackAlgorithm algorithm,
                           std::optional<int> unfrozen = std::nullopt);

std::string markdown_tables(const BenchReport &report);
std::string csv_table(const BenchReport &report);

} // namespace modelraider

#endif // MODELRAIDER_BENCH_HPP
