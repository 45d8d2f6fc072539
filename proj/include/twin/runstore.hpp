#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "twin/hypergrid.hpp"
#include "twin/matrices.hpp"
#include "twin/quickshift.hpp"
#include "twin/scheduler.hpp"
#include "twin/selector.hpp"
#include "twin/task.hpp"
#include "twin/trainer.hpp"

namespace twin {

inline constexpr const char* kToolVersion = "0.1.0";

using Json = nlohmann::ordered_json;

// Failure to read or write the run directory.
class StorageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed record content (bad field, unknown cell, epoch regression, ...).
class SchemaError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Built-in training setup; absent for runs whose trials come from elsewhere.
struct TrainingSetup {
  TaskSpec task;
  std::vector<std::size_t> hidden{64};
  double momentum = 0.9;
  std::size_t batch_size = 16;
  LrSchedule lr_schedule = LrSchedule::Cosine;
  std::uint64_t init_seed = 0;

  Architecture architecture() const;
  TrainerConfig trainer_config(const HyperParams& hp, int epochs) const;
  bool operator==(const TrainingSetup&) const = default;
};

struct RunManifest {
  std::string run_id;
  HyperGrid grid = default_grid(2);
  SchedulerPolicy policy;
  std::optional<TrainingSetup> training;  // nullopt = external trials
  std::optional<QuickshiftParams> quickshift;
  std::string tool_version = kToolVersion;
};

struct TrialLine {
  GridCell cell;
  EpochLog log;
  TrialStatus status = TrialStatus::Running;
};

// Non-finite doubles become the strings "NaN", "Inf", "-Inf".
Json encode_real(double v);
double decode_real(const Json& j, const std::string& field);

Json to_json(const RunManifest& m);
RunManifest manifest_from_json(const Json& j);
Json to_json(const TrialLine& line);
TrialLine trial_line_from_json(const Json& j);
Json to_json(const DecisionRecord& d);
DecisionRecord decision_from_json(const Json& j);
Json matrices_to_json(const LogMatrices& m, const MetricSurfaces& surfaces);
std::pair<LogMatrices, MetricSurfaces> matrices_from_json(const Json& j);
Json selection_to_json(const HyperGrid& grid, const TwinResult& result);
Json selection_to_json(const Selection& s);
Selection selection_from_json(const Json& j);
Json eval_report_to_json(const EvalReport& r);

// Single-line dump used for every artifact; byte-stable for identical input.
std::string dump_compact(const Json& j);

// Writes via a temporary file and rename.
void write_text_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

// Store root: $TWIN_STORE_ROOT when set, else the current directory.
std::filesystem::path store_root();
std::filesystem::path run_path(const std::filesystem::path& root, const std::string& run_id);

// runs/<run_id>/{manifest.json, trials/<row>_<col>.jsonl, decisions.jsonl,
//                matrices.json, selection.json, eval_report.json}
class RunDir {
 public:
  // Creates the directory and writes the manifest. Fails if a manifest exists.
  static RunDir create(const std::filesystem::path& dir, const RunManifest& manifest);
  static RunDir open(const std::filesystem::path& dir);

  const std::filesystem::path& path() const { return dir_; }
  const RunManifest& manifest() const { return manifest_; }

  // Highest epoch already on disk for `cell`, -1 when none. A torn tail line
  // is truncated away on first access.
  int last_logged_epoch(const GridCell& cell);
  void append_trial_line(const TrialLine& line);
  void append_decisions(const std::vector<DecisionRecord>& records);
  void reset_decisions();

  std::filesystem::path trial_path(const GridCell& cell) const;
  std::filesystem::path manifest_path() const { return dir_ / "manifest.json"; }
  std::filesystem::path decisions_path() const { return dir_ / "decisions.jsonl"; }
  std::filesystem::path matrices_path() const { return dir_ / "matrices.json"; }
  std::filesystem::path selection_path() const { return dir_ / "selection.json"; }
  std::filesystem::path eval_report_path() const { return dir_ / "eval_report.json"; }

 private:
  RunDir(std::filesystem::path dir, RunManifest manifest);

  std::filesystem::path dir_;
  RunManifest manifest_;
  std::map<GridCell, int> last_epoch_;
};

struct LoadedRun {
  RunManifest manifest;
  std::vector<TrialRecord> records;  // one per cell with a log, row-major
  std::vector<DecisionRecord> decisions;
  std::vector<std::string> warnings;

  // Cells without any logged epoch.
  std::vector<GridCell> missing_cells() const;
  // Cells whose last line is still "running".
  std::vector<GridCell> incomplete_cells() const;
};

LoadedRun load_run(const std::filesystem::path& dir);

struct ResumeEntry {
  GridCell cell;
  int next_epoch = 0;
  bool operator==(const ResumeEntry&) const = default;
};

// Cells that still owe epochs under the manifest's policy, with the epoch to
// resume from. Cells stopped by the scheduler or finished are excluded.
std::vector<ResumeEntry> resume_plan(const RunManifest& manifest,
                                     const std::vector<TrialRecord>& records,
                                     const std::vector<DecisionRecord>& decisions);

}  // namespace twin
