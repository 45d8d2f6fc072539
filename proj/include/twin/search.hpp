#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <vector>

#include "twin/hypergrid.hpp"
#include "twin/matrices.hpp"
#include "twin/runstore.hpp"
#include "twin/scheduler.hpp"
#include "twin/selector.hpp"
#include "twin/trainer.hpp"

namespace twin {

struct SearchOutcome {
  std::vector<TrialRecord> records;  // row-major, one per cell
  std::vector<DecisionRecord> decisions;
  std::vector<std::size_t> alive_history;
  long long epochs_consumed = 0;
};

// Trains every grid cell under the scheduler. Trials between two checkpoints
// run concurrently on `jobs` workers; all scheduler calls happen on the
// calling thread in row-major cell order. When `store` is given, every epoch
// line and decision is appended as soon as its status is known. A store that
// already holds lines is resumed: trials replay deterministically and only
// epochs past each cell's last logged line are appended.
SearchOutcome run_search(const SyntheticTask& task, const TrainingSetup& setup,
                         const HyperGrid& grid, const SchedulerPolicy& policy, std::size_t jobs,
                         RunDir* store = nullptr);

std::size_t default_jobs();

// Full online pipeline for a manifest with a built-in trainer: trains, then
// writes matrices.json and selection.json.
struct PipelineResult {
  SearchOutcome search;
  LogMatrices matrices;
  MetricSurfaces surfaces;
  TwinResult twin;
};

PipelineResult run_pipeline(RunDir& run, std::size_t jobs);

// Offline selection over logged trials.
struct OfflineOptions {
  std::optional<QuickshiftParams> params;  // defaults: manifest, then sqrt rule
  std::size_t lr_stride = 1;
  std::size_t wd_stride = 1;
};

struct OfflineResult {
  HyperGrid grid;
  LogMatrices matrices;
  MetricSurfaces surfaces;
  TwinResult twin;
  std::vector<std::string> warnings;
};

OfflineResult select_offline(const LoadedRun& run, const OfflineOptions& options);

QuickshiftParams resolve_params(const RunManifest& manifest, const HyperGrid& grid,
                                const std::optional<QuickshiftParams>& override_params);

}  // namespace twin
