#include "twin/search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <memory>
#include <thread>

namespace twin {

std::size_t default_jobs() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

namespace {

template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> workers;
  workers.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
}

}  // namespace

SearchOutcome run_search(const SyntheticTask& task, const TrainingSetup& setup,
                         const HyperGrid& grid, const SchedulerPolicy& policy, std::size_t jobs,
                         RunDir* store) {
  const auto cells = grid.cells();
  const Architecture arch = setup.architecture();
  std::vector<std::unique_ptr<Trainer>> trainers;
  trainers.reserve(cells.size());
  for (const auto& cell : cells) {
    trainers.push_back(std::make_unique<Trainer>(
        task, arch, setup.trainer_config(cell_params(grid, cell), policy.epoch_budget), cell));
  }

  TrialScheduler scheduler(policy, cells);
  std::vector<int> reported(cells.size(), 0);
  std::size_t decisions_flushed = 0;

  // Resuming replays every trial from scratch; lines already on disk are skipped.
  if (store != nullptr) store->reset_decisions();
  auto write_line = [&](std::size_t i, int epoch_index, TrialStatus status) {
    if (store == nullptr) return;
    if (trainers[i]->record().epochs[static_cast<std::size_t>(epoch_index)].epoch <=
        store->last_logged_epoch(cells[i])) {
      return;
    }
    store->append_trial_line({cells[i], trainers[i]->record().epochs[static_cast<std::size_t>(epoch_index)], status});
  };

  while (true) {
    std::vector<std::size_t> active;
    std::vector<int> targets;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (trainers[i]->finished() || !scheduler.is_alive(cells[i])) continue;
      active.push_back(i);
      targets.push_back(scheduler.next_checkpoint(cells[i]));
    }
    if (active.empty()) break;

    parallel_for(active.size(), jobs, [&](std::size_t k) {
      Trainer& t = *trainers[active[k]];
      while (!t.finished() && t.epochs_done() < targets[k]) t.run_epoch();
    });

    std::vector<std::size_t> pending;
    for (std::size_t i : active) {
      Trainer& t = *trainers[i];
      const auto& epochs = t.record().epochs;
      for (int e = reported[i]; e < t.epochs_done(); ++e) {
        const bool last = e + 1 == t.epochs_done();
        const double loss = last && t.diverged() ? std::numeric_limits<double>::quiet_NaN()
                                                 : epochs[static_cast<std::size_t>(e)].train_loss;
        const Decision d = scheduler.decide(cells[i], e + 1, loss);
        if (d == Decision::Pending) {
          pending.push_back(i);
        } else if (d == Decision::Continue) {
          write_line(i, e, TrialStatus::Running);
        } else if (t.diverged() && last) {
          write_line(i, e, TrialStatus::Diverged);
        } else if (e + 1 == policy.epoch_budget) {
          write_line(i, e, TrialStatus::Completed);
        } else {
          t.stop_early();
          write_line(i, e, TrialStatus::StoppedEarly);
        }
      }
      reported[i] = t.epochs_done();
    }

    for (std::size_t i : pending) {
      const auto outcome = scheduler.outcome(cells[i]);
      if (!outcome || *outcome == Decision::Pending) {
        throw std::logic_error("rung left unresolved for " + to_string(cells[i]));
      }
      Trainer& t = *trainers[i];
      if (*outcome == Decision::Continue) {
        write_line(i, t.epochs_done() - 1, TrialStatus::Running);
      } else {
        t.stop_early();
        write_line(i, t.epochs_done() - 1, TrialStatus::StoppedEarly);
      }
    }

    if (store != nullptr) {
      const auto& log = scheduler.log();
      store->append_decisions({log.begin() + static_cast<std::ptrdiff_t>(decisions_flushed), log.end()});
    }
    decisions_flushed = scheduler.log().size();
  }

  SearchOutcome out;
  out.decisions = scheduler.log();
  out.alive_history = scheduler.alive_history();
  for (const auto& t : trainers) {
    out.records.push_back(t->record());
    out.epochs_consumed += t->epochs_done();
  }
  return out;
}

QuickshiftParams resolve_params(const RunManifest& manifest, const HyperGrid& grid,
                                const std::optional<QuickshiftParams>& override_params) {
  if (override_params) return *override_params;
  if (manifest.quickshift && grid == manifest.grid) return *manifest.quickshift;
  return default_params(grid);
}

PipelineResult run_pipeline(RunDir& run, std::size_t jobs) {
  const RunManifest& manifest = run.manifest();
  if (!manifest.training) {
    throw std::invalid_argument("run_pipeline: manifest has no built-in trainer");
  }
  const SyntheticTask task = make_synthetic_task(manifest.training->task);
  PipelineResult out;
  out.search = run_search(task, *manifest.training, manifest.grid, manifest.policy, jobs, &run);
  out.matrices = assemble(out.search.records, manifest.grid);
  out.surfaces = assemble_surfaces(out.search.records, manifest.grid, manifest.policy.kind);
  write_text_atomic(run.matrices_path(), matrices_to_json(out.matrices, out.surfaces).dump(2) + "\n");
  out.twin = twin_select(manifest.grid, out.matrices, resolve_params(manifest, manifest.grid, std::nullopt));
  write_text_atomic(run.selection_path(), selection_to_json(manifest.grid, out.twin).dump(2) + "\n");
  return out;
}

OfflineResult select_offline(const LoadedRun& run, const OfflineOptions& options) {
  const RunManifest& manifest = run.manifest;
  const auto missing = run.missing_cells();
  const auto incomplete = run.incomplete_cells();
  if (!missing.empty() || !incomplete.empty()) {
    std::string msg = "run is incomplete:";
    for (const auto& c : missing) msg += " missing " + to_string(c);
    for (const auto& c : incomplete) msg += " running " + to_string(c);
    throw std::invalid_argument(msg);
  }
  const LogMatrices full = assemble(run.records, manifest.grid);
  const MetricSurfaces full_surfaces = assemble_surfaces(run.records, manifest.grid, manifest.policy.kind);

  OfflineResult out{manifest.grid, full, full_surfaces, {}, run.warnings};
  if (options.lr_stride != 1 || options.wd_stride != 1) {
    out.grid = slice_grid(manifest.grid, options.lr_stride, options.wd_stride);
    out.matrices = slice_matrices(full, options.lr_stride, options.wd_stride);
    if (full_surfaces.val_acc) {
      out.surfaces.val_acc = slice_matrix(*full_surfaces.val_acc, options.lr_stride, options.wd_stride);
    }
    if (full_surfaces.test_acc) {
      out.surfaces.test_acc = slice_matrix(*full_surfaces.test_acc, options.lr_stride, options.wd_stride);
    }
  }
  out.twin = twin_select(out.grid, out.matrices, resolve_params(manifest, out.grid, options.params));
  return out;
}

}  // namespace twin
