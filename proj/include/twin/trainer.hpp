#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "twin/hypergrid.hpp"
#include "twin/mlp.hpp"
#include "twin/task.hpp"

namespace twin {

enum class LrSchedule { Cosine, Piecewise, Constant };

std::string to_string(LrSchedule s);
LrSchedule parse_lr_schedule(const std::string& s);

struct TrainerConfig {
  double lr = 0.01;
  double wd = 0.0;
  double momentum = 0.9;
  int epochs = 30;
  std::size_t batch_size = 32;
  LrSchedule lr_schedule = LrSchedule::Cosine;
  std::uint64_t init_seed = 0;

  void validate() const;
};

// alpha_t = alpha_0 * 0.5 * (1 + cos(pi * t / T)), evaluated once per epoch.
double cosine_lr(double base_lr, int epoch, int total_epochs);

// x0.1 at 50% and again at 75% of the budget.
double piecewise_lr(double base_lr, int epoch, int total_epochs);

double scheduled_lr(LrSchedule schedule, double base_lr, int epoch, int total_epochs);

// Momentum SGD with L2-coupled decay, in place:
//   g = grad + wd * theta;  v = momentum * v + g;  theta -= lr * v
void sgdm_step(std::span<double> theta, std::span<double> velocity, std::span<const double> grad,
               double lr, double wd, double momentum);

double param_l2_norm(std::span<const double> theta);

enum class TrialStatus { Running, Completed, StoppedEarly, Diverged };

std::string to_string(TrialStatus s);
TrialStatus parse_trial_status(const std::string& s);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;
  double param_norm = 0.0;
  std::optional<double> val_acc;
  std::optional<double> test_acc;

  bool operator==(const EpochLog&) const;
};

struct TrialRecord {
  GridCell cell;
  std::vector<EpochLog> epochs;
  TrialStatus status = TrialStatus::Running;

  int epochs_run() const { return static_cast<int>(epochs.size()); }
  bool operator==(const TrialRecord&) const = default;
};

// Resumable single-trial training loop. Owns its parameters exclusively.
class Trainer {
 public:
  Trainer(const SyntheticTask& task, Architecture arch, TrainerConfig config, GridCell cell);

  // Trains one epoch and appends its log. No-op once finished.
  const EpochLog& run_epoch();

  void stop_early();
  bool finished() const { return record_.status != TrialStatus::Running; }
  bool diverged() const { return record_.status == TrialStatus::Diverged; }
  int epochs_done() const { return record_.epochs_run(); }

  const TrialRecord& record() const { return record_; }
  std::span<const double> params() const { return params_; }
  const TrainerConfig& config() const { return config_; }

 private:
  const SyntheticTask* task_;
  Architecture arch_;
  TrainerConfig config_;
  std::vector<double> params_;
  std::vector<double> velocity_;
  TrialRecord record_;
};

// Runs a trial to completion, polling stop_signal between epochs.
TrialRecord run_trial(const SyntheticTask& task, const Architecture& arch,
                      const TrainerConfig& config, GridCell cell,
                      const std::atomic<bool>* stop_signal = nullptr);

}  // namespace twin
