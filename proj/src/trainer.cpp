#include "twin/trainer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <stdexcept>

namespace twin {

std::string to_string(LrSchedule s) {
  switch (s) {
    case LrSchedule::Cosine: return "cosine";
    case LrSchedule::Piecewise: return "piecewise";
    case LrSchedule::Constant: return "constant";
  }
  return "cosine";
}

LrSchedule parse_lr_schedule(const std::string& s) {
  if (s == "cosine") return LrSchedule::Cosine;
  if (s == "piecewise") return LrSchedule::Piecewise;
  if (s == "constant") return LrSchedule::Constant;
  throw std::invalid_argument("unknown lr schedule '" + s + "'");
}

std::string to_string(TrialStatus s) {
  switch (s) {
    case TrialStatus::Running: return "running";
    case TrialStatus::Completed: return "completed";
    case TrialStatus::StoppedEarly: return "stopped_early";
    case TrialStatus::Diverged: return "diverged";
  }
  return "running";
}

TrialStatus parse_trial_status(const std::string& s) {
  if (s == "running") return TrialStatus::Running;
  if (s == "completed") return TrialStatus::Completed;
  if (s == "stopped_early") return TrialStatus::StoppedEarly;
  if (s == "diverged") return TrialStatus::Diverged;
  throw std::invalid_argument("unknown trial status '" + s + "'");
}

void TrainerConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("lr must be > 0");
  if (!(wd >= 0.0) || !std::isfinite(wd)) throw std::invalid_argument("wd must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0, 1)");
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
}

double cosine_lr(double base_lr, int epoch, int total_epochs) {
  if (total_epochs < 1 || epoch < 0 || epoch >= total_epochs) {
    throw std::out_of_range("cosine_lr: epoch outside [0, T)");
  }
  const double frac = static_cast<double>(epoch) / static_cast<double>(total_epochs);
  return base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

double piecewise_lr(double base_lr, int epoch, int total_epochs) {
  if (total_epochs < 1 || epoch < 0 || epoch >= total_epochs) {
    throw std::out_of_range("piecewise_lr: epoch outside [0, T)");
  }
  double lr = base_lr;
  if (2 * epoch >= total_epochs) lr *= 0.1;
  if (4 * epoch >= 3 * total_epochs) lr *= 0.1;
  return lr;
}

double scheduled_lr(LrSchedule schedule, double base_lr, int epoch, int total_epochs) {
  switch (schedule) {
    case LrSchedule::Cosine: return cosine_lr(base_lr, epoch, total_epochs);
    case LrSchedule::Piecewise: return piecewise_lr(base_lr, epoch, total_epochs);
    case LrSchedule::Constant: break;
  }
  return base_lr;
}

void sgdm_step(std::span<double> theta, std::span<double> velocity, std::span<const double> grad,
               double lr, double wd, double momentum) {
  if (theta.size() != velocity.size() || theta.size() != grad.size()) {
    throw std::invalid_argument("sgdm_step: shape mismatch");
  }
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad[i] + wd * theta[i];
    velocity[i] = momentum * velocity[i] + g;
    theta[i] -= lr * velocity[i];
  }
}

double param_l2_norm(std::span<const double> theta) {
  double sum = 0.0;
  for (double x : theta) sum += x * x;
  return std::sqrt(sum);
}

namespace {

bool same_bits(double a, double b) { return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b); }

bool same_bits(const std::optional<double>& a, const std::optional<double>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || same_bits(*a, *b);
}

}  // namespace

bool EpochLog::operator==(const EpochLog& o) const {
  return epoch == o.epoch && same_bits(train_loss, o.train_loss) &&
         same_bits(param_norm, o.param_norm) && same_bits(val_acc, o.val_acc) &&
         same_bits(test_acc, o.test_acc);
}

Trainer::Trainer(const SyntheticTask& task, Architecture arch, TrainerConfig config, GridCell cell)
    : task_(&task), arch_(std::move(arch)), config_(config) {
  config_.validate();
  if (arch_.input_dim != task.input_dim() || arch_.n_classes != task.n_classes()) {
    throw std::invalid_argument("architecture does not match task dimensions");
  }
  params_ = init_params(arch_, config_.init_seed);
  velocity_.assign(params_.size(), 0.0);
  record_.cell = cell;
}

const EpochLog& Trainer::run_epoch() {
  if (finished()) {
    if (record_.epochs.empty()) throw std::logic_error("run_epoch on a finished empty trial");
    return record_.epochs.back();
  }
  const int epoch = record_.epochs_run();
  const Dataset& train = task_->train;

  // Batch order depends only on (init_seed, epoch).
  std::vector<std::size_t> order(train.n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::seed_seq seq{static_cast<std::uint32_t>(config_.init_seed),
                    static_cast<std::uint32_t>(config_.init_seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x5eedu};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);

  const double lr = scheduled_lr(config_.lr_schedule, config_.lr, epoch, config_.epochs);
  double loss_sum = 0.0;
  std::size_t n_batches = 0;
  for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
    const std::size_t end = std::min(order.size(), start + config_.batch_size);
    const std::span<const std::size_t> batch(order.data() + start, end - start);
    const LossAndGrad lg = loss_and_grad(arch_, params_, train, batch);
    loss_sum += lg.loss;
    ++n_batches;
    sgdm_step(params_, velocity_, lg.grad, lr, config_.wd, config_.momentum);
  }

  EpochLog log;
  log.epoch = epoch;
  log.train_loss = loss_sum / static_cast<double>(n_batches);
  log.param_norm = param_l2_norm(params_);
  if (!task_->val.empty()) log.val_acc = accuracy(arch_, params_, task_->val);
  if (!task_->test.empty()) log.test_acc = accuracy(arch_, params_, task_->test);
  record_.epochs.push_back(log);

  if (!std::isfinite(log.train_loss) || !std::isfinite(log.param_norm)) {
    record_.status = TrialStatus::Diverged;
  } else if (record_.epochs_run() >= config_.epochs) {
    record_.status = TrialStatus::Completed;
  }
  return record_.epochs.back();
}

void Trainer::stop_early() {
  if (!finished()) record_.status = TrialStatus::StoppedEarly;
}

TrialRecord run_trial(const SyntheticTask& task, const Architecture& arch,
                      const TrainerConfig& config, GridCell cell,
                      const std::atomic<bool>* stop_signal) {
  Trainer trainer(task, arch, config, cell);
  while (!trainer.finished()) {
    if (stop_signal != nullptr && stop_signal->load(std::memory_order_acquire)) {
      trainer.stop_early();
      break;
    }
    trainer.run_epoch();
  }
  return trainer.record();
}

}  // namespace twin
