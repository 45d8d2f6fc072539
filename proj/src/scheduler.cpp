#include "twin/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace twin {

std::string to_string(SchedulerKind k) { return k == SchedulerKind::Fifo ? "fifo" : "hb"; }

SchedulerKind parse_scheduler_kind(const std::string& s) {
  if (s == "fifo" || s == "FIFO") return SchedulerKind::Fifo;
  if (s == "hb" || s == "HB" || s == "hyperband") return SchedulerKind::Hyperband;
  throw std::invalid_argument("unknown scheduler '" + s + "' (expected fifo or hb)");
}

std::string to_string(Decision d) {
  switch (d) {
    case Decision::Continue: return "continue";
    case Decision::Stop: return "stop";
    case Decision::Pending: return "pending";
  }
  return "continue";
}

void SchedulerPolicy::validate() const {
  if (epoch_budget < 1) throw std::invalid_argument("epoch_budget must be >= 1");
  if (kind == SchedulerKind::Fifo) return;
  if (!(stop_fraction > 0.0 && stop_fraction <= 1.0)) {
    throw std::invalid_argument("stop_fraction must be in (0, 1]");
  }
  if (eta < 2) throw std::invalid_argument("eta must be an integer >= 2");
  if (!(grace_fraction > 0.0 && grace_fraction < 1.0)) {
    throw std::invalid_argument("grace_fraction must be in (0, 1)");
  }
}

std::vector<int> rung_ladder(const SchedulerPolicy& policy) {
  policy.validate();
  const int budget = policy.epoch_budget;
  if (policy.kind == SchedulerKind::Fifo) return {budget};
  int r = std::max(1, static_cast<int>(std::lround(policy.grace_fraction * budget)));
  r = std::min(r, budget);
  std::vector<int> ladder{r};
  while (ladder.back() < budget) {
    const long long next = static_cast<long long>(ladder.back()) * policy.eta;
    ladder.push_back(static_cast<int>(std::min<long long>(budget, next)));
  }
  return ladder;
}

TrialScheduler::TrialScheduler(SchedulerPolicy policy, std::vector<GridCell> trials)
    : policy_(policy), trials_(std::move(trials)) {
  policy_.validate();
  if (trials_.empty()) throw std::invalid_argument("scheduler needs at least one trial");
  for (const auto& cell : trials_) {
    if (!states_.emplace(cell, TrialState{}).second) {
      throw std::invalid_argument("duplicate trial " + to_string(cell));
    }
  }
  alive_history_.push_back(trials_.size());
  if (policy_.kind == SchedulerKind::Hyperband) {
    halving_rungs_ = rung_ladder(policy_);
    halving_rungs_.pop_back();
    target_ = static_cast<std::size_t>(
        std::ceil(policy_.stop_fraction * static_cast<double>(trials_.size()) - 1e-9));
    target_ = std::max<std::size_t>(target_, 1);
    halving_active_ = !halving_rungs_.empty() && trials_.size() > target_;
    population_ = trials_;
    std::sort(population_.begin(), population_.end());
  } else {
    target_ = trials_.size();
  }
}

TrialScheduler::TrialState& TrialScheduler::at(const GridCell& cell) {
  auto it = states_.find(cell);
  if (it == states_.end()) throw std::out_of_range("unknown trial " + to_string(cell));
  return it->second;
}

const TrialScheduler::TrialState& TrialScheduler::at(const GridCell& cell) const {
  auto it = states_.find(cell);
  if (it == states_.end()) throw std::out_of_range("unknown trial " + to_string(cell));
  return it->second;
}

void TrialScheduler::push(const GridCell& cell, int epoch, Decision d, int rung,
                          const char* reason) {
  log_.push_back({cell, epoch, d, rung, n_alive(), reason});
}

Decision TrialScheduler::decide(const GridCell& cell, int epoch_completed, double train_loss) {
  TrialState& st = at(cell);
  if (st.state == State::Stopped || st.state == State::Done) {
    throw std::logic_error("decision requested for stopped trial " + to_string(cell));
  }
  if (st.state == State::Waiting) {
    throw std::logic_error("trial " + to_string(cell) + " is waiting on an unresolved rung");
  }
  if (epoch_completed <= st.last_epoch || epoch_completed > policy_.epoch_budget) {
    throw std::logic_error("trial " + to_string(cell) + " reported epoch " +
                           std::to_string(epoch_completed) + " out of order");
  }
  st.last_epoch = epoch_completed;
  st.outcome.reset();

  if (!std::isfinite(train_loss)) {
    st.state = State::Stopped;
    st.diverged = true;
    st.outcome = Decision::Stop;
    push(cell, epoch_completed, Decision::Stop, -1, "diverged");
    if (halving_active_) try_resolve_rung();
    return Decision::Stop;
  }

  if (halving_active_) {
    const int rung_epoch = halving_rungs_[rung_index_];
    if (epoch_completed > rung_epoch) {
      throw std::logic_error("trial " + to_string(cell) + " skipped rung at epoch " +
                             std::to_string(rung_epoch));
    }
    if (epoch_completed == rung_epoch) {
      st.state = State::Waiting;
      st.rung_loss = train_loss;
      try_resolve_rung();
      return st.outcome.value_or(Decision::Pending);
    }
  }

  if (epoch_completed == policy_.epoch_budget) {
    st.state = State::Done;
    st.outcome = Decision::Stop;
    push(cell, epoch_completed, Decision::Stop, -1, "budget");
    return Decision::Stop;
  }
  return Decision::Continue;
}

void TrialScheduler::try_resolve_rung() {
  std::vector<GridCell> waiting;
  for (const auto& cell : population_) {
    const TrialState& st = at(cell);
    if (st.state == State::Waiting) {
      waiting.push_back(cell);
    } else if (!(st.state == State::Stopped && st.diverged)) {
      return;  // someone still training toward this rung
    }
  }

  // Diverged members count toward the population but rank behind every finite loss.
  std::sort(waiting.begin(), waiting.end(), [this](const GridCell& a, const GridCell& b) {
    const double la = at(a).rung_loss;
    const double lb = at(b).rung_loss;
    if (la != lb) return la < lb;
    return a < b;
  });
  const auto eta = static_cast<std::size_t>(policy_.eta);
  const std::size_t keep = (population_.size() + eta - 1) / eta;
  const std::size_t n_promote = std::min(keep, waiting.size());

  for (std::size_t i = 0; i < waiting.size(); ++i) {
    TrialState& st = at(waiting[i]);
    if (i < n_promote) {
      st.state = State::Alive;
      st.outcome = Decision::Continue;
    } else {
      st.state = State::Stopped;
      st.outcome = Decision::Stop;
    }
  }
  std::vector<GridCell> promoted(waiting.begin(), waiting.begin() + static_cast<std::ptrdiff_t>(n_promote));
  std::sort(promoted.begin(), promoted.end());
  std::vector<GridCell> ordered = waiting;
  std::sort(ordered.begin(), ordered.end());

  const int rung_epoch = halving_rungs_[rung_index_];
  const int rung = static_cast<int>(rung_index_);
  for (const auto& cell : ordered) {
    push(cell, rung_epoch, *at(cell).outcome, rung, "rung");
  }
  alive_history_.push_back(n_promote);
  population_ = std::move(promoted);
  ++rung_index_;
  if (n_promote <= target_ || rung_index_ >= halving_rungs_.size()) halving_active_ = false;

  // A promoted trial whose rung equals the budget is finished.
  for (const auto& cell : population_) {
    TrialState& st = at(cell);
    if (st.last_epoch == policy_.epoch_budget) st.state = State::Done;
  }
}

std::optional<Decision> TrialScheduler::outcome(const GridCell& cell) const {
  return at(cell).outcome;
}

int TrialScheduler::next_checkpoint(const GridCell& cell) const {
  const TrialState& st = at(cell);
  if (halving_active_ && (st.state == State::Alive || st.state == State::Waiting) &&
      std::binary_search(population_.begin(), population_.end(), cell)) {
    return halving_rungs_[rung_index_];
  }
  return policy_.epoch_budget;
}

bool TrialScheduler::is_alive(const GridCell& cell) const {
  const State s = at(cell).state;
  return s == State::Alive || s == State::Waiting || s == State::Done;
}

std::size_t TrialScheduler::n_alive() const {
  std::size_t n = 0;
  for (const auto& [cell, st] : states_) {
    if (st.state != State::Stopped) ++n;
  }
  return n;
}

double TrialScheduler::alive_fraction() const {
  return static_cast<double>(n_alive()) / static_cast<double>(trials_.size());
}

long long closed_form_budget(const std::vector<int>& rungs_used,
                             const std::vector<std::size_t>& alive_before, std::size_t survivors,
                             int epoch_budget) {
  if (rungs_used.size() != alive_before.size()) {
    throw std::invalid_argument("closed_form_budget: rung/alive size mismatch");
  }
  long long total = 0;
  int prev = 0;
  for (std::size_t k = 0; k < rungs_used.size(); ++k) {
    total += static_cast<long long>(alive_before[k]) * (rungs_used[k] - prev);
    prev = rungs_used[k];
  }
  total += static_cast<long long>(survivors) * (epoch_budget - prev);
  return total;
}

}  // namespace twin
