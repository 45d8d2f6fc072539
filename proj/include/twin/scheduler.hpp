#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "twin/hypergrid.hpp"

namespace twin {

enum class SchedulerKind { Fifo, Hyperband };

std::string to_string(SchedulerKind k);
SchedulerKind parse_scheduler_kind(const std::string& s);

struct SchedulerPolicy {
  SchedulerKind kind = SchedulerKind::Fifo;
  double stop_fraction = 0.25;   // X in HB_X%
  int eta = 2;                   // halving rate
  double grace_fraction = 0.05;  // first rung as a fraction of the budget
  int epoch_budget = 100;

  void validate() const;
  bool operator==(const SchedulerPolicy&) const = default;
};

// Resource ladder r_0 < r_1 < ... <= T with r_0 = max(1, round(grace * T)) and
// r_{k+1} = min(T, eta * r_k). The final entry is always T.
std::vector<int> rung_ladder(const SchedulerPolicy& policy);

enum class Decision { Continue, Stop, Pending };

std::string to_string(Decision d);

struct DecisionRecord {
  GridCell cell;
  int epoch = 0;
  Decision decision = Decision::Continue;
  int rung = -1;          // rung index, -1 when the decision is not a rung decision
  std::size_t alive = 0;  // alive count after the decision was applied
  std::string reason;     // "rung", "budget", "diverged"

  bool operator==(const DecisionRecord&) const = default;
};

// Single logical decision authority for one search. Halving is synchronous:
// a trial reporting at a rung gets Pending until every trial of the rung's
// population has reported, then the rung resolves for all of them at once.
class TrialScheduler {
 public:
  TrialScheduler(SchedulerPolicy policy, std::vector<GridCell> trials);

  // Report the train loss after `epoch_completed` epochs (1-based count).
  Decision decide(const GridCell& cell, int epoch_completed, double train_loss);

  // Resolved outcome for a cell that last received Pending, if any.
  std::optional<Decision> outcome(const GridCell& cell) const;

  // Epoch count at which `cell` must next report to receive a non-trivial
  // decision (the next rung or the budget).
  int next_checkpoint(const GridCell& cell) const;

  bool is_alive(const GridCell& cell) const;
  std::size_t n_trials() const { return trials_.size(); }
  std::size_t n_alive() const;
  double alive_fraction() const;
  bool halving_active() const { return halving_active_; }
  std::size_t survivor_target() const { return target_; }

  const SchedulerPolicy& policy() const { return policy_; }
  // Rung epochs where halving may happen (ladder without the final budget entry).
  const std::vector<int>& halving_rungs() const { return halving_rungs_; }
  // Alive counts: initial count followed by the count after each resolved halving.
  const std::vector<std::size_t>& alive_history() const { return alive_history_; }
  const std::vector<DecisionRecord>& log() const { return log_; }

 private:
  enum class State { Alive, Waiting, Stopped, Done };
  struct TrialState {
    State state = State::Alive;
    int last_epoch = 0;
    double rung_loss = 0.0;
    bool diverged = false;
    std::optional<Decision> outcome;
  };

  TrialState& at(const GridCell& cell);
  const TrialState& at(const GridCell& cell) const;
  void try_resolve_rung();
  void push(const GridCell& cell, int epoch, Decision d, int rung, const char* reason);

  SchedulerPolicy policy_;
  std::vector<GridCell> trials_;
  std::map<GridCell, TrialState> states_;
  std::vector<int> halving_rungs_;
  std::size_t target_ = 0;
  bool halving_active_ = false;
  std::size_t rung_index_ = 0;
  // Members of the population competing at the current rung.
  std::vector<GridCell> population_;
  std::vector<std::size_t> alive_history_;
  std::vector<DecisionRecord> log_;
};

// Epochs consumed under the closed form
//   sum_k alive_k * (r_k - r_{k-1}) + survivors * (T - r_last)
// given the alive count before each executed halving rung.
long long closed_form_budget(const std::vector<int>& rungs_used,
                             const std::vector<std::size_t>& alive_before, std::size_t survivors,
                             int epoch_budget);

}  // namespace twin
