#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <random>

#include "oracles.hpp"
#include "twin/scheduler.hpp"

using namespace twin;

namespace {

std::vector<GridCell> square(std::size_t n) {
  std::vector<GridCell> cells;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) cells.push_back({r, c});
  }
  return cells;
}

SchedulerPolicy hb(double x, int budget = 100) {
  SchedulerPolicy p;
  p.kind = SchedulerKind::Hyperband;
  p.stop_fraction = x;
  p.epoch_budget = budget;
  return p;
}

using LossFn = std::function<double(const GridCell&, int)>;

struct Replay {
  std::map<GridCell, int> epochs;
  long long total = 0;
};

// Drives the scheduler the way the search loop does: every alive trial
// trains to its next checkpoint, reporting each epoch in row-major order;
// pending rungs are resolved once everybody has reported.
Replay drive(TrialScheduler& s, const std::vector<GridCell>& cells, const LossFn& loss) {
  Replay out;
  std::map<GridCell, bool> finished;
  for (int guard = 0; guard < 10000; ++guard) {
    std::vector<GridCell> active;
    for (const auto& c : cells) {
      if (!finished[c] && s.is_alive(c)) active.push_back(c);
    }
    if (active.empty()) return out;
    std::vector<GridCell> pending;
    for (const auto& c : active) {
      const int target = s.next_checkpoint(c);
      int& done = out.epochs[c];
      while (done < target) {
        ++done;
        ++out.total;
        const Decision d = s.decide(c, done, loss(c, done));
        if (d == Decision::Pending) {
          pending.push_back(c);
          break;
        }
        if (d == Decision::Stop) {
          finished[c] = true;
          break;
        }
      }
    }
    for (const auto& c : pending) {
      const auto o = s.outcome(c);
      if (!o || *o == Decision::Pending) throw std::logic_error("unresolved rung");
      if (*o == Decision::Stop) finished[c] = true;
    }
  }
  throw std::logic_error("driver did not terminate");
}

LossFn random_losses(std::uint64_t seed) {
  auto table = std::make_shared<std::map<std::pair<GridCell, int>, double>>();
  auto rng = std::make_shared<std::mt19937_64>(seed);
  return [table, rng](const GridCell& c, int e) {
    auto [it, fresh] = table->emplace(std::make_pair(c, e), 0.0);
    if (fresh) it->second = std::uniform_real_distribution<double>(0.0, 10.0)(*rng);
    return it->second;
  };
}

}  // namespace

TEST(RungLadder, PaperDefaults) {
  EXPECT_EQ(rung_ladder(hb(0.25)), (std::vector<int>{5, 10, 20, 40, 80, 100}));
  EXPECT_EQ(rung_ladder(hb(0.25, 20)).front(), 1);
  SchedulerPolicy fifo;
  fifo.epoch_budget = 100;
  EXPECT_EQ(rung_ladder(fifo), (std::vector<int>{100}));
}

TEST(SchedulerPolicy, Validation) {
  SchedulerPolicy p = hb(0.25);
  EXPECT_NO_THROW(p.validate());
  p.eta = 1;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = hb(0.0);
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = hb(1.5);
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = hb(0.25);
  p.grace_fraction = 1.0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = hb(0.25, 0);
  EXPECT_THROW(p.validate(), std::invalid_argument);
  EXPECT_THROW(TrialScheduler(hb(0.25), {}), std::invalid_argument);
}

TEST(Fifo, NeverStopsBeforeBudget) {
  SchedulerPolicy p;
  p.epoch_budget = 100;
  TrialScheduler s(p, square(10));
  EXPECT_EQ(s.next_checkpoint({3, 3}), 100);
  for (int e = 1; e < 100; ++e) ASSERT_EQ(s.decide({3, 3}, e, 1.0), Decision::Continue);
  EXPECT_DOUBLE_EQ(s.alive_fraction(), 1.0);
  EXPECT_EQ(s.decide({3, 3}, 100, 1.0), Decision::Stop);
  EXPECT_DOUBLE_EQ(s.alive_fraction(), 1.0);
  EXPECT_THROW(s.decide({3, 3}, 100, 1.0), std::logic_error);
  ASSERT_EQ(s.log().size(), 1u);
  EXPECT_EQ(s.log()[0].reason, "budget");
}

TEST(Fifo, ConsumesFullBudget) {
  SchedulerPolicy p;
  p.epoch_budget = 30;
  const auto cells = square(6);
  TrialScheduler s(p, cells);
  const Replay r = drive(s, cells, random_losses(1));
  EXPECT_EQ(r.total, 36 * 30);
}

TEST(Hyperband, Hb25On100Trials) {
  const auto cells = square(10);
  TrialScheduler s(hb(0.25), cells);
  EXPECT_DOUBLE_EQ(s.alive_fraction(), 1.0);
  EXPECT_EQ(s.next_checkpoint({0, 0}), 5);
  EXPECT_EQ(s.halving_rungs(), (std::vector<int>{5, 10, 20, 40, 80}));
  EXPECT_EQ(s.survivor_target(), 25u);
  const Replay r = drive(s, cells, random_losses(7));
  EXPECT_EQ(s.alive_history(), (std::vector<std::size_t>{100, 50, 25}));
  EXPECT_DOUBLE_EQ(s.alive_fraction(), 0.25);
  EXPECT_EQ(r.total, closed_form_budget({5, 10}, {100, 50}, 25, 100));
  EXPECT_EQ(r.total, 3000);
  std::size_t full = 0;
  for (const auto& [cell, e] : r.epochs) full += e == 100;
  EXPECT_EQ(full, 25u);
}

TEST(Hyperband, Hb12On36Trials) {
  const auto cells = square(6);
  TrialScheduler s(hb(0.12), cells);
  EXPECT_EQ(s.survivor_target(), 5u);
  drive(s, cells, random_losses(3));
  EXPECT_EQ(s.alive_history(), (std::vector<std::size_t>{36, 18, 9, 5}));
  EXPECT_EQ(s.n_alive(), 5u);
}

TEST(Hyperband, TiesPromoteLowerCellIndex) {
  const auto cells = square(4);
  TrialScheduler s(hb(0.5, 40), cells);
  drive(s, cells, [](const GridCell&, int) { return 1.0; });
  ASSERT_EQ(s.alive_history(), (std::vector<std::size_t>{16, 8}));
  for (std::size_t i = 0; i < cells.size(); ++i) EXPECT_EQ(s.is_alive(cells[i]), i < 8) << i;
}

TEST(Hyperband, DivergedTrialCountsInPopulationAndRanksWorst) {
  const auto cells = square(3);  // 9 trials, target ceil(0.25 * 9) = 3
  TrialScheduler s(hb(0.25, 40), cells);
  ASSERT_EQ(s.halving_rungs().front(), 2);
  const LossFn loss = [](const GridCell& c, int e) {
    if (c == GridCell{0, 0} && e == 1) return std::numeric_limits<double>::quiet_NaN();
    if (c == GridCell{2, 2} && e == 2) return std::numeric_limits<double>::infinity();
    return 1.0 + static_cast<double>(c.row * 3 + c.col);
  };
  drive(s, cells, loss);
  // Rung 0 keeps ceil(9 / 2) = 5 of the 7 finite reporters.
  EXPECT_EQ(s.alive_history(), (std::vector<std::size_t>{9, 5, 3}));
  EXPECT_FALSE(s.is_alive({0, 0}));
  EXPECT_FALSE(s.is_alive({2, 2}));
  std::size_t diverged = 0;
  for (const auto& d : s.log()) {
    if (d.reason == "diverged") {
      ++diverged;
      EXPECT_EQ(d.decision, Decision::Stop);
      EXPECT_EQ(d.rung, -1);
    }
  }
  EXPECT_EQ(diverged, 2u);
  EXPECT_THROW(s.decide({0, 0}, 2, 1.0), std::logic_error);
}

TEST(Hyperband, ContractViolations) {
  const auto cells = square(2);
  TrialScheduler s(hb(0.25, 40), cells);
  EXPECT_THROW(s.decide({5, 5}, 1, 1.0), std::out_of_range);
  EXPECT_EQ(s.decide({0, 0}, 1, 1.0), Decision::Continue);
  EXPECT_THROW(s.decide({0, 0}, 1, 1.0), std::logic_error);  // replayed epoch
  EXPECT_THROW(s.decide({0, 0}, 3, 1.0), std::logic_error);  // skipped the rung at 2
  EXPECT_EQ(s.decide({0, 1}, 1, 1.0), Decision::Continue);
  EXPECT_EQ(s.decide({0, 1}, 2, 1.0), Decision::Pending);
  EXPECT_THROW(s.decide({0, 1}, 3, 1.0), std::logic_error);  // still waiting
}

TEST(HyperbandProperty, MatchesRoundingOracle) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::size_t> n(1, 64);
  std::uniform_real_distribution<double> x(0.01, 1.0);
  std::uniform_int_distribution<int> eta(2, 4);
  std::uniform_int_distribution<int> budget(1, 120);
  std::uniform_real_distribution<double> grace(0.01, 0.5);
  for (int trial = 0; trial < 300; ++trial) {
    SchedulerPolicy p = hb(x(rng), budget(rng));
    p.eta = eta(rng);
    p.grace_fraction = grace(rng);
    std::vector<GridCell> cells;
    const std::size_t count = n(rng);
    for (std::size_t i = 0; i < count; ++i) cells.push_back({i / 8, i % 8});
    TrialScheduler s(p, cells);
    const Replay r = drive(s, cells, random_losses(static_cast<std::uint64_t>(trial)));
    const auto plan = oracle::halving_plan(count, p.stop_fraction, p.eta, p.grace_fraction, p.epoch_budget);
    ASSERT_EQ(s.alive_history(), plan.alive) << trial;
    ASSERT_EQ(r.total, plan.epochs) << trial;
    std::vector<std::size_t> before(plan.alive.begin(), plan.alive.end() - 1);
    ASSERT_EQ(r.total, closed_form_budget(plan.rungs_used, before, plan.alive.back(), p.epoch_budget));
  }
}

TEST(HyperbandProperty, StoppedNeverBeatPromoted) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto cells = square(7);
    const LossFn loss = random_losses(seed);
    TrialScheduler s(hb(0.1, 60), cells);
    drive(s, cells, loss);
    std::map<int, std::pair<double, double>> bounds;  // rung -> (max promoted, min stopped)
    for (const auto& d : s.log()) {
      if (d.rung < 0) continue;
      auto& b = bounds.try_emplace(d.rung, -1e300, 1e300).first->second;
      const double l = loss(d.cell, d.epoch);
      if (d.decision == Decision::Continue) b.first = std::max(b.first, l);
      else b.second = std::min(b.second, l);
    }
    for (const auto& [rung, b] : bounds) ASSERT_LE(b.first, b.second) << seed << " rung " << rung;
  }
}

TEST(HyperbandProperty, ReplayIsDeterministic) {
  const auto cells = square(6);
  TrialScheduler a(hb(0.2), cells);
  TrialScheduler b(hb(0.2), cells);
  drive(a, cells, random_losses(5));
  drive(b, cells, random_losses(5));
  EXPECT_EQ(a.log(), b.log());
}

TEST(ClosedForm, Arithmetic) {
  EXPECT_EQ(closed_form_budget({}, {}, 10, 30), 300);
  EXPECT_EQ(closed_form_budget({5, 10, 20}, {36, 18, 9}, 5, 100), 36 * 5 + 18 * 5 + 9 * 10 + 5 * 80);
  EXPECT_THROW(closed_form_budget({5}, {}, 1, 10), std::invalid_argument);
}
