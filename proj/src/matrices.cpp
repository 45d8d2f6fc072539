#include "twin/matrices.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace twin {

namespace {

bool same_bits(const RealMatrix& a, const RealMatrix& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  }
  return true;
}

template <typename T, typename U>
void require_same_shape(const Matrix2D<T>& a, const Matrix2D<U>& b, const char* what) {
  if (!a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

}  // namespace

std::size_t LogMatrices::n_valid() const {
  return static_cast<std::size_t>(std::count(valid.data().begin(), valid.data().end(), true));
}

bool LogMatrices::operator==(const LogMatrices& o) const {
  return same_bits(psi, o.psi) && same_bits(theta, o.theta) && valid == o.valid &&
         epochs_run == o.epochs_run;
}

double tail_mean(std::span<const double> values, std::size_t window) {
  if (values.empty()) throw std::invalid_argument("tail_mean: empty series");
  const std::size_t n = std::min(window, values.size());
  double sum = 0.0;
  for (std::size_t i = values.size() - n; i < values.size(); ++i) sum += values[i];
  return sum / static_cast<double>(n);
}

double summarize_loss(const TrialRecord& record) {
  if (record.epochs.empty()) {
    throw std::invalid_argument("summarize_loss: trial " + to_string(record.cell) +
                                " has no epochs");
  }
  std::vector<double> losses;
  losses.reserve(record.epochs.size());
  for (const auto& e : record.epochs) losses.push_back(e.train_loss);
  return tail_mean(losses, kLossAverageWindow);
}

std::optional<double> summarize_metric(const std::vector<std::optional<double>>& per_epoch,
                                       SchedulerKind kind) {
  if (per_epoch.empty()) return std::nullopt;
  if (kind == SchedulerKind::Fifo) return per_epoch.back();
  std::vector<double> tail;
  const std::size_t n = std::min(kLossAverageWindow, per_epoch.size());
  for (std::size_t i = per_epoch.size() - n; i < per_epoch.size(); ++i) {
    if (!per_epoch[i]) return std::nullopt;
    tail.push_back(*per_epoch[i]);
  }
  return tail_mean(tail, kLossAverageWindow);
}

namespace {

std::vector<const TrialRecord*> index_records(std::span<const TrialRecord> records,
                                              const HyperGrid& grid) {
  std::vector<const TrialRecord*> by_cell(grid.size(), nullptr);
  std::vector<std::string> problems;
  for (const auto& rec : records) {
    if (!grid.contains(rec.cell)) {
      problems.push_back("out-of-grid " + to_string(rec.cell));
      continue;
    }
    auto& slot = by_cell[grid.flat_index(rec.cell)];
    if (slot != nullptr) {
      problems.push_back("duplicate " + to_string(rec.cell));
      continue;
    }
    if (rec.epochs.empty()) {
      problems.push_back("empty " + to_string(rec.cell));
      continue;
    }
    slot = &rec;
  }
  for (std::size_t i = 0; i < by_cell.size(); ++i) {
    if (by_cell[i] == nullptr && problems.size() < 64) {
      bool reported = false;
      for (const auto& p : problems) reported |= p.ends_with(to_string(grid.cell_at(i)));
      if (!reported) problems.push_back("missing " + to_string(grid.cell_at(i)));
    }
  }
  if (!problems.empty()) {
    std::string msg = "assemble: trial records do not cover the grid exactly:";
    for (const auto& p : problems) msg += " " + p;
    throw std::invalid_argument(msg);
  }
  return by_cell;
}

}  // namespace

LogMatrices assemble(std::span<const TrialRecord> records, const HyperGrid& grid) {
  const auto by_cell = index_records(records, grid);
  LogMatrices m{RealMatrix(grid.rows(), grid.cols()), RealMatrix(grid.rows(), grid.cols()),
                Mask(grid.rows(), grid.cols(), false), IntMatrix(grid.rows(), grid.cols(), 0)};
  for (std::size_t i = 0; i < by_cell.size(); ++i) {
    const TrialRecord& rec = *by_cell[i];
    m.psi[i] = summarize_loss(rec);
    m.theta[i] = rec.epochs.back().param_norm;
    m.valid[i] = std::isfinite(m.psi[i]) && std::isfinite(m.theta[i]);
    m.epochs_run[i] = rec.epochs_run();
  }
  return m;
}

MetricSurfaces assemble_surfaces(std::span<const TrialRecord> records, const HyperGrid& grid,
                                 SchedulerKind kind) {
  const auto by_cell = index_records(records, grid);
  const double nan = std::nan("");
  RealMatrix val(grid.rows(), grid.cols(), nan);
  RealMatrix test(grid.rows(), grid.cols(), nan);
  bool any_val = false;
  bool any_test = false;
  for (std::size_t i = 0; i < by_cell.size(); ++i) {
    std::vector<std::optional<double>> v;
    std::vector<std::optional<double>> t;
    for (const auto& e : by_cell[i]->epochs) {
      v.push_back(e.val_acc);
      t.push_back(e.test_acc);
    }
    if (auto s = summarize_metric(v, kind)) {
      val[i] = *s;
      any_val = true;
    }
    if (auto s = summarize_metric(t, kind)) {
      test[i] = *s;
      any_test = true;
    }
  }
  MetricSurfaces out;
  if (any_val) out.val_acc = std::move(val);
  if (any_test) out.test_acc = std::move(test);
  return out;
}

Mask zscore_outlier_mask(const RealMatrix& psi, const Mask& valid) {
  require_same_shape(psi, valid, "zscore_outlier_mask");
  Mask out(psi.rows(), psi.cols(), true);
  std::size_t n = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    if (valid[i] && std::isfinite(psi[i])) {
      ++n;
      sum += psi[i];
    }
  }
  if (n == 0) throw NoTrainableConfiguration();
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    if (valid[i] && std::isfinite(psi[i])) ss += (psi[i] - mean) * (psi[i] - mean);
  }
  const double sd = std::sqrt(ss / static_cast<double>(n));
  for (std::size_t i = 0; i < psi.size(); ++i) {
    if (!(valid[i] && std::isfinite(psi[i]))) continue;
    out[i] = sd > 0.0 && std::abs(psi[i] - mean) / sd > kOutlierZ;
  }
  return out;
}

NormalizedLoss normalize_invert(const RealMatrix& psi, const Mask& outlier) {
  require_same_shape(psi, outlier, "normalize_invert");
  double lo = 0.0;
  double hi = 0.0;
  bool any = false;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    if (outlier[i]) continue;
    if (!std::isfinite(psi[i])) throw std::invalid_argument("normalize_invert: non-finite unmasked cell");
    if (!any) {
      lo = hi = psi[i];
      any = true;
    }
    lo = std::min(lo, psi[i]);
    hi = std::max(hi, psi[i]);
  }
  if (!any) throw NoTrainableConfiguration();
  NormalizedLoss out{RealMatrix(psi.rows(), psi.cols(), std::nan("")), outlier};
  const double span = hi - lo;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    if (outlier[i]) continue;
    out.values[i] = span > 0.0 ? 1.0 - (psi[i] - lo) / span : 0.5;
  }
  return out;
}

template <typename T>
static Matrix2D<T> slice_any(const Matrix2D<T>& m, std::size_t lr_stride, std::size_t wd_stride) {
  if (lr_stride < 1 || wd_stride < 1) throw std::invalid_argument("strides must be >= 1");
  if (lr_stride >= m.cols() || wd_stride >= m.rows()) {
    throw std::invalid_argument("stride leaves fewer than 2 points on an axis");
  }
  const std::size_t rows = (m.rows() + wd_stride - 1) / wd_stride;
  const std::size_t cols = (m.cols() + lr_stride - 1) / lr_stride;
  Matrix2D<T> out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = m(r * wd_stride, c * lr_stride);
  }
  return out;
}

RealMatrix slice_matrix(const RealMatrix& m, std::size_t lr_stride, std::size_t wd_stride) {
  return slice_any(m, lr_stride, wd_stride);
}

LogMatrices slice_matrices(const LogMatrices& m, std::size_t lr_stride, std::size_t wd_stride) {
  return {slice_any(m.psi, lr_stride, wd_stride), slice_any(m.theta, lr_stride, wd_stride),
          slice_any(m.valid, lr_stride, wd_stride), slice_any(m.epochs_run, lr_stride, wd_stride)};
}

}  // namespace twin
