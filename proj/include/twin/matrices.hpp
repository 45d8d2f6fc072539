#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "twin/hypergrid.hpp"
#include "twin/matrix.hpp"
#include "twin/scheduler.hpp"
#include "twin/trainer.hpp"

namespace twin {

// Raised when every cell is invalid or masked.
class NoTrainableConfiguration : public std::invalid_argument {
 public:
  NoTrainableConfiguration() : std::invalid_argument("no trainable configuration") {}
};

inline constexpr std::size_t kLossAverageWindow = 5;
inline constexpr double kOutlierZ = 2.0;

// Training-side log matrices. Carries no validation or test information.
struct LogMatrices {
  RealMatrix psi;    // summarized train loss
  RealMatrix theta;  // parameter norm at the last logged epoch
  Mask valid;        // false wherever psi or theta is non-finite
  IntMatrix epochs_run;

  std::size_t rows() const { return psi.rows(); }
  std::size_t cols() const { return psi.cols(); }
  std::size_t n_valid() const;
  bool operator==(const LogMatrices& o) const;
};

// Held-out accuracy surfaces, only consumed by baselines and evaluation.
struct MetricSurfaces {
  std::optional<RealMatrix> val_acc;
  std::optional<RealMatrix> test_acc;
};

struct NormalizedLoss {
  RealMatrix values;  // NaN on masked cells
  Mask outlier;       // true = excluded (outlier or invalid)
};

// Mean of the last min(5, epochs) train losses.
double summarize_loss(const TrialRecord& record);

// Mean of the last min(window, n) entries.
double tail_mean(std::span<const double> values, std::size_t window);

// Held-out metric summary: last epoch under FIFO, last-5 mean under early stopping.
std::optional<double> summarize_metric(const std::vector<std::optional<double>>& per_epoch,
                                       SchedulerKind kind);

LogMatrices assemble(std::span<const TrialRecord> records, const HyperGrid& grid);

MetricSurfaces assemble_surfaces(std::span<const TrialRecord> records, const HyperGrid& grid,
                                 SchedulerKind kind);

// |z| > 2 over valid cells (population std), unioned with invalid cells.
Mask zscore_outlier_mask(const RealMatrix& psi, const Mask& valid);

// 1 - minmax(psi) over non-masked cells; all-equal input maps to 0.5.
NormalizedLoss normalize_invert(const RealMatrix& psi, const Mask& outlier);

// Restricts matrices recorded on `grid` to the cells kept by slice_grid.
LogMatrices slice_matrices(const LogMatrices& m, std::size_t lr_stride, std::size_t wd_stride);
RealMatrix slice_matrix(const RealMatrix& m, std::size_t lr_stride, std::size_t wd_stride);

}  // namespace twin
