#pragma once

#include <compare>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

namespace twin {

// Address of one trial on the LR x WD lattice. Rows index weight decay,
// columns index learning rate.
struct GridCell {
  std::size_t row = 0;
  std::size_t col = 0;

  auto operator<=>(const GridCell&) const = default;
  bool operator==(const GridCell&) const = default;
};

std::string to_string(const GridCell& cell);

struct HyperParams {
  double lr = 0.0;
  double wd = 0.0;
};

struct AxisBounds {
  double low = 0.0;
  double high = 0.0;
  bool operator==(const AxisBounds&) const = default;
};

// Immutable log-spaced search lattice. Values are materialized once at build
// time; downstream code addresses cells by index only.
class HyperGrid {
 public:
  HyperGrid(std::vector<double> lr_values, std::vector<double> wd_values);

  const std::vector<double>& lr_values() const { return lr_values_; }
  const std::vector<double>& wd_values() const { return wd_values_; }
  AxisBounds lr_bounds() const { return {lr_values_.front(), lr_values_.back()}; }
  AxisBounds wd_bounds() const { return {wd_values_.front(), wd_values_.back()}; }

  std::size_t n_lr() const { return lr_values_.size(); }
  std::size_t n_wd() const { return wd_values_.size(); }
  std::size_t rows() const { return n_wd(); }
  std::size_t cols() const { return n_lr(); }
  std::size_t size() const { return n_lr() * n_wd(); }
  std::size_t largest_side() const { return n_lr() > n_wd() ? n_lr() : n_wd(); }

  bool contains(const GridCell& cell) const { return cell.row < n_wd() && cell.col < n_lr(); }
  std::size_t flat_index(const GridCell& cell) const { return cell.row * n_lr() + cell.col; }
  GridCell cell_at(std::size_t flat) const { return {flat / n_lr(), flat % n_lr()}; }

  // Every cell in row-major order.
  std::vector<GridCell> cells() const;

  bool operator==(const HyperGrid&) const = default;

 private:
  std::vector<double> lr_values_;
  std::vector<double> wd_values_;
};

// Defaults: both axes span [5e-5, 5e-1].
inline constexpr double kDefaultLow = 5e-5;
inline constexpr double kDefaultHigh = 5e-1;

std::vector<double> log_axis(double low, double high, std::size_t n, const char* name);

HyperGrid build_log_grid(double lr_low, double lr_high, std::size_t n_lr, double wd_low,
                         double wd_high, std::size_t n_wd);

// Square n x n grid over the default bounds.
HyperGrid default_grid(std::size_t n);

// Python-style [::stride] on each axis.
HyperGrid slice_grid(const HyperGrid& grid, std::size_t lr_stride, std::size_t wd_stride);

// Maps a cell of slice_grid(grid, lr_stride, wd_stride) back to the source grid.
GridCell sliced_to_source(const GridCell& sliced, std::size_t lr_stride, std::size_t wd_stride);

HyperParams cell_params(const HyperGrid& grid, const GridCell& cell);

// Cell whose materialized values are closest in log10 space to (lr, wd).
GridCell nearest_cell(const HyperGrid& grid, double lr, double wd);

}  // namespace twin
