#include "twin/hypergrid.hpp"

#include <cmath>
#include <stdexcept>

namespace twin {

namespace {

void check_axis(const std::vector<double>& values, const char* name) {
  if (values.size() < 2) {
    throw std::invalid_argument(std::string(name) + ": axis needs at least 2 values");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i]) || values[i] <= 0.0) {
      throw std::invalid_argument(std::string(name) + ": values must be finite and positive");
    }
    if (i > 0 && !(values[i] > values[i - 1])) {
      throw std::invalid_argument(std::string(name) + ": values must be strictly increasing");
    }
  }
  const double step = std::log10(values[1]) - std::log10(values[0]);
  for (std::size_t i = 1; i + 1 < values.size(); ++i) {
    const double s = std::log10(values[i + 1]) - std::log10(values[i]);
    if (std::abs(s - step) > 1e-12 * std::abs(step) + 1e-14) {
      throw std::invalid_argument(std::string(name) + ": values are not equally spaced in log10");
    }
  }
}

}  // namespace

std::string to_string(const GridCell& cell) {
  return "(" + std::to_string(cell.row) + "," + std::to_string(cell.col) + ")";
}

HyperGrid::HyperGrid(std::vector<double> lr_values, std::vector<double> wd_values)
    : lr_values_(std::move(lr_values)), wd_values_(std::move(wd_values)) {
  check_axis(lr_values_, "lr");
  check_axis(wd_values_, "wd");
}

std::vector<GridCell> HyperGrid::cells() const {
  std::vector<GridCell> out;
  out.reserve(size());
  for (std::size_t r = 0; r < n_wd(); ++r) {
    for (std::size_t c = 0; c < n_lr(); ++c) out.push_back({r, c});
  }
  return out;
}

std::vector<double> log_axis(double low, double high, std::size_t n, const char* name) {
  const std::string prefix(name);
  if (!(std::isfinite(low) && low > 0.0)) {
    throw std::invalid_argument(prefix + "_low must be finite and > 0");
  }
  if (!(std::isfinite(high) && high > 0.0)) {
    throw std::invalid_argument(prefix + "_high must be finite and > 0");
  }
  if (!(low < high)) {
    throw std::invalid_argument(prefix + "_low must be < " + prefix + "_high");
  }
  if (n < 2) {
    throw std::invalid_argument("n_" + prefix + " must be >= 2");
  }
  const double lo = std::log10(low);
  const double step = (std::log10(high) - lo) / static_cast<double>(n - 1);
  std::vector<double> values(n);
  for (std::size_t i = 0; i < n; ++i) {
    values[i] = std::pow(10.0, lo + step * static_cast<double>(i));
  }
  values.front() = low;
  values.back() = high;
  return values;
}

HyperGrid build_log_grid(double lr_low, double lr_high, std::size_t n_lr, double wd_low,
                         double wd_high, std::size_t n_wd) {
  return HyperGrid(log_axis(lr_low, lr_high, n_lr, "lr"), log_axis(wd_low, wd_high, n_wd, "wd"));
}

HyperGrid default_grid(std::size_t n) {
  return build_log_grid(kDefaultLow, kDefaultHigh, n, kDefaultLow, kDefaultHigh, n);
}

namespace {

std::vector<double> stride_axis(const std::vector<double>& values, std::size_t stride,
                                const char* name) {
  if (stride < 1) {
    throw std::invalid_argument(std::string(name) + "_stride must be >= 1");
  }
  if (stride >= values.size()) {
    throw std::invalid_argument(std::string(name) + "_stride " + std::to_string(stride) +
                                " leaves fewer than 2 points on an axis of length " +
                                std::to_string(values.size()));
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < values.size(); i += stride) out.push_back(values[i]);
  return out;
}

}  // namespace

HyperGrid slice_grid(const HyperGrid& grid, std::size_t lr_stride, std::size_t wd_stride) {
  return HyperGrid(stride_axis(grid.lr_values(), lr_stride, "lr"),
                   stride_axis(grid.wd_values(), wd_stride, "wd"));
}

GridCell sliced_to_source(const GridCell& sliced, std::size_t lr_stride, std::size_t wd_stride) {
  return {sliced.row * wd_stride, sliced.col * lr_stride};
}

HyperParams cell_params(const HyperGrid& grid, const GridCell& cell) {
  if (!grid.contains(cell)) {
    throw std::out_of_range("cell " + to_string(cell) + " outside " +
                            std::to_string(grid.n_wd()) + "x" + std::to_string(grid.n_lr()) +
                            " grid");
  }
  return {grid.lr_values()[cell.col], grid.wd_values()[cell.row]};
}

namespace {

std::size_t nearest_index(const std::vector<double>& values, double v) {
  const double target = std::log10(v);
  std::size_t best = 0;
  double best_d = std::abs(std::log10(values[0]) - target);
  for (std::size_t i = 1; i < values.size(); ++i) {
    const double d = std::abs(std::log10(values[i]) - target);
    if (d < best_d) {
      best = i;
      best_d = d;
    }
  }
  return best;
}

}  // namespace

GridCell nearest_cell(const HyperGrid& grid, double lr, double wd) {
  if (!(lr > 0.0) || !(wd > 0.0)) {
    throw std::invalid_argument("nearest_cell: lr and wd must be > 0");
  }
  return {nearest_index(grid.wd_values(), wd), nearest_index(grid.lr_values(), lr)};
}

}  // namespace twin
