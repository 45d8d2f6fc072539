#include "twin/quickshift.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace twin {

void QuickshiftParams::validate() const {
  if (!(kernel_size > 0.0) || !std::isfinite(kernel_size)) {
    throw std::invalid_argument("kernel_size must be > 0");
  }
  if (!(max_dist > 0.0) || !std::isfinite(max_dist)) {
    throw std::invalid_argument("max_dist must be > 0");
  }
  if (!(ratio >= 0.0) || !std::isfinite(ratio)) throw std::invalid_argument("ratio must be >= 0");
}

QuickshiftParams default_params(std::size_t rows, std::size_t cols) {
  const double side = static_cast<double>(rows > cols ? rows : cols);
  return {std::sqrt(side), std::sqrt(side), kValueScalePerSide * side};
}

QuickshiftParams default_params(const HyperGrid& grid) {
  return default_params(grid.rows(), grid.cols());
}

namespace {

void check_inputs(const RealMatrix& values, const Mask& mask) {
  if (!values.same_shape(mask)) throw std::invalid_argument("quickshift: values/mask shape mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!mask[i] && !std::isfinite(values[i])) {
      throw std::invalid_argument("quickshift: non-finite value on unmasked cell " +
                                  std::to_string(i));
    }
  }
}

double joint_sq_dist(const RealMatrix& values, std::size_t p, std::size_t q, double ratio) {
  const std::size_t cols = values.cols();
  const double dr = static_cast<double>(p / cols) - static_cast<double>(q / cols);
  const double dc = static_cast<double>(p % cols) - static_cast<double>(q % cols);
  const double dv = ratio * (values[p] - values[q]);
  return dr * dr + dc * dc + dv * dv;
}

}  // namespace

RealMatrix compute_density(const RealMatrix& values, const Mask& mask, double kernel_size,
                           double ratio) {
  check_inputs(values, mask);
  if (!(kernel_size > 0.0)) throw std::invalid_argument("kernel_size must be > 0");
  const double inv_two_sigma_sq = 1.0 / (2.0 * kernel_size * kernel_size);
  RealMatrix density(values.rows(), values.cols(), std::nan(""));
  for (std::size_t p = 0; p < values.size(); ++p) {
    if (mask[p]) continue;
    double d = 0.0;
    for (std::size_t q = 0; q < values.size(); ++q) {
      if (mask[q]) continue;
      d += std::exp(-joint_sq_dist(values, p, q, ratio) * inv_two_sigma_sq);
    }
    density[p] = d + kDensityTieBreak * static_cast<double>(p);
  }
  return density;
}

std::vector<std::ptrdiff_t> link_parents(const RealMatrix& density, const RealMatrix& values,
                                         const Mask& mask, double max_dist, double ratio) {
  check_inputs(values, mask);
  if (!density.same_shape(values)) throw std::invalid_argument("link_parents: density shape mismatch");
  std::vector<std::ptrdiff_t> parent(values.size(), kNoParent);
  for (std::size_t p = 0; p < values.size(); ++p) {
    if (mask[p]) continue;
    auto best = static_cast<std::ptrdiff_t>(p);
    double best_dist = 0.0;
    for (std::size_t q = 0; q < values.size(); ++q) {
      if (q == p || mask[q] || !(density[q] > density[p])) continue;
      const double dist = std::sqrt(joint_sq_dist(values, p, q, ratio));
      if (dist > max_dist) continue;
      if (best == static_cast<std::ptrdiff_t>(p) || dist < best_dist) {
        best = static_cast<std::ptrdiff_t>(q);
        best_dist = dist;
      }
    }
    parent[p] = best;
  }
  return parent;
}

SegmentLabels label_segments(const std::vector<std::ptrdiff_t>& parent, const Mask& mask,
                             std::size_t rows, std::size_t cols) {
  const std::size_t n = rows * cols;
  if (parent.size() != n || !mask.same_shape(rows, cols)) {
    throw std::invalid_argument("label_segments: shape mismatch");
  }
  SegmentLabels out{IntMatrix(rows, cols, -1), 0, parent};

  // Roots in ascending flat index get consecutive labels.
  std::vector<int> root_label(n, -1);
  for (std::size_t p = 0; p < n; ++p) {
    if (mask[p]) {
      if (parent[p] != kNoParent) throw std::logic_error("label_segments: masked cell has a parent");
      continue;
    }
    if (parent[p] < 0 || static_cast<std::size_t>(parent[p]) >= n ||
        mask[static_cast<std::size_t>(parent[p])]) {
      throw std::logic_error("label_segments: invalid parent for cell " + std::to_string(p));
    }
    if (parent[p] == static_cast<std::ptrdiff_t>(p)) {
      root_label[p] = static_cast<int>(out.n_regions++);
    }
  }

  for (std::size_t p = 0; p < n; ++p) {
    if (mask[p]) continue;
    auto cur = static_cast<std::size_t>(p);
    std::size_t steps = 0;
    while (parent[cur] != static_cast<std::ptrdiff_t>(cur)) {
      cur = static_cast<std::size_t>(parent[cur]);
      if (++steps > n) {
        throw std::logic_error("label_segments: cycle in parent map through cell " +
                               std::to_string(p));
      }
    }
    out.labels[p] = root_label[cur];
  }
  return out;
}

SegmentLabels quickshift(const RealMatrix& values, const Mask& mask,
                         const QuickshiftParams& params) {
  params.validate();
  const RealMatrix density = compute_density(values, mask, params.kernel_size, params.ratio);
  const auto parent = link_parents(density, values, mask, params.max_dist, params.ratio);
  return label_segments(parent, mask, values.rows(), values.cols());
}

}  // namespace twin
