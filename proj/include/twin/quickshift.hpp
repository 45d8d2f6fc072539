#pragma once

#include <cstddef>
#include <vector>

#include "twin/hypergrid.hpp"
#include "twin/matrix.hpp"

namespace twin {

struct QuickshiftParams {
  double kernel_size = 1.0;  // Gaussian bandwidth of the density estimate
  double max_dist = 1.0;     // longest allowed parent link
  double ratio = 1.0;        // weight of the value channel in the joint distance

  void validate() const;
  bool operator==(const QuickshiftParams&) const = default;
};

// Value-channel weight per cell of the largest side. The normalized loss spans
// [0, 1] over the whole grid, so its per-cell change shrinks as the grid gets
// finer; scaling by the side keeps value and position on a comparable footing.
inline constexpr double kValueScalePerSide = 3.0;

// kernel_size = max_dist = sqrt(largest side), ratio = kValueScalePerSide * largest side.
QuickshiftParams default_params(std::size_t rows, std::size_t cols);
QuickshiftParams default_params(const HyperGrid& grid);

// Added to the density of cell p as kDensityTieBreak * flat_index(p) so that
// plateaus are totally ordered.
inline constexpr double kDensityTieBreak = 1e-12;

inline constexpr std::ptrdiff_t kNoParent = -1;

struct SegmentLabels {
  IntMatrix labels;                   // -1 on masked cells
  std::size_t n_regions = 0;
  std::vector<std::ptrdiff_t> parent;  // flat index; self for roots, kNoParent for masked cells
};

// Exact Parzen density over all non-masked cells (NaN on masked cells),
// already perturbed by the flat-index tie-break.
RealMatrix compute_density(const RealMatrix& values, const Mask& mask, double kernel_size,
                           double ratio);

// parent[p] = nearest non-masked q with higher density within max_dist; ties
// in distance go to the smaller flat index. Roots point to themselves.
std::vector<std::ptrdiff_t> link_parents(const RealMatrix& density, const RealMatrix& values,
                                         const Mask& mask, double max_dist, double ratio);

// Trees of the parent forest become regions, numbered by ascending root index.
SegmentLabels label_segments(const std::vector<std::ptrdiff_t>& parent, const Mask& mask,
                             std::size_t rows, std::size_t cols);

SegmentLabels quickshift(const RealMatrix& values, const Mask& mask,
                         const QuickshiftParams& params);

}  // namespace twin
