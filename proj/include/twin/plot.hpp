#pragma once

#include <array>
#include <optional>
#include <string>

#include "twin/hypergrid.hpp"
#include "twin/matrix.hpp"

namespace twin::plot {

// 16-step viridis ramp, low to high.
inline constexpr std::array<const char*, 16> kRamp = {
    "#440154", "#481a6c", "#472f7d", "#414487", "#39568c", "#31688e", "#2a788e", "#23888e",
    "#1f988b", "#22a884", "#35b779", "#54c568", "#7ad151", "#a5db36", "#d2e21b", "#fde725"};

// Region fills, cycled by label id.
inline constexpr std::array<const char*, 8> kPalette = {
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666"};

// Compact scientific tick label: 5e-5, 2.3e-4, 1e-1.
std::string format_tick(double v);

// Ramp index for `v` on [lo, hi]; bins are equal-width, hi maps to 15.
std::size_t ramp_bin(double v, double lo, double hi);

// Heatmap over the grid (columns = LR, rows = WD, lowest WD at the bottom).
// Non-finite or masked cells are hatched; the selected cell is outlined.
std::string heatmap_svg(const HyperGrid& grid, const RealMatrix& values, const Mask* masked,
                        std::optional<GridCell> selected, const std::string& title);

// One palette colour per region; label -1 cells hatched.
std::string labels_svg(const HyperGrid& grid, const IntMatrix& labels,
                       std::optional<GridCell> selected, const std::string& title);

// Scatter of parameter norm vs test accuracy for the cells of one region.
std::string norm_vs_test_svg(const RealMatrix& theta, const RealMatrix& test_acc,
                             const IntMatrix& labels, int region_id,
                             std::optional<GridCell> selected, const std::string& title);

}  // namespace twin::plot
