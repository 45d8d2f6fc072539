#include <gtest/gtest.h>

#include <cmath>
#include <regex>
#include <set>

#include "twin/plot.hpp"

using namespace twin;

namespace {

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

std::vector<std::string> fills(const std::string& svg, const std::string& cls) {
  std::vector<std::string> out;
  const std::regex re("<rect class=\"" + cls + "\"[^>]*fill=\"([^\"]+)\"");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator(); ++it) {
    out.push_back((*it)[1]);
  }
  return out;
}

}  // namespace

TEST(Ticks, Formatting) {
  EXPECT_EQ(plot::format_tick(5e-5), "5e-5");
  EXPECT_EQ(plot::format_tick(5e-1), "5e-1");
  EXPECT_EQ(plot::format_tick(2.3e-4), "2.3e-4");
  EXPECT_EQ(plot::format_tick(0.099999), "1e-1");
  EXPECT_EQ(plot::format_tick(0.0), "0");
}

TEST(Ramp, Bins) {
  EXPECT_EQ(plot::ramp_bin(0.0, 0.0, 1.0), 0u);
  EXPECT_EQ(plot::ramp_bin(1.0, 0.0, 1.0), 15u);
  EXPECT_EQ(plot::ramp_bin(0.5, 0.0, 1.0), 8u);
  EXPECT_EQ(plot::ramp_bin(3.0, 3.0, 3.0), 8u);
}

TEST(Heatmap, FiveByFive) {
  const HyperGrid grid = default_grid(5);
  RealMatrix v(5, 5);
  for (std::size_t i = 0; i < 25; ++i) v[i] = static_cast<double>(i);
  const std::string svg = plot::heatmap_svg(grid, v, nullptr, GridCell{1, 2}, "psi");
  EXPECT_EQ(count(svg, "<rect class=\"cell\""), 25u);
  EXPECT_EQ(count(svg, "class=\"xtick\""), 5u);
  EXPECT_EQ(count(svg, "class=\"ytick\""), 5u);
  EXPECT_NE(svg.find(">5e-5</text>"), std::string::npos);
  EXPECT_NE(svg.find(">5e-1</text>"), std::string::npos);
  EXPECT_EQ(count(svg, "class=\"selected\""), 1u);
  const auto f = fills(svg, "cell");
  EXPECT_EQ(f.front(), plot::kRamp.front());
  EXPECT_EQ(f.back(), plot::kRamp.back());
  EXPECT_EQ(svg, plot::heatmap_svg(grid, v, nullptr, GridCell{1, 2}, "psi"));
}

TEST(Heatmap, MaskedAndNonFiniteCellsAreHatched) {
  const HyperGrid grid = default_grid(3);
  RealMatrix v(3, 3, 1.0);
  v[4] = std::nan("");
  Mask m(3, 3, false);
  m[0] = true;
  const std::string svg = plot::heatmap_svg(grid, v, &m, std::nullopt, "theta");
  EXPECT_EQ(count(svg, "<rect class=\"masked\""), 2u);
  EXPECT_EQ(count(svg, "<rect class=\"cell\""), 7u);
  EXPECT_EQ(count(svg, "class=\"selected\""), 0u);
  EXPECT_THROW(plot::heatmap_svg(default_grid(4), v, nullptr, std::nullopt, ""), std::invalid_argument);
}

TEST(Labels, DistinctFillsPerRegion) {
  const HyperGrid grid = default_grid(2);
  const IntMatrix labels(2, 2, std::vector<int>{0, 1, 2, -1});
  const std::string svg = plot::labels_svg(grid, labels, GridCell{0, 0}, "regions");
  const auto f = fills(svg, "cell");
  ASSERT_EQ(f.size(), 3u);
  EXPECT_EQ(std::set<std::string>(f.begin(), f.end()).size(), 3u);
  EXPECT_EQ(count(svg, "<rect class=\"masked\""), 1u);
}

TEST(NormVsTest, OnlyRegionCellsArePlotted) {
  const RealMatrix theta(2, 2, std::vector<double>{1, 2, 3, 4});
  const RealMatrix acc(2, 2, std::vector<double>{50, 60, 70, 80});
  const IntMatrix labels(2, 2, std::vector<int>{0, 1, 1, -1});
  const std::string svg = plot::norm_vs_test_svg(theta, acc, labels, 1, GridCell{1, 0}, "region 1");
  EXPECT_EQ(count(svg, "<circle class=\"point\""), 2u);
  EXPECT_NE(svg.find("data-row=\"0\" data-col=\"1\""), std::string::npos);
  EXPECT_EQ(count(svg, "fill=\"#ff0000\""), 1u);
  EXPECT_EQ(svg, plot::norm_vs_test_svg(theta, acc, labels, 1, GridCell{1, 0}, "region 1"));
}
