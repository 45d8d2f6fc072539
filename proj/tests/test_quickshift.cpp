#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "oracles.hpp"
#include "twin/quickshift.hpp"

using namespace twin;

namespace {

std::vector<long> labels_of(const SegmentLabels& s) {
  return {s.labels.data().begin(), s.labels.data().end()};
}

// Oracle labels in ascending root order, -1 on masked cells.
std::vector<long> oracle_labels(const oracle::QsOracle& o) {
  std::set<long> roots(o.root.begin(), o.root.end());
  roots.erase(-1);
  std::vector<long> out;
  for (long r : o.root) {
    out.push_back(r < 0 ? -1 : static_cast<long>(std::distance(roots.begin(), roots.find(r))));
  }
  return out;
}

RealMatrix transpose(const RealMatrix& m) {
  RealMatrix t(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) t(c, r) = m(r, c);
  }
  return t;
}

Mask transpose(const Mask& m) {
  Mask t(m.cols(), m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) t(c, r) = m(r, c);
  }
  return t;
}

}  // namespace

TEST(DefaultParams, SquareRootRule) {
  const QuickshiftParams p = default_params(10, 10);
  EXPECT_NEAR(p.kernel_size, 3.1623, 1e-4);
  EXPECT_DOUBLE_EQ(p.max_dist, p.kernel_size);
  EXPECT_NEAR(default_params(6, 6).kernel_size, 2.4495, 1e-4);
  EXPECT_DOUBLE_EQ(default_params(4, 9).max_dist, 3.0);
  EXPECT_DOUBLE_EQ(default_params(4, 9).ratio, kValueScalePerSide * 9);
  EXPECT_EQ(default_params(default_grid(7)), default_params(7, 7));
  QuickshiftParams bad{0.0, 1.0, 1.0};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  bad = {1.0, 1.0, -1.0};
  EXPECT_THROW(bad.validate(), std::invalid_argument);
  EXPECT_NO_THROW((QuickshiftParams{10.0, 10.0, 0.0}.validate()));
}

TEST(Density, SingleCellIsOne) {
  const RealMatrix d = compute_density(RealMatrix(1, 1, 0.3), Mask(1, 1, false), 2.0, 1.0);
  EXPECT_DOUBLE_EQ(d[0], 1.0);
}

TEST(Density, TwoCellSymmetry) {
  RealMatrix v(1, 4, 0.5);
  Mask m(1, 4, true);
  m[0] = m[3] = false;  // spatial distance 3
  const double sigma = 2.0;
  const RealMatrix d = compute_density(v, m, sigma, 1.0);
  const double expected = 1.0 + std::exp(-9.0 / (2.0 * sigma * sigma));
  EXPECT_NEAR(d[0], expected, 1e-15);
  EXPECT_NEAR(d[3], expected + 3 * kDensityTieBreak, 1e-15);
  EXPECT_GT(d[3], d[0]);
  EXPECT_TRUE(std::isnan(d[1]));
}

TEST(Density, MatchesExtendedPrecisionOracle) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.3, 4.0);
  for (int t = 0; t < 20; ++t) {
    const RealMatrix v = oracle::random_matrix(rng, 5, 5);
    Mask m(5, 5, false);
    m[static_cast<std::size_t>(t)] = true;
    const double sigma = u(rng);
    const double ratio = u(rng);
    const RealMatrix d = compute_density(v, m, sigma, ratio);
    const auto o = oracle::brute_quickshift(v, m, sigma, 1.0, ratio);
    for (std::size_t i = 0; i < 25; ++i) {
      if (m[i]) {
        EXPECT_TRUE(std::isnan(d[i]));
        continue;
      }
      ASSERT_NEAR(d[i], static_cast<double>(o.density[i]), 1e-10);
    }
  }
}

TEST(LinkParents, UniformThreeByThreeRootsAtCentre) {
  const RealMatrix v(3, 3, 0.5);
  const Mask m(3, 3, false);
  const double md = std::sqrt(3.0);
  const RealMatrix d = compute_density(v, m, md, 1.0);
  const auto parent = link_parents(d, v, m, md, 1.0);
  // The centre has the most near neighbours, so it outranks every corner by
  // far more than the index tie-break.
  EXPECT_EQ(parent[4], 4);
  for (std::size_t p = 0; p < 9; ++p) {
    if (p != 4) EXPECT_NE(parent[p], static_cast<std::ptrdiff_t>(p));
  }
  const SegmentLabels s = label_segments(parent, m, 3, 3);
  EXPECT_EQ(s.n_regions, 1u);
  // Both edge midpoints next to a corner are denser and equally close, so
  // the smaller flat index wins.
  EXPECT_EQ(parent[0], 1);
  EXPECT_EQ(parent[8], 5);
}

TEST(LinkParents, MaskedRidgeSplitsTwoMinima) {
  // Two low-loss pockets (high normalized value) left and right, separated by
  // a fully masked middle column wider than max_dist.
  RealMatrix v(5, 5, 0.2);
  Mask m(5, 5, false);
  for (std::size_t r = 0; r < 5; ++r) {
    m(r, 2) = true;
    v(r, 0) = v(r, 4) = 0.9;
  }
  const QuickshiftParams p{1.5, 1.5, 1.0};
  const SegmentLabels s = quickshift(v, m, p);
  const auto o = oracle::brute_quickshift(v, m, p.kernel_size, p.max_dist, p.ratio);
  EXPECT_EQ(labels_of(s), oracle_labels(o));
  EXPECT_EQ(s.n_regions, 2u);
  for (std::size_t r = 0; r < 5; ++r) {
    EXPECT_EQ(s.labels(r, 0), 0);
    EXPECT_EQ(s.labels(r, 1), 0);
    EXPECT_EQ(s.labels(r, 2), -1);
    EXPECT_EQ(s.labels(r, 3), 1);
    EXPECT_EQ(s.labels(r, 4), 1);
  }
}

TEST(LabelSegments, AllRootsWhenLinksAreTooShort) {
  std::mt19937_64 rng(1);
  const RealMatrix v = oracle::random_matrix(rng, 4, 4);
  Mask m(4, 4, false);
  m[5] = true;
  const SegmentLabels s = quickshift(v, m, {1.0, 0.9, 1.0});
  EXPECT_EQ(s.n_regions, 15u);
  int next = 0;
  for (std::size_t i = 0; i < 16; ++i) {
    if (i == 5) {
      EXPECT_EQ(s.labels[i], -1);
      EXPECT_EQ(s.parent[i], kNoParent);
    } else {
      EXPECT_EQ(s.labels[i], next++);
    }
  }
}

TEST(LabelSegments, CycleIsAnInternalError) {
  const std::vector<std::ptrdiff_t> parent{1, 0, 2, 2};
  EXPECT_THROW(label_segments(parent, Mask(2, 2, false), 2, 2), std::logic_error);
}

TEST(Quickshift, ConstantMatrixIsOneRegion) {
  for (std::size_t n : {2, 3, 5, 7}) {
    const SegmentLabels s = quickshift(RealMatrix(n, n, 0.5), Mask(n, n, false), default_params(n, n));
    EXPECT_EQ(s.n_regions, 1u) << n;
  }
}

TEST(Quickshift, DiagonalValleySharesOneLabel) {
  const std::size_t n = 7;
  RealMatrix v(n, n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const double off = std::abs(static_cast<double>(r) - static_cast<double>(c));
      v(r, c) = std::max(0.0, 1.0 - 0.3 * off);
    }
  }
  const SegmentLabels s = quickshift(v, Mask(n, n, false), default_params(n, n));
  for (std::size_t i = 1; i < n; ++i) EXPECT_EQ(s.labels(i, i), s.labels(0, 0));
  EXPECT_NE(s.labels(0, n - 1), s.labels(0, 0));
  EXPECT_NE(s.labels(n - 1, 0), s.labels(0, 0));
}

TEST(QuickshiftProperty, ForestInvariantsAndOracle) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<std::size_t> side(2, 6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 300; ++t) {
    const std::size_t rows = side(rng);
    const std::size_t cols = side(rng);
    const RealMatrix v = oracle::random_matrix(rng, rows, cols);
    Mask m(rows, cols, false);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = u(rng) < 0.15;
    m[0] = false;
    const QuickshiftParams p{0.2 + 4.0 * u(rng), 0.2 + 4.0 * u(rng), 10.0 * u(rng)};
    const SegmentLabels s = quickshift(v, m, p);
    const RealMatrix d = compute_density(v, m, p.kernel_size, p.ratio);

    std::set<int> ids;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (m[i]) {
        ASSERT_EQ(s.labels[i], -1);
        continue;
      }
      ids.insert(s.labels[i]);
      const auto q = s.parent[i];
      if (q != static_cast<std::ptrdiff_t>(i)) {
        ASSERT_GT(d[static_cast<std::size_t>(q)], d[i]);
        ASSERT_EQ(s.labels[static_cast<std::size_t>(q)], s.labels[i]);
      }
      std::size_t cur = i;
      std::size_t steps = 0;
      while (s.parent[cur] != static_cast<std::ptrdiff_t>(cur)) {
        cur = static_cast<std::size_t>(s.parent[cur]);
        ASSERT_LE(++steps, v.size());
      }
    }
    ASSERT_EQ(ids.size(), s.n_regions);
    ASSERT_EQ(*ids.begin(), 0);
    ASSERT_EQ(*ids.rbegin(), static_cast<int>(s.n_regions) - 1);

    const auto o = oracle::brute_quickshift(v, m, p.kernel_size, p.max_dist, p.ratio);
    ASSERT_EQ(labels_of(s), oracle_labels(o)) << t;

    const SegmentLabels tr = quickshift(transpose(v), transpose(m), p);
    const auto ot = oracle::brute_quickshift(transpose(v), transpose(m), p.kernel_size, p.max_dist, p.ratio);
    ASSERT_EQ(labels_of(tr), oracle_labels(ot)) << t;

    const SegmentLabels again = quickshift(v, m, p);
    ASSERT_EQ(again.labels, s.labels);
    ASSERT_EQ(again.parent, s.parent);
  }
}
