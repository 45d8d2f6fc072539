#include "twin/task.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace twin {

namespace {

using Rng = std::mt19937_64;

Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id)};
  return Rng(seq);
}

// k points in R^(k-1) with unit pairwise distance, centred at the origin.
std::vector<std::vector<double>> unit_simplex(std::size_t k) {
  // Centred standard basis vectors in R^k have pairwise distance sqrt(2) and
  // span a (k-1)-dim subspace; express them in an orthonormal basis of it.
  std::vector<std::vector<double>> pts(k, std::vector<double>(k, -1.0 / static_cast<double>(k)));
  for (std::size_t i = 0; i < k; ++i) pts[i][i] += 1.0;

  std::vector<std::vector<double>> basis;
  for (std::size_t i = 0; i < k && basis.size() + 1 < k; ++i) {
    std::vector<double> v = pts[i];
    for (const auto& b : basis) {
      const double d = std::inner_product(v.begin(), v.end(), b.begin(), 0.0);
      for (std::size_t j = 0; j < k; ++j) v[j] -= d * b[j];
    }
    const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    if (norm < 1e-9) continue;
    for (double& x : v) x /= norm;
    basis.push_back(std::move(v));
  }

  std::vector<std::vector<double>> out(k, std::vector<double>(basis.size()));
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < basis.size(); ++j) {
      out[i][j] = std::inner_product(pts[i].begin(), pts[i].end(), basis[j].begin(), 0.0) /
                  std::sqrt(2.0);
    }
  }
  return out;
}

// Haar-ish random orthogonal matrix via Gram-Schmidt on a Gaussian matrix.
std::vector<std::vector<double>> random_rotation(std::size_t d, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> q;
  while (q.size() < d) {
    std::vector<double> v(d);
    for (double& x : v) x = normal(rng);
    for (const auto& b : q) {
      const double p = std::inner_product(v.begin(), v.end(), b.begin(), 0.0);
      for (std::size_t j = 0; j < d; ++j) v[j] -= p * b[j];
    }
    const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    if (norm < 1e-8) continue;
    for (double& x : v) x /= norm;
    q.push_back(std::move(v));
  }
  return q;
}

Dataset sample_split(std::size_t n, const std::vector<std::vector<double>>& means, Rng& rng) {
  const std::size_t k = means.size();
  const std::size_t d = means.front().size();
  Dataset ds;
  ds.n = n;
  ds.dim = d;
  ds.inputs.resize(n * d);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.labels[i] = static_cast<int>(i % k);
  std::shuffle(ds.labels.begin(), ds.labels.end(), rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& mu = means[static_cast<std::size_t>(ds.labels[i])];
    for (std::size_t j = 0; j < d; ++j) ds.inputs[i * d + j] = mu[j] + normal(rng);
  }
  return ds;
}

}  // namespace

SyntheticTask make_synthetic_task(const TaskSpec& spec) {
  if (spec.n_classes < 2) throw std::invalid_argument("n_classes must be >= 2");
  if (spec.input_dim < 1) throw std::invalid_argument("input_dim must be >= 1");
  if (spec.n_train < spec.n_classes) throw std::invalid_argument("n_train must be >= n_classes");
  if (!(spec.class_separation > 0.0) || !std::isfinite(spec.class_separation)) {
    throw std::invalid_argument("class_separation must be > 0");
  }
  if (!(spec.label_noise >= 0.0 && spec.label_noise < 1.0)) {
    throw std::invalid_argument("label_noise must be in [0, 1)");
  }
  if (spec.n_classes - 1 > spec.input_dim) {
    throw std::invalid_argument("cannot place " + std::to_string(spec.n_classes) +
                                " equidistant class means in " + std::to_string(spec.input_dim) +
                                " dimensions (need input_dim >= n_classes - 1)");
  }

  SyntheticTask task;
  task.spec = spec;

  Rng geometry = stream(spec.seed, 0);
  const auto simplex = unit_simplex(spec.n_classes);
  const auto rot = random_rotation(spec.input_dim, geometry);
  task.class_means.assign(spec.n_classes, std::vector<double>(spec.input_dim, 0.0));
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    for (std::size_t j = 0; j < simplex[c].size(); ++j) {
      const double coord = spec.class_separation * simplex[c][j];
      for (std::size_t i = 0; i < spec.input_dim; ++i) task.class_means[c][i] += coord * rot[j][i];
    }
  }

  Rng train_rng = stream(spec.seed, 1);
  Rng val_rng = stream(spec.seed, 2);
  Rng test_rng = stream(spec.seed, 3);
  task.train = sample_split(spec.n_train, task.class_means, train_rng);
  if (spec.n_val > 0) task.val = sample_split(spec.n_val, task.class_means, val_rng);
  if (spec.n_test > 0) task.test = sample_split(spec.n_test, task.class_means, test_rng);

  const auto n_noisy = static_cast<std::size_t>(
      std::llround(spec.label_noise * static_cast<double>(spec.n_train)));
  if (n_noisy > 0) {
    Rng noise_rng = stream(spec.seed, 4);
    std::vector<std::size_t> idx(spec.n_train);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), noise_rng);
    std::uniform_int_distribution<int> cls(0, static_cast<int>(spec.n_classes) - 1);
    for (std::size_t i = 0; i < n_noisy; ++i) task.train.labels[idx[i]] = cls(noise_rng);
  }
  return task;
}

}  // namespace twin
