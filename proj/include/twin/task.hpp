#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace twin {

// Row-major sample matrix plus integer labels.
struct Dataset {
  std::size_t n = 0;
  std::size_t dim = 0;
  std::vector<double> inputs;
  std::vector<int> labels;

  std::span<const double> row(std::size_t i) const { return {inputs.data() + i * dim, dim}; }
  bool empty() const { return n == 0; }
};

struct TaskSpec {
  std::uint64_t seed = 1;
  std::size_t n_train = 60;
  std::size_t n_val = 60;
  std::size_t n_test = 600;
  std::size_t n_classes = 4;
  std::size_t input_dim = 16;
  double class_separation = 3.0;
  double label_noise = 0.0;

  bool operator==(const TaskSpec&) const = default;
};

// Gaussian-blob classification problem. Class means sit on a regular simplex
// with the requested pairwise distance, randomly rotated; unit within-class
// variance. Label noise only touches the training split.
struct SyntheticTask {
  TaskSpec spec;
  Dataset train;
  Dataset val;
  Dataset test;
  std::vector<std::vector<double>> class_means;

  std::size_t n_classes() const { return spec.n_classes; }
  std::size_t input_dim() const { return spec.input_dim; }
};

SyntheticTask make_synthetic_task(const TaskSpec& spec);

}  // namespace twin
