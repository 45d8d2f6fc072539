#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "twin/task.hpp"

namespace twin {

// Fully connected ReLU network with a softmax cross-entropy head.
// Parameters live in one flat vector: for each layer, W (out x in, row-major)
// followed by b (out).
struct Architecture {
  std::size_t input_dim = 0;
  std::vector<std::size_t> hidden;
  std::size_t n_classes = 0;

  std::vector<std::size_t> layer_sizes() const;
  std::size_t n_params() const;
  bool operator==(const Architecture&) const = default;
};

std::vector<double> init_params(const Architecture& arch, std::uint64_t seed);

struct LossAndGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

// Mean cross-entropy over the selected samples and its exact gradient.
LossAndGrad loss_and_grad(const Architecture& arch, std::span<const double> params,
                          const Dataset& data, std::span<const std::size_t> indices);

double mean_loss(const Architecture& arch, std::span<const double> params, const Dataset& data);

// Percentage of correctly classified samples, NaN when params are non-finite.
double accuracy(const Architecture& arch, std::span<const double> params, const Dataset& data);

// Logits for one input row.
std::vector<double> forward(const Architecture& arch, std::span<const double> params,
                            std::span<const double> input);

}  // namespace twin
