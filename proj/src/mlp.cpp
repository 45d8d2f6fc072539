#include "twin/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace twin {

std::vector<std::size_t> Architecture::layer_sizes() const {
  std::vector<std::size_t> sizes;
  sizes.push_back(input_dim);
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(n_classes);
  return sizes;
}

std::size_t Architecture::n_params() const {
  const auto sizes = layer_sizes();
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += sizes[l + 1] * sizes[l] + sizes[l + 1];
  return n;
}

namespace {

void check_arch(const Architecture& arch) {
  if (arch.input_dim == 0 || arch.n_classes < 2) {
    throw std::invalid_argument("architecture needs input_dim >= 1 and n_classes >= 2");
  }
  for (std::size_t h : arch.hidden) {
    if (h == 0) throw std::invalid_argument("hidden layer width must be >= 1");
  }
}

// Activations of every layer for a batch; acts[0] is the input copy and
// acts.back() holds the logits.
struct BatchForward {
  std::vector<std::vector<double>> acts;
};

BatchForward run_forward(const Architecture& arch, std::span<const double> params,
                         const Dataset& data, std::span<const std::size_t> indices) {
  const auto sizes = arch.layer_sizes();
  const std::size_t batch = indices.size();
  BatchForward fw;
  fw.acts.resize(sizes.size());
  fw.acts[0].resize(batch * sizes[0]);
  for (std::size_t n = 0; n < batch; ++n) {
    const auto row = data.row(indices[n]);
    std::copy(row.begin(), row.end(), fw.acts[0].begin() + static_cast<std::ptrdiff_t>(n * sizes[0]));
  }

  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const std::size_t in = sizes[l];
    const std::size_t out = sizes[l + 1];
    const double* w = params.data() + offset;
    const double* b = w + out * in;
    offset += out * in + out;
    const bool relu = l + 2 < sizes.size();
    const auto& a = fw.acts[l];
    auto& z = fw.acts[l + 1];
    z.resize(batch * out);
    for (std::size_t n = 0; n < batch; ++n) {
      const double* an = a.data() + n * in;
      for (std::size_t o = 0; o < out; ++o) {
        const double* wo = w + o * in;
        double s = b[o];
        for (std::size_t i = 0; i < in; ++i) s += wo[i] * an[i];
        z[n * out + o] = relu ? std::max(s, 0.0) : s;
      }
    }
  }
  return fw;
}

// Softmax probabilities in place; returns summed cross-entropy in the
// log-sum-exp form so large logit gaps stay finite. Non-finite logits give NaN.
double softmax_xent(std::vector<double>& logits, std::size_t k, const Dataset& data,
                    std::span<const std::size_t> indices) {
  double total = 0.0;
  for (std::size_t n = 0; n < indices.size(); ++n) {
    double* z = logits.data() + n * k;
    const auto y = static_cast<std::size_t>(data.labels[indices[n]]);
    const double zmax = *std::max_element(z, z + k);
    const double zy = z[y] - zmax;
    double denom = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      z[c] = std::exp(z[c] - zmax);
      denom += z[c];
    }
    for (std::size_t c = 0; c < k; ++c) z[c] /= denom;
    total += std::log(denom) - zy;
  }
  return total;
}

std::vector<std::size_t> all_indices(const Dataset& data) {
  std::vector<std::size_t> idx(data.n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

}  // namespace

std::vector<double> init_params(const Architecture& arch, std::uint64_t seed) {
  check_arch(arch);
  const auto sizes = arch.layer_sizes();
  std::vector<double> params(arch.n_params(), 0.0);
  std::mt19937_64 rng(seed);
  std::size_t offset = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const std::size_t in = sizes[l];
    const std::size_t out = sizes[l + 1];
    // He initialization for ReLU layers; biases start at zero.
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(in)));
    for (std::size_t i = 0; i < out * in; ++i) params[offset + i] = normal(rng);
    offset += out * in + out;
  }
  return params;
}

LossAndGrad loss_and_grad(const Architecture& arch, std::span<const double> params,
                          const Dataset& data, std::span<const std::size_t> indices) {
  check_arch(arch);
  if (params.size() != arch.n_params()) throw std::invalid_argument("parameter size mismatch");
  if (indices.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
  const auto sizes = arch.layer_sizes();
  const std::size_t batch = indices.size();
  const std::size_t k = arch.n_classes;
  const double inv_batch = 1.0 / static_cast<double>(batch);

  BatchForward fw = run_forward(arch, params, data, indices);
  std::vector<double> delta = fw.acts.back();
  LossAndGrad out;
  out.loss = softmax_xent(delta, k, data, indices) * inv_batch;
  for (std::size_t n = 0; n < batch; ++n) {
    delta[n * k + static_cast<std::size_t>(data.labels[indices[n]])] -= 1.0;
  }
  for (double& d : delta) d *= inv_batch;

  out.grad.assign(params.size(), 0.0);
  std::vector<std::size_t> offsets(sizes.size() - 1);
  for (std::size_t l = 0, off = 0; l + 1 < sizes.size(); ++l) {
    offsets[l] = off;
    off += sizes[l + 1] * sizes[l] + sizes[l + 1];
  }

  for (std::size_t l = sizes.size() - 1; l-- > 0;) {
    const std::size_t in = sizes[l];
    const std::size_t out_w = sizes[l + 1];
    const double* w = params.data() + offsets[l];
    double* gw = out.grad.data() + offsets[l];
    double* gb = gw + out_w * in;
    const auto& a = fw.acts[l];
    for (std::size_t n = 0; n < batch; ++n) {
      const double* an = a.data() + n * in;
      const double* dn = delta.data() + n * out_w;
      for (std::size_t o = 0; o < out_w; ++o) {
        const double d = dn[o];
        gb[o] += d;
        if (d == 0.0) continue;
        double* gwo = gw + o * in;
        for (std::size_t i = 0; i < in; ++i) gwo[i] += d * an[i];
      }
    }
    if (l == 0) break;
    std::vector<double> prev(batch * in, 0.0);
    for (std::size_t n = 0; n < batch; ++n) {
      const double* dn = delta.data() + n * out_w;
      double* pn = prev.data() + n * in;
      for (std::size_t o = 0; o < out_w; ++o) {
        const double d = dn[o];
        if (d == 0.0) continue;
        const double* wo = w + o * in;
        for (std::size_t i = 0; i < in; ++i) pn[i] += wo[i] * d;
      }
      // ReLU derivative: acts[l] holds post-activation values.
      const double* an = a.data() + n * in;
      for (std::size_t i = 0; i < in; ++i) {
        if (!(an[i] > 0.0)) pn[i] = 0.0;
      }
    }
    delta = std::move(prev);
  }
  return out;
}

double mean_loss(const Architecture& arch, std::span<const double> params, const Dataset& data) {
  check_arch(arch);
  if (data.empty()) throw std::invalid_argument("mean_loss: empty dataset");
  const auto idx = all_indices(data);
  BatchForward fw = run_forward(arch, params, data, idx);
  return softmax_xent(fw.acts.back(), arch.n_classes, data, idx) / static_cast<double>(data.n);
}

double accuracy(const Architecture& arch, std::span<const double> params, const Dataset& data) {
  check_arch(arch);
  if (data.empty()) throw std::invalid_argument("accuracy: empty dataset");
  for (double p : params) {
    if (!std::isfinite(p)) return std::nan("");
  }
  const auto idx = all_indices(data);
  BatchForward fw = run_forward(arch, params, data, idx);
  const std::size_t k = arch.n_classes;
  std::size_t correct = 0;
  for (std::size_t n = 0; n < data.n; ++n) {
    const double* z = fw.acts.back().data() + n * k;
    const auto pred = static_cast<int>(std::max_element(z, z + k) - z);
    if (pred == data.labels[n]) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(data.n);
}

std::vector<double> forward(const Architecture& arch, std::span<const double> params,
                            std::span<const double> input) {
  check_arch(arch);
  if (input.size() != arch.input_dim) throw std::invalid_argument("forward: input size mismatch");
  Dataset one;
  one.n = 1;
  one.dim = arch.input_dim;
  one.inputs.assign(input.begin(), input.end());
  one.labels = {0};
  const std::size_t idx[1] = {0};
  return run_forward(arch, params, one, idx).acts.back();
}

}  // namespace twin
