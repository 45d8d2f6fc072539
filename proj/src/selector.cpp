#include "twin/selector.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace twin {

std::string to_string(SelectionMethod m) {
  switch (m) {
    case SelectionMethod::Twin: return "Twin";
    case SelectionMethod::SelTS: return "SelTS";
    case SelectionMethod::SelVS: return "SelVS";
    case SelectionMethod::Oracle: return "Oracle";
  }
  return "Twin";
}

SelectionMethod parse_selection_method(const std::string& s) {
  if (s == "Twin" || s == "twin") return SelectionMethod::Twin;
  if (s == "SelTS" || s == "selts") return SelectionMethod::SelTS;
  if (s == "SelVS" || s == "selvs") return SelectionMethod::SelVS;
  if (s == "Oracle" || s == "oracle") return SelectionMethod::Oracle;
  throw std::invalid_argument("unknown selection method '" + s + "'");
}

std::vector<double> region_stats(const NormalizedLoss& norm_loss, const SegmentLabels& labels) {
  if (!norm_loss.values.same_shape(labels.labels)) {
    throw std::invalid_argument("region_stats: shape mismatch");
  }
  if (labels.n_regions == 0) throw std::invalid_argument("region_stats: no regions");
  std::vector<double> sum(labels.n_regions, 0.0);
  std::vector<std::size_t> count(labels.n_regions, 0);
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    const int id = labels.labels[i];
    if (id < 0) continue;
    if (norm_loss.outlier[i]) throw std::invalid_argument("region_stats: labelled cell is masked");
    sum[static_cast<std::size_t>(id)] += norm_loss.values[i];
    ++count[static_cast<std::size_t>(id)];
  }
  std::vector<double> means(labels.n_regions);
  for (std::size_t r = 0; r < means.size(); ++r) {
    if (count[r] == 0) throw std::logic_error("region_stats: empty region " + std::to_string(r));
    means[r] = sum[r] / static_cast<double>(count[r]);
  }
  return means;
}

namespace {

Selection make_selection(const HyperGrid& grid, SelectionMethod method, std::size_t flat) {
  Selection s;
  s.method = method;
  s.cell = grid.cell_at(flat);
  const HyperParams hp = cell_params(grid, s.cell);
  s.lr = hp.lr;
  s.wd = hp.wd;
  return s;
}

void check_shape(const HyperGrid& grid, const RealMatrix& m, const char* what) {
  if (!m.same_shape(grid.rows(), grid.cols())) {
    throw std::invalid_argument(std::string(what) + " does not match the grid shape");
  }
}

}  // namespace

TwinResult twin_select(const HyperGrid& grid, const LogMatrices& matrices,
                       const QuickshiftParams& params) {
  check_shape(grid, matrices.psi, "psi");
  check_shape(grid, matrices.theta, "theta");
  if (matrices.n_valid() == 0) throw NoTrainableConfiguration();

  TwinResult out;
  out.params = params;
  out.outlier = zscore_outlier_mask(matrices.psi, matrices.valid);
  out.normalized = normalize_invert(matrices.psi, out.outlier);
  out.segments = quickshift(out.normalized.values, out.outlier, params);
  out.region_means = region_stats(out.normalized, out.segments);

  std::size_t best_region = 0;
  for (std::size_t r = 1; r < out.region_means.size(); ++r) {
    if (out.region_means[r] > out.region_means[best_region]) best_region = r;
  }

  // Row-major scan keeps the lexicographic (row, col) tie-break.
  std::size_t best_cell = std::numeric_limits<std::size_t>::max();
  for (std::size_t i = 0; i < matrices.theta.size(); ++i) {
    if (out.segments.labels[i] != static_cast<int>(best_region)) continue;
    if (best_cell == std::numeric_limits<std::size_t>::max() ||
        matrices.theta[i] < matrices.theta[best_cell]) {
      best_cell = i;
    }
  }

  out.selection = make_selection(grid, SelectionMethod::Twin, best_cell);
  out.selection.region_id = static_cast<int>(best_region);
  out.selection.region_mean = out.region_means[best_region];
  out.selection.norm_at_cell = matrices.theta[best_cell];
  return out;
}

Selection baseline_select(const HyperGrid& grid, const LogMatrices& matrices,
                          const MetricSurfaces& surfaces, SelectionMethod method) {
  check_shape(grid, matrices.psi, "psi");
  const RealMatrix* surface = nullptr;
  bool maximize = true;
  switch (method) {
    case SelectionMethod::SelTS:
      surface = &matrices.psi;
      maximize = false;
      break;
    case SelectionMethod::SelVS:
      if (!surfaces.val_acc) throw std::invalid_argument("SelVS requires a validation accuracy surface");
      surface = &*surfaces.val_acc;
      break;
    case SelectionMethod::Oracle:
      if (!surfaces.test_acc) throw std::invalid_argument("Oracle requires a test accuracy surface");
      surface = &*surfaces.test_acc;
      break;
    case SelectionMethod::Twin:
      throw std::invalid_argument("baseline_select: Twin is not a baseline; use twin_select");
  }
  check_shape(grid, *surface, "metric surface");

  std::size_t best = std::numeric_limits<std::size_t>::max();
  for (std::size_t i = 0; i < surface->size(); ++i) {
    const double v = (*surface)[i];
    if (!std::isfinite(v)) continue;
    if (method == SelectionMethod::SelTS && !matrices.valid[i]) continue;
    if (best == std::numeric_limits<std::size_t>::max() ||
        (maximize ? v > (*surface)[best] : v < (*surface)[best])) {
      best = i;
    }
  }
  if (best == std::numeric_limits<std::size_t>::max()) {
    throw std::invalid_argument(to_string(method) + ": no finite cell to select");
  }
  return make_selection(grid, method, best);
}

const MethodReport* EvalReport::find(SelectionMethod m) const {
  for (const auto& r : methods) {
    if (r.method == m) return &r;
  }
  return nullptr;
}

EvalReport evaluate(std::span<const EvalConfig> configs) {
  EvalReport report;
  for (const auto& cfg : configs) {
    const Selection* oracle = nullptr;
    for (const auto& s : cfg.selections) {
      if (s.method == SelectionMethod::Oracle) oracle = &s;
    }
    if (oracle == nullptr) {
      throw std::invalid_argument("evaluate: config '" + cfg.name + "' has no Oracle selection");
    }
    const double oracle_acc = cfg.test_acc(oracle->cell.row, oracle->cell.col);
    report.configs.push_back(cfg.name);
    report.oracle_acc.push_back(oracle_acc);
    for (const auto& s : cfg.selections) {
      if (s.method == SelectionMethod::Oracle) continue;
      MethodReport* mr = nullptr;
      for (auto& r : report.methods) {
        if (r.method == s.method) mr = &r;
      }
      if (mr == nullptr) {
        report.methods.push_back({s.method, {}, {}, 0.0});
        mr = &report.methods.back();
      }
      const double acc = cfg.test_acc(s.cell.row, s.cell.col);
      mr->test_acc.push_back(acc);
      mr->abs_error.push_back(std::abs(acc - oracle_acc));
    }
  }
  for (auto& r : report.methods) {
    if (r.abs_error.size() != configs.size()) {
      throw std::invalid_argument("evaluate: method " + to_string(r.method) +
                                  " is missing from some configs");
    }
    double sum = 0.0;
    for (double e : r.abs_error) sum += e;
    r.mae = r.abs_error.empty() ? 0.0 : sum / static_cast<double>(r.abs_error.size());
  }
  return report;
}

}  // namespace twin
