#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "twin/hypergrid.hpp"
#include "twin/matrices.hpp"
#include "twin/quickshift.hpp"

namespace twin {

enum class SelectionMethod { Twin, SelTS, SelVS, Oracle };

std::string to_string(SelectionMethod m);
SelectionMethod parse_selection_method(const std::string& s);

struct Selection {
  SelectionMethod method = SelectionMethod::Twin;
  GridCell cell;
  double lr = 0.0;
  double wd = 0.0;
  // Twin provenance.
  std::optional<int> region_id;
  std::optional<double> region_mean;
  std::optional<double> norm_at_cell;
};

// Everything Twin computed on the way to its pick.
struct TwinResult {
  Selection selection;
  Mask outlier;
  NormalizedLoss normalized;
  SegmentLabels segments;
  std::vector<double> region_means;
  QuickshiftParams params;
};

// Mean normalized-inverted loss per region id.
std::vector<double> region_stats(const NormalizedLoss& norm_loss, const SegmentLabels& labels);

// Validation-free selection. Only training-side matrices are accepted.
TwinResult twin_select(const HyperGrid& grid, const LogMatrices& matrices,
                       const QuickshiftParams& params);

// SelTS: lowest psi. SelVS: best validation accuracy. Oracle: best test accuracy.
Selection baseline_select(const HyperGrid& grid, const LogMatrices& matrices,
                          const MetricSurfaces& surfaces, SelectionMethod method);

// One dataset/model configuration for evaluation.
struct EvalConfig {
  std::string name;
  std::vector<Selection> selections;  // must include an Oracle pick
  RealMatrix test_acc;
};

struct MethodReport {
  SelectionMethod method = SelectionMethod::Twin;
  std::vector<double> test_acc;  // per config, of the method's pick
  std::vector<double> abs_error;  // per config, vs Oracle
  double mae = 0.0;
};

struct EvalReport {
  std::vector<std::string> configs;
  std::vector<double> oracle_acc;
  std::vector<MethodReport> methods;

  const MethodReport* find(SelectionMethod m) const;
};

EvalReport evaluate(std::span<const EvalConfig> configs);

}  // namespace twin
