// twin: command-line front end.
//
//   twin run       train the grid and write every run artifact
//   twin select    recompute the selection from logged trials
//   twin baseline  SelTS / SelVS / Oracle picks
//   twin eval      compare methods against Oracle across runs
//   twin plot      SVG figures from a run directory
//
// Exit codes: 0 ok, 1 usage, 2 nothing to select / missing artifact /
// incomplete run, 3 storage failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "twin/plot.hpp"
#include "twin/runstore.hpp"
#include "twin/search.hpp"

namespace fs = std::filesystem;
using namespace twin;

namespace {

enum Exit { kOk = 0, kUsage = 1, kNoResult = 2, kStorage = 3 };

struct CliError {
  int code;
  std::string message;
};

[[noreturn]] void fail(int code, std::string message) { throw CliError{code, std::move(message)}; }

// Runs `fn` and turns library exceptions into a CliError tagged with the stage.
template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const CliError&) {
    throw;
  } catch (const NoTrainableConfiguration& e) {
    fail(kNoResult, std::string(name) + ": " + e.what());
  } catch (const StorageError& e) {
    fail(kStorage, std::string(name) + ": " + e.what());
  } catch (const SchemaError& e) {
    fail(kStorage, std::string(name) + ": " + e.what());
  } catch (const std::exception& e) {
    fail(kNoResult, std::string(name) + ": " + e.what());
  }
}

struct RunLocation {
  std::string run_id;
  std::string run_dir;

  fs::path resolve() const {
    if (!run_dir.empty()) return run_dir;
    if (run_id.empty()) fail(kUsage, "one of --run-id or --run-dir is required");
    return run_path(store_root(), run_id);
  }
};

void add_location(CLI::App* app, RunLocation& loc) {
  auto* id = app->add_option("--run-id", loc.run_id, "run name under $TWIN_STORE_ROOT/runs");
  auto* dir = app->add_option("--run-dir", loc.run_dir, "explicit run directory");
  id->excludes(dir);
}

struct QsFlags {
  std::optional<double> kernel_size;
  std::optional<double> max_dist;
  std::optional<double> ratio;

  void add(CLI::App* app) {
    app->add_option("--kernel-size", kernel_size, "Quickshift density bandwidth");
    app->add_option("--max-dist", max_dist, "Quickshift link radius");
    app->add_option("--ratio", ratio, "Quickshift value-channel weight");
  }
  bool any() const { return kernel_size || max_dist || ratio; }

  // Unset fields fall back to `base`.
  QuickshiftParams apply(QuickshiftParams base) const {
    if (kernel_size) base.kernel_size = *kernel_size;
    if (max_dist) base.max_dist = *max_dist;
    if (ratio) base.ratio = *ratio;
    return base;
  }
};

struct StrideFlags {
  std::size_t lr = 1;
  std::size_t wd = 1;
  void add(CLI::App* app) {
    app->add_option("--lr-stride", lr, "keep every k-th LR column")->check(CLI::PositiveNumber);
    app->add_option("--wd-stride", wd, "keep every k-th WD row")->check(CLI::PositiveNumber);
  }
  bool any() const { return lr != 1 || wd != 1; }
};

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

void print_selection(const Selection& s, std::size_t n_regions = 0) {
  std::cout << to_string(s.method) << ": cell (" << s.cell.row << ", " << s.cell.col << ")  lr "
            << fmt(s.lr) << "  wd " << fmt(s.wd);
  if (s.region_id) std::cout << "  region " << *s.region_id << "/" << n_regions;
  if (s.norm_at_cell) std::cout << "  norm " << fmt(*s.norm_at_cell, "%.4g");
  std::cout << "\n";
}

// Rewrites `path` only when the content changes, so re-runs leave files alone.
void write_if_changed(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (fs::exists(path, ec)) {
    try {
      if (read_text(path) == text) return;
    } catch (const StorageError&) {
    }
  }
  write_text_atomic(path, text);
}

Json read_json(const fs::path& path, const char* what) {
  std::error_code ec;
  if (!fs::exists(path, ec)) fail(kNoResult, std::string(what) + ": missing " + path.string());
  const std::string text = stage(what, [&] { return read_text(path); });
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    fail(kStorage, std::string(what) + ": " + path.string() + ": " + e.what());
  }
}

void require_run(const fs::path& dir) {
  std::error_code ec;
  if (!fs::exists(dir / "manifest.json", ec)) fail(kNoResult, "no run at " + dir.string() + " (missing manifest.json)");
}

LoadedRun load_complete(const fs::path& dir) {
  require_run(dir);
  LoadedRun run = stage("load", [&] { return load_run(dir); });
  for (const auto& w : run.warnings) std::cerr << "warning: " << w << "\n";
  const auto missing = run.missing_cells();
  const auto incomplete = run.incomplete_cells();
  if (!missing.empty() || !incomplete.empty()) {
    std::string msg = "load: run is incomplete;";
    for (const auto& c : missing) msg += " missing " + to_string(c);
    for (const auto& c : incomplete) msg += " running " + to_string(c);
    fail(kNoResult, msg);
  }
  return run;
}

// ---------------------------------------------------------------------------
// run

struct RunFlags {
  RunLocation loc;
  double lr_min = kDefaultLow, lr_max = kDefaultHigh, wd_min = kDefaultLow, wd_max = kDefaultHigh;
  std::size_t n_lr = 7, n_wd = 7;
  std::string scheduler = "fifo";
  SchedulerPolicy policy;
  TrainingSetup setup;
  std::optional<std::uint64_t> init_seed;
  std::string lr_schedule = "cosine";
  QsFlags qs;
  std::size_t jobs = 0;
};

void add_run(CLI::App& root, RunFlags& f) {
  auto* app = root.add_subcommand("run", "train the grid, then segment and select");
  add_location(app, f.loc);
  f.policy.epoch_budget = 40;
  app->add_option("--lr-min", f.lr_min)->capture_default_str();
  app->add_option("--lr-max", f.lr_max)->capture_default_str();
  app->add_option("--n-lr", f.n_lr, "learning-rate grid points")->capture_default_str();
  app->add_option("--wd-min", f.wd_min)->capture_default_str();
  app->add_option("--wd-max", f.wd_max)->capture_default_str();
  app->add_option("--n-wd", f.n_wd, "weight-decay grid points")->capture_default_str();
  app->add_option("--scheduler", f.scheduler)->check(CLI::IsMember({"fifo", "hb"}))->capture_default_str();
  app->add_option("--stop-fraction", f.policy.stop_fraction, "HB: stop halving at this alive fraction")
      ->capture_default_str();
  app->add_option("--eta", f.policy.eta, "HB halving rate")->capture_default_str();
  app->add_option("--grace", f.policy.grace_fraction, "HB first rung as a budget fraction")
      ->capture_default_str();
  app->add_option("--epochs", f.policy.epoch_budget, "epochs per trial")->capture_default_str();

  TaskSpec& t = f.setup.task;
  app->add_option("--seed", t.seed, "task seed")->capture_default_str();
  app->add_option("--init-seed", f.init_seed, "weight-init and shuffle seed (default: --seed)");
  app->add_option("--n-train", t.n_train)->capture_default_str();
  app->add_option("--n-val", t.n_val)->capture_default_str();
  app->add_option("--n-test", t.n_test)->capture_default_str();
  app->add_option("--classes", t.n_classes)->capture_default_str();
  app->add_option("--input-dim", t.input_dim)->capture_default_str();
  app->add_option("--separation", t.class_separation)->capture_default_str();
  app->add_option("--label-noise", t.label_noise)->capture_default_str();
  app->add_option("--hidden", f.setup.hidden, "hidden layer widths")->capture_default_str();
  app->add_option("--momentum", f.setup.momentum)->capture_default_str();
  app->add_option("--batch-size", f.setup.batch_size)->capture_default_str();
  app->add_option("--lr-schedule", f.lr_schedule)
      ->check(CLI::IsMember({"cosine", "piecewise", "constant"}))
      ->capture_default_str();
  f.qs.add(app);
  app->add_option("--jobs", f.jobs, "worker threads (default: all cores)");
}

RunManifest build_manifest(RunFlags& f, const fs::path& dir) {
  RunManifest m;
  try {
    m.run_id = f.loc.run_id.empty() ? dir.filename().string() : f.loc.run_id;
    m.grid = build_log_grid(f.lr_min, f.lr_max, f.n_lr, f.wd_min, f.wd_max, f.n_wd);
    m.policy = f.policy;
    m.policy.kind = parse_scheduler_kind(f.scheduler);
    m.policy.validate();
    TrainingSetup setup = f.setup;
    setup.lr_schedule = parse_lr_schedule(f.lr_schedule);
    setup.init_seed = f.init_seed.value_or(setup.task.seed);
    if (setup.hidden.empty()) throw std::invalid_argument("--hidden needs at least one width");
    setup.trainer_config(cell_params(m.grid, {0, 0}), m.policy.epoch_budget).validate();
    (void)make_synthetic_task(setup.task);
    m.training = setup;
    if (f.qs.any()) {
      m.quickshift = f.qs.apply(default_params(m.grid));
      m.quickshift->validate();
    }
  } catch (const std::exception& e) {
    fail(kUsage, e.what());
  }
  return m;
}

int cmd_run(RunFlags& f) {
  const fs::path dir = f.loc.resolve();
  const RunManifest wanted = build_manifest(f, dir);

  std::error_code ec;
  const bool exists = fs::exists(dir / "manifest.json", ec);
  RunDir run = exists ? stage("open", [&] { return RunDir::open(dir); })
                      : stage("create", [&] { return RunDir::create(dir, wanted); });
  if (exists && dump_compact(to_json(run.manifest())) != dump_compact(to_json(wanted))) {
    fail(kUsage, "run directory " + dir.string() +
                     " holds a different configuration; repeat its flags or pick a new --run-id");
  }

  if (exists && fs::exists(run.selection_path(), ec) && fs::exists(run.matrices_path(), ec)) {
    const LoadedRun loaded = stage("load", [&] { return load_run(dir); });
    if (loaded.missing_cells().empty() && loaded.incomplete_cells().empty()) {
      const Json sel = read_json(run.selection_path(), "select");
      std::cout << "run " << dir.string() << " is already complete\n";
      print_selection(selection_from_json(sel), sel.value("n_regions", std::size_t{0}));
      return kOk;
    }
  }

  const std::size_t jobs = f.jobs == 0 ? default_jobs() : f.jobs;
  const PipelineResult result = stage("train", [&] { return run_pipeline(run, jobs); });
  std::cout << "run " << dir.string() << ": " << result.matrices.n_valid() << "/"
            << wanted.grid.size() << " trainable cells, " << result.search.epochs_consumed
            << " epochs\n";
  print_selection(result.twin.selection, result.twin.segments.n_regions);
  return kOk;
}

// ---------------------------------------------------------------------------
// select

struct SelectFlags {
  RunLocation loc;
  QsFlags qs;
  StrideFlags stride;
  std::string out;
};

void add_select(CLI::App& root, SelectFlags& f) {
  auto* app = root.add_subcommand("select", "recompute the Twin selection from logged trials");
  add_location(app, f.loc);
  f.qs.add(app);
  f.stride.add(app);
  app->add_option("--out", f.out, "write selection JSON here instead of the run directory");
}

int cmd_select(SelectFlags& f) {
  const fs::path dir = f.loc.resolve();
  const LoadedRun run = load_complete(dir);
  OfflineOptions opts;
  opts.lr_stride = f.stride.lr;
  opts.wd_stride = f.stride.wd;
  if (f.qs.any()) {
    const HyperGrid grid = f.stride.any() ? slice_grid(run.manifest.grid, f.stride.lr, f.stride.wd)
                                          : run.manifest.grid;
    opts.params = f.qs.apply(resolve_params(run.manifest, grid, std::nullopt));
    try {
      opts.params->validate();
    } catch (const std::exception& e) {
      fail(kUsage, e.what());
    }
  }
  if (f.stride.any()) {
    try {
      (void)slice_grid(run.manifest.grid, f.stride.lr, f.stride.wd);
    } catch (const std::exception& e) {
      fail(kUsage, e.what());
    }
  }
  const OfflineResult res = stage("select", [&] { return select_offline(run, opts); });
  const std::string text = selection_to_json(res.grid, res.twin).dump(2) + "\n";

  stage("write", [&] {
    if (!f.out.empty()) {
      write_if_changed(f.out, text);
    } else if (!f.qs.any() && !f.stride.any()) {
      // Canonical artifacts; external runs get them here for the first time.
      RunDir rd = RunDir::open(dir);
      write_if_changed(rd.matrices_path(), matrices_to_json(res.matrices, res.surfaces).dump(2) + "\n");
      write_if_changed(rd.selection_path(), text);
    }
    return 0;
  });
  print_selection(res.twin.selection, res.twin.segments.n_regions);
  if (f.stride.any()) {
    const GridCell src = sliced_to_source(res.twin.selection.cell, f.stride.lr, f.stride.wd);
    std::cout << "  source cell (" << src.row << ", " << src.col << ")\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// baseline

struct BaselineFlags {
  RunLocation loc;
  std::string method;
  StrideFlags stride;
  bool allow_test = false;
  std::string out;
};

void add_baseline(CLI::App& root, BaselineFlags& f) {
  auto* app = root.add_subcommand("baseline", "SelTS, SelVS or Oracle selection");
  add_location(app, f.loc);
  app->add_option("--method", f.method)
      ->required()
      ->check(CLI::IsMember({"selts", "selvs", "oracle", "SelTS", "SelVS", "Oracle"}));
  f.stride.add(app);
  app->add_flag("--allow-test-metrics", f.allow_test, "permit reading test accuracy (Oracle)");
  app->add_option("--out", f.out, "write selection JSON here");
}

int cmd_baseline(BaselineFlags& f) {
  const SelectionMethod method = parse_selection_method(f.method);
  if (method == SelectionMethod::Oracle && !f.allow_test) {
    fail(kUsage, "Oracle reads test accuracy; pass --allow-test-metrics to acknowledge");
  }
  const fs::path dir = f.loc.resolve();
  const LoadedRun run = load_complete(dir);
  OfflineOptions opts;
  opts.lr_stride = f.stride.lr;
  opts.wd_stride = f.stride.wd;
  const OfflineResult res = stage("select", [&] { return select_offline(run, opts); });
  const Selection s = stage("baseline", [&] {
    return baseline_select(res.grid, res.matrices, res.surfaces, method);
  });
  if (!f.out.empty()) {
    stage("write", [&] {
      write_if_changed(f.out, selection_to_json(s).dump(2) + "\n");
      return 0;
    });
  }
  print_selection(s);
  return kOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalFlags {
  std::vector<std::string> run_dirs;
  std::vector<std::string> run_ids;
  StrideFlags stride;
  QsFlags qs;
  bool allow_test = false;
  std::string out;
};

void add_eval(CLI::App& root, EvalFlags& f) {
  auto* app = root.add_subcommand("eval", "Twin and baselines against Oracle over one or more runs");
  app->add_option("--run-dir", f.run_dirs, "run directories (repeatable)");
  app->add_option("--run-id", f.run_ids, "run names under $TWIN_STORE_ROOT/runs (repeatable)");
  f.stride.add(app);
  f.qs.add(app);
  app->add_flag("--allow-test-metrics", f.allow_test, "required: evaluation reads test accuracy");
  app->add_option("--out", f.out, "report path (default: the run's eval_report.json for one run)");
}

int cmd_eval(EvalFlags& f) {
  if (!f.allow_test) fail(kUsage, "eval reads test accuracy; pass --allow-test-metrics to acknowledge");
  std::vector<fs::path> dirs(f.run_dirs.begin(), f.run_dirs.end());
  for (const auto& id : f.run_ids) dirs.push_back(run_path(store_root(), id));
  if (dirs.empty()) fail(kUsage, "eval needs at least one --run-dir or --run-id");
  if (dirs.size() > 1 && f.out.empty()) fail(kUsage, "eval over several runs needs --out");

  std::vector<EvalConfig> configs;
  for (const auto& dir : dirs) {
    const LoadedRun run = load_complete(dir);
    OfflineOptions opts;
    opts.lr_stride = f.stride.lr;
    opts.wd_stride = f.stride.wd;
    if (f.qs.any()) {
      const HyperGrid grid = f.stride.any() ? slice_grid(run.manifest.grid, f.stride.lr, f.stride.wd)
                                            : run.manifest.grid;
      opts.params = f.qs.apply(resolve_params(run.manifest, grid, std::nullopt));
    }
    const OfflineResult res = stage("select", [&] { return select_offline(run, opts); });
    if (!res.surfaces.test_acc) fail(kNoResult, "eval: " + dir.string() + " has no test accuracy");
    EvalConfig cfg{run.manifest.run_id, {res.twin.selection}, *res.surfaces.test_acc};
    for (SelectionMethod m : {SelectionMethod::SelTS, SelectionMethod::SelVS, SelectionMethod::Oracle}) {
      if (m == SelectionMethod::SelVS && !res.surfaces.val_acc) continue;
      cfg.selections.push_back(
          stage("baseline", [&] { return baseline_select(res.grid, res.matrices, res.surfaces, m); }));
    }
    configs.push_back(std::move(cfg));
  }
  const EvalReport report = stage("eval", [&] { return evaluate(configs); });
  const fs::path out = f.out.empty() ? dirs.front() / "eval_report.json" : fs::path(f.out);
  stage("write", [&] {
    write_if_changed(out, eval_report_to_json(report).dump(2) + "\n");
    return 0;
  });

  std::cout << "config";
  for (const auto& name : report.configs) std::cout << "\t" << name;
  std::cout << "\tMAE\nOracle";
  for (double a : report.oracle_acc) std::cout << "\t" << fmt(a, "%.2f");
  std::cout << "\t-\n";
  for (const auto& m : report.methods) {
    std::cout << to_string(m.method);
    for (double a : m.test_acc) std::cout << "\t" << fmt(a, "%.2f");
    std::cout << "\t" << fmt(m.mae, "%.2f") << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// plot

struct PlotFlags {
  RunLocation loc;
  std::string target;
  std::string out;
};

void add_plot(CLI::App& root, PlotFlags& f) {
  auto* app = root.add_subcommand("plot", "render an SVG figure from a run directory");
  add_location(app, f.loc);
  app->add_option("--target", f.target)
      ->required()
      ->check(CLI::IsMember({"psi", "theta", "labels", "norm-vs-test"}));
  app->add_option("--out", f.out, "SVG path")->required();
}

IntMatrix labels_from(const Json& sel, std::size_t rows, std::size_t cols) {
  IntMatrix labels(rows, cols, -1);
  const Json& arr = sel.at("labels");
  if (!arr.is_array() || arr.size() != rows * cols) {
    throw SchemaError("selection.json: labels must have rows*cols entries");
  }
  for (std::size_t i = 0; i < arr.size(); ++i) labels[i] = arr[i].get<int>();
  return labels;
}

int cmd_plot(PlotFlags& f) {
  const fs::path dir = f.loc.resolve();
  require_run(dir);
  const RunDir run = stage("open", [&] { return RunDir::open(dir); });
  const HyperGrid& grid = run.manifest().grid;
  const auto [m, surfaces] =
      stage("plot", [&] { return matrices_from_json(read_json(run.matrices_path(), "plot")); });
  if (!m.psi.same_shape(grid.rows(), grid.cols())) fail(kStorage, "plot: matrices.json does not match the grid");

  std::optional<Json> sel;
  std::error_code ec;
  if (fs::exists(run.selection_path(), ec)) sel = read_json(run.selection_path(), "plot");
  std::optional<GridCell> selected;
  std::optional<IntMatrix> labels;
  int region = -1;
  if (sel) {
    stage("plot", [&] {
      const Selection s = selection_from_json(*sel);
      selected = s.cell;
      region = s.region_id.value_or(-1);
      labels = labels_from(*sel, grid.rows(), grid.cols());
      return 0;
    });
  }

  std::string svg;
  if (f.target == "psi") {
    Mask invalid(grid.rows(), grid.cols(), false);
    for (std::size_t i = 0; i < invalid.size(); ++i) invalid[i] = !m.valid[i];
    svg = plot::heatmap_svg(grid, m.psi, &invalid, selected, "training loss");
  } else if (f.target == "theta") {
    // Norms outside the selected region are hatched once a selection exists.
    Mask hide(grid.rows(), grid.cols(), false);
    for (std::size_t i = 0; i < hide.size(); ++i) {
      hide[i] = !m.valid[i] || (labels && (*labels)[i] != region);
    }
    svg = plot::heatmap_svg(grid, m.theta, &hide, selected, labels ? "parameter norm (selected region)" : "parameter norm");
  } else if (f.target == "labels") {
    if (!labels) fail(kNoResult, "plot: missing " + run.selection_path().string());
    svg = plot::labels_svg(grid, *labels, selected, "segmentation");
  } else {
    if (!labels) fail(kNoResult, "plot: missing " + run.selection_path().string());
    if (!surfaces.test_acc) fail(kNoResult, "plot: run has no test accuracy to plot against");
    svg = plot::norm_vs_test_svg(m.theta, *surfaces.test_acc, *labels, region, selected,
                                 "norm vs test accuracy (selected region)");
  }
  stage("write", [&] {
    write_if_changed(f.out, svg);
    return 0;
  });
  std::cout << "wrote " << f.out << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Validation-free LR x WD search"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);
  RunFlags run;
  SelectFlags select;
  BaselineFlags baseline;
  EvalFlags eval;
  PlotFlags plot;
  add_run(app, run);
  add_select(app, select);
  add_baseline(app, baseline);
  add_eval(app, eval);
  add_plot(app, plot);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    if (name == "run") return cmd_run(run);
    if (name == "select") return cmd_select(select);
    if (name == "baseline") return cmd_baseline(baseline);
    if (name == "eval") return cmd_eval(eval);
    return cmd_plot(plot);
  } catch (const CliError& e) {
    std::cerr << "twin: " << e.message << "\n";
    return e.code;
  } catch (const StorageError& e) {
    std::cerr << "twin: storage: " << e.what() << "\n";
    return kStorage;
  } catch (const std::exception& e) {
    std::cerr << "twin: " << e.what() << "\n";
    return kNoResult;
  }
}
