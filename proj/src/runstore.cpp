#include "twin/runstore.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace twin {

namespace fs = std::filesystem;

Architecture TrainingSetup::architecture() const {
  return {task.input_dim, hidden, task.n_classes};
}

TrainerConfig TrainingSetup::trainer_config(const HyperParams& hp, int epochs) const {
  TrainerConfig cfg;
  cfg.lr = hp.lr;
  cfg.wd = hp.wd;
  cfg.momentum = momentum;
  cfg.epochs = epochs;
  cfg.batch_size = batch_size;
  cfg.lr_schedule = lr_schedule;
  cfg.init_seed = init_seed;
  return cfg;
}

// ---------------------------------------------------------------------------
// JSON encoding

Json encode_real(double v) {
  if (std::isnan(v)) return "NaN";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  return v;
}

double decode_real(const Json& j, const std::string& field) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "NaN") return std::numeric_limits<double>::quiet_NaN();
    if (s == "Inf") return std::numeric_limits<double>::infinity();
    if (s == "-Inf") return -std::numeric_limits<double>::infinity();
  }
  throw SchemaError("field '" + field + "': expected a number or \"NaN\"/\"Inf\"/\"-Inf\"");
}

namespace {

const Json& require(const Json& j, const char* field) {
  if (!j.is_object()) throw SchemaError("expected a JSON object");
  auto it = j.find(field);
  if (it == j.end()) throw SchemaError("missing field '" + std::string(field) + "'");
  return *it;
}

template <typename T>
T get_as(const Json& j, const char* field) {
  const Json& v = require(j, field);
  try {
    if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_integer() || v.get<long long>() < 0) throw SchemaError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw SchemaError("");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw SchemaError("");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw SchemaError("");
    }
    return v.get<T>();
  } catch (const std::exception&) {
    throw SchemaError("field '" + std::string(field) + "' has the wrong type");
  }
}

double get_real(const Json& j, const char* field) { return decode_real(require(j, field), field); }

Json real_array(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(encode_real(x));
  return a;
}

std::vector<double> real_vector(const Json& j, const char* field) {
  const Json& a = require(j, field);
  if (!a.is_array()) throw SchemaError("field '" + std::string(field) + "' must be an array");
  std::vector<double> out;
  out.reserve(a.size());
  for (const auto& x : a) out.push_back(decode_real(x, field));
  return out;
}

RealMatrix real_matrix(const Json& j, const char* field, std::size_t rows, std::size_t cols) {
  auto v = real_vector(j, field);
  if (v.size() != rows * cols) {
    throw SchemaError("field '" + std::string(field) + "' has " + std::to_string(v.size()) +
                      " entries, expected " + std::to_string(rows * cols));
  }
  return RealMatrix(rows, cols, std::move(v));
}

Json params_json(const QuickshiftParams& p) {
  Json j;
  j["kernel_size"] = p.kernel_size;
  j["max_dist"] = p.max_dist;
  j["ratio"] = p.ratio;
  return j;
}

QuickshiftParams params_from_json(const Json& j) {
  QuickshiftParams p{get_real(j, "kernel_size"), get_real(j, "max_dist"), get_real(j, "ratio")};
  p.validate();
  return p;
}

Json cell_json(const GridCell& c) {
  Json j;
  j["row"] = c.row;
  j["col"] = c.col;
  return j;
}

GridCell cell_from_json(const Json& j) {
  return {get_as<std::size_t>(j, "row"), get_as<std::size_t>(j, "col")};
}

}  // namespace

Json to_json(const RunManifest& m) {
  Json j;
  j["run_id"] = m.run_id;
  j["tool_version"] = m.tool_version;
  Json g;
  g["lr_bounds"] = {m.grid.lr_bounds().low, m.grid.lr_bounds().high};
  g["wd_bounds"] = {m.grid.wd_bounds().low, m.grid.wd_bounds().high};
  g["n_lr"] = m.grid.n_lr();
  g["n_wd"] = m.grid.n_wd();
  g["lr_values"] = m.grid.lr_values();
  g["wd_values"] = m.grid.wd_values();
  j["grid"] = g;
  Json s;
  s["kind"] = to_string(m.policy.kind);
  s["stop_fraction"] = m.policy.stop_fraction;
  s["eta"] = m.policy.eta;
  s["grace_fraction"] = m.policy.grace_fraction;
  s["epoch_budget"] = m.policy.epoch_budget;
  j["scheduler"] = s;
  if (m.training) {
    const TrainingSetup& t = *m.training;
    Json task;
    task["seed"] = t.task.seed;
    task["n_train"] = t.task.n_train;
    task["n_val"] = t.task.n_val;
    task["n_test"] = t.task.n_test;
    task["n_classes"] = t.task.n_classes;
    task["input_dim"] = t.task.input_dim;
    task["class_separation"] = t.task.class_separation;
    task["label_noise"] = t.task.label_noise;
    Json tr;
    tr["task"] = task;
    tr["hidden"] = t.hidden;
    tr["momentum"] = t.momentum;
    tr["batch_size"] = t.batch_size;
    tr["lr_schedule"] = to_string(t.lr_schedule);
    tr["init_seed"] = t.init_seed;
    j["trainer"] = tr;
  } else {
    j["trainer"] = "external";
  }
  if (m.quickshift) j["quickshift"] = params_json(*m.quickshift);
  return j;
}

RunManifest manifest_from_json(const Json& j) {
  RunManifest m;
  m.run_id = get_as<std::string>(j, "run_id");
  if (j.contains("tool_version")) m.tool_version = get_as<std::string>(j, "tool_version");

  const Json& g = require(j, "grid");
  try {
    if (g.contains("lr_values") && g.contains("wd_values")) {
      m.grid = HyperGrid(real_vector(g, "lr_values"), real_vector(g, "wd_values"));
    } else {
      const auto lr = real_vector(g, "lr_bounds");
      const auto wd = real_vector(g, "wd_bounds");
      if (lr.size() != 2 || wd.size() != 2) throw SchemaError("grid bounds must have 2 entries");
      m.grid = build_log_grid(lr[0], lr[1], get_as<std::size_t>(g, "n_lr"), wd[0], wd[1],
                              get_as<std::size_t>(g, "n_wd"));
    }
  } catch (const SchemaError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("grid: ") + e.what());
  }

  const Json& s = require(j, "scheduler");
  m.policy.kind = parse_scheduler_kind(get_as<std::string>(s, "kind"));
  m.policy.epoch_budget = get_as<int>(s, "epoch_budget");
  if (s.contains("stop_fraction")) m.policy.stop_fraction = get_real(s, "stop_fraction");
  if (s.contains("eta")) m.policy.eta = get_as<int>(s, "eta");
  if (s.contains("grace_fraction")) m.policy.grace_fraction = get_real(s, "grace_fraction");
  try {
    m.policy.validate();
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("scheduler: ") + e.what());
  }

  const Json& tr = require(j, "trainer");
  if (tr.is_string()) {
    if (tr.get<std::string>() != "external") throw SchemaError("trainer must be an object or \"external\"");
  } else {
    TrainingSetup t;
    const Json& task = require(tr, "task");
    t.task.seed = get_as<std::uint64_t>(task, "seed");
    t.task.n_train = get_as<std::size_t>(task, "n_train");
    t.task.n_val = get_as<std::size_t>(task, "n_val");
    t.task.n_test = get_as<std::size_t>(task, "n_test");
    t.task.n_classes = get_as<std::size_t>(task, "n_classes");
    t.task.input_dim = get_as<std::size_t>(task, "input_dim");
    t.task.class_separation = get_real(task, "class_separation");
    t.task.label_noise = get_real(task, "label_noise");
    t.hidden = require(tr, "hidden").get<std::vector<std::size_t>>();
    t.momentum = get_real(tr, "momentum");
    t.batch_size = get_as<std::size_t>(tr, "batch_size");
    t.lr_schedule = parse_lr_schedule(get_as<std::string>(tr, "lr_schedule"));
    t.init_seed = get_as<std::uint64_t>(tr, "init_seed");
    m.training = t;
  }
  if (j.contains("quickshift")) m.quickshift = params_from_json(j["quickshift"]);
  return m;
}

Json to_json(const TrialLine& line) {
  Json j;
  j["row"] = line.cell.row;
  j["col"] = line.cell.col;
  j["epoch"] = line.log.epoch;
  j["train_loss"] = encode_real(line.log.train_loss);
  j["param_norm"] = encode_real(line.log.param_norm);
  if (line.log.val_acc) j["val_acc"] = encode_real(*line.log.val_acc);
  if (line.log.test_acc) j["test_acc"] = encode_real(*line.log.test_acc);
  j["status"] = to_string(line.status);
  return j;
}

TrialLine trial_line_from_json(const Json& j) {
  TrialLine line;
  line.cell = cell_from_json(j);
  line.log.epoch = get_as<int>(j, "epoch");
  if (line.log.epoch < 0) throw SchemaError("field 'epoch' must be >= 0");
  line.log.train_loss = get_real(j, "train_loss");
  line.log.param_norm = get_real(j, "param_norm");
  if (line.log.param_norm < 0.0) throw SchemaError("field 'param_norm' must be >= 0");
  if (j.contains("val_acc") && !j["val_acc"].is_null()) line.log.val_acc = get_real(j, "val_acc");
  if (j.contains("test_acc") && !j["test_acc"].is_null()) line.log.test_acc = get_real(j, "test_acc");
  try {
    line.status = parse_trial_status(get_as<std::string>(j, "status"));
  } catch (const SchemaError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw SchemaError(std::string("field 'status': ") + e.what());
  }
  return line;
}

Json to_json(const DecisionRecord& d) {
  Json j;
  j["row"] = d.cell.row;
  j["col"] = d.cell.col;
  j["epoch"] = d.epoch;
  j["decision"] = to_string(d.decision);
  j["rung"] = d.rung;
  j["alive"] = d.alive;
  j["reason"] = d.reason;
  return j;
}

DecisionRecord decision_from_json(const Json& j) {
  DecisionRecord d;
  d.cell = cell_from_json(j);
  d.epoch = get_as<int>(j, "epoch");
  const auto dec = get_as<std::string>(j, "decision");
  if (dec == "continue") {
    d.decision = Decision::Continue;
  } else if (dec == "stop") {
    d.decision = Decision::Stop;
  } else {
    throw SchemaError("field 'decision' must be continue or stop");
  }
  d.rung = get_as<int>(j, "rung");
  d.alive = get_as<std::size_t>(j, "alive");
  d.reason = get_as<std::string>(j, "reason");
  return d;
}

Json matrices_to_json(const LogMatrices& m, const MetricSurfaces& surfaces) {
  Json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  j["layout"] = "row-major";
  j["psi"] = real_array(m.psi.data());
  j["theta"] = real_array(m.theta.data());
  Json valid = Json::array();
  for (std::size_t i = 0; i < m.valid.size(); ++i) valid.push_back(static_cast<bool>(m.valid[i]));
  j["valid"] = valid;
  j["epochs_run"] = m.epochs_run.data();
  if (surfaces.val_acc) j["val_acc"] = real_array(surfaces.val_acc->data());
  if (surfaces.test_acc) j["test_acc"] = real_array(surfaces.test_acc->data());
  return j;
}

std::pair<LogMatrices, MetricSurfaces> matrices_from_json(const Json& j) {
  const auto rows = get_as<std::size_t>(j, "rows");
  const auto cols = get_as<std::size_t>(j, "cols");
  LogMatrices m;
  m.psi = real_matrix(j, "psi", rows, cols);
  m.theta = real_matrix(j, "theta", rows, cols);
  const Json& valid = require(j, "valid");
  const Json& epochs = require(j, "epochs_run");
  if (!valid.is_array() || valid.size() != rows * cols || !epochs.is_array() ||
      epochs.size() != rows * cols) {
    throw SchemaError("matrices.json: valid/epochs_run must have rows*cols entries");
  }
  m.valid = Mask(rows, cols, false);
  m.epochs_run = IntMatrix(rows, cols, 0);
  for (std::size_t i = 0; i < rows * cols; ++i) {
    m.valid[i] = valid[i].get<bool>();
    m.epochs_run[i] = epochs[i].get<int>();
  }
  MetricSurfaces s;
  if (j.contains("val_acc")) s.val_acc = real_matrix(j, "val_acc", rows, cols);
  if (j.contains("test_acc")) s.test_acc = real_matrix(j, "test_acc", rows, cols);
  return {std::move(m), std::move(s)};
}

Json selection_to_json(const Selection& s) {
  Json j;
  j["method"] = to_string(s.method);
  j["cell"] = cell_json(s.cell);
  j["lr"] = s.lr;
  j["wd"] = s.wd;
  if (s.region_id) j["region_id"] = *s.region_id;
  if (s.region_mean) j["region_mean"] = encode_real(*s.region_mean);
  if (s.norm_at_cell) j["norm_at_cell"] = encode_real(*s.norm_at_cell);
  return j;
}

Json selection_to_json(const HyperGrid& grid, const TwinResult& r) {
  Json j = selection_to_json(r.selection);
  j["rows"] = grid.rows();
  j["cols"] = grid.cols();
  j["quickshift"] = params_json(r.params);
  j["n_regions"] = r.segments.n_regions;
  j["region_means"] = real_array(r.region_means);
  j["labels"] = r.segments.labels.data();
  Json mask = Json::array();
  for (std::size_t i = 0; i < r.outlier.size(); ++i) mask.push_back(static_cast<bool>(r.outlier[i]));
  j["outlier_mask"] = mask;
  j["normalized_loss"] = real_array(r.normalized.values.data());
  return j;
}

Selection selection_from_json(const Json& j) {
  Selection s;
  s.method = parse_selection_method(get_as<std::string>(j, "method"));
  s.cell = cell_from_json(require(j, "cell"));
  s.lr = get_real(j, "lr");
  s.wd = get_real(j, "wd");
  if (j.contains("region_id")) s.region_id = get_as<int>(j, "region_id");
  if (j.contains("region_mean")) s.region_mean = get_real(j, "region_mean");
  if (j.contains("norm_at_cell")) s.norm_at_cell = get_real(j, "norm_at_cell");
  return s;
}

Json eval_report_to_json(const EvalReport& r) {
  Json j;
  j["configs"] = r.configs;
  j["oracle_test_acc"] = real_array(r.oracle_acc);
  Json methods = Json::array();
  for (const auto& m : r.methods) {
    Json mj;
    mj["method"] = to_string(m.method);
    mj["test_acc"] = real_array(m.test_acc);
    mj["abs_error"] = real_array(m.abs_error);
    mj["mae"] = encode_real(m.mae);
    methods.push_back(mj);
  }
  j["methods"] = methods;
  return j;
}

std::string dump_compact(const Json& j) { return j.dump(); }

// ---------------------------------------------------------------------------
// Files

void write_text_atomic(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw StorageError("cannot open " + tmp.string() + " for writing");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) throw StorageError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw StorageError("cannot rename " + tmp.string() + ": " + ec.message());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path store_root() {
  if (const char* env = std::getenv("TWIN_STORE_ROOT"); env != nullptr && *env != '\0') {
    return fs::path(env);
  }
  return fs::current_path();
}

fs::path run_path(const fs::path& root, const std::string& run_id) {
  return root / "runs" / run_id;
}

namespace {

std::string trial_path_name(const GridCell& cell) {
  return std::to_string(cell.row) + "_" + std::to_string(cell.col) + ".jsonl";
}

void append_raw(const fs::path& path, const std::string& text) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd < 0) throw StorageError("cannot open " + path.string() + ": " + std::strerror(errno));
  std::size_t written = 0;
  while (written < text.size()) {
    const ssize_t n = ::write(fd, text.data() + written, text.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      const int err = errno;
      ::close(fd);
      throw StorageError("write to " + path.string() + " failed: " + std::strerror(err));
    }
    written += static_cast<std::size_t>(n);
  }
  ::fdatasync(fd);
  ::close(fd);
}

struct ParsedLines {
  std::vector<std::pair<std::size_t, Json>> lines;  // (1-based line number, value)
  bool torn_tail = false;
  std::size_t intact_bytes = 0;
};

// Complete lines must parse; a final fragment without newline is a torn write.
ParsedLines parse_jsonl(const fs::path& path) {
  ParsedLines out;
  const std::string text = read_text(path);
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    ++line_no;
    if (nl == std::string::npos) {
      out.torn_tail = true;
      break;
    }
    const std::string_view line(text.data() + pos, nl - pos);
    pos = nl + 1;
    out.intact_bytes = pos;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      out.lines.emplace_back(line_no, Json::parse(line));
    } catch (const Json::parse_error& e) {
      throw SchemaError(path.string() + ":" + std::to_string(line_no) + ": corrupt line: " + e.what());
    }
  }
  return out;
}

}  // namespace

RunDir::RunDir(fs::path dir, RunManifest manifest) : dir_(std::move(dir)), manifest_(std::move(manifest)) {}

RunDir RunDir::create(const fs::path& dir, const RunManifest& manifest) {
  std::error_code ec;
  if (fs::exists(dir / "manifest.json", ec)) {
    throw StorageError("run directory " + dir.string() + " already has a manifest");
  }
  fs::create_directories(dir / "trials", ec);
  if (ec) throw StorageError("cannot create " + dir.string() + ": " + ec.message());
  write_text_atomic(dir / "manifest.json", to_json(manifest).dump(2) + "\n");
  return RunDir(dir, manifest);
}

RunDir RunDir::open(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) throw StorageError("missing manifest: " + mpath.string());
  Json j;
  try {
    j = Json::parse(read_text(mpath));
  } catch (const Json::parse_error& e) {
    throw SchemaError(mpath.string() + ": " + e.what());
  }
  std::error_code ec;
  fs::create_directories(dir / "trials", ec);
  return RunDir(dir, manifest_from_json(j));
}

fs::path RunDir::trial_path(const GridCell& cell) const {
  return dir_ / "trials" / trial_path_name(cell);
}

int RunDir::last_logged_epoch(const GridCell& cell) {
  if (auto it = last_epoch_.find(cell); it != last_epoch_.end()) return it->second;
  const fs::path path = trial_path(cell);
  int last = -1;
  if (fs::exists(path)) {
    ParsedLines parsed = parse_jsonl(path);
    if (parsed.torn_tail) fs::resize_file(path, parsed.intact_bytes);
    for (const auto& [no, j] : parsed.lines) last = std::max(last, get_as<int>(j, "epoch"));
  }
  last_epoch_.emplace(cell, last);
  return last;
}

void RunDir::append_trial_line(const TrialLine& line) {
  if (!manifest_.grid.contains(line.cell)) {
    throw SchemaError("unknown cell " + to_string(line.cell) + " for this run's grid");
  }
  if (line.log.epoch < 0) throw SchemaError("field 'epoch' must be >= 0");
  if (line.log.param_norm < 0.0) throw SchemaError("field 'param_norm' must be >= 0");
  const fs::path path = trial_path(line.cell);
  auto it = last_epoch_.find(line.cell);
  if (it == last_epoch_.end()) it = last_epoch_.emplace(line.cell, last_logged_epoch(line.cell)).first;
  if (line.log.epoch <= it->second) {
    throw SchemaError("field 'epoch': " + std::to_string(line.log.epoch) + " does not follow " +
                      std::to_string(it->second) + " for cell " + to_string(line.cell));
  }
  append_raw(path, dump_compact(to_json(line)) + "\n");
  it->second = line.log.epoch;
}

void RunDir::append_decisions(const std::vector<DecisionRecord>& records) {
  if (records.empty()) return;
  std::string text;
  for (const auto& r : records) text += dump_compact(to_json(r)) + "\n";
  append_raw(decisions_path(), text);
}

void RunDir::reset_decisions() { write_text_atomic(decisions_path(), ""); }

std::vector<GridCell> LoadedRun::missing_cells() const {
  std::vector<GridCell> out;
  std::size_t k = 0;
  for (const auto& cell : manifest.grid.cells()) {
    if (k < records.size() && records[k].cell == cell) {
      ++k;
    } else {
      out.push_back(cell);
    }
  }
  return out;
}

std::vector<GridCell> LoadedRun::incomplete_cells() const {
  std::vector<GridCell> out;
  for (const auto& r : records) {
    if (r.status == TrialStatus::Running) out.push_back(r.cell);
  }
  return out;
}

LoadedRun load_run(const fs::path& dir) {
  LoadedRun run;
  run.manifest = RunDir::open(dir).manifest();
  const HyperGrid& grid = run.manifest.grid;

  std::map<GridCell, TrialRecord> by_cell;
  const fs::path trials = dir / "trials";
  if (fs::exists(trials)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(trials)) {
      if (entry.is_regular_file() && entry.path().extension() == ".jsonl") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      ParsedLines parsed = parse_jsonl(file);
      if (parsed.torn_tail) {
        run.warnings.push_back(file.string() + ": dropped torn final line");
      }
      if (parsed.lines.empty()) continue;
      TrialRecord rec;
      bool first = true;
      for (const auto& [no, j] : parsed.lines) {
        TrialLine line;
        try {
          line = trial_line_from_json(j);
        } catch (const SchemaError& e) {
          throw SchemaError(file.string() + ":" + std::to_string(no) + ": " + e.what());
        }
        const std::string where = file.string() + ":" + std::to_string(no);
        if (!grid.contains(line.cell)) throw SchemaError(where + ": unknown cell " + to_string(line.cell));
        if (first) {
          rec.cell = line.cell;
          if (trial_path_name(line.cell) != file.filename().string()) {
            throw SchemaError(where + ": cell " + to_string(line.cell) + " does not match file name");
          }
        } else if (!(line.cell == rec.cell)) {
          throw SchemaError(where + ": mixed cells in one trial file");
        } else if (line.log.epoch <= rec.epochs.back().epoch) {
          throw SchemaError(where + ": epoch " + std::to_string(line.log.epoch) + " is not increasing");
        }
        first = false;
        rec.epochs.push_back(line.log);
        rec.status = line.status;
      }
      by_cell.emplace(rec.cell, std::move(rec));
    }
  }
  for (auto& [cell, rec] : by_cell) run.records.push_back(std::move(rec));

  if (fs::exists(dir / "decisions.jsonl")) {
    ParsedLines parsed = parse_jsonl(dir / "decisions.jsonl");
    if (parsed.torn_tail) run.warnings.push_back((dir / "decisions.jsonl").string() + ": dropped torn final line");
    for (const auto& [no, j] : parsed.lines) {
      try {
        run.decisions.push_back(decision_from_json(j));
      } catch (const SchemaError& e) {
        throw SchemaError((dir / "decisions.jsonl").string() + ":" + std::to_string(no) + ": " + e.what());
      }
    }
  }
  return run;
}

std::vector<ResumeEntry> resume_plan(const RunManifest& manifest,
                                     const std::vector<TrialRecord>& records,
                                     const std::vector<DecisionRecord>& decisions) {
  std::map<GridCell, const TrialRecord*> by_cell;
  for (const auto& r : records) by_cell[r.cell] = &r;
  std::map<GridCell, bool> stopped;
  for (const auto& d : decisions) {
    if (d.decision == Decision::Stop) stopped[d.cell] = true;
  }
  std::vector<ResumeEntry> plan;
  for (const auto& cell : manifest.grid.cells()) {
    if (stopped.count(cell) != 0) continue;
    auto it = by_cell.find(cell);
    if (it == by_cell.end()) {
      plan.push_back({cell, 0});
      continue;
    }
    const TrialRecord& rec = *it->second;
    if (rec.status != TrialStatus::Running) continue;
    if (rec.epochs_run() >= manifest.policy.epoch_budget) continue;
    plan.push_back({cell, rec.epochs.back().epoch + 1});
  }
  return plan;
}

}  // namespace twin
