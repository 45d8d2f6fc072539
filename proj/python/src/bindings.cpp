#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "twin/hypergrid.hpp"
#include "twin/matrices.hpp"
#include "twin/quickshift.hpp"
#include "twin/runstore.hpp"
#include "twin/search.hpp"
#include "twin/selector.hpp"

namespace py = pybind11;
using namespace twin;

namespace {

using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;
using B8 = py::array_t<bool, py::array::c_style | py::array::forcecast>;

RealMatrix to_real(const F64& a, const char* name) {
  if (a.ndim() != 2) throw std::invalid_argument(std::string(name) + " must be 2-D");
  const auto r = static_cast<std::size_t>(a.shape(0));
  const auto c = static_cast<std::size_t>(a.shape(1));
  return RealMatrix(r, c, std::vector<double>(a.data(), a.data() + r * c));
}

Mask to_mask(const std::optional<B8>& a, std::size_t rows, std::size_t cols, const char* name) {
  Mask m(rows, cols, false);
  if (!a) return m;
  if (a->ndim() != 2 || static_cast<std::size_t>(a->shape(0)) != rows ||
      static_cast<std::size_t>(a->shape(1)) != cols) {
    throw std::invalid_argument(std::string(name) + " shape does not match the values");
  }
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = a->data()[i];
  return m;
}

template <typename T>
py::array_t<T> to_numpy(const Matrix2D<T>& m) {
  py::array_t<T> out({m.rows(), m.cols()});
  auto v = out.template mutable_unchecked<2>();
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) v(r, c) = m(r, c);
  return out;
}

py::array_t<bool> to_numpy(const Mask& m) {
  py::array_t<bool> out({m.rows(), m.cols()});
  auto v = out.mutable_unchecked<2>();
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) v(r, c) = m(r, c);
  return out;
}

// On-disk JSON shapes double as the Python return values.
py::object as_python(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

Json from_python(const py::object& o) {
  return Json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::dict matrices_dict(const LogMatrices& m, const MetricSurfaces& s) {
  py::dict d;
  d["psi"] = to_numpy(m.psi);
  d["theta"] = to_numpy(m.theta);
  d["valid"] = to_numpy(m.valid);
  d["epochs_run"] = to_numpy(m.epochs_run);
  d["val_acc"] = s.val_acc ? py::object(to_numpy(*s.val_acc)) : py::none();
  d["test_acc"] = s.test_acc ? py::object(to_numpy(*s.test_acc)) : py::none();
  return d;
}

std::size_t jobs_or_default(std::size_t jobs) { return jobs == 0 ? default_jobs() : jobs; }

}  // namespace

PYBIND11_MODULE(_twin, m) {
  m.doc() = "Validation-free hyperparameter selection on LR x WD grids";

  py::register_exception<StorageError>(m, "StorageError", PyExc_OSError);
  py::register_exception<SchemaError>(m, "SchemaError", PyExc_ValueError);
  py::register_exception<NoTrainableConfiguration>(m, "NoTrainableConfiguration", PyExc_ValueError);

  py::class_<HyperGrid>(m, "HyperGrid")
      .def(py::init<std::vector<double>, std::vector<double>>(), py::arg("lr_values"), py::arg("wd_values"))
      .def_property_readonly("lr_values", &HyperGrid::lr_values)
      .def_property_readonly("wd_values", &HyperGrid::wd_values)
      .def_property_readonly("shape", [](const HyperGrid& g) { return py::make_tuple(g.rows(), g.cols()); })
      .def("params", [](const HyperGrid& g, std::size_t row, std::size_t col) {
        if (!g.contains({row, col})) throw py::index_error("cell outside the grid");
        const HyperParams hp = cell_params(g, {row, col});
        return py::make_tuple(hp.lr, hp.wd);
      }, py::arg("row"), py::arg("col"))
      .def("slice", [](const HyperGrid& g, std::size_t lr_stride, std::size_t wd_stride) {
        return slice_grid(g, lr_stride, wd_stride);
      }, py::arg("lr_stride") = 1, py::arg("wd_stride") = 1)
      .def("__len__", &HyperGrid::size)
      .def("__eq__", [](const HyperGrid& a, const HyperGrid& b) { return a == b; })
      .def("__repr__", [](const HyperGrid& g) {
        return "HyperGrid(" + std::to_string(g.rows()) + "x" + std::to_string(g.cols()) + ")";
      });

  m.def("build_log_grid", &build_log_grid, py::arg("lr_low"), py::arg("lr_high"), py::arg("n_lr"),
        py::arg("wd_low"), py::arg("wd_high"), py::arg("n_wd"));
  m.def("default_grid", &default_grid, py::arg("n"));

  py::class_<QuickshiftParams>(m, "QuickshiftParams")
      .def(py::init([](double k, double d, double r) { return QuickshiftParams{k, d, r}; }),
           py::arg("kernel_size") = 1.0, py::arg("max_dist") = 1.0, py::arg("ratio") = 1.0)
      .def_readwrite("kernel_size", &QuickshiftParams::kernel_size)
      .def_readwrite("max_dist", &QuickshiftParams::max_dist)
      .def_readwrite("ratio", &QuickshiftParams::ratio)
      .def("__eq__", [](const QuickshiftParams& a, const QuickshiftParams& b) { return a == b; })
      .def("__repr__", [](const QuickshiftParams& p) {
        return "QuickshiftParams(kernel_size=" + std::to_string(p.kernel_size) +
               ", max_dist=" + std::to_string(p.max_dist) + ", ratio=" + std::to_string(p.ratio) + ")";
      });
  m.def("default_params", py::overload_cast<std::size_t, std::size_t>(&default_params), py::arg("rows"),
        py::arg("cols"));

  m.def("quickshift", [](const F64& values, std::optional<B8> mask, std::optional<QuickshiftParams> params) {
    const RealMatrix v = to_real(values, "values");
    const Mask mk = to_mask(mask, v.rows(), v.cols(), "mask");
    const QuickshiftParams p = params.value_or(default_params(v.rows(), v.cols()));
    SegmentLabels s;
    {
      py::gil_scoped_release release;
      s = quickshift(v, mk, p);
    }
    return py::make_tuple(to_numpy(s.labels), s.n_regions, s.parent);
  }, py::arg("values"), py::arg("mask") = py::none(), py::arg("params") = py::none(),
     "Returns (labels, n_regions, parent). Labels are -1 on masked cells.");

  m.def("twin_select", [](const HyperGrid& grid, const F64& psi, const F64& theta,
                          std::optional<QuickshiftParams> params) {
    LogMatrices lm;
    lm.psi = to_real(psi, "psi");
    lm.theta = to_real(theta, "theta");
    if (!lm.psi.same_shape(grid.rows(), grid.cols()) || !lm.theta.same_shape(grid.rows(), grid.cols())) {
      throw std::invalid_argument("psi and theta must have the grid's shape");
    }
    lm.valid = Mask(grid.rows(), grid.cols(), false);
    lm.epochs_run = IntMatrix(grid.rows(), grid.cols(), 0);
    for (std::size_t i = 0; i < lm.psi.size(); ++i) lm.valid[i] = std::isfinite(lm.psi[i]) && std::isfinite(lm.theta[i]);
    const TwinResult r = twin_select(grid, lm, params.value_or(default_params(grid)));
    return as_python(selection_to_json(grid, r));
  }, py::arg("grid"), py::arg("psi"), py::arg("theta"), py::arg("params") = py::none(),
     "Twin pick from train-loss and norm matrices (rows = WD, cols = LR). NaN marks failed cells.");

  m.def("make_manifest", [](const std::string& run_id, std::size_t n_lr, std::size_t n_wd,
                            const std::string& scheduler, int epochs, std::uint64_t seed,
                            std::vector<std::size_t> hidden, std::size_t n_train, std::size_t n_classes,
                            std::size_t input_dim, double separation, double label_noise) {
    RunManifest mf;
    mf.run_id = run_id;
    mf.grid = build_log_grid(kDefaultLow, kDefaultHigh, n_lr, kDefaultLow, kDefaultHigh, n_wd);
    mf.policy.kind = parse_scheduler_kind(scheduler);
    mf.policy.epoch_budget = epochs;
    mf.policy.validate();
    TrainingSetup setup;
    setup.task.seed = seed;
    setup.task.n_train = n_train;
    setup.task.n_classes = n_classes;
    setup.task.input_dim = input_dim;
    setup.task.class_separation = separation;
    setup.task.label_noise = label_noise;
    setup.hidden = std::move(hidden);
    setup.init_seed = seed;
    setup.trainer_config(cell_params(mf.grid, {0, 0}), epochs).validate();
    mf.training = setup;
    return as_python(to_json(mf));
  }, py::arg("run_id"), py::arg("n_lr") = 7, py::arg("n_wd") = 7, py::arg("scheduler") = "fifo",
     py::arg("epochs") = 40, py::arg("seed") = 0, py::arg("hidden") = std::vector<std::size_t>{64},
     py::arg("n_train") = 60, py::arg("n_classes") = 4, py::arg("input_dim") = 16,
     py::arg("separation") = 3.0, py::arg("label_noise") = 0.0,
     "Manifest dict for a built-in synthetic task on the default bounds. Edit it freely before run().");

  m.def("run", [](const std::filesystem::path& dir, const py::object& manifest, std::size_t jobs) {
    const RunManifest mf = manifest_from_json(from_python(manifest));
    std::error_code ec;
    PipelineResult res;
    {
      py::gil_scoped_release release;
      RunDir run = std::filesystem::exists(dir / "manifest.json", ec) ? RunDir::open(dir) : RunDir::create(dir, mf);
      if (dump_compact(to_json(run.manifest())) != dump_compact(to_json(mf))) {
        throw std::invalid_argument("run directory " + dir.string() + " holds a different configuration");
      }
      res = run_pipeline(run, jobs_or_default(jobs));
    }
    py::dict out = as_python(selection_to_json(mf.grid, res.twin));
    out["epochs_consumed"] = res.search.epochs_consumed;
    return out;
  }, py::arg("run_dir"), py::arg("manifest"), py::arg("jobs") = 0,
     "Train every cell (resuming if the directory exists), then select. Returns the selection dict.");

  m.def("load_run", [](const std::filesystem::path& dir) {
    const LoadedRun run = load_run(dir);
    const LogMatrices lm = assemble(run.records, run.manifest.grid);
    const MetricSurfaces s = assemble_surfaces(run.records, run.manifest.grid, run.manifest.policy.kind);
    py::dict d = matrices_dict(lm, s);
    d["manifest"] = as_python(to_json(run.manifest));
    d["grid"] = run.manifest.grid;
    d["warnings"] = run.warnings;
    d["complete"] = run.missing_cells().empty() && run.incomplete_cells().empty();
    return d;
  }, py::arg("run_dir"), "Logged matrices of a run directory as numpy arrays.");

  m.def("select", [](const std::filesystem::path& dir, std::optional<QuickshiftParams> params,
                     std::size_t lr_stride, std::size_t wd_stride) {
    const LoadedRun run = load_run(dir);
    OfflineOptions opts{params, lr_stride, wd_stride};
    const OfflineResult r = select_offline(run, opts);
    return as_python(selection_to_json(r.grid, r.twin));
  }, py::arg("run_dir"), py::arg("params") = py::none(), py::arg("lr_stride") = 1, py::arg("wd_stride") = 1,
     "Recompute the Twin pick from logged trials without writing anything.");

  m.def("baseline", [](const std::filesystem::path& dir, const std::string& method) {
    const LoadedRun run = load_run(dir);
    const OfflineResult r = select_offline(run, OfflineOptions{});
    return as_python(selection_to_json(baseline_select(r.grid, r.matrices, r.surfaces, parse_selection_method(method))));
  }, py::arg("run_dir"), py::arg("method"), "Baseline pick: 'SelTS', 'SelVS' or 'Oracle'.");
}
