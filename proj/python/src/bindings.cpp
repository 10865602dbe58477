#include <pybind11/eigen.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "tightbound/decision.hpp"
#include "tightbound/error.hpp"
#include "tightbound/eval.hpp"
#include "tightbound/synthetic.hpp"
#include "tightbound/trainer.hpp"
#ifdef TIGHTBOUND_WITH_CLI
#include "tightbound/cli.hpp"
#endif

namespace py = pybind11;
using namespace tightbound;

namespace {

using DenseRows = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Labels must already be class indices 0..K-1.
Dataset from_arrays(const Eigen::Ref<const DenseRows>& x, const std::vector<std::uint32_t>& y,
                    std::optional<std::uint32_t> n_classes) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw std::invalid_argument("x and y differ in length");
  Dataset ds;
  ds.name = "arrays";
  ds.n_features = static_cast<std::uint32_t>(x.cols());
  std::uint32_t top = 0;
  for (auto label : y) top = std::max(top, label + 1);
  ds.n_classes = n_classes.value_or(std::max<std::uint32_t>(top, 2));
  for (std::uint32_t k = 0; k < ds.n_classes; ++k) ds.raw_labels.push_back(k);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const Eigen::VectorXd row = x.row(i).transpose();
    ds.rows.push_back(FeatureRow::dense(std::span<const double>(row.data(), static_cast<std::size_t>(row.size()))));
  }
  ds.labels = y;
  ds.validate();
  return ds;
}

DenseRows dense_features(const Dataset& ds) {
  DenseRows out = DenseRows::Zero(static_cast<Eigen::Index>(ds.size()), ds.n_features);
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (const auto& e : ds.rows[i].entries()) out(static_cast<Eigen::Index>(i), e.index) = e.value;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Iterative linearized-bound training of softmax linear classifiers";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<Dataset>(m, "Dataset")
      .def_static("from_arrays", &from_arrays, py::arg("x"), py::arg("y"), py::arg("n_classes") = py::none())
      .def("__len__", &Dataset::size)
      .def_readonly("n_classes", &Dataset::n_classes)
      .def_readonly("n_features", &Dataset::n_features)
      .def_readonly("name", &Dataset::name)
      .def_readonly("labels", &Dataset::labels)
      .def_readonly("raw_labels", &Dataset::raw_labels)
      .def("features", &dense_features)
      .def("class_counts", &Dataset::class_counts)
      .def("subset", [](const Dataset& ds, const std::vector<std::size_t>& idx) { return ds.subset(idx); })
      .def("to_libsvm", [](const Dataset& ds) { return to_libsvm(ds); });

  m.def("load_libsvm", [](const std::string& path) { return load_libsvm(path); }, py::arg("path"));
  m.def("parse_libsvm", [](const std::string& text) { return parse_libsvm(text); }, py::arg("text"));
  m.def("load_csv", [](const std::string& path, std::size_t label_col) { return load_csv(path, label_col); },
        py::arg("path"), py::arg("label_col") = 0);
  m.def(
      "make_synthetic",
      [](const std::string& kind, std::size_t n, std::uint64_t seed) {
        return make_synthetic(parse_synthetic_kind(kind), n, seed);
      },
      py::arg("kind"), py::arg("n"), py::arg("seed") = 0);
  m.def(
      "split_holdout",
      [](const Dataset& ds, double fraction, bool shuffle, std::uint64_t seed) {
        return split_holdout(ds, SplitSpec{fraction, 5, seed, shuffle});
      },
      py::arg("ds"), py::arg("fraction") = 0.1, py::arg("shuffle") = false, py::arg("seed") = 0);

  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init<std::uint32_t, std::uint32_t>(), py::arg("n_classes"), py::arg("n_features"))
      .def(py::init<Matrix>(), py::arg("weights"))
      .def_property_readonly("weights", [](const ModelParams& p) { return p.weights(); })
      .def_property_readonly("n_classes", &ModelParams::n_classes)
      .def_property_readonly("n_features", &ModelParams::n_features)
      .def("to_text", [](const ModelParams& p) { return params_to_string(p); })
      .def_static("from_text", &params_from_string)
      .def(py::self == py::self);

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init([](std::size_t T, std::size_t Z, double lambda, std::size_t batch, std::optional<double> step,
                       std::uint64_t seed, bool trace) {
             TrainConfig c{T, Z, lambda, batch, step, seed, trace, false};
             c.validate();
             return c;
           }),
           py::arg("T") = 1, py::arg("Z") = 1000, py::arg("lam") = 0.0, py::arg("batch") = 50,
           py::arg("step") = py::none(), py::arg("seed") = 0, py::arg("trace") = false)
      .def_readwrite("T", &TrainConfig::outer_iterations)
      .def_readwrite("Z", &TrainConfig::inner_updates)
      .def_readwrite("lam", &TrainConfig::lambda)
      .def_readwrite("batch", &TrainConfig::batch_size)
      .def_readwrite("step", &TrainConfig::step_size)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("trace", &TrainConfig::trace)
      .def("budget", &TrainConfig::budget);

  py::class_<OuterMetrics>(m, "OuterMetrics")
      .def_readonly("outer_t", &OuterMetrics::outer_t)
      .def_readonly("train_nll", &OuterMetrics::train_nll)
      .def_readonly("train_error", &OuterMetrics::train_error)
      .def_readonly("valid_nll", &OuterMetrics::valid_nll)
      .def_readonly("valid_error", &OuterMetrics::valid_error);

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("params", &TrainResult::params)
      .def_readonly("per_outer_metrics", &TrainResult::per_outer_metrics)
      .def_readonly("total_updates", &TrainResult::total_updates)
      .def_property_readonly("trace", [](const TrainResult& r) {
        std::vector<std::pair<std::size_t, double>> out;
        for (const auto& t : r.trace) out.emplace_back(t.updates_done, t.objective);
        return out;
      });

  m.def("predict_proba", &predict_proba_all, py::arg("params"), py::arg("ds"));
  m.def("classification_error", &classification_error, py::arg("params"), py::arg("ds"));
  m.def("expected_error", &expected_error, py::arg("params"), py::arg("ds"));
  m.def("nll", &nll, py::arg("params"), py::arg("ds"));
  m.def("global_log_bound", &global_log_bound, py::arg("params"), py::arg("ds"));
  m.def("bound_prob", &bound_prob, py::arg("p"), py::arg("p_ref"));
  m.def(
      "confusion_binary",
      [](const ModelParams& p, const Dataset& ds) {
        const auto r = confusion_binary(p, ds);
        return py::dict(py::arg("tpr") = r.tpr, py::arg("fpr") = r.fpr);
      },
      py::arg("params"), py::arg("ds"));

  m.def(
      "train_iterative",
      [](const Dataset& train, const Dataset* valid, const TrainConfig& config) {
        py::gil_scoped_release release;
        return train_iterative(train, valid, config);
      },
      py::arg("train"), py::arg("valid") = nullptr, py::arg("config"));

  m.def(
      "train_undecided",
      [](const Dataset& train, double r_h, const TrainConfig& config) {
        py::gil_scoped_release release;
        auto [aug, spec] = augment_undecided(train, r_h);
        auto result = train_expected_reward(aug, nullptr, spec, config);
        const double p_u = mean_undecided_probability(result.params, aug);
        return std::make_pair(std::move(result), p_u);
      },
      py::arg("train"), py::arg("r_h"), py::arg("config"),
      "Trains with an added reject class; returns (result, mean reject probability).");

  m.def(
      "train_constrained_fpr",
      [](const Dataset& train, double c_fp, const TrainConfig& config, double dual_step, double dual_init) {
        ConstraintConfig cc;
        cc.c_fp = c_fp;
        cc.dual_step = dual_step;
        cc.dual_init = dual_init;
        py::gil_scoped_release release;
        const auto r = train_constrained_fpr(train, cc, config);
        return std::make_tuple(r.params, r.dual_final, r.achieved_fpr);
      },
      py::arg("train"), py::arg("c_fp"), py::arg("config"), py::arg("dual_step") = 0.1,
      py::arg("dual_init") = 1.0, "Returns (params, final dual variable, training false-positive probability).");

  m.def(
      "roc_sweep",
      [](const Dataset& train, const Dataset& test, const std::vector<double>& grid, const TrainConfig& config,
         const std::string& method) {
        if (method != "iterative" && method != "log_loss") throw std::invalid_argument("unknown method " + method);
        const auto points = roc_sweep_asymmetry(train, test, grid, config,
                                                method == "iterative" ? RocMethod::iterative : RocMethod::log_loss);
        std::vector<std::pair<double, double>> out;
        for (const auto& p : points) out.emplace_back(p.fpr, p.tpr);
        return out;
      },
      py::arg("train"), py::arg("test"), py::arg("grid"), py::arg("config"), py::arg("method") = "iterative");

  m.def(
      "upper_hull_deviation",
      [](const std::vector<std::pair<double, double>>& curve) {
        std::vector<RocPoint> points;
        for (const auto& [f, t] : curve) points.push_back({f, t, ""});
        return upper_hull_deviation(points);
      },
      py::arg("curve"));

#ifdef TIGHTBOUND_WITH_CLI
  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(args, out, err);
        }
        return std::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a command-line invocation in-process; returns (exit code, stdout, stderr).");
#endif
}
