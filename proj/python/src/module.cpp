#include "bcidal/dal.hpp"
#include "bcidal/error.hpp"
#include "bcidal/evalstats.hpp"
#include "bcidal/model_io.hpp"
#include "bcidal/pipeline.hpp"
#include "bcidal/prox.hpp"
#include "bcidal/report.hpp"
#include "bcidal/signal.hpp"
#include "bcidal/synthgen.hpp"

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace bcidal;

namespace {

RunConfig config_from(const std::string& json_text) {
  return json_text.empty() ? RunConfig{} : run_config_from_json(json_text);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Motor-imagery EEG classification with CSP-LDA and DAL-regularized logistic regression";

  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("prox_l1", &dal::prox_l1, py::arg("v"), py::arg("kappa"));
  m.def("prox_group_rows", &dal::prox_group_rows, py::arg("v"), py::arg("kappa"));
  m.def("prox_trace", &dal::prox_trace, py::arg("v"), py::arg("kappa"));

  m.def(
      "bandpass_response",
      [](double low, double high, int order, double fs, const std::vector<double>& freqs) {
        const auto c = signal::design_bandpass({low, high, order, fs});
        std::vector<double> out;
        for (double f : freqs) out.push_back(std::abs(signal::frequency_response(c, f, fs)));
        return out;
      },
      py::arg("low_hz"), py::arg("high_hz"), py::arg("order"), py::arg("fs_hz"), py::arg("freqs"),
      "Magnitude response of the designed Butterworth bandpass.");
  m.def(
      "bandpass_filter",
      [](const Eigen::MatrixXd& x, double low, double high, int order, double fs) {
        return signal::apply_filter(x, signal::design_bandpass({low, high, order, fs}));
      },
      py::arg("x"), py::arg("low_hz") = 6.0, py::arg("high_hz") = 32.0, py::arg("order") = 2, py::arg("fs_hz") = 128.0);
  m.def(
      "resample",
      [](const Eigen::MatrixXd& x, double from_hz, double to_hz) {
        return signal::resample_trial(x, {from_hz, to_hz, 127, 0.9});
      },
      py::arg("x"), py::arg("from_hz"), py::arg("to_hz"));

  m.def(
      "blockwise_folds",
      [](int n, int k, int margin) {
        std::vector<std::pair<std::vector<int>, std::vector<int>>> out;
        for (auto& f : eval::make_blockwise_folds(n, k, margin)) out.emplace_back(std::move(f.train), std::move(f.test));
        return out;
      },
      py::arg("n"), py::arg("k"), py::arg("margin"), "List of (train, test) index lists.");
  m.def(
      "rm_anova",
      [](const Eigen::MatrixXd& errors) {
        const auto r = eval::rm_anova(errors);
        return py::dict(py::arg("f") = r.f_stat, py::arg("df_effect") = r.df_effect, py::arg("df_error") = r.df_error,
                        py::arg("p") = r.p_value);
      },
      py::arg("errors"));
  m.def(
      "paired_ttest",
      [](const std::vector<double>& a, const std::vector<double>& b) {
        const auto r = eval::paired_ttest(a, b);
        return py::dict(py::arg("t") = r.t, py::arg("df") = r.df, py::arg("p") = r.p_two_sided);
      },
      py::arg("a"), py::arg("b"));
  m.def("format_cell", &format_cell, py::arg("mean_pct"), py::arg("std_pct"));

  m.def(
      "generate_session",
      [](const std::filesystem::path& out, std::uint64_t seed, double erd_depth, int trials_per_class) {
        synth::SynthSpec spec;
        spec.seed = seed;
        spec.erd_depth = erd_depth;
        spec.trials_per_class = trials_per_class;
        synth::save_generated(synth::generate_session(spec), out);
      },
      py::arg("out"), py::arg("seed") = 1, py::arg("erd_depth") = 0.5, py::arg("trials_per_class") = 30,
      "Writes one synthetic session directory.");
  m.def(
      "load_session",
      [](const std::filesystem::path& dir) {
        const Session s = load_session(dir);
        std::vector<Eigen::MatrixXd> data;
        std::vector<int> labels;
        for (const auto& t : s.trials) {
          data.push_back(t.data);
          labels.push_back(static_cast<int>(t.label));
        }
        return py::dict(py::arg("trials") = data, py::arg("labels") = labels,
                        py::arg("sampling_rate_hz") = s.sampling_rate_hz, py::arg("channel_names") = s.channel_names);
      },
      py::arg("dir"));

  m.def(
      "cross_validate",
      [](const std::filesystem::path& dir, const std::string& method, const std::string& config_json) {
        const RunConfig cfg = config_from(config_json);
        py::gil_scoped_release release;
        const Session raw = load_session(dir);
        const Session pre = preprocess(raw, preprocessing_for(cfg, raw.sampling_rate_hz));
        const CvPlan plan{pre.n_trials(), cfg.outer_folds, cfg.method.margin};
        return cv_report_json(cross_validate_method(pre, method_from_string(method), plan, cfg.method));
      },
      py::arg("session_dir"), py::arg("method"), py::arg("config_json") = "", "CV report as JSON text.");
  m.def(
      "train",
      [](const std::filesystem::path& dir, const std::string& method, std::optional<double> lambda_ratio,
         const std::string& config_json) {
        const RunConfig cfg = config_from(config_json);
        py::gil_scoped_release release;
        const Session raw = load_session(dir);
        return serialize_model(train_model(raw, method_from_string(method),
                                           preprocessing_for(cfg, raw.sampling_rate_hz), cfg.method, lambda_ratio));
      },
      py::arg("session_dir"), py::arg("method"), py::arg("lambda_ratio") = py::none(), py::arg("config_json") = "",
      "Trained model as JSON text.");
  m.def(
      "predict",
      [](const std::string& model_json, const std::filesystem::path& dir) {
        const TrainedModel model = parse_model(model_json);
        std::vector<std::pair<int, double>> out;
        for (const auto& p : predict_session(model, load_session(dir))) out.emplace_back(p.label, p.score);
        return out;
      },
      py::arg("model_json"), py::arg("session_dir"), "List of (label, score) per trial.");
  m.def(
      "compare",
      [](const std::filesystem::path& root, const std::string& config_json) {
        const RunConfig cfg = config_from(config_json);
        py::gil_scoped_release release;
        const CompareReport rep = run_compare(cfg, root);
        return std::make_pair(compare_report_json(rep), compare_report_markdown(rep));
      },
      py::arg("dataset_root"), py::arg("config_json") = "", "(json, markdown) report texts.");
}
