// bcidal: synthetic data, training, prediction, cross-validation and
// method comparison for motor-imagery EEG sessions.

#include "bcidal/error.hpp"
#include "bcidal/model_io.hpp"
#include "bcidal/report.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace bcidal;

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + p.string());
  out << text;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// Options shared by several subcommands. Values are only applied when given on
// the command line, so they override the config file.
struct Flags {
  std::string config;
  std::string methods;
  std::string method;
  int outer_folds = 0, inner_folds = 0, margin = 0, threads = 0;
  int subjects = 0, sessions = 0, trials_per_class = 0, grid = 0;
  double erd_depth = 0.0, target_rate = 0.0;
  std::uint64_t seed = 0;
  std::string report_prefix;
};

struct Registered {
  std::vector<CLI::Option*> outer_folds;
  std::vector<CLI::Option*> inner_folds;
  std::vector<CLI::Option*> margin;
  CLI::Option* threads = nullptr;
  CLI::Option* subjects = nullptr;
  CLI::Option* sessions = nullptr;
  CLI::Option* trials_per_class = nullptr;
  CLI::Option* erd_depth = nullptr;
  CLI::Option* seed = nullptr;
  CLI::Option* methods = nullptr;
  CLI::Option* report_prefix = nullptr;
  std::vector<CLI::Option*> grid;
  std::vector<CLI::Option*> target_rate;
};

RunConfig resolve(const Flags& f, const Registered& r) {
  RunConfig cfg;
  if (!f.config.empty()) cfg = run_config_from_json(read_text(f.config));
  auto given = [](CLI::Option* o) { return o != nullptr && o->count() > 0; };
  auto any_given = [&](const std::vector<CLI::Option*>& os) { return std::any_of(os.begin(), os.end(), given); };
  if (any_given(r.outer_folds)) cfg.outer_folds = f.outer_folds;
  if (any_given(r.inner_folds)) cfg.method.inner_folds = f.inner_folds;
  if (any_given(r.margin)) cfg.method.margin = f.margin;
  if (given(r.threads)) cfg.threads = f.threads;
  if (given(r.subjects)) cfg.subjects = f.subjects;
  if (given(r.sessions)) cfg.sessions = f.sessions;
  if (given(r.trials_per_class)) cfg.synth.trials_per_class = f.trials_per_class;
  if (given(r.erd_depth)) cfg.synth.erd_depth = f.erd_depth;
  if (given(r.seed)) cfg.seed = f.seed;
  if (given(r.report_prefix)) cfg.report_prefix = f.report_prefix;
  if (any_given(r.grid)) cfg.method.lambda_grid_size = f.grid;
  if (any_given(r.target_rate)) cfg.target_rate_hz = f.target_rate;
  if (given(r.methods)) {
    cfg.methods.clear();
    for (const auto& t : split_list(f.methods)) cfg.methods.push_back(method_from_string(t));
  }
  return cfg;
}

void add_cv_flags(CLI::App* sub, Flags& f, Registered& r) {
  r.outer_folds.push_back(sub->add_option("--outer-folds", f.outer_folds, "outer blockwise folds")->check(CLI::PositiveNumber));
  r.inner_folds.push_back(sub->add_option("--inner-folds", f.inner_folds, "inner folds for lambda selection")->check(CLI::PositiveNumber));
  r.margin.push_back(sub->add_option("--margin", f.margin, "trials excluded on each side of a test block")->check(CLI::NonNegativeNumber));
  r.grid.push_back(sub->add_option("--lambda-grid", f.grid, "number of lambda grid points")->check(CLI::PositiveNumber));
  r.target_rate.push_back(sub->add_option("--target-rate", f.target_rate, "sampling rate after resampling (Hz)"));
}

int cmd_synth(const RunConfig& cfg, const fs::path& out) {
  write_synthetic_dataset(cfg, out, [](const std::string& line) { std::fprintf(stderr, "%s\n", line.c_str()); });
  return 0;
}

int cmd_train(const RunConfig& cfg, const fs::path& session, const std::string& method, const fs::path& model_path,
              std::optional<double> ratio) {
  const Session raw = load_session(session);
  const Method m = method_from_string(method);
  const TrainedModel model = train_model(raw, m, preprocessing_for(cfg, raw.sampling_rate_hz), cfg.method, ratio);
  emit_model(model, model_path);
  if (const auto* c = std::get_if<DalClassifier>(&model.body)) {
    const auto& conv = c->model.convergence;
    std::fprintf(stderr, "lambda = %.6g (ratio %.4g), %d outer iterations, relative gap %.3g\n", c->model.regularizer.lambda,
                 c->lambda_ratio, conv.outer_iterations, conv.final_relative_gap);
    if (!conv.converged)
      throw NumericalError("DAL did not reach the gap tolerance after a retry (relative gap " +
                           std::to_string(conv.final_relative_gap) + "); model written anyway");
  }
  return 0;
}

int cmd_predict(const fs::path& session, const fs::path& model_path, const std::string& out) {
  const TrainedModel model = load_model(model_path);
  const Session raw = load_session(session);
  const auto preds = predict_session(model, raw);
  std::string text = "trial,label,score\n";
  int wrong = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    text += std::to_string(preds[i].trial) + "," + std::to_string(preds[i].label) + "," + format_double(preds[i].score) + "\n";
    if (preds[i].label != label_sign(raw.trials[i].label)) ++wrong;
  }
  if (out.empty()) std::cout << text;
  else write_text(out, text);
  std::fprintf(stderr, "misclassification error %.4f (%d/%zu)\n", preds.empty() ? 0.0 : double(wrong) / preds.size(), wrong,
               preds.size());
  return 0;
}

int cmd_cv(const RunConfig& cfg, const fs::path& session, const std::string& method, const std::string& report) {
  const Session raw = load_session(session);
  const Session pre = preprocess(raw, preprocessing_for(cfg, raw.sampling_rate_hz));
  CvPlan plan;
  plan.n_trials = pre.n_trials();
  plan.k_folds = cfg.outer_folds;
  plan.margin = cfg.method.margin;
  const CvReport rep = cross_validate_method(pre, method_from_string(method), plan, cfg.method);
  const std::string text = cv_report_json(rep);
  if (report.empty()) std::cout << text;
  else write_text(report, text);
  std::fprintf(stderr, "%s: error %s %%\n", rep.method.c_str(), format_cell(100 * rep.mean_error, 100 * rep.std_error).c_str());
  return 0;
}

int cmd_compare(const RunConfig& cfg, const fs::path& dataset) {
  const auto t0 = std::chrono::steady_clock::now();
  const CompareReport rep = run_compare(cfg, dataset, [](const std::string& msg) { std::fprintf(stderr, "%s\n", msg.c_str()); });
  const std::string md = compare_report_markdown(rep);
  write_text(cfg.report_prefix + ".json", compare_report_json(rep));
  write_text(cfg.report_prefix + ".md", md);
  std::cout << md;
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::fprintf(stderr, "wrote %s.json and %s.md in %.1f s\n", cfg.report_prefix.c_str(), cfg.report_prefix.c_str(), secs);
  return 0;
}

int cmd_stats(const fs::path& report, const std::string& out) {
  const std::string md = stats_markdown(stats_from_report_json(read_text(report)));
  if (out.empty()) std::cout << md;
  else write_text(out, md);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motor-imagery EEG decoding: CSP-LDA and DAL-regularized logistic regression"};
  app.require_subcommand(1);
  Flags f;
  Registered reg;
  fs::path out_dir, session, model_path, dataset, report_json;
  std::string report_file, out_file;
  double lambda_ratio = 0.0;

  auto* synth = app.add_subcommand("synth", "generate a seeded synthetic dataset");
  synth->add_option("--out", out_dir, "dataset root to create")->required();
  reg.subjects = synth->add_option("--subjects", f.subjects, "number of subjects")->check(CLI::PositiveNumber);
  reg.sessions = synth->add_option("--sessions", f.sessions, "sessions per subject")->check(CLI::PositiveNumber);
  reg.trials_per_class = synth->add_option("--trials-per-class", f.trials_per_class)->check(CLI::PositiveNumber);
  reg.erd_depth = synth->add_option("--erd-depth", f.erd_depth, "fractional mu power drop during imagery")->check(CLI::Range(0.0, 1.0));
  reg.seed = synth->add_option("--seed", f.seed, "seed of the first session; later sessions count up");

  auto* train = app.add_subcommand("train", "train a model on one session");
  train->add_option("--session", session)->required();
  train->add_option("--method", f.method)->required();
  train->add_option("--model", model_path, "output model file")->required();
  auto* ratio_opt = train->add_option("--lambda-ratio", lambda_ratio, "fixed lambda / lambda_max (skips inner CV)");

  auto* predict = app.add_subcommand("predict", "apply a model to a session");
  predict->add_option("--session", session)->required();
  predict->add_option("--model", model_path)->required();
  predict->add_option("--out", out_file, "CSV of predictions (stdout when omitted)");

  auto* cv = app.add_subcommand("cv", "blockwise cross-validation of one method on one session");
  cv->add_option("--session", session)->required();
  cv->add_option("--method", f.method)->required();
  cv->add_option("--report", report_file, "JSON report (stdout when omitted)");

  auto* compare = app.add_subcommand("compare", "cross-validate methods over a dataset");
  compare->add_option("--dataset", dataset)->required();
  reg.methods = compare->add_option("--methods", f.methods, "comma-separated method tags");
  reg.report_prefix = compare->add_option("--report-prefix", f.report_prefix, "writes PREFIX.json and PREFIX.md");
  reg.threads = compare->add_option("--threads", f.threads, "worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);

  auto* stats = app.add_subcommand("stats", "RM-ANOVA and Bonferroni pairwise tests from a compare report");
  stats->add_option("--report", report_json)->required();
  stats->add_option("--out", out_file, "markdown output (stdout when omitted)");

  for (auto* sub : {train, cv, compare}) add_cv_flags(sub, f, reg);
  for (auto* sub : {synth, train, predict, cv, compare, stats})
    sub->add_option("--config", f.config, "JSON config file; flags override it");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    const RunConfig cfg = resolve(f, reg);
    if (*synth) return cmd_synth(cfg, out_dir);
    if (*train)
      return cmd_train(cfg, session, f.method, model_path,
                       ratio_opt->count() ? std::optional<double>(lambda_ratio) : std::nullopt);
    if (*predict) return cmd_predict(session, model_path, out_file);
    if (*cv) return cmd_cv(cfg, session, f.method, report_file);
    if (*compare) return cmd_compare(cfg, dataset);
    if (*stats) return cmd_stats(report_json, out_file);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
