#include "bcidal/pipeline.hpp"

#include "bcidal/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bcidal {

std::string method_tag(Method m) {
  switch (m) {
    case Method::CspLda: return "csp-lda";
    case Method::DalGlr: return "dal-glr";
    case Method::DalDs: return "dal-ds";
    case Method::DalL1: return "dal-l1";
  }
  return "?";
}

std::string method_label(Method m) {
  switch (m) {
    case Method::CspLda: return "CSP-LDA";
    case Method::DalGlr: return "DAL-GLR";
    case Method::DalDs: return "DAL-DS";
    case Method::DalL1: return "DAL-L1";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  for (Method m : all_methods())
    if (s == method_tag(m) || s == method_label(m)) return m;
  throw ConfigError("unknown method tag '" + s + "'");
}

std::vector<Method> all_methods() { return {Method::CspLda, Method::DalGlr, Method::DalDs, Method::DalL1}; }

bool is_dal(Method m) { return m != Method::CspLda; }

dal::Preset dal_preset(Method m) {
  switch (m) {
    case Method::DalGlr: return dal::Preset::GLR;
    case Method::DalDs: return dal::Preset::DS;
    case Method::DalL1: return dal::Preset::L1;
    case Method::CspLda: break;
  }
  throw ConfigError("method " + method_tag(m) + " is not a DAL method");
}

Preprocessing default_preprocessing(double input_rate_hz, double target_rate_hz) {
  Preprocessing p;
  p.input_rate_hz = input_rate_hz;
  if (input_rate_hz == target_rate_hz) {
    p.resample.reset();
  } else {
    p.resample = signal::ResampleSpec{};
    p.resample->from_hz = input_rate_hz;
    p.resample->to_hz = target_rate_hz;
  }
  p.bandpass.sampling_rate_hz = target_rate_hz;
  return p;
}

Session preprocess(const Session& raw, const Preprocessing& pre) {
  if (raw.sampling_rate_hz != pre.input_rate_hz)
    throw DataError("preprocessing mismatch: session sampled at " + format_double(raw.sampling_rate_hz) +
                    " Hz, model expects " + format_double(pre.input_rate_hz) + " Hz");
  const double rate = pre.resample ? pre.resample->to_hz : pre.input_rate_hz;
  if (pre.resample && pre.resample->from_hz != pre.input_rate_hz)
    throw ConfigError("preprocessing: resampler input rate differs from the declared input rate");
  if (pre.bandpass.sampling_rate_hz != rate)
    throw ConfigError("preprocessing: bandpass designed for " + format_double(pre.bandpass.sampling_rate_hz) +
                      " Hz but signal is at " + format_double(rate) + " Hz");
  const signal::FilterCoefficients coeffs = signal::design_bandpass(pre.bandpass);
  Session out;
  out.sampling_rate_hz = rate;
  out.channel_names = raw.channel_names;
  out.trials.reserve(raw.trials.size());
  for (const Trial& t : raw.trials) {
    Trial p;
    p.index = t.index;
    p.label = t.label;
    p.data = signal::apply_filter(pre.resample ? signal::resample_trial(t.data, *pre.resample) : t.data, coeffs);
    out.trials.push_back(std::move(p));
  }
  return out;
}

dal::FeatureMapSpec feature_map_for(Method m, const MethodConfig& cfg) {
  dal::FeatureMapSpec spec;
  spec.kind = dal::preset_feature_kind(dal_preset(m));
  spec.t_prime = cfg.t_prime;
  spec.block_scales = cfg.block_scales;
  return spec;
}

namespace {

std::vector<int> iota_rows(int n) {
  std::vector<int> r(static_cast<std::size_t>(n));
  std::iota(r.begin(), r.end(), 0);
  return r;
}

dal::FeatureMapSpec preset_feature_map(dal::Preset preset, const MethodConfig& cfg) {
  dal::FeatureMapSpec spec;
  spec.kind = dal::preset_feature_kind(preset);
  spec.t_prime = cfg.t_prime;
  spec.block_scales = cfg.block_scales;
  return spec;
}

std::vector<dal::TrialFeature> normalized(std::span<const dal::TrialFeature> raw, const dal::BlockNormalizer& norm) {
  std::vector<dal::TrialFeature> out(raw.begin(), raw.end());
  dal::apply_block_normalizer(out, norm);
  return out;
}

bool has_both_classes(std::span<const dal::TrialFeature> f, std::span<const int> rows) {
  bool pos = false, neg = false;
  for (int r : rows) (f[static_cast<std::size_t>(r)].label > 0 ? pos : neg) = true;
  return pos && neg;
}

template <typename T>
std::vector<T> pick(std::span<const T> all, std::span<const int> rows) {
  std::vector<T> out;
  out.reserve(rows.size());
  for (int r : rows) out.push_back(all[static_cast<std::size_t>(r)]);
  return out;
}

}  // namespace

CspLdaModel train_csp_lda(const Session& preprocessed, std::span<const int> rows, int m) {
  std::vector<int> all;
  if (rows.empty()) {
    all = iota_rows(preprocessed.n_trials());
    rows = all;
  }
  const std::vector<Trial> train = pick<Trial>(preprocessed.trials, rows);
  const auto c_mi = csp::estimate_covariance(train, Label::MotorImagery);
  const auto c_rest = csp::estimate_covariance(train, Label::Rest);
  CspLdaModel model;
  model.csp = csp::fit_csp(c_mi, c_rest, m);
  Eigen::MatrixXd feats(static_cast<Eigen::Index>(train.size()), 2 * m);
  std::vector<double> labels;
  for (std::size_t i = 0; i < train.size(); ++i) {
    feats.row(static_cast<Eigen::Index>(i)) = csp::csp_features(train[i].data, model.csp).transpose();
    labels.push_back(label_sign(train[i].label));
  }
  model.lda = slda::fit_shrinkage_lda(feats, labels);
  return model;
}

int predict_csp_lda(const CspLdaModel& model, const Trial& trial) {
  return slda::lda_predict(model.lda, csp::csp_features(trial.data, model.csp)).label;
}

LambdaSelection select_lambda(std::span<const dal::TrialFeature> raw, std::span<const int> rows, dal::Preset preset,
                              const MethodConfig& cfg) {
  const dal::FeatureMapSpec spec = preset_feature_map(preset, cfg);
  const dal::RegularizerKind kind = dal::preset_regularizer(preset);
  LambdaSelection sel;
  sel.ratios = dal::lambda_grid(1.0, cfg.lambda_grid_size, cfg.lambda_min_ratio);
  const std::size_t g = sel.ratios.size();
  std::vector<double> err_sum(g, 0.0);
  int used_folds = 0;

  const auto folds = eval::make_blockwise_folds(static_cast<int>(rows.size()), cfg.inner_folds, cfg.margin);
  for (const auto& fold : folds) {
    // Fold positions index into `rows`.
    std::vector<int> tr, te;
    for (int p : fold.train) tr.push_back(rows[static_cast<std::size_t>(p)]);
    for (int p : fold.test) te.push_back(rows[static_cast<std::size_t>(p)]);
    if (tr.size() < 4 || !has_both_classes(raw, tr)) continue;

    const auto norm = dal::fit_block_normalizer(raw, spec, tr);
    const auto feats = normalized(raw, norm);
    const dal::DalProblem problem = dal::make_problem(feats, tr);
    const double lmax = dal::lambda_max(problem, kind);

    dal::DalState state;
    const dal::DalState* warm = nullptr;
    for (std::size_t j = 0; j < g; ++j) {
      const dal::RegularizerSpec reg{kind, sel.ratios[j] * lmax};
      dal::DalResult res = dal::dal_solve(problem, reg, cfg.solver, warm);
      if (!res.model.convergence.converged) ++sel.non_converged;
      state = std::move(res.state);
      warm = &state;
      std::vector<int> pred, actual;
      for (int r : te) {
        pred.push_back(dal::dal_predict(res.model, feats[static_cast<std::size_t>(r)]).label);
        actual.push_back(feats[static_cast<std::size_t>(r)].label > 0 ? 1 : -1);
      }
      err_sum[j] += eval::misclassification_error(pred, actual);
    }
    ++used_folds;
  }
  if (used_folds == 0) throw DataError("select_lambda: every inner training set is empty or single-class");

  sel.cv_errors.resize(g);
  std::size_t best = 0;
  for (std::size_t j = 0; j < g; ++j) {
    sel.cv_errors[j] = err_sum[j] / used_folds;
    // descending grid: later index = smaller lambda, so <= prefers it on ties
    if (sel.cv_errors[j] <= sel.cv_errors[best]) best = j;
  }
  sel.ratio = sel.ratios[best];
  return sel;
}

DalClassifier train_dal(std::span<const dal::TrialFeature> raw, std::span<const int> rows, dal::Preset preset,
                        double lambda_ratio, const MethodConfig& cfg) {
  std::vector<int> all;
  if (rows.empty()) {
    all = iota_rows(static_cast<int>(raw.size()));
    rows = all;
  }
  DalClassifier clf;
  clf.preset = preset;
  clf.feature_map = preset_feature_map(preset, cfg);
  clf.normalizer = dal::fit_block_normalizer(raw, clf.feature_map, rows);
  clf.lambda_ratio = lambda_ratio;
  const auto feats = normalized(raw, clf.normalizer);
  const dal::DalProblem problem = dal::make_problem(feats, rows);
  const dal::RegularizerKind kind = dal::preset_regularizer(preset);
  const double lmax = dal::lambda_max(problem, kind);
  const dal::RegularizerSpec reg{kind, lambda_ratio * lmax};
  dal::DalResult res = dal::dal_solve(problem, reg, cfg.solver);
  if (!res.model.convergence.converged) {
    // one retry from where we stopped, with twice the outer budget
    dal::SolverOptions again = cfg.solver;
    again.max_outer *= 2;
    const dal::DalState warm = res.state;
    res = dal::dal_solve(problem, reg, again, &warm);
  }
  clf.model = std::move(res.model);
  return clf;
}

dal::Prediction predict_dal(const DalClassifier& clf, const dal::TrialFeature& raw_feature) {
  return dal::dal_predict(clf.model, dal::apply_block_normalizer(raw_feature, clf.normalizer));
}

CvReport cross_validate_method(const Session& preprocessed, Method method, const CvPlan& outer,
                               const MethodConfig& cfg) {
  const int n = preprocessed.n_trials();
  if (outer.n_trials != 0 && outer.n_trials != n)
    throw ConfigError("cross_validate_method: plan is for " + std::to_string(outer.n_trials) + " trials, session has " +
                      std::to_string(n));
  CvReport rep;
  rep.method = method_tag(method);
  const auto folds = eval::make_blockwise_folds(n, outer.k_folds, outer.margin);

  std::vector<dal::TrialFeature> raw;
  if (is_dal(method)) raw = dal::build_raw_feature_blocks(preprocessed, feature_map_for(method, cfg));

  for (const auto& fold : folds) {
    std::vector<int> pred, actual;
    for (int r : fold.test) actual.push_back(static_cast<int>(preprocessed.trials[static_cast<std::size_t>(r)].label));
    if (!is_dal(method)) {
      const CspLdaModel model = train_csp_lda(preprocessed, fold.train, cfg.csp_patterns_per_class);
      for (int r : fold.test) pred.push_back(predict_csp_lda(model, preprocessed.trials[static_cast<std::size_t>(r)]));
    } else {
      const dal::Preset preset = dal_preset(method);
      const LambdaSelection sel = select_lambda(raw, fold.train, preset, cfg);
      rep.non_converged += sel.non_converged;
      const DalClassifier clf = train_dal(raw, fold.train, preset, sel.ratio, cfg);
      if (!clf.model.convergence.converged) ++rep.non_converged;
      rep.chosen_lambdas.push_back(clf.model.regularizer.lambda);
      for (int r : fold.test) pred.push_back(predict_dal(clf, raw[static_cast<std::size_t>(r)]).label);
    }
    rep.fold_errors.push_back(eval::misclassification_error(pred, actual));
  }
  rep.mean_error = eval::mean(rep.fold_errors);
  rep.std_error = eval::sample_std(rep.fold_errors);
  return rep;
}

TrainedModel train_model(const Session& raw, Method method, const Preprocessing& pre, const MethodConfig& cfg,
                         std::optional<double> lambda_ratio) {
  const Session p = preprocess(raw, pre);
  TrainedModel model;
  model.method = method;
  model.preprocessing = pre;
  if (!is_dal(method)) {
    model.body = train_csp_lda(p, {}, cfg.csp_patterns_per_class);
    return model;
  }
  const auto feats = dal::build_raw_feature_blocks(p, feature_map_for(method, cfg));
  const std::vector<int> rows = iota_rows(p.n_trials());
  const dal::Preset preset = dal_preset(method);
  const double ratio = lambda_ratio ? *lambda_ratio : select_lambda(feats, rows, preset, cfg).ratio;
  model.body = train_dal(feats, rows, preset, ratio, cfg);
  return model;
}

std::vector<TrialPrediction> predict_session(const TrainedModel& model, const Session& raw) {
  const Session p = preprocess(raw, model.preprocessing);
  std::vector<TrialPrediction> out;
  if (const auto* c = std::get_if<CspLdaModel>(&model.body)) {
    for (const Trial& t : p.trials) {
      const auto pr = slda::lda_predict(c->lda, csp::csp_features(t.data, c->csp));
      out.push_back({t.index, pr.label, pr.score});
    }
    return out;
  }
  const auto& clf = std::get<DalClassifier>(model.body);
  const auto feats = dal::build_raw_feature_blocks(p, clf.feature_map);
  for (std::size_t i = 0; i < feats.size(); ++i) {
    const auto pr = predict_dal(clf, feats[i]);
    out.push_back({p.trials[i].index, pr.label, pr.score});
  }
  return out;
}

}  // namespace bcidal
