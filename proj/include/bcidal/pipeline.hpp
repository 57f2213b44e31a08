#pragma once

#include "bcidal/csp.hpp"
#include "bcidal/dal.hpp"
#include "bcidal/dataset.hpp"
#include "bcidal/evalstats.hpp"
#include "bcidal/signal.hpp"
#include "bcidal/slda.hpp"

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace bcidal {

enum class Method { CspLda, DalGlr, DalDs, DalL1 };

/// Lower-case CLI tag, e.g. "dal-glr".
std::string method_tag(Method m);
/// Table heading, e.g. "DAL-GLR".
std::string method_label(Method m);
/// Accepts either form; throws ConfigError naming an unknown tag.
Method method_from_string(const std::string& s);
std::vector<Method> all_methods();
bool is_dal(Method m);
dal::Preset dal_preset(Method m);

/// Resample (when the recording rate differs from the target) then bandpass.
struct Preprocessing {
  double input_rate_hz = 250.0;
  std::optional<signal::ResampleSpec> resample = signal::ResampleSpec{};
  signal::BandpassSpec bandpass{};

  friend bool operator==(const Preprocessing&, const Preprocessing&) = default;
};

/// 250 Hz → 128 Hz, then 6-32 Hz order-2 Butterworth at 128 Hz. If the input
/// rate already equals 128 Hz no resampling is configured.
Preprocessing default_preprocessing(double input_rate_hz = 250.0, double target_rate_hz = 128.0);

/// Throws DataError("preprocessing mismatch ...") when the session's rate
/// differs from the configured input rate.
Session preprocess(const Session& raw, const Preprocessing& pre);

struct MethodConfig {
  int csp_patterns_per_class = 3;
  int t_prime = 16;
  std::array<double, 2> block_scales{1.0, 1.0};
  dal::SolverOptions solver{};
  int lambda_grid_size = 20;
  double lambda_min_ratio = 1e-3;
  int inner_folds = 5;
  int margin = 5;
};

dal::FeatureMapSpec feature_map_for(Method m, const MethodConfig& cfg);

struct CspLdaModel {
  csp::CspModel csp;
  slda::ShrinkageLdaModel lda;
};

struct DalClassifier {
  dal::Preset preset = dal::Preset::GLR;
  dal::FeatureMapSpec feature_map;
  dal::BlockNormalizer normalizer;
  dal::DalModel model;
  double lambda_ratio = 0.0;  // lambda / lambda_max of the training problem
};

struct TrainedModel {
  Method method = Method::CspLda;
  Preprocessing preprocessing;
  std::variant<CspLdaModel, DalClassifier> body;
};

/// Trains on the preprocessed trials listed in `rows` (all when empty).
CspLdaModel train_csp_lda(const Session& preprocessed, std::span<const int> rows, int m);
int predict_csp_lda(const CspLdaModel& model, const Trial& trial);

struct LambdaSelection {
  double ratio = 1.0;              // chosen lambda / lambda_max
  std::vector<double> ratios;      // grid, descending
  std::vector<double> cv_errors;   // mean inner-fold error per grid point
  int non_converged = 0;
};

/// Nested blockwise CV over the lambda grid using only `rows`. Grid points are
/// ratios to each training problem's lambda_max; ties go to the smallest ratio.
LambdaSelection select_lambda(std::span<const dal::TrialFeature> raw, std::span<const int> rows, dal::Preset preset,
                              const MethodConfig& cfg);

/// Fits the normalizer and solver on `rows` at lambda = ratio * lambda_max.
DalClassifier train_dal(std::span<const dal::TrialFeature> raw, std::span<const int> rows, dal::Preset preset,
                        double lambda_ratio, const MethodConfig& cfg);
dal::Prediction predict_dal(const DalClassifier& clf, const dal::TrialFeature& raw_feature);

struct CvPlan {
  int n_trials = 0;
  int k_folds = 10;
  int margin = 5;
};

struct CvReport {
  std::string method;
  std::vector<double> fold_errors;
  double mean_error = 0.0;
  double std_error = 0.0;
  std::vector<double> chosen_lambdas;
  int non_converged = 0;
};

/// Outer blockwise CV; DAL methods pick lambda by inner CV on each outer
/// training set. `preprocessed` must already be filtered.
CvReport cross_validate_method(const Session& preprocessed, Method method, const CvPlan& outer,
                               const MethodConfig& cfg);

/// Full-session training: DAL lambda is chosen by blockwise CV on the whole
/// session unless `lambda_ratio` is given.
TrainedModel train_model(const Session& raw, Method method, const Preprocessing& pre, const MethodConfig& cfg,
                         std::optional<double> lambda_ratio = std::nullopt);

struct TrialPrediction {
  int trial = 0;
  int label = 1;
  double score = 0.0;
};

std::vector<TrialPrediction> predict_session(const TrainedModel& model, const Session& raw);

}  // namespace bcidal
