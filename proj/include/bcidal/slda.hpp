#pragma once

#include <Eigen/Dense>

#include <span>
#include <utility>

namespace bcidal::slda {

struct ShrinkageLdaModel {
  Eigen::VectorXd w;
  double b = 0.0;
  double gamma = 0.0;
  Eigen::VectorXd mean_pos;
  Eigen::VectorXd mean_neg;
};

/// Lower bound applied to the estimated shrinkage intensity. The analytic
/// estimate is exactly 0 when every centered outer product coincides, which
/// leaves the pooled covariance singular.
inline constexpr double kMinShrinkage = 1e-8;

/// Ledoit-Wolf shrinkage intensity toward trace(S)/d * I for the rows of
/// `centered` (already centered), clamped to [0, 1].
double ledoit_wolf_gamma(const Eigen::MatrixXd& centered);

/// Rows of `features` are observations; labels are ±1.
ShrinkageLdaModel fit_shrinkage_lda(const Eigen::MatrixXd& features, std::span<const double> labels);

struct Prediction {
  int label = 1;
  double score = 0.0;
};

/// score = w.x + b; label = +1 when score >= 0.
Prediction lda_predict(const ShrinkageLdaModel& model, const Eigen::VectorXd& x);

}  // namespace bcidal::slda
