#include "bcidal/slda.hpp"

#include "bcidal/error.hpp"

#include <algorithm>
#include <string>

namespace bcidal::slda {

double ledoit_wolf_gamma(const Eigen::MatrixXd& centered) {
  const double n = static_cast<double>(centered.rows());
  const double d = static_cast<double>(centered.cols());
  const Eigen::MatrixXd S = centered.transpose() * centered / n;
  const double mu = S.trace() / d;
  const double delta_sq = (S - mu * Eigen::MatrixXd::Identity(S.rows(), S.cols())).squaredNorm();
  if (delta_sq <= 0.0) return 1.0;  // S is already the target
  // sum_k ||x_k x_k^T - S||_F^2 = sum_k ||x_k||^4 - n ||S||_F^2
  const double fourth = centered.rowwise().squaredNorm().array().square().sum();
  const double beta_bar_sq = std::max(0.0, fourth - n * S.squaredNorm()) / (n * n);
  return std::clamp(std::min(beta_bar_sq, delta_sq) / delta_sq, 0.0, 1.0);
}

ShrinkageLdaModel fit_shrinkage_lda(const Eigen::MatrixXd& features, std::span<const double> labels) {
  const Eigen::Index n = features.rows();
  const Eigen::Index d = features.cols();
  if (static_cast<std::size_t>(n) != labels.size()) throw DataError("fit_shrinkage_lda: label count mismatch");
  if (d < 1) throw DataError("fit_shrinkage_lda: empty feature dimension");
  if (n < 4) throw DataError("fit_shrinkage_lda: need at least 4 observations, got " + std::to_string(n));

  Eigen::VectorXd sum_pos = Eigen::VectorXd::Zero(d), sum_neg = Eigen::VectorXd::Zero(d);
  Eigen::Index n_pos = 0, n_neg = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (labels[i] > 0) {
      sum_pos += features.row(i).transpose();
      ++n_pos;
    } else {
      sum_neg += features.row(i).transpose();
      ++n_neg;
    }
  }
  if (n_pos == 0 || n_neg == 0) throw DataError("fit_shrinkage_lda: a class is absent from the training set");

  ShrinkageLdaModel model;
  model.mean_pos = sum_pos / static_cast<double>(n_pos);
  model.mean_neg = sum_neg / static_cast<double>(n_neg);

  Eigen::MatrixXd centered(n, d);
  for (Eigen::Index i = 0; i < n; ++i)
    centered.row(i) = features.row(i) - (labels[i] > 0 ? model.mean_pos : model.mean_neg).transpose();

  const Eigen::MatrixXd S = centered.transpose() * centered / static_cast<double>(n - 2);
  const double nu = S.trace() / static_cast<double>(d);
  if (!(nu > 0.0)) throw NumericalError("fit_shrinkage_lda: pooled covariance has zero trace");

  model.gamma = std::max(ledoit_wolf_gamma(centered), kMinShrinkage);
  const Eigen::MatrixXd sigma = (1.0 - model.gamma) * S + model.gamma * nu * Eigen::MatrixXd::Identity(d, d);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(sigma);
  if (ldlt.info() != Eigen::Success) throw NumericalError("fit_shrinkage_lda: shrunk covariance is singular");
  model.w = ldlt.solve(model.mean_pos - model.mean_neg);
  if (!model.w.allFinite()) throw NumericalError("fit_shrinkage_lda: non-finite weights");
  model.b = -model.w.dot(model.mean_pos + model.mean_neg) / 2.0;
  return model;
}

Prediction lda_predict(const ShrinkageLdaModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.w.size())
    throw DataError("lda_predict: feature dimension " + std::to_string(x.size()) + " != model dimension " +
                    std::to_string(model.w.size()));
  Prediction p;
  p.score = model.w.dot(x) + model.b;
  p.label = p.score >= 0.0 ? 1 : -1;
  return p;
}

}  // namespace bcidal::slda
