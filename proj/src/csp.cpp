#include "bcidal/csp.hpp"

#include "bcidal/error.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <string>

namespace bcidal::csp {

ClassCovariance estimate_covariance(std::span<const Trial> trials, Label which) {
  ClassCovariance out;
  for (const Trial& t : trials) {
    if (t.label != which) continue;
    if (out.n_trials > 0 && t.data.rows() != out.matrix.rows())
      throw DataError("estimate_covariance: trials differ in channel count");
    const Eigen::MatrixXd xxt = t.data * t.data.transpose();
    const double tr = xxt.trace();
    if (!(tr > 0.0)) throw DataError("estimate_covariance: trial " + std::to_string(t.index) + " has zero energy");
    if (out.n_trials == 0) out.matrix = Eigen::MatrixXd::Zero(xxt.rows(), xxt.cols());
    out.matrix += xxt / tr;
    ++out.n_trials;
  }
  if (out.n_trials == 0)
    throw DataError("estimate_covariance: no trials of class " + std::to_string(static_cast<int>(which)));
  out.matrix /= static_cast<double>(out.n_trials);
  // exact symmetry; the products above can differ in the last bit
  out.matrix = (0.5 * (out.matrix + out.matrix.transpose())).eval();
  return out;
}

CspModel fit_csp(const ClassCovariance& c1, const ClassCovariance& c2, int m) {
  const Eigen::Index C = c1.matrix.rows();
  if (c1.matrix.cols() != C || c2.matrix.rows() != C || c2.matrix.cols() != C)
    throw DataError("fit_csp: covariance dimensions differ");
  if (m < 1 || 2 * m > C)
    throw ConfigError("fit_csp: need 1 <= m and 2m <= channels (m=" + std::to_string(m) + ", channels=" +
                      std::to_string(C) + ")");

  Eigen::MatrixXd composite = c1.matrix + c2.matrix;
  Eigen::LLT<Eigen::MatrixXd> llt(composite);
  if (llt.info() != Eigen::Success || llt.rcond() < kRidgeConditionThreshold) {
    composite.diagonal().array() += kCompositeRidge;
    llt.compute(composite);
    if (llt.info() != Eigen::Success) throw NumericalError("fit_csp: composite covariance is singular");
  }

  // Eigen returns ascending eigenvalues with B-normalized eigenvectors.
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(c1.matrix, composite);
  if (ges.info() != Eigen::Success) throw NumericalError("fit_csp: generalized eigensolve failed");
  const Eigen::VectorXd& evals = ges.eigenvalues();
  const Eigen::MatrixXd& evecs = ges.eigenvectors();

  CspModel model;
  model.m = m;
  model.filters.resize(C, 2 * m);
  model.eigenvalues.resize(2 * m);
  for (int j = 0; j < m; ++j) {
    model.filters.col(j) = evecs.col(C - 1 - j);
    model.eigenvalues(j) = evals(C - 1 - j);
    model.filters.col(m + j) = evecs.col(m - 1 - j);
    model.eigenvalues(m + j) = evals(m - 1 - j);
  }
  for (Eigen::Index j = 0; j < model.filters.cols(); ++j) {
    Eigen::Index arg = 0;
    model.filters.col(j).cwiseAbs().maxCoeff(&arg);
    if (model.filters(arg, j) < 0.0) model.filters.col(j) *= -1.0;
  }
  // Rounding can push eigenvalues a hair outside [0, 1].
  model.eigenvalues = model.eigenvalues.cwiseMax(0.0).cwiseMin(1.0);
  model.patterns = composite * model.filters;
  return model;
}

Eigen::VectorXd csp_features(const Eigen::MatrixXd& trial_data, const CspModel& model) {
  if (trial_data.rows() != model.filters.rows())
    throw DataError("csp_features: trial has " + std::to_string(trial_data.rows()) + " channels, model expects " +
                    std::to_string(model.filters.rows()));
  const Eigen::MatrixXd projected = model.filters.transpose() * trial_data;
  const Eigen::VectorXd v = projected.rowwise().squaredNorm() / static_cast<double>(trial_data.cols());
  const double total = v.sum();
  if (!(total > 0.0)) throw DataError("csp_features: projected trial has zero power");
  return (v / total).array().log().matrix();
}

}  // namespace bcidal::csp
