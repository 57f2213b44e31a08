#pragma once

#include "bcidal/dataset.hpp"

#include <Eigen/Dense>

#include <span>

namespace bcidal::csp {

struct ClassCovariance {
  Eigen::MatrixXd matrix;
  int n_trials = 0;
};

struct CspModel {
  Eigen::MatrixXd filters;      // channels x 2m, columns w_j
  Eigen::VectorXd eigenvalues;  // 2m, descending
  Eigen::MatrixXd patterns;     // channels x 2m
  int m = 3;
};

/// Added to C1 + C2 before the generalized eigensolve when its reciprocal
/// condition estimate falls below kRidgeConditionThreshold.
inline constexpr double kCompositeRidge = 1e-10;
inline constexpr double kRidgeConditionThreshold = 1e-8;

/// Mean over trials of class `which` of X X^T / trace(X X^T).
ClassCovariance estimate_covariance(std::span<const Trial> trials, Label which);

/// Keeps the m largest and m smallest generalized eigenvectors of
/// C1 w = lambda (C1 + C2) w, each scaled to w^T (C1 + C2) w = 1 and
/// sign-canonicalized so its largest-magnitude entry is positive.
CspModel fit_csp(const ClassCovariance& c1, const ClassCovariance& c2, int m);

/// Log relative variance of each spatially filtered signal.
Eigen::VectorXd csp_features(const Eigen::MatrixXd& trial_data, const CspModel& model);

}  // namespace bcidal::csp
