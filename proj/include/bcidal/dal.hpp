#pragma once

#include "bcidal/features.hpp"
#include "bcidal/prox.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bcidal::dal {

/// The three DAL variants and their fixed feature-map / regularizer pairing:
/// GLR = second-order blocks with channel row groups, DS = augmented blocks
/// with the trace norm, L1 = first-order blocks with the elementwise l1 norm.
enum class Preset { GLR, DS, L1 };

std::string to_string(Preset p);
Preset preset_from_string(const std::string& s);
RegularizerKind preset_regularizer(Preset p);
FeatureKind preset_feature_kind(Preset p);

/// Design matrix view of a set of trial features: row i is the stacked
/// vectorization of trial i's blocks.
struct DalProblem {
  BlockLayout layout;
  Eigen::MatrixXd design;
  Eigen::VectorXd labels;  // ±1

  Eigen::Index n() const { return design.rows(); }
};

/// `rows` selects a subset of trials (all when empty), in the given order.
DalProblem make_problem(std::span<const TrialFeature> features, std::span<const int> rows = {});

struct LossAndGrad {
  double loss = 0.0;
  Eigen::VectorXd grad;
};

/// Mean logistic loss (1/n) sum log(1 + exp(-y z)) and its gradient in z.
LossAndGrad logistic_loss_and_grad(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels);

/// Smallest lambda for which W = 0 (with the bias at its null-model optimum)
/// is a minimizer.
double lambda_max(const DalProblem& problem, RegularizerKind kind);

struct SolverOptions {
  double eta0 = 1.0;
  double eta_growth = 2.0;
  double eta_max = 1e8;
  double rel_gap_tol = 1e-3;
  int max_outer = 100;
  double inner_tol = 1e-9;
  int inner_max_newton = 50;
};

struct ConvergenceRecord {
  int outer_iterations = 0;
  double final_relative_gap = 0.0;
  double objective = 0.0;
  bool converged = false;
  int newton_steps = 0;
  std::vector<double> objective_history;  // primal objective after each outer step
};

struct DalModel {
  std::vector<Eigen::MatrixXd> weights;
  double bias = 0.0;
  RegularizerSpec regularizer;
  ConvergenceRecord convergence;
};

/// Solver state that can seed the next solve along a lambda path.
struct DalState {
  Eigen::VectorXd weights;  // stacked
  double bias = 0.0;
  Eigen::VectorXd dual;     // folded dual variables in (0, 1)
  double eta = 1.0;
};

struct DalResult {
  DalModel model;
  DalState state;
};

/// Regularized logistic regression by dual augmented Lagrangian iterations.
/// Each outer step is a proximal-point update of (W, b) whose dual is
/// minimized by damped Newton over the folded dual variables; the bias
/// enters unregularized through the augmented term of sum_i a_i y_i.
/// Throws NumericalError on non-finite intermediates; returns a record with
/// converged = false when max_outer is exhausted.
DalResult dal_solve(const DalProblem& problem, const RegularizerSpec& reg, const SolverOptions& opts = {},
                    const DalState* warm_start = nullptr);

struct GapReport {
  double gap = 0.0;      // max(raw, 0)
  double raw_gap = 0.0;
  double primal = 0.0;
  double dual = 0.0;
};

double primal_objective(const DalProblem& problem, const RegularizerSpec& reg, const Eigen::VectorXd& weights,
                        double bias);

/// -(1/n) sum [a log a + (1-a) log(1-a)], with 0 log 0 = 0.
double dual_objective(const Eigen::VectorXd& dual);

/// Folded dual variables made feasible: balanced so that sum a_i y_i = 0,
/// then shrunk so the dual norm of (1/n) sum a_i y_i X_i is at most lambda.
Eigen::VectorXd feasible_dual(const DalProblem& problem, const RegularizerSpec& reg, const Eigen::VectorXd& dual);

/// Primal minus dual at the feasible projection of `dual`. Throws
/// DataError if any dual entry lies outside [0, 1].
GapReport duality_gap(const DalProblem& problem, const RegularizerSpec& reg, const Eigen::VectorXd& weights,
                      double bias, const Eigen::VectorXd& dual);

struct Prediction {
  int label = 1;
  double score = 0.0;
};

Prediction dal_predict(const DalModel& model, const TrialFeature& feature);

struct ProximalGradientOptions {
  double rel_gap_tol = 1e-9;
  int max_iterations = 500000;
  int gap_check_every = 10;
};

struct ProximalGradientResult {
  Eigen::VectorXd weights;
  double bias = 0.0;
  double objective = 0.0;
  double relative_gap = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Accelerated proximal gradient with adaptive restart on the same
/// objective, stopped by the same duality-gap certificate. Used as an
/// independent reference for dal_solve.
ProximalGradientResult proximal_gradient_solve(const DalProblem& problem, const RegularizerSpec& reg,
                                               const ProximalGradientOptions& opts = {});

/// `count` logarithmically spaced values from lambda_max down to min_ratio * lambda_max.
std::vector<double> lambda_grid(double lambda_max, int count = 20, double min_ratio = 1e-3);

}  // namespace bcidal::dal
