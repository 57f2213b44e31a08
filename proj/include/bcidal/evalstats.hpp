#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

namespace bcidal::eval {

struct Fold {
  std::vector<int> train;
  std::vector<int> test;
};

/// Contiguous chronological test blocks of size floor(n/k), the last block
/// absorbing the remainder. Training indices exclude the test block and
/// every index within `margin` trials of it.
std::vector<Fold> make_blockwise_folds(int n, int k, int margin);

/// Fraction of positions where the two label lists differ.
double misclassification_error(std::span<const int> predicted, std::span<const int> actual);

struct AnovaResult {
  double f_stat = 0.0;
  int df_effect = 0;
  int df_error = 0;
  double p_value = 1.0;
  double ss_method = 0.0;
  double ss_subject = 0.0;
  double ss_error = 0.0;
};

/// One-way within-subjects ANOVA on a subjects × methods matrix.
AnovaResult rm_anova(const Eigen::MatrixXd& errors);

/// min(1, m p) for each p.
std::vector<double> bonferroni_adjust(std::span<const double> p_values, int m);

struct TTestResult {
  double t = 0.0;
  int df = 0;
  double p_two_sided = 1.0;
};

/// Paired t-test on a - b.
TTestResult paired_ttest(std::span<const double> a, std::span<const double> b);

/// P(F > f) for an F(d1, d2) variable.
double f_survival(double f, double d1, double d2);

/// Two-sided P(|T| > |t|) for Student's t with `df` degrees of freedom.
double t_two_sided_p(double t, double df);

double mean(std::span<const double> v);
/// Sample standard deviation (denominator n - 1); 0 for fewer than two values.
double sample_std(std::span<const double> v);

}  // namespace bcidal::eval
