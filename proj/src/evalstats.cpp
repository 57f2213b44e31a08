#include "bcidal/evalstats.hpp"

#include "bcidal/error.hpp"

#include <boost/math/special_functions/beta.hpp>

#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace bcidal::eval {

std::vector<Fold> make_blockwise_folds(int n, int k, int margin) {
  if (n < 1 || k < 1 || k > n) throw ConfigError("blockwise folds: need 1 <= k <= n");
  if (margin < 0) throw ConfigError("blockwise folds: margin must be >= 0");
  const int block = n / k;
  std::vector<Fold> folds;
  folds.reserve(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    const int lo = j * block;
    const int hi = (j == k - 1) ? n : lo + block;
    Fold f;
    for (int i = lo; i < hi; ++i) f.test.push_back(i);
    for (int i = 0; i < n; ++i)
      if (i < lo - margin || i >= hi + margin) f.train.push_back(i);
    if (f.train.empty())
      throw ConfigError("blockwise folds: margin " + std::to_string(margin) + " leaves fold " + std::to_string(j) +
                        " without training trials");
    folds.push_back(std::move(f));
  }
  return folds;
}

double misclassification_error(std::span<const int> predicted, std::span<const int> actual) {
  if (predicted.empty()) throw DataError("misclassification_error: empty input");
  if (predicted.size() != actual.size()) throw DataError("misclassification_error: length mismatch");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    if (predicted[i] != actual[i]) ++wrong;
  return static_cast<double>(wrong) / static_cast<double>(predicted.size());
}

double f_survival(double f, double d1, double d2) {
  if (f <= 0.0) return 1.0;
  if (std::isinf(f)) return 0.0;
  return boost::math::ibeta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f));
}

double t_two_sided_p(double t, double df) {
  if (std::isinf(t)) return 0.0;
  if (t == 0.0) return 1.0;
  return boost::math::ibeta(df / 2.0, 0.5, df / (df + t * t));
}

AnovaResult rm_anova(const Eigen::MatrixXd& errors) {
  const Eigen::Index s = errors.rows();
  const Eigen::Index m = errors.cols();
  if (s < 2 || m < 2) throw DataError("rm_anova: need at least 2 subjects and 2 methods");
  if (!errors.allFinite()) throw DataError("rm_anova: non-finite entries");
  const double grand = errors.mean();
  AnovaResult r;
  r.ss_method = static_cast<double>(s) * (errors.colwise().mean().array() - grand).square().sum();
  r.ss_subject = static_cast<double>(m) * (errors.rowwise().mean().array() - grand).square().sum();
  const double ss_total = (errors.array() - grand).square().sum();
  r.ss_error = std::max(0.0, ss_total - r.ss_method - r.ss_subject);
  r.df_effect = static_cast<int>(m - 1);
  r.df_error = static_cast<int>((m - 1) * (s - 1));
  const double ms_method = r.ss_method / r.df_effect;
  const double ms_error = r.ss_error / r.df_error;
  // Relative floor so that exact ties do not produce 0/roundoff ratios.
  const double tiny = 1e-14 * std::max(1.0, ss_total);
  if (r.ss_error <= tiny) {
    if (r.ss_method <= tiny) {
      r.f_stat = 0.0;
      r.p_value = 1.0;
    } else {
      r.f_stat = std::numeric_limits<double>::infinity();
      r.p_value = 0.0;
    }
    return r;
  }
  r.f_stat = ms_method / ms_error;
  r.p_value = f_survival(r.f_stat, r.df_effect, r.df_error);
  return r;
}

std::vector<double> bonferroni_adjust(std::span<const double> p_values, int m) {
  if (m < 1 || static_cast<std::size_t>(m) < p_values.size())
    throw ConfigError("bonferroni_adjust: m must be at least the number of p-values");
  std::vector<double> out;
  out.reserve(p_values.size());
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) throw DataError("bonferroni_adjust: p-value outside [0, 1]");
    out.push_back(std::min(1.0, m * p));
  }
  return out;
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double mu = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - mu) * (x - mu);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

TTestResult paired_ttest(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("paired_ttest: length mismatch");
  if (a.size() < 2) throw DataError("paired_ttest: need at least 2 pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  TTestResult r;
  r.df = static_cast<int>(d.size() - 1);
  const double md = mean(d);
  const double sd = sample_std(d);
  if (sd == 0.0) {
    if (md == 0.0) {
      r.t = 0.0;
      r.p_two_sided = 1.0;
    } else {
      r.t = std::copysign(std::numeric_limits<double>::infinity(), md);
      r.p_two_sided = 0.0;
    }
    return r;
  }
  r.t = md / (sd / std::sqrt(static_cast<double>(d.size())));
  r.p_two_sided = t_two_sided_p(r.t, r.df);
  return r;
}

}  // namespace bcidal::eval
