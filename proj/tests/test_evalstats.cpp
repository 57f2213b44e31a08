#include <doctest.h>

#include "bcidal/error.hpp"
#include "bcidal/evalstats.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

#include <cmath>
#include <set>

using namespace bcidal::eval;
using namespace oracle;

namespace {

bool contains(const std::vector<int>& v, int x) { return std::find(v.begin(), v.end(), x) != v.end(); }

std::vector<int> range(int a, int b) {
  std::vector<int> v;
  for (int i = a; i < b; ++i) v.push_back(i);
  return v;
}

}  // namespace

TEST_CASE("blockwise fold examples") {
  const auto f10 = make_blockwise_folds(60, 10, 5);
  REQUIRE(f10.size() == 10);
  CHECK(f10[0].test == range(0, 6));
  CHECK(f10[0].train == range(11, 60));
  CHECK(f10[5].test == range(30, 36));
  std::vector<int> t5 = range(0, 25);
  for (int i : range(41, 60)) t5.push_back(i);
  CHECK(f10[5].train == t5);
  CHECK(f10[5].train.size() == 44);

  const auto f5 = make_blockwise_folds(60, 5, 5);
  CHECK(f5[2].test == range(24, 36));
  std::vector<int> t2 = range(0, 19);
  for (int i : range(41, 60)) t2.push_back(i);
  CHECK(f5[2].train == t2);
  CHECK(f5[2].train.size() == 38);

  const auto odd = make_blockwise_folds(23, 5, 0);
  CHECK(odd.back().test == range(16, 23));
  CHECK_THROWS_AS(make_blockwise_folds(3, 5, 0), bcidal::ConfigError);
  CHECK_THROWS_AS(make_blockwise_folds(10, 2, -1), bcidal::ConfigError);
}

TEST_CASE("folds partition the trials and respect the margin") {
  for (int n = 10; n <= 80; n += 7)
    for (int k = 2; k <= 10; ++k)
      for (int margin = 0; margin <= 6; ++margin) {
        if (n / k + n % k + 2 * margin >= n) continue;
        const auto folds = make_blockwise_folds(n, k, margin);
        std::multiset<int> seen;
        for (const auto& f : folds) {
          seen.insert(f.test.begin(), f.test.end());
          const int lo = f.test.front(), hi = f.test.back();
          for (int i = 0; i < n; ++i) {
            const int dist = i < lo ? lo - i : (i > hi ? i - hi : 0);
            CHECK(contains(f.train, i) == (dist > margin));
          }
        }
        CHECK(seen.size() == static_cast<std::size_t>(n));
        CHECK(std::set<int>(seen.begin(), seen.end()).size() == static_cast<std::size_t>(n));
      }
}

TEST_CASE("misclassification error") {
  const std::vector<int> a{1, -1, 1}, b{1, 1, 1}, c{-1, 1, -1};
  CHECK(misclassification_error(a, b) == doctest::Approx(1.0 / 3.0));
  CHECK(misclassification_error(a, a) == 0.0);
  CHECK(misclassification_error(a, c) == 1.0);
  CHECK_THROWS_AS(misclassification_error(a, std::vector<int>{1}), bcidal::DataError);
}

TEST_CASE("incomplete beta based tails match a high-precision series") {
  for (const double d1 : {1.0, 2.0, 3.0, 5.0, 10.0})
    for (const double d2 : {1.0, 2.0, 6.0, 20.0, 60.0})
      for (const double f : {0.1, 0.5, 1.0, 2.0, 5.0, 16.0}) {
        const double ref = static_cast<double>(ibeta_series(d2 / 2.0L, d1 / 2.0L, d2 / (d2 + d1 * static_cast<long double>(f))));
        CHECK(std::abs(f_survival(f, d1, d2) - ref) <= 1e-8);
      }
  for (const double df : {1.0, 2.0, 5.0, 30.0})
    for (const double t : {0.1, 1.0, 2.0, 4.0, 10.0}) {
      const double ref = static_cast<double>(ibeta_series(df / 2.0L, 0.5L, df / (df + static_cast<long double>(t) * t)));
      CHECK(std::abs(t_two_sided_p(t, df) - ref) <= 1e-8);
      CHECK(t_two_sided_p(-t, df) == t_two_sided_p(t, df));
    }
  CHECK(f_survival(0.0, 2, 3) == 1.0);
  CHECK(t_two_sided_p(0.0, 4) == 1.0);
}

TEST_CASE("rm_anova worked example") {
  Eigen::MatrixXd e(3, 2);
  e << 1, 2, 2, 3, 3, 5;
  const auto r = rm_anova(e);
  const auto ref = sums_of_squares(e);
  const double f_ref = (ref.ss_method / 1.0) / (ref.ss_error / 2.0);
  CHECK(f_ref == doctest::Approx(16.0).epsilon(1e-12));
  CHECK(r.f_stat == doctest::Approx(f_ref).epsilon(1e-12));
  CHECK(r.df_effect == 1);
  CHECK(r.df_error == 2);
  CHECK(std::abs(r.p_value - 0.0572) <= 5e-4);
  CHECK(r.p_value == doctest::Approx(static_cast<double>(ibeta_series(1.0L, 0.5L, 2.0L / 18.0L))).epsilon(1e-10));
  CHECK(r.ss_method == doctest::Approx(ref.ss_method));
  CHECK(r.ss_subject == doctest::Approx(ref.ss_subject));
  CHECK(r.ss_error == doctest::Approx(ref.ss_error));

  // Two levels: F equals the squared paired t statistic.
  const std::vector<double> a{2, 3, 5}, b{1, 2, 3};
  const auto t = paired_ttest(a, b);
  CHECK(t.t == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(t.df == 2);
  CHECK(std::abs(t.p_two_sided - 0.0572) <= 5e-4);
  CHECK(t.t * t.t == doctest::Approx(r.f_stat));
  CHECK(t.p_two_sided == doctest::Approx(r.p_value).epsilon(1e-10));
}

TEST_CASE("rm_anova on random matrices") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 30; ++rep) {
    const Eigen::MatrixXd e = testutil::random_matrix(rng, 7, 4).array().abs() * 0.2;
    const auto r = rm_anova(e);
    const auto ref = sums_of_squares(e);
    CHECK(r.df_effect == 3);
    CHECK(r.df_error == 18);
    CHECK(r.f_stat == doctest::Approx((ref.ss_method / 3) / (ref.ss_error / 18)).epsilon(1e-10));
    CHECK(r.p_value == doctest::Approx(static_cast<double>(ibeta_series(9.0L, 1.5L, 18.0L / (18.0L + 3.0L * r.f_stat)))).epsilon(1e-8));
    // Adding a per-subject offset leaves the method effect unchanged.
    Eigen::MatrixXd shifted = e;
    for (Eigen::Index i = 0; i < 7; ++i) shifted.row(i).array() += 0.1 * static_cast<double>(i);
    CHECK(rm_anova(shifted).f_stat == doctest::Approx(r.f_stat).epsilon(1e-9));
  }
}

TEST_CASE("degenerate inputs") {
  const auto r = rm_anova(Eigen::MatrixXd::Constant(4, 3, 0.25));
  CHECK(r.f_stat == 0.0);
  CHECK(r.p_value == 1.0);
  const std::vector<double> a{0.1, 0.2, 0.3};
  const auto t = paired_ttest(a, a);
  CHECK(t.t == 0.0);
  CHECK(t.p_two_sided == 1.0);
  CHECK_THROWS_AS(rm_anova(Eigen::MatrixXd::Ones(1, 3)), bcidal::DataError);
  CHECK_THROWS_AS(paired_ttest(a, std::vector<double>{1.0}), bcidal::DataError);
}

TEST_CASE("bonferroni") {
  const std::vector<double> p{0.01, 0.5, 0.2};
  const auto adj = bonferroni_adjust(p, 3);
  CHECK(adj[0] == doctest::Approx(0.03));
  CHECK(adj[1] == 1.0);
  CHECK(adj[2] == doctest::Approx(0.6));
  const std::vector<double> one{0.042};
  CHECK(bonferroni_adjust(one, 1) == one);
  CHECK_THROWS_AS(bonferroni_adjust(p, 2), bcidal::ConfigError);
}

TEST_CASE("mean and sample std") {
  const std::vector<double> v{2, 4, 4, 4, 5, 5, 7, 9};
  CHECK(mean(v) == 5.0);
  CHECK(sample_std(v) == doctest::Approx(std::sqrt(32.0 / 7.0)));
  CHECK(sample_std(std::vector<double>{3.0}) == 0.0);
}
