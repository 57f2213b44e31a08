#include "bcidal/csp.hpp"
#include "bcidal/dal.hpp"
#include "bcidal/evalstats.hpp"
#include "bcidal/prox.hpp"
#include "bcidal/report.hpp"
#include "bcidal/signal.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>

using namespace bcidal;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string& detail) {
  std::printf("criterion %2d %s: %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

double average_pct(const CompareReport& rep, Method m) {
  for (std::size_t i = 0; i < rep.methods.size(); ++i)
    if (rep.methods[i] == m) return rep.average.cells[i].mean_pct;
  return std::nan("");
}

void criterion_1(const fs::path& work) {
  RunConfig cfg;
  cfg.subjects = 7;
  cfg.sessions = 5;
  cfg.seed = 1;
  cfg.synth.trials_per_class = 30;
  cfg.synth.erd_depth = 0.5;
  const fs::path data = work / "dataset_erd050";
  fs::remove_all(data);
  write_synthetic_dataset(cfg, data);
  const auto t0 = std::chrono::steady_clock::now();
  const CompareReport rep = run_compare(cfg, data);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ofstream(work / "compare_erd050.json", std::ios::binary) << compare_report_json(rep);
  std::ofstream(work / "compare_erd050.md", std::ios::binary) << compare_report_markdown(rep);
  const double csp = average_pct(rep, Method::CspLda), glr = average_pct(rep, Method::DalGlr);
  const bool shape = rep.rows.size() == 7 && rep.average.cells.size() == 4 && rep.failures.empty();
  const bool a = glr <= csp, b = csp > 5 && csp < 45 && glr > 5 && glr < 45, c = secs < 900.0;
  report(1, shape && a && b && c,
         fmt("CSP-LDA %.1f%%, DAL-GLR %.1f%%, DAL-DS %.1f%%, DAL-L1 %.1f%%", csp, glr,
             average_pct(rep, Method::DalDs), average_pct(rep, Method::DalL1)) +
             fmt(", compare took %.0f s on %.0f hardware threads", secs,
                 static_cast<double>(std::max(1u, std::thread::hardware_concurrency()))));
}

void criterion_2() {
  std::mt19937_64 rng(2002);
  double worst_obj = 0.0, worst_gap = 0.0;
  int worst_outer = 0, failed = 0;
  for (const dal::RegularizerKind kind :
       {dal::RegularizerKind::GroupRows, dal::RegularizerKind::TraceNorm, dal::RegularizerKind::L1}) {
    for (int rep = 0; rep < 20; ++rep) {
      const bool first_order = kind == dal::RegularizerKind::L1;
      const dal::DalProblem p = testutil::random_problem(rng, 40, 8, first_order ? 16 : 8, !first_order);
      const dal::RegularizerSpec reg{kind, 0.1 * dal::lambda_max(p, kind)};
      const auto loose = dal::dal_solve(p, reg);
      dal::SolverOptions tight;
      tight.rel_gap_tol = 1e-6;
      const auto certified = dal::dal_solve(p, reg, tight);
      dal::ProximalGradientOptions po;
      po.rel_gap_tol = 1e-9;
      const auto ref = dal::proximal_gradient_solve(p, reg, po);
      if (!loose.model.convergence.converged || !certified.model.convergence.converged || !ref.converged) ++failed;
      worst_gap = std::max(worst_gap, loose.model.convergence.final_relative_gap);
      worst_outer = std::max(worst_outer, loose.model.convergence.outer_iterations);
      worst_obj = std::max(worst_obj, std::abs(certified.model.convergence.objective - ref.objective) / std::abs(ref.objective));
    }
  }
  report(2, failed == 0 && worst_obj <= 1e-6 && worst_gap <= 1e-3 && worst_outer <= 100,
         fmt("60 instances, max relative objective difference %.2e, default run max gap %.2e in at most %.0f outer "
             "iterations, %.0f unconverged",
             worst_obj, worst_gap, worst_outer, failed));
}

void criterion_3() {
  std::mt19937_64 rng(3003);
  std::uniform_real_distribution<double> uk(0.0, 3.0);
  double r_l1 = 0, r_g = 0, r_t = 0, r_svt = 0;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Index r = 1 + static_cast<Eigen::Index>(rng() % 11), c = 1 + static_cast<Eigen::Index>(rng() % 16);
    const Eigen::MatrixXd v = testutil::random_matrix(rng, r, c, 0.5 + static_cast<double>(rng() % 4));
    const double kappa = uk(rng) + 1e-3;
    r_l1 = std::max(r_l1, oracle::l1_residual(v, dal::prox_l1(v, kappa), kappa));
    r_g = std::max(r_g, oracle::group_residual(v, dal::prox_group_rows(v, kappa), kappa));
    const Eigen::MatrixXd pt = dal::prox_trace(v, kappa);
    r_t = std::max(r_t, oracle::trace_residual(v, pt, kappa));
    r_svt = std::max(r_svt, (pt - oracle::svt_reference(v, kappa)).cwiseAbs().maxCoeff());
  }
  report(3, r_l1 <= 1e-10 && r_g <= 1e-10 && r_t <= 1e-10 && r_svt <= 1e-10,
         fmt("residuals l1 %.1e, group %.1e, trace %.1e; trace vs SVT oracle %.1e", r_l1, r_g, r_t, r_svt));
}

void criterion_4() {
  std::mt19937_64 rng(4004);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 5 + static_cast<int>(rng() % 60);
    const Eigen::VectorXd z = testutil::random_matrix(rng, n, 1, 2.0).col(0);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y(i) = (rng() % 2) ? 1.0 : -1.0;
    const auto lg = dal::logistic_loss_and_grad(z, y);
    Eigen::VectorXd fd(n);
    const double h = 1e-6;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd zp = z, zm = z;
      zp(i) += h;
      zm(i) -= h;
      fd(i) = (dal::logistic_loss_and_grad(zp, y).loss - dal::logistic_loss_and_grad(zm, y).loss) / (2 * h);
    }
    worst = std::max(worst, (fd - lg.grad).norm() / lg.grad.norm());
  }
  report(4, worst <= 1e-6, fmt("max relative gradient error %.2e over 100 instances", worst));
}

void criterion_5() {
  std::mt19937_64 rng(5005);
  double ortho = 0.0, pair = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    Eigen::MatrixXd a = testutil::random_spd(rng, 11), b = testutil::random_spd(rng, 11);
    a /= a.trace();
    b /= b.trace();
    const auto m = csp::fit_csp({a, 1}, {b, 1}, 3);
    const Eigen::MatrixXd& w = m.filters;
    ortho = std::max(ortho, (w.transpose() * (a + b) * w - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff());
    const Eigen::VectorXd second = (w.transpose() * b * w).diagonal();
    for (int j = 0; j < 6; ++j) pair = std::max(pair, std::abs(m.eigenvalues(j) + second(j) - 1.0));
  }
  report(5, ortho <= 1e-8 && pair <= 1e-8,
         fmt("max |W'(C1+C2)W - I| %.1e, max |lambda + lambda2 - 1| %.1e over 50 pairs", ortho, pair));
}

void criterion_6() {
  const signal::BandpassSpec spec;
  const auto c = signal::design_bandpass(spec);
  double peak = 0.0;
  for (double f = 0.01; f < 64.0; f += 0.01) peak = std::max(peak, std::abs(signal::frequency_response(c, f, 128.0)));
  const double lo = std::abs(signal::frequency_response(c, 6.0, 128.0)) / peak;
  const double hi = std::abs(signal::frequency_response(c, 32.0, 128.0)) / peak;
  const double dc = std::abs(signal::frequency_response(c, 0.0, 128.0));
  const double ny = std::abs(signal::frequency_response(c, 64.0, 128.0));
  report(6, std::abs(lo - 0.7071) <= 0.02 && std::abs(hi - 0.7071) <= 0.02 && dc <= 1e-10 && ny <= 1e-10,
         fmt("gain 6 Hz %.4f, 32 Hz %.4f, 0 Hz %.1e, 64 Hz %.1e", lo, hi, dc, ny));
}

void criterion_7() {
  int violations = 0, checked = 0;
  for (const int k : {5, 10}) {
    for (const auto& fold : eval::make_blockwise_folds(60, k, 5)) {
      const int lo = fold.test.front(), hi = fold.test.back();
      for (const int i : fold.train) {
        ++checked;
        for (const int t : fold.test)
          if (std::abs(i - t) <= 5) {
            ++violations;
            break;
          }
        if (i >= lo && i <= hi) ++violations;
      }
    }
  }
  report(7, violations == 0 && checked > 0, fmt("%.0f violations among %.0f training indices", violations, checked));
}

void criterion_8() {
  Eigen::MatrixXd e(3, 2);
  e << 1, 2, 2, 3, 3, 5;
  const auto ss = oracle::sums_of_squares(e);
  const double f_ref = ss.ss_method / (ss.ss_error / 2.0);
  const double p_ref = static_cast<double>(oracle::ibeta_series(1.0L, 0.5L, 2.0L / (2.0L + f_ref)));
  const auto an = eval::rm_anova(e);
  const std::vector<double> a{2, 3, 5}, b{1, 2, 3};
  const auto tt = eval::paired_ttest(a, b);
  const auto flat = eval::rm_anova(Eigen::MatrixXd::Constant(5, 3, 0.3));
  const bool ok = std::abs(an.f_stat - 16.0) <= 1e-9 && std::abs(an.f_stat - f_ref) <= 1e-9 && an.df_effect == 1 &&
                  an.df_error == 2 && std::abs(an.p_value - 0.0572) <= 5e-4 && std::abs(an.p_value - p_ref) <= 1e-9 &&
                  std::abs(tt.t - 4.0) <= 1e-9 && tt.df == 2 && std::abs(tt.p_two_sided - 0.0572) <= 5e-4 &&
                  flat.f_stat == 0.0 && flat.p_value == 1.0;
  report(8, ok, fmt("F = %.4f (oracle %.4f), p = %.5f, paired t = %.4f", an.f_stat, f_ref, an.p_value, tt.t) +
                    fmt(", all-equal F = %.1f p = %.1f", flat.f_stat, flat.p_value));
}

void criterion_9(const fs::path& work) {
  RunConfig cfg;
  cfg.subjects = 2;
  cfg.sessions = 2;
  cfg.seed = 900;
  const fs::path data = work / "dataset_determinism";
  fs::remove_all(data);
  write_synthetic_dataset(cfg, data);
  const std::string a = compare_report_json(run_compare(cfg, data));
  const std::string b = compare_report_json(run_compare(cfg, data));
  report(9, a == b && !a.empty(), fmt("two compare runs, %.0f bytes each, ", static_cast<double>(a.size())) +
                                      (a == b ? "identical" : "different"));
}

void criterion_10(const fs::path& work) {
  RunConfig cfg;
  cfg.subjects = 7;
  cfg.sessions = 5;
  cfg.seed = 1001;
  cfg.synth.erd_depth = 0.0;
  const fs::path data = work / "dataset_erd000";
  fs::remove_all(data);
  write_synthetic_dataset(cfg, data);
  const CompareReport rep = run_compare(cfg, data);
  std::ofstream(work / "compare_erd000.json", std::ios::binary) << compare_report_json(rep);
  bool ok = rep.failures.empty();
  std::string detail;
  for (std::size_t i = 0; i < rep.methods.size(); ++i) {
    const double e = rep.average.cells[i].mean_pct / 100.0;
    ok = ok && e >= 0.35 && e <= 0.65;
    detail += (i ? ", " : "") + method_tag(rep.methods[i]) + fmt(" %.3f", e);
  }
  report(10, ok, "mean CV error without planted effect: " + detail);
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "bcidal_acceptance";
  fs::create_directories(work);
  criterion_1(work);
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9(work);
  criterion_10(work);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
