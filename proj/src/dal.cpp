#include "bcidal/dal.hpp"

#include "bcidal/error.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace bcidal::dal {

std::string to_string(Preset p) {
  switch (p) {
    case Preset::GLR: return "GLR";
    case Preset::DS: return "DS";
    case Preset::L1: return "L1";
  }
  return "?";
}

Preset preset_from_string(const std::string& s) {
  if (s == "GLR" || s == "glr") return Preset::GLR;
  if (s == "DS" || s == "ds") return Preset::DS;
  if (s == "L1" || s == "l1") return Preset::L1;
  throw ConfigError("unknown DAL preset '" + s + "'");
}

RegularizerKind preset_regularizer(Preset p) {
  switch (p) {
    case Preset::GLR: return RegularizerKind::GroupRows;
    case Preset::DS: return RegularizerKind::TraceNorm;
    case Preset::L1: return RegularizerKind::L1;
  }
  return RegularizerKind::L1;
}

FeatureKind preset_feature_kind(Preset p) {
  switch (p) {
    case Preset::GLR: return FeatureKind::SecondOrder;
    case Preset::DS: return FeatureKind::Augmented;
    case Preset::L1: return FeatureKind::FirstOrder;
  }
  return FeatureKind::SecondOrder;
}

DalProblem make_problem(std::span<const TrialFeature> features, std::span<const int> rows) {
  std::vector<int> all;
  if (rows.empty()) {
    all.resize(features.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    rows = all;
  }
  if (rows.empty()) throw DataError("make_problem: no trials");
  DalProblem p;
  const TrialFeature& first = features[static_cast<std::size_t>(rows.front())];
  std::vector<BlockShape> shapes;
  for (const auto& b : first.blocks) shapes.push_back({b.rows(), b.cols()});
  p.layout = BlockLayout(std::move(shapes));
  p.design.resize(static_cast<Eigen::Index>(rows.size()), p.layout.size());
  p.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const TrialFeature& f = features[static_cast<std::size_t>(rows[i])];
    p.design.row(static_cast<Eigen::Index>(i)) = p.layout.stack(f.blocks).transpose();
    if (f.label != 1.0 && f.label != -1.0) throw DataError("make_problem: labels must be +1 or -1");
    p.labels(static_cast<Eigen::Index>(i)) = f.label;
  }
  return p;
}

namespace {

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

double softplus(double u) { return u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u)); }

double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

// a_i = -y_i * dloss/dz_i at the given primal point.
Eigen::VectorXd dual_from_primal(const DalProblem& problem, const Eigen::VectorXd& weights, double bias) {
  const Eigen::VectorXd z = (problem.design * weights).array() + bias;
  Eigen::VectorXd a(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) a(i) = sigmoid(-problem.labels(i) * z(i));
  return a;
}

void require_both_classes(const DalProblem& problem) {
  const auto n_pos = (problem.labels.array() > 0.0).count();
  if (n_pos == 0 || n_pos == problem.n()) throw DataError("DAL problem needs both classes");
}

// Null-model optimum: W = 0, b = log(n+/n-), a_i = sigmoid(-y_i b).
struct NullModel {
  double bias;
  Eigen::VectorXd dual;
};

NullModel null_model(const DalProblem& problem) {
  require_both_classes(problem);
  const double n = static_cast<double>(problem.n());
  const double n_pos = static_cast<double>((problem.labels.array() > 0.0).count());
  const double n_neg = n - n_pos;
  NullModel nm;
  nm.bias = std::log(n_pos / n_neg);
  nm.dual.resize(problem.n());
  for (Eigen::Index i = 0; i < problem.n(); ++i) nm.dual(i) = problem.labels(i) > 0.0 ? n_neg / n : n_pos / n;
  return nm;
}

// Inner objective of one proximal-point step, as a function of the folded
// dual variables a in (0,1)^n:
//   phi(a) = (1/n) sum h(a_i) + (|prox(v)|^2 + bias^2) / (2 eta)
//   v = w0 + (eta/n) A^T (y .* a),  bias = b0 + (eta/n) y^T a
class InnerObjective {
 public:
  InnerObjective(const DalProblem& p, RegularizerKind kind, double lambda, double eta, const Eigen::VectorXd& w0,
                 double b0)
      : p_(p), kind_(kind), kappa_(eta * lambda), eta_(eta), w0_(w0), b0_(b0) {}

  struct Eval {
    double phi = 0.0;
    Eigen::VectorXd v, prox, grad;
    double bias = 0.0;
  };

  Eval eval(const Eigen::VectorXd& a, bool with_grad) const {
    const double n = static_cast<double>(p_.n());
    const Eigen::VectorXd ya = p_.labels.cwiseProduct(a);
    Eval e;
    e.v = w0_ + (eta_ / n) * (p_.design.transpose() * ya);
    e.prox = prox(kind_, p_.layout, e.v, kappa_);
    e.bias = b0_ + (eta_ / n) * ya.sum();
    double ent = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) ent += xlogx(a(i)) + xlogx(1.0 - a(i));
    e.phi = ent / n + (e.prox.squaredNorm() + e.bias * e.bias) / (2.0 * eta_);
    if (with_grad) {
      const Eigen::VectorXd z = (p_.design * e.prox).array() + e.bias;
      e.grad.resize(a.size());
      for (Eigen::Index i = 0; i < a.size(); ++i)
        e.grad(i) = (std::log(a(i) / (1.0 - a(i))) + p_.labels(i) * z(i)) / n;
    }
    return e;
  }

  Eigen::MatrixXd hessian(const Eigen::VectorXd& a, const Eval& e) const {
    const double n = static_cast<double>(p_.n());
    const ProxJacobian jac(kind_, p_.layout, e.v, kappa_);
    Eigen::MatrixXd h = jac.sandwich(p_.design);
    h.array() += 1.0;  // bias direction
    h = (eta_ / (n * n)) * (p_.labels.asDiagonal() * h * p_.labels.asDiagonal());
    for (Eigen::Index i = 0; i < a.size(); ++i) h(i, i) += 1.0 / (n * a(i) * (1.0 - a(i)));
    return h;
  }

 private:
  const DalProblem& p_;
  RegularizerKind kind_;
  double kappa_;
  double eta_;
  const Eigen::VectorXd& w0_;
  double b0_;
};

struct InnerOutcome {
  InnerObjective::Eval eval;
  int newton_steps = 0;
};

// Gradient norm ignoring coordinates pinned at a bound whose gradient pushes
// them further out.
double projected_grad_norm(const Eigen::VectorXd& a, const Eigen::VectorXd& g, double pin) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if ((a(i) < pin && g(i) > 0.0) || (1.0 - a(i) < pin && g(i) < 0.0)) continue;
    s += g(i) * g(i);
  }
  return std::sqrt(s);
}

InnerOutcome minimize_inner(const InnerObjective& obj, Eigen::VectorXd& a, const SolverOptions& opts) {
  constexpr double kPin = 1e-300;
  InnerOutcome out;
  out.eval = obj.eval(a, true);
  for (int it = 0; it < opts.inner_max_newton; ++it) {
    if (projected_grad_norm(a, out.eval.grad, kPin) <= opts.inner_tol) break;
    const Eigen::MatrixXd h = obj.hessian(a, out.eval);
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    Eigen::VectorXd step;
    if (llt.info() == Eigen::Success) {
      step = -llt.solve(out.eval.grad);
    } else {
      step = -h.ldlt().solve(out.eval.grad);
    }
    if (!step.allFinite()) throw NumericalError("DAL inner Newton: non-finite step");
    ++out.newton_steps;

    // Coordinates that would leave (0,1) move 99.5% of the way to the bound
    // instead of shortening the whole step.
    Eigen::VectorXd dir = step;
    for (Eigen::Index i = 0; i < a.size(); ++i) dir(i) = std::clamp(dir(i), -0.995 * a(i), 0.995 * (1.0 - a(i)));
    double slope = out.eval.grad.dot(dir);
    double t = 1.0;
    if (!(slope < 0.0)) {
      dir = step;
      for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (step(i) > 0.0) t = std::min(t, 0.995 * (1.0 - a(i)) / step(i));
        if (step(i) < 0.0) t = std::min(t, -0.995 * a(i) / step(i));
      }
      slope = out.eval.grad.dot(dir);
    }
    // no descent left at working precision
    if (!(-slope > 1e-15 * std::max(1.0, std::abs(out.eval.phi)))) break;
    bool accepted = false;
    while (t > 1e-14) {
      const Eigen::VectorXd trial = a + t * dir;
      InnerObjective::Eval e = obj.eval(trial, false);
      if (e.phi <= out.eval.phi + 1e-4 * t * slope) {
        a = trial;
        out.eval = obj.eval(a, true);
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
  }
  return out;
}

}  // namespace

LossAndGrad logistic_loss_and_grad(const Eigen::VectorXd& scores, const Eigen::VectorXd& labels) {
  if (scores.size() != labels.size()) throw DataError("logistic loss: score and label lengths differ");
  LossAndGrad out;
  const double n = static_cast<double>(scores.size());
  out.grad.resize(scores.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    const double yz = labels(i) * scores(i);
    total += softplus(-yz);
    out.grad(i) = -labels(i) * sigmoid(-yz) / n;
  }
  out.loss = total / n;
  return out;
}

double lambda_max(const DalProblem& problem, RegularizerKind kind) {
  const NullModel nm = null_model(problem);
  const Eigen::VectorXd g =
      problem.design.transpose() * problem.labels.cwiseProduct(nm.dual) / static_cast<double>(problem.n());
  return dual_norm_value(kind, problem.layout, g);
}

double primal_objective(const DalProblem& problem, const RegularizerSpec& reg, const Eigen::VectorXd& weights,
                        double bias) {
  const Eigen::VectorXd z = (problem.design * weights).array() + bias;
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) total += softplus(-problem.labels(i) * z(i));
  return total / static_cast<double>(problem.n()) + reg.lambda * norm_value(reg.kind, problem.layout, weights);
}

double dual_objective(const Eigen::VectorXd& dual) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < dual.size(); ++i) total += xlogx(dual(i)) + xlogx(1.0 - dual(i));
  return -total / static_cast<double>(dual.size());
}

Eigen::VectorXd feasible_dual(const DalProblem& problem, const RegularizerSpec& reg, const Eigen::VectorXd& dual) {
  Eigen::VectorXd a = dual;
  double sum_pos = 0.0, sum_neg = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) (problem.labels(i) > 0.0 ? sum_pos : sum_neg) += a(i);
  // Shrinking the heavier class keeps every entry inside [0, 1].
  if (sum_pos > sum_neg) {
    const double f = sum_pos > 0.0 ? sum_neg / sum_pos : 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i)
      if (problem.labels(i) > 0.0) a(i) *= f;
  } else if (sum_neg > sum_pos) {
    const double f = sum_neg > 0.0 ? sum_pos / sum_neg : 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i)
      if (problem.labels(i) < 0.0) a(i) *= f;
  }
  const Eigen::VectorXd g = problem.design.transpose() * problem.labels.cwiseProduct(a) / static_cast<double>(problem.n());
  const double r = dual_norm_value(reg.kind, problem.layout, g);
  if (r > reg.lambda) a *= reg.lambda / r;
  return a;
}

GapReport duality_gap(const DalProblem& problem, const RegularizerSpec& reg, const Eigen::VectorXd& weights,
                      double bias, const Eigen::VectorXd& dual) {
  if (dual.size() != problem.n()) throw DataError("duality_gap: dual length does not match trial count");
  for (Eigen::Index i = 0; i < dual.size(); ++i)
    if (!(dual(i) >= 0.0 && dual(i) <= 1.0))
      throw DataError("duality_gap: dual variable " + std::to_string(i) + " outside [0, 1]");
  GapReport r;
  r.primal = primal_objective(problem, reg, weights, bias);
  r.dual = dual_objective(feasible_dual(problem, reg, dual));
  r.raw_gap = r.primal - r.dual;
  r.gap = std::max(0.0, r.raw_gap);
  return r;
}

DalResult dal_solve(const DalProblem& problem, const RegularizerSpec& reg, const SolverOptions& opts,
                    const DalState* warm_start) {
  require_both_classes(problem);
  if (problem.n() < 4) throw DataError("dal_solve: need at least 4 trials");
  if (!(reg.lambda > 0.0)) throw ConfigError("dal_solve: lambda must be positive");
  if (!(opts.eta0 > 0.0) || !(opts.eta_growth > 1.0) || opts.max_outer < 1 || !(opts.rel_gap_tol > 0.0))
    throw ConfigError("dal_solve: invalid solver options");

  const Eigen::Index d = problem.layout.size();
  DalState st;
  if (warm_start != nullptr && warm_start->weights.size() == d && warm_start->dual.size() == problem.n()) {
    st = *warm_start;
    st.dual = st.dual.cwiseMax(1e-12).cwiseMin(1.0 - 1e-12);
  } else {
    st.weights = Eigen::VectorXd::Zero(d);
    st.bias = 0.0;
    st.dual = Eigen::VectorXd::Constant(problem.n(), 0.5);
    st.eta = opts.eta0;
  }

  ConvergenceRecord rec;
  DalState best = st;
  double best_obj = std::numeric_limits<double>::infinity();
  double best_gap = std::numeric_limits<double>::infinity();
  for (int t = 0; t < opts.max_outer; ++t) {
    const InnerObjective obj(problem, reg.kind, reg.lambda, st.eta, st.weights, st.bias);
    InnerOutcome inner = minimize_inner(obj, st.dual, opts);
    rec.newton_steps += inner.newton_steps;
    st.weights = std::move(inner.eval.prox);
    st.bias = inner.eval.bias;
    if (!st.weights.allFinite() || !std::isfinite(st.bias) || !st.dual.allFinite())
      throw NumericalError("dal_solve: non-finite iterate at outer step " + std::to_string(t + 1));

    // Certify with the inner dual and with the loss gradient at the primal
    // iterate; both are feasible after scaling, so the smaller gap is valid.
    GapReport gap = duality_gap(problem, reg, st.weights, st.bias, st.dual);
    const GapReport alt = duality_gap(problem, reg, st.weights, st.bias, dual_from_primal(problem, st.weights, st.bias));
    if (alt.gap < gap.gap) gap = alt;
    const double rel = gap.gap / gap.primal;
    rec.outer_iterations = t + 1;
    rec.objective_history.push_back(gap.primal);
    if (gap.primal < best_obj) {
      best_obj = gap.primal;
      best_gap = rel;
      best = st;
    }
    if (rel <= opts.rel_gap_tol) {
      rec.converged = true;
      rec.objective = gap.primal;
      rec.final_relative_gap = rel;
      best = st;
      break;
    }
    st.eta = std::min(st.eta * opts.eta_growth, opts.eta_max);
  }
  if (!rec.converged) {
    rec.objective = best_obj;
    rec.final_relative_gap = best_gap;
  }

  DalResult res;
  res.state = best;
  res.model.weights = problem.layout.unstack(best.weights);
  res.model.bias = best.bias;
  res.model.regularizer = reg;
  res.model.convergence = std::move(rec);
  return res;
}

Prediction dal_predict(const DalModel& model, const TrialFeature& feature) {
  if (feature.blocks.size() != model.weights.size())
    throw DataError("dal_predict: feature has " + std::to_string(feature.blocks.size()) + " blocks, model has " +
                    std::to_string(model.weights.size()));
  Prediction p;
  p.score = model.bias;
  for (std::size_t k = 0; k < model.weights.size(); ++k) {
    if (feature.blocks[k].rows() != model.weights[k].rows() || feature.blocks[k].cols() != model.weights[k].cols())
      throw DataError("dal_predict: block " + std::to_string(k) + " shape mismatch");
    p.score += (model.weights[k].array() * feature.blocks[k].array()).sum();
  }
  p.label = p.score >= 0.0 ? 1 : -1;
  return p;
}

ProximalGradientResult proximal_gradient_solve(const DalProblem& problem, const RegularizerSpec& reg,
                                               const ProximalGradientOptions& opts) {
  require_both_classes(problem);
  const Eigen::Index n = problem.n();
  const Eigen::Index d = problem.layout.size();
  const double nd = static_cast<double>(n);

  Eigen::MatrixXd augmented(n, d + 1);
  augmented << problem.design, Eigen::VectorXd::Ones(n);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(augmented);
  const double smax = svd.singularValues()(0);
  const double lipschitz = smax * smax / (4.0 * nd);
  const double step = 1.0 / lipschitz;

  Eigen::VectorXd w = Eigen::VectorXd::Zero(d), w_prev = w, yw = w;
  double b = 0.0, b_prev = 0.0, yb = 0.0;
  double tk = 1.0;
  ProximalGradientResult res;
  for (int it = 1; it <= opts.max_iterations; ++it) {
    const Eigen::VectorXd z = (problem.design * yw).array() + yb;
    const LossAndGrad lg = logistic_loss_and_grad(z, problem.labels);
    w_prev = w;
    b_prev = b;
    w = prox(reg.kind, problem.layout, yw - step * (problem.design.transpose() * lg.grad), step * reg.lambda);
    b = yb - step * lg.grad.sum();

    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tk * tk));
    const double restart = (yw - w).dot(w - w_prev) + (yb - b) * (b - b_prev);
    if (restart > 0.0) {
      tk = 1.0;
      yw = w;
      yb = b;
    } else {
      const double mom = (tk - 1.0) / t_next;
      yw = w + mom * (w - w_prev);
      yb = b + mom * (b - b_prev);
      tk = t_next;
    }

    res.iterations = it;
    if (it % opts.gap_check_every == 0 || it == opts.max_iterations) {
      const Eigen::VectorXd zc = (problem.design * w).array() + b;
      Eigen::VectorXd a(n);
      for (Eigen::Index i = 0; i < n; ++i) a(i) = sigmoid(-problem.labels(i) * zc(i));
      const GapReport g = duality_gap(problem, reg, w, b, a);
      res.objective = g.primal;
      res.relative_gap = g.gap / g.primal;
      if (res.relative_gap <= opts.rel_gap_tol) {
        res.converged = true;
        break;
      }
    }
  }
  res.weights = w;
  res.bias = b;
  return res;
}

std::vector<double> lambda_grid(double lambda_max, int count, double min_ratio) {
  if (count < 1 || !(lambda_max > 0.0) || !(min_ratio > 0.0 && min_ratio <= 1.0))
    throw ConfigError("lambda_grid: invalid arguments");
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(count));
  if (count == 1) return {lambda_max};
  const double step = std::log(min_ratio) / static_cast<double>(count - 1);
  for (int i = 0; i < count; ++i) grid.push_back(lambda_max * std::exp(step * i));
  return grid;
}

}  // namespace bcidal::dal
