#include "bcidal/prox.hpp"

#include "bcidal/error.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

namespace bcidal::dal {

std::string to_string(RegularizerKind k) {
  switch (k) {
    case RegularizerKind::L1: return "l1";
    case RegularizerKind::GroupRows: return "group_rows";
    case RegularizerKind::TraceNorm: return "trace_norm";
  }
  return "?";
}

RegularizerKind regularizer_kind_from_string(const std::string& s) {
  if (s == "l1") return RegularizerKind::L1;
  if (s == "group_rows") return RegularizerKind::GroupRows;
  if (s == "trace_norm") return RegularizerKind::TraceNorm;
  throw ConfigError("unknown regularizer kind '" + s + "'");
}

BlockLayout::BlockLayout(std::vector<BlockShape> shapes) : shapes_(std::move(shapes)) {
  offsets_.reserve(shapes_.size());
  for (const auto& s : shapes_) {
    offsets_.push_back(size_);
    size_ += s.rows * s.cols;
  }
}

Eigen::Map<const Eigen::MatrixXd> BlockLayout::block(const Eigen::VectorXd& v, std::size_t k) const {
  return {v.data() + offsets_[k], shapes_[k].rows, shapes_[k].cols};
}

Eigen::Map<Eigen::MatrixXd> BlockLayout::block(Eigen::VectorXd& v, std::size_t k) const {
  return {v.data() + offsets_[k], shapes_[k].rows, shapes_[k].cols};
}

Eigen::VectorXd BlockLayout::stack(const std::vector<Eigen::MatrixXd>& blocks) const {
  if (blocks.size() != shapes_.size()) throw DataError("block count does not match layout");
  Eigen::VectorXd v(size_);
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    if (blocks[k].rows() != shapes_[k].rows || blocks[k].cols() != shapes_[k].cols)
      throw DataError("block " + std::to_string(k) + " shape does not match layout");
    block(v, k) = blocks[k];
  }
  return v;
}

std::vector<Eigen::MatrixXd> BlockLayout::unstack(const Eigen::VectorXd& v) const {
  std::vector<Eigen::MatrixXd> out;
  for (std::size_t k = 0; k < shapes_.size(); ++k) out.emplace_back(block(v, k));
  return out;
}

Eigen::MatrixXd prox_l1(const Eigen::MatrixXd& v, double kappa) {
  return v.unaryExpr([kappa](double x) {
    const double m = std::abs(x) - kappa;
    return m > 0.0 ? std::copysign(m, x) : 0.0;
  });
}

Eigen::MatrixXd prox_group_rows(const Eigen::MatrixXd& v, double kappa) {
  Eigen::MatrixXd out = v;
  for (Eigen::Index r = 0; r < v.rows(); ++r) {
    const double nrm = v.row(r).norm();
    if (nrm <= kappa || nrm == 0.0)
      out.row(r).setZero();
    else
      out.row(r) *= 1.0 - kappa / nrm;
  }
  return out;
}

Eigen::MatrixXd prox_trace(const Eigen::MatrixXd& v, double kappa) {
  if (!v.allFinite()) throw NumericalError("prox_trace: non-finite input");
  if (kappa == 0.0) return v;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(v, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd s = (svd.singularValues().array() - kappa).cwiseMax(0.0).matrix();
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

Eigen::MatrixXd prox(RegularizerKind kind, const Eigen::MatrixXd& v, double kappa) {
  switch (kind) {
    case RegularizerKind::L1: return prox_l1(v, kappa);
    case RegularizerKind::GroupRows: return prox_group_rows(v, kappa);
    case RegularizerKind::TraceNorm: return prox_trace(v, kappa);
  }
  return v;
}

double norm_value(RegularizerKind kind, const Eigen::MatrixXd& v) {
  switch (kind) {
    case RegularizerKind::L1: return v.cwiseAbs().sum();
    case RegularizerKind::GroupRows: return v.rowwise().norm().sum();
    case RegularizerKind::TraceNorm: {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(v);
      return svd.singularValues().sum();
    }
  }
  return 0.0;
}

double dual_norm_value(RegularizerKind kind, const Eigen::MatrixXd& v) {
  if (v.size() == 0) return 0.0;
  switch (kind) {
    case RegularizerKind::L1: return v.cwiseAbs().maxCoeff();
    case RegularizerKind::GroupRows: return v.rowwise().norm().maxCoeff();
    case RegularizerKind::TraceNorm: {
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(v);
      return svd.singularValues()(0);
    }
  }
  return 0.0;
}

Eigen::VectorXd prox(RegularizerKind kind, const BlockLayout& layout, const Eigen::VectorXd& v, double kappa) {
  if (kind == RegularizerKind::L1) return prox_l1(v, kappa);
  Eigen::VectorXd out(v.size());
  for (std::size_t k = 0; k < layout.n_blocks(); ++k)
    layout.block(out, k) = prox(kind, Eigen::MatrixXd(layout.block(v, k)), kappa);
  return out;
}

double norm_value(RegularizerKind kind, const BlockLayout& layout, const Eigen::VectorXd& v) {
  double total = 0.0;
  for (std::size_t k = 0; k < layout.n_blocks(); ++k) total += norm_value(kind, Eigen::MatrixXd(layout.block(v, k)));
  return total;
}

double dual_norm_value(RegularizerKind kind, const BlockLayout& layout, const Eigen::VectorXd& v) {
  double best = 0.0;
  for (std::size_t k = 0; k < layout.n_blocks(); ++k)
    best = std::max(best, dual_norm_value(kind, Eigen::MatrixXd(layout.block(v, k))));
  return best;
}

ProxJacobian::ProxJacobian(RegularizerKind kind, const BlockLayout& layout, const Eigen::VectorXd& v, double kappa)
    : kind_(kind), layout_(layout), kappa_(kappa) {
  switch (kind) {
    case RegularizerKind::L1:
      for (Eigen::Index i = 0; i < v.size(); ++i)
        if (std::abs(v(i)) > kappa) active_.push_back(i);
      break;
    case RegularizerKind::GroupRows:
      for (std::size_t k = 0; k < layout.n_blocks(); ++k) {
        const auto shape = layout.shapes()[k];
        const auto blk = layout.block(v, k);
        for (Eigen::Index r = 0; r < shape.rows; ++r) {
          const double nrm = blk.row(r).norm();
          if (nrm <= kappa || nrm == 0.0) continue;
          GroupRow g;
          for (Eigen::Index c = 0; c < shape.cols; ++c) g.idx.push_back(layout.offset(k) + r + c * shape.rows);
          g.shrink = 1.0 - kappa / nrm;
          g.curvature = kappa / nrm;
          g.unit = blk.row(r).transpose() / nrm;
          groups_.push_back(std::move(g));
        }
      }
      break;
    case RegularizerKind::TraceNorm:
      for (std::size_t k = 0; k < layout.n_blocks(); ++k) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(layout.block(v, k)),
                                              Eigen::ComputeFullU | Eigen::ComputeFullV);
        SpectralBlock sb;
        sb.u = svd.matrixU();
        sb.w = svd.matrixV();
        sb.s = svd.singularValues();
        sb.g = (sb.s.array() - kappa).cwiseMax(0.0).matrix();
        spectral_.push_back(std::move(sb));
      }
      break;
  }
}

Eigen::MatrixXd ProxJacobian::apply_spectral(const SpectralBlock& sb, const Eigen::MatrixXd& d) const {
  const Eigen::Index m = sb.u.rows();
  const Eigen::Index p = sb.w.rows();
  const Eigen::Index r = sb.s.size();
  const Eigen::MatrixXd mm = sb.u.transpose() * d * sb.w;
  Eigen::MatrixXd res = Eigen::MatrixXd::Zero(m, p);
  const double scale = r > 0 ? std::max(sb.s(0), 1.0) : 1.0;
  for (Eigen::Index i = 0; i < r; ++i) {
    res(i, i) = sb.s(i) > kappa_ ? mm(i, i) : 0.0;
    for (Eigen::Index j = i + 1; j < r; ++j) {
      const double sym = 0.5 * (mm(i, j) + mm(j, i));
      const double asym = 0.5 * (mm(i, j) - mm(j, i));
      const double ds = sb.s(i) - sb.s(j);
      double f1;
      if (std::abs(ds) > 1e-13 * scale)
        f1 = (sb.g(i) - sb.g(j)) / ds;
      else
        f1 = sb.s(i) > kappa_ ? 1.0 : 0.0;
      const double ss = sb.s(i) + sb.s(j);
      const double f2 = ss > 0.0 ? (sb.g(i) + sb.g(j)) / ss : 0.0;
      res(i, j) = f1 * sym + f2 * asym;
      res(j, i) = f1 * sym - f2 * asym;
    }
  }
  // Rectangular remainder couples each singular direction with the null space.
  for (Eigen::Index i = r; i < m; ++i)
    for (Eigen::Index j = 0; j < r; ++j) res(i, j) = sb.s(j) > 0.0 ? sb.g(j) / sb.s(j) * mm(i, j) : 0.0;
  for (Eigen::Index j = r; j < p; ++j)
    for (Eigen::Index i = 0; i < r; ++i) res(i, j) = sb.s(i) > 0.0 ? sb.g(i) / sb.s(i) * mm(i, j) : 0.0;
  return sb.u * res * sb.w.transpose();
}

Eigen::VectorXd ProxJacobian::apply(const Eigen::VectorXd& d) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(d.size());
  switch (kind_) {
    case RegularizerKind::L1:
      for (Eigen::Index i : active_) out(i) = d(i);
      break;
    case RegularizerKind::GroupRows:
      for (const auto& g : groups_) {
        const auto n = static_cast<Eigen::Index>(g.idx.size());
        Eigen::VectorXd dr(n);
        for (Eigen::Index c = 0; c < n; ++c) dr(c) = d(g.idx[c]);
        const Eigen::VectorXd res = g.shrink * dr + g.curvature * g.unit.dot(dr) * g.unit;
        for (Eigen::Index c = 0; c < n; ++c) out(g.idx[c]) = res(c);
      }
      break;
    case RegularizerKind::TraceNorm:
      for (std::size_t k = 0; k < layout_.n_blocks(); ++k)
        layout_.block(out, k) = apply_spectral(spectral_[k], Eigen::MatrixXd(layout_.block(d, k)));
      break;
  }
  return out;
}

Eigen::MatrixXd ProxJacobian::sandwich(const Eigen::MatrixXd& a) const {
  const Eigen::Index n = a.rows();
  switch (kind_) {
    case RegularizerKind::L1: {
      Eigen::MatrixXd sub(n, static_cast<Eigen::Index>(active_.size()));
      for (std::size_t j = 0; j < active_.size(); ++j) sub.col(static_cast<Eigen::Index>(j)) = a.col(active_[j]);
      return sub * sub.transpose();
    }
    case RegularizerKind::GroupRows: {
      Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
      for (const auto& g : groups_) {
        Eigen::MatrixXd sub(n, static_cast<Eigen::Index>(g.idx.size()));
        for (std::size_t j = 0; j < g.idx.size(); ++j) sub.col(static_cast<Eigen::Index>(j)) = a.col(g.idx[j]);
        const Eigen::VectorXd proj = sub * g.unit;
        out.noalias() += g.shrink * (sub * sub.transpose());
        out.noalias() += g.curvature * (proj * proj.transpose());
      }
      return out;
    }
    case RegularizerKind::TraceNorm: {
      Eigen::MatrixXd ja(a.cols(), n);
      for (Eigen::Index i = 0; i < n; ++i) ja.col(i) = apply(a.row(i).transpose());
      Eigen::MatrixXd out = a * ja;
      return 0.5 * (out + out.transpose());
    }
  }
  return Eigen::MatrixXd::Zero(n, n);
}

}  // namespace bcidal::dal
