#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace bcidal::dal {

enum class RegularizerKind { L1, GroupRows, TraceNorm };

std::string to_string(RegularizerKind k);
RegularizerKind regularizer_kind_from_string(const std::string& s);

struct RegularizerSpec {
  RegularizerKind kind = RegularizerKind::GroupRows;
  double lambda = 1.0;
};

struct BlockShape {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  friend bool operator==(const BlockShape&, const BlockShape&) = default;
};

/// Stacks column-major vectorizations of several matrices into one vector.
class BlockLayout {
 public:
  BlockLayout() = default;
  explicit BlockLayout(std::vector<BlockShape> shapes);

  const std::vector<BlockShape>& shapes() const { return shapes_; }
  std::size_t n_blocks() const { return shapes_.size(); }
  Eigen::Index offset(std::size_t k) const { return offsets_[k]; }
  Eigen::Index size() const { return size_; }

  Eigen::Map<const Eigen::MatrixXd> block(const Eigen::VectorXd& v, std::size_t k) const;
  Eigen::Map<Eigen::MatrixXd> block(Eigen::VectorXd& v, std::size_t k) const;

  Eigen::VectorXd stack(const std::vector<Eigen::MatrixXd>& blocks) const;
  std::vector<Eigen::MatrixXd> unstack(const Eigen::VectorXd& v) const;

  friend bool operator==(const BlockLayout& a, const BlockLayout& b) { return a.shapes_ == b.shapes_; }

 private:
  std::vector<BlockShape> shapes_;
  std::vector<Eigen::Index> offsets_;
  Eigen::Index size_ = 0;
};

// Single-matrix proximal maps of kappa * norm.
Eigen::MatrixXd prox_l1(const Eigen::MatrixXd& v, double kappa);
Eigen::MatrixXd prox_group_rows(const Eigen::MatrixXd& v, double kappa);
Eigen::MatrixXd prox_trace(const Eigen::MatrixXd& v, double kappa);
Eigen::MatrixXd prox(RegularizerKind kind, const Eigen::MatrixXd& v, double kappa);

/// Norm of a single matrix (sum |v|, sum of row 2-norms, sum of singular values).
double norm_value(RegularizerKind kind, const Eigen::MatrixXd& v);
/// Its dual norm (max |v|, max row 2-norm, largest singular value).
double dual_norm_value(RegularizerKind kind, const Eigen::MatrixXd& v);

// Block-stacked versions: the regularizer is the sum over blocks, so the
// prox acts blockwise and the dual norm is the maximum over blocks.
Eigen::VectorXd prox(RegularizerKind kind, const BlockLayout& layout, const Eigen::VectorXd& v, double kappa);
double norm_value(RegularizerKind kind, const BlockLayout& layout, const Eigen::VectorXd& v);
double dual_norm_value(RegularizerKind kind, const BlockLayout& layout, const Eigen::VectorXd& v);

/// Generalized Jacobian of v -> prox(kind, layout, v, kappa) at a fixed v.
/// Symmetric positive semidefinite.
class ProxJacobian {
 public:
  ProxJacobian(RegularizerKind kind, const BlockLayout& layout, const Eigen::VectorXd& v, double kappa);

  Eigen::VectorXd apply(const Eigen::VectorXd& d) const;

  /// A J A^T for a design matrix whose rows live in the layout's vector space.
  Eigen::MatrixXd sandwich(const Eigen::MatrixXd& a) const;

 private:
  struct GroupRow {
    std::vector<Eigen::Index> idx;
    double shrink = 0.0;      // 1 - kappa / |v_r|
    double curvature = 0.0;   // kappa / |v_r|
    Eigen::VectorXd unit;     // v_r / |v_r|
  };
  struct SpectralBlock {
    Eigen::MatrixXd u, w;
    Eigen::VectorXd s, g;
  };

  Eigen::MatrixXd apply_spectral(const SpectralBlock& sb, const Eigen::MatrixXd& d) const;

  RegularizerKind kind_;
  BlockLayout layout_;
  double kappa_;
  std::vector<Eigen::Index> active_;  // l1
  std::vector<GroupRow> groups_;      // group rows
  std::vector<SpectralBlock> spectral_;
};

}  // namespace bcidal::dal
