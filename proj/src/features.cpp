#include "bcidal/features.hpp"

#include "bcidal/error.hpp"

namespace bcidal::dal {

std::string to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::SecondOrder: return "second_order";
    case FeatureKind::FirstOrder: return "first_order";
    case FeatureKind::Augmented: return "augmented";
  }
  return "?";
}

FeatureKind feature_kind_from_string(const std::string& s) {
  if (s == "second_order") return FeatureKind::SecondOrder;
  if (s == "first_order") return FeatureKind::FirstOrder;
  if (s == "augmented") return FeatureKind::Augmented;
  throw ConfigError("unknown feature map kind '" + s + "'");
}

Eigen::MatrixXd second_order_block(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd c = x * x.transpose();
  c = (0.5 * (c + c.transpose())).eval();
  const double tr = c.trace();
  if (!(tr > 0.0)) throw DataError("second-order features: zero-energy trial");
  return c / tr;
}

Eigen::MatrixXd first_order_block(const Eigen::MatrixXd& x, int t_prime) {
  const Eigen::Index n = x.cols();
  if (t_prime < 2 || t_prime > n)
    throw ConfigError("first-order features: t_prime=" + std::to_string(t_prime) + " must lie in [2, " +
                      std::to_string(n) + "]");
  Eigen::MatrixXd out(x.rows(), t_prime);
  for (int j = 0; j < t_prime; ++j) {
    const Eigen::Index lo = j * n / t_prime;
    const Eigen::Index hi = (j + 1) * n / t_prime;
    out.col(j) = x.middleCols(lo, hi - lo).rowwise().mean();
  }
  return out;
}

std::vector<TrialFeature> build_raw_feature_blocks(const Session& session, const FeatureMapSpec& spec) {
  std::vector<TrialFeature> out;
  out.reserve(session.trials.size());
  for (const Trial& t : session.trials) {
    TrialFeature f;
    f.label = label_sign(t.label);
    switch (spec.kind) {
      case FeatureKind::SecondOrder:
        f.blocks.push_back(second_order_block(t.data));
        break;
      case FeatureKind::FirstOrder:
        f.blocks.push_back(first_order_block(t.data, spec.t_prime));
        break;
      case FeatureKind::Augmented:
        f.blocks.push_back(first_order_block(t.data, spec.t_prime));
        f.blocks.push_back(second_order_block(t.data));
        break;
    }
    out.push_back(std::move(f));
  }
  return out;
}

BlockNormalizer fit_block_normalizer(std::span<const TrialFeature> features, const FeatureMapSpec& spec,
                                     std::span<const int> rows) {
  BlockNormalizer norm;
  if (features.empty()) throw DataError("fit_block_normalizer: no trials");
  const std::size_t n_blocks = features.front().blocks.size();
  norm.factors.assign(n_blocks, 1.0);
  if (spec.kind != FeatureKind::Augmented) return norm;
  if (n_blocks != 2) throw DataError("fit_block_normalizer: augmented features need two blocks");
  for (std::size_t k = 0; k < n_blocks; ++k) {
    double total = 0.0;
    std::size_t count = 0;
    auto visit = [&](const TrialFeature& f) {
      total += f.blocks[k].norm();
      ++count;
    };
    if (rows.empty()) {
      for (const auto& f : features) visit(f);
    } else {
      for (int r : rows) visit(features[static_cast<std::size_t>(r)]);
    }
    const double mean = total / static_cast<double>(count);
    if (!(mean > 0.0)) throw DataError("fit_block_normalizer: block " + std::to_string(k) + " is identically zero");
    norm.factors[k] = spec.block_scales[k] / mean;
  }
  return norm;
}

TrialFeature apply_block_normalizer(TrialFeature feature, const BlockNormalizer& norm) {
  if (feature.blocks.size() != norm.factors.size()) throw DataError("block normalizer: block count mismatch");
  for (std::size_t k = 0; k < feature.blocks.size(); ++k) feature.blocks[k] *= norm.factors[k];
  return feature;
}

void apply_block_normalizer(std::vector<TrialFeature>& features, const BlockNormalizer& norm) {
  for (auto& f : features) f = apply_block_normalizer(std::move(f), norm);
}

std::vector<TrialFeature> build_feature_blocks(const Session& session, const FeatureMapSpec& spec) {
  auto features = build_raw_feature_blocks(session, spec);
  apply_block_normalizer(features, fit_block_normalizer(features, spec));
  return features;
}

}  // namespace bcidal::dal
