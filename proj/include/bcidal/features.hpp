#pragma once

#include "bcidal/dataset.hpp"

#include <Eigen/Dense>

#include <array>
#include <span>
#include <string>
#include <vector>

namespace bcidal::dal {

enum class FeatureKind { SecondOrder, FirstOrder, Augmented };

std::string to_string(FeatureKind k);
FeatureKind feature_kind_from_string(const std::string& s);

struct FeatureMapSpec {
  FeatureKind kind = FeatureKind::SecondOrder;
  int t_prime = 16;
  std::array<double, 2> block_scales{1.0, 1.0};
};

/// Per-trial feature matrices. Augmented trials carry the first-order block
/// followed by the second-order block.
struct TrialFeature {
  std::vector<Eigen::MatrixXd> blocks;
  double label = 1.0;  // ±1
};

/// Per-block multipliers learned on a training set (all ones unless augmented).
struct BlockNormalizer {
  std::vector<double> factors;
};

/// X X^T / trace(X X^T).
Eigen::MatrixXd second_order_block(const Eigen::MatrixXd& x);

/// channels × t_prime matrix of window means over t_prime contiguous windows.
Eigen::MatrixXd first_order_block(const Eigen::MatrixXd& x, int t_prime);

/// Unnormalized blocks for every trial of the session.
std::vector<TrialFeature> build_raw_feature_blocks(const Session& session, const FeatureMapSpec& spec);

/// For augmented maps: block k gets block_scales[k] / (mean Frobenius norm of block k over `rows`).
/// `rows` empty means all trials.
BlockNormalizer fit_block_normalizer(std::span<const TrialFeature> features, const FeatureMapSpec& spec,
                                     std::span<const int> rows = {});

void apply_block_normalizer(std::vector<TrialFeature>& features, const BlockNormalizer& norm);
TrialFeature apply_block_normalizer(TrialFeature feature, const BlockNormalizer& norm);

/// Raw blocks with the normalizer fitted on the whole session.
std::vector<TrialFeature> build_feature_blocks(const Session& session, const FeatureMapSpec& spec);

}  // namespace bcidal::dal
