#pragma once

#include "disc/rng.hpp"
#include "disc/types.hpp"

#include <array>
#include <optional>

namespace disc {

/// Parameters of the Gaussian-mixture generator.
///
/// Invariant features are x_inv = y * mu + eps_inv with eps_inv ~ N(0, sigma1);
/// spurious features are x_spu = gamma_y^(env) + eps_spu with
/// eps_spu ~ N(0, spu_noise_scale^2 I). Labels take values in {-1, +1}.
struct DataConfig {
  int p1 = 1;
  int p2 = 0;
  int n = 1;
  int k = 1;
  Vector mu;
  Matrix sigma1;
  double spu_noise_scale = 1.0;
  double class_balance = 0.5;
  double k0 = 0.2;  // minimum cross-environment variance of a gamma coordinate
  double k1 = 0.5;  // sigma1 eigenvalue floor
  double k2 = 2.0;  // sigma1 eigenvalue ceiling
  std::uint64_t seed = 0;

  int input_dim() const { return p1 + p2; }

  /// Throws ConfigError when any field is out of range.
  void validate() const;

  /// mu with equal entries 1/sqrt(p1) (unit norm) and sigma1 = I.
  static DataConfig standard(int p1, int p2, int n, int k);
};

/// gamma[c] is a k x p2 matrix of {0,1} entries; row i is gamma_y^(i) for class index c.
struct GammaPatterns {
  std::array<Matrix, kNumClasses> gamma;

  int p2() const { return static_cast<int>(gamma[0].cols()); }
  int k() const { return static_cast<int>(gamma[0].rows()); }

  /// Coordinates j with gamma[c](i, j) = 1 for some environment i.
  IndexSet support(int class_idx) const;

  /// Checks disjoint class supports and per-coordinate variance > k0.
  bool satisfies_assumptions(double k0) const;
};

struct LabeledDataset {
  Matrix features;   // N x (p1 + p2), invariant block first
  IntVector labels;  // +-1
  IntVector env_ids; // 1..k for training data, kTestEnv for test data

  static constexpr int kTestEnv = 0;

  Index size() const { return features.rows(); }
  Index dim() const { return features.cols(); }

  /// Group id = 2 * env + class_index, unique per (class, environment).
  IntVector group_ids() const;
  void check_consistent() const;
};

/// Training-side view: features and labels only. Methods that must not see
/// group annotations take this type.
struct TrainingView {
  Matrix features;
  IntVector labels;

  Index size() const { return features.rows(); }
  Index dim() const { return features.cols(); }
  static TrainingView of(const LabeledDataset& data) { return {data.features, data.labels}; }
};

/// Population variance (divide by count) of the entries of a vector.
template <typename Derived>
typename Derived::Scalar population_variance(const Eigen::MatrixBase<Derived>& values) {
  using Scalar = typename Derived::Scalar;
  if (values.size() == 0) return Scalar(0);
  const Scalar mean = values.mean();
  return (values.array() - mean).square().sum() / Scalar(values.size());
}

/// Each class owns a contiguous half of the p2 coordinates (class +1 first);
/// entries are Bernoulli(1/2) per environment, resampled until the variance
/// constraint holds. Throws ConfigError when the constraint is unattainable.
GammaPatterns make_gamma_patterns(int p2, int k, double k0, Rng& rng);

LabeledDataset generate_train(const DataConfig& config, const GammaPatterns& patterns, Rng& rng);

/// Same mechanism with every gamma forced to zero.
LabeledDataset generate_test(const DataConfig& config, const GammaPatterns& patterns, Index n_test, Rng& rng);

}  // namespace disc
