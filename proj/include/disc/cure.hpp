#pragma once

#include "disc/conceptbank.hpp"
#include "disc/error.hpp"
#include "disc/rng.hpp"
#include "disc/synthdata.hpp"

#include <optional>

namespace disc {

struct MixupConfig {
  double beta1 = 2.0;
  double beta2 = 2.0;

  void validate() const;
};

/// Inverse-CDF draws from a categorical distribution over bank positions.
IndexSet sample_categorical(const Vector& probabilities, Index count, Rng& rng);

/// Concept images drawn i.i.d. with the given probabilities.
/// Throws ConfigError("no spurious concepts for class") on zero total mass.
Matrix sample_concepts(const ConceptBank& bank, const Vector& probabilities, Index count, Rng& rng,
                       IndexSet* drawn = nullptr);

/// One lambda ~ Beta(beta1, beta2) per row.
Vector sample_lambdas(Index rows, const MixupConfig& config, Rng& rng);

/// Row-wise lambda_r * x_r + (1 - lambda_r) * c_r.
template <typename DerivedX, typename DerivedC, typename DerivedL>
Matrix mix_rows(const Eigen::MatrixBase<DerivedX>& x, const Eigen::MatrixBase<DerivedC>& concepts,
                const Eigen::MatrixBase<DerivedL>& lambdas) {
  if (x.rows() != concepts.rows() || x.cols() != concepts.cols() || lambdas.size() != x.rows()) {
    throw DimensionError("mixup operands differ in shape");
  }
  const auto l = lambdas.derived().reshaped().array();
  return (x.array().colwise() * l + concepts.array().colwise() * (1.0 - l)).matrix();
}

Matrix mixup(const Matrix& x, const Matrix& concepts, const MixupConfig& config, Rng& rng);

struct IntervenedBatch {
  Matrix features;
  IntVector labels;  // copied unchanged from the source rows
  IndexSet rows;     // source dataset rows
  IndexSet concepts; // bank positions mixed into each row
  Vector lambdas;
};

/// Uniform draws from the rows whose class differs from class_idx, mixed with
/// concept images sampled from `probabilities`. Returns nothing when the class
/// has no spurious mass (the caller skips it).
std::optional<IntervenedBatch> build_intervened_batch(const TrainingView& data, int class_idx, const ConceptBank& bank,
                                                      const Vector& probabilities, Index batch_size,
                                                      const MixupConfig& config, Rng& rng);

}  // namespace disc
