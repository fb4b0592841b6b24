#pragma once

#include "disc/conceptbank.hpp"
#include "disc/error.hpp"
#include "disc/envcluster.hpp"
#include "disc/model.hpp"
#include "disc/rng.hpp"
#include "disc/synthdata.hpp"

#include <vector>

namespace disc {

/// descent: M_j is the negative gradient (default); gradient: the literal gradient.
enum class EgmSign { descent, gradient };

std::string to_string(EgmSign sign);
EgmSign egm_sign_from_string(const std::string& name);

/// Per-class rows of the head gradient on one batch, one row per class.
///
/// Squared loss is taken as (y - f)^2 / 2 here, so in theory mode the descent
/// rows are X_y^T (y 1 - X_y theta) / B over the class-y rows of the batch and
/// they sum to X^T (y - X theta) / B. Multi-output heads return the usual
/// outputs x d gradient of the mean loss.
Matrix class_gradient_rows(const Classifier& model, const Matrix& inputs, const IntVector& labels, EgmSign sign);

/// M_j on a batch of at most egm_batch rows drawn without replacement from the
/// environment; egm_batch = 0 uses the whole environment.
Matrix environment_gradient(const Classifier& model, const TrainingView& data, const IndexSet& environment,
                            Index egm_batch, EgmSign sign, Rng& rng);

/// CTS vector M v (one entry per class).
template <typename DerivedV, typename DerivedM>
Vector concept_tendency(const Eigen::MatrixBase<DerivedV>& v, const Eigen::MatrixBase<DerivedM>& egm) {
  if (v.size() != egm.cols()) throw DimensionError("CAV length differs from EGM width");
  return egm * v.derived().reshaped();
}

/// argmax_y of sum_j (M_j v)_y; ties go to the lowest class index.
int dominant_class(const Vector& v, const std::vector<Matrix>& egms);

/// Population variance over environments of (M_j v)_{y'}.
double concept_sensitivity(const Vector& v, const std::vector<Matrix>& egms, int dominant);

struct ConceptProbabilities {
  std::vector<Vector> p;    // one vector per class, zero when empty
  std::vector<bool> empty;  // class has no positive sensitivity mass

  bool is_empty(int class_idx) const { return empty.at(static_cast<std::size_t>(class_idx)); }
};

/// P^(y) = S masked to concepts dominated by y, normalized.
ConceptProbabilities concept_probabilities(const Vector& sensitivity, const std::vector<int>& dominant, int num_classes);

struct SensitivityReport {
  int epoch = 0;
  std::vector<Matrix> egms;       // k matrices, classes x d
  std::vector<Matrix> tendency;   // k matrices, classes x m
  Matrix cts;                     // k x m at each concept's dominant class
  Vector sensitivity;             // m
  std::vector<int> dominant;      // class index per concept
  ConceptProbabilities probabilities;

  int num_classes() const { return egms.empty() ? kNumClasses : static_cast<int>(egms.front().rows()); }
};

struct DiscoveryOptions {
  Index egm_batch = 0;
  EgmSign sign = EgmSign::descent;
};

/// Builds a report from EGMs that are already computed.
SensitivityReport sensitivity_from_egms(std::vector<Matrix> egms, const CavSet& cavs, int epoch);

/// Environment j samples its EGM batch from rng.split(j).
SensitivityReport discover(const Classifier& model, const TrainingView& data, const EnvironmentPartition& partition,
                           const CavSet& cavs, const DiscoveryOptions& options, const Rng& rng, int epoch = 0);

}  // namespace disc
