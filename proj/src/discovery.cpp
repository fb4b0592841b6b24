#include "disc/discovery.hpp"

#include "disc/error.hpp"

#include <algorithm>

namespace disc {

std::string to_string(EgmSign sign) { return sign == EgmSign::descent ? "descent" : "gradient"; }

EgmSign egm_sign_from_string(const std::string& name) {
  if (name == "descent") return EgmSign::descent;
  if (name == "gradient") return EgmSign::gradient;
  throw ConfigError("unknown egm sign '" + name + "'");
}

Matrix class_gradient_rows(const Classifier& model, const Matrix& inputs, const IntVector& labels, EgmSign sign) {
  if (labels.size() != inputs.rows()) throw DimensionError("labels and inputs differ in length");
  if (inputs.rows() == 0) throw ConfigError("empty EGM batch");
  const double direction = sign == EgmSign::descent ? -1.0 : 1.0;
  const double b = static_cast<double>(inputs.rows());
  const Matrix hidden = model.encoder.encode(inputs);

  if (model.outputs() == 1) {
    // d/df of (y - f)^2 / 2 is -(y - f); rows split the batch sum by class
    const Vector f = predict(model, inputs).col(0);
    Matrix rows = Matrix::Zero(kNumClasses, hidden.cols());
    for (Index i = 0; i < inputs.rows(); ++i) {
      const double d_f = -(labels(i) - f(i));
      rows.row(class_index(labels(i))) += d_f * hidden.row(i);
    }
    return direction * rows / b;
  }
  Matrix logits = hidden * model.head.transpose();
  if (model.use_bias) logits.rowwise() += model.bias.transpose();
  Matrix d_logits = logit_derivatives(model, logits, labels);
  if (model.loss == LossKind::squared) d_logits *= 0.5;
  return direction * d_logits.transpose() * hidden / b;
}

Matrix environment_gradient(const Classifier& model, const TrainingView& data, const IndexSet& environment,
                            Index egm_batch, EgmSign sign, Rng& rng) {
  if (environment.empty()) throw ConfigError("empty environment");
  if (egm_batch < 0) throw ConfigError("egm_batch must be nonnegative");
  IndexSet rows = environment;
  if (egm_batch > 0 && egm_batch < static_cast<Index>(rows.size())) {
    for (Index i = 0; i < egm_batch; ++i) {
      const auto pick = static_cast<std::size_t>(i) + rng.index(rows.size() - static_cast<std::size_t>(i));
      std::swap(rows[static_cast<std::size_t>(i)], rows[pick]);
    }
    rows.resize(static_cast<std::size_t>(egm_batch));
  }
  return class_gradient_rows(model, gather_rows(data.features, rows), gather(data.labels, rows), sign);
}

int dominant_class(const Vector& v, const std::vector<Matrix>& egms) {
  if (egms.empty()) throw ConfigError("dominant class needs at least one environment");
  Vector total = Vector::Zero(egms.front().rows());
  for (const Matrix& m : egms) total += concept_tendency(v, m);
  int best = 0;
  for (Index y = 1; y < total.size(); ++y) {
    if (total(y) > total(best)) best = static_cast<int>(y);
  }
  return best;
}

double concept_sensitivity(const Vector& v, const std::vector<Matrix>& egms, int dominant) {
  Vector values(static_cast<Index>(egms.size()));
  for (std::size_t j = 0; j < egms.size(); ++j) values(static_cast<Index>(j)) = concept_tendency(v, egms[j])(dominant);
  return population_variance(values);
}

ConceptProbabilities concept_probabilities(const Vector& sensitivity, const std::vector<int>& dominant, int num_classes) {
  if (static_cast<Index>(dominant.size()) != sensitivity.size()) throw DimensionError("dominant classes and sensitivities differ in length");
  if ((sensitivity.array() < 0.0).any()) throw ConfigError("sensitivities must be nonnegative");
  ConceptProbabilities out;
  for (int y = 0; y < num_classes; ++y) {
    Vector masked = Vector::Zero(sensitivity.size());
    for (Index i = 0; i < sensitivity.size(); ++i) {
      if (dominant[static_cast<std::size_t>(i)] == y) masked(i) = sensitivity(i);
    }
    const double total = masked.sum();
    out.empty.push_back(!(total > 0.0));
    out.p.push_back(total > 0.0 ? Vector(masked / total) : masked);
  }
  return out;
}

SensitivityReport sensitivity_from_egms(std::vector<Matrix> egms, const CavSet& cavs, int epoch) {
  if (egms.empty()) throw ConfigError("no environments");
  SensitivityReport report;
  report.epoch = epoch;
  report.egms = std::move(egms);
  const Index m = cavs.size();
  const Index k = static_cast<Index>(report.egms.size());
  for (const Matrix& egm : report.egms) {
    if (egm.cols() != cavs.vectors.cols()) throw DimensionError("CAV width differs from EGM width");
    report.tendency.push_back(egm * cavs.vectors.transpose());
  }
  report.cts.resize(k, m);
  report.sensitivity.resize(m);
  report.dominant.resize(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) {
    const Vector v = cavs.vectors.row(i).transpose();
    const int y = dominant_class(v, report.egms);
    report.dominant[static_cast<std::size_t>(i)] = y;
    for (Index j = 0; j < k; ++j) report.cts(j, i) = report.tendency[static_cast<std::size_t>(j)](y, i);
    report.sensitivity(i) = concept_sensitivity(v, report.egms, y);
  }
  report.probabilities = concept_probabilities(report.sensitivity, report.dominant, report.num_classes());
  return report;
}

SensitivityReport discover(const Classifier& model, const TrainingView& data, const EnvironmentPartition& partition,
                           const CavSet& cavs, const DiscoveryOptions& options, const Rng& rng, int epoch) {
  std::vector<Matrix> egms;
  egms.reserve(partition.environments.size());
  for (std::size_t j = 0; j < partition.environments.size(); ++j) {
    Rng local = rng.split(static_cast<std::uint64_t>(j));
    egms.push_back(environment_gradient(model, data, partition.environments[j], options.egm_batch, options.sign, local));
  }
  return sensitivity_from_egms(std::move(egms), cavs, epoch);
}

}  // namespace disc
