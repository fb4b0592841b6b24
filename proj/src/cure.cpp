#include "disc/cure.hpp"

#include <algorithm>

namespace disc {

void MixupConfig::validate() const {
  if (!(beta1 > 0.0) || !(beta2 > 0.0)) throw ConfigError("mixup: beta1 and beta2 must be positive");
}

IndexSet sample_categorical(const Vector& probabilities, Index count, Rng& rng) {
  if ((probabilities.array() < 0.0).any() || !probabilities.allFinite()) {
    throw ConfigError("concept probabilities must be finite and nonnegative");
  }
  const double total = probabilities.sum();
  if (!(total > 0.0)) throw ConfigError("no spurious concepts for class");
  std::vector<double> cdf(static_cast<std::size_t>(probabilities.size()));
  double acc = 0.0;
  for (Index i = 0; i < probabilities.size(); ++i) cdf[static_cast<std::size_t>(i)] = (acc += probabilities(i) / total);
  Index last = probabilities.size() - 1;
  while (last > 0 && probabilities(last) == 0.0) --last;
  IndexSet out(static_cast<std::size_t>(std::max<Index>(count, 0)));
  for (auto& o : out) {
    const double u = rng.uniform();
    const auto pos = static_cast<Index>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
    o = std::min(pos, last);
  }
  return out;
}

Matrix sample_concepts(const ConceptBank& bank, const Vector& probabilities, Index count, Rng& rng, IndexSet* drawn) {
  if (probabilities.size() != bank.size()) throw DimensionError("probability vector length differs from bank size");
  if (count < 0) throw ConfigError("negative concept count");
  const IndexSet picks = sample_categorical(probabilities, count, rng);
  if (drawn) *drawn = picks;
  return concept_images(bank, picks, rng);
}

Vector sample_lambdas(Index rows, const MixupConfig& config, Rng& rng) {
  config.validate();
  Vector out(rows);
  for (Index r = 0; r < rows; ++r) out(r) = rng.beta(config.beta1, config.beta2);
  return out;
}

Matrix mixup(const Matrix& x, const Matrix& concepts, const MixupConfig& config, Rng& rng) {
  if (x.rows() != concepts.rows() || x.cols() != concepts.cols()) throw DimensionError("mixup operands differ in shape");
  return mix_rows(x, concepts, sample_lambdas(x.rows(), config, rng));
}

std::optional<IntervenedBatch> build_intervened_batch(const TrainingView& data, int class_idx, const ConceptBank& bank,
                                                      const Vector& probabilities, Index batch_size,
                                                      const MixupConfig& config, Rng& rng) {
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  if (data.dim() != bank.input_dim) throw DimensionError("bank and data input dimensions differ");
  if (probabilities.size() != bank.size()) throw DimensionError("probability vector length differs from bank size");
  if (!(probabilities.sum() > 0.0)) return std::nullopt;

  IndexSet complement;
  for (Index i = 0; i < data.size(); ++i) {
    if (class_index(data.labels(i)) != class_idx) complement.push_back(i);
  }
  if (complement.empty()) throw ConfigError("no instances outside class " + std::to_string(class_label(class_idx)));

  IntervenedBatch batch;
  batch.rows.resize(static_cast<std::size_t>(batch_size));
  for (auto& r : batch.rows) r = complement[rng.index(complement.size())];
  const Matrix source = gather_rows(data.features, batch.rows);
  const Matrix images = sample_concepts(bank, probabilities, batch_size, rng, &batch.concepts);
  batch.lambdas = sample_lambdas(batch_size, config, rng);
  batch.features = mix_rows(source, images, batch.lambdas);
  batch.labels = gather(data.labels, batch.rows);
  return batch;
}

}  // namespace disc
