#pragma once

#include "disc/conceptbank.hpp"
#include "disc/cure.hpp"
#include "disc/discovery.hpp"
#include "disc/envcluster.hpp"
#include "disc/metrics.hpp"
#include "disc/model.hpp"
#include "disc/synthdata.hpp"

#include <optional>
#include <string>
#include <vector>

namespace disc {

enum class Method { erm, uw, disc, disc_randint, disc_reweight, disc_inadaptive };

std::string to_string(Method method);
Method method_from_string(const std::string& name);
bool is_disc_variant(Method method);

struct TrainConfig {
  Method method = Method::disc;
  double lr = 5e-3;
  Index batch_size = 32;
  double weight_decay = 0.0;
  int max_epochs = 40;
  int patience = 10;         // epochs without validation improvement; active only with a validation set
  int k = 3;
  Index egm_batch = 0;  // 0: whole environment
  MixupConfig mixup;
  EgmSign egm_sign = EgmSign::descent;
  LossKind loss = LossKind::squared;
  int hidden = 0;            // 0: identity encoder; otherwise tanh MLP width
  bool use_bias = false;
  int reference_epochs = 0;  // 0: max(5, max_epochs / 4)
  bool upweight_minority = false;  // DISC variants: weight intervened rows by inverse inferred-cluster size
  bool monitor_sensitivity = false;  // erm/uw: record diagnostic sensitivities each epoch
  std::uint64_t seed = 0;

  void validate() const;
  int effective_reference_epochs() const;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;  // mean training loss after the epoch
  double intervened_loss = 0.0;  // DISC variants: mean loss of the intervened batches
  std::optional<GroupMetrics> evaluation;
  std::optional<SensitivityReport> sensitivity;  // measured on the model at the start of the epoch
  std::optional<ConceptProbabilities> probabilities_used;
  double mean_spurious_sensitivity = 0.0;  // NaN when not measured
};

struct TrainReport {
  Method method = Method::erm;
  std::vector<EpochRecord> epochs;
  Classifier model;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
  bool diverged = false;
  std::string divergence_message;
  bool early_stopped = false;
  int best_epoch = -1;
  std::optional<PerClassClusters> clusters;
  std::optional<CavSet> cavs;

  std::vector<Vector> sensitivity_trajectory() const;
};

/// Optional inputs. `validation` drives early stopping, `evaluation` is only
/// reported; both carry group annotations but never reach the update rule.
struct TrainExtras {
  const LabeledDataset* validation = nullptr;
  const LabeledDataset* evaluation = nullptr;
  const ConceptBank* monitor_bank = nullptr;    // erm/uw sensitivity monitoring
  const PerClassClusters* clusters = nullptr;   // replaces the clustering step
};

TrainReport train_erm(const TrainingView& data, const TrainConfig& config, const TrainExtras& extras = {});

/// Weighted ERM with weights proportional to 1 / group size, mean 1.
TrainReport train_uw(const TrainingView& data, const IntVector& group_ids, const TrainConfig& config,
                     const TrainExtras& extras = {});
Vector inverse_group_size_weights(const IntVector& group_ids);

TrainReport train_disc(const TrainingView& data, const ConceptBank& bank, const TrainConfig& config,
                       const TrainExtras& extras = {});
TrainReport train_disc_randint(const TrainingView& data, const ConceptBank& bank, const TrainConfig& config,
                               const TrainExtras& extras = {});
TrainReport train_disc_reweight(const TrainingView& data, const ConceptBank& bank, const TrainConfig& config,
                                const TrainExtras& extras = {});
TrainReport train_disc_inadaptive(const TrainingView& data, const ConceptBank& bank, const TrainConfig& config,
                                  const TrainExtras& extras = {});

/// Dispatch on config.method; group ids are read only by uw.
TrainReport train(const LabeledDataset& data, const ConceptBank& bank, const TrainConfig& config,
                  const TrainExtras& extras = {});

/// exp(-sum_i P^(y_j)_i max(0, cos(g(x_j), v_i))) per row; rows whose class is empty get weight 1.
Vector reweight_weights(const Classifier& model, const TrainingView& data, const CavSet& cavs,
                        const ConceptProbabilities& probabilities);

/// Initial model for a config: theory model for hidden = 0, MLP otherwise.
Classifier initial_model(int input_dim, const TrainConfig& config, Rng& rng);

}  // namespace disc
