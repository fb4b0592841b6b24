#include "disc/trainer.hpp"

#include "disc/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace disc {

namespace {

const char* const kSpuriousCategory = "spurious-candidate";

const std::map<std::string, Method>& method_names() {
  static const std::map<std::string, Method> names{{"erm", Method::erm},
                                                   {"uw", Method::uw},
                                                   {"disc", Method::disc},
                                                   {"disc_randint", Method::disc_randint},
                                                   {"disc_reweight", Method::disc_reweight},
                                                   {"disc_inadaptive", Method::disc_inadaptive}};
  return names;
}

}  // namespace

std::string to_string(Method method) {
  for (const auto& [name, m] : method_names()) {
    if (m == method) return name;
  }
  return "unknown";
}

Method method_from_string(const std::string& name) {
  const auto it = method_names().find(name);
  if (it == method_names().end()) throw ConfigError("unknown method '" + name + "'");
  return it->second;
}

bool is_disc_variant(Method method) { return method != Method::erm && method != Method::uw; }

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (batch_size < 1) throw ConfigError("train.batch_size must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be nonnegative");
  if (max_epochs < 1) throw ConfigError("train.max_epochs must be at least 1");
  if (patience < 0) throw ConfigError("train.patience must be nonnegative");
  if (k < 1) throw ConfigError("train.k must be at least 1");
  if (egm_batch < 0) throw ConfigError("train.egm_batch must be nonnegative");
  if (hidden < 0) throw ConfigError("train.hidden must be nonnegative");
  if (reference_epochs < 0) throw ConfigError("train.reference_epochs must be nonnegative");
  mixup.validate();
}

int TrainConfig::effective_reference_epochs() const {
  return reference_epochs > 0 ? reference_epochs : std::max(5, max_epochs / 4);
}

std::vector<Vector> TrainReport::sensitivity_trajectory() const {
  std::vector<Vector> out;
  for (const EpochRecord& r : epochs) {
    if (r.sensitivity) out.push_back(r.sensitivity->sensitivity);
  }
  return out;
}

Classifier initial_model(int input_dim, const TrainConfig& config, Rng& rng) {
  const int outputs = config.loss == LossKind::cross_entropy ? kNumClasses : 1;
  if (config.hidden == 0 && outputs == 1 && !config.use_bias) return Classifier::theory(input_dim);
  Encoder encoder = config.hidden == 0 ? Encoder::identity(input_dim) : Encoder::tanh_mlp(input_dim, config.hidden, rng);
  return Classifier::with_encoder(std::move(encoder), outputs, config.loss, config.use_bias, rng);
}

Vector inverse_group_size_weights(const IntVector& group_ids) {
  if (group_ids.size() == 0) throw ConfigError("no group ids");
  std::map<int, Index> counts;
  for (Index i = 0; i < group_ids.size(); ++i) ++counts[group_ids(i)];
  const double n = static_cast<double>(group_ids.size());
  const double groups = static_cast<double>(counts.size());
  Vector w(group_ids.size());
  for (Index i = 0; i < group_ids.size(); ++i) w(i) = n / (groups * static_cast<double>(counts[group_ids(i)]));
  return w;
}

Vector reweight_weights(const Classifier& model, const TrainingView& data, const CavSet& cavs,
                        const ConceptProbabilities& probabilities) {
  const Matrix hidden = model.encoder.encode(data.features);
  if (hidden.cols() != cavs.vectors.cols()) throw DimensionError("CAV width differs from encoder output");
  const Vector norms = hidden.rowwise().norm();
  const Matrix cosines = hidden * cavs.vectors.transpose();  // unnormalized, CAV rows are unit
  Vector w(data.size());
  for (Index j = 0; j < data.size(); ++j) {
    const int y = class_index(data.labels(j));
    if (probabilities.is_empty(y) || norms(j) == 0.0) {
      w(j) = 1.0;
      continue;
    }
    const Vector& p = probabilities.p[static_cast<std::size_t>(y)];
    const double exponent = p.dot((cosines.row(j).transpose() / norms(j)).cwiseMax(0.0));
    w(j) = std::exp(-exponent);
  }
  return w;
}

namespace {

double mean_training_loss(const Classifier& model, const TrainingView& data) {
  return batch_loss(model, data.features, data.labels);
}

Classifier erm_epoch(Classifier model, const TrainingView& data, const Vector* weights, const TrainConfig& config,
                     Rng& rng) {
  IndexSet order(static_cast<std::size_t>(data.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::shuffle(order.begin(), order.end(), rng.engine());
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
    const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
    const IndexSet rows(order.begin() + static_cast<std::ptrdiff_t>(start), order.begin() + static_cast<std::ptrdiff_t>(stop));
    const Matrix x = gather_rows(data.features, rows);
    const IntVector y = gather(data.labels, rows);
    Vector w;
    if (weights) {
      w.resize(static_cast<Index>(rows.size()));
      for (std::size_t r = 0; r < rows.size(); ++r) w(static_cast<Index>(r)) = (*weights)(rows[r]);
    }
    const Gradient g = full_gradient(model, x, y, weights ? &w : nullptr);
    model = sgd_step(model, g, config.lr, config.weight_decay);
  }
  return model;
}

double mean_over(const Vector& values, const IndexSet& positions) {
  if (positions.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (Index p : positions) total += values(p);
  return total / static_cast<double>(positions.size());
}

// Everything the discovery step needs that is fixed for a run.
struct DiscoveryContext {
  const ConceptBank* bank = nullptr;
  Classifier reference;
  PerClassClusters clusters;
  CavSet cavs;  // for the identity encoder, fitted once
  IndexSet spurious;
};

DiscoveryContext prepare_discovery(const TrainingView& data, const ConceptBank& bank, const TrainConfig& config,
                                   const TrainExtras& extras, const Rng& root) {
  if (bank.input_dim != data.dim()) throw DimensionError("bank and data input dimensions differ");
  DiscoveryContext ctx;
  ctx.bank = &bank;
  TrainConfig ref = config;
  ref.method = Method::erm;
  ref.max_epochs = config.effective_reference_epochs();
  ref.monitor_sensitivity = false;
  ref.seed = root.split("reference").seed();
  const TrainReport reference = train_erm(data, ref);
  if (reference.diverged) throw NumericalError("reference ERM model diverged: " + reference.divergence_message);
  ctx.reference = reference.model;
  ctx.clusters = extras.clusters ? *extras.clusters : cluster_per_class(data, ctx.reference, config.k, root.split("cluster"));
  ctx.clusters.check_partition(data.size());
  ctx.cavs = query_cavs(bank, ctx.reference.encoder, root.split("cavs"), bank.svm);
  ctx.spurious = bank.positions_in_category(kSpuriousCategory);
  return ctx;
}

const CavSet& cavs_for(const DiscoveryContext& ctx, const Classifier& model, const Rng& epoch_rng, CavSet& scratch) {
  if (!model.encoder.trainable()) return ctx.cavs;
  scratch = query_cavs(*ctx.bank, model.encoder, epoch_rng.split("cavs"), ctx.bank->svm);
  return scratch;
}

SensitivityReport measure(const DiscoveryContext& ctx, const Classifier& model, const TrainingView& data,
                          const CavSet& cavs, const TrainConfig& config, const Rng& epoch_rng, int epoch) {
  Rng pairing = epoch_rng.split("pairing");
  const EnvironmentPartition partition = build_environments(ctx.clusters, pairing);
  return discover(model, data, partition, cavs, {config.egm_batch, config.egm_sign}, epoch_rng.split("discover"), epoch);
}

// Shared epoch driver: divergence handling, evaluation, early stopping, timing.
template <typename EpochFn>
TrainReport run_loop(Method method, const TrainingView& data, const TrainConfig& config, const TrainExtras& extras,
                     Classifier model, EpochFn&& run_epoch) {
  const auto started = std::chrono::steady_clock::now();
  TrainReport report;
  report.method = method;
  report.seed = config.seed;
  double best_metric = -1.0;
  Classifier best_model = model;
  int since_best = 0;
  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    EpochRecord record;
    record.epoch = epoch;
    record.mean_spurious_sensitivity = std::numeric_limits<double>::quiet_NaN();
    try {
      model = run_epoch(epoch, model, record);
      record.loss = mean_training_loss(model, data);
      if (!std::isfinite(record.loss)) throw NumericalError("non-finite training loss (training diverged)");
    } catch (const NumericalError& e) {
      report.diverged = true;
      report.divergence_message = e.what();
      break;
    }
    if (extras.evaluation) record.evaluation = group_metrics(model, *extras.evaluation);
    bool stop = false;
    if (extras.validation) {
      const GroupMetrics val = group_metrics(model, *extras.validation);
      if (!extras.evaluation) record.evaluation = val;
      if (val.worst_acc > best_metric) {
        best_metric = val.worst_acc;
        best_model = model;
        report.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= config.patience && config.patience > 0) {
        stop = true;
      }
    }
    report.epochs.push_back(std::move(record));
    if (stop) {
      report.early_stopped = true;
      break;
    }
  }
  report.model = extras.validation && report.best_epoch >= 0 ? best_model : model;
  if (!extras.validation) report.best_epoch = static_cast<int>(report.epochs.size()) - 1;
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

TrainReport train_weighted(Method method, const TrainingView& data, const Vector* weights, const TrainConfig& config,
                           const TrainExtras& extras) {
  config.validate();
  if (data.size() == 0) throw ConfigError("empty training set");
  const Rng root(config.seed);
  Rng init = root.split("init");
  Classifier model = initial_model(static_cast<int>(data.dim()), config, init);

  std::optional<DiscoveryContext> ctx;
  if (config.monitor_sensitivity && extras.monitor_bank) {
    ctx = prepare_discovery(data, *extras.monitor_bank, config, extras, root.split("monitor"));
  }
  return run_loop(method, data, config, extras, std::move(model), [&](int epoch, const Classifier& current, EpochRecord& record) {
    const Rng ep = root.split("epoch").split(static_cast<std::uint64_t>(epoch));
    if (ctx) {
      CavSet scratch;
      const Rng mon = root.split("monitor").split(static_cast<std::uint64_t>(epoch));
      record.sensitivity = measure(*ctx, current, data, cavs_for(*ctx, current, mon, scratch), config, mon, epoch);
      record.mean_spurious_sensitivity = mean_over(record.sensitivity->sensitivity, ctx->spurious);
    }
    Rng shuffle = ep.split("shuffle");
    return erm_epoch(current, data, weights, config, shuffle);
  });
}

enum class CureMode { adaptive, uniform, frozen };

TrainReport train_disc_impl(Method method, const TrainingView& data, const ConceptBank& bank, const TrainConfig& config,
                            const TrainExtras& extras) {
  config.validate();
  bank.validate();
  if (data.size() == 0) throw ConfigError("empty training set");
  const Rng root(config.seed);
  Rng init = root.split("init");
  Classifier model = initial_model(static_cast<int>(data.dim()), config, init);
  const DiscoveryContext ctx = prepare_discovery(data, bank, config, extras, root);

  std::optional<ConceptProbabilities> frozen;
  if (method == Method::disc_inadaptive) {
    const Rng ref_rng = root.split("inadaptive");
    CavSet scratch;
    frozen = measure(ctx, ctx.reference, data, cavs_for(ctx, ctx.reference, ref_rng, scratch), config, ref_rng, 0)
                 .probabilities;
  }

  Vector cluster_weight;
  if (config.upweight_minority) {
    IntVector cluster_id = IntVector::Zero(data.size());
    for (int c = 0; c < kNumClasses; ++c) {
      for (int j = 0; j < ctx.clusters.k; ++j) {
        for (Index i : ctx.clusters.clusters[c][static_cast<std::size_t>(j)]) cluster_id(i) = c * ctx.clusters.k + j;
      }
    }
    cluster_weight = inverse_group_size_weights(cluster_id);
  }

  const Index rounds = (data.size() + config.batch_size - 1) / config.batch_size;
  const Vector uniform = Vector::Constant(bank.size(), 1.0 / static_cast<double>(bank.size()));

  auto report = run_loop(method, data, config, extras, std::move(model), [&](int epoch, const Classifier& current, EpochRecord& record) {
    const Rng ep = root.split("epoch").split(static_cast<std::uint64_t>(epoch));
    CavSet scratch;
    const CavSet& cavs = cavs_for(ctx, current, ep, scratch);
    record.sensitivity = measure(ctx, current, data, cavs, config, ep, epoch);
    record.mean_spurious_sensitivity = mean_over(record.sensitivity->sensitivity, ctx.spurious);

    ConceptProbabilities used = frozen ? *frozen : record.sensitivity->probabilities;
    if (method == Method::disc_randint) {
      for (std::size_t y = 0; y < used.p.size(); ++y) {
        used.p[y] = uniform;
        used.empty[y] = false;
      }
    }
    record.probabilities_used = used;

    Classifier next = current;
    if (method == Method::disc_reweight) {
      const Vector w = reweight_weights(current, data, cavs, used);
      Rng shuffle = ep.split("shuffle");
      return erm_epoch(next, data, &w, config, shuffle);
    }

    Rng cure = ep.split("cure");
    double loss_total = 0.0;
    Index steps = 0;
    for (Index round = 0; round < rounds; ++round) {
      for (int y = 0; y < kNumClasses; ++y) {
        if (used.is_empty(y)) continue;
        const auto batch = build_intervened_batch(data, y, bank, used.p[static_cast<std::size_t>(y)],
                                                  config.batch_size, config.mixup, cure);
        if (!batch) continue;
        Vector w;
        if (config.upweight_minority) {
          w.resize(static_cast<Index>(batch->rows.size()));
          for (std::size_t r = 0; r < batch->rows.size(); ++r) w(static_cast<Index>(r)) = cluster_weight(batch->rows[r]);
        }
        const Vector* wp = config.upweight_minority ? &w : nullptr;
        loss_total += batch_loss(next, batch->features, batch->labels, wp);
        ++steps;
        next = sgd_step(next, full_gradient(next, batch->features, batch->labels, wp), config.lr, config.weight_decay);
      }
    }
    record.intervened_loss = steps > 0 ? loss_total / static_cast<double>(steps) : 0.0;
    return next;
  });
  report.clusters = ctx.clusters;
  report.cavs = ctx.cavs;
  return report;
}

}  // namespace

TrainReport train_erm(const TrainingView& data, const TrainConfig& config, const TrainExtras& extras) {
  return train_weighted(Method::erm, data, nullptr, config, extras);
}

TrainReport train_uw(const TrainingView& data, const IntVector& group_ids, const TrainConfig& config,
                     const TrainExtras& extras) {
  if (group_ids.size() != data.size()) throw DimensionError("group ids and data differ in length");
  const Vector w = inverse_group_size_weights(group_ids);
  return train_weighted(Method::uw, data, &w, config, extras);
}

TrainReport train_disc(const TrainingView& data, const ConceptBank& bank, const TrainConfig& config,
                       const TrainExtras& extras) {
  return train_disc_impl(Method::disc, data, bank, config, extras);
}

TrainReport train_disc_randint(const TrainingView& data, const ConceptBank& bank, const TrainConfig& config,
                               const TrainExtras& extras) {
  return train_disc_impl(Method::disc_randint, data, bank, config, extras);
}

TrainReport train_disc_reweight(const TrainingView& data, const ConceptBank& bank, const TrainConfig& config,
                                const TrainExtras& extras) {
  return train_disc_impl(Method::disc_reweight, data, bank, config, extras);
}

TrainReport train_disc_inadaptive(const TrainingView& data, const ConceptBank& bank, const TrainConfig& config,
                                  const TrainExtras& extras) {
  return train_disc_impl(Method::disc_inadaptive, data, bank, config, extras);
}

TrainReport train(const LabeledDataset& data, const ConceptBank& bank, const TrainConfig& config,
                  const TrainExtras& extras) {
  data.check_consistent();
  const TrainingView view = TrainingView::of(data);
  TrainExtras with_bank = extras;
  if (!with_bank.monitor_bank) with_bank.monitor_bank = &bank;
  switch (config.method) {
    case Method::erm:
      return train_erm(view, config, with_bank);
    case Method::uw:
      return train_uw(view, data.group_ids(), config, with_bank);
    case Method::disc:
      return train_disc(view, bank, config, extras);
    case Method::disc_randint:
      return train_disc_randint(view, bank, config, extras);
    case Method::disc_reweight:
      return train_disc_reweight(view, bank, config, extras);
    case Method::disc_inadaptive:
      return train_disc_inadaptive(view, bank, config, extras);
  }
  throw ConfigError("unhandled method");
}

}  // namespace disc
