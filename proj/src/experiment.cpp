#include "disc/experiment.hpp"

#include "disc/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace disc {

namespace {

// Strict reader for one JSON object: every key must be consumed.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("'" + display() + "' must be an object");
  }

  template <typename T>
  bool optional(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return false;
    try {
      out = j_.at(key).get<T>();
    } catch (const Json::exception&) {
      throw ConfigError("key '" + name(key) + "' has the wrong type");
    }
    return true;
  }

  template <typename T>
  void required(const std::string& key, T& out) {
    if (!optional(key, out)) throw ConfigError("missing required key '" + name(key) + "'");
  }

  const Json* object(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) return nullptr;
    return &j_.at(key);
  }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) throw ConfigError("unknown key '" + name(item.key()) + "'");
    }
  }

 private:
  std::string display() const { return path_.empty() ? "<root>" : path_; }

  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

const Json kEmptyObject = Json::object();

const Json& or_empty(const Json* j) { return j ? *j : kEmptyObject; }

template <typename T>
void positive(const std::string& key, T value) {
  if (!(value > T(0))) throw ConfigError("key '" + key + "' must be positive");
}

}  // namespace

void ExperimentConfig::validate() const {
  data.validate();
  train.validate();
  if (eval.test_size < 1) throw ConfigError("key 'eval.test_size' must be positive");
  if (eval.validation_size < 0) throw ConfigError("key 'eval.validation_size' must be nonnegative");
  if (eval.seeds.empty()) throw ConfigError("key 'eval.seeds' must be nonempty");
  positive("bank.n_pos", bank.n_pos);
  positive("bank.n_neg", bank.n_neg);
  positive("bank.svm_lambda", bank.svm_lambda);
  positive("bank.svm_epochs", bank.svm_epochs);
  if (!(bank.image_noise >= 0.0)) throw ConfigError("key 'bank.image_noise' must be nonnegative");
}

ExperimentConfig config_from_json(const Json& j) {
  ExperimentConfig c;
  ObjectReader root(j, "");
  root.optional("seed", c.seed);
  root.optional("output_dir", c.output_dir);

  const Json* data_json = root.object("data");
  if (!data_json) throw ConfigError("missing required key 'data'");
  {
    ObjectReader r(*data_json, "data");
    r.required("p1", c.data.p1);
    r.required("p2", c.data.p2);
    r.required("n", c.data.n);
    r.required("k", c.data.k);
    if (c.data.p1 < 1) throw ConfigError("key 'data.p1' must be at least 1");
    std::vector<double> mu;
    if (r.optional("mu", mu)) {
      c.data.mu = Eigen::Map<const Vector>(mu.data(), static_cast<Index>(mu.size()));
    } else {
      c.data.mu = Vector::Constant(c.data.p1, 1.0 / std::sqrt(static_cast<double>(c.data.p1)));
    }
    const Json* sigma = r.object("sigma1");
    if (sigma && !sigma->is_null()) {
      try {
        c.data.sigma1 = matrix_from_json(*sigma);
      } catch (const std::exception&) {
        throw ConfigError("key 'data.sigma1' must be a square matrix");
      }
    } else {
      c.data.sigma1 = Matrix::Identity(c.data.p1, c.data.p1);
    }
    r.optional("spu_noise_scale", c.data.spu_noise_scale);
    r.optional("class_balance", c.data.class_balance);
    r.optional("k0", c.data.k0);
    r.optional("k1", c.data.k1);
    r.optional("k2", c.data.k2);
    r.finish();
  }
  {
    ObjectReader r(or_empty(root.object("bank")), "bank");
    r.optional("image_noise", c.bank.image_noise);
    r.optional("n_pos", c.bank.n_pos);
    r.optional("n_neg", c.bank.n_neg);
    r.optional("allowlist", c.bank.allowlist);
    r.optional("svm_lambda", c.bank.svm_lambda);
    r.optional("svm_epochs", c.bank.svm_epochs);
    r.finish();
  }
  {
    ObjectReader r(or_empty(root.object("train")), "train");
    std::string text;
    if (r.optional("method", text)) c.train.method = method_from_string(text);
    r.optional("lr", c.train.lr);
    r.optional("batch_size", c.train.batch_size);
    r.optional("weight_decay", c.train.weight_decay);
    r.optional("max_epochs", c.train.max_epochs);
    r.optional("patience", c.train.patience);
    r.optional("k", c.train.k);
    r.optional("egm_batch", c.train.egm_batch);
    {
      ObjectReader m(or_empty(r.object("mixup")), "train.mixup");
      m.optional("beta1", c.train.mixup.beta1);
      m.optional("beta2", c.train.mixup.beta2);
      m.finish();
    }
    if (r.optional("egm_sign", text)) c.train.egm_sign = egm_sign_from_string(text);
    if (r.optional("loss", text)) c.train.loss = loss_kind_from_string(text);
    r.optional("hidden", c.train.hidden);
    r.optional("use_bias", c.train.use_bias);
    r.optional("reference_epochs", c.train.reference_epochs);
    r.optional("upweight_minority", c.train.upweight_minority);
    r.optional("monitor_sensitivity", c.train.monitor_sensitivity);
    r.finish();
  }
  {
    ObjectReader r(or_empty(root.object("eval")), "eval");
    r.optional("test_size", c.eval.test_size);
    r.optional("validation_size", c.eval.validation_size);
    r.optional("seeds", c.eval.seeds);
    r.optional("strict_paper_error_formula", c.eval.strict_paper_error_formula);
    r.finish();
  }
  root.finish();
  c.data.seed = c.seed;
  c.train.seed = train_seed(c.seed);
  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& path) { return config_from_json(read_json(path)); }

Json config_to_json(const ExperimentConfig& c) {
  return Json{{"seed", c.seed},
              {"output_dir", c.output_dir},
              {"data",
               {{"p1", c.data.p1},
                {"p2", c.data.p2},
                {"n", c.data.n},
                {"k", c.data.k},
                {"mu", vector_to_json(c.data.mu)},
                {"sigma1", matrix_to_json(c.data.sigma1)},
                {"spu_noise_scale", c.data.spu_noise_scale},
                {"class_balance", c.data.class_balance},
                {"k0", c.data.k0},
                {"k1", c.data.k1},
                {"k2", c.data.k2}}},
              {"bank",
               {{"image_noise", c.bank.image_noise},
                {"n_pos", c.bank.n_pos},
                {"n_neg", c.bank.n_neg},
                {"allowlist", c.bank.allowlist},
                {"svm_lambda", c.bank.svm_lambda},
                {"svm_epochs", c.bank.svm_epochs}}},
              {"train",
               {{"method", to_string(c.train.method)},
                {"lr", c.train.lr},
                {"batch_size", c.train.batch_size},
                {"weight_decay", c.train.weight_decay},
                {"max_epochs", c.train.max_epochs},
                {"patience", c.train.patience},
                {"k", c.train.k},
                {"egm_batch", c.train.egm_batch},
                {"mixup", {{"beta1", c.train.mixup.beta1}, {"beta2", c.train.mixup.beta2}}},
                {"egm_sign", to_string(c.train.egm_sign)},
                {"loss", to_string(c.train.loss)},
                {"hidden", c.train.hidden},
                {"use_bias", c.train.use_bias},
                {"reference_epochs", c.train.reference_epochs},
                {"upweight_minority", c.train.upweight_minority},
                {"monitor_sensitivity", c.train.monitor_sensitivity}}},
              {"eval",
               {{"test_size", c.eval.test_size},
                {"validation_size", c.eval.validation_size},
                {"seeds", c.eval.seeds},
                {"strict_paper_error_formula", c.eval.strict_paper_error_formula}}}};
}

std::vector<std::uint64_t> parse_seed_range(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  auto number = [&](const std::string& s) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
      throw ConfigError("invalid seed '" + s + "' in '" + text + "'");
    }
    return static_cast<std::uint64_t>(std::stoull(s));
  };
  const auto dots = text.find("..");
  if (dots != std::string::npos) {
    const auto lo = number(text.substr(0, dots));
    const auto hi = number(text.substr(dots + 2));
    if (hi < lo) throw ConfigError("seed range '" + text + "' is empty");
    for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    return seeds;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) seeds.push_back(number(item));
  if (seeds.empty()) throw ConfigError("no seeds given");
  return seeds;
}

std::vector<Method> parse_methods(const std::string& text) {
  std::vector<Method> methods;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) methods.push_back(method_from_string(item));
  if (methods.empty()) throw ConfigError("no methods given");
  return methods;
}

std::uint64_t train_seed(std::uint64_t run_seed) { return Rng(run_seed).split("train").seed(); }

DataBundle make_data(const ExperimentConfig& config, std::uint64_t seed) {
  const Rng root(seed);
  DataBundle out;
  Rng patterns_rng = root.split("patterns");
  out.patterns = make_gamma_patterns(config.data.p2, config.data.k, config.data.k0, patterns_rng);
  Rng data_rng = root.split("data");
  out.train = generate_train(config.data, out.patterns, data_rng);
  Rng eval_rng = root.split("eval");
  out.test = generate_test(config.data, out.patterns, config.eval.test_size, eval_rng);
  if (config.eval.validation_size > 0) {
    DataConfig val = config.data;
    val.n = static_cast<int>(config.eval.validation_size);
    Rng val_rng = root.split("validation");
    out.validation = generate_train(val, out.patterns, val_rng);
  }
  return out;
}

ConceptBank make_bank(const ExperimentConfig& config) {
  ConceptBank bank = ConceptBank::synthetic(config.data.p1, config.data.p2);
  bank.image_noise = config.bank.image_noise;
  bank.n_pos = config.bank.n_pos;
  bank.n_neg = config.bank.n_neg;
  bank.svm.lambda = config.bank.svm_lambda;
  bank.svm.epochs = config.bank.svm_epochs;
  if (!config.bank.allowlist.empty()) bank = bank.restricted(config.bank.allowlist);
  bank.validate();
  return bank;
}

void write_data_bundle(const fs::path& dir, const ExperimentConfig& config, const DataBundle& data) {
  fs::create_directories(dir);
  write_dataset_csv(dir / "train.csv", data.train);
  write_dataset_csv(dir / "test.csv", data.test);
  if (data.validation) write_dataset_csv(dir / "validation.csv", *data.validation);
  write_json(dir / "patterns.json", patterns_to_json(data.patterns));
  write_json(dir / "bank.json", bank_manifest(make_bank(config)));
  write_json(dir / "resolved_config.json", config_to_json(config));
}

DataBundle read_data_bundle(const fs::path& dir) {
  DataBundle out;
  out.patterns = patterns_from_json(read_json(dir / "patterns.json"));
  out.train = read_dataset_csv(dir / "train.csv");
  out.test = read_dataset_csv(dir / "test.csv");
  if (fs::exists(dir / "validation.csv")) out.validation = read_dataset_csv(dir / "validation.csv");
  return out;
}

namespace {

Json group_metrics_json(const GroupMetrics& g) {
  Json groups = Json::array();
  for (const auto& [key, acc] : g.per_group_acc) {
    groups.push_back({{"label", key.first}, {"env", key.second}, {"n", g.n_per_group.at(key)}, {"acc", acc}});
  }
  return Json{{"avg_acc", g.avg_acc}, {"worst_acc", g.worst_acc}, {"groups", groups}};
}

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& config, Method method, std::uint64_t seed, const DataBundle& data) {
  ExperimentConfig cfg = config;
  cfg.seed = seed;
  cfg.train.method = method;
  cfg.train.seed = train_seed(seed);
  const ConceptBank bank = make_bank(cfg);
  if (data.train.dim() != cfg.data.input_dim()) throw ConfigError("dataset width differs from p1 + p2");

  TrainExtras extras;
  extras.evaluation = &data.test;
  if (data.validation) extras.validation = &*data.validation;
  RunOutcome out;
  out.report = train(data.train, bank, cfg.train, extras);
  out.test = group_metrics(out.report.model, data.test);
  out.empirical_test_error = 1.0 - out.test.avg_acc;

  Json j{{"method", to_string(method)},
         {"seed", seed},
         {"train_seed", cfg.train.seed},
         {"epochs_run", out.report.epochs.size()},
         {"diverged", out.report.diverged},
         {"divergence_message", out.report.divergence_message},
         {"early_stopped", out.report.early_stopped},
         {"best_epoch", out.report.best_epoch},
         {"test", group_metrics_json(out.test)},
         {"empirical_test_error", out.empirical_test_error}};

  const Classifier& model = out.report.model;
  double test_error = out.empirical_test_error;
  if (model.theory_mode()) {
    const Vector theta = model.head.row(0).transpose();
    const Vector mu_hat = theta.head(cfg.data.p1);
    const Vector gamma_hat = theta.tail(cfg.data.p2);
    const double general = theoretical_test_error(mu_hat, gamma_hat, cfg.data.mu, cfg.data.sigma1, false);
    const double strict = theoretical_test_error(mu_hat, gamma_hat, cfg.data.mu, cfg.data.sigma1, true);
    out.theoretical_test_error = cfg.eval.strict_paper_error_formula ? strict : general;
    out.theta = theta;
    test_error = *out.theoretical_test_error;
    j["theory"] = {{"error_formula", cfg.eval.strict_paper_error_formula ? "strict_paper" : "general"},
                   {"theoretical_test_error", *out.theoretical_test_error},
                   {"theoretical_test_error_general", general},
                   {"theoretical_test_error_strict", strict},
                   {"gamma_norm", gamma_hat.norm()},
                   {"mu_norm", mu_hat.norm()},
                   {"mu_hat_dot_mu", mu_hat.dot(cfg.data.mu)},
                   {"theta", vector_to_json(theta)}};
  }
  j["test_error"] = test_error;

  const auto trajectory = out.report.sensitivity_trajectory();
  if (!trajectory.empty()) {
    const CumulativeSensitivity cum = cumulative_sensitivity(trajectory);
    Json ranking = Json::array();
    for (std::size_t r = 0; r < cum.ranking.size(); ++r) {
      const Concept& c = bank.concepts[static_cast<std::size_t>(cum.ranking[r])];
      ranking.push_back({{"rank", r + 1}, {"concept_id", c.id}, {"name", c.name}, {"total", cum.totals(cum.ranking[r])}});
    }
    j["cumulative_sensitivity"] = ranking;
    Json reports = Json::array();
    for (const EpochRecord& r : out.report.epochs) {
      if (r.sensitivity) reports.push_back(sensitivity_report_to_json(*r.sensitivity));
    }
    j["sensitivity_reports"] = reports;
  }
  if (out.report.clusters) {
    Json ari = Json::array();
    for (int c = 0; c < kNumClasses; ++c) {
      const IntVector truth = gather(data.train.env_ids, out.report.clusters->members[c]);
      ari.push_back({{"label", class_label(c)}, {"ari", adjusted_rand_index(truth, out.report.clusters->assignments[c])}});
    }
    j["clustering_vs_true_env"] = ari;
  }
  out.summary = std::move(j);
  return out;
}

void write_run_directory(const fs::path& dir, const ExperimentConfig& config, std::uint64_t seed,
                         const RunOutcome& outcome, const ConceptBank& bank) {
  fs::create_directories(dir);
  ExperimentConfig cfg = config;
  cfg.seed = seed;
  cfg.data.seed = seed;
  cfg.train.seed = train_seed(seed);
  cfg.train.method = outcome.report.method;
  write_json(dir / "resolved_config.json", config_to_json(cfg));
  write_text(dir / "metrics.csv", metrics_csv(outcome.report));
  if (!outcome.report.sensitivity_trajectory().empty()) write_text(dir / "sensitivity.csv", sensitivity_csv(outcome.report, bank));
  write_json(dir / "report.json", outcome.summary);
  write_text(dir / "seed", std::to_string(seed) + "\n");
  write_json(dir / "model.json", model_to_json(outcome.report.model));
  if (outcome.report.clusters) write_clusters_csv(dir / "clusters.csv", *outcome.report.clusters);
  if (outcome.report.cavs) write_cavset_csv(dir / "cavs.csv", *outcome.report.cavs);
}

Json paired_comparison(const std::vector<Json>& disc_runs, const std::vector<Json>& erm_runs) {
  std::map<std::uint64_t, const Json*> erm_by_seed;
  for (const Json& r : erm_runs) erm_by_seed[r.at("seed").get<std::uint64_t>()] = &r;
  Json pairs = Json::array();
  int wins = 0, ordered = 0, with_norms = 0;
  double sum_erm = 0.0, sum_disc = 0.0;
  for (const Json& d : disc_runs) {
    const auto seed = d.at("seed").get<std::uint64_t>();
    const auto it = erm_by_seed.find(seed);
    if (it == erm_by_seed.end()) continue;
    const Json& e = *it->second;
    const double err_d = d.at("test_error").get<double>();
    const double err_e = e.at("test_error").get<double>();
    const bool win = err_d < err_e;
    wins += win ? 1 : 0;
    sum_erm += err_e;
    sum_disc += err_d;
    Json pair{{"seed", seed}, {"erm_test_error", err_e}, {"disc_test_error", err_d}, {"disc_better", win}};
    if (d.contains("theory") && e.contains("theory")) {
      const double gd = d["theory"]["gamma_norm"].get<double>();
      const double ge = e["theory"]["gamma_norm"].get<double>();
      pair["erm_gamma_norm"] = ge;
      pair["disc_gamma_norm"] = gd;
      ++with_norms;
      ordered += gd < ge ? 1 : 0;
    }
    pairs.push_back(pair);
  }
  const auto n = static_cast<int>(pairs.size());
  // one-sided sign test: P(Binomial(n, 1/2) >= wins)
  double p_value = 0.0;
  for (int i = wins; i <= n; ++i) p_value += std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) - n * std::log(2.0));
  Json out{{"pairs", n}, {"disc_wins", wins}, {"per_seed", pairs}};
  if (n > 0) {
    out["win_rate"] = static_cast<double>(wins) / n;
    out["sign_test_p"] = std::min(1.0, p_value);
    out["mean_test_error_erm"] = sum_erm / n;
    out["mean_test_error_disc"] = sum_disc / n;
    out["relative_error_reduction"] = sum_erm > 0.0 ? 1.0 - sum_disc / sum_erm : 0.0;
  }
  if (with_norms > 0) out["gamma_norm_ordered"] = ordered;
  return out;
}

unsigned sweep_threads_from_env() {
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const char* env = std::getenv("DISC_LAB_THREADS");
  if (!env || !*env) return hw;
  try {
    const long v = std::stol(env);
    if (v < 1) throw ConfigError("DISC_LAB_THREADS must be a positive integer");
    return static_cast<unsigned>(v);
  } catch (const std::logic_error&) {
    throw ConfigError("DISC_LAB_THREADS must be a positive integer");
  }
}

Json run_sweep(const ExperimentConfig& config, const std::vector<Method>& methods,
               const std::vector<std::uint64_t>& seeds, const fs::path& out, unsigned threads) {
  struct Cell {
    Method method;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (auto seed : seeds) {
    for (Method m : methods) cells.push_back({m, seed});
  }
  std::vector<Json> summaries(cells.size());
  std::vector<std::string> errors(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const Cell& cell = cells[i];
      try {
        ExperimentConfig cfg = config;
        cfg.seed = cell.seed;
        const DataBundle data = make_data(cfg, cell.seed);
        const RunOutcome outcome = run_experiment(cfg, cell.method, cell.seed, data);
        const std::string name = to_string(cell.method) + "_seed" + std::to_string(cell.seed);
        write_run_directory(out / name, cfg, cell.seed, outcome, make_bank(cfg));
        summaries[i] = outcome.summary;
        summaries[i]["dir"] = name;
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(cells.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!errors[i].empty()) {
      throw NumericalError(to_string(cells[i].method) + " seed " + std::to_string(cells[i].seed) + ": " + errors[i]);
    }
  }

  Json runs = Json::array();
  std::map<Method, std::vector<Json>> by_method;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Json& s = summaries[i];
    Json row{{"method", s["method"]}, {"seed", s["seed"]}, {"dir", s["dir"]}, {"test_error", s["test_error"]},
             {"avg_acc", s["test"]["avg_acc"]}, {"worst_acc", s["test"]["worst_acc"]}, {"diverged", s["diverged"]}};
    if (s.contains("theory")) row["gamma_norm"] = s["theory"]["gamma_norm"];
    runs.push_back(row);
    by_method[cells[i].method].push_back(s);
  }
  Json method_means = Json::object();
  for (const auto& [m, list] : by_method) {
    double err = 0.0, avg = 0.0, worst = 0.0;
    for (const Json& s : list) {
      err += s["test_error"].get<double>();
      avg += s["test"]["avg_acc"].get<double>();
      worst += s["test"]["worst_acc"].get<double>();
    }
    const double n = static_cast<double>(list.size());
    method_means[to_string(m)] = {{"runs", list.size()}, {"mean_test_error", err / n}, {"mean_avg_acc", avg / n}, {"mean_worst_acc", worst / n}};
  }
  Json summary{{"methods", Json::array()}, {"seeds", seeds}, {"runs", runs}, {"by_method", method_means}};
  for (Method m : methods) summary["methods"].push_back(to_string(m));
  if (by_method.count(Method::disc) && by_method.count(Method::erm)) {
    summary["disc_vs_erm"] = paired_comparison(by_method[Method::disc], by_method[Method::erm]);
  }
  write_json(out / "summary.json", summary);
  return summary;
}

std::vector<KSweepRow> sweep_k(const ExperimentConfig& config, std::uint64_t seed, int k_min, int k_max) {
  if (k_min < 2 || k_max < k_min) throw ConfigError("k sweep needs 2 <= k_min <= k_max");
  const DataBundle data = make_data(config, seed);
  std::vector<KSweepRow> rows;
  for (int k = k_min; k <= k_max; ++k) {
    ExperimentConfig cfg = config;
    cfg.train.k = k;
    const RunOutcome outcome = run_experiment(cfg, Method::disc, seed, data);
    const PerClassClusters& cl = *outcome.report.clusters;
    double weighted = 0.0, total = 0.0;
    for (int c = 0; c < kNumClasses; ++c) {
      const auto n = static_cast<double>(cl.members[c].size());
      weighted += n * silhouette_score(cl.features[c], cl.assignments[c]);
      total += n;
    }
    rows.push_back({k, weighted / total, outcome.test.worst_acc});
  }
  return rows;
}

Json aggregate_reports(const fs::path& root) {
  if (!fs::is_directory(root)) throw ConfigError("no such directory " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && entry.path().filename() != "report" && fs::exists(entry.path() / "report.json")) {
      dirs.push_back(entry.path());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw ConfigError("no run directories with report.json under " + root.string());

  std::string table = "method,seed,avg_acc,worst_acc,test_error,gamma_norm\n";
  std::map<std::string, std::vector<Json>> by_method;
  std::map<std::string, std::map<int, std::pair<std::string, double>>> cumulative;
  std::map<std::string, int> cumulative_runs;
  for (const fs::path& dir : dirs) {
    Json r = read_json(dir / "report.json");
    const auto method = r.at("method").get<std::string>();
    table += method + "," + std::to_string(r.at("seed").get<std::uint64_t>()) + "," +
             format_double(r["test"]["avg_acc"].get<double>()) + "," + format_double(r["test"]["worst_acc"].get<double>()) +
             "," + format_double(r["test_error"].get<double>()) + "," +
             (r.contains("theory") ? format_double(r["theory"]["gamma_norm"].get<double>()) : std::string("nan")) + "\n";
    if (r.contains("cumulative_sensitivity")) {
      ++cumulative_runs[method];
      for (const Json& c : r["cumulative_sensitivity"]) {
        auto& slot = cumulative[method][c["concept_id"].get<int>()];
        slot.first = c["name"].get<std::string>();
        slot.second += c["total"].get<double>();
      }
    }
    by_method[method].push_back(std::move(r));
  }

  std::string cum_csv = "method,concept_id,name,mean_total,rank\n";
  for (const auto& [method, concepts] : cumulative) {
    std::vector<std::pair<int, std::pair<std::string, double>>> items(concepts.begin(), concepts.end());
    std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second.second > b.second.second; });
    for (std::size_t r = 0; r < items.size(); ++r) {
      cum_csv += method + "," + std::to_string(items[r].first) + "," + items[r].second.first + "," +
                 format_double(items[r].second.second / cumulative_runs[method]) + "," + std::to_string(r + 1) + "\n";
    }
  }

  Json out{{"runs", dirs.size()}, {"by_method", Json::object()}};
  for (const auto& [method, list] : by_method) {
    double err = 0.0, worst = 0.0, avg = 0.0;
    for (const Json& r : list) {
      err += r["test_error"].get<double>();
      worst += r["test"]["worst_acc"].get<double>();
      avg += r["test"]["avg_acc"].get<double>();
    }
    const double n = static_cast<double>(list.size());
    out["by_method"][method] = {{"runs", list.size()}, {"mean_test_error", err / n}, {"mean_avg_acc", avg / n}, {"mean_worst_acc", worst / n}};
  }
  if (by_method.count("disc") && by_method.count("erm")) {
    out["theorem1_disc_vs_erm"] = paired_comparison(by_method["disc"], by_method["erm"]);
  }
  const fs::path report_dir = root / "report";
  write_text(report_dir / "summary.csv", table);
  write_text(report_dir / "cumulative_sensitivity.csv", cum_csv);
  write_json(report_dir / "aggregate.json", out);
  return out;
}

}  // namespace disc
