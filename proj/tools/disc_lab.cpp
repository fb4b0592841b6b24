#include "disc/error.hpp"
#include "disc/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

using namespace disc;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<int> k;
  bool strict_formula = false;
};

ExperimentConfig resolve(const CommonFlags& flags) {
  ExperimentConfig config = load_config(flags.config);
  if (flags.seed) {
    config.seed = *flags.seed;
    config.data.seed = *flags.seed;
    config.train.seed = train_seed(*flags.seed);
  }
  if (flags.k) config.train.k = *flags.k;
  if (flags.strict_formula) config.eval.strict_paper_error_formula = true;
  config.validate();
  return config;
}

int gen_data(const CommonFlags& flags) {
  const ExperimentConfig config = resolve(flags);
  const fs::path out = flags.out.empty() ? fs::path(config.output_dir) / "data" : fs::path(flags.out);
  write_data_bundle(out, config, make_data(config, config.seed));
  std::cout << "wrote dataset to " << out.string() << "\n";
  return 0;
}

int train_one(const CommonFlags& flags, const std::string& method_name, const std::string& data_dir) {
  ExperimentConfig config = resolve(flags);
  const Method method = method_name.empty() ? config.train.method : method_from_string(method_name);
  const DataBundle data = data_dir.empty() ? make_data(config, config.seed) : read_data_bundle(data_dir);
  const RunOutcome outcome = run_experiment(config, method, config.seed, data);
  const fs::path out = flags.out.empty()
                           ? fs::path(config.output_dir) / (to_string(method) + "_seed" + std::to_string(config.seed))
                           : fs::path(flags.out);
  write_run_directory(out, config, config.seed, outcome, make_bank(config));
  std::cout << to_string(method) << " seed " << config.seed << ": test error " << outcome.summary["test_error"].get<double>()
            << ", worst-group acc " << outcome.test.worst_acc << " -> " << out.string() << "\n";
  if (outcome.report.diverged) {
    std::cerr << "training diverged: " << outcome.report.divergence_message << "\n";
    return 2;
  }
  return 0;
}

int sweep(const CommonFlags& flags, const std::string& methods, const std::string& seeds) {
  const ExperimentConfig config = resolve(flags);
  const auto seed_list = seeds.empty() ? config.eval.seeds : parse_seed_range(seeds);
  const fs::path out = flags.out.empty() ? fs::path(config.output_dir) : fs::path(flags.out);
  const Json summary = run_sweep(config, parse_methods(methods), seed_list, out, sweep_threads_from_env());
  std::cout << "wrote " << summary["runs"].size() << " runs and summary.json to " << out.string() << "\n";
  if (summary.contains("disc_vs_erm")) {
    const Json& c = summary["disc_vs_erm"];
    std::cout << "disc better than erm in " << c["disc_wins"] << "/" << c["pairs"] << " paired seeds\n";
  }
  return 0;
}

int sweep_k_cmd(const CommonFlags& flags) {
  const ExperimentConfig config = resolve(flags);
  const int k_max = flags.k.value_or(6);
  const auto rows = sweep_k(config, config.seed, 2, k_max);
  std::string csv = "k,silhouette,worst_group_acc\n";
  for (const KSweepRow& r : rows) {
    csv += std::to_string(r.k) + "," + format_double(r.silhouette) + "," + format_double(r.worst_group_acc) + "\n";
  }
  const fs::path out = flags.out.empty() ? fs::path(config.output_dir) / "k_sweep.csv" : fs::path(flags.out);
  write_text(out, csv);
  std::cout << csv;
  return 0;
}

int report(const std::string& root) {
  const Json agg = aggregate_reports(root);
  std::cout << "aggregated " << agg["runs"] << " runs into " << (fs::path(root) / "report").string() << "\n";
  if (agg.contains("theorem1_disc_vs_erm")) {
    const Json& c = agg["theorem1_disc_vs_erm"];
    std::cout << "theorem-1 win rate (disc < erm test error): " << c["disc_wins"] << "/" << c["pairs"] << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DISC concept-level experiments on the Gaussian-mixture spurious-correlation model", "disc_lab"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string method, methods = "erm,disc", seeds, data_dir;

  auto add_common = [&](CLI::App* sub, bool with_method) {
    sub->add_option("--config", flags.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "overrides the config seed");
    sub->add_option("--out", flags.out, "output path");
    sub->add_option("--k", flags.k, "clusters per class (sweep-k: largest k)")->check(CLI::PositiveNumber);
    sub->add_flag("--strict-paper-error-formula", flags.strict_formula,
                  "use ||mu_hat||^2 instead of mu_hat^T Sigma1 mu_hat in the test-error denominator");
    if (with_method) sub->add_option("--method", method, "erm|uw|disc|disc_randint|disc_reweight|disc_inadaptive");
  };

  auto* gen = app.add_subcommand("gen-data", "write train/test CSVs, patterns and bank manifest");
  add_common(gen, false);
  auto* tr = app.add_subcommand("train", "train one method on one seed");
  add_common(tr, true);
  tr->add_option("--data", data_dir, "directory written by gen-data")->check(CLI::ExistingDirectory);
  auto* sw = app.add_subcommand("sweep", "methods x seeds grid plus summary.json");
  add_common(sw, false);
  sw->add_option("--methods", methods, "comma-separated methods");
  sw->add_option("--seeds", seeds, "A..B or a comma list");
  auto* sk = app.add_subcommand("sweep-k", "silhouette and worst-group accuracy for k = 2..K");
  add_common(sk, false);
  std::string report_root;
  auto* rep = app.add_subcommand("report", "aggregate run directories");
  rep->add_option("--out", report_root, "directory holding run directories")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e, std::cerr, std::cerr);
    std::cerr << app.help();
    return 1;
  }

  try {
    if (*gen) return gen_data(flags);
    if (*tr) return train_one(flags, method, data_dir);
    if (*sw) return sweep(flags, methods, seeds);
    if (*sk) return sweep_k_cmd(flags);
    if (*rep) return report(report_root);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
