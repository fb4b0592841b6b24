#include "disc/synthdata.hpp"

#include "disc/error.hpp"

#include <cmath>
#include <string>

namespace disc {

namespace {

constexpr int kPatternRetries = 10000;

double max_binary_variance(int k) {
  double best = 0.0;
  for (int ones = 0; ones <= k; ++ones) {
    const double p = static_cast<double>(ones) / k;
    best = std::max(best, p * (1.0 - p));
  }
  return best;
}

Matrix invariant_noise_factor(const Matrix& sigma1) {
  Eigen::LLT<Matrix> llt(sigma1);
  if (llt.info() != Eigen::Success) throw ConfigError("sigma1 is not positive definite");
  return llt.matrixL();
}

LabeledDataset generate(const DataConfig& config, const GammaPatterns* patterns, bool training, Index rows,
                        Rng& rng) {
  config.validate();
  const int p1 = config.p1;
  const int p2 = config.p2;
  const Matrix chol = invariant_noise_factor(config.sigma1);

  LabeledDataset data;
  data.features.resize(rows, p1 + p2);
  data.labels.resize(rows);
  data.env_ids.resize(rows);

  Vector z(p1);
  for (Index r = 0; r < rows; ++r) {
    const int y = rng.bernoulli(config.class_balance) ? 1 : -1;
    const int env = static_cast<int>(rng.index(static_cast<std::size_t>(config.k)));
    for (int j = 0; j < p1; ++j) z(j) = rng.normal();
    data.features.row(r).head(p1) = (static_cast<double>(y) * config.mu + chol * z).transpose();
    for (int j = 0; j < p2; ++j) {
      double value = config.spu_noise_scale * rng.normal();
      if (patterns != nullptr) value += patterns->gamma[class_index(y)](env, j);
      data.features(r, p1 + j) = value;
    }
    data.labels(r) = y;
    data.env_ids(r) = training ? env + 1 : LabeledDataset::kTestEnv;
  }
  return data;
}

void check_patterns(const DataConfig& config, const GammaPatterns& patterns) {
  if (config.p2 == 0) return;
  if (patterns.p2() != config.p2 || patterns.k() != config.k) {
    throw ConfigError("gamma patterns shape (k=" + std::to_string(patterns.k()) + ", p2=" +
                      std::to_string(patterns.p2()) + ") does not match the data config");
  }
}

}  // namespace

void DataConfig::validate() const {
  if (p1 < 1) throw ConfigError("p1 must be >= 1");
  if (p2 < 0) throw ConfigError("p2 must be >= 0");
  if (n < 1) throw ConfigError("n must be >= 1");
  if (k < 1) throw ConfigError("k must be >= 1");
  if (mu.size() != p1) throw ConfigError("mu must have p1 entries");
  if (sigma1.rows() != p1 || sigma1.cols() != p1) throw ConfigError("sigma1 must be p1 x p1");
  if ((sigma1 - sigma1.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, sigma1.cwiseAbs().maxCoeff())) {
    throw ConfigError("sigma1 must be symmetric");
  }
  if (!(spu_noise_scale >= 0.0)) throw ConfigError("spu_noise_scale must be >= 0");
  if (!(class_balance > 0.0 && class_balance < 1.0)) throw ConfigError("class_balance must lie in (0, 1)");
  if (!(k1 > 0.0) || !(k2 >= k1)) throw ConfigError("eigenvalue bounds need 0 < k1 <= k2");
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma1, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  const double slack = 1e-10 * std::max(1.0, k2);  // eigen-solver round-off
  if (lo < k1 - slack || hi > k2 + slack) {
    throw ConfigError("sigma1 eigenvalues [" + std::to_string(lo) + ", " + std::to_string(hi) +
                      "] fall outside [k1, k2]");
  }
}

DataConfig DataConfig::standard(int p1, int p2, int n, int k) {
  DataConfig config;
  config.p1 = p1;
  config.p2 = p2;
  config.n = n;
  config.k = k;
  config.mu = Vector::Constant(p1, 1.0 / std::sqrt(static_cast<double>(p1)));
  config.sigma1 = Matrix::Identity(p1, p1);
  return config;
}

IndexSet GammaPatterns::support(int class_idx) const {
  IndexSet out;
  const Matrix& g = gamma[static_cast<std::size_t>(class_idx)];
  for (Index j = 0; j < g.cols(); ++j) {
    if ((g.col(j).array() != 0.0).any()) out.push_back(j);
  }
  return out;
}

bool GammaPatterns::satisfies_assumptions(double k0) const {
  for (Index j = 0; j < p2(); ++j) {
    const bool in_neg = (gamma[0].col(j).array() != 0.0).any();
    const bool in_pos = (gamma[1].col(j).array() != 0.0).any();
    if (in_neg && in_pos) return false;
    for (const Matrix& g : gamma) {
      if ((g.col(j).array() != 0.0).any() && !(population_variance(g.col(j)) > k0)) return false;
    }
  }
  return true;
}

GammaPatterns make_gamma_patterns(int p2, int k, double k0, Rng& rng) {
  if (p2 < 0 || k < 1) throw ConfigError("gamma patterns need p2 >= 0 and k >= 1");
  GammaPatterns patterns;
  for (Matrix& g : patterns.gamma) g = Matrix::Zero(k, p2);
  if (p2 == 0) return patterns;
  if (p2 % 2 != 0) throw ConfigError("p2 must be even so each class owns half of the spurious coordinates");
  if (!(max_binary_variance(k) > k0)) {
    throw ConfigError("no {0,1} pattern over k=" + std::to_string(k) +
                      " environments has variance above k0=" + std::to_string(k0));
  }

  const int half = p2 / 2;
  for (int j = 0; j < p2; ++j) {
    Matrix& g = patterns.gamma[j < half ? 1 : 0];
    Vector column(k);
    int attempt = 0;
    do {
      if (++attempt > kPatternRetries) throw ConfigError("could not sample a gamma pattern above k0");
      for (int i = 0; i < k; ++i) column(i) = rng.bernoulli(0.5) ? 1.0 : 0.0;
    } while (!(population_variance(column) > k0));
    g.col(j) = column;
  }
  return patterns;
}

LabeledDataset generate_train(const DataConfig& config, const GammaPatterns& patterns, Rng& rng) {
  check_patterns(config, patterns);
  return generate(config, config.p2 > 0 ? &patterns : nullptr, true, config.n, rng);
}

LabeledDataset generate_test(const DataConfig& config, const GammaPatterns& patterns, Index n_test, Rng& rng) {
  check_patterns(config, patterns);
  if (n_test < 1) throw ConfigError("n_test must be >= 1");
  return generate(config, nullptr, false, n_test, rng);
}

IntVector LabeledDataset::group_ids() const {
  IntVector groups(size());
  for (Index r = 0; r < size(); ++r) groups(r) = 2 * env_ids(r) + class_index(labels(r));
  return groups;
}

void LabeledDataset::check_consistent() const {
  if (labels.size() != features.rows() || env_ids.size() != features.rows()) {
    throw DimensionError("dataset columns have mismatched lengths");
  }
}

}  // namespace disc
