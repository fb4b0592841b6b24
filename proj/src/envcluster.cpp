#include "disc/envcluster.hpp"

#include "disc/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

namespace disc {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

Matrix kmeans_plus_plus(const Matrix& points, int k, Rng& rng) {
  const Index n = points.rows();
  Matrix centres(k, points.cols());
  centres.row(0) = points.row(static_cast<Index>(rng.index(static_cast<std::size_t>(n))));
  Vector dist2 = (points.rowwise() - centres.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = dist2.sum();
    Index pick = 0;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (pick = 0; pick < n - 1; ++pick) {
        u -= dist2(pick);
        if (u < 0.0) break;
      }
    } else {
      pick = static_cast<Index>(rng.index(static_cast<std::size_t>(n)));
    }
    centres.row(c) = points.row(pick);
    dist2 = dist2.cwiseMin((points.rowwise() - centres.row(c)).rowwise().squaredNorm());
  }
  return centres;
}

// Lloyd iterations from the seeded centres; an emptied centre stays where it was.
Matrix lloyd(const Matrix& points, Matrix centres, int max_iterations) {
  const Index n = points.rows();
  const Index k = centres.rows();
  IntVector owner = IntVector::Constant(n, -1);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (Index r = 0; r < n; ++r) {
      Index best = 0;
      (centres.rowwise() - points.row(r)).rowwise().squaredNorm().minCoeff(&best);
      if (owner(r) != best) {
        owner(r) = static_cast<int>(best);
        changed = true;
      }
    }
    if (!changed) break;
    Matrix sums = Matrix::Zero(k, points.cols());
    Vector counts = Vector::Zero(k);
    for (Index r = 0; r < n; ++r) {
      sums.row(owner(r)) += points.row(r);
      counts(owner(r)) += 1.0;
    }
    for (Index c = 0; c < k; ++c) {
      if (counts(c) > 0.0) centres.row(c) = sums.row(c) / counts(c);
    }
  }
  return centres;
}

// Log densities (N x k) of every point under every diagonal component, plus log weights.
Matrix weighted_log_density(const Matrix& points, const GmmFit& g) {
  const Index n = points.rows();
  const Index k = g.means.rows();
  Matrix out(n, k);
  for (Index c = 0; c < k; ++c) {
    const RowVector inv_var = g.variances.row(c).cwiseInverse();
    const double log_det = g.variances.row(c).array().log().sum();
    const double base = std::log(g.weights(c)) - 0.5 * (static_cast<double>(points.cols()) * kLog2Pi + log_det);
    const Matrix diff = points.rowwise() - g.means.row(c);
    out.col(c) = (base - 0.5 * (diff.array().square().rowwise() * inv_var.array()).rowwise().sum()).matrix();
  }
  return out;
}

double e_step(const Matrix& points, GmmFit& g) {
  const Matrix logp = weighted_log_density(points, g);
  g.responsibilities.resize(logp.rows(), logp.cols());
  double loglik = 0.0;
  for (Index r = 0; r < logp.rows(); ++r) {
    const double top = logp.row(r).maxCoeff();
    const RowVector e = (logp.row(r).array() - top).exp().matrix();
    const double s = e.sum();
    g.responsibilities.row(r) = e / s;
    loglik += top + std::log(s);
  }
  return loglik;
}

bool m_step(const Matrix& points, GmmFit& g, double floor) {
  const Index n = points.rows();
  const Vector nk = g.responsibilities.colwise().sum().transpose();
  if ((nk.array() <= 1e-12 * static_cast<double>(n)).any()) return false;
  g.weights = nk / static_cast<double>(n);
  g.means = (g.responsibilities.transpose() * points).array().colwise() / nk.array();
  const Matrix second = (g.responsibilities.transpose() * points.array().square().matrix()).array().colwise() / nk.array();
  g.variances = (second.array() - g.means.array().square()).max(floor).matrix();
  return true;
}

IntVector hard_assignments(const Matrix& responsibilities) {
  IntVector out(responsibilities.rows());
  for (Index r = 0; r < responsibilities.rows(); ++r) {
    Index best = 0;
    responsibilities.row(r).maxCoeff(&best);
    out(r) = static_cast<int>(best);
  }
  return out;
}

void fill_empty_clusters(const Matrix& responsibilities, IntVector& assignments, int k) {
  for (int c = 0; c < k; ++c) {
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Index r = 0; r < assignments.size(); ++r) ++counts[static_cast<std::size_t>(assignments(r))];
    if (counts[static_cast<std::size_t>(c)] > 0) continue;
    Index best = -1;
    for (Index r = 0; r < assignments.size(); ++r) {
      if (counts[static_cast<std::size_t>(assignments(r))] < 2) continue;
      if (best < 0 || responsibilities(r, c) > responsibilities(best, c)) best = r;
    }
    if (best >= 0) assignments(best) = c;
  }
}

}  // namespace

GmmFit fit_gmm(const Matrix& points, int k, Rng& rng, const GmmOptions& options) {
  const Index n = points.rows();
  if (k < 1) throw ConfigError("gmm: k must be at least 1");
  if (points.cols() < 1) throw DimensionError("gmm: points need at least one column");
  if (n < k) throw ConfigError("gmm: fewer points (" + std::to_string(n) + ") than components (" + std::to_string(k) + ")");
  if (!points.allFinite()) throw NumericalError("gmm: non-finite input");

  const RowVector global_mean = points.colwise().mean();
  const RowVector global_var =
      ((points.rowwise() - global_mean).array().square().colwise().sum() / static_cast<double>(n))
          .max(options.variance_floor)
          .matrix();

  std::optional<GmmFit> best;
  int failures = 0;
  for (int started = 0; started < options.n_init && failures <= options.max_restarts;) {
    GmmFit g;
    g.means = lloyd(points, kmeans_plus_plus(points, k, rng), options.kmeans_iterations);
    g.variances = global_var.replicate(k, 1);
    g.weights = Vector::Constant(k, 1.0 / k);

    double loglik = e_step(points, g);
    if (!m_step(points, g, options.variance_floor)) {  // a component attracted no mass
      ++failures;
      continue;
    }
    bool degenerate = false;
    for (int it = 0; it < options.max_iterations; ++it) {
      const double next = e_step(points, g);
      g.loglik_trace.push_back(next);
      g.iterations = it + 1;
      const double change = std::abs(next - loglik) / std::max(1.0, std::abs(next));
      loglik = next;
      if (it > 0 && change < options.tolerance) {
        g.converged = true;
        break;
      }
      if (!m_step(points, g, options.variance_floor)) {
        degenerate = true;
        break;
      }
    }
    if (degenerate) {
      ++failures;
      continue;
    }
    ++started;
    if (!g.converged) {
      loglik = e_step(points, g);
      g.loglik_trace.push_back(loglik);
    }
    g.loglik = loglik;
    g.assignments = hard_assignments(g.responsibilities);
    fill_empty_clusters(g.responsibilities, g.assignments, k);
    if (!best || g.loglik > best->loglik) best = std::move(g);
  }
  if (best) return *best;
  throw NumericalError("gmm: components collapsed after " + std::to_string(options.max_restarts + 1) + " initializations");
}

Matrix standardize_columns(const Matrix& points) {
  if (points.rows() == 0) return points;
  const RowVector mean = points.colwise().mean();
  Matrix out = points.rowwise() - mean;
  for (Index c = 0; c < out.cols(); ++c) {
    const double sd = std::sqrt(out.col(c).squaredNorm() / static_cast<double>(out.rows()));
    if (sd > 0.0) out.col(c) /= sd;
  }
  return out;
}

Matrix clustering_features(const Classifier& reference, const Matrix& inputs) {
  const Matrix hidden = reference.encoder.encode(inputs);
  const Matrix logits = predict(reference, inputs);
  Matrix probs(logits.rows(), logits.cols());
  if (logits.cols() == 1) {
    probs = (1.0 / (1.0 + (-logits.array()).exp())).matrix();
  } else {
    for (Index r = 0; r < logits.rows(); ++r) {
      const RowVector e = (logits.row(r).array() - logits.row(r).maxCoeff()).exp().matrix();
      probs.row(r) = e / e.sum();
    }
  }
  Matrix out(inputs.rows(), hidden.cols() + probs.cols());
  out << hidden, probs;
  return out;
}

void PerClassClusters::check_partition(Index n) const {
  std::vector<int> seen(static_cast<std::size_t>(n), 0);
  for (int c = 0; c < kNumClasses; ++c) {
    if (static_cast<int>(clusters[c].size()) != k) throw DimensionError("class does not have k clusters");
    std::size_t total = 0;
    for (const IndexSet& cl : clusters[c]) {
      total += cl.size();
      for (Index i : cl) {
        if (i < 0 || i >= n) throw DimensionError("cluster index out of range");
        ++seen[static_cast<std::size_t>(i)];
      }
    }
    if (total != members[c].size()) throw DimensionError("clusters do not cover the class exactly");
  }
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (seen[i] > 1) throw DimensionError("row " + std::to_string(i) + " belongs to two clusters");
  }
}

namespace {

void collect_clusters(PerClassClusters& out, int c) {
  out.clusters[c].assign(static_cast<std::size_t>(out.k), IndexSet{});
  for (std::size_t r = 0; r < out.members[c].size(); ++r) {
    out.clusters[c][static_cast<std::size_t>(out.assignments[c](static_cast<Index>(r)))].push_back(out.members[c][r]);
  }
}

std::array<IndexSet, kNumClasses> split_by_class(const IntVector& labels) {
  std::array<IndexSet, kNumClasses> members;
  for (Index i = 0; i < labels.size(); ++i) members[class_index(labels(i))].push_back(i);
  return members;
}

}  // namespace

PerClassClusters cluster_per_class(const TrainingView& data, const Classifier& reference, int k, const Rng& rng,
                                   const GmmOptions& options) {
  if (k < 1) throw ConfigError("k must be at least 1");
  PerClassClusters out;
  out.k = k;
  out.members = split_by_class(data.labels);
  for (int c = 0; c < kNumClasses; ++c) {
    const IndexSet& rows = out.members[c];
    if (static_cast<int>(rows.size()) < k) {
      throw ConfigError("class " + std::to_string(class_label(c)) + " has fewer than k=" + std::to_string(k) + " instances");
    }
    out.features[c] = standardize_columns(clustering_features(reference, gather_rows(data.features, rows)));
    Rng local = rng.split(static_cast<std::uint64_t>(c));
    out.assignments[c] = fit_gmm(out.features[c], k, local, options).assignments;
    collect_clusters(out, c);
  }
  return out;
}

PerClassClusters clusters_from_assignments(const IntVector& labels, const IntVector& cluster_of_row, int k) {
  if (labels.size() != cluster_of_row.size()) throw DimensionError("labels and cluster ids differ in length");
  PerClassClusters out;
  out.k = k;
  out.members = split_by_class(labels);
  for (int c = 0; c < kNumClasses; ++c) {
    out.assignments[c] = gather(cluster_of_row, out.members[c]);
    if (out.assignments[c].size() > 0 && (out.assignments[c].minCoeff() < 0 || out.assignments[c].maxCoeff() >= k)) {
      throw ConfigError("cluster id outside 0..k-1");
    }
    collect_clusters(out, c);
  }
  return out;
}

void EnvironmentPartition::check(const PerClassClusters& clusters) const {
  if (static_cast<int>(environments.size()) != k) throw DimensionError("partition does not have k environments");
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<int> sorted = pairing[c];
    std::sort(sorted.begin(), sorted.end());
    for (int j = 0; j < k; ++j) {
      if (sorted[static_cast<std::size_t>(j)] != j) throw DimensionError("pairing is not a permutation");
    }
  }
  for (int j = 0; j < k; ++j) {
    IndexSet expected;
    for (int c = 0; c < kNumClasses; ++c) {
      const IndexSet& cl = clusters.clusters[c][static_cast<std::size_t>(pairing[c][static_cast<std::size_t>(j)])];
      expected.insert(expected.end(), cl.begin(), cl.end());
    }
    std::sort(expected.begin(), expected.end());
    if (expected != environments[static_cast<std::size_t>(j)]) throw DimensionError("environment is not a union of clusters");
  }
}

EnvironmentPartition build_environments(const PerClassClusters& clusters, Rng& rng) {
  EnvironmentPartition part;
  part.k = clusters.k;
  for (int c = 0; c < kNumClasses; ++c) {
    part.pairing[c].resize(static_cast<std::size_t>(clusters.k));
    std::iota(part.pairing[c].begin(), part.pairing[c].end(), 0);
    std::shuffle(part.pairing[c].begin(), part.pairing[c].end(), rng.engine());
  }
  part.environments.resize(static_cast<std::size_t>(clusters.k));
  for (int j = 0; j < clusters.k; ++j) {
    IndexSet& env = part.environments[static_cast<std::size_t>(j)];
    for (int c = 0; c < kNumClasses; ++c) {
      const IndexSet& cl = clusters.clusters[c][static_cast<std::size_t>(part.pairing[c][static_cast<std::size_t>(j)])];
      env.insert(env.end(), cl.begin(), cl.end());
    }
    std::sort(env.begin(), env.end());
  }
  return part;
}

double silhouette_score(const Matrix& points, const IntVector& assignments) {
  const Index n = points.rows();
  if (assignments.size() != n) throw DimensionError("silhouette: assignments and points differ in length");
  if (n == 0) throw ConfigError("silhouette: no points");
  const int k = assignments.maxCoeff() + 1;
  if (assignments.minCoeff() < 0) throw ConfigError("silhouette: negative cluster id");
  std::vector<Index> sizes(static_cast<std::size_t>(k), 0);
  for (Index i = 0; i < n; ++i) ++sizes[static_cast<std::size_t>(assignments(i))];
  const auto nonempty = std::count_if(sizes.begin(), sizes.end(), [](Index s) { return s > 0; });
  if (nonempty < 2) throw ConfigError("silhouette needs at least two nonempty clusters");

  double total = 0.0;
  std::vector<double> sums(static_cast<std::size_t>(k));
  for (Index i = 0; i < n; ++i) {
    std::fill(sums.begin(), sums.end(), 0.0);
    const Vector dist = (points.rowwise() - points.row(i)).rowwise().norm();
    for (Index j = 0; j < n; ++j) {
      if (j != i) sums[static_cast<std::size_t>(assignments(j))] += dist(j);
    }
    const auto own = static_cast<std::size_t>(assignments(i));
    if (sizes[own] < 2) continue;
    const double a = sums[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < sums.size(); ++c) {
      if (c != own && sizes[c] > 0) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
    }
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

}  // namespace disc
