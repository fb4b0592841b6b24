#pragma once

#include "disc/model.hpp"
#include "disc/rng.hpp"
#include "disc/synthdata.hpp"
#include "disc/types.hpp"

#include <array>
#include <vector>

namespace disc {

struct GmmOptions {
  int max_iterations = 200;
  double tolerance = 1e-6;  // relative change of the log-likelihood
  double variance_floor = 1e-6;
  int kmeans_iterations = 100;  // Lloyd refinement of the k-means++ seeds
  int n_init = 10;  // independent starts; the best log-likelihood wins
  int max_restarts = 10;  // extra starts allowed when a component collapses
};

/// Diagonal-covariance Gaussian mixture fitted by EM.
struct GmmFit {
  IntVector assignments;   // hard labels in 0..k-1
  Matrix responsibilities; // N x k, rows sum to 1
  Matrix means;            // k x q
  Matrix variances;        // k x q
  Vector weights;          // k
  double loglik = 0.0;
  std::vector<double> loglik_trace;
  int iterations = 0;
  bool converged = false;
};

/// k-means++ seeding refined by Lloyd iterations, then EM; repeated n_init times. Hard assignments follow
/// the largest responsibility; a component left without points is given the
/// point that prefers it most so every cluster is nonempty.
GmmFit fit_gmm(const Matrix& points, int k, Rng& rng, const GmmOptions& options = {});

/// Zero mean, unit variance per column; constant columns are only centred.
Matrix standardize_columns(const Matrix& points);

/// Representation g(x) concatenated with the reference model's probabilities
/// (sigmoid of the single output, softmax otherwise).
Matrix clustering_features(const Classifier& reference, const Matrix& inputs);

struct PerClassClusters {
  int k = 1;
  std::array<IndexSet, kNumClasses> members;          // dataset rows of each class
  std::array<IntVector, kNumClasses> assignments;     // cluster of each member
  std::array<std::vector<IndexSet>, kNumClasses> clusters;  // dataset rows per cluster
  std::array<Matrix, kNumClasses> features;           // standardized clustering features

  void check_partition(Index n) const;
};

/// Fits a GMM independently within each class using substream rng.split(class).
/// Only labels are read from the data; environment annotations are not available here.
PerClassClusters cluster_per_class(const TrainingView& data, const Classifier& reference, int k, const Rng& rng,
                                   const GmmOptions& options = {});

/// Clusters taken as given (for oracle experiments and tests).
PerClassClusters clusters_from_assignments(const IntVector& labels, const IntVector& cluster_of_row, int k);

struct EnvironmentPartition {
  int k = 1;
  std::array<std::vector<int>, kNumClasses> pairing;  // pairing[c][j] = cluster of class c used in G_j
  std::vector<IndexSet> environments;                 // sorted dataset rows

  void check(const PerClassClusters& clusters) const;
};

/// Independent uniform permutation of cluster indices per class, then
/// G_j = union over classes of the class's pairing[c][j]-th cluster.
EnvironmentPartition build_environments(const PerClassClusters& clusters, Rng& rng);

/// Mean silhouette with Euclidean distances; singleton clusters score 0.
double silhouette_score(const Matrix& points, const IntVector& assignments);

}  // namespace disc
