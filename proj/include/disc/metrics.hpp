#pragma once

#include "disc/model.hpp"
#include "disc/synthdata.hpp"
#include "disc/types.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace disc {

struct GroupMetrics {
  std::map<std::pair<int, int>, double> per_group_acc;  // (label, env) -> accuracy
  std::map<std::pair<int, int>, Index> n_per_group;
  double avg_acc = 0.0;    // instance-weighted
  double worst_acc = 0.0;  // min over nonempty groups
};

/// A zero prediction never matches a +-1 label.
GroupMetrics group_metrics(const IntVector& predictions, const IntVector& labels, const IntVector& env_ids);
GroupMetrics group_metrics(const Classifier& model, const LabeledDataset& data);

double accuracy(const IntVector& predictions, const IntVector& labels);

/// Cramer's V of two categorical vectors, no continuity correction.
double cramers_v(const IntVector& a, const IntVector& b);

/// Standard normal CDF via erfc.
double normal_cdf(double x);

/// Phi(-mu_hat^T mu / sqrt(mu_hat^T sigma1 mu_hat + ||gamma_hat||^2)); the
/// strict form uses ||mu_hat||^2 in place of mu_hat^T sigma1 mu_hat. Returns 1
/// when the predictor is identically zero.
double theoretical_test_error(const Vector& mu_hat, const Vector& gamma_hat, const Vector& mu, const Matrix& sigma1,
                              bool strict_paper_form = false);

struct LeastSquaresSolution {
  Vector theta;
  bool ridge_used = false;
};

/// argmin_theta ||y - X theta||^2 by the normal equations. A near-singular Gram
/// matrix falls back to ridge 1e-8 (flagged) or throws when the fallback is off.
LeastSquaresSolution closed_form_least_squares(const Matrix& x, const Vector& y, bool allow_ridge = true);

struct NormComparison {
  double gamma_norm_erm = 0.0;
  double gamma_norm_disc = 0.0;
  bool ordered = false;  // ||gamma_disc|| < ||gamma_erm||
  double ratio = 0.0;    // disc / erm (infinity when erm is zero)
};

NormComparison norm_comparison(const Vector& theta_erm, const Vector& theta_disc, int p1);

struct CumulativeSensitivity {
  Vector totals;
  std::vector<Index> ranking;  // positions, descending total, stable
};

CumulativeSensitivity cumulative_sensitivity(const std::vector<Vector>& trajectory);

/// Adjusted Rand index between two labelings of the same points.
double adjusted_rand_index(const IntVector& a, const IntVector& b);

}  // namespace disc
