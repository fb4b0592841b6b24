#include "disc/metrics.hpp"

#include "disc/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace disc {

GroupMetrics group_metrics(const IntVector& predictions, const IntVector& labels, const IntVector& env_ids) {
  if (predictions.size() != labels.size() || labels.size() != env_ids.size()) {
    throw DimensionError("predictions, labels and environments differ in length");
  }
  if (labels.size() == 0) throw ConfigError("group metrics on an empty dataset");
  std::map<std::pair<int, int>, Index> correct;
  GroupMetrics out;
  Index total_correct = 0;
  for (Index i = 0; i < labels.size(); ++i) {
    const std::pair<int, int> key{labels(i), env_ids(i)};
    ++out.n_per_group[key];
    const bool hit = predictions(i) == labels(i);
    correct[key] += hit ? 1 : 0;
    total_correct += hit ? 1 : 0;
  }
  out.worst_acc = 1.0;
  for (const auto& [key, n] : out.n_per_group) {
    const double acc = static_cast<double>(correct[key]) / static_cast<double>(n);
    out.per_group_acc[key] = acc;
    out.worst_acc = std::min(out.worst_acc, acc);
  }
  out.avg_acc = static_cast<double>(total_correct) / static_cast<double>(labels.size());
  return out;
}

GroupMetrics group_metrics(const Classifier& model, const LabeledDataset& data) {
  return group_metrics(predict_labels(model, data.features), data.labels, data.env_ids);
}

double accuracy(const IntVector& predictions, const IntVector& labels) {
  if (predictions.size() != labels.size()) throw DimensionError("predictions and labels differ in length");
  if (labels.size() == 0) throw ConfigError("accuracy of an empty set");
  return static_cast<double>((predictions.array() == labels.array()).count()) / static_cast<double>(labels.size());
}

double cramers_v(const IntVector& a, const IntVector& b) {
  if (a.size() != b.size()) throw DimensionError("cramers_v: vectors differ in length");
  std::map<int, Index> ra, cb;
  for (Index i = 0; i < a.size(); ++i) {
    ra.emplace(a(i), static_cast<Index>(ra.size()));
    cb.emplace(b(i), static_cast<Index>(cb.size()));
  }
  if (ra.size() < 2 || cb.size() < 2) throw ConfigError("cramers_v: each variable needs at least two observed values");
  Matrix table = Matrix::Zero(static_cast<Index>(ra.size()), static_cast<Index>(cb.size()));
  for (Index i = 0; i < a.size(); ++i) table(ra[a(i)], cb[b(i)]) += 1.0;
  const double n = static_cast<double>(a.size());
  const Vector rows = table.rowwise().sum();
  const RowVector cols = table.colwise().sum();
  const Matrix expected = rows * cols / n;
  const double chi2 = ((table - expected).array().square() / expected.array()).sum();
  const double dof = static_cast<double>(std::min(table.rows(), table.cols()) - 1);
  return std::min(1.0, std::sqrt(chi2 / (n * dof)));
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double theoretical_test_error(const Vector& mu_hat, const Vector& gamma_hat, const Vector& mu, const Matrix& sigma1,
                              bool strict_paper_form) {
  if (mu_hat.size() != mu.size() || sigma1.rows() != mu.size() || sigma1.cols() != mu.size()) {
    throw DimensionError("test error: mu_hat, mu and sigma1 disagree in dimension");
  }
  Eigen::LLT<Matrix> llt(sigma1);
  if (llt.info() != Eigen::Success || !sigma1.isApprox(sigma1.transpose())) {
    throw NumericalError("test error: sigma1 is not positive definite");
  }
  const double signal = mu_hat.dot(mu);
  const double inv_var = strict_paper_form ? mu_hat.squaredNorm() : mu_hat.dot(sigma1 * mu_hat);
  const double denom = std::sqrt(inv_var + gamma_hat.squaredNorm());
  if (denom == 0.0) return 1.0;
  return normal_cdf(-signal / denom);
}

LeastSquaresSolution closed_form_least_squares(const Matrix& x, const Vector& y, bool allow_ridge) {
  if (x.rows() != y.size()) throw DimensionError("least squares: X and y differ in rows");
  if (x.rows() == 0 || x.cols() == 0) throw ConfigError("least squares: empty design");
  const Matrix gram = x.transpose() * x;
  const Vector rhs = x.transpose() * y;
  Eigen::LLT<Matrix> llt(gram);
  if (llt.info() == Eigen::Success && llt.rcond() > 1e-12) return {llt.solve(rhs), false};
  if (!allow_ridge) throw NumericalError("least squares: Gram matrix is rank deficient");
  const Matrix ridged = gram + 1e-8 * Matrix::Identity(gram.rows(), gram.cols());
  Eigen::LDLT<Matrix> ldlt(ridged);
  return {ldlt.solve(rhs), true};
}

NormComparison norm_comparison(const Vector& theta_erm, const Vector& theta_disc, int p1) {
  if (theta_erm.size() != theta_disc.size()) throw DimensionError("norm comparison: parameter vectors differ in length");
  if (p1 < 0 || p1 > theta_erm.size()) throw DimensionError("norm comparison: p1 outside the parameter vector");
  const Index p2 = theta_erm.size() - p1;
  NormComparison out;
  out.gamma_norm_erm = theta_erm.tail(p2).norm();
  out.gamma_norm_disc = theta_disc.tail(p2).norm();
  out.ordered = out.gamma_norm_disc < out.gamma_norm_erm;
  out.ratio = out.gamma_norm_erm > 0.0 ? out.gamma_norm_disc / out.gamma_norm_erm
                                       : std::numeric_limits<double>::infinity();
  return out;
}

CumulativeSensitivity cumulative_sensitivity(const std::vector<Vector>& trajectory) {
  if (trajectory.empty()) throw ConfigError("cumulative sensitivity needs at least one epoch");
  CumulativeSensitivity out;
  out.totals = Vector::Zero(trajectory.front().size());
  for (const Vector& s : trajectory) {
    if (s.size() != out.totals.size()) throw DimensionError("trajectory epochs differ in concept count");
    out.totals += s;
  }
  out.ranking.resize(static_cast<std::size_t>(out.totals.size()));
  std::iota(out.ranking.begin(), out.ranking.end(), Index{0});
  std::stable_sort(out.ranking.begin(), out.ranking.end(),
                   [&](Index a, Index b) { return out.totals(a) > out.totals(b); });
  return out;
}

double adjusted_rand_index(const IntVector& a, const IntVector& b) {
  if (a.size() != b.size()) throw DimensionError("ari: labelings differ in length");
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> ca, cb;
  for (Index i = 0; i < a.size(); ++i) {
    joint[{a(i), b(i)}] += 1.0;
    ca[a(i)] += 1.0;
    cb[b(i)] += 1.0;
  }
  auto pairs = [](double n) { return n * (n - 1.0) / 2.0; };
  double index = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (const auto& [key, n] : joint) index += pairs(n);
  for (const auto& [key, n] : ca) sum_a += pairs(n);
  for (const auto& [key, n] : cb) sum_b += pairs(n);
  const double total = pairs(static_cast<double>(a.size()));
  if (total == 0.0) return 1.0;
  const double expected = sum_a * sum_b / total;
  const double maximum = 0.5 * (sum_a + sum_b);
  if (maximum == expected) return 1.0;
  return (index - expected) / (maximum - expected);
}

}  // namespace disc
