#include "disc/conceptbank.hpp"

#include "disc/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace disc {

ConceptBank ConceptBank::synthetic(int p1, int p2) {
  if (p1 < 0 || p2 < 0 || p1 + p2 < 2) throw ConfigError("bank: synthetic bank needs at least two coordinates");
  ConceptBank bank;
  bank.input_dim = p1 + p2;
  for (int j = 0; j < p1 + p2; ++j) {
    const bool invariant = j < p1;
    bank.concepts.push_back({j, invariant ? "inv_" + std::to_string(j) : "spu_" + std::to_string(j - p1),
                             invariant ? "invariant-candidate" : "spurious-candidate", j});
  }
  return bank;
}

ConceptBank ConceptBank::restricted(const std::vector<int>& allowlist) const {
  const std::set<int> keep(allowlist.begin(), allowlist.end());
  for (int id : keep) position(id);
  ConceptBank out = *this;
  out.concepts.clear();
  for (const Concept& c : concepts) {
    if (keep.count(c.id)) out.concepts.push_back(c);
  }
  out.validate();
  return out;
}

Index ConceptBank::position(int concept_id) const {
  for (std::size_t i = 0; i < concepts.size(); ++i) {
    if (concepts[i].id == concept_id) return static_cast<Index>(i);
  }
  throw ConfigError("unknown concept id " + std::to_string(concept_id));
}

IndexSet ConceptBank::positions_in_category(const std::string& category) const {
  IndexSet out;
  for (std::size_t i = 0; i < concepts.size(); ++i) {
    if (concepts[i].category == category) out.push_back(static_cast<Index>(i));
  }
  return out;
}

void ConceptBank::validate() const {
  if (concepts.size() < 2) throw ConfigError("bank: at least two concepts are required");
  if (n_pos < 1 || n_neg < 1) throw ConfigError("bank: n_pos and n_neg must be positive");
  if (!(image_noise >= 0.0)) throw ConfigError("bank: image_noise must be nonnegative");
  std::set<int> ids;
  for (const Concept& c : concepts) {
    if (!ids.insert(c.id).second) throw ConfigError("bank: duplicate concept id " + std::to_string(c.id));
    if (c.coordinate < 0 || c.coordinate >= input_dim) {
      throw ConfigError("bank: concept " + std::to_string(c.id) + " maps outside the input");
    }
  }
}

Vector synth_concept_image(const ConceptBank& bank, int concept_id, Rng& rng) {
  const Concept& c = bank.concepts[static_cast<std::size_t>(bank.position(concept_id))];
  Vector image = Vector::Zero(bank.input_dim);
  image(c.coordinate) = 1.0;
  if (bank.image_noise > 0.0) {
    for (Index j = 0; j < image.size(); ++j) image(j) += bank.image_noise * rng.normal();
  }
  return image;
}

Matrix concept_images(const ConceptBank& bank, const IndexSet& positions, Rng& rng) {
  Matrix out(static_cast<Index>(positions.size()), bank.input_dim);
  for (std::size_t r = 0; r < positions.size(); ++r) {
    const auto& c = bank.concepts.at(static_cast<std::size_t>(positions[r]));
    out.row(static_cast<Index>(r)) = synth_concept_image(bank, c.id, rng).transpose();
  }
  return out;
}

namespace {

std::vector<std::vector<double>> sorted_unique_rows(const Matrix& points) {
  std::vector<std::vector<double>> rows;
  rows.reserve(static_cast<std::size_t>(points.rows()));
  for (Index r = 0; r < points.rows(); ++r) {
    const RowVector row = points.row(r);
    rows.emplace_back(row.data(), row.data() + row.size());
  }
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  return rows;
}

double hinge_objective(const Matrix& x, const Vector& y, const Vector& w, double lambda) {
  const Vector scores = x * w;
  double hinge = 0.0;
  for (Index i = 0; i < x.rows(); ++i) hinge += std::max(0.0, 1.0 - y(i) * scores(i));
  return 0.5 * lambda * w.squaredNorm() + hinge / static_cast<double>(x.rows());
}

}  // namespace

CavFit fit_linear_svm(const Matrix& positives, const Matrix& negatives, const SvmHyper& hyper, Rng& rng) {
  if (positives.rows() == 0 || negatives.rows() == 0) throw ConfigError("svm needs positive and negative points");
  if (positives.cols() != negatives.cols()) throw DimensionError("svm point sets differ in dimension");
  if (!(hyper.lambda > 0.0) || hyper.epochs < 1) throw ConfigError("svm: lambda and epochs must be positive");
  if (sorted_unique_rows(positives) == sorted_unique_rows(negatives)) throw NumericalError("inseparable concept");

  const Index d = positives.cols();
  const Index n = positives.rows() + negatives.rows();
  const RowVector centre = 0.5 * (positives.colwise().mean() + negatives.colwise().mean());

  // augmented design: centred points scaled to unit RMS norm, plus a constant 1 for the bias
  Matrix x(n, d + 1);
  x.topLeftCorner(positives.rows(), d) = positives.rowwise() - centre;
  x.bottomLeftCorner(negatives.rows(), d) = negatives.rowwise() - centre;
  const double rms = std::sqrt(x.leftCols(d).squaredNorm() / static_cast<double>(n));
  if (!(rms > 0.0) || !std::isfinite(rms)) throw NumericalError("inseparable concept");
  x.leftCols(d) /= rms;
  x.col(d).setOnes();
  Vector y(n);
  y.head(positives.rows()).setOnes();
  y.tail(negatives.rows()).setConstant(-1.0);

  const double radius = 1.0 / std::sqrt(hyper.lambda);
  Vector w = Vector::Zero(d + 1);
  Vector avg = Vector::Zero(d + 1);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  CavFit fit;
  fit.objective_trace.reserve(static_cast<std::size_t>(hyper.epochs));
  // The returned solution is the best averaged iterate seen at an epoch end, so
  // the recorded objective never increases.
  Vector best;
  double best_objective = std::numeric_limits<double>::infinity();
  long long t = 0;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng.engine());
    for (Index i : order) {
      ++t;
      const double eta = 1.0 / (hyper.lambda * static_cast<double>(t));
      const bool violated = y(i) * x.row(i).dot(w) < 1.0;
      w *= 1.0 - eta * hyper.lambda;
      if (violated) w += eta * y(i) * x.row(i).transpose();
      const double norm = w.norm();
      if (norm > radius) w *= radius / norm;
      avg += (w - avg) / static_cast<double>(t);
    }
    const Vector& current = hyper.averaging ? avg : w;
    const double objective = hinge_objective(x, y, current, hyper.lambda);
    if (objective < best_objective || best.size() == 0) {
      best_objective = objective;
      best = current;
    }
    fit.objective_trace.push_back(best_objective);
  }

  const Vector& solution = best;
  Vector direction = solution.head(d);
  const double norm = direction.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw NumericalError("inseparable concept");
  direction /= norm;
  double bias = solution(d) / norm;

  const Vector pos_scores = x.topLeftCorner(positives.rows(), d) * direction;
  const Vector neg_scores = x.bottomLeftCorner(negatives.rows(), d) * direction;
  if (pos_scores.mean() <= neg_scores.mean()) {
    direction = -direction;
    bias = -bias;
  }
  const Vector signed_dist = (x.leftCols(d) * direction).array() + bias;
  fit.margin = rms * (signed_dist.array() * y.array()).minCoeff();
  fit.direction = direction;
  fit.bias = rms * bias - centre.dot(direction);
  return fit;
}

Vector learn_cav(const Encoder& encoder, const Matrix& positives, const Matrix& negatives, const SvmHyper& hyper,
                 Rng& rng) {
  return fit_linear_svm(encoder.encode(positives), encoder.encode(negatives), hyper, rng).direction;
}

void CavSet::check_unit_rows(double tol) const {
  for (Index r = 0; r < vectors.rows(); ++r) {
    if (std::abs(vectors.row(r).norm() - 1.0) > tol) {
      throw NumericalError("CAV row " + std::to_string(r) + " is not unit norm");
    }
  }
}

CavSet query_cavs(const ConceptBank& bank, const Encoder& encoder, const Rng& rng, const SvmHyper& hyper) {
  bank.validate();
  if (encoder.input_dim != bank.input_dim) throw DimensionError("bank and encoder input dimensions differ");
  const Index m = bank.size();
  CavSet set;
  set.vectors.resize(m, encoder.output_dim());
  set.fit_margins.resize(m);
  for (Index i = 0; i < m; ++i) {
    const int id = bank.concepts[static_cast<std::size_t>(i)].id;
    Rng local = rng.split(static_cast<std::uint64_t>(id));
    const Matrix pos = concept_images(bank, IndexSet(static_cast<std::size_t>(bank.n_pos), i), local);
    IndexSet others(static_cast<std::size_t>(bank.n_neg));
    for (auto& o : others) {
      const Index pick = static_cast<Index>(local.index(static_cast<std::size_t>(m - 1)));
      o = pick < i ? pick : pick + 1;
    }
    const Matrix neg = concept_images(bank, others, local);
    try {
      const CavFit fit = fit_linear_svm(encoder.encode(pos), encoder.encode(neg), hyper, local);
      set.vectors.row(i) = fit.direction.transpose();
      set.fit_margins(i) = fit.margin;
    } catch (const NumericalError& e) {
      throw NumericalError("concept " + std::to_string(id) + ": " + e.what());
    }
    set.concept_ids.push_back(id);
  }
  return set;
}

}  // namespace disc
