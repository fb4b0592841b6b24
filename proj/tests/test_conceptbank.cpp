#include "disc/conceptbank.hpp"
#include "disc/error.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <optional>
#include <string>

using namespace disc;

namespace {

Vector unit(Index dim, Index j) {
  Vector e = Vector::Zero(dim);
  e(j) = 1.0;
  return e;
}

}  // namespace

TEST_CASE("noise-free concept images are basis vectors") {
  ConceptBank bank = ConceptBank::synthetic(3, 2);
  Rng rng(0);
  CHECK(synth_concept_image(bank, 3, rng) == unit(5, 3));
  CHECK(synth_concept_image(bank, 3, rng) == synth_concept_image(bank, 3, rng));
  CHECK_THROWS_AS(synth_concept_image(bank, 7, rng), ConfigError);
}

TEST_CASE("noisy concept images average to the basis vector") {
  ConceptBank bank = ConceptBank::synthetic(3, 2);
  bank.image_noise = 0.1;
  Rng rng(1);
  Vector sum = Vector::Zero(5);
  for (int i = 0; i < 10000; ++i) sum += synth_concept_image(bank, 3, rng);
  const Vector mean = sum / 10000.0;
  CHECK((mean - unit(5, 3)).cwiseAbs().maxCoeff() < 3.0 * 0.1 / 100.0);
}

TEST_CASE("bank defaults and validation") {
  const ConceptBank bank = ConceptBank::synthetic(50, 4);
  CHECK(bank.size() == 54);
  CHECK(bank.n_pos == 150);
  CHECK(bank.n_neg == 150);
  CHECK(bank.positions_in_category("spurious-candidate") == IndexSet{50, 51, 52, 53});
  CHECK_THROWS_AS(ConceptBank::synthetic(1, 0), ConfigError);
  const ConceptBank small = bank.restricted({2, 51, 7});
  CHECK(small.size() == 3);
  CHECK(small.concepts[0].id == 2);
  CHECK(small.concepts[2].id == 51);
  CHECK_THROWS_AS(bank.restricted({1}), ConfigError);  // a single concept has no negatives
  CHECK_THROWS_AS(bank.restricted({1, 999}), ConfigError);
}

TEST_CASE("axis-aligned separable concept") {
  Rng rng(2);
  Matrix pos(20, 3), neg(20, 3);
  for (Index i = 0; i < 20; ++i) {
    pos.row(i) = RowVector{{1.0 + 0.05 * rng.normal(), 0.05 * rng.normal(), 0.05 * rng.normal()}};
    neg.row(i) = RowVector{{-1.0 + 0.05 * rng.normal(), 0.05 * rng.normal(), 0.05 * rng.normal()}};
  }
  const Vector v = learn_cav(Encoder::identity(3), pos, neg, {}, rng);
  CHECK(v.dot(unit(3, 0)) > 0.99);
  CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pegasos agrees with a brute-force hard-margin oracle in 2-D") {
  Rng rng(3);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const double angle = rng.uniform() * 6.283185307179586;
    const Vector dir{{std::cos(angle), std::sin(angle)}};
    Matrix pos(15, 2), neg(15, 2);
    for (Index i = 0; i < 15; ++i) {
      pos.row(i) = (1.5 * dir + Vector{{rng.normal(), rng.normal()}} * 0.6).transpose();
      neg.row(i) = (-1.5 * dir + Vector{{rng.normal(), rng.normal()}} * 0.6).transpose();
    }
    const auto hard = oracle::brute_force_hard_margin(pos, neg);
    if (!hard) continue;  // keep only linearly separable draws
    // With lambda = 1e-2 on unit-RMS points the soft-margin optimum trades a
    // narrow gap for a shorter normal, so only clearly separated draws are compared.
    const double gap = (pos * *hard).minCoeff() - (neg * *hard).maxCoeff();
    if (gap < 0.8) continue;
    const CavFit fit = fit_linear_svm(pos, neg, {}, rng);
    CHECK(fit.direction.dot(*hard) > 0.95);
    ++checked;
  }
  CHECK(checked >= 10);
}

TEST_CASE("cav orientation, averaged objective and scale invariance") {
  Rng data(4);
  Matrix pos(40, 4), neg(40, 4);
  for (Index i = 0; i < 40; ++i) {
    for (Index j = 0; j < 4; ++j) {
      pos(i, j) = data.normal() + (j == 1 ? 1.0 : 0.0);
      neg(i, j) = data.normal() - (j == 1 ? 1.0 : 0.0);
    }
  }
  Rng a(5), b(5);
  const CavFit fit = fit_linear_svm(pos, neg, {}, a);
  CHECK((pos * fit.direction).mean() > (neg * fit.direction).mean());
  for (std::size_t e = 1; e < fit.objective_trace.size(); ++e) {
    CHECK(fit.objective_trace[e] <= fit.objective_trace[e - 1] + 1e-12);
  }
  const double c = 7.3;
  const CavFit scaled = fit_linear_svm(c * pos, c * neg, {}, b);
  CHECK(1.0 - scaled.direction.dot(fit.direction) < 1e-3);
  CHECK(scaled.margin == doctest::Approx(c * fit.margin).epsilon(1e-6));
}

TEST_CASE("identical point sets are inseparable") {
  Rng rng(6);
  Matrix pts(5, 2);
  pts << 1, 2, 3, 4, 5, 6, 7, 8, 9, 10;
  Matrix shuffled = pts.colwise().reverse();
  CHECK_THROWS_WITH_AS(fit_linear_svm(pts, shuffled, {}, rng), "inseparable concept", NumericalError);
}

TEST_CASE("two orthogonal concepts give antiparallel CAVs") {
  // with two concepts each one's negatives are exactly the other's images,
  // so the max-margin normal is (e_a - e_b) / sqrt 2 for a and its negation for b
  ConceptBank bank = ConceptBank::synthetic(1, 1);
  const CavSet set = query_cavs(bank, Encoder::identity(2), Rng(7));
  const Vector expected = Vector{{1.0, -1.0}} / std::sqrt(2.0);
  CHECK(set.vectors.row(0).dot(expected) > 0.999);
  CHECK(set.vectors.row(1).dot(-expected) > 0.999);
  set.check_unit_rows();
}

TEST_CASE("many orthogonal concepts give nearly orthogonal CAVs") {
  ConceptBank bank = ConceptBank::synthetic(16, 4);
  const CavSet set = query_cavs(bank, Encoder::identity(20), Rng(8));
  set.check_unit_rows();
  for (Index i = 0; i < set.size(); ++i) {
    CHECK(set.vectors(i, i) > 0.95);
    for (Index j = i + 1; j < set.size(); ++j) CHECK(std::abs(set.vectors.row(i).dot(set.vectors.row(j))) < 0.1);
  }
  CHECK((set.fit_margins.array() > 0.0).all());
  const CavSet again = query_cavs(bank, Encoder::identity(20), Rng(8));
  CHECK(again.vectors == set.vectors);
  CHECK(again.concept_ids == set.concept_ids);
}

TEST_CASE("cavs through an mlp encoder are unit and oriented") {
  Rng rng(9);
  const Encoder enc = Encoder::tanh_mlp(6, 4, rng);
  ConceptBank bank = ConceptBank::synthetic(4, 2);
  bank.image_noise = 0.05;
  bank.n_pos = bank.n_neg = 60;
  const CavSet set = query_cavs(bank, enc, Rng(10));
  set.check_unit_rows();
  CHECK(set.vectors.cols() == 4);
}

TEST_CASE("coinciding concepts fail with the concept id") {
  ConceptBank bank = ConceptBank::synthetic(2, 0);
  bank.concepts[1].coordinate = 0;
  CHECK_THROWS_WITH_AS(query_cavs(bank, Encoder::identity(2), Rng(11)), doctest::Contains("concept 0"), NumericalError);
}
