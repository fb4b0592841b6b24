#include "disc/error.hpp"
#include "disc/metrics.hpp"

#include <doctest.h>

#include <cmath>

using namespace disc;

TEST_CASE("group metrics on a hand-built toy") {
  // groups (label, env): (1,1) 4 rows acc 1; (-1,1) 2 rows acc .5; (1,2) 4 rows acc .75; (-1,2) 4 rows acc .25
  IntVector labels(14), envs(14), pred(14);
  labels << 1, 1, 1, 1, -1, -1, 1, 1, 1, 1, -1, -1, -1, -1;
  envs << 1, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 2, 2, 2;
  pred << 1, 1, 1, 1, -1, 1, 1, 1, 1, -1, -1, 1, 1, 1;
  const GroupMetrics g = group_metrics(pred, labels, envs);
  CHECK(g.per_group_acc.at({1, 1}) == 1.0);
  CHECK(g.per_group_acc.at({-1, 1}) == 0.5);
  CHECK(g.per_group_acc.at({1, 2}) == 0.75);
  CHECK(g.per_group_acc.at({-1, 2}) == 0.25);
  CHECK(g.n_per_group.at({-1, 1}) == 2);
  CHECK(g.avg_acc == doctest::Approx(9.0 / 14.0));
  CHECK(g.worst_acc == 0.25);
  CHECK(g.worst_acc <= g.avg_acc);

  const GroupMetrics perfect = group_metrics(labels, labels, envs);
  CHECK(perfect.avg_acc == 1.0);
  CHECK(perfect.worst_acc == 1.0);

  IntVector wrong_group = labels;
  for (Index i = 10; i < 14; ++i) wrong_group(i) = 1;
  CHECK(group_metrics(wrong_group, labels, envs).worst_acc == 0.0);

  CHECK(accuracy(IntVector::Zero(3), IntVector::Ones(3)) == 0.0);
  CHECK_THROWS(group_metrics(IntVector(), IntVector(), IntVector()));
}

TEST_CASE("cramers v") {
  IntVector a(80), b(80);
  for (Index i = 0; i < 80; ++i) {
    const bool top = i < 40;
    a(i) = top ? 0 : 1;
    b(i) = top ? (i < 30 ? 0 : 1) : (i < 50 ? 0 : 1);
  }
  CHECK(cramers_v(a, b) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(cramers_v(b, a) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(cramers_v(a, a) == doctest::Approx(1.0));

  IntVector x(4), y(4);
  x << 0, 0, 1, 1;
  y << 0, 1, 0, 1;
  CHECK(cramers_v(x, y) == doctest::Approx(0.0));

  IntVector relabeled = b.unaryExpr([](int v) { return v == 0 ? 7 : -3; });
  CHECK(cramers_v(a, relabeled) == doctest::Approx(cramers_v(a, b)));
  CHECK_THROWS_AS(cramers_v(IntVector::Zero(4), y), ConfigError);

  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    IntVector u(30), w(30);
    for (Index i = 0; i < 30; ++i) {
      u(i) = static_cast<int>(rng.index(3));
      w(i) = static_cast<int>(rng.index(2));
    }
    u(0) = 0;
    u(1) = 1;
    w(0) = 0;
    w(1) = 1;
    const double v = cramers_v(u, w);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("theoretical test error examples") {
  Vector mu = Vector::Constant(4, 0.5);
  const Matrix eye = Matrix::Identity(4, 4);
  CHECK(theoretical_test_error(mu, Vector::Zero(2), mu, eye) == doctest::Approx(normal_cdf(-1.0)).epsilon(1e-12));
  Vector perp(4);
  perp << 1, -1, 0, 0;
  CHECK(theoretical_test_error(perp, Vector::Ones(2), mu, eye) == doctest::Approx(0.5));
  CHECK(theoretical_test_error(Vector::Zero(4), Vector::Zero(2), mu, eye) == 1.0);
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK(std::abs(normal_cdf(-1.0) - 0.15865525393145705) < 1e-12);
  CHECK_THROWS_AS(theoretical_test_error(mu, Vector::Zero(2), mu, -eye), NumericalError);

  Matrix sigma = 2.0 * eye;
  const double general = theoretical_test_error(mu, Vector::Zero(2), mu, sigma);
  const double strict = theoretical_test_error(mu, Vector::Zero(2), mu, sigma, true);
  CHECK(general == doctest::Approx(normal_cdf(-1.0 / std::sqrt(2.0))));
  CHECK(strict == doctest::Approx(normal_cdf(-1.0)));
}

TEST_CASE("theoretical test error agrees with monte carlo") {
  Rng rng(2);
  Vector mu(3);
  mu << 0.6, -0.2, 0.3;
  Matrix sigma(3, 3);
  sigma << 1.0, 0.3, 0.0, 0.3, 1.5, 0.2, 0.0, 0.2, 0.8;
  Vector mu_hat(3);
  mu_hat << 0.9, -0.1, 0.4;
  Vector gamma_hat(2);
  gamma_hat << 0.5, -0.3;
  const Matrix chol = Eigen::LLT<Matrix>(sigma).matrixL();
  const int draws = 1000000;
  int errors = 0;
  Vector z(3);
  for (int t = 0; t < draws; ++t) {
    const int y = rng.bernoulli(0.5) ? 1 : -1;
    for (Index j = 0; j < 3; ++j) z(j) = rng.normal();
    const Vector x = y * mu + chol * z;
    const double f = mu_hat.dot(x) + gamma_hat(0) * rng.normal() + gamma_hat(1) * rng.normal();
    const int pred = f > 0 ? 1 : (f < 0 ? -1 : 0);
    errors += pred != y ? 1 : 0;
  }
  const double mc = static_cast<double>(errors) / draws;
  CHECK(std::abs(theoretical_test_error(mu_hat, gamma_hat, mu, sigma) - mc) < 0.002);
}

TEST_CASE("theoretical test error is monotone") {
  Vector mu = Vector::Constant(3, 0.5);
  const Matrix eye = Matrix::Identity(3, 3);
  Vector mu_hat(3);
  mu_hat << 0.4, 0.5, 0.6;
  Vector gamma_hat(2);
  gamma_hat << 0.3, 0.1;
  const double base = theoretical_test_error(mu_hat, gamma_hat, mu, eye);
  CHECK(theoretical_test_error(mu_hat, 1.1 * gamma_hat, mu, eye) > base);
  Vector along = mu_hat;
  along(0) += 0.05;  // raises mu_hat . mu while the denominator grows more slowly
  const double num_before = mu_hat.dot(mu) / std::sqrt(mu_hat.squaredNorm() + gamma_hat.squaredNorm());
  const double num_after = along.dot(mu) / std::sqrt(along.squaredNorm() + gamma_hat.squaredNorm());
  CHECK(num_after > num_before);
  CHECK(theoretical_test_error(along, gamma_hat, mu, eye) < base);
}

TEST_CASE("closed-form least squares") {
  Matrix q = Matrix::Identity(4, 2) * 2.0;  // orthogonal columns of norm 2
  Vector y(4);
  y << 1, -1, 3, 5;
  const LeastSquaresSolution s = closed_form_least_squares(q, y);
  CHECK(s.theta(0) == doctest::Approx(0.5));
  CHECK(s.theta(1) == doctest::Approx(-0.5));
  CHECK_FALSE(s.ridge_used);

  Rng rng(3);
  const Matrix x = Matrix::NullaryExpr(200, 6, [&] { return rng.normal(); });
  const Vector t = Vector::NullaryExpr(200, [&] { return rng.normal(); });
  const Vector theta = closed_form_least_squares(x, t).theta;
  CHECK((x.transpose() * (t - x * theta)).cwiseAbs().maxCoeff() < 1e-8);

  Matrix rank_deficient(5, 2);
  rank_deficient.col(0).setOnes();
  rank_deficient.col(1).setOnes();
  const LeastSquaresSolution r = closed_form_least_squares(rank_deficient, Vector::Ones(5));
  CHECK(r.ridge_used);
  CHECK(r.theta.allFinite());
  CHECK_THROWS_AS(closed_form_least_squares(rank_deficient, Vector::Ones(5), false), NumericalError);
}

TEST_CASE("norm comparison") {
  Vector erm(4), disc(4);
  erm << 1, 1, 0.6, 0.8;
  disc = erm;
  NormComparison c = norm_comparison(erm, disc, 2);
  CHECK(c.gamma_norm_erm == doctest::Approx(1.0));
  CHECK_FALSE(c.ordered);
  disc.tail(2) *= 0.5;
  c = norm_comparison(erm, disc, 2);
  CHECK(c.ordered);
  CHECK(c.ratio == doctest::Approx(0.5));
}

TEST_CASE("cumulative sensitivity") {
  Vector e0(2), e1(2);
  e0 << 1, 0;
  e1 << 2, 5;
  const CumulativeSensitivity c = cumulative_sensitivity({e0, e1});
  CHECK(c.totals(0) == 3.0);
  CHECK(c.totals(1) == 5.0);
  CHECK(c.ranking == std::vector<Index>{1, 0});
  CHECK(cumulative_sensitivity({e0}).totals == e0);
  CHECK(cumulative_sensitivity({Vector::Zero(3), Vector::Zero(3)}).totals.isZero(0.0));
  CHECK(cumulative_sensitivity({Vector::Zero(3)}).ranking == std::vector<Index>{0, 1, 2});
}

TEST_CASE("adjusted rand index") {
  IntVector a(6), b(6);
  a << 0, 0, 1, 1, 2, 2;
  b << 5, 5, 3, 3, 9, 9;
  CHECK(adjusted_rand_index(a, b) == doctest::Approx(1.0));
  IntVector c(6);
  c << 0, 1, 0, 1, 0, 1;
  CHECK(adjusted_rand_index(a, c) < 0.1);
}
