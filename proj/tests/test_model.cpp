#include "disc/error.hpp"
#include "disc/io.hpp"
#include "disc/model.hpp"

#include <doctest.h>

#include <cmath>

using namespace disc;

namespace {

Matrix random_matrix(Index rows, Index cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

IntVector random_labels(Index n, Rng& rng) {
  IntVector y(n);
  for (Index i = 0; i < n; ++i) y(i) = rng.bernoulli(0.5) ? 1 : -1;
  return y;
}

Classifier random_classifier(int kind, int input_dim, Rng& rng) {
  // 0: theory, 1: identity squared two outputs, 2: identity cross-entropy, 3: mlp squared one output, 4: mlp cross-entropy
  switch (kind) {
    case 0: {
      Classifier c = Classifier::theory(input_dim);
      c.head = random_matrix(1, input_dim, rng);
      return c;
    }
    case 1: {
      Classifier c = Classifier::with_encoder(Encoder::identity(input_dim), 2, LossKind::squared, true, rng);
      c.head = random_matrix(2, input_dim, rng);
      c.bias = random_matrix(2, 1, rng).col(0);
      return c;
    }
    case 2: {
      Classifier c = Classifier::with_encoder(Encoder::identity(input_dim), 2, LossKind::cross_entropy, true, rng);
      c.head = random_matrix(2, input_dim, rng);
      return c;
    }
    case 3:
      return Classifier::with_encoder(Encoder::tanh_mlp(input_dim, 6, rng), 1, LossKind::squared, true, rng);
    default:
      return Classifier::with_encoder(Encoder::tanh_mlp(input_dim, 5, rng), 2, LossKind::cross_entropy, false, rng);
  }
}

double fd_max_deviation(const Classifier& model, const Matrix& x, const IntVector& y, bool head_only) {
  const double h = 1e-6;
  const Vector params = flatten_parameters(model);
  const Vector analytic = head_only ? Vector(last_layer_gradient(model, x, y).reshaped())
                                    : flatten_gradient(model, full_gradient(model, x, y));
  const Index count = head_only ? model.head.size() : params.size();
  double worst = 0.0;
  for (Index i = 0; i < count; ++i) {
    Vector plus = params, minus = params;
    plus(i) += h;
    minus(i) -= h;
    const double fd = (batch_loss(with_parameters(model, plus), x, y) - batch_loss(with_parameters(model, minus), x, y)) / (2 * h);
    worst = std::max(worst, std::abs(fd - analytic(i)));
  }
  return worst;
}

}  // namespace

TEST_CASE("identity encoder with a row selector reproduces inputs") {
  Rng rng(0);
  Classifier c = Classifier::with_encoder(Encoder::identity(3), 3, LossKind::squared, false, rng);
  c.head = Matrix::Identity(3, 3);
  const Matrix x = random_matrix(4, 3, rng);
  CHECK(predict(c, x) == x);
}

TEST_CASE("zero weights give zero logits") {
  Rng rng(1);
  const Classifier c = Classifier::theory(5);
  CHECK(predict(c, random_matrix(7, 5, rng)).isZero(0.0));
}

TEST_CASE("theory mode logit is mu^T x_inv + gamma^T x_spu") {
  Classifier c = Classifier::theory(3);
  c.head << 0.5, -1.0, 2.0;  // mu = (0.5, -1), gamma = (2)
  Matrix x(1, 3);
  x << 1.0, 2.0, 3.0;
  CHECK(predict(c, x)(0, 0) == doctest::Approx(4.5).epsilon(1e-15));
  CHECK(c.theory_mode());
}

TEST_CASE("predict rejects a wrong input width") {
  const Classifier c = Classifier::theory(3);
  CHECK_THROWS_AS(predict(c, Matrix::Zero(2, 4)), DimensionError);
}

TEST_CASE("squared batch loss") {
  Classifier c = Classifier::theory(1);
  c.head(0, 0) = 1.0;
  Matrix x(2, 1);
  x << 0.5, -0.2;
  IntVector y(2);
  y << 1, -1;
  CHECK(batch_loss(c, x, y) == doctest::Approx(0.445).epsilon(1e-14));

  const Vector uniform = Vector::Constant(2, 3.0);
  CHECK(batch_loss(c, x, y, &uniform) == doctest::Approx(batch_loss(c, x, y)).epsilon(1e-15));

  Matrix exact(2, 1);
  exact << 1.0, -1.0;
  CHECK(batch_loss(c, exact, y) == 0.0);

  CHECK_THROWS_AS(batch_loss(c, Matrix(0, 1), IntVector(0)), ConfigError);
  const Vector negative = Vector::Constant(2, -1.0);
  CHECK_THROWS_AS(batch_loss(c, x, y, &negative), ConfigError);
}

TEST_CASE("cross-entropy loss of equal logits is log 2") {
  Rng rng(0);
  Classifier c = Classifier::with_encoder(Encoder::identity(2), 2, LossKind::cross_entropy, false, rng);
  IntVector y(3);
  y << 1, -1, 1;
  CHECK(batch_loss(c, random_matrix(3, 2, rng), y) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("gradient vanishes at a residual-free fit") {
  Classifier c = Classifier::theory(2);
  c.head << 1.0, 0.0;
  Matrix x(3, 2);
  x << 1, 5, -1, 2, 1, -3;
  IntVector y(3);
  y << 1, -1, 1;
  CHECK(last_layer_gradient(c, x, y).isZero(0.0));
}

TEST_CASE("theory-mode gradient closed form") {
  Rng rng(4);
  Classifier c = Classifier::theory(6);
  c.head = random_matrix(1, 6, rng);
  const Matrix x = random_matrix(9, 6, rng);
  const IntVector y = random_labels(9, rng);
  const Vector theta = c.head.row(0).transpose();
  // the loss is (y - f)^2, so the negative gradient is twice X^T (y - X theta) / B
  const Vector expected = 2.0 * x.transpose() * (y.cast<double>() - x * theta) / 9.0;
  CHECK((-last_layer_gradient(c, x, y).row(0).transpose() - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("analytic gradients match central finite differences") {
  Rng rng(2024);
  double worst_squared = 0.0, worst_ce = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int kind = trial % 5;
    const int dim = 2 + static_cast<int>(rng.index(5));
    const Classifier c = random_classifier(kind, dim, rng);
    const Index b = 1 + static_cast<Index>(rng.index(12));
    const Matrix x = random_matrix(b, dim, rng);
    const IntVector y = random_labels(b, rng);
    const double dev = std::max(fd_max_deviation(c, x, y, true), fd_max_deviation(c, x, y, false));
    if (c.loss == LossKind::squared) {
      worst_squared = std::max(worst_squared, dev);
    } else {
      worst_ce = std::max(worst_ce, dev);
    }
  }
  CHECK(worst_squared < 1e-6);
  CHECK(worst_ce < 1e-5);
}

TEST_CASE("weighted full gradient matches finite differences of the weighted loss") {
  Rng rng(5);
  const Classifier c = random_classifier(3, 4, rng);
  const Matrix x = random_matrix(6, 4, rng);
  const IntVector y = random_labels(6, rng);
  Vector w(6);
  w << 1, 2, 0.5, 3, 0, 1;
  const Vector analytic = flatten_gradient(c, full_gradient(c, x, y, &w));
  const Vector params = flatten_parameters(c);
  for (Index i = 0; i < params.size(); ++i) {
    Vector p = params, m = params;
    p(i) += 1e-6;
    m(i) -= 1e-6;
    const double fd = (batch_loss(with_parameters(c, p), x, y, &w) - batch_loss(with_parameters(c, m), x, y, &w)) / 2e-6;
    CHECK(std::abs(fd - analytic(i)) < 1e-6);
  }
}

TEST_CASE("sgd step arithmetic") {
  Rng rng(6);
  Classifier c = Classifier::theory(3);
  c.head << 1.0, -2.0, 0.5;
  Gradient zero{Matrix::Zero(1, 3), Vector::Zero(1), Matrix(), Vector()};
  CHECK(sgd_step(c, zero, 0.1, 0.0).head == c.head);

  Classifier origin = Classifier::theory(3);
  Gradient g{Matrix(1, 3), Vector::Zero(1), Matrix(), Vector()};
  g.head << 0.3, -0.7, 2.0;
  CHECK(sgd_step(origin, g, 1.0, 0.0).head == -g.head);

  const Classifier decayed = sgd_step(c, zero, 0.1, 0.5);
  CHECK((decayed.head - c.head * (1.0 - 0.1 * 0.5)).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(c.head(0, 0) == 1.0);  // input untouched

  g.head(0, 1) = std::nan("");
  CHECK_THROWS_AS(sgd_step(c, g, 0.1, 0.0), NumericalError);
  g.head(0, 1) = 1.0;
  CHECK_THROWS_AS(sgd_step(c, g, 0.0, 0.0), ConfigError);
  CHECK_THROWS_AS(sgd_step(c, g, 0.1, -1.0), ConfigError);
}

TEST_CASE("full-batch gradient descent decreases the squared loss below the stability threshold") {
  Rng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix x = random_matrix(40, 5, rng);
    const IntVector y = random_labels(40, rng);
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(x.transpose() * x / 40.0);
    const double lr = 0.9 / eig.eigenvalues().maxCoeff();
    Classifier c = Classifier::theory(5);
    double previous = batch_loss(c, x, y);
    for (int step = 0; step < 200; ++step) {
      c = sgd_step(c, full_gradient(c, x, y), lr, 0.0);
      const double loss = batch_loss(c, x, y);
      REQUIRE(loss <= previous + 1e-15);
      previous = loss;
    }
  }
}

TEST_CASE("predicted labels") {
  Classifier c = Classifier::theory(1);
  c.head(0, 0) = 1.0;
  Matrix x(3, 1);
  x << 2.0, -1.0, 0.0;
  const IntVector p = predict_labels(c, x);
  CHECK(p(0) == 1);
  CHECK(p(1) == -1);
  CHECK(p(2) == 0);
}

TEST_CASE("checkpoint json round trip") {
  Rng rng(9);
  for (int kind = 0; kind < 5; ++kind) {
    const Classifier c = random_classifier(kind, 4, rng);
    const Classifier back = model_from_json(Json::parse(model_to_json(c).dump()));
    CHECK(flatten_parameters(back) == flatten_parameters(c));
    CHECK(back.loss == c.loss);
    CHECK(back.use_bias == c.use_bias);
    CHECK(back.encoder.trainable() == c.encoder.trainable());
  }
}
