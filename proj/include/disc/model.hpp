#pragma once

#include "disc/rng.hpp"
#include "disc/types.hpp"

#include <optional>
#include <string>

namespace disc {

enum class LossKind { squared, cross_entropy };

std::string to_string(LossKind kind);
LossKind loss_kind_from_string(const std::string& name);

/// One hidden tanh layer: g(x) = tanh(W x + b).
struct MlpLayer {
  Matrix weights;  // hidden x input
  Vector bias;     // hidden
};

/// g: identity when `mlp` is empty, otherwise a one-hidden-layer tanh MLP.
struct Encoder {
  int input_dim = 0;
  std::optional<MlpLayer> mlp;

  static Encoder identity(int dim);
  static Encoder tanh_mlp(int input_dim, int hidden, Rng& rng);

  int output_dim() const { return mlp ? static_cast<int>(mlp->weights.rows()) : input_dim; }
  bool trainable() const { return mlp.has_value(); }
  Matrix encode(const Matrix& inputs) const;
};

/// f = h o g with a linear head h(z) = W z + b.
///
/// With one output, squared loss and the identity encoder this is exactly the
/// linear predictor theta^T x with +-1 targets; sign(f) is the classifier.
struct Classifier {
  Encoder encoder;
  Matrix head;  // outputs x d
  Vector bias;  // outputs; only trained when use_bias
  bool use_bias = false;
  LossKind loss = LossKind::squared;

  /// Identity encoder, single output, squared loss, zero weights, no bias.
  static Classifier theory(int input_dim);
  static Classifier with_encoder(Encoder encoder, int outputs, LossKind loss, bool use_bias, Rng& rng);

  int outputs() const { return static_cast<int>(head.rows()); }
  int hidden_dim() const { return static_cast<int>(head.cols()); }
  int input_dim() const { return encoder.input_dim; }
  bool theory_mode() const { return outputs() == 1 && !encoder.trainable(); }
  void check_consistent() const;
};

/// Gradient with the same layout as the classifier's parameters.
/// Encoder blocks stay empty for an identity encoder.
struct Gradient {
  Matrix head;
  Vector bias;
  Matrix encoder_weights;
  Vector encoder_bias;

  bool all_finite() const;
};

Matrix predict(const Classifier& model, const Matrix& inputs);

/// Mean per-instance loss; weighted variants normalize by the weight sum.
/// Squared loss is (y - f)^2 for one output and ||onehot(y) - f||^2 otherwise.
double batch_loss(const Classifier& model, const Matrix& inputs, const IntVector& labels,
                  const Vector* weights = nullptr);

/// d loss_i / d logits_i, one row per instance.
Matrix logit_derivatives(const Classifier& model, const Matrix& logits, const IntVector& labels);

/// Gradient of the mean batch loss with respect to the head weights only.
Matrix last_layer_gradient(const Classifier& model, const Matrix& inputs, const IntVector& labels);

/// Gradient of the (optionally weighted) mean batch loss w.r.t. every trainable parameter.
Gradient full_gradient(const Classifier& model, const Matrix& inputs, const IntVector& labels,
                       const Vector* weights = nullptr);

/// theta <- theta - lr * (grad + weight_decay * theta); decay skips biases.
/// Throws NumericalError on non-finite gradient entries.
Classifier sgd_step(const Classifier& model, const Gradient& gradient, double lr, double weight_decay);

/// Trainable parameters in a fixed order: head, bias (if used), encoder weights, encoder bias.
Vector flatten_parameters(const Classifier& model);
Classifier with_parameters(const Classifier& model, const Vector& flat);
Vector flatten_gradient(const Classifier& model, const Gradient& gradient);

/// Predicted labels: sign of the output for a single-output head (0 when the
/// output is exactly zero), argmax otherwise.
IntVector predict_labels(const Classifier& model, const Matrix& inputs);

}  // namespace disc
