#include "disc/model.hpp"

#include "disc/error.hpp"

#include <cmath>

namespace disc {

namespace {

void check_batch(const Classifier& model, const Matrix& inputs, const IntVector& labels) {
  if (inputs.cols() != model.input_dim()) {
    throw DimensionError("input has " + std::to_string(inputs.cols()) + " columns, model expects " +
                         std::to_string(model.input_dim()));
  }
  if (labels.size() != inputs.rows()) throw DimensionError("labels and inputs differ in length");
  if (inputs.rows() == 0) throw ConfigError("empty batch");
}

Matrix row_softmax(const Matrix& logits) {
  Matrix probs(logits.rows(), logits.cols());
  for (Index r = 0; r < logits.rows(); ++r) {
    const double top = logits.row(r).maxCoeff();
    const RowVector e = (logits.row(r).array() - top).exp().matrix();
    probs.row(r) = e / e.sum();
  }
  return probs;
}

int target_index(const Classifier& model, int label) {
  const int idx = class_index(label);
  if (idx >= model.outputs()) throw DimensionError("label outside the head's output range");
  return idx;
}

Vector per_instance_loss(const Classifier& model, const Matrix& logits, const IntVector& labels) {
  Vector loss(logits.rows());
  if (model.outputs() == 1) {
    if (model.loss != LossKind::squared) throw ConfigError("cross-entropy needs at least two outputs");
    for (Index r = 0; r < logits.rows(); ++r) {
      const double residual = labels(r) - logits(r, 0);
      loss(r) = residual * residual;
    }
    return loss;
  }
  if (model.loss == LossKind::squared) {
    for (Index r = 0; r < logits.rows(); ++r) {
      RowVector target = RowVector::Zero(logits.cols());
      target(target_index(model, labels(r))) = 1.0;
      loss(r) = (target - logits.row(r)).squaredNorm();
    }
    return loss;
  }
  for (Index r = 0; r < logits.rows(); ++r) {
    const double top = logits.row(r).maxCoeff();
    const double lse = top + std::log((logits.row(r).array() - top).exp().sum());
    loss(r) = lse - logits(r, target_index(model, labels(r)));
  }
  return loss;
}

Vector normalized_weights(const Vector* weights, Index rows) {
  if (weights == nullptr) return Vector::Constant(rows, 1.0 / static_cast<double>(rows));
  if (weights->size() != rows) throw DimensionError("weights and batch differ in length");
  if ((weights->array() < 0.0).any()) throw ConfigError("instance weights must be nonnegative");
  const double total = weights->sum();
  if (!(total > 0.0)) throw ConfigError("instance weights sum to zero");
  return *weights / total;
}

}  // namespace

std::string to_string(LossKind kind) { return kind == LossKind::squared ? "squared" : "cross_entropy"; }

LossKind loss_kind_from_string(const std::string& name) {
  if (name == "squared") return LossKind::squared;
  if (name == "cross_entropy") return LossKind::cross_entropy;
  throw ConfigError("unknown loss '" + name + "'");
}

Encoder Encoder::identity(int dim) { return Encoder{dim, std::nullopt}; }

Encoder Encoder::tanh_mlp(int input_dim, int hidden, Rng& rng) {
  if (input_dim < 1 || hidden < 1) throw ConfigError("mlp dimensions must be positive");
  MlpLayer layer{Matrix(hidden, input_dim), Vector::Zero(hidden)};
  const double scale = 1.0 / std::sqrt(static_cast<double>(input_dim));
  for (Index i = 0; i < layer.weights.size(); ++i) layer.weights.data()[i] = scale * rng.normal();
  return Encoder{input_dim, std::move(layer)};
}

Matrix Encoder::encode(const Matrix& inputs) const {
  if (inputs.cols() != input_dim) throw DimensionError("encoder input dimension mismatch");
  if (!mlp) return inputs;
  Matrix pre = inputs * mlp->weights.transpose();
  pre.rowwise() += mlp->bias.transpose();
  return pre.array().tanh().matrix();
}

Classifier Classifier::theory(int input_dim) {
  Classifier model;
  model.encoder = Encoder::identity(input_dim);
  model.head = Matrix::Zero(1, input_dim);
  model.bias = Vector::Zero(1);
  return model;
}

Classifier Classifier::with_encoder(Encoder encoder, int outputs, LossKind loss, bool use_bias, Rng& rng) {
  if (outputs < 1) throw ConfigError("classifier needs at least one output");
  if (loss == LossKind::cross_entropy && outputs < 2) throw ConfigError("cross-entropy needs at least two outputs");
  Classifier model;
  const int d = encoder.output_dim();
  model.encoder = std::move(encoder);
  model.head = Matrix::Zero(outputs, d);
  if (model.encoder.trainable()) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (Index i = 0; i < model.head.size(); ++i) model.head.data()[i] = scale * rng.normal();
  }
  model.bias = Vector::Zero(outputs);
  model.use_bias = use_bias;
  model.loss = loss;
  return model;
}

void Classifier::check_consistent() const {
  if (head.cols() != encoder.output_dim()) throw DimensionError("head width differs from encoder output");
  if (bias.size() != head.rows()) throw DimensionError("bias length differs from head outputs");
}

bool Gradient::all_finite() const {
  return head.allFinite() && bias.allFinite() && encoder_weights.allFinite() && encoder_bias.allFinite();
}

Matrix predict(const Classifier& model, const Matrix& inputs) {
  if (inputs.cols() != model.input_dim()) throw DimensionError("input dimension mismatch in predict");
  Matrix logits = model.encoder.encode(inputs) * model.head.transpose();
  if (model.use_bias) logits.rowwise() += model.bias.transpose();
  return logits;
}

double batch_loss(const Classifier& model, const Matrix& inputs, const IntVector& labels, const Vector* weights) {
  check_batch(model, inputs, labels);
  const Vector loss = per_instance_loss(model, predict(model, inputs), labels);
  return normalized_weights(weights, inputs.rows()).dot(loss);
}

Matrix logit_derivatives(const Classifier& model, const Matrix& logits, const IntVector& labels) {
  Matrix d(logits.rows(), logits.cols());
  if (model.outputs() == 1) {
    for (Index r = 0; r < logits.rows(); ++r) d(r, 0) = -2.0 * (labels(r) - logits(r, 0));
    return d;
  }
  if (model.loss == LossKind::squared) {
    d = 2.0 * logits;
    for (Index r = 0; r < logits.rows(); ++r) d(r, target_index(model, labels(r))) -= 2.0;
    return d;
  }
  d = row_softmax(logits);
  for (Index r = 0; r < logits.rows(); ++r) d(r, target_index(model, labels(r))) -= 1.0;
  return d;
}

Matrix last_layer_gradient(const Classifier& model, const Matrix& inputs, const IntVector& labels) {
  check_batch(model, inputs, labels);
  const Matrix hidden = model.encoder.encode(inputs);
  Matrix logits = hidden * model.head.transpose();
  if (model.use_bias) logits.rowwise() += model.bias.transpose();
  return logit_derivatives(model, logits, labels).transpose() * hidden / static_cast<double>(inputs.rows());
}

Gradient full_gradient(const Classifier& model, const Matrix& inputs, const IntVector& labels, const Vector* weights) {
  check_batch(model, inputs, labels);
  const Vector w = normalized_weights(weights, inputs.rows());
  const Matrix hidden = model.encoder.encode(inputs);
  Matrix logits = hidden * model.head.transpose();
  if (model.use_bias) logits.rowwise() += model.bias.transpose();
  const Matrix d_logits = w.asDiagonal() * logit_derivatives(model, logits, labels);

  Gradient g;
  g.head = d_logits.transpose() * hidden;
  g.bias = model.use_bias ? Vector(d_logits.colwise().sum().transpose()) : Vector::Zero(model.outputs());
  if (model.encoder.mlp) {
    const Matrix d_hidden = d_logits * model.head;
    const Matrix d_pre = (d_hidden.array() * (1.0 - hidden.array().square())).matrix();
    g.encoder_weights = d_pre.transpose() * inputs;
    g.encoder_bias = d_pre.colwise().sum().transpose();
  }
  return g;
}

Classifier sgd_step(const Classifier& model, const Gradient& gradient, double lr, double weight_decay) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be nonnegative");
  if (!gradient.all_finite()) throw NumericalError("non-finite gradient (training diverged)");
  if (gradient.head.rows() != model.head.rows() || gradient.head.cols() != model.head.cols()) {
    throw DimensionError("gradient shape differs from head shape");
  }
  Classifier next = model;
  next.head = model.head - lr * (gradient.head + weight_decay * model.head);
  if (model.use_bias && gradient.bias.size() == model.bias.size()) next.bias = model.bias - lr * gradient.bias;
  if (model.encoder.mlp && gradient.encoder_weights.size() > 0) {
    MlpLayer& layer = *next.encoder.mlp;
    layer.weights = model.encoder.mlp->weights - lr * (gradient.encoder_weights + weight_decay * model.encoder.mlp->weights);
    layer.bias = model.encoder.mlp->bias - lr * gradient.encoder_bias;
  }
  return next;
}

Vector flatten_parameters(const Classifier& model) {
  std::vector<double> flat(model.head.data(), model.head.data() + model.head.size());
  if (model.use_bias) flat.insert(flat.end(), model.bias.data(), model.bias.data() + model.bias.size());
  if (model.encoder.mlp) {
    const MlpLayer& layer = *model.encoder.mlp;
    flat.insert(flat.end(), layer.weights.data(), layer.weights.data() + layer.weights.size());
    flat.insert(flat.end(), layer.bias.data(), layer.bias.data() + layer.bias.size());
  }
  return Eigen::Map<const Vector>(flat.data(), static_cast<Index>(flat.size()));
}

Classifier with_parameters(const Classifier& model, const Vector& flat) {
  Classifier out = model;
  Index offset = 0;
  auto take = [&](double* dst, Index count) {
    if (offset + count > flat.size()) throw DimensionError("parameter vector too short");
    std::copy(flat.data() + offset, flat.data() + offset + count, dst);
    offset += count;
  };
  take(out.head.data(), out.head.size());
  if (out.use_bias) take(out.bias.data(), out.bias.size());
  if (out.encoder.mlp) {
    take(out.encoder.mlp->weights.data(), out.encoder.mlp->weights.size());
    take(out.encoder.mlp->bias.data(), out.encoder.mlp->bias.size());
  }
  if (offset != flat.size()) throw DimensionError("parameter vector too long");
  return out;
}

Vector flatten_gradient(const Classifier& model, const Gradient& gradient) {
  Classifier shaped = model;
  shaped.head = gradient.head;
  if (model.use_bias) shaped.bias = gradient.bias;
  if (model.encoder.mlp) {
    shaped.encoder.mlp->weights = gradient.encoder_weights;
    shaped.encoder.mlp->bias = gradient.encoder_bias;
  }
  return flatten_parameters(shaped);
}

IntVector predict_labels(const Classifier& model, const Matrix& inputs) {
  const Matrix logits = predict(model, inputs);
  IntVector out(logits.rows());
  for (Index r = 0; r < logits.rows(); ++r) {
    if (model.outputs() == 1) {
      const double f = logits(r, 0);
      out(r) = f > 0.0 ? 1 : (f < 0.0 ? -1 : 0);
    } else {
      Index best = 0;
      logits.row(r).maxCoeff(&best);
      out(r) = class_label(static_cast<int>(best));
    }
  }
  return out;
}

}  // namespace disc
