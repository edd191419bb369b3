#include "asyco/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

namespace asyco::nn {

namespace {

struct ForwardCache {
  std::vector<Matrix> activations;  // activations[0] = input, last = logits
  std::vector<Matrix> pre;          // pre-activations of hidden layers
};

Matrix apply_activation(const Matrix& x, Activation act) {
  switch (act) {
    case Activation::ReLU:
      return x.cwiseMax(0.0);
    case Activation::Tanh:
      return x.array().tanh().matrix();
  }
  return x;
}

Matrix activation_derivative(const Matrix& pre, Activation act) {
  switch (act) {
    case Activation::ReLU:
      return (pre.array() > 0.0).cast<double>().matrix();
    case Activation::Tanh:
      return (1.0 - pre.array().tanh().square()).matrix();
  }
  return Matrix::Ones(pre.rows(), pre.cols());
}

void check_input(const MlpModel& model, const Matrix& batch) {
  if (static_cast<std::size_t>(batch.cols()) != model.input_dim()) {
    throw ShapeError("forward: batch has " + std::to_string(batch.cols()) +
                     " columns, model expects " + std::to_string(model.input_dim()));
  }
}

ForwardCache forward_cached(const MlpModel& model, const Matrix& batch) {
  check_input(model, batch);
  const auto& p = model.params();
  ForwardCache cache;
  cache.activations.reserve(model.num_layers() + 1);
  cache.activations.push_back(batch);
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    Matrix z = cache.activations.back() * p.weights[l];
    z.rowwise() += p.biases[l];
    if (l + 1 < model.num_layers()) {
      cache.activations.push_back(apply_activation(z, model.activation()));
      cache.pre.push_back(std::move(z));
    } else {
      cache.activations.push_back(std::move(z));
    }
  }
  return cache;
}

double log_sum_exp(const Eigen::Ref<const RowVector>& z) {
  const double m = z.maxCoeff();
  return m + std::log((z.array() - m).exp().sum());
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

void validate_targets(const Matrix& logits, const Matrix& targets, LossKind kind) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
    throw ShapeError("loss: targets are " + std::to_string(targets.rows()) + "x" +
                     std::to_string(targets.cols()) + ", logits are " +
                     std::to_string(logits.rows()) + "x" + std::to_string(logits.cols()));
  }
  for (Eigen::Index i = 0; i < targets.rows(); ++i) {
    const auto row = targets.row(i);
    if ((row.array() < 0.0).any() || (row.array() > 1.0).any()) {
      throw std::invalid_argument("loss: target entries must lie in [0,1]");
    }
    if (kind != LossKind::BinaryCrossEntropy && std::abs(row.sum() - 1.0) > 1e-9) {
      throw std::invalid_argument(to_string(kind) + " targets must be distributions (row " +
                                  std::to_string(i) + " sums to " + std::to_string(row.sum()) +
                                  ")");
    }
  }
}

// Per-sample loss and dL_i/dz_i for every row.
std::pair<Vector, Matrix> loss_rows(const Matrix& logits, const Matrix& targets, LossKind kind) {
  validate_targets(logits, targets, kind);
  const auto B = logits.rows();
  const auto C = logits.cols();
  Vector losses(B);
  Matrix dz(B, C);
  for (Eigen::Index i = 0; i < B; ++i) {
    const auto z = logits.row(i);
    const auto t = targets.row(i);
    switch (kind) {
      case LossKind::CrossEntropy: {
        const double lse = log_sum_exp(z);
        losses(i) = lse - t.dot(z);
        dz.row(i) = (z.array() - lse).exp().matrix() - t;
        break;
      }
      case LossKind::BinaryCrossEntropy: {
        double acc = 0.0;
        for (Eigen::Index c = 0; c < C; ++c) {
          acc += softplus(z(c)) - t(c) * z(c);
          dz(i, c) = (1.0 / (1.0 + std::exp(-z(c))) - t(c)) / static_cast<double>(C);
        }
        losses(i) = acc / static_cast<double>(C);
        break;
      }
      case LossKind::MeanSquaredError: {
        const RowVector p = (z.array() - log_sum_exp(z)).exp().matrix();
        const RowVector diff = p - t;
        losses(i) = diff.squaredNorm() / static_cast<double>(C);
        const RowVector g = 2.0 * diff / static_cast<double>(C);
        const double pg = p.dot(g);
        dz.row(i) = (p.array() * (g.array() - pg)).matrix();
        break;
      }
    }
  }
  return {losses, dz};
}

template <typename Fn>
void for_each_param(Parameters& a, const Parameters& b, Fn fn) {
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    fn(a.weights[l], b.weights[l]);
    fn(a.biases[l], b.biases[l]);
  }
}

}  // namespace

std::string to_string(LossKind kind) {
  switch (kind) {
    case LossKind::CrossEntropy:
      return "ce";
    case LossKind::BinaryCrossEntropy:
      return "bce";
    case LossKind::MeanSquaredError:
      return "mse";
  }
  return "?";
}

std::string to_string(Activation act) { return act == Activation::ReLU ? "relu" : "tanh"; }

Parameters Parameters::zeros_like() const {
  Parameters z;
  for (const auto& w : weights) z.weights.push_back(Matrix::Zero(w.rows(), w.cols()));
  for (const auto& b : biases) z.biases.push_back(RowVector::Zero(b.size()));
  return z;
}

bool Parameters::same_shape(const Parameters& other) const {
  if (weights.size() != other.weights.size() || biases.size() != other.biases.size()) return false;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != other.weights[l].rows() ||
        weights[l].cols() != other.weights[l].cols() ||
        biases[l].size() != other.biases[l].size()) {
      return false;
    }
  }
  return true;
}

std::size_t Parameters::size() const {
  std::size_t n = 0;
  for (const auto& w : weights) n += static_cast<std::size_t>(w.size());
  for (const auto& b : biases) n += static_cast<std::size_t>(b.size());
  return n;
}

bool Parameters::operator==(const Parameters& other) const {
  if (!same_shape(other)) return false;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l] != other.weights[l] || biases[l] != other.biases[l]) return false;
  }
  return true;
}

MlpModel::MlpModel(std::vector<std::size_t> dims, Activation act)
    : dims_(std::move(dims)), activation_(act) {
  if (dims_.size() < 2) throw ShapeError("MlpModel needs at least input and output dims");
  for (auto d : dims_) {
    if (d == 0) throw ShapeError("MlpModel layer dims must be positive");
  }
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l) {
    params_.weights.push_back(Matrix::Zero(static_cast<Eigen::Index>(dims_[l]),
                                           static_cast<Eigen::Index>(dims_[l + 1])));
    params_.biases.push_back(RowVector::Zero(static_cast<Eigen::Index>(dims_[l + 1])));
  }
}

MlpModel MlpModel::zeros(std::vector<std::size_t> dims, Activation act) {
  return MlpModel(std::move(dims), act);
}

MlpModel MlpModel::glorot(std::vector<std::size_t> dims, Activation act, Rng& rng) {
  MlpModel m(std::move(dims), act);
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(m.dims_[l] + m.dims_[l + 1]));
    std::uniform_real_distribution<double> u(-limit, limit);
    auto& w = m.params_.weights[l];
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
  }
  return m;
}

bool MlpModel::operator==(const MlpModel& other) const {
  return dims_ == other.dims_ && activation_ == other.activation_ && params_ == other.params_;
}

Matrix forward(const MlpModel& model, const Matrix& batch) {
  check_input(model, batch);
  const auto& p = model.params();
  Matrix x = batch;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    Matrix z = x * p.weights[l];
    z.rowwise() += p.biases[l];
    x = (l + 1 < model.num_layers()) ? apply_activation(z, model.activation()) : std::move(z);
  }
  return x;
}

Vector softmax(const Vector& logits) {
  if (logits.size() == 0) return logits;
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp().matrix();
  return e / e.sum();
}

Vector sigmoid(const Vector& logits) {
  Vector out(logits.size());
  for (Eigen::Index i = 0; i < logits.size(); ++i) {
    const double z = logits(i);
    // Branch on sign so exp never overflows.
    out(i) = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  }
  return out;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    out.row(i) = softmax(logits.row(i).transpose()).transpose();
  }
  return out;
}

Matrix sigmoid_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    out.row(i) = sigmoid(logits.row(i).transpose()).transpose();
  }
  return out;
}

Vector sharpen(const Vector& probs, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("sharpen: temperature must be positive");
  if ((probs.array() < 0.0).any()) throw std::invalid_argument("sharpen: negative probability");
  Vector powered = probs.array().pow(1.0 / temperature).matrix();
  const double total = powered.sum();
  if (!(total > 0.0)) throw std::invalid_argument("sharpen: input has no mass");
  return powered / total;
}

Matrix sharpen_rows(const Matrix& probs, double temperature) {
  Matrix out(probs.rows(), probs.cols());
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    out.row(i) = sharpen(probs.row(i).transpose(), temperature).transpose();
  }
  return out;
}

Vector per_sample_loss(const Matrix& logits, const Matrix& targets, LossKind kind) {
  return loss_rows(logits, targets, kind).first;
}

LossAndGrad loss_and_grad(const MlpModel& model, const Matrix& batch, const Matrix& targets,
                          LossKind kind, std::optional<std::span<const double>> weights) {
  const auto B = batch.rows();
  if (weights && static_cast<Eigen::Index>(weights->size()) != B) {
    throw ShapeError("loss_and_grad: " + std::to_string(weights->size()) + " weights for " +
                     std::to_string(B) + " samples");
  }
  Vector w = Vector::Ones(B);
  if (weights) {
    for (Eigen::Index i = 0; i < B; ++i) {
      const double wi = (*weights)[static_cast<std::size_t>(i)];
      if (!(wi >= 0.0) || !std::isfinite(wi)) {
        throw std::invalid_argument("loss_and_grad: weights must be finite and non-negative");
      }
      w(i) = wi;
    }
  }

  LossAndGrad out;
  out.grads = model.params().zeros_like();
  const double total = w.sum();
  if (B == 0 || total == 0.0) return out;

  const ForwardCache cache = forward_cached(model, batch);
  auto [losses, dz] = loss_rows(cache.activations.back(), targets, kind);
  out.loss = losses.dot(w) / total;
  if (!std::isfinite(out.loss)) {
    throw DivergenceError("non-finite " + to_string(kind) + " loss");
  }

  Matrix delta = (dz.array().colwise() * (w.array() / total)).matrix();
  const auto& p = model.params();
  for (std::size_t l = model.num_layers(); l-- > 0;) {
    out.grads.weights[l].noalias() = cache.activations[l].transpose() * delta;
    out.grads.biases[l] = delta.colwise().sum();
    if (l > 0) {
      Matrix back = delta * p.weights[l].transpose();
      delta = back.cwiseProduct(activation_derivative(cache.pre[l - 1], model.activation()));
    }
  }
  return out;
}

SgdOptimizer::SgdOptimizer(const MlpModel& model, SgdSettings settings)
    : settings_(settings), velocity_(model.params().zeros_like()) {
  if (settings_.learning_rate < 0.0) throw std::invalid_argument("sgd: negative learning rate");
  if (settings_.momentum < 0.0 || settings_.momentum >= 1.0) {
    throw std::invalid_argument("sgd: momentum must lie in [0,1)");
  }
  if (settings_.weight_decay < 0.0) throw std::invalid_argument("sgd: negative weight decay");
}

void SgdOptimizer::step(MlpModel& model, const Parameters& grads) {
  auto& params = model.params();
  if (!params.same_shape(grads) || !params.same_shape(velocity_)) {
    throw ShapeError("sgd: gradient shapes do not match the model");
  }
  const double m = settings_.momentum;
  const double wd = settings_.weight_decay;
  const double lr = settings_.learning_rate;
  for (std::size_t l = 0; l < params.weights.size(); ++l) {
    velocity_.weights[l] = m * velocity_.weights[l] + grads.weights[l] + wd * params.weights[l];
    velocity_.biases[l] = m * velocity_.biases[l] + grads.biases[l] + wd * params.biases[l];
    if (lr != 0.0) {
      params.weights[l] -= lr * velocity_.weights[l];
      params.biases[l] -= lr * velocity_.biases[l];
    }
  }
}

Matrix one_hot_targets(std::span<const int> labels, std::size_t num_classes) {
  Matrix t = Matrix::Zero(static_cast<Eigen::Index>(labels.size()),
                          static_cast<Eigen::Index>(num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      throw std::out_of_range("label " + std::to_string(y) + " outside [0," +
                              std::to_string(num_classes) + ")");
    }
    t(static_cast<Eigen::Index>(i), y) = 1.0;
  }
  return t;
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

}  // namespace asyco::nn
