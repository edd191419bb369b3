#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace asyco::nn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::RowVectorXd;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a loss or gradient stops being finite. The trainer fills in
/// the epoch and batch it happened in before rethrowing.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, int epoch = -1, int batch = -1)
      : std::runtime_error(what), epoch_(epoch), batch_(batch) {}
  int epoch() const { return epoch_; }
  int batch() const { return batch_; }

 private:
  int epoch_;
  int batch_;
};

enum class Activation { ReLU, Tanh };

enum class LossKind {
  CrossEntropy,        // softmax + CE, target rows are distributions (usually one-hot)
  BinaryCrossEntropy,  // per-class sigmoid + BCE, averaged over classes
  MeanSquaredError,    // MSE between softmax(logits) and a target distribution
};

std::string to_string(LossKind kind);
std::string to_string(Activation act);

/// Weights and biases laid out layer by layer. Also used for gradients and
/// momentum buffers, which must mirror the model's shapes exactly.
struct Parameters {
  std::vector<Matrix> weights;    // layer i: dims[i] x dims[i+1]
  std::vector<RowVector> biases;  // layer i: 1 x dims[i+1]

  Parameters zeros_like() const;
  bool same_shape(const Parameters& other) const;
  std::size_t size() const;  // total scalar count
  bool operator==(const Parameters& other) const;
};

class MlpModel {
 public:
  /// Glorot-uniform weights, zero biases.
  static MlpModel glorot(std::vector<std::size_t> dims, Activation act, Rng& rng);
  static MlpModel zeros(std::vector<std::size_t> dims, Activation act = Activation::ReLU);

  const std::vector<std::size_t>& layer_dims() const { return dims_; }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }
  std::size_t num_layers() const { return dims_.size() - 1; }
  Activation activation() const { return activation_; }

  Parameters& params() { return params_; }
  const Parameters& params() const { return params_; }

  bool operator==(const MlpModel& other) const;

 private:
  MlpModel(std::vector<std::size_t> dims, Activation act);
  std::vector<std::size_t> dims_;
  Activation activation_;
  Parameters params_;
};

/// B x d inputs -> B x |Y| logits. Throws ShapeError on a column mismatch.
Matrix forward(const MlpModel& model, const Matrix& batch);

Vector softmax(const Vector& logits);
Vector sigmoid(const Vector& logits);
Matrix softmax_rows(const Matrix& logits);
Matrix sigmoid_rows(const Matrix& logits);

/// probs_i^(1/T) / sum_j probs_j^(1/T). Rejects non-positive T and all-zero input.
Vector sharpen(const Vector& probs, double temperature);
Matrix sharpen_rows(const Matrix& probs, double temperature);

/// Per-sample losses computed from logits (log-space, never log of a stored
/// probability). Targets are validated against the kind.
Vector per_sample_loss(const Matrix& logits, const Matrix& targets, LossKind kind);

struct LossAndGrad {
  double loss = 0.0;
  Parameters grads;
};

/// Weighted mean loss sum_i w_i l_i / sum_i w_i and its exact gradient.
/// Without weights every sample counts once. A zero total weight yields a
/// zero loss and zero gradients.
LossAndGrad loss_and_grad(const MlpModel& model, const Matrix& batch, const Matrix& targets,
                          LossKind kind,
                          std::optional<std::span<const double>> weights = std::nullopt);

struct SgdSettings {
  double learning_rate = 0.02;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

/// Momentum SGD with weight decay folded into the velocity:
///   v <- m v + g + wd theta;  theta <- theta - lr v
class SgdOptimizer {
 public:
  SgdOptimizer(const MlpModel& model, SgdSettings settings);

  void step(MlpModel& model, const Parameters& grads);

  const SgdSettings& settings() const { return settings_; }
  void set_learning_rate(double lr) { settings_.learning_rate = lr; }
  const Parameters& velocity() const { return velocity_; }

 private:
  SgdSettings settings_;
  Parameters velocity_;
};

/// One-hot targets for integer labels.
Matrix one_hot_targets(std::span<const int> labels, std::size_t num_classes);

/// Gathers rows by index.
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows);

}  // namespace asyco::nn
