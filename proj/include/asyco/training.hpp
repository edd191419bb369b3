#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "asyco/noise_data.hpp"
#include "asyco/nn.hpp"

namespace asyco::training {

struct ModelConfig {
  std::vector<std::size_t> hidden = {64, 64};
  nn::Activation activation = nn::Activation::ReLU;
};

struct OptimConfig {
  nn::SgdSettings sgd;
  std::size_t batch_size = 128;
  /// Epoch at which lr is multiplied by lr_decay_factor; 0 disables the decay.
  int lr_decay_epoch = 0;
  double lr_decay_factor = 0.1;

  double learning_rate_at(int epoch) const;
};

nn::MlpModel make_model(const ModelConfig& cfg, std::size_t input_dim, std::size_t num_classes,
                        std::uint64_t seed);

/// Shuffled index order for one epoch, chopped into batches.
std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   nn::Rng& rng);

/// One pass of mini-batch SGD on fixed per-sample targets. Rethrows
/// divergence with the epoch and batch index attached.
double supervised_epoch(nn::MlpModel& model, nn::SgdOptimizer& opt, const nn::Matrix& features,
                        const nn::Matrix& targets, nn::LossKind kind, std::size_t batch_size,
                        nn::Rng& rng, int epoch);

/// Argmax of forward().
std::vector<int> predict_labels(const nn::MlpModel& model, const nn::Matrix& features);

double accuracy(const nn::MlpModel& model, const nn::Matrix& features, std::span<const int> labels);
double accuracy(const nn::MlpModel& model, const data::EvaluationSet& eval);

/// Derives independent stream seeds from a run seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace asyco::training
