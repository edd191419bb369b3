#include "asyco/training.hpp"

#include <algorithm>
#include <numeric>

namespace asyco::training {

double OptimConfig::learning_rate_at(int epoch) const {
  if (lr_decay_epoch > 0 && epoch >= lr_decay_epoch) return sgd.learning_rate * lr_decay_factor;
  return sgd.learning_rate;
}

nn::MlpModel make_model(const ModelConfig& cfg, std::size_t input_dim, std::size_t num_classes,
                        std::uint64_t seed) {
  std::vector<std::size_t> dims = {input_dim};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(num_classes);
  nn::Rng rng(seed);
  return nn::MlpModel::glorot(std::move(dims), cfg.activation, rng);
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n, std::size_t batch_size,
                                                   nn::Rng& rng) {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const auto end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

double supervised_epoch(nn::MlpModel& model, nn::SgdOptimizer& opt, const nn::Matrix& features,
                        const nn::Matrix& targets, nn::LossKind kind, std::size_t batch_size,
                        nn::Rng& rng, int epoch) {
  const auto batches = make_batches(static_cast<std::size_t>(features.rows()), batch_size, rng);
  double total = 0.0;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const auto x = nn::gather_rows(features, batches[b]);
    const auto t = nn::gather_rows(targets, batches[b]);
    try {
      auto lg = nn::loss_and_grad(model, x, t, kind);
      opt.step(model, lg.grads);
      total += lg.loss * static_cast<double>(batches[b].size());
    } catch (const nn::DivergenceError& e) {
      throw nn::DivergenceError(e.what(), epoch, static_cast<int>(b));
    }
  }
  return features.rows() ? total / static_cast<double>(features.rows()) : 0.0;
}

std::vector<int> predict_labels(const nn::MlpModel& model, const nn::Matrix& features) {
  const nn::Matrix logits = nn::forward(model, features);
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c) {
      if (logits(i, c) > logits(i, best)) best = c;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

double accuracy(const nn::MlpModel& model, const nn::Matrix& features,
                std::span<const int> labels) {
  if (labels.empty()) return 0.0;
  const auto pred = predict_labels(model, features);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += pred[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double accuracy(const nn::MlpModel& model, const data::EvaluationSet& eval) {
  return accuracy(model, eval.features, eval.labels);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over (seed, stream)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace asyco::training
