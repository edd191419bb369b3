#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "asyco/nn.hpp"

namespace asyco::data {

enum class NoiseKind { None, Symmetric, InstanceDependent };

std::string to_string(NoiseKind kind);
NoiseKind parse_noise_kind(const std::string& name);

struct NoiseMeta {
  NoiseKind kind = NoiseKind::None;
  double target_rate = 0.0;
  double realized_rate = 0.0;
  /// Instance-dependent only: one d x |Y| projection per clean class, and
  /// each train sample's flip probability (indexed like train_idx).
  std::vector<nn::Matrix> projections;
  std::vector<double> flip_probs;
};

/// Features, both label sets, and the train/test split. Clean labels exist
/// for evaluation; training code receives a TrainingSet instead.
struct NoisyDataset {
  nn::Matrix features;  // N x d
  std::vector<int> clean_labels;
  std::vector<int> noisy_labels;
  std::size_t num_classes = 0;
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  NoiseMeta noise_meta;
  nn::Matrix centers;  // generating class means, |Y| x d (empty when loaded from CSV)

  std::size_t size() const { return clean_labels.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(features.cols()); }
  std::size_t num_train() const { return train_idx.size(); }

  /// Fraction of train samples whose noisy label differs from the clean one.
  double realized_noise_rate() const;
  /// Train-split clean labels in train_idx order. Evaluation only.
  std::vector<int> train_clean_labels() const;
  /// Train-split noisy labels in train_idx order.
  std::vector<int> train_noisy_labels() const;

  /// Throws if labels are out of range, splits overlap, or shapes disagree.
  void validate() const;
};

/// What the training path is allowed to see: train features and noisy labels.
struct TrainingSet {
  nn::Matrix features;
  std::vector<int> labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
};

/// Held-out features with clean labels.
struct EvaluationSet {
  nn::Matrix features;
  std::vector<int> labels;
  std::size_t num_classes = 0;
};

TrainingSet training_set(const NoisyDataset& ds);
EvaluationSet test_set(const NoisyDataset& ds);

struct BlobConfig {
  std::size_t num_classes = 4;
  std::size_t train_per_class = 2000;
  std::size_t test_per_class = 500;
  std::size_t dim = 16;
  double class_separation = 4.0;
  std::uint64_t seed = 0;
};

/// Unit-covariance Gaussian clusters whose centers are pairwise at least
/// class_separation apart. Train rows come first, then test rows.
NoisyDataset make_blobs(const BlobConfig& cfg);

/// Flips each train label with probability `rate` to a uniformly chosen
/// different class.
NoisyDataset inject_symmetric_noise(NoisyDataset ds, double rate, std::uint64_t seed);

/// Part-dependent style noise: per-sample flip rate from N(rate, 0.1^2)
/// truncated to [0,1]; the flip target is drawn from a softmax over the
/// instance's projections onto its clean class's random matrix, with the
/// clean class masked out.
NoisyDataset inject_instance_dependent_noise(NoisyDataset ds, double rate, std::uint64_t seed);

inline constexpr double kInstanceNoiseStd = 0.1;

/// Projection scores x W[clean] for one train position (see NoiseMeta).
nn::RowVector projection_scores(const NoisyDataset& ds, std::size_t train_pos);

void write_csv(const NoisyDataset& ds, std::ostream& out);
void write_csv(const NoisyDataset& ds, const std::filesystem::path& path);
NoisyDataset read_csv(std::istream& in);
NoisyDataset read_csv(const std::filesystem::path& path);

/// Per-feature standard deviation over the rows of `features`.
nn::RowVector feature_std(const nn::Matrix& features);

}  // namespace asyco::data
