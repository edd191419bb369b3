#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "asyco/baselines.hpp"
#include "asyco/consensus.hpp"
#include "asyco/noise_data.hpp"
#include "asyco/training.hpp"

namespace asyco::trainer {

/// How the unsupervised term on w = 0 samples gets its second view.
enum class ConsistencyMode {
  Jitter,     // sharpened prediction on x vs prediction on x + gaussian jitter
  SameInput,  // sharpened prediction on x vs prediction on x
};

std::string to_string(ConsistencyMode mode);
ConsistencyMode parse_consistency_mode(const std::string& name);

struct AsyCoConfig {
  int warmup_epochs = 10;
  int total_epochs = 60;
  std::size_t top_k = 1;
  double lambda_u = 25.0;
  double sharpen_temperature = 0.5;
  ConsistencyMode consistency = ConsistencyMode::Jitter;
  /// Jitter std as a fraction of each feature's std over the training set.
  double jitter_scale = 0.1;
  training::ModelConfig model;
  training::OptimConfig optim;
  std::uint64_t seed = 0;
  baselines::AblationVariant ablation = baselines::AblationVariant::Original;

  /// Throws std::invalid_argument naming the offending field.
  void validate(std::size_t num_classes) const;
};

/// Decisions derived from one pair of model snapshots, plus the
/// classification net's per-sample CE loss against the training label.
struct EpochState {
  int epoch = -1;
  std::vector<consensus::SampleDecision> decisions;
  consensus::TagCounts counts{};
  std::vector<double> n_losses;
  std::int64_t decide_ns = 0;

  /// The y_hat column of the decisions.
  std::vector<consensus::LabelSet> y_hat_table() const;
};

/// Trains the classification net and the reference net. Only sees the
/// training features and noisy labels.
class AsyCoTrainer {
 public:
  AsyCoTrainer(AsyCoConfig cfg, const data::TrainingSet& train);
  AsyCoTrainer(AsyCoConfig cfg, const data::TrainingSet& train, nn::MlpModel classifier,
               nn::MlpModel reference);

  /// One supervised epoch for both nets: CE for the classifier, BCE (or CE
  /// under the ref-ce ablation) for the reference net.
  void warmup_epoch(int epoch);

  /// Views from the current snapshots, decided under the configured rule.
  EpochState decide(int epoch) const;

  /// Classifier update: CE over w = +1, lambda-weighted consistency MSE over
  /// w = 0, w = -1 skipped.
  void train_classifier(const EpochState& state, int epoch);
  /// Reference update against the state's y_hat over every sample.
  void train_reference(const EpochState& state, int epoch);

  /// Trains both nets on `state` and returns the decisions for the next epoch.
  EpochState run_epoch(const EpochState& state, int epoch);

  const nn::MlpModel& classifier() const { return classifier_; }
  const nn::MlpModel& reference() const { return reference_; }
  const AsyCoConfig& config() const { return cfg_; }
  const baselines::AblationOverride& ablation() const { return override_; }

  /// Loss of one classifier batch, split into its two terms. Each term is a
  /// sum of per-sample losses divided by the batch size. Exposed so the
  /// decomposition can be checked against per-sample recomputation.
  struct ClassifierBatchLoss {
    double supervised = 0.0;
    double consistency = 0.0;
    std::size_t clean = 0;
    std::size_t noisy = 0;
    double total(double lambda) const { return supervised + lambda * consistency; }
  };
  ClassifierBatchLoss classifier_batch_loss(std::span<const std::size_t> batch,
                                            std::span<const consensus::SampleDecision> decisions,
                                            const nn::Matrix& jittered_inputs,
                                            nn::Parameters* grads) const;

 private:
  void set_epoch_lr(int epoch);
  nn::Matrix jitter(const nn::Matrix& x);

  AsyCoConfig cfg_;
  baselines::AblationOverride override_;
  const data::TrainingSet& train_;
  nn::MlpModel classifier_;
  nn::MlpModel reference_;
  nn::SgdOptimizer classifier_opt_;
  nn::SgdOptimizer reference_opt_;
  nn::Rng rng_;
  nn::RowVector jitter_std_;
  nn::Matrix noisy_one_hot_;
};

/// Runs every warmup epoch on fresh models and returns (classifier, reference).
std::pair<nn::MlpModel, nn::MlpModel> warmup(const AsyCoConfig& cfg,
                                             const data::TrainingSet& train);

}  // namespace asyco::trainer
