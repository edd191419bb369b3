#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "asyco/consensus.hpp"
#include "asyco/noise_data.hpp"
#include "asyco/training.hpp"

namespace asyco::baselines {

// ---------------------------------------------------------------------------
// Small-loss selection with a two-component 1-D Gaussian mixture.

struct Gmm1d {
  std::array<double, 2> mean{};
  std::array<double, 2> variance{1.0, 1.0};
  std::array<double, 2> weight{0.5, 0.5};

  /// Index of the component with the lower mean (the "clean" one).
  std::size_t low_component() const { return mean[0] <= mean[1] ? 0 : 1; }
  /// Posterior probability of the lower-mean component at x.
  double clean_posterior(double x) const;
  double log_density(double x) const;
};

inline constexpr double kMinVariance = 1e-6;

struct GmmFit {
  Gmm1d model;
  /// False when the input has no spread to split; callers treat every sample as clean.
  bool separated = true;
  int iterations = 0;
  /// Mean log-likelihood per sample after initialization and after each EM step.
  std::vector<double> log_likelihood;
};

GmmFit fit_gmm_em(std::span<const double> losses, int max_iters = 100, double tol = 1e-6);

struct SelectionMask {
  std::vector<std::uint8_t> clean;
  bool warned = false;  // set when the fit had no separation
};

SelectionMask small_loss_select(std::span<const double> losses, const GmmFit& fit,
                                double threshold = 0.5);

// ---------------------------------------------------------------------------
// Plain supervised baselines.

struct SupervisedRun {
  nn::MlpModel model;
  std::vector<double> test_accuracy;  // one entry per epoch
};

/// Trains one model on the noisy training labels with the given loss. BCE
/// uses the one-hot noisy label as a multi-label target.
SupervisedRun train_supervised(const data::NoisyDataset& ds, const training::ModelConfig& model,
                               const training::OptimConfig& optim, int epochs, nn::LossKind kind,
                               std::uint64_t seed);

SupervisedRun train_plain_ce(const data::NoisyDataset& ds, const training::ModelConfig& model,
                             const training::OptimConfig& optim, int epochs, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Ablation variants of the selection and re-labelling rules.

enum class AblationVariant {
  Original,
  RyNoisy,            // w = 0 on RY
  UnmatchedNoisy,     // w = 0 on U
  UnmatchedClean,     // w = +1 on U
  SmallLossSubsets,   // clean = C and NY, everything else noisy
  ReferenceCE,        // reference net trained with CE instead of BCE
  FreezeReference,    // reference net never updated after warmup
  YhatTrainingLabel,  // y_hat = y~
  YhatNetPrediction,  // y_hat = yn
};

inline constexpr std::array<AblationVariant, 8> kTableVariants = {
    AblationVariant::RyNoisy,          AblationVariant::UnmatchedNoisy,
    AblationVariant::UnmatchedClean,   AblationVariant::SmallLossSubsets,
    AblationVariant::ReferenceCE,      AblationVariant::FreezeReference,
    AblationVariant::YhatTrainingLabel, AblationVariant::YhatNetPrediction};

struct AblationOverride {
  consensus::ConsensusRule rule;
  bool reference_uses_ce = false;
  bool freeze_reference = false;

  bool operator==(const AblationOverride&) const = default;
};

AblationOverride ablation_variants(AblationVariant variant);

std::string to_string(AblationVariant variant);
/// Accepts the canonical ids and the long descriptive names; throws on anything else.
AblationVariant parse_ablation(const std::string& name);

}  // namespace asyco::baselines
