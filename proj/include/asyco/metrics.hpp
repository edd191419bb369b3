#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "asyco/baselines.hpp"
#include "asyco/consensus.hpp"
#include "asyco/noise_data.hpp"
#include "asyco/training.hpp"

namespace asyco::metrics {

/// Precision/recall/F1 of a predicted-clean set against the clean-label
/// oracle (truly clean means noisy label == clean label).
struct SelectionScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t predicted_clean = 0;
  std::size_t truly_clean = 0;
  std::size_t true_positive = 0;
  /// Precision was defined as 0 because nothing was predicted clean.
  bool empty_prediction = false;
};

/// predicted_clean is indexed like ds.train_idx.
SelectionScores selection_metrics(std::span<const std::uint8_t> predicted_clean,
                                  const data::NoisyDataset& ds);
/// Predicted clean = {w = +1}.
SelectionScores selection_metrics(std::span<const consensus::SampleDecision> decisions,
                                  const data::NoisyDataset& ds);

/// Fraction of train samples whose clean label is among the model's top-K logits.
double relabel_hit_rate(const nn::MlpModel& reference, const data::NoisyDataset& ds,
                        std::size_t k);

inline constexpr std::size_t kHistogramBins = 50;

struct LossHistogram {
  std::vector<double> edges;  // bins + 1 shared edges
  std::array<std::vector<std::size_t>, consensus::kNumTags> counts;
  std::array<double, consensus::kNumTags> mean_loss{};  // NaN for an empty tag
};

/// Histogram of per-sample losses by subset over [0, 99.5th percentile],
/// the last bin absorbing anything above.
LossHistogram loss_histogram(std::span<const double> losses,
                             std::span<const consensus::SampleDecision> decisions,
                             std::size_t bins = kHistogramBins);

/// CE losses of the classification net on the train split against the noisy
/// labels, binned per subset.
LossHistogram subset_loss_histogram(const nn::MlpModel& classifier, const data::NoisyDataset& ds,
                                    std::span<const consensus::SampleDecision> decisions,
                                    std::size_t bins = kHistogramBins);

/// Long format: tag, bin_lo, bin_hi, count.
void write_histogram_csv(const LossHistogram& h, std::ostream& out);

/// Synthetic inputs for the selection benchmark: labels, both nets'
/// logits, and per-sample losses for the small-loss baseline.
struct SelectionBenchInput {
  std::vector<int> labels;
  nn::Matrix n_logits;
  nn::Matrix r_logits;
  std::vector<double> losses;
  std::size_t top_k = 1;

  static SelectionBenchInput synthetic(std::size_t n, std::size_t num_classes, std::size_t k,
                                       std::uint64_t seed);
};

enum class SelectionMethod { MultiView, GmmSmallLoss };

/// Median wall-clock nanoseconds over `repetitions` runs after one warm-up call.
std::int64_t time_selection(const SelectionBenchInput& input, SelectionMethod method,
                            int repetitions = 5);
/// All repetition timings, same protocol.
std::vector<std::int64_t> time_selection_samples(const SelectionBenchInput& input,
                                                 SelectionMethod method, int repetitions = 5);

struct AccuracyCurves {
  std::vector<double> ce;
  std::vector<double> bce;
};

/// Same architecture, seed and data for a CE-trained and a BCE-trained model.
AccuracyCurves ce_vs_bce_curves(const data::NoisyDataset& ds, const training::ModelConfig& model,
                                const training::OptimConfig& optim, int epochs,
                                std::uint64_t seed);

/// Index of the first maximum.
std::size_t peak_epoch(std::span<const double> curve);
double peak_to_final_drop(std::span<const double> curve);

double median(std::vector<double> values);

}  // namespace asyco::metrics
