#pragma once

#include <functional>

#include "asyco/noise_data.hpp"
#include "asyco/report.hpp"
#include "asyco/trainer.hpp"

namespace asyco::trainer {

struct AsyCoRun {
  nn::MlpModel classifier;
  nn::MlpModel reference;
  report::ExperimentReport report;
  EpochState final_state;
};

using EpochCallback = std::function<void(const report::EpochRow&)>;

/// Warmup followed by consensus epochs. Training sees only the TrainingSet
/// view of `ds`; the clean labels feed the per-epoch report.
AsyCoRun train_asyco(const AsyCoConfig& cfg, const data::NoisyDataset& ds,
                     const EpochCallback& on_epoch = {});

/// Row for one epoch: test accuracy of the classifier, consensus and
/// small-loss selection quality, re-label hit rate and per-subset stats.
report::EpochRow evaluate_epoch(const AsyCoTrainer& trainer, const EpochState& state,
                                const data::NoisyDataset& ds, const data::EvaluationSet& test,
                                const std::string& phase);

}  // namespace asyco::trainer
