#include "asyco/experiment.hpp"

#include <chrono>

namespace asyco::trainer {

report::EpochRow evaluate_epoch(const AsyCoTrainer& trainer, const EpochState& state,
                                const data::NoisyDataset& ds, const data::EvaluationSet& test,
                                const std::string& phase) {
  report::EpochRow row;
  row.epoch = state.epoch;
  row.phase = phase;
  row.test_acc = training::accuracy(trainer.classifier(), test);
  row.selection = metrics::selection_metrics(state.decisions, ds);
  row.sel_time_multiview_ns = state.decide_ns;

  const auto t0 = std::chrono::steady_clock::now();
  const auto fit = baselines::fit_gmm_em(state.n_losses);
  const auto mask = baselines::small_loss_select(state.n_losses, fit);
  const auto t1 = std::chrono::steady_clock::now();
  row.sel_time_gmm_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
  row.gmm = metrics::selection_metrics(mask.clean, ds);
  row.gmm_separated = fit.separated;

  row.relabel_topk_hit =
      metrics::relabel_hit_rate(trainer.reference(), ds, trainer.config().top_k);
  row.counts = state.counts;
  row.mean_loss = metrics::loss_histogram(state.n_losses, state.decisions, 1).mean_loss;
  return row;
}

AsyCoRun train_asyco(const AsyCoConfig& cfg, const data::NoisyDataset& ds,
                     const EpochCallback& on_epoch) {
  const data::TrainingSet train = data::training_set(ds);
  const data::EvaluationSet test = data::test_set(ds);
  AsyCoTrainer trainer(cfg, train);
  report::ExperimentReport rep;

  auto record = [&](const EpochState& state, const char* phase) {
    rep.rows.push_back(evaluate_epoch(trainer, state, ds, test, phase));
    if (on_epoch) on_epoch(rep.rows.back());
  };

  EpochState state;
  for (int e = 0; e < cfg.warmup_epochs; ++e) {
    trainer.warmup_epoch(e);
    state = trainer.decide(e);
    record(state, "warmup");
  }
  if (cfg.warmup_epochs == 0) state = trainer.decide(-1);
  for (int e = cfg.warmup_epochs; e < cfg.total_epochs; ++e) {
    state = trainer.run_epoch(state, e);
    record(state, "asyco");
  }

  auto& s = rep.summary;
  s["realized_noise_rate"] = ds.realized_noise_rate();
  s["num_train"] = ds.num_train();
  s["num_test"] = ds.test_idx.size();
  if (!rep.rows.empty()) {
    const auto& last = rep.rows.back();
    s["final"] = report::to_json(last);
    if (cfg.warmup_epochs > 0) {
      s["warmup_end"] = report::to_json(rep.rows[static_cast<std::size_t>(cfg.warmup_epochs) - 1]);
    }
  }
  return {trainer.classifier(), trainer.reference(), std::move(rep), std::move(state)};
}

}  // namespace asyco::trainer
