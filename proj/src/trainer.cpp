#include "asyco/trainer.hpp"

#include <chrono>
#include <stdexcept>

namespace asyco::trainer {

std::string to_string(ConsistencyMode mode) {
  return mode == ConsistencyMode::Jitter ? "jitter" : "same-input";
}

ConsistencyMode parse_consistency_mode(const std::string& name) {
  if (name == "jitter") return ConsistencyMode::Jitter;
  if (name == "same-input" || name == "same") return ConsistencyMode::SameInput;
  throw std::invalid_argument("unknown consistency mode '" + name + "'");
}

void AsyCoConfig::validate(std::size_t num_classes) const {
  auto fail = [](const std::string& what) { throw std::invalid_argument(what); };
  if (warmup_epochs < 0) fail("warmup_epochs must be non-negative");
  if (total_epochs < warmup_epochs) fail("total_epochs must be at least warmup_epochs");
  if (top_k < 1 || top_k > num_classes) fail("top_k must lie in [1, num_classes]");
  if (lambda_u < 0.0) fail("lambda_u must be non-negative");
  if (!(sharpen_temperature > 0.0)) fail("sharpen_T must be positive");
  if (jitter_scale < 0.0) fail("jitter_scale must be non-negative");
  if (optim.batch_size == 0) fail("batch_size must be positive");
}

std::vector<consensus::LabelSet> EpochState::y_hat_table() const {
  std::vector<consensus::LabelSet> out;
  out.reserve(decisions.size());
  for (const auto& d : decisions) out.push_back(d.y_hat);
  return out;
}

namespace {

nn::MlpModel fresh_model(const AsyCoConfig& cfg, const data::TrainingSet& train,
                         std::uint64_t stream) {
  return training::make_model(cfg.model, static_cast<std::size_t>(train.features.cols()),
                              train.num_classes, training::derive_seed(cfg.seed, stream));
}

nn::Matrix reference_targets(std::span<const consensus::SampleDecision> decisions,
                             std::size_t num_classes, bool as_distribution) {
  nn::Matrix t = nn::Matrix::Zero(static_cast<Eigen::Index>(decisions.size()),
                                  static_cast<Eigen::Index>(num_classes));
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    const auto idx = decisions[i].y_hat.indices();
    const double v = as_distribution ? 1.0 / static_cast<double>(idx.size()) : 1.0;
    for (auto c : idx) t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = v;
  }
  return t;
}

void add_scaled(nn::Parameters& acc, const nn::Parameters& g, double scale) {
  for (std::size_t l = 0; l < acc.weights.size(); ++l) {
    acc.weights[l] += scale * g.weights[l];
    acc.biases[l] += scale * g.biases[l];
  }
}

}  // namespace

AsyCoTrainer::AsyCoTrainer(AsyCoConfig cfg, const data::TrainingSet& train)
    : AsyCoTrainer(cfg, train, fresh_model(cfg, train, 11), fresh_model(cfg, train, 12)) {}

AsyCoTrainer::AsyCoTrainer(AsyCoConfig cfg, const data::TrainingSet& train,
                           nn::MlpModel classifier, nn::MlpModel reference)
    : cfg_(std::move(cfg)),
      override_(baselines::ablation_variants(cfg_.ablation)),
      train_(train),
      classifier_(std::move(classifier)),
      reference_(std::move(reference)),
      classifier_opt_(classifier_, cfg_.optim.sgd),
      reference_opt_(reference_, cfg_.optim.sgd),
      rng_(training::derive_seed(cfg_.seed, 13)),
      jitter_std_(data::feature_std(train.features) * cfg_.jitter_scale),
      noisy_one_hot_(nn::one_hot_targets(train.labels, train.num_classes)) {
  cfg_.validate(train.num_classes);
  if (classifier_.input_dim() != static_cast<std::size_t>(train.features.cols()) ||
      reference_.input_dim() != classifier_.input_dim() ||
      classifier_.output_dim() != train.num_classes ||
      reference_.output_dim() != train.num_classes) {
    throw nn::ShapeError("AsyCoTrainer: model shapes do not fit the training set");
  }
}

void AsyCoTrainer::set_epoch_lr(int epoch) {
  const double lr = cfg_.optim.learning_rate_at(epoch);
  classifier_opt_.set_learning_rate(lr);
  reference_opt_.set_learning_rate(lr);
}

nn::Matrix AsyCoTrainer::jitter(const nn::Matrix& x) {
  std::normal_distribution<double> normal(0.0, 1.0);
  nn::Matrix out = x;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) += jitter_std_(j) * normal(rng_);
  }
  return out;
}

void AsyCoTrainer::warmup_epoch(int epoch) {
  set_epoch_lr(epoch);
  const auto bs = cfg_.optim.batch_size;
  training::supervised_epoch(classifier_, classifier_opt_, train_.features, noisy_one_hot_,
                             nn::LossKind::CrossEntropy, bs, rng_, epoch);
  const auto ref_kind = override_.reference_uses_ce ? nn::LossKind::CrossEntropy
                                                    : nn::LossKind::BinaryCrossEntropy;
  training::supervised_epoch(reference_, reference_opt_, train_.features, noisy_one_hot_,
                             ref_kind, bs, rng_, epoch);
}

EpochState AsyCoTrainer::decide(int epoch) const {
  EpochState state;
  state.epoch = epoch;
  const nn::Matrix n_logits = nn::forward(classifier_, train_.features);
  const nn::Matrix r_logits = nn::forward(reference_, train_.features);
  const auto t0 = std::chrono::steady_clock::now();
  state.decisions =
      consensus::decide_batch(train_.labels, n_logits, r_logits, cfg_.top_k, override_.rule);
  const auto t1 = std::chrono::steady_clock::now();
  state.decide_ns = std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
  state.counts = consensus::count_tags(state.decisions);
  const nn::Vector losses =
      nn::per_sample_loss(n_logits, noisy_one_hot_, nn::LossKind::CrossEntropy);
  state.n_losses.assign(losses.data(), losses.data() + losses.size());
  return state;
}

AsyCoTrainer::ClassifierBatchLoss AsyCoTrainer::classifier_batch_loss(
    std::span<const std::size_t> batch, std::span<const consensus::SampleDecision> decisions,
    const nn::Matrix& jittered_inputs, nn::Parameters* grads) const {
  ClassifierBatchLoss out;
  std::vector<double> clean_mask(batch.size(), 0.0);
  std::vector<std::size_t> noisy_rows;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const int w = decisions[batch[b]].w;
    if (w == +1) {
      clean_mask[b] = 1.0;
      ++out.clean;
    } else if (w == 0) {
      noisy_rows.push_back(b);
    }
  }
  out.noisy = noisy_rows.size();
  if (grads) *grads = classifier_.params().zeros_like();

  // Both terms are per-sample sums divided by the batch size, so a batch with
  // only a handful of w = 0 samples does not blow up their weight.
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  const nn::Matrix x = nn::gather_rows(train_.features, batch);
  if (out.clean > 0) {
    const nn::Matrix t = nn::gather_rows(noisy_one_hot_, batch);
    auto lg = nn::loss_and_grad(classifier_, x, t, nn::LossKind::CrossEntropy, clean_mask);
    const double scale = static_cast<double>(out.clean) * inv_batch;
    out.supervised = lg.loss * scale;
    if (grads) add_scaled(*grads, lg.grads, scale);
  }
  if (out.noisy > 0) {
    const nn::Matrix xu = nn::gather_rows(x, noisy_rows);
    // The sharpened target is a constant: no gradient flows through it.
    const nn::Matrix target = nn::sharpen_rows(nn::softmax_rows(nn::forward(classifier_, xu)),
                                               cfg_.sharpen_temperature);
    const nn::Matrix input = cfg_.consistency == ConsistencyMode::Jitter
                                 ? nn::gather_rows(jittered_inputs, noisy_rows)
                                 : xu;
    auto lg = nn::loss_and_grad(classifier_, input, target, nn::LossKind::MeanSquaredError);
    const double scale = static_cast<double>(out.noisy) * inv_batch;
    out.consistency = lg.loss * scale;
    if (grads && cfg_.lambda_u > 0.0) add_scaled(*grads, lg.grads, cfg_.lambda_u * scale);
  }
  if (!std::isfinite(out.total(cfg_.lambda_u))) {
    throw nn::DivergenceError("non-finite classifier loss");
  }
  return out;
}

void AsyCoTrainer::train_classifier(const EpochState& state, int epoch) {
  if (state.decisions.size() != train_.size()) {
    throw std::invalid_argument("train_classifier: decisions do not cover the training set");
  }
  set_epoch_lr(epoch);
  const auto batches = training::make_batches(train_.size(), cfg_.optim.batch_size, rng_);
  nn::Parameters grads;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const auto& batch = batches[b];
    const nn::Matrix jittered = cfg_.consistency == ConsistencyMode::Jitter
                                    ? jitter(nn::gather_rows(train_.features, batch))
                                    : nn::Matrix();
    try {
      const auto loss = classifier_batch_loss(batch, state.decisions, jittered, &grads);
      const bool contributes = loss.clean > 0 || (loss.noisy > 0 && cfg_.lambda_u > 0.0);
      if (contributes) classifier_opt_.step(classifier_, grads);
    } catch (const nn::DivergenceError& e) {
      throw nn::DivergenceError(e.what(), epoch, static_cast<int>(b));
    }
  }
}

void AsyCoTrainer::train_reference(const EpochState& state, int epoch) {
  if (override_.freeze_reference) return;
  if (state.decisions.size() != train_.size()) {
    throw std::invalid_argument("train_reference: decisions do not cover the training set");
  }
  set_epoch_lr(epoch);
  const bool ce = override_.reference_uses_ce;
  const nn::Matrix targets = reference_targets(state.decisions, train_.num_classes, ce);
  training::supervised_epoch(reference_, reference_opt_, train_.features, targets,
                             ce ? nn::LossKind::CrossEntropy : nn::LossKind::BinaryCrossEntropy,
                             cfg_.optim.batch_size, rng_, epoch);
}

EpochState AsyCoTrainer::run_epoch(const EpochState& state, int epoch) {
  train_classifier(state, epoch);
  train_reference(state, epoch);
  return decide(epoch);
}

std::pair<nn::MlpModel, nn::MlpModel> warmup(const AsyCoConfig& cfg,
                                             const data::TrainingSet& train) {
  AsyCoTrainer t(cfg, train);
  for (int e = 0; e < cfg.warmup_epochs; ++e) t.warmup_epoch(e);
  return {t.classifier(), t.reference()};
}

}  // namespace asyco::trainer
