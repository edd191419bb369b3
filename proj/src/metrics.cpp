#include "asyco/metrics.hpp"

#include <algorithm>
#include <cassert>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "asyco/csv.hpp"

namespace asyco::metrics {

SelectionScores selection_metrics(std::span<const std::uint8_t> predicted_clean,
                                  const data::NoisyDataset& ds) {
  if (predicted_clean.size() != ds.train_idx.size()) {
    throw std::invalid_argument("selection_metrics: mask does not cover the train split");
  }
  SelectionScores s;
  for (std::size_t pos = 0; pos < predicted_clean.size(); ++pos) {
    const auto i = ds.train_idx[pos];
    const bool truly = ds.clean_labels[i] == ds.noisy_labels[i];
    const bool pred = predicted_clean[pos] != 0;
    s.truly_clean += truly;
    s.predicted_clean += pred;
    s.true_positive += truly && pred;
  }
  s.empty_prediction = s.predicted_clean == 0;
  s.precision = s.empty_prediction ? 0.0
                                   : static_cast<double>(s.true_positive) /
                                         static_cast<double>(s.predicted_clean);
  s.recall = s.truly_clean == 0 ? 0.0
                                : static_cast<double>(s.true_positive) /
                                      static_cast<double>(s.truly_clean);
  s.f1 = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
                                      : 0.0;
#ifndef NDEBUG
  // Confusion-matrix recount.
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t pos = 0; pos < predicted_clean.size(); ++pos) {
    const auto i = ds.train_idx[pos];
    const bool truly = ds.clean_labels[i] == ds.noisy_labels[i];
    if (predicted_clean[pos] && truly) ++tp;
    if (predicted_clean[pos] && !truly) ++fp;
    if (!predicted_clean[pos] && truly) ++fn;
  }
  assert(tp == s.true_positive && tp + fp == s.predicted_clean && tp + fn == s.truly_clean);
#endif
  return s;
}

SelectionScores selection_metrics(std::span<const consensus::SampleDecision> decisions,
                                  const data::NoisyDataset& ds) {
  std::vector<std::uint8_t> mask(decisions.size());
  for (std::size_t i = 0; i < decisions.size(); ++i) mask[i] = decisions[i].w == +1;
  return selection_metrics(mask, ds);
}

double relabel_hit_rate(const nn::MlpModel& reference, const data::NoisyDataset& ds,
                        std::size_t k) {
  if (ds.train_idx.empty()) return 0.0;
  const nn::Matrix logits = nn::forward(reference, nn::gather_rows(ds.features, ds.train_idx));
  const auto C = static_cast<std::size_t>(logits.cols());
  std::size_t hits = 0;
  for (std::size_t pos = 0; pos < ds.train_idx.size(); ++pos) {
    const auto top = consensus::top_k_prediction(
        {logits.row(static_cast<Eigen::Index>(pos)).data(), C}, k);
    hits += top.test(static_cast<std::size_t>(ds.clean_labels[ds.train_idx[pos]]));
  }
  return static_cast<double>(hits) / static_cast<double>(ds.train_idx.size());
}

LossHistogram loss_histogram(std::span<const double> losses,
                             std::span<const consensus::SampleDecision> decisions,
                             std::size_t bins) {
  if (losses.size() != decisions.size()) {
    throw std::invalid_argument("loss_histogram: losses and decisions differ in length");
  }
  if (bins == 0) throw std::invalid_argument("loss_histogram: need at least one bin");
  LossHistogram h;
  double hi = 0.0;
  if (!losses.empty()) {
    std::vector<double> sorted(losses.begin(), losses.end());
    std::sort(sorted.begin(), sorted.end());
    const double pos = 0.995 * static_cast<double>(sorted.size() - 1);
    const auto lo_i = static_cast<std::size_t>(std::floor(pos));
    const auto hi_i = std::min(lo_i + 1, sorted.size() - 1);
    hi = sorted[lo_i] + (pos - static_cast<double>(lo_i)) * (sorted[hi_i] - sorted[lo_i]);
  }
  if (!(hi > 0.0)) hi = 1.0;
  h.edges.resize(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) {
    h.edges[b] = hi * static_cast<double>(b) / static_cast<double>(bins);
  }
  std::array<double, consensus::kNumTags> sums{};
  for (auto& c : h.counts) c.assign(bins, 0);
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (losses[i] < 0.0) throw std::invalid_argument("loss_histogram: negative loss");
    const auto t = consensus::index_of(decisions[i].tag);
    auto b = static_cast<std::size_t>(losses[i] / hi * static_cast<double>(bins));
    b = std::min(b, bins - 1);
    ++h.counts[t][b];
    sums[t] += losses[i];
  }
  for (std::size_t t = 0; t < consensus::kNumTags; ++t) {
    std::size_t n = 0;
    for (auto c : h.counts[t]) n += c;
    h.mean_loss[t] = n ? sums[t] / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
  }
  return h;
}

LossHistogram subset_loss_histogram(const nn::MlpModel& classifier, const data::NoisyDataset& ds,
                                    std::span<const consensus::SampleDecision> decisions,
                                    std::size_t bins) {
  const auto train = data::training_set(ds);
  const nn::Matrix logits = nn::forward(classifier, train.features);
  const nn::Vector losses =
      nn::per_sample_loss(logits, nn::one_hot_targets(train.labels, train.num_classes),
                          nn::LossKind::CrossEntropy);
  return loss_histogram({losses.data(), static_cast<std::size_t>(losses.size())}, decisions,
                        bins);
}

void write_histogram_csv(const LossHistogram& h, std::ostream& out) {
  csv::write_row(out, {"tag", "bin_lo", "bin_hi", "count"});
  for (auto tag : consensus::kAllTags) {
    const auto& counts = h.counts[consensus::index_of(tag)];
    for (std::size_t b = 0; b < counts.size(); ++b) {
      csv::write_row(out, {std::string(consensus::to_string(tag)), csv::fmt(h.edges[b]),
                           csv::fmt(h.edges[b + 1]), std::to_string(counts[b])});
    }
  }
}

SelectionBenchInput SelectionBenchInput::synthetic(std::size_t n, std::size_t num_classes,
                                                   std::size_t k, std::uint64_t seed) {
  nn::Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, static_cast<int>(num_classes) - 1);
  SelectionBenchInput in;
  in.top_k = k;
  const auto rows = static_cast<Eigen::Index>(n);
  const auto C = static_cast<Eigen::Index>(num_classes);
  in.n_logits.resize(rows, C);
  in.r_logits.resize(rows, C);
  in.labels.resize(n);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const int y = label(rng);
    in.labels[static_cast<std::size_t>(i)] = y;
    for (Eigen::Index c = 0; c < C; ++c) {
      in.n_logits(i, c) = normal(rng);
      in.r_logits(i, c) = normal(rng);
    }
    // Roughly 60% of samples look clean to both nets.
    if (u(rng) < 0.6) {
      in.n_logits(i, y) += 4.0;
      in.r_logits(i, y) += 3.0;
    }
  }
  const nn::Vector losses = nn::per_sample_loss(
      in.n_logits, nn::one_hot_targets(in.labels, num_classes), nn::LossKind::CrossEntropy);
  in.losses.assign(losses.data(), losses.data() + losses.size());
  return in;
}

namespace {

std::int64_t run_once(const SelectionBenchInput& in, SelectionMethod method,
                      std::size_t& sink) {
  const auto t0 = std::chrono::steady_clock::now();
  if (method == SelectionMethod::MultiView) {
    if (!in.labels.empty()) {
      const auto d = consensus::decide_batch(in.labels, in.n_logits, in.r_logits, in.top_k);
      sink += d.size();
    }
  } else if (in.losses.size() >= 10) {
    const auto fit = baselines::fit_gmm_em(in.losses);
    const auto mask = baselines::small_loss_select(in.losses, fit);
    sink += mask.clean.size();
  }
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
}

}  // namespace

std::vector<std::int64_t> time_selection_samples(const SelectionBenchInput& input,
                                                 SelectionMethod method, int repetitions) {
  if (repetitions < 1) throw std::invalid_argument("time_selection: need at least 1 repetition");
  std::size_t sink = 0;
  run_once(input, method, sink);  // warm cache
  std::vector<std::int64_t> out;
  for (int r = 0; r < repetitions; ++r) out.push_back(run_once(input, method, sink));
  return out;
}

std::int64_t time_selection(const SelectionBenchInput& input, SelectionMethod method,
                            int repetitions) {
  auto samples = time_selection_samples(input, method, repetitions);
  std::sort(samples.begin(), samples.end());
  return samples[samples.size() / 2];
}

AccuracyCurves ce_vs_bce_curves(const data::NoisyDataset& ds, const training::ModelConfig& model,
                                const training::OptimConfig& optim, int epochs,
                                std::uint64_t seed) {
  AccuracyCurves out;
  out.ce = baselines::train_supervised(ds, model, optim, epochs, nn::LossKind::CrossEntropy, seed)
               .test_accuracy;
  out.bce = baselines::train_supervised(ds, model, optim, epochs,
                                        nn::LossKind::BinaryCrossEntropy, seed)
                .test_accuracy;
  return out;
}

std::size_t peak_epoch(std::span<const double> curve) {
  if (curve.empty()) throw std::invalid_argument("peak_epoch: empty curve");
  return static_cast<std::size_t>(std::max_element(curve.begin(), curve.end()) - curve.begin());
}

double peak_to_final_drop(std::span<const double> curve) {
  return curve[peak_epoch(curve)] - curve.back();
}

double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of nothing");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace asyco::metrics
