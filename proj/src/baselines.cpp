#include "asyco/baselines.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace asyco::baselines {

namespace {

double log_normal_pdf(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + d * d / variance);
}

double percentile(std::vector<double> sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Component log-joint log(pi_k) + log N(x | mu_k, var_k). An empty component
// contributes -inf.
std::array<double, 2> log_joint(const Gmm1d& g, double x) {
  std::array<double, 2> out{};
  for (std::size_t k = 0; k < 2; ++k) {
    out[k] = g.weight[k] > 0.0 ? std::log(g.weight[k]) + log_normal_pdf(x, g.mean[k], g.variance[k])
                               : -std::numeric_limits<double>::infinity();
  }
  return out;
}

double log_add(double a, double b) {
  const double m = std::max(a, b);
  if (m == -std::numeric_limits<double>::infinity()) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

}  // namespace

double Gmm1d::log_density(double x) const {
  const auto lj = log_joint(*this, x);
  return log_add(lj[0], lj[1]);
}

double Gmm1d::clean_posterior(double x) const {
  const auto lj = log_joint(*this, x);
  const std::size_t low = low_component();
  return std::exp(lj[low] - log_add(lj[0], lj[1]));
}

GmmFit fit_gmm_em(std::span<const double> losses, int max_iters, double tol) {
  if (losses.size() < 10) throw std::invalid_argument("fit_gmm_em: need at least 10 losses");
  for (double x : losses) {
    if (!std::isfinite(x)) throw std::invalid_argument("fit_gmm_em: non-finite loss");
  }
  const auto n = static_cast<double>(losses.size());
  std::vector<double> sorted(losses.begin(), losses.end());
  std::sort(sorted.begin(), sorted.end());

  double mean = 0.0;
  for (double x : losses) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : losses) var += (x - mean) * (x - mean);
  var /= n;

  GmmFit fit;
  const double span = sorted.back() - sorted.front();
  if (span <= 1e-12 * std::max(1.0, std::abs(mean))) {
    fit.separated = false;
    fit.model.mean = {mean, mean};
    fit.model.variance = {kMinVariance, kMinVariance};
    fit.model.weight = {1.0, 0.0};
    fit.log_likelihood.push_back(log_normal_pdf(mean, mean, kMinVariance));
    return fit;
  }

  Gmm1d& g = fit.model;
  g.mean = {percentile(sorted, 0.1), percentile(sorted, 0.9)};
  if (g.mean[0] == g.mean[1]) g.mean = {sorted.front(), sorted.back()};
  g.variance = {std::max(var, kMinVariance), std::max(var, kMinVariance)};
  g.weight = {0.5, 0.5};

  std::vector<double> resp(losses.size());  // responsibility of component 0
  auto e_step = [&]() {
    double ll = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
      const auto lj = log_joint(g, losses[i]);
      const double lse = log_add(lj[0], lj[1]);
      resp[i] = std::exp(lj[0] - lse);
      ll += lse;
    }
    return ll / n;
  };

  double ll = e_step();
  fit.log_likelihood.push_back(ll);
  for (int it = 0; it < max_iters; ++it) {
    std::array<double, 2> nk{}, sx{};
    for (std::size_t i = 0; i < losses.size(); ++i) {
      nk[0] += resp[i];
      nk[1] += 1.0 - resp[i];
      sx[0] += resp[i] * losses[i];
      sx[1] += (1.0 - resp[i]) * losses[i];
    }
    for (std::size_t k = 0; k < 2; ++k) {
      if (nk[k] > 1e-12) g.mean[k] = sx[k] / nk[k];
    }
    std::array<double, 2> sv{};
    for (std::size_t i = 0; i < losses.size(); ++i) {
      const double d0 = losses[i] - g.mean[0];
      const double d1 = losses[i] - g.mean[1];
      sv[0] += resp[i] * d0 * d0;
      sv[1] += (1.0 - resp[i]) * d1 * d1;
    }
    for (std::size_t k = 0; k < 2; ++k) {
      if (nk[k] > 1e-12) g.variance[k] = std::max(sv[k] / nk[k], kMinVariance);
      g.weight[k] = nk[k] / n;
    }
    const double next = e_step();
    fit.log_likelihood.push_back(next);
    fit.iterations = it + 1;
    const bool converged = next - ll < tol;
    ll = next;
    if (converged) break;
  }
  if (std::abs(g.mean[0] - g.mean[1]) < 1e-9 || std::min(g.weight[0], g.weight[1]) <= 0.0) {
    fit.separated = false;
  }
  return fit;
}

SelectionMask small_loss_select(std::span<const double> losses, const GmmFit& fit,
                                double threshold) {
  SelectionMask mask;
  mask.clean.resize(losses.size(), 1);
  if (!fit.separated) {
    mask.warned = true;
    return mask;
  }
  for (std::size_t i = 0; i < losses.size(); ++i) {
    mask.clean[i] = fit.model.clean_posterior(losses[i]) > threshold ? 1 : 0;
  }
  return mask;
}

SupervisedRun train_supervised(const data::NoisyDataset& ds, const training::ModelConfig& model,
                               const training::OptimConfig& optim, int epochs, nn::LossKind kind,
                               std::uint64_t seed) {
  if (kind == nn::LossKind::MeanSquaredError) {
    throw std::invalid_argument("train_supervised: MSE is not a supervised objective here");
  }
  const auto train = data::training_set(ds);
  const auto test = data::test_set(ds);
  SupervisedRun run{training::make_model(model, ds.dim(), ds.num_classes,
                                         training::derive_seed(seed, 1)),
                    {}};
  nn::SgdOptimizer opt(run.model, optim.sgd);
  nn::Rng rng(training::derive_seed(seed, 2));
  const nn::Matrix targets = nn::one_hot_targets(train.labels, train.num_classes);
  for (int e = 0; e < epochs; ++e) {
    opt.set_learning_rate(optim.learning_rate_at(e));
    training::supervised_epoch(run.model, opt, train.features, targets, kind, optim.batch_size,
                               rng, e);
    run.test_accuracy.push_back(training::accuracy(run.model, test));
  }
  return run;
}

SupervisedRun train_plain_ce(const data::NoisyDataset& ds, const training::ModelConfig& model,
                             const training::OptimConfig& optim, int epochs, std::uint64_t seed) {
  return train_supervised(ds, model, optim, epochs, nn::LossKind::CrossEntropy, seed);
}

AblationOverride ablation_variants(AblationVariant variant) {
  using consensus::SubsetTag;
  AblationOverride o;
  auto& w = o.rule.w_by_tag;
  switch (variant) {
    case AblationVariant::Original:
      break;
    case AblationVariant::RyNoisy:
      w[consensus::index_of(SubsetTag::RY)] = 0;
      break;
    case AblationVariant::UnmatchedNoisy:
      w[consensus::index_of(SubsetTag::Unmatched)] = 0;
      break;
    case AblationVariant::UnmatchedClean:
      w[consensus::index_of(SubsetTag::Unmatched)] = +1;
      break;
    case AblationVariant::SmallLossSubsets:
      w = {+1, 0, +1, 0, 0, 0};
      break;
    case AblationVariant::ReferenceCE:
      o.reference_uses_ce = true;
      break;
    case AblationVariant::FreezeReference:
      o.freeze_reference = true;
      break;
    case AblationVariant::YhatTrainingLabel:
      o.rule.relabel = consensus::RelabelMode::TrainingLabel;
      break;
    case AblationVariant::YhatNetPrediction:
      o.rule.relabel = consensus::RelabelMode::NetPrediction;
      break;
  }
  return o;
}

std::string to_string(AblationVariant variant) {
  switch (variant) {
    case AblationVariant::Original:
      return "original";
    case AblationVariant::RyNoisy:
      return "ry-noisy";
    case AblationVariant::UnmatchedNoisy:
      return "u-noisy";
    case AblationVariant::UnmatchedClean:
      return "u-clean";
    case AblationVariant::SmallLossSubsets:
      return "small-loss";
    case AblationVariant::ReferenceCE:
      return "ref-ce";
    case AblationVariant::FreezeReference:
      return "freeze-ref";
    case AblationVariant::YhatTrainingLabel:
      return "yhat-ytilde";
    case AblationVariant::YhatNetPrediction:
      return "yhat-yn";
  }
  return "?";
}

AblationVariant parse_ablation(const std::string& name) {
  struct Alias {
    const char* name;
    AblationVariant variant;
  };
  static const Alias aliases[] = {
      {"original", AblationVariant::Original},
      {"none", AblationVariant::Original},
      {"ry-noisy", AblationVariant::RyNoisy},
      {"RY->noisy", AblationVariant::RyNoisy},
      {"RY→noisy", AblationVariant::RyNoisy},
      {"u-noisy", AblationVariant::UnmatchedNoisy},
      {"U->noisy", AblationVariant::UnmatchedNoisy},
      {"u-clean", AblationVariant::UnmatchedClean},
      {"U->clean", AblationVariant::UnmatchedClean},
      {"small-loss", AblationVariant::SmallLossSubsets},
      {"Small-loss subsets", AblationVariant::SmallLossSubsets},
      {"ref-ce", AblationVariant::ReferenceCE},
      {"CE", AblationVariant::ReferenceCE},
      {"freeze-ref", AblationVariant::FreezeReference},
      {"Frozen after warmup", AblationVariant::FreezeReference},
      {"yhat-ytilde", AblationVariant::YhatTrainingLabel},
      {"yhat=y_tilde", AblationVariant::YhatTrainingLabel},
      {"ŷ=ỹ", AblationVariant::YhatTrainingLabel},
      {"yhat-yn", AblationVariant::YhatNetPrediction},
      {"yhat=y_n", AblationVariant::YhatNetPrediction},
      {"ŷ=ỹ(n)", AblationVariant::YhatNetPrediction},
  };
  auto lower = [](std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
  };
  const std::string wanted = lower(name);
  for (const auto& a : aliases) {
    if (wanted == lower(a.name)) return a.variant;
  }
  throw std::invalid_argument("unknown ablation variant '" + name + "'");
}

}  // namespace asyco::baselines
