// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <tuple>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "asyco/config.hpp"
#include "asyco/csv.hpp"
#include "asyco/experiment.hpp"
#include "asyco/metrics.hpp"
#include "asyco/report.hpp"
#include "oracles.hpp"

using namespace asyco;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances and budgets.
constexpr double kC1Budget = 5.0;
constexpr int kC2CasesPerKind = 20;
constexpr double kC2Rel = 1e-4, kC2Abs = 1e-7, kC2Eps = 1e-4, kC2Budget = 30.0;
constexpr double kC3CoreShare = 0.95, kC3Precision = 0.99, kC3Budget = 120.0;
constexpr int kC4Slack = 5;
constexpr double kC4Budget = 600.0;
constexpr double kC5Gain40 = 0.05, kC5Gain50 = 0.08, kC5Budget = 900.0;
constexpr double kC8Ratio = 0.1, kC8Budget = 60.0;
constexpr std::size_t kC8N = 50000;
const std::vector<std::uint64_t> kSeeds = {1, 2, 3};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void verdict(int id, bool pass, const std::string& detail) {
  std::printf("criterion %2d: %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

config::RunConfig base_config(double noise, std::uint64_t seed) {
  config::RunConfig c;
  c.noise_kind = noise > 0 ? data::NoiseKind::InstanceDependent : data::NoiseKind::None;
  c.noise_rate = noise;
  c.blobs.seed = seed;
  c.asyco.seed = seed;
  return c;
}

// ---------------------------------------------------------------------------
// Shared runs, computed on first use and timed.

struct Timed {
  double seconds = 0.0;
};

struct AsyCoResult : Timed {
  report::ExperimentReport report;
};

struct CurveResult : Timed {
  metrics::AccuracyCurves curves;
};

std::map<std::tuple<int, std::string, std::uint64_t>, AsyCoResult> asyco_cache;
std::map<std::pair<int, std::uint64_t>, CurveResult> curve_cache;
std::map<std::pair<int, std::uint64_t>, data::NoisyDataset> data_cache;

int pct(double noise) { return static_cast<int>(noise * 100 + 0.5); }

const data::NoisyDataset& dataset(double noise, std::uint64_t seed) {
  const auto key = std::make_pair(pct(noise), seed);
  auto it = data_cache.find(key);
  if (it == data_cache.end()) {
    it = data_cache.emplace(key, config::make_dataset(base_config(noise, seed))).first;
  }
  return it->second;
}

const AsyCoResult& asyco_run(double noise, baselines::AblationVariant v, std::uint64_t seed) {
  const auto key = std::make_tuple(pct(noise), baselines::to_string(v), seed);
  auto it = asyco_cache.find(key);
  if (it != asyco_cache.end()) return it->second;
  auto cfg = base_config(noise, seed);
  cfg.asyco.ablation = v;
  const auto t0 = Clock::now();
  AsyCoResult r;
  r.report = trainer::train_asyco(cfg.asyco, dataset(noise, seed)).report;
  r.seconds = seconds_since(t0);
  std::printf("  [run] asyco noise=%d%% %s seed=%llu final_acc=%.4f (%.1fs)\n", pct(noise),
              baselines::to_string(v).c_str(), static_cast<unsigned long long>(seed),
              r.report.final_row().test_acc, r.seconds);
  std::fflush(stdout);
  return asyco_cache.emplace(key, std::move(r)).first->second;
}

// CE and BCE baselines on the same data and seed. The CE half doubles as the
// plain-CE baseline.
const CurveResult& ce_bce_run(double noise, std::uint64_t seed) {
  const auto key = std::make_pair(pct(noise), seed);
  auto it = curve_cache.find(key);
  if (it != curve_cache.end()) return it->second;
  const auto cfg = base_config(noise, seed);
  const auto t0 = Clock::now();
  CurveResult r;
  r.curves = metrics::ce_vs_bce_curves(dataset(noise, seed), cfg.asyco.model, cfg.asyco.optim,
                                       cfg.asyco.total_epochs, seed);
  r.seconds = seconds_since(t0);
  std::printf("  [run] ce/bce noise=%d%% seed=%llu ce_final=%.4f bce_final=%.4f (%.1fs)\n",
              pct(noise), static_cast<unsigned long long>(seed), r.curves.ce.back(),
              r.curves.bce.back(), r.seconds);
  std::fflush(stdout);
  return curve_cache.emplace(key, std::move(r)).first->second;
}

double median_of(const std::function<double(std::uint64_t)>& f) {
  std::vector<double> v;
  for (auto s : kSeeds) v.push_back(f(s));
  return metrics::median(v);
}

// ---------------------------------------------------------------------------

void criterion_1() {
  using namespace consensus;
  const auto t0 = Clock::now();
  std::size_t cases = 0, mismatches = 0, infeasible = 0;
  for (std::size_t C = 3; C <= 5; ++C) {
    for (std::size_t K = 1; K <= C; ++K) {
      for (const auto& y : oracle::k_hot_vectors(C, 1)) {
        for (const auto& yn : oracle::k_hot_vectors(C, 1)) {
          for (const auto& yr : oracle::k_hot_vectors(C, K)) {
            ++cases;
            const auto want = oracle::brute_force(y, yn, yr);
            if (want.tag.empty()) {
              ++infeasible;
              continue;
            }
            const LabelViews v{LabelSet::from_binary(y), LabelSet::from_binary(yn),
                               LabelSet::from_binary(yr)};
            const auto ag = agreement_pattern(v);
            const bool bad_triple = (ag.label_net == 1 && ag.net_ref == 1 && ag.label_ref == 0) ||
                                    (ag.label_net == 1 && ag.net_ref == 0 && ag.label_ref == 1);
            const bool ok = !bad_triple && std::string(to_string(classify_subset(v))) == want.tag &&
                            selection_variable(v) == want.w &&
                            relabel_variable(v).to_binary() == want.y_hat &&
                            agreement_degree(v) == want.ag;
            mismatches += !ok;
          }
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  verdict(1, mismatches == 0 && infeasible == 0 && cases > 0 && secs < kC1Budget,
          fmt("%zu view triples, %zu mismatches, %zu infeasible, %.2fs (< %.0fs)", cases,
              mismatches, infeasible, secs, kC1Budget));
}

void criterion_2() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240);
  std::string detail;
  bool pass = true;
  for (auto kind : {nn::LossKind::CrossEntropy, nn::LossKind::BinaryCrossEntropy,
                    nn::LossKind::MeanSquaredError}) {
    int passed = 0;
    double worst = 0.0;
    for (int c = 0; c < kC2CasesPerKind; ++c) {
      const std::size_t d = 2 + rng() % 5, classes = 2 + rng() % 4, rows = 1 + rng() % 6;
      std::vector<std::size_t> dims = {d};
      for (std::size_t l = 0, n = rng() % 3; l < n; ++l) dims.push_back(3 + rng() % 5);
      dims.push_back(classes);
      const auto act = c % 2 ? nn::Activation::Tanh : nn::Activation::ReLU;
      nn::Rng init(rng());
      auto model = nn::MlpModel::glorot(dims, act, init);
      std::normal_distribution<double> g;
      for (auto& b : model.params().biases) {
        for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = 0.5 * g(rng);
      }
      nn::Matrix x(rows, d);
      for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
      const auto t = oracle::random_targets(kind, rows, classes, rng);
      std::vector<double> w(rows);
      std::uniform_real_distribution<double> u(0.1, 2.0);
      for (auto& v : w) v = u(rng);
      const auto r = oracle::check_gradient(model, x, t, kind, c % 3 == 0 ? &w : nullptr, kC2Eps,
                                            kC2Rel, kC2Abs);
      passed += r.failures == 0;
      worst = std::max(worst, r.worst_relative);
    }
    pass = pass && passed == kC2CasesPerKind;
    detail += fmt("%s %d/%d (worst rel %.1e); ", nn::to_string(kind).c_str(), passed,
                  kC2CasesPerKind, worst);
  }
  const double secs = seconds_since(t0);
  verdict(2, pass && secs < kC2Budget, detail + fmt("%.2fs (< %.0fs)", secs, kC2Budget));
}

void criterion_3() {
  const auto t0 = Clock::now();
  auto cfg = base_config(0.0, 1);
  cfg.blobs.train_per_class = 1000;
  const auto ds = config::make_dataset(cfg);
  const auto run = trainer::train_asyco(cfg.asyco, ds);
  const auto& last = run.report.final_row();
  const double core = static_cast<double>(last.counts[consensus::index_of(consensus::SubsetTag::Core)]) /
                      static_cast<double>(ds.num_train());
  const double secs = seconds_since(t0);
  verdict(3, core >= kC3CoreShare && last.selection.precision >= kC3Precision && secs < kC3Budget,
          fmt("N=%zu, Core share %.4f (>= %.2f), precision %.4f (>= %.2f), %.1fs (< %.0fs)",
              ds.num_train(), core, kC3CoreShare, last.selection.precision, kC3Precision, secs,
              kC3Budget));
}

void criterion_4() {
  const auto orig = baselines::AblationVariant::Original;
  double secs = 0;
  for (auto s : kSeeds) secs += asyco_run(0.4, orig, s).seconds;
  const auto cfg = base_config(0.4, 1).asyco;
  const int first = cfg.warmup_epochs + kC4Slack;
  int checked = 0, bad = 0;
  double worst_gap = 1.0;
  for (int e = first; e < cfg.total_epochs; ++e) {
    const double mv = median_of([&](std::uint64_t s) {
      return asyco_run(0.4, orig, s).report.rows[static_cast<std::size_t>(e)].selection.f1;
    });
    const double gmm = median_of([&](std::uint64_t s) {
      return asyco_run(0.4, orig, s).report.rows[static_cast<std::size_t>(e)].gmm.f1;
    });
    ++checked;
    bad += mv < gmm;
    worst_gap = std::min(worst_gap, mv - gmm);
  }
  verdict(4, bad == 0 && checked > 0 && secs < kC4Budget,
          fmt("N=%zu, epochs %d..%d: %d/%d with median multi-view F1 >= GMM F1, smallest margin %+.4f, %.1fs (< %.0fs)",
              dataset(0.4, 1).num_train(), first, cfg.total_epochs - 1, checked - bad, checked,
              worst_gap, secs, kC4Budget));
}

void criterion_5() {
  const auto orig = baselines::AblationVariant::Original;
  double secs = 0;
  std::string detail;
  bool pass = true;
  for (double noise : {0.4, 0.5}) {
    for (auto s : kSeeds) secs += asyco_run(noise, orig, s).seconds + ce_bce_run(noise, s).seconds;
    const double a = median_of([&](std::uint64_t s) { return asyco_run(noise, orig, s).report.final_row().test_acc; });
    const double c = median_of([&](std::uint64_t s) { return ce_bce_run(noise, s).curves.ce.back(); });
    const double need = noise < 0.45 ? kC5Gain40 : kC5Gain50;
    pass = pass && a - c >= need;
    detail += fmt("%d%%: AsyCo %.4f vs CE %.4f (gain %+.4f, need %.2f); ", pct(noise), a, c, a - c, need);
  }
  verdict(5, pass && secs < kC5Budget, detail + fmt("%.1fs (< %.0fs)", secs, kC5Budget));
}

void criterion_6() {
  using baselines::AblationVariant;
  const auto cfg = base_config(0.4, 1).asyco;
  const auto warm = static_cast<std::size_t>(cfg.warmup_epochs) - 1;
  const double final_hit = median_of([&](std::uint64_t s) {
    return asyco_run(0.4, AblationVariant::Original, s).report.final_row().relabel_topk_hit;
  });
  const double warm_hit = median_of([&](std::uint64_t s) {
    return asyco_run(0.4, AblationVariant::Original, s).report.rows[warm].relabel_topk_hit;
  });
  const double frozen_hit = median_of([&](std::uint64_t s) {
    return asyco_run(0.4, AblationVariant::YhatTrainingLabel, s).report.final_row().relabel_topk_hit;
  });
  verdict(6, final_hit > warm_hit && final_hit > frozen_hit,
          fmt("final %.4f > warmup end %.4f and > yhat-ytilde final %.4f", final_hit, warm_hit,
              frozen_hit));
}

void criterion_7() {
  using baselines::AblationVariant;
  auto final_acc = [&](AblationVariant v) {
    return median_of([&](std::uint64_t s) { return asyco_run(0.5, v, s).report.final_row().test_acc; });
  };
  const double orig = final_acc(AblationVariant::Original);
  std::string detail = fmt("original %.4f", orig);
  bool pass = true;
  for (auto v : {AblationVariant::SmallLossSubsets, AblationVariant::FreezeReference,
                 AblationVariant::YhatTrainingLabel}) {
    const double a = final_acc(v);
    pass = pass && orig > a;
    detail += fmt(" > %s %.4f", baselines::to_string(v).c_str(), a);
  }
  verdict(7, pass, detail);
}

void criterion_8() {
  const auto t0 = Clock::now();
  const auto in = metrics::SelectionBenchInput::synthetic(kC8N, 10, 1, 8);
  const auto mv = metrics::time_selection(in, metrics::SelectionMethod::MultiView, 5);
  const auto gmm = metrics::time_selection(in, metrics::SelectionMethod::GmmSmallLoss, 5);
  const double ratio = static_cast<double>(mv) / static_cast<double>(gmm);
  const double secs = seconds_since(t0);
  verdict(8, ratio < kC8Ratio && secs < kC8Budget,
          fmt("N=%zu: decide_batch %.2f ms, GMM fit+select %.2f ms, ratio %.4f (< %.2f), %.1fs (< %.0fs)",
              kC8N, mv / 1e6, gmm / 1e6, ratio, kC8Ratio, secs, kC8Budget));
}

void criterion_9() {
  auto peak = [](const std::vector<double>& c) { return static_cast<double>(metrics::peak_epoch(c)); };
  const double ce_peak = median_of([&](std::uint64_t s) { return peak(ce_bce_run(0.5, s).curves.ce); });
  const double bce_peak = median_of([&](std::uint64_t s) { return peak(ce_bce_run(0.5, s).curves.bce); });
  const double ce_drop = median_of([&](std::uint64_t s) { return metrics::peak_to_final_drop(ce_bce_run(0.5, s).curves.ce); });
  const double bce_drop = median_of([&](std::uint64_t s) { return metrics::peak_to_final_drop(ce_bce_run(0.5, s).curves.bce); });
  verdict(9, ce_peak < bce_peak && ce_drop > bce_drop,
          fmt("peak epoch CE %.0f < BCE %.0f; drop CE %.4f > BCE %.4f", ce_peak, bce_peak,
              ce_drop, bce_drop));
}

std::string render_run(const config::RunConfig& cfg) {
  const auto ds = config::make_dataset(cfg);
  const auto run = trainer::train_asyco(cfg.asyco, ds);
  std::ostringstream out;
  data::write_csv(ds, out);
  report::write_epochs_csv(run.report, out);
  report::write_decisions_header(out);
  report::write_decisions_csv(run.final_state.decisions, run.final_state.epoch, out);
  metrics::write_histogram_csv(
      metrics::subset_loss_histogram(run.classifier, ds, run.final_state.decisions), out);
  const auto ce = baselines::train_plain_ce(ds, cfg.asyco.model, cfg.asyco.optim, 10, cfg.asyco.seed);
  for (double a : ce.test_accuracy) out << csv::fmt(a) << "\n";
  return out.str();
}

void criterion_10() {
  auto cfg = base_config(0.4, 7);
  cfg.blobs.train_per_class = 500;
  cfg.asyco.total_epochs = 20;
  const auto a = render_run(cfg);
  const auto b = render_run(cfg);
  verdict(10, a == b && !a.empty(),
          fmt("two runs, %zu bytes of CSV output, %s", a.size(), a == b ? "identical" : "different"));
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  const std::vector<void (*)()> all = {criterion_1, criterion_2, criterion_3, criterion_4,
                                       criterion_5, criterion_6, criterion_7, criterion_8,
                                       criterion_9, criterion_10};
  const auto t0 = Clock::now();
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (only.empty() || only.count(static_cast<int>(i + 1))) all[i]();
  }
  std::printf("%d failure(s), %.1fs total\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
