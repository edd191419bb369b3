#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "asyco/experiment.hpp"
#include "asyco/trainer.hpp"

using namespace asyco;
using namespace asyco::trainer;
using consensus::LabelSet;
using consensus::SampleDecision;
using consensus::SubsetTag;

namespace {

data::NoisyDataset small_data(double noise = 0.3, std::uint64_t seed = 3) {
  data::BlobConfig b;
  b.train_per_class = 60;
  b.test_per_class = 20;
  b.dim = 4;
  b.seed = seed;
  return data::inject_instance_dependent_noise(data::make_blobs(b), noise, seed + 1);
}

AsyCoConfig small_config() {
  AsyCoConfig c;
  c.warmup_epochs = 2;
  c.total_epochs = 5;
  c.model.hidden = {16};
  c.optim.batch_size = 32;
  c.seed = 5;
  return c;
}

SampleDecision decision(std::size_t C, int label, int w, SubsetTag tag = SubsetTag::Core) {
  SampleDecision d;
  d.tag = tag;
  d.w = w;
  d.y_hat = LabelSet::one_hot(C, static_cast<std::size_t>(label));
  return d;
}

EpochState state_with(const data::TrainingSet& train, std::vector<int> ws) {
  EpochState s;
  s.epoch = 0;
  for (std::size_t i = 0; i < train.size(); ++i) {
    s.decisions.push_back(decision(train.num_classes, train.labels[i], ws[i % ws.size()]));
  }
  s.counts = consensus::count_tags(s.decisions);
  return s;
}

// Softmax written out directly.
std::vector<double> probs(const nn::Matrix& logits, Eigen::Index r) {
  double m = logits.row(r).maxCoeff(), z = 0;
  std::vector<double> p(static_cast<std::size_t>(logits.cols()));
  for (Eigen::Index c = 0; c < logits.cols(); ++c) z += (p[static_cast<std::size_t>(c)] = std::exp(logits(r, c) - m));
  for (auto& v : p) v /= z;
  return p;
}

bool params_close(const nn::Parameters& a, const nn::Parameters& b, double tol) {
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    if ((a.weights[l] - b.weights[l]).cwiseAbs().maxCoeff() > tol) return false;
    if ((a.biases[l] - b.biases[l]).cwiseAbs().maxCoeff() > tol) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("classifier loss splits into a supervised and a consistency term") {
  const auto ds = small_data();
  const auto train = data::training_set(ds);
  auto cfg = small_config();
  cfg.lambda_u = 3.0;
  AsyCoTrainer t(cfg, train);
  for (int e = 0; e < 2; ++e) t.warmup_epoch(e);

  // Mixed batch with every selection value.
  const auto state = state_with(train, {+1, 0, -1, +1, 0});
  std::vector<std::size_t> batch(20);
  std::iota(batch.begin(), batch.end(), 7);
  const nn::Matrix x = nn::gather_rows(train.features, batch);
  nn::Matrix jit = x;
  jit.array() += 0.05;

  nn::Parameters grads;
  const auto loss = t.classifier_batch_loss(batch, state.decisions, jit, &grads);

  const nn::Matrix logits = nn::forward(t.classifier(), x);
  const nn::Matrix jit_logits = nn::forward(t.classifier(), jit);
  double sup = 0, cons = 0;
  std::size_t clean = 0, noisy = 0;
  std::vector<std::size_t> noisy_rows;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const int w = state.decisions[batch[b]].w;
    const auto r = static_cast<Eigen::Index>(b);
    if (w == +1) {
      sup -= std::log(probs(logits, r)[static_cast<std::size_t>(train.labels[batch[b]])]);
      ++clean;
    } else if (w == 0) {
      auto p = probs(logits, r);
      double z = 0;
      for (auto& v : p) z += (v = std::pow(v, 1.0 / cfg.sharpen_temperature));
      const auto q = probs(jit_logits, r);
      double s = 0;
      for (std::size_t c = 0; c < p.size(); ++c) s += (q[c] - p[c] / z) * (q[c] - p[c] / z);
      cons += s / static_cast<double>(p.size());
      ++noisy;
      noisy_rows.push_back(b);
    }
  }
  const double B = static_cast<double>(batch.size());
  CHECK(loss.clean == clean);
  CHECK(loss.noisy == noisy);
  CHECK(loss.supervised == doctest::Approx(sup / B).epsilon(1e-10));
  CHECK(loss.consistency == doctest::Approx(cons / B).epsilon(1e-10));
  CHECK(loss.total(3.0) == doctest::Approx((sup + 3.0 * cons) / B).epsilon(1e-10));

  // Gradient: the two weighted-mean gradients rescaled by their share of the batch.
  std::vector<double> mask(batch.size(), 0.0);
  for (std::size_t b = 0; b < batch.size(); ++b) mask[b] = state.decisions[batch[b]].w == 1;
  const auto g_sup = nn::loss_and_grad(t.classifier(), x,
                                       nn::gather_rows(nn::one_hot_targets(train.labels, 4), batch),
                                       nn::LossKind::CrossEntropy, mask)
                         .grads;
  const nn::Matrix target = nn::sharpen_rows(
      nn::softmax_rows(nn::forward(t.classifier(), nn::gather_rows(x, noisy_rows))), 0.5);
  const auto g_con = nn::loss_and_grad(t.classifier(), nn::gather_rows(jit, noisy_rows), target,
                                       nn::LossKind::MeanSquaredError)
                         .grads;
  auto want = g_sup;
  for (std::size_t l = 0; l < want.weights.size(); ++l) {
    want.weights[l] = g_sup.weights[l] * (clean / B) + g_con.weights[l] * (3.0 * noisy / B);
    want.biases[l] = g_sup.biases[l] * (clean / B) + g_con.biases[l] * (3.0 * noisy / B);
  }
  CHECK(params_close(grads, want, 1e-12));
}

TEST_CASE("lambda zero gives no gradient on an all-noisy batch") {
  const auto ds = small_data();
  const auto train = data::training_set(ds);
  auto cfg = small_config();
  cfg.lambda_u = 0.0;
  AsyCoTrainer t(cfg, train);
  const auto state = state_with(train, {0});
  std::vector<std::size_t> batch = {0, 1, 2, 3, 4, 5};
  nn::Parameters grads;
  const auto loss = t.classifier_batch_loss(batch, state.decisions, nn::gather_rows(train.features, batch), &grads);
  CHECK(loss.noisy == 6);
  CHECK(grads == t.classifier().params().zeros_like());

  const auto before = t.classifier();
  t.train_classifier(state, 2);
  CHECK(t.classifier() == before);
}

TEST_CASE("an all-unmatched epoch leaves the classifier untouched") {
  const auto ds = small_data();
  const auto train = data::training_set(ds);
  AsyCoTrainer t(small_config(), train);
  t.warmup_epoch(0);
  const auto before = t.classifier();
  t.train_classifier(state_with(train, {-1}), 2);
  CHECK(t.classifier() == before);
}

TEST_CASE("reference net follows a side-core relabel") {
  // One training sample: shuffling cannot matter, so a single step is predictable.
  data::TrainingSet one;
  one.features = nn::Matrix(1, 3);
  one.features << 0.5, -1.0, 2.0;
  one.labels = {1};
  one.num_classes = 3;
  auto cfg = small_config();
  cfg.model.hidden = {5};

  AsyCoTrainer t(cfg, one);
  EpochState s;
  s.epoch = 2;
  auto d = decision(3, 2, +1, SubsetTag::SideCore);  // y_hat = net prediction = class 2
  s.decisions = {d};

  nn::MlpModel expect = t.reference();
  nn::SgdOptimizer opt(expect, cfg.optim.sgd);
  nn::Matrix target(1, 3);
  target << 0, 0, 1;
  opt.step(expect, nn::loss_and_grad(expect, one.features, target,
                                     nn::LossKind::BinaryCrossEntropy).grads);
  t.train_reference(s, 2);
  CHECK(params_close(t.reference().params(), expect.params(), 1e-14));
}

TEST_CASE("frozen reference stays bit-identical") {
  const auto ds = small_data();
  const auto train = data::training_set(ds);
  auto cfg = small_config();
  cfg.ablation = baselines::AblationVariant::FreezeReference;
  AsyCoTrainer t(cfg, train);
  t.warmup_epoch(0);
  t.warmup_epoch(1);
  const auto frozen = t.reference();
  auto state = t.decide(1);
  for (int e = 2; e < 5; ++e) state = t.run_epoch(state, e);
  CHECK(t.reference() == frozen);
  CHECK_FALSE(t.classifier() == frozen);
}

TEST_CASE("zero warmup returns the initial nets") {
  const auto ds = small_data();
  const auto train = data::training_set(ds);
  auto cfg = small_config();
  cfg.warmup_epochs = 0;
  const auto [c, r] = warmup(cfg, train);
  AsyCoTrainer fresh(cfg, train);
  CHECK(c == fresh.classifier());
  CHECK(r == fresh.reference());
  CHECK_FALSE(c == r);
}

TEST_CASE("decisions are taken from snapshots and consumed unchanged") {
  const auto ds = small_data();
  const auto train = data::training_set(ds);
  AsyCoTrainer t(small_config(), train);
  t.warmup_epoch(0);
  const auto s1 = t.decide(0);
  const auto s2 = t.decide(0);
  REQUIRE(s1.decisions.size() == train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    CHECK(s1.decisions[i].tag == s2.decisions[i].tag);
    CHECK(s1.decisions[i].y_hat == s2.decisions[i].y_hat);
  }
  const EpochState copy = s1;
  const auto next = t.run_epoch(s1, 1);
  for (std::size_t i = 0; i < train.size(); ++i) CHECK(s1.decisions[i].w == copy.decisions[i].w);
  const auto again = t.decide(1);
  for (std::size_t i = 0; i < train.size(); ++i) CHECK(next.decisions[i].tag == again.decisions[i].tag);
  CHECK(next.n_losses == again.n_losses);
}

TEST_CASE("training runs are deterministic") {
  const auto ds = small_data();
  auto render = [&] {
    std::ostringstream out;
    const auto run = train_asyco(small_config(), ds);
    report::write_epochs_csv(run.report, out);
    return out.str();
  };
  const auto a = render();
  CHECK(a == render());
  CHECK(std::count(a.begin(), a.end(), '\n') == 6);
}

TEST_CASE("configuration is validated") {
  const auto ds = small_data();
  const auto train = data::training_set(ds);
  auto bad = [&](auto mutate) {
    auto c = small_config();
    mutate(c);
    CHECK_THROWS_AS(AsyCoTrainer(c, train), std::invalid_argument);
  };
  bad([](AsyCoConfig& c) { c.top_k = 0; });
  bad([](AsyCoConfig& c) { c.top_k = 5; });
  bad([](AsyCoConfig& c) { c.total_epochs = 1; });
  bad([](AsyCoConfig& c) { c.sharpen_temperature = 0; });
  bad([](AsyCoConfig& c) { c.lambda_u = -1; });
  bad([](AsyCoConfig& c) { c.optim.batch_size = 0; });
  CHECK(parse_consistency_mode(to_string(ConsistencyMode::SameInput)) == ConsistencyMode::SameInput);
  CHECK_THROWS(parse_consistency_mode("other"));
}
