#include <doctest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "asyco/noise_data.hpp"
#include "asyco/training.hpp"

using namespace asyco;
using namespace asyco::data;

namespace {

BlobConfig small(std::size_t per_class = 500, std::size_t dim = 8, std::uint64_t seed = 1) {
  BlobConfig c;
  c.num_classes = 4;
  c.train_per_class = per_class;
  c.test_per_class = per_class / 4;
  c.dim = dim;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("blob centers respect the separation and rows have the right shape") {
  const auto ds = make_blobs(small());
  ds.validate();
  CHECK(ds.num_train() == 2000);
  CHECK(ds.test_idx.size() == 500);
  CHECK(ds.dim() == 8);
  CHECK(ds.noisy_labels == ds.clean_labels);
  for (Eigen::Index a = 0; a < ds.centers.rows(); ++a) {
    for (Eigen::Index b = a + 1; b < ds.centers.rows(); ++b) {
      CHECK((ds.centers.row(a) - ds.centers.row(b)).norm() >= 4.0);
    }
  }
  std::set<std::size_t> train(ds.train_idx.begin(), ds.train_idx.end());
  for (auto i : ds.test_idx) CHECK(train.count(i) == 0);
}

TEST_CASE("class means are recovered from the samples") {
  const auto ds = make_blobs(small(500, 8));
  for (std::size_t c = 0; c < 4; ++c) {
    nn::RowVector sum = nn::RowVector::Zero(8);
    std::size_t n = 0;
    for (auto i : ds.train_idx) {
      if (ds.clean_labels[i] == static_cast<int>(c)) {
        sum += ds.features.row(static_cast<Eigen::Index>(i));
        ++n;
      }
    }
    REQUIRE(n == 500);
    const nn::RowVector mean = sum / static_cast<double>(n);
    CHECK((mean - ds.centers.row(static_cast<Eigen::Index>(c))).cwiseAbs().maxCoeff() <= 0.15);
  }
}

TEST_CASE("well separated blobs are linearly separable") {
  BlobConfig c = small(500, 4);
  c.num_classes = 2;
  c.class_separation = 10.0;
  const auto ds = make_blobs(c);
  // Nearest-center rule as the linear probe.
  std::size_t right = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto x = ds.features.row(static_cast<Eigen::Index>(i));
    const double d0 = (x - ds.centers.row(0)).squaredNorm();
    const double d1 = (x - ds.centers.row(1)).squaredNorm();
    right += ((d0 < d1 ? 0 : 1) == ds.clean_labels[i]);
  }
  CHECK(static_cast<double>(right) / static_cast<double>(ds.size()) > 0.99);
}

TEST_CASE("blob generation is deterministic and validates arguments") {
  const auto a = make_blobs(small());
  const auto b = make_blobs(small());
  CHECK(a.features == b.features);
  CHECK(a.clean_labels == b.clean_labels);
  const auto c = make_blobs(small(500, 8, 2));
  CHECK_FALSE(a.features == c.features);

  BlobConfig bad = small();
  bad.dim = 1;
  CHECK_THROWS(make_blobs(bad));
  bad = small();
  bad.num_classes = 1;
  CHECK_THROWS(make_blobs(bad));
  bad = small();
  bad.train_per_class = 0;
  CHECK_THROWS(make_blobs(bad));
}

TEST_CASE("symmetric noise") {
  auto base = make_blobs(small(2500, 4));
  const auto none = inject_symmetric_noise(base, 0.0, 3);
  CHECK(none.noisy_labels == none.clean_labels);

  const auto ds = inject_symmetric_noise(base, 0.4, 3);
  CHECK(ds.realized_noise_rate() >= 0.38);
  CHECK(ds.realized_noise_rate() <= 0.42);
  CHECK(ds.noise_meta.realized_rate == ds.realized_noise_rate());
  for (auto i : ds.test_idx) CHECK(ds.noisy_labels[i] == ds.clean_labels[i]);
  // Flips are uniform over the other classes.
  std::array<std::size_t, 4> offsets{};
  for (auto i : ds.train_idx) {
    if (ds.noisy_labels[i] != ds.clean_labels[i]) {
      ++offsets[static_cast<std::size_t>((ds.noisy_labels[i] - ds.clean_labels[i] + 4) % 4)];
    }
  }
  CHECK(offsets[0] == 0);
  const double flipped = static_cast<double>(offsets[1] + offsets[2] + offsets[3]);
  for (int k = 1; k < 4; ++k) CHECK(std::abs(offsets[static_cast<std::size_t>(k)] / flipped - 1.0 / 3) < 0.03);

  CHECK_THROWS(inject_symmetric_noise(base, 1.0, 3));
  CHECK_THROWS(inject_symmetric_noise(base, -0.1, 3));
}

TEST_CASE("instance-dependent noise rates") {
  auto base = make_blobs(small(2500, 8));
  const auto zero = inject_instance_dependent_noise(base, 0.0, 5);
  CHECK(zero.noisy_labels == zero.clean_labels);

  for (double tau : {0.2, 0.4, 0.5}) {
    const auto ds = inject_instance_dependent_noise(base, tau, 5);
    INFO("tau ", tau);
    CHECK(std::abs(ds.realized_noise_rate() - tau) <= 0.03);
    for (auto i : ds.test_idx) CHECK(ds.noisy_labels[i] == ds.clean_labels[i]);
    REQUIRE(ds.noise_meta.flip_probs.size() == ds.num_train());
    for (double q : ds.noise_meta.flip_probs) {
      CHECK(q >= 0.0);
      CHECK(q <= 1.0);
    }
    CHECK(ds.noise_meta.projections.size() == 4);
  }
  const auto a = inject_instance_dependent_noise(base, 0.4, 5);
  const auto b = inject_instance_dependent_noise(base, 0.4, 5);
  CHECK(a.noisy_labels == b.noisy_labels);
}

TEST_CASE("instance-dependent flip targets follow the projection scores") {
  const auto ds = inject_instance_dependent_noise(make_blobs(small(2500, 8)), 0.5, 11);
  std::size_t flipped = 0, above = 0;
  for (std::size_t p = 0; p < ds.num_train(); ++p) {
    const auto i = ds.train_idx[p];
    const int y = ds.clean_labels[i];
    const int yn = ds.noisy_labels[i];
    if (y == yn) continue;
    // Independent recomputation of the scores from the stored projection.
    const nn::RowVector s = ds.features.row(static_cast<Eigen::Index>(i)) *
                            ds.noise_meta.projections[static_cast<std::size_t>(y)];
    CHECK((s - projection_scores(ds, p)).cwiseAbs().maxCoeff() < 1e-12);
    std::vector<double> wrong;
    for (int c = 0; c < 4; ++c) {
      if (c != y) wrong.push_back(s(c));
    }
    std::sort(wrong.begin(), wrong.end());
    const double med = wrong[wrong.size() / 2];
    ++flipped;
    above += s(yn) > med;
  }
  REQUIRE(flipped > 0);
  CHECK(static_cast<double>(above) / static_cast<double>(flipped) > 0.6);
}

TEST_CASE("dataset CSV round-trips bit-exactly") {
  const auto ds = inject_instance_dependent_noise(make_blobs(small(50, 3)), 0.4, 2);
  std::stringstream a;
  write_csv(ds, a);
  const std::string text = a.str();
  CHECK(text.rfind("id,split,clean_label,noisy_label,f0,f1,f2\r\n", 0) == 0);
  std::stringstream in(text);
  const auto back = read_csv(in);
  CHECK(back.features == ds.features);
  CHECK(back.clean_labels == ds.clean_labels);
  CHECK(back.noisy_labels == ds.noisy_labels);
  CHECK(back.train_idx == ds.train_idx);
  CHECK(back.test_idx == ds.test_idx);
  CHECK(back.num_classes == ds.num_classes);
  std::stringstream again;
  write_csv(back, again);
  CHECK(again.str() == text);
}

TEST_CASE("malformed dataset CSV is rejected") {
  std::stringstream bad("id,split,clean_label,noisy_label,f0\r\n0,train,0,0,notanumber\r\n");
  CHECK_THROWS(read_csv(bad));
  std::stringstream split("id,split,clean_label,noisy_label,f0\r\n0,valid,0,0,1.0\r\n");
  CHECK_THROWS(read_csv(split));
}

TEST_CASE("training view hides the clean labels") {
  const auto ds = inject_symmetric_noise(make_blobs(small(100, 3)), 0.4, 1);
  const auto tr = training_set(ds);
  CHECK(tr.size() == ds.num_train());
  CHECK(tr.labels == ds.train_noisy_labels());
  const auto te = test_set(ds);
  CHECK(static_cast<std::size_t>(te.features.rows()) == ds.test_idx.size());
  for (std::size_t j = 0; j < ds.test_idx.size(); ++j) {
    CHECK(te.labels[j] == ds.clean_labels[ds.test_idx[j]]);
  }
}

TEST_CASE("feature std") {
  nn::Matrix m(4, 2);
  m << 1, 0, 2, 0, 3, 0, 4, 0;
  const auto s = feature_std(m);
  CHECK(s(0) == doctest::Approx(std::sqrt(1.25)));
  CHECK(s(1) == 0.0);
}
