#include "asyco/noise_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "asyco/csv.hpp"

namespace asyco::data {

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::None:
      return "none";
    case NoiseKind::Symmetric:
      return "symmetric";
    case NoiseKind::InstanceDependent:
      return "instance";
  }
  return "?";
}

NoiseKind parse_noise_kind(const std::string& name) {
  if (name == "none" || name == "clean") return NoiseKind::None;
  if (name == "symmetric" || name == "sym") return NoiseKind::Symmetric;
  if (name == "instance" || name == "idn" || name == "instance-dependent") {
    return NoiseKind::InstanceDependent;
  }
  throw std::invalid_argument("unknown noise kind '" + name + "'");
}

double NoisyDataset::realized_noise_rate() const {
  if (train_idx.empty()) return 0.0;
  std::size_t flipped = 0;
  for (auto i : train_idx) flipped += clean_labels[i] != noisy_labels[i];
  return static_cast<double>(flipped) / static_cast<double>(train_idx.size());
}

std::vector<int> NoisyDataset::train_clean_labels() const {
  std::vector<int> out;
  out.reserve(train_idx.size());
  for (auto i : train_idx) out.push_back(clean_labels[i]);
  return out;
}

std::vector<int> NoisyDataset::train_noisy_labels() const {
  std::vector<int> out;
  out.reserve(train_idx.size());
  for (auto i : train_idx) out.push_back(noisy_labels[i]);
  return out;
}

void NoisyDataset::validate() const {
  const auto n = size();
  if (static_cast<std::size_t>(features.rows()) != n || noisy_labels.size() != n) {
    throw std::invalid_argument("dataset: feature/label counts disagree");
  }
  if (num_classes < 2) throw std::invalid_argument("dataset: need at least two classes");
  for (std::size_t i = 0; i < n; ++i) {
    for (int y : {clean_labels[i], noisy_labels[i]}) {
      if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
        throw std::invalid_argument("dataset: label out of range at row " + std::to_string(i));
      }
    }
  }
  std::vector<char> seen(n, 0);
  for (const auto* split : {&train_idx, &test_idx}) {
    for (auto i : *split) {
      if (i >= n || seen[i]) throw std::invalid_argument("dataset: splits overlap or overflow");
      seen[i] = 1;
    }
  }
  for (auto i : test_idx) {
    if (clean_labels[i] != noisy_labels[i]) {
      throw std::invalid_argument("dataset: test label perturbed at row " + std::to_string(i));
    }
  }
}

TrainingSet training_set(const NoisyDataset& ds) {
  return {nn::gather_rows(ds.features, ds.train_idx), ds.train_noisy_labels(), ds.num_classes};
}

EvaluationSet test_set(const NoisyDataset& ds) {
  EvaluationSet out{nn::gather_rows(ds.features, ds.test_idx), {}, ds.num_classes};
  out.labels.reserve(ds.test_idx.size());
  for (auto i : ds.test_idx) out.labels.push_back(ds.clean_labels[i]);
  return out;
}

NoisyDataset make_blobs(const BlobConfig& cfg) {
  if (cfg.dim < 2) throw std::invalid_argument("make_blobs: dim must be at least 2");
  if (cfg.num_classes < 2) throw std::invalid_argument("make_blobs: need at least two classes");
  if (cfg.train_per_class == 0) throw std::invalid_argument("make_blobs: train_per_class is 0");
  if (!(cfg.class_separation > 0.0)) throw std::invalid_argument("make_blobs: bad separation");

  nn::Rng rng(cfg.seed);
  const auto C = static_cast<Eigen::Index>(cfg.num_classes);
  const auto d = static_cast<Eigen::Index>(cfg.dim);
  std::normal_distribution<double> normal(0.0, 1.0);

  // Rejection-sample centers; the spread starts where the expected pairwise
  // distance equals the separation and widens if placement keeps failing.
  nn::Matrix centers(C, d);
  double spread = cfg.class_separation / std::sqrt(2.0 * static_cast<double>(cfg.dim));
  for (Eigen::Index c = 0; c < C; ++c) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 0 && attempt % 100 == 0) spread *= 1.05;
      for (Eigen::Index j = 0; j < d; ++j) centers(c, j) = spread * normal(rng);
      bool ok = true;
      for (Eigen::Index o = 0; o < c && ok; ++o) {
        ok = (centers.row(c) - centers.row(o)).norm() >= cfg.class_separation;
      }
      if (ok) break;
    }
  }

  NoisyDataset ds;
  ds.num_classes = cfg.num_classes;
  ds.centers = centers;
  const std::size_t per_class = cfg.train_per_class + cfg.test_per_class;
  const std::size_t n = per_class * cfg.num_classes;
  ds.features.resize(static_cast<Eigen::Index>(n), d);
  ds.clean_labels.resize(n);

  auto emit = [&](std::size_t row, Eigen::Index c) {
    for (Eigen::Index j = 0; j < d; ++j) {
      ds.features(static_cast<Eigen::Index>(row), j) = centers(c, j) + normal(rng);
    }
    ds.clean_labels[row] = static_cast<int>(c);
  };
  // Train rows are interleaved by class so that contiguous train slices are balanced.
  std::size_t row = 0;
  for (std::size_t k = 0; k < cfg.train_per_class; ++k) {
    for (Eigen::Index c = 0; c < C; ++c) {
      ds.train_idx.push_back(row);
      emit(row++, c);
    }
  }
  for (std::size_t k = 0; k < cfg.test_per_class; ++k) {
    for (Eigen::Index c = 0; c < C; ++c) {
      ds.test_idx.push_back(row);
      emit(row++, c);
    }
  }
  ds.noisy_labels = ds.clean_labels;
  return ds;
}

NoisyDataset inject_symmetric_noise(NoisyDataset ds, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("noise rate must lie in [0,1)");
  nn::Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> other(0, static_cast<int>(ds.num_classes) - 2);
  for (auto i : ds.train_idx) {
    ds.noisy_labels[i] = ds.clean_labels[i];
    if (u(rng) < rate) {
      int j = other(rng);
      if (j >= ds.clean_labels[i]) ++j;
      ds.noisy_labels[i] = j;
    }
  }
  ds.noise_meta = NoiseMeta{NoiseKind::Symmetric, rate, 0.0, {}, {}};
  ds.noise_meta.realized_rate = ds.realized_noise_rate();
  return ds;
}

namespace {

double truncated_normal(nn::Rng& rng, double mean, double stddev, double lo, double hi) {
  std::normal_distribution<double> normal(mean, stddev);
  for (;;) {
    const double x = normal(rng);
    if (x >= lo && x <= hi) return x;
  }
}

}  // namespace

NoisyDataset inject_instance_dependent_noise(NoisyDataset ds, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("noise rate must lie in [0,1)");
  nn::Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto C = static_cast<Eigen::Index>(ds.num_classes);
  const auto d = static_cast<Eigen::Index>(ds.dim());

  NoiseMeta meta;
  meta.kind = NoiseKind::InstanceDependent;
  meta.target_rate = rate;
  for (Eigen::Index c = 0; c < C; ++c) {
    nn::Matrix w(d, C);
    for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = normal(rng);
    meta.projections.push_back(std::move(w));
  }
  meta.flip_probs.reserve(ds.train_idx.size());
  for (std::size_t pos = 0; pos < ds.train_idx.size(); ++pos) {
    meta.flip_probs.push_back(
        rate == 0.0 ? 0.0 : truncated_normal(rng, rate, kInstanceNoiseStd, 0.0, 1.0));
  }

  for (std::size_t pos = 0; pos < ds.train_idx.size(); ++pos) {
    const auto i = ds.train_idx[pos];
    const int y = ds.clean_labels[i];
    ds.noisy_labels[i] = y;
    const double draw = u(rng);
    const double pick = u(rng);
    if (!(draw < meta.flip_probs[pos])) continue;

    nn::RowVector scores = ds.features.row(static_cast<Eigen::Index>(i)) * meta.projections[y];
    scores(y) = -std::numeric_limits<double>::infinity();
    const double m = scores.maxCoeff();
    nn::RowVector p = (scores.array() - m).exp().matrix();
    p /= p.sum();
    double acc = 0.0;
    int target = -1;
    for (Eigen::Index c = 0; c < C; ++c) {
      if (c == y) continue;
      acc += p(c);
      target = static_cast<int>(c);
      if (pick < acc) break;
    }
    ds.noisy_labels[i] = target;
  }
  ds.noise_meta = std::move(meta);
  ds.noise_meta.realized_rate = ds.realized_noise_rate();
  return ds;
}

nn::RowVector projection_scores(const NoisyDataset& ds, std::size_t train_pos) {
  if (ds.noise_meta.projections.empty()) {
    throw std::logic_error("dataset carries no instance-dependent projections");
  }
  const auto i = ds.train_idx.at(train_pos);
  return ds.features.row(static_cast<Eigen::Index>(i)) *
         ds.noise_meta.projections[static_cast<std::size_t>(ds.clean_labels[i])];
}

void write_csv(const NoisyDataset& ds, std::ostream& out) {
  std::vector<std::string> header = {"id", "split", "clean_label", "noisy_label"};
  for (std::size_t j = 0; j < ds.dim(); ++j) header.push_back("f" + std::to_string(j));
  csv::write_row(out, header);

  std::vector<const char*> split(ds.size(), "");
  for (auto i : ds.train_idx) split[i] = "train";
  for (auto i : ds.test_idx) split[i] = "test";
  std::vector<std::string> row;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    row.assign({std::to_string(i), split[i], std::to_string(ds.clean_labels[i]),
                std::to_string(ds.noisy_labels[i])});
    for (std::size_t j = 0; j < ds.dim(); ++j) {
      row.push_back(csv::exact(ds.features(static_cast<Eigen::Index>(i),
                                           static_cast<Eigen::Index>(j))));
    }
    csv::write_row(out, row);
  }
}

void write_csv(const NoisyDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write_csv(ds, out);
}

namespace {

template <typename T>
T parse_number(const std::string& s, const char* what) {
  T v{};
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw std::runtime_error(std::string("dataset csv: bad ") + what + " '" + s + "'");
  }
  return v;
}

}  // namespace

NoisyDataset read_csv(std::istream& in) {
  std::vector<std::string> fields;
  if (!csv::read_row(in, fields) || fields.size() < 5 || fields[0] != "id") {
    throw std::runtime_error("dataset csv: missing header");
  }
  const std::size_t dim = fields.size() - 4;
  std::vector<std::vector<double>> rows;
  NoisyDataset ds;
  int max_label = -1;
  while (csv::read_row(in, fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != dim + 4) throw std::runtime_error("dataset csv: ragged row");
    const auto id = parse_number<std::size_t>(fields[0], "id");
    if (id != rows.size()) throw std::runtime_error("dataset csv: ids must be 0..N-1 in order");
    if (fields[1] == "train") {
      ds.train_idx.push_back(id);
    } else if (fields[1] == "test") {
      ds.test_idx.push_back(id);
    } else {
      throw std::runtime_error("dataset csv: unknown split '" + fields[1] + "'");
    }
    ds.clean_labels.push_back(parse_number<int>(fields[2], "label"));
    ds.noisy_labels.push_back(parse_number<int>(fields[3], "label"));
    max_label = std::max({max_label, ds.clean_labels.back(), ds.noisy_labels.back()});
    std::vector<double> f(dim);
    for (std::size_t j = 0; j < dim; ++j) f[j] = parse_number<double>(fields[4 + j], "feature");
    rows.push_back(std::move(f));
  }
  ds.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      ds.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  ds.num_classes = static_cast<std::size_t>(max_label + 1);
  // The generator that produced the labels is not recorded in the file.
  ds.noise_meta.realized_rate = ds.realized_noise_rate();
  ds.validate();
  return ds;
}

NoisyDataset read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return read_csv(in);
}

nn::RowVector feature_std(const nn::Matrix& features) {
  if (features.rows() == 0) return nn::RowVector::Zero(features.cols());
  const nn::RowVector mean = features.colwise().mean();
  nn::RowVector var = (features.rowwise() - mean).array().square().colwise().mean().matrix();
  return var.array().sqrt().matrix();
}

}  // namespace asyco::data
