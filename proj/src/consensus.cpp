#include "asyco/consensus.hpp"

#include <algorithm>
#include <numeric>

namespace asyco::consensus {

LabelSet::LabelSet(std::size_t num_classes) : size_(num_classes) {
  if (num_classes > kMaxClasses) {
    throw std::invalid_argument("LabelSet supports at most " + std::to_string(kMaxClasses) +
                                " classes");
  }
}

LabelSet LabelSet::one_hot(std::size_t num_classes, std::size_t index) {
  LabelSet s(num_classes);
  s.set(index);
  return s;
}

LabelSet LabelSet::from_binary(std::span<const int> bits) {
  LabelSet s(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] != 0 && bits[i] != 1) throw std::invalid_argument("LabelSet: non-binary entry");
    if (bits[i] == 1) s.set(i);
  }
  return s;
}

LabelSet LabelSet::from_indices(std::size_t num_classes, std::span<const std::size_t> indices) {
  LabelSet s(num_classes);
  for (auto i : indices) s.set(i);
  return s;
}

std::size_t LabelSet::count() const {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

bool LabelSet::test(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("LabelSet index out of range");
  return (words_[i / 64] >> (i % 64)) & 1U;
}

void LabelSet::set(std::size_t i) {
  if (i >= size_) throw std::out_of_range("LabelSet index out of range");
  words_[i / 64] |= std::uint64_t{1} << (i % 64);
}

std::vector<std::size_t> LabelSet::indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < size_; ++i) {
    if (test(i)) out.push_back(i);
  }
  return out;
}

std::vector<int> LabelSet::to_binary() const {
  std::vector<int> out(size_);
  for (std::size_t i = 0; i < size_; ++i) out[i] = test(i) ? 1 : 0;
  return out;
}

LabelSet LabelSet::operator|(const LabelSet& other) const {
  if (size_ != other.size_) throw std::invalid_argument("LabelSet: length mismatch");
  LabelSet out(size_);
  for (std::size_t w = 0; w < kWords; ++w) out.words_[w] = words_[w] | other.words_[w];
  return out;
}

std::size_t dot(const LabelSet& a, const LabelSet& b) {
  if (a.size_ != b.size_) throw std::invalid_argument("LabelSet: length mismatch in dot");
  std::size_t n = 0;
  for (std::size_t w = 0; w < LabelSet::kWords; ++w) {
    n += static_cast<std::size_t>(std::popcount(a.words_[w] & b.words_[w]));
  }
  return n;
}

LabelSet one_hot_prediction(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("one_hot_prediction: empty logits");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return LabelSet::one_hot(logits.size(), best);
}

LabelSet top_k_prediction(std::span<const double> logits, std::size_t k) {
  const std::size_t n = logits.size();
  if (k < 1 || k > n) {
    throw std::invalid_argument("top_k_prediction: K=" + std::to_string(k) + " outside [1," +
                                std::to_string(n) + "]");
  }
  if (k == 1) return one_hot_prediction(logits);
  LabelSet out(n);
  std::array<std::uint16_t, LabelSet::kMaxClasses> order{};
  std::iota(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n), std::uint16_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k),
                    order.begin() + static_cast<std::ptrdiff_t>(n),
                    [&](std::uint16_t a, std::uint16_t b) {
                      return logits[a] > logits[b] || (logits[a] == logits[b] && a < b);
                    });
  for (std::size_t i = 0; i < k; ++i) out.set(order[i]);
  return out;
}

void LabelViews::validate(std::size_t k) const {
  if (y_tilde.size() != y_n.size() || y_tilde.size() != y_r.size()) {
    throw std::invalid_argument("LabelViews: views have different lengths");
  }
  if (y_tilde.count() != 1) throw std::invalid_argument("LabelViews: training label not one-hot");
  if (y_n.count() != 1) throw std::invalid_argument("LabelViews: net prediction not one-hot");
  const std::size_t kr = y_r.count();
  if (kr < 1) throw std::invalid_argument("LabelViews: reference view is empty");
  if (k > 0 && kr != k) {
    throw std::invalid_argument("LabelViews: reference view has " + std::to_string(kr) +
                                " labels, expected K=" + std::to_string(k));
  }
}

std::string_view to_string(SubsetTag tag) {
  switch (tag) {
    case SubsetTag::Core:
      return "C";
    case SubsetTag::SideCore:
      return "SC";
    case SubsetTag::NY:
      return "NY";
    case SubsetTag::NR:
      return "NR";
    case SubsetTag::RY:
      return "RY";
    case SubsetTag::Unmatched:
      return "U";
  }
  return "?";
}

SubsetTag parse_tag(std::string_view name) {
  for (auto tag : kAllTags) {
    if (to_string(tag) == name) return tag;
  }
  throw std::invalid_argument("unknown subset tag '" + std::string(name) + "'");
}

AgreementPattern agreement_pattern(const LabelViews& v) {
  v.validate();
  return {static_cast<int>(dot(v.y_tilde, v.y_n)), static_cast<int>(dot(v.y_n, v.y_r)),
          static_cast<int>(dot(v.y_tilde, v.y_r))};
}

int agreement_degree(const LabelViews& v) { return agreement_pattern(v).degree(); }

namespace {

SubsetTag tag_of(const AgreementPattern& p) {
  const int code = (p.label_net << 2) | (p.net_ref << 1) | p.label_ref;
  switch (code) {
    case 0b111:
      return SubsetTag::Core;
    case 0b011:
      return SubsetTag::SideCore;
    case 0b100:
      return SubsetTag::NY;
    case 0b010:
      return SubsetTag::NR;
    case 0b001:
      return SubsetTag::RY;
    case 0b000:
      return SubsetTag::Unmatched;
    default:
      break;
  }
  throw ConsistencyError("infeasible agreement pattern (" + std::to_string(p.label_net) + "," +
                         std::to_string(p.net_ref) + "," + std::to_string(p.label_ref) + ")");
}

LabelSet consensus_relabel(const LabelViews& v, SubsetTag tag) {
  switch (tag) {
    case SubsetTag::SideCore:
      return v.y_n;
    case SubsetTag::NR:
      return v.y_tilde | v.y_n;
    default:
      return v.y_tilde;
  }
}

}  // namespace

SubsetTag classify_subset(const LabelViews& v) { return tag_of(agreement_pattern(v)); }

int selection_variable(const LabelViews& v) {
  const auto p = agreement_pattern(v);
  if (p.degree() == 0) return -1;
  return p.label_ref == 1 ? +1 : 0;
}

LabelSet relabel_variable(const LabelViews& v) { return consensus_relabel(v, classify_subset(v)); }

namespace {

SampleDecision decide_from(const LabelViews& v, const AgreementPattern& p,
                           const ConsensusRule& rule) {
  SampleDecision d;
  d.tag = tag_of(p);
  d.ag = p.degree();
  d.w = rule.w_for(d.tag);
  switch (rule.relabel) {
    case RelabelMode::Consensus:
      d.y_hat = consensus_relabel(v, d.tag);
      break;
    case RelabelMode::TrainingLabel:
      d.y_hat = v.y_tilde;
      break;
    case RelabelMode::NetPrediction:
      d.y_hat = v.y_n;
      break;
  }
  return d;
}

}  // namespace

SampleDecision decide(const LabelViews& v, const ConsensusRule& rule) {
  return decide_from(v, agreement_pattern(v), rule);
}

std::vector<SampleDecision> decide_batch(std::span<const int> y_tilde, const nn::Matrix& n_logits,
                                         const nn::Matrix& r_logits, std::size_t k,
                                         const ConsensusRule& rule) {
  const auto B = static_cast<Eigen::Index>(y_tilde.size());
  if (n_logits.rows() != B || r_logits.rows() != B || n_logits.cols() != r_logits.cols()) {
    throw nn::ShapeError("decide_batch: inconsistent batch shapes");
  }
  const auto C = static_cast<std::size_t>(n_logits.cols());
  std::vector<SampleDecision> out;
  out.reserve(y_tilde.size());
  for (Eigen::Index i = 0; i < B; ++i) {
    const int y = y_tilde[static_cast<std::size_t>(i)];
    if (y < 0 || static_cast<std::size_t>(y) >= C) {
      throw std::out_of_range("decide_batch: label outside class range");
    }
    LabelViews v{LabelSet::one_hot(C, static_cast<std::size_t>(y)),
                 one_hot_prediction({n_logits.row(i).data(), C}),
                 top_k_prediction({r_logits.row(i).data(), C}, k)};
    // Views built here are valid by construction, so the checks in
    // agreement_pattern are skipped.
    const AgreementPattern p{static_cast<int>(dot(v.y_tilde, v.y_n)),
                             static_cast<int>(dot(v.y_n, v.y_r)),
                             static_cast<int>(dot(v.y_tilde, v.y_r))};
    out.push_back(decide_from(v, p, rule));
  }
  return out;
}

TagCounts count_tags(std::span<const SampleDecision> decisions) {
  TagCounts counts{};
  for (const auto& d : decisions) ++counts[index_of(d.tag)];
  return counts;
}

}  // namespace asyco::consensus
