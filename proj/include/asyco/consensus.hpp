#pragma once

#include <array>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "asyco/nn.hpp"

namespace asyco::consensus {

/// Raised when a view combination that the algebra rules out shows up.
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Fixed-capacity binary label vector. Dot products between views are a
/// popcount of the bitwise AND.
class LabelSet {
 public:
  static constexpr std::size_t kMaxClasses = 256;

  LabelSet() = default;
  explicit LabelSet(std::size_t num_classes);

  static LabelSet one_hot(std::size_t num_classes, std::size_t index);
  static LabelSet from_binary(std::span<const int> bits);
  static LabelSet from_indices(std::size_t num_classes, std::span<const std::size_t> indices);

  std::size_t size() const { return size_; }
  std::size_t count() const;
  bool test(std::size_t i) const;
  void set(std::size_t i);

  std::vector<std::size_t> indices() const;
  std::vector<int> to_binary() const;

  LabelSet operator|(const LabelSet& other) const;
  bool operator==(const LabelSet& other) const = default;

  friend std::size_t dot(const LabelSet& a, const LabelSet& b);

 private:
  static constexpr std::size_t kWords = kMaxClasses / 64;
  std::array<std::uint64_t, kWords> words_{};
  std::size_t size_ = 0;
};

std::size_t dot(const LabelSet& a, const LabelSet& b);

/// Argmax as a one-hot vector; ties go to the lowest index.
LabelSet one_hot_prediction(std::span<const double> logits);

/// K largest entries set to one; boundary ties go to the lowest index.
LabelSet top_k_prediction(std::span<const double> logits, std::size_t k);

/// The three label views of one training sample.
struct LabelViews {
  LabelSet y_tilde;  // training label (one-hot)
  LabelSet y_n;      // classification-net prediction (one-hot)
  LabelSet y_r;      // reference-net top-K prediction

  /// Checks lengths and that the first two views are one-hot. With k > 0
  /// also checks |y_r| = k.
  void validate(std::size_t k = 0) const;
};

enum class SubsetTag : std::uint8_t { Core, SideCore, NY, NR, RY, Unmatched };

inline constexpr std::array<SubsetTag, 6> kAllTags = {SubsetTag::Core, SubsetTag::SideCore,
                                                      SubsetTag::NY,   SubsetTag::NR,
                                                      SubsetTag::RY,   SubsetTag::Unmatched};
inline constexpr std::size_t kNumTags = kAllTags.size();

std::string_view to_string(SubsetTag tag);
SubsetTag parse_tag(std::string_view name);
inline std::size_t index_of(SubsetTag tag) { return static_cast<std::size_t>(tag); }

/// (y~.yn, yn.yr, y~.yr) for a sample. Ordering matches the subset table.
struct AgreementPattern {
  int label_net = 0;
  int net_ref = 0;
  int label_ref = 0;
  int degree() const { return label_net + net_ref + label_ref; }
};

AgreementPattern agreement_pattern(const LabelViews& v);
int agreement_degree(const LabelViews& v);
SubsetTag classify_subset(const LabelViews& v);

/// +1 clean, 0 noisy, -1 unmatched, decided from AG and y~.yr.
int selection_variable(const LabelViews& v);

/// Reference-net target: SideCore -> yn, NR -> y~ + yn, otherwise y~.
LabelSet relabel_variable(const LabelViews& v);

struct SampleDecision {
  SubsetTag tag = SubsetTag::Unmatched;
  int ag = 0;
  int w = -1;
  LabelSet y_hat;
};

enum class RelabelMode {
  Consensus,      // SideCore/NR rewrite as above
  TrainingLabel,  // y_hat = y~
  NetPrediction,  // y_hat = yn
};

/// Per-tag selection weights plus the re-labelling mode. The default
/// reproduces selection_variable / relabel_variable; ablations override it.
struct ConsensusRule {
  std::array<int, kNumTags> w_by_tag = {+1, +1, 0, 0, +1, -1};
  RelabelMode relabel = RelabelMode::Consensus;

  static ConsensusRule standard() { return {}; }
  int w_for(SubsetTag tag) const { return w_by_tag[index_of(tag)]; }
  bool operator==(const ConsensusRule&) const = default;
};

SampleDecision decide(const LabelViews& v, const ConsensusRule& rule = ConsensusRule::standard());

/// Builds views from integer training labels and the two nets' logits, then
/// decides each sample.
std::vector<SampleDecision> decide_batch(std::span<const int> y_tilde, const nn::Matrix& n_logits,
                                         const nn::Matrix& r_logits, std::size_t k,
                                         const ConsensusRule& rule = ConsensusRule::standard());

using TagCounts = std::array<std::size_t, kNumTags>;
TagCounts count_tags(std::span<const SampleDecision> decisions);

}  // namespace asyco::consensus
