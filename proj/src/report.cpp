#include "asyco/report.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

#include "asyco/csv.hpp"

namespace asyco::report {

namespace {

std::string tag_name(consensus::SubsetTag t) { return std::string(consensus::to_string(t)); }

nlohmann::ordered_json nullable(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

void write_epochs_csv(const ExperimentReport& report, std::ostream& out) {
  std::vector<std::string> header = {"epoch",   "phase",  "test_acc", "sel_precision",
                                     "sel_recall", "sel_f1", "gmm_precision", "gmm_recall",
                                     "gmm_f1", "gmm_separated", "relabel_topk_hit"};
  for (auto t : consensus::kAllTags) header.push_back("count_" + tag_name(t));
  for (auto t : consensus::kAllTags) header.push_back("loss_" + tag_name(t));
  csv::write_row(out, header);
  for (const auto& r : report.rows) {
    std::vector<std::string> f = {std::to_string(r.epoch),
                                  r.phase,
                                  csv::fmt(r.test_acc),
                                  csv::fmt(r.selection.precision),
                                  csv::fmt(r.selection.recall),
                                  csv::fmt(r.selection.f1),
                                  csv::fmt(r.gmm.precision),
                                  csv::fmt(r.gmm.recall),
                                  csv::fmt(r.gmm.f1),
                                  r.gmm_separated ? "1" : "0",
                                  csv::fmt(r.relabel_topk_hit)};
    for (auto c : r.counts) f.push_back(std::to_string(c));
    for (auto l : r.mean_loss) f.push_back(csv::fmt(l));
    csv::write_row(out, f);
  }
}

void write_timing_csv(const ExperimentReport& report, std::ostream& out) {
  csv::write_row(out, {"epoch", "sel_time_multiview_ns", "sel_time_gmm_ns"});
  for (const auto& r : report.rows) {
    csv::write_row(out, {std::to_string(r.epoch), std::to_string(r.sel_time_multiview_ns),
                         std::to_string(r.sel_time_gmm_ns)});
  }
}

void write_summary_json(const nlohmann::ordered_json& summary, std::ostream& out) {
  out << summary.dump(2) << '\n';
}

void write_decisions_header(std::ostream& out) {
  csv::write_row(out, {"sample_id", "epoch", "tag", "ag", "w", "y_hat"});
}

void write_decisions_csv(std::span<const consensus::SampleDecision> decisions, int epoch,
                         std::ostream& out) {
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    const auto& d = decisions[i];
    std::string yhat;
    for (auto c : d.y_hat.indices()) {
      if (!yhat.empty()) yhat += ';';
      yhat += std::to_string(c);
    }
    csv::write_row(out, {std::to_string(i), std::to_string(epoch), tag_name(d.tag),
                         std::to_string(d.ag), std::to_string(d.w), yhat});
  }
}

void write_gmm_mask_csv(std::span<const std::uint8_t> clean, std::span<const int> labels,
                        int epoch, std::ostream& out) {
  for (std::size_t i = 0; i < clean.size(); ++i) {
    csv::write_row(out, {std::to_string(i), std::to_string(epoch),
                         clean[i] ? "gmm-clean" : "gmm-noisy", "", clean[i] ? "1" : "0",
                         std::to_string(labels[i])});
  }
}

nlohmann::ordered_json to_json(const EpochRow& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["phase"] = r.phase;
  j["test_acc"] = r.test_acc;
  j["sel_precision"] = r.selection.precision;
  j["sel_recall"] = r.selection.recall;
  j["sel_f1"] = r.selection.f1;
  j["gmm_f1"] = r.gmm.f1;
  j["relabel_topk_hit"] = r.relabel_topk_hit;
  nlohmann::ordered_json counts, losses;
  for (auto t : consensus::kAllTags) {
    counts[tag_name(t)] = r.counts[consensus::index_of(t)];
    losses[tag_name(t)] = nullable(r.mean_loss[consensus::index_of(t)]);
  }
  j["counts"] = counts;
  j["mean_loss"] = losses;
  return j;
}

std::string run_id(const std::string& canonical) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf, 12);
}

}  // namespace asyco::report
