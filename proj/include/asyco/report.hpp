#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "asyco/consensus.hpp"
#include "asyco/metrics.hpp"

namespace asyco::report {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kCodeVersion = "0.1.0";

/// Metrics of the models at the end of one epoch. Selection numbers describe
/// the decisions those snapshots produce, which drive the next epoch.
struct EpochRow {
  int epoch = 0;
  std::string phase;  // "warmup" or "asyco"
  double test_acc = 0.0;
  metrics::SelectionScores selection;
  metrics::SelectionScores gmm;
  bool gmm_separated = true;
  double relabel_topk_hit = 0.0;
  consensus::TagCounts counts{};
  std::array<double, consensus::kNumTags> mean_loss{};
  std::int64_t sel_time_multiview_ns = 0;
  std::int64_t sel_time_gmm_ns = 0;
};

struct ExperimentReport {
  std::vector<EpochRow> rows;
  nlohmann::ordered_json summary = nlohmann::ordered_json::object();

  const EpochRow& final_row() const { return rows.back(); }
};

/// Deterministic per-epoch metrics (no wall-clock columns).
void write_epochs_csv(const ExperimentReport& report, std::ostream& out);
/// Per-epoch selection timings.
void write_timing_csv(const ExperimentReport& report, std::ostream& out);
void write_summary_json(const nlohmann::ordered_json& summary, std::ostream& out);

/// Decision rows: sample_id, epoch, tag, ag, w, y_hat (class indices joined by ';').
void write_decisions_header(std::ostream& out);
void write_decisions_csv(std::span<const consensus::SampleDecision> decisions, int epoch,
                         std::ostream& out);
/// Small-loss masks in the same layout: tag is gmm-clean / gmm-noisy, ag is
/// empty, y_hat is the training label.
void write_gmm_mask_csv(std::span<const std::uint8_t> clean, std::span<const int> labels,
                        int epoch, std::ostream& out);

nlohmann::ordered_json to_json(const EpochRow& row);

/// FNV-1a based 12-hex-digit id of a canonical text (e.g. a config echo).
std::string run_id(const std::string& canonical);

}  // namespace asyco::report
