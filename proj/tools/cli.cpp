#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "asyco/baselines.hpp"
#include "asyco/config.hpp"
#include "asyco/csv.hpp"
#include "asyco/experiment.hpp"
#include "asyco/metrics.hpp"
#include "asyco/report.hpp"

namespace asyco::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr const char* kOutRootEnv = "ASYCO_OUT_ROOT";

/// Thrown when the run directory already exists and --force was not given.
struct RunExists : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Common {
  std::string config_path;
  std::string out;
  std::string seeds;
  std::vector<std::string> overrides;
  bool force = false;
};

struct Options {
  Common common;
  std::string variants = "all";
  std::size_t bench_n = 50000;
  std::size_t bench_classes = 10;
  std::size_t bench_k = 1;
  int bench_reps = 5;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config_path, "key=value config file");
  sub->add_option("--out", c.out, std::string("output root (default $") + kOutRootEnv + " or ./runs)");
  sub->add_option("--seeds", c.seeds, "comma-separated seeds; each sets seed and data_seed");
  sub->add_flag("--force", c.force, "overwrite an existing run directory");
  sub->add_option("overrides", c.overrides, "key=value overrides applied after the config file");
}

fs::path out_root(const Common& c) {
  if (!c.out.empty()) return c.out;
  if (const char* env = std::getenv(kOutRootEnv); env && *env) return env;
  return "runs";
}

config::RunConfig load_config(const Common& c) {
  config::RunConfig cfg;
  if (!c.config_path.empty()) config::apply(config::read_key_values(c.config_path), cfg);
  config::KeyValues kv;
  for (const auto& o : c.overrides) {
    auto [k, v] = config::parse_override(o);
    kv[k] = v;
  }
  config::apply(kv, cfg);
  try {
    cfg.asyco.validate(cfg.blobs.num_classes);
  } catch (const std::invalid_argument& e) {
    throw config::ConfigError("config", e.what());
  }
  return cfg;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      out.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw config::ConfigError("seeds", "bad seed '" + item + "'");
    }
  }
  return out;
}

/// One config per requested seed, or the loaded config alone.
std::vector<config::RunConfig> per_seed(const config::RunConfig& base, const std::string& seeds) {
  std::vector<config::RunConfig> out;
  for (auto s : parse_seeds(seeds)) {
    auto c = base;
    c.asyco.seed = s;
    c.blobs.seed = s;
    out.push_back(c);
  }
  if (out.empty()) out.push_back(base);
  return out;
}

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  body(out);
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

json config_json(const config::RunConfig& cfg) {
  json j;
  for (const auto& [k, v] : config::to_key_values(cfg)) j[k] = v;
  return j;
}

/// A run directory keyed by the hash of everything that determines its output.
struct RunDir {
  fs::path path;
  std::string id;
};

RunDir open_run_dir(const fs::path& root, const std::string& command,
                    const config::RunConfig& cfg, const std::string& extra, bool force) {
  std::string echo = "# asyco " + std::string(report::kCodeVersion) + "\n# command: " + command + "\n";
  if (!extra.empty()) echo += "# " + extra + "\n";
  echo += config::canonical_text(cfg);
  RunDir dir{root / command / report::run_id(echo), report::run_id(echo)};
  if (fs::exists(dir.path)) {
    if (!force) throw RunExists("run " + dir.id + " already exists at " + dir.path.string());
    fs::remove_all(dir.path);
  }
  fs::create_directories(dir.path);
  write_file(dir.path / "config.txt", [&](std::ostream& o) { o << echo; });
  return dir;
}

json summary_header(const RunDir& dir, const std::string& command, const config::RunConfig& cfg) {
  json j;
  j["schema_version"] = report::kSchemaVersion;
  j["code_version"] = report::kCodeVersion;
  j["command"] = command;
  j["run_id"] = dir.id;
  j["config"] = config_json(cfg);
  return j;
}

void print_row(const report::EpochRow& r) {
  std::printf("  epoch %3d %-6s acc=%.4f sel_f1=%.4f gmm_f1=%.4f relabel=%.4f\n", r.epoch,
              r.phase.c_str(), r.test_acc, r.selection.f1, r.gmm.f1, r.relabel_topk_hit);
  std::fflush(stdout);
}

void write_asyco_reports(const fs::path& dir, const trainer::AsyCoRun& run) {
  write_file(dir / "epochs.csv", [&](std::ostream& o) { report::write_epochs_csv(run.report, o); });
  write_file(dir / "timing.csv", [&](std::ostream& o) { report::write_timing_csv(run.report, o); });
}

// ---------------------------------------------------------------------------

int cmd_gen_data(const Options& opt) {
  const auto base = load_config(opt.common);
  for (const auto& cfg : per_seed(base, opt.common.seeds)) {
    const auto dir = open_run_dir(out_root(opt.common), "gen-data", cfg, "", opt.common.force);
    const auto ds = config::make_dataset(cfg);
    data::write_csv(ds, dir.path / "dataset.csv");
    auto s = summary_header(dir, "gen-data", cfg);
    s["realized_noise_rate"] = ds.realized_noise_rate();
    s["num_train"] = ds.num_train();
    s["num_test"] = ds.test_idx.size();
    write_file(dir.path / "summary.json", [&](std::ostream& o) { report::write_summary_json(s, o); });
    std::printf("gen-data %s: %zu train / %zu test, noise %.4f -> %s\n", dir.id.c_str(),
                ds.num_train(), ds.test_idx.size(), ds.realized_noise_rate(),
                dir.path.string().c_str());
  }
  return kOk;
}

int cmd_train_asyco(const Options& opt) {
  const auto base = load_config(opt.common);
  for (const auto& cfg : per_seed(base, opt.common.seeds)) {
    const auto dir = open_run_dir(out_root(opt.common), "train-asyco", cfg, "", opt.common.force);
    std::printf("train-asyco %s (seed %llu)\n", dir.id.c_str(),
                static_cast<unsigned long long>(cfg.asyco.seed));
    const auto ds = config::make_dataset(cfg);
    try {
      const auto run = trainer::train_asyco(cfg.asyco, ds, print_row);
      write_asyco_reports(dir.path, run);

      const auto& st = run.final_state;
      const auto noisy = ds.train_noisy_labels();
      const auto fit = baselines::fit_gmm_em(st.n_losses);
      const auto mask = baselines::small_loss_select(st.n_losses, fit);
      write_file(dir.path / "decisions.csv", [&](std::ostream& o) {
        report::write_decisions_header(o);
        report::write_decisions_csv(st.decisions, st.epoch, o);
      });
      write_file(dir.path / "gmm_selection.csv", [&](std::ostream& o) {
        report::write_decisions_header(o);
        report::write_gmm_mask_csv(mask.clean, noisy, st.epoch, o);
      });
      write_file(dir.path / "loss_histogram.csv", [&](std::ostream& o) {
        metrics::write_histogram_csv(metrics::loss_histogram(st.n_losses, st.decisions), o);
      });

      auto s = summary_header(dir, "train-asyco", cfg);
      for (const auto& [k, v] : run.report.summary.items()) s[k] = v;
      write_file(dir.path / "summary.json", [&](std::ostream& o) { report::write_summary_json(s, o); });
    } catch (const nn::DivergenceError& e) {
      json d = summary_header(dir, "train-asyco", cfg);
      d["error"] = e.what();
      d["epoch"] = e.epoch();
      d["batch"] = e.batch();
      write_file(dir.path / "diagnostics.json", [&](std::ostream& o) { o << d.dump(2) << '\n'; });
      throw;
    }
  }
  return kOk;
}

int cmd_train_ce(const Options& opt) {
  const auto base = load_config(opt.common);
  for (const auto& cfg : per_seed(base, opt.common.seeds)) {
    const auto dir = open_run_dir(out_root(opt.common), "train-ce", cfg, "", opt.common.force);
    const auto ds = config::make_dataset(cfg);
    const auto run = baselines::train_plain_ce(ds, cfg.asyco.model, cfg.asyco.optim,
                                               cfg.asyco.total_epochs, cfg.asyco.seed);
    write_file(dir.path / "epochs.csv", [&](std::ostream& o) {
      csv::write_row(o, {"epoch", "test_acc"});
      for (std::size_t e = 0; e < run.test_accuracy.size(); ++e) {
        csv::write_row(o, {std::to_string(e), csv::fmt(run.test_accuracy[e])});
      }
    });
    auto s = summary_header(dir, "train-ce", cfg);
    s["realized_noise_rate"] = ds.realized_noise_rate();
    s["final_test_acc"] = run.test_accuracy.empty() ? 0.0 : run.test_accuracy.back();
    s["peak_epoch"] = metrics::peak_epoch(run.test_accuracy);
    write_file(dir.path / "summary.json", [&](std::ostream& o) { report::write_summary_json(s, o); });
    std::printf("train-ce %s: final test accuracy %.4f\n", dir.id.c_str(),
                s["final_test_acc"].get<double>());
  }
  return kOk;
}

std::vector<baselines::AblationVariant> parse_variant_list(const std::string& text) {
  std::vector<baselines::AblationVariant> out = {baselines::AblationVariant::Original};
  if (text == "all") {
    out.insert(out.end(), baselines::kTableVariants.begin(), baselines::kTableVariants.end());
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    baselines::AblationVariant v;
    try {
      v = baselines::parse_ablation(item);
    } catch (const std::invalid_argument& e) {
      throw config::ConfigError("variants", e.what());
    }
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  }
  return out;
}

int cmd_ablate(const Options& opt) {
  const auto base = load_config(opt.common);
  // Rejects unknown names before anything runs.
  const auto variants = parse_variant_list(opt.variants);
  std::string names;
  for (auto v : variants) names += (names.empty() ? "" : ",") + baselines::to_string(v);

  for (auto cfg : per_seed(base, opt.common.seeds)) {
    cfg.asyco.ablation = baselines::AblationVariant::Original;
    const auto dir =
        open_run_dir(out_root(opt.common), "ablate", cfg, "variants=" + names, opt.common.force);
    std::printf("ablate %s (seed %llu): %s\n", dir.id.c_str(),
                static_cast<unsigned long long>(cfg.asyco.seed), names.c_str());
    const auto ds = config::make_dataset(cfg);

    std::vector<std::vector<std::string>> rows;
    double original_acc = 0.0;
    for (auto v : variants) {
      auto vc = cfg;
      vc.asyco.ablation = v;
      const auto name = baselines::to_string(v);
      std::printf(" variant %s\n", name.c_str());
      const auto run = trainer::train_asyco(vc.asyco, ds);
      const auto sub = dir.path / name;
      fs::create_directories(sub);
      write_asyco_reports(sub, run);
      auto s = summary_header(dir, "ablate", vc);
      s["variant"] = name;
      for (const auto& [k, val] : run.report.summary.items()) s[k] = val;
      write_file(sub / "summary.json", [&](std::ostream& o) { report::write_summary_json(s, o); });

      const auto& last = run.report.rows.back();
      if (v == baselines::AblationVariant::Original) original_acc = last.test_acc;
      rows.push_back({name, csv::fmt(last.test_acc), csv::fmt(last.test_acc - original_acc),
                      csv::fmt(last.selection.f1), csv::fmt(last.relabel_topk_hit)});
      std::printf("  final acc %.4f\n", last.test_acc);
    }
    write_file(dir.path / "comparison.csv", [&](std::ostream& o) {
      csv::write_row(o, {"variant", "final_test_acc", "delta_vs_original", "final_sel_f1",
                         "final_relabel_topk_hit"});
      for (const auto& r : rows) csv::write_row(o, r);
    });
  }
  return kOk;
}

int cmd_compare_selection(const Options& opt) {
  const auto base = load_config(opt.common);
  for (const auto& cfg : per_seed(base, opt.common.seeds)) {
    const auto dir =
        open_run_dir(out_root(opt.common), "compare-selection", cfg, "", opt.common.force);
    std::printf("compare-selection %s\n", dir.id.c_str());
    const auto ds = config::make_dataset(cfg);
    const auto run = trainer::train_asyco(cfg.asyco, ds, print_row);
    write_asyco_reports(dir.path, run);
    write_file(dir.path / "selection.csv", [&](std::ostream& o) {
      csv::write_row(o, {"epoch", "phase", "method", "precision", "recall", "f1"});
      for (const auto& r : run.report.rows) {
        for (const auto& [method, sc] : {std::pair{"multi-view", r.selection},
                                         std::pair{"gmm-small-loss", r.gmm}}) {
          csv::write_row(o, {std::to_string(r.epoch), r.phase, method, csv::fmt(sc.precision),
                             csv::fmt(sc.recall), csv::fmt(sc.f1)});
        }
      }
    });
    const auto hist = metrics::subset_loss_histogram(run.classifier, ds, run.final_state.decisions);
    write_file(dir.path / "loss_histogram.csv",
               [&](std::ostream& o) { metrics::write_histogram_csv(hist, o); });
    auto s = summary_header(dir, "compare-selection", cfg);
    for (const auto& [k, v] : run.report.summary.items()) s[k] = v;
    write_file(dir.path / "summary.json", [&](std::ostream& o) { report::write_summary_json(s, o); });
  }
  return kOk;
}

int cmd_bench_selection(const Options& opt) {
  const auto base = load_config(opt.common);
  const std::string extra = "n=" + std::to_string(opt.bench_n) +
                            " classes=" + std::to_string(opt.bench_classes) +
                            " k=" + std::to_string(opt.bench_k) +
                            " repetitions=" + std::to_string(opt.bench_reps);
  for (const auto& cfg : per_seed(base, opt.common.seeds)) {
    const auto dir = open_run_dir(out_root(opt.common), "bench-selection", cfg, extra,
                                  opt.common.force);
    const auto input = metrics::SelectionBenchInput::synthetic(opt.bench_n, opt.bench_classes,
                                                               opt.bench_k, cfg.asyco.seed);
    const auto mv = metrics::time_selection_samples(input, metrics::SelectionMethod::MultiView,
                                                    opt.bench_reps);
    const auto gm = metrics::time_selection_samples(input, metrics::SelectionMethod::GmmSmallLoss,
                                                    opt.bench_reps);
    write_file(dir.path / "timing.csv", [&](std::ostream& o) {
      csv::write_row(o, {"method", "repetition", "ns"});
      for (std::size_t i = 0; i < mv.size(); ++i) {
        csv::write_row(o, {"multi-view", std::to_string(i), std::to_string(mv[i])});
      }
      for (std::size_t i = 0; i < gm.size(); ++i) {
        csv::write_row(o, {"gmm-small-loss", std::to_string(i), std::to_string(gm[i])});
      }
    });
    auto to_d = [](const std::vector<std::int64_t>& v) {
      return std::vector<double>(v.begin(), v.end());
    };
    const double mv_med = metrics::median(to_d(mv));
    const double gm_med = metrics::median(to_d(gm));
    auto s = summary_header(dir, "bench-selection", cfg);
    s["n"] = opt.bench_n;
    s["num_classes"] = opt.bench_classes;
    s["top_k"] = opt.bench_k;
    s["median_ns_multiview"] = mv_med;
    s["median_ns_gmm"] = gm_med;
    s["gmm_over_multiview"] = mv_med > 0 ? gm_med / mv_med : 0.0;
    write_file(dir.path / "summary.json", [&](std::ostream& o) { report::write_summary_json(s, o); });
    std::printf("bench-selection n=%zu: multi-view %.3f ms, gmm %.3f ms\n", opt.bench_n,
                mv_med / 1e6, gm_med / 1e6);
  }
  return kOk;
}

int cmd_ce_vs_bce(const Options& opt) {
  const auto base = load_config(opt.common);
  for (const auto& cfg : per_seed(base, opt.common.seeds)) {
    const auto dir = open_run_dir(out_root(opt.common), "ce-vs-bce", cfg, "", opt.common.force);
    const auto ds = config::make_dataset(cfg);
    const auto curves = metrics::ce_vs_bce_curves(ds, cfg.asyco.model, cfg.asyco.optim,
                                                  cfg.asyco.total_epochs, cfg.asyco.seed);
    write_file(dir.path / "curves.csv", [&](std::ostream& o) {
      csv::write_row(o, {"epoch", "ce_test_acc", "bce_test_acc"});
      for (std::size_t e = 0; e < curves.ce.size(); ++e) {
        csv::write_row(o, {std::to_string(e), csv::fmt(curves.ce[e]), csv::fmt(curves.bce[e])});
      }
    });
    auto s = summary_header(dir, "ce-vs-bce", cfg);
    s["ce_peak_epoch"] = metrics::peak_epoch(curves.ce);
    s["bce_peak_epoch"] = metrics::peak_epoch(curves.bce);
    s["ce_peak_to_final_drop"] = metrics::peak_to_final_drop(curves.ce);
    s["bce_peak_to_final_drop"] = metrics::peak_to_final_drop(curves.bce);
    write_file(dir.path / "summary.json", [&](std::ostream& o) { report::write_summary_json(s, o); });
    std::printf("ce-vs-bce %s: CE peak epoch %zu, BCE peak epoch %zu\n", dir.id.c_str(),
                s["ce_peak_epoch"].get<std::size_t>(), s["bce_peak_epoch"].get<std::size_t>());
  }
  return kOk;
}

void write_error(const fs::path& root, const json& err) {
  std::error_code ec;
  fs::create_directories(root, ec);
  std::ofstream out(root / "error.json", std::ios::binary);
  if (out) out << err.dump(2) << '\n';
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Asymmetric co-teaching on synthetic noisy-label data"};
  app.require_subcommand(1);
  Options opt;

  struct Entry {
    const char* name;
    const char* help;
    int (*fn)(const Options&);
  };
  const Entry entries[] = {
      {"gen-data", "generate a noisy blob dataset", cmd_gen_data},
      {"train-asyco", "train with multi-view consensus co-teaching", cmd_train_asyco},
      {"train-ce", "train a plain cross-entropy baseline", cmd_train_ce},
      {"ablate", "run ablation variants on a shared dataset", cmd_ablate},
      {"compare-selection", "multi-view vs small-loss selection per epoch", cmd_compare_selection},
      {"bench-selection", "time multi-view and small-loss selection", cmd_bench_selection},
      {"ce-vs-bce", "accuracy curves for CE and BCE training", cmd_ce_vs_bce},
  };
  std::vector<std::pair<CLI::App*, const Entry*>> subs;
  for (const auto& e : entries) {
    auto* sub = app.add_subcommand(e.name, e.help);
    add_common(sub, opt.common);
    subs.emplace_back(sub, &e);
  }
  app.get_subcommand("ablate")->add_option("--variants", opt.variants,
                                           "comma-separated variant ids, or 'all'");
  auto* bench = app.get_subcommand("bench-selection");
  bench->add_option("--n", opt.bench_n, "number of samples");
  bench->add_option("--classes", opt.bench_classes, "number of classes");
  bench->add_option("--k", opt.bench_k, "top-K of the reference view");
  bench->add_option("--repetitions", opt.bench_reps, "timed repetitions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  const Entry* chosen = nullptr;
  for (const auto& [sub, e] : subs) {
    if (sub->parsed()) chosen = e;
  }
  const fs::path root = out_root(opt.common);
  try {
    const int code = chosen->fn(opt);
    std::error_code ec;
    fs::remove(root / "error.json", ec);
    return code;
  } catch (const config::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    write_error(root, {{"error", "config"}, {"key", e.key()}, {"message", e.what()}});
    return kBadConfig;
  } catch (const nn::DivergenceError& e) {
    std::fprintf(stderr, "training diverged: %s\n", e.what());
    write_error(root, {{"error", "divergence"},
                       {"message", e.what()},
                       {"epoch", e.epoch()},
                       {"batch", e.batch()}});
    return kDiverged;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    write_error(root, {{"error", "failure"}, {"message", e.what()}});
    return kFailure;
  }
}

}  // namespace asyco::cli
