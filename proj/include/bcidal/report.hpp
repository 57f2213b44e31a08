#pragma once

#include "bcidal/pipeline.hpp"
#include "bcidal/synthgen.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace bcidal {

/// Everything a CLI run can be configured with. The JSON config file uses
/// these field names; nested objects for bandpass, resample, solver, synth.
struct RunConfig {
  std::vector<Method> methods = all_methods();
  double input_rate_hz = 250.0;
  double target_rate_hz = 128.0;
  signal::BandpassSpec bandpass{};
  int antialias_taps = 127;
  double antialias_cutoff_fraction = 0.9;
  int outer_folds = 10;
  MethodConfig method{};
  synth::SynthSpec synth{};
  int subjects = 7;
  int sessions = 5;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: hardware concurrency
  std::string report_prefix = "report";
};

/// Overlays the keys present in `text` onto `base`. Unknown keys are a ConfigError.
RunConfig run_config_from_json(const std::string& text, RunConfig base = {});
std::string run_config_to_json(const RunConfig& cfg);

Preprocessing preprocessing_for(const RunConfig& cfg, double input_rate_hz);

/// Seed of session k of subject s (both from 1): cfg.seed + (s - 1) * sessions + (k - 1).
std::uint64_t session_seed(const RunConfig& cfg, int subject, int session);

/// Writes cfg.subjects x cfg.sessions generated sessions under `root`.
void write_synthetic_dataset(const RunConfig& cfg, const std::filesystem::path& root,
                             const std::function<void(const std::string&)>& progress = {});

/// "37.6 ± 8.7"; both values rounded half away from zero to one decimal.
std::string format_cell(double mean_pct, double std_pct);
double round_half_away(double x, int decimals);

std::string cv_report_json(const CvReport& report);

struct SessionEntry {
  std::string subject;
  std::string session;
  CvReport report;
};

struct SessionFailure {
  std::string subject;
  std::string session;
  std::string method;  // empty when the session itself failed to load
  std::string error;
};

struct TableCell {
  double mean_pct = 0.0;
  double std_pct = 0.0;
  int n_sessions = 0;
};

struct TableRow {
  std::string subject;
  std::vector<TableCell> cells;  // one per method, config order
};

struct PairwiseTest {
  std::string a;
  std::string b;
  eval::TTestResult test;
  double p_bonferroni = 1.0;
};

struct StatsSummary {
  std::vector<std::string> methods;   // tags
  std::vector<std::string> subjects;
  Eigen::MatrixXd mean_errors;        // subjects × methods, fractions
  eval::AnovaResult anova;
  std::vector<PairwiseTest> pairs;
};

struct CompareReport {
  std::vector<Method> methods;
  std::vector<SessionEntry> sessions;  // subject, session, method order
  std::vector<SessionFailure> failures;
  std::vector<TableRow> rows;
  TableRow average;
  std::optional<StatsSummary> stats;
};

/// RM-ANOVA and all pairwise paired t-tests (Bonferroni, m = number of pairs)
/// on a subjects × methods matrix. Needs at least two subjects and methods.
StatsSummary compute_stats(const Eigen::MatrixXd& mean_errors, std::vector<std::string> methods,
                           std::vector<std::string> subjects);

/// Cross-validates every method on every session below `dataset_root`.
/// Sessions that fail to load or preprocess are listed in `failures`.
CompareReport run_compare(const RunConfig& cfg, const std::filesystem::path& dataset_root,
                          const std::function<void(const std::string&)>& progress = {});

std::string compare_report_json(const CompareReport& report);
std::string compare_report_markdown(const CompareReport& report);

/// Re-derives the statistics from a JSON compare report.
StatsSummary stats_from_report_json(const std::string& text);
std::string stats_markdown(const StatsSummary& stats);

}  // namespace bcidal
