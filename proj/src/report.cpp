#include "bcidal/report.hpp"

#include "bcidal/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

namespace bcidal {

using nlohmann::json;

namespace {

template <class T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* key) { return k == key; }))
      throw ConfigError("unknown config key '" + where + k + "'");
  }
}

void run_parallel(std::size_t n_items, int threads, const std::function<void(std::size_t)>& body) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max<std::size_t>(n_items, 1));
  std::atomic<std::size_t> next{0};
  auto loop = [&] {
    for (std::size_t i = next++; i < n_items; i = next++) body(i);
  };
  if (workers <= 1) {
    loop();
    return;
  }
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(loop);
}

// Subject ids that are plain integers sort numerically, otherwise lexically.
bool subject_less(const std::string& a, const std::string& b) {
  auto numeric = [](const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
  };
  if (numeric(a) && numeric(b) && a.size() != b.size()) return a.size() < b.size();
  return a < b;
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

json cell_json(const TableCell& c) {
  return {{"mean_pct", c.mean_pct}, {"std_pct", c.std_pct}, {"n_sessions", c.n_sessions}};
}

TableCell summarize(const std::vector<double>& errors) {
  TableCell c;
  c.n_sessions = static_cast<int>(errors.size());
  if (errors.empty()) {
    c.mean_pct = std::numeric_limits<double>::quiet_NaN();
    c.std_pct = std::numeric_limits<double>::quiet_NaN();
    return c;
  }
  c.mean_pct = 100.0 * eval::mean(errors);
  c.std_pct = 100.0 * eval::sample_std(errors);
  return c;
}

json stats_json(const StatsSummary& s) {
  json pairs = json::array();
  for (const auto& p : s.pairs) {
    pairs.push_back({{"a", p.a},
                     {"b", p.b},
                     {"t", p.test.t},
                     {"df", p.test.df},
                     {"p", p.test.p_two_sided},
                     {"p_bonferroni", p.p_bonferroni}});
  }
  return {{"subjects", s.subjects},
          {"methods", s.methods},
          {"anova",
           {{"f_stat", s.anova.f_stat},
            {"df_effect", s.anova.df_effect},
            {"df_error", s.anova.df_error},
            {"p_value", s.anova.p_value}}},
          {"bonferroni_m", s.pairs.size()},
          {"pairwise", std::move(pairs)}};
}

}  // namespace

RunConfig run_config_from_json(const std::string& text, RunConfig cfg) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  try {
    reject_unknown(j,
                   {"methods", "input_rate_hz", "target_rate_hz", "bandpass", "antialias_taps",
                    "antialias_cutoff_fraction", "outer_folds", "inner_folds", "margin", "csp_patterns_per_class",
                    "t_prime", "block_scales", "solver", "lambda_grid_size", "lambda_min_ratio", "synth", "subjects",
                    "sessions", "seed", "threads", "report_prefix"},
                   "");
    if (j.contains("methods")) {
      cfg.methods.clear();
      for (const auto& m : j.at("methods")) cfg.methods.push_back(method_from_string(m.get<std::string>()));
    }
    take(j, "input_rate_hz", cfg.input_rate_hz);
    take(j, "target_rate_hz", cfg.target_rate_hz);
    if (j.contains("bandpass")) {
      const json& b = j.at("bandpass");
      reject_unknown(b, {"low_hz", "high_hz", "prototype_order"}, "bandpass.");
      take(b, "low_hz", cfg.bandpass.low_hz);
      take(b, "high_hz", cfg.bandpass.high_hz);
      take(b, "prototype_order", cfg.bandpass.prototype_order);
    }
    take(j, "antialias_taps", cfg.antialias_taps);
    take(j, "antialias_cutoff_fraction", cfg.antialias_cutoff_fraction);
    take(j, "outer_folds", cfg.outer_folds);
    take(j, "inner_folds", cfg.method.inner_folds);
    take(j, "margin", cfg.method.margin);
    take(j, "csp_patterns_per_class", cfg.method.csp_patterns_per_class);
    take(j, "t_prime", cfg.method.t_prime);
    take(j, "block_scales", cfg.method.block_scales);
    take(j, "lambda_grid_size", cfg.method.lambda_grid_size);
    take(j, "lambda_min_ratio", cfg.method.lambda_min_ratio);
    if (j.contains("solver")) {
      const json& s = j.at("solver");
      reject_unknown(s, {"eta0", "eta_growth", "eta_max", "rel_gap_tol", "max_outer", "inner_tol", "inner_max_newton"},
                     "solver.");
      auto& o = cfg.method.solver;
      take(s, "eta0", o.eta0);
      take(s, "eta_growth", o.eta_growth);
      take(s, "eta_max", o.eta_max);
      take(s, "rel_gap_tol", o.rel_gap_tol);
      take(s, "max_outer", o.max_outer);
      take(s, "inner_tol", o.inner_tol);
      take(s, "inner_max_newton", o.inner_max_newton);
    }
    if (j.contains("synth")) {
      const json& s = j.at("synth");
      reject_unknown(s,
                     {"n_channels", "fs_hz", "trial_seconds", "trials_per_class", "mu_freq_hz", "erd_depth",
                      "active_channels", "mixing_spread", "noise_scale", "mu_amplitude", "amplitude_jitter"},
                     "synth.");
      auto& o = cfg.synth;
      take(s, "n_channels", o.n_channels);
      take(s, "fs_hz", o.fs_hz);
      take(s, "trial_seconds", o.trial_seconds);
      take(s, "trials_per_class", o.trials_per_class);
      take(s, "mu_freq_hz", o.mu_freq_hz);
      take(s, "erd_depth", o.erd_depth);
      take(s, "active_channels", o.active_channels);
      take(s, "mixing_spread", o.mixing_spread);
      take(s, "noise_scale", o.noise_scale);
      take(s, "mu_amplitude", o.mu_amplitude);
      take(s, "amplitude_jitter", o.amplitude_jitter);
    }
    take(j, "subjects", cfg.subjects);
    take(j, "sessions", cfg.sessions);
    take(j, "seed", cfg.seed);
    take(j, "threads", cfg.threads);
    take(j, "report_prefix", cfg.report_prefix);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

std::string run_config_to_json(const RunConfig& cfg) {
  json methods = json::array();
  for (Method m : cfg.methods) methods.push_back(method_tag(m));
  const auto& o = cfg.method.solver;
  const auto& s = cfg.synth;
  json j = {{"methods", methods},
            {"input_rate_hz", cfg.input_rate_hz},
            {"target_rate_hz", cfg.target_rate_hz},
            {"bandpass",
             {{"low_hz", cfg.bandpass.low_hz},
              {"high_hz", cfg.bandpass.high_hz},
              {"prototype_order", cfg.bandpass.prototype_order}}},
            {"antialias_taps", cfg.antialias_taps},
            {"antialias_cutoff_fraction", cfg.antialias_cutoff_fraction},
            {"outer_folds", cfg.outer_folds},
            {"inner_folds", cfg.method.inner_folds},
            {"margin", cfg.method.margin},
            {"csp_patterns_per_class", cfg.method.csp_patterns_per_class},
            {"t_prime", cfg.method.t_prime},
            {"block_scales", cfg.method.block_scales},
            {"lambda_grid_size", cfg.method.lambda_grid_size},
            {"lambda_min_ratio", cfg.method.lambda_min_ratio},
            {"solver",
             {{"eta0", o.eta0},
              {"eta_growth", o.eta_growth},
              {"eta_max", o.eta_max},
              {"rel_gap_tol", o.rel_gap_tol},
              {"max_outer", o.max_outer},
              {"inner_tol", o.inner_tol},
              {"inner_max_newton", o.inner_max_newton}}},
            {"synth",
             {{"n_channels", s.n_channels},
              {"fs_hz", s.fs_hz},
              {"trial_seconds", s.trial_seconds},
              {"trials_per_class", s.trials_per_class},
              {"mu_freq_hz", s.mu_freq_hz},
              {"erd_depth", s.erd_depth},
              {"active_channels", s.active_channels},
              {"mixing_spread", s.mixing_spread},
              {"noise_scale", s.noise_scale},
              {"mu_amplitude", s.mu_amplitude},
              {"amplitude_jitter", s.amplitude_jitter}}},
            {"subjects", cfg.subjects},
            {"sessions", cfg.sessions},
            {"seed", cfg.seed},
            {"threads", cfg.threads},
            {"report_prefix", cfg.report_prefix}};
  return j.dump(2) + "\n";
}

Preprocessing preprocessing_for(const RunConfig& cfg, double input_rate_hz) {
  Preprocessing p = default_preprocessing(input_rate_hz, cfg.target_rate_hz);
  p.bandpass.low_hz = cfg.bandpass.low_hz;
  p.bandpass.high_hz = cfg.bandpass.high_hz;
  p.bandpass.prototype_order = cfg.bandpass.prototype_order;
  if (p.resample) {
    p.resample->antialias_taps = cfg.antialias_taps;
    p.resample->antialias_cutoff_fraction = cfg.antialias_cutoff_fraction;
  }
  return p;
}

std::uint64_t session_seed(const RunConfig& cfg, int subject, int session) {
  return cfg.seed + static_cast<std::uint64_t>((subject - 1) * cfg.sessions + (session - 1));
}

void write_synthetic_dataset(const RunConfig& cfg, const std::filesystem::path& root,
                             const std::function<void(const std::string&)>& progress) {
  if (cfg.subjects < 1 || cfg.sessions < 1) throw ConfigError("synth: need at least one subject and one session");
  for (int s = 1; s <= cfg.subjects; ++s) {
    for (int k = 1; k <= cfg.sessions; ++k) {
      synth::SynthSpec spec = cfg.synth;
      spec.seed = session_seed(cfg, s, k);
      const auto dir = session_dir(root, std::to_string(s), k);
      synth::save_generated(synth::generate_session(spec), dir);
      if (progress) progress("wrote " + dir.string() + " (seed " + std::to_string(spec.seed) + ")");
    }
  }
}

double round_half_away(double x, int decimals) {
  const long double scale = std::pow(10.0L, decimals);
  const long double r = std::round(static_cast<long double>(x) * scale) / scale;
  const auto out = static_cast<double>(r);
  return out == 0.0 ? 0.0 : out;
}

std::string format_cell(double mean_pct, double std_pct) {
  if (std::isnan(mean_pct)) return "n/a";
  return fmt("%.1f", round_half_away(mean_pct, 1)) + " ± " + fmt("%.1f", round_half_away(std_pct, 1));
}

std::string cv_report_json(const CvReport& r) {
  json j = {{"method", r.method},
            {"fold_errors", r.fold_errors},
            {"mean_error", r.mean_error},
            {"std_error", r.std_error},
            {"chosen_lambdas", r.chosen_lambdas},
            {"non_converged", r.non_converged}};
  return j.dump(2) + "\n";
}

StatsSummary compute_stats(const Eigen::MatrixXd& mean_errors, std::vector<std::string> methods,
                           std::vector<std::string> subjects) {
  if (mean_errors.rows() < 2 || mean_errors.cols() < 2)
    throw DataError("statistics need at least two subjects and two methods");
  StatsSummary s;
  s.methods = std::move(methods);
  s.subjects = std::move(subjects);
  s.mean_errors = mean_errors;
  s.anova = eval::rm_anova(mean_errors);
  std::vector<double> raw_p;
  for (Eigen::Index a = 0; a < mean_errors.cols(); ++a) {
    for (Eigen::Index b = a + 1; b < mean_errors.cols(); ++b) {
      const Eigen::VectorXd ca = mean_errors.col(a);
      const Eigen::VectorXd cb = mean_errors.col(b);
      PairwiseTest p;
      p.a = s.methods[static_cast<std::size_t>(a)];
      p.b = s.methods[static_cast<std::size_t>(b)];
      p.test = eval::paired_ttest(std::span<const double>(ca.data(), static_cast<std::size_t>(ca.size())),
                                  std::span<const double>(cb.data(), static_cast<std::size_t>(cb.size())));
      raw_p.push_back(p.test.p_two_sided);
      s.pairs.push_back(std::move(p));
    }
  }
  const auto adjusted = eval::bonferroni_adjust(raw_p, static_cast<int>(raw_p.size()));
  for (std::size_t i = 0; i < s.pairs.size(); ++i) s.pairs[i].p_bonferroni = adjusted[i];
  return s;
}

CompareReport run_compare(const RunConfig& cfg, const std::filesystem::path& dataset_root,
                          const std::function<void(const std::string&)>& progress) {
  if (cfg.methods.empty()) throw ConfigError("no methods selected");
  const auto listing = list_dataset_sessions(dataset_root);
  struct Slot {
    std::string subject;
    std::string name;
    std::filesystem::path path;
    std::optional<Session> pre;
    std::string error;
  };
  std::vector<std::string> subjects;
  for (const auto& [subject, paths] : listing)
    if (!paths.empty()) subjects.push_back(subject);
  std::sort(subjects.begin(), subjects.end(), subject_less);
  if (subjects.empty()) throw DataError("dataset is empty: no subject_*/session_* directories under " + dataset_root.string());

  std::vector<Slot> slots;
  for (const auto& subject : subjects)
    for (const auto& p : listing.at(subject)) slots.push_back({subject, p.filename().string(), p, std::nullopt, {}});

  std::mutex progress_mutex;
  auto note = [&](const std::string& msg) {
    if (!progress) return;
    std::lock_guard lock(progress_mutex);
    progress(msg);
  };

  run_parallel(slots.size(), cfg.threads, [&](std::size_t i) {
    Slot& s = slots[i];
    try {
      const Session raw = load_session(s.path);
      s.pre = preprocess(raw, preprocessing_for(cfg, raw.sampling_rate_hz));
    } catch (const std::exception& e) {
      s.error = e.what();
      note("subject " + s.subject + " " + s.name + ": " + s.error);
    }
  });

  const std::size_t n_methods = cfg.methods.size();
  std::vector<std::optional<CvReport>> results(slots.size() * n_methods);
  std::vector<std::string> errors(slots.size() * n_methods);
  std::atomic<std::size_t> done{0};
  run_parallel(results.size(), cfg.threads, [&](std::size_t item) {
    const Slot& s = slots[item / n_methods];
    const Method m = cfg.methods[item % n_methods];
    if (!s.pre) return;
    try {
      CvPlan plan;
      plan.n_trials = s.pre->n_trials();
      plan.k_folds = cfg.outer_folds;
      plan.margin = cfg.method.margin;
      results[item] = cross_validate_method(*s.pre, m, plan, cfg.method);
    } catch (const std::exception& e) {
      errors[item] = e.what();
    }
    note("[" + std::to_string(++done) + "/" + std::to_string(results.size()) + "] subject " + s.subject + " " + s.name +
         " " + method_tag(m) + (errors[item].empty() ? "" : ": " + errors[item]));
  });

  CompareReport rep;
  rep.methods = cfg.methods;
  std::vector<std::vector<double>> all_errors(n_methods);
  for (const auto& subject : subjects) {
    std::vector<std::vector<double>> per_method(n_methods);
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const Slot& s = slots[i];
      if (s.subject != subject) continue;
      if (!s.pre) {
        rep.failures.push_back({s.subject, s.name, "", s.error});
        continue;
      }
      for (std::size_t m = 0; m < n_methods; ++m) {
        const std::size_t item = i * n_methods + m;
        if (!results[item]) {
          rep.failures.push_back({s.subject, s.name, method_tag(cfg.methods[m]), errors[item]});
          continue;
        }
        per_method[m].push_back(results[item]->mean_error);
        all_errors[m].push_back(results[item]->mean_error);
        rep.sessions.push_back({s.subject, s.name, *results[item]});
      }
    }
    TableRow row;
    row.subject = subject;
    for (const auto& e : per_method) row.cells.push_back(summarize(e));
    rep.rows.push_back(std::move(row));
  }
  rep.average.subject = "Average";
  for (const auto& e : all_errors) rep.average.cells.push_back(summarize(e));

  // Statistics on the per-subject means, restricted to complete rows.
  std::vector<std::string> stat_subjects;
  std::vector<const TableRow*> complete;
  for (const auto& row : rep.rows) {
    if (std::all_of(row.cells.begin(), row.cells.end(), [](const TableCell& c) { return c.n_sessions > 0; })) {
      stat_subjects.push_back(row.subject);
      complete.push_back(&row);
    }
  }
  if (complete.size() >= 2 && n_methods >= 2) {
    Eigen::MatrixXd means(static_cast<Eigen::Index>(complete.size()), static_cast<Eigen::Index>(n_methods));
    for (std::size_t r = 0; r < complete.size(); ++r)
      for (std::size_t m = 0; m < n_methods; ++m)
        means(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(m)) = complete[r]->cells[m].mean_pct / 100.0;
    std::vector<std::string> tags;
    for (Method m : cfg.methods) tags.push_back(method_tag(m));
    rep.stats = compute_stats(means, std::move(tags), std::move(stat_subjects));
  }
  return rep;
}

std::string compare_report_json(const CompareReport& rep) {
  json methods = json::array();
  for (Method m : rep.methods) methods.push_back(method_tag(m));
  json sessions = json::array();
  for (const auto& s : rep.sessions) {
    sessions.push_back({{"subject", s.subject},
                        {"session", s.session},
                        {"method", s.report.method},
                        {"fold_errors", s.report.fold_errors},
                        {"mean_error", s.report.mean_error},
                        {"std_error", s.report.std_error},
                        {"chosen_lambdas", s.report.chosen_lambdas},
                        {"non_converged", s.report.non_converged}});
  }
  json failures = json::array();
  for (const auto& f : rep.failures)
    failures.push_back({{"subject", f.subject}, {"session", f.session}, {"method", f.method}, {"error", f.error}});
  auto row_json = [](const TableRow& row) {
    json cells = json::array();
    for (const auto& c : row.cells) cells.push_back(cell_json(c));
    return json{{"subject", row.subject}, {"cells", std::move(cells)}};
  };
  json rows = json::array();
  for (const auto& r : rep.rows) rows.push_back(row_json(r));
  json j = {{"format", "bcidal-compare"},
            {"version", 1},
            {"methods", methods},
            {"table", {{"rows", std::move(rows)}, {"average", row_json(rep.average)}}},
            {"sessions", std::move(sessions)},
            {"failures", std::move(failures)},
            {"stats", rep.stats ? stats_json(*rep.stats) : json(nullptr)}};
  return j.dump(2) + "\n";
}

std::string compare_report_markdown(const CompareReport& rep) {
  std::string out = "## Misclassification error (%) and standard deviation\n\n| Subject |";
  for (Method m : rep.methods) out += " " + method_label(m) + " |";
  out += "\n|---|";
  for (std::size_t i = 0; i < rep.methods.size(); ++i) out += "---|";
  out += "\n";
  auto emit_row = [&](const TableRow& row, bool mark_min) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : row.cells)
      if (c.n_sessions > 0) best = std::min(best, c.mean_pct);
    out += "| " + row.subject + " |";
    for (const auto& c : row.cells) {
      const std::string text = format_cell(c.mean_pct, c.std_pct);
      out += (mark_min && c.n_sessions > 0 && c.mean_pct == best) ? " **" + text + "** |" : " " + text + " |";
    }
    out += "\n";
  };
  for (const auto& r : rep.rows) emit_row(r, true);
  emit_row(rep.average, false);
  if (rep.stats) out += "\n" + stats_markdown(*rep.stats);
  if (!rep.failures.empty()) {
    out += "\n## Failures\n\n";
    for (const auto& f : rep.failures) {
      out += "- subject " + f.subject + " " + f.session;
      if (!f.method.empty()) out += " " + f.method;
      out += ": " + f.error + "\n";
    }
  }
  return out;
}

StatsSummary stats_from_report_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("report is not valid JSON: ") + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "bcidal-compare") throw DataError("not a bcidal compare report");
    const auto methods = j.at("methods").get<std::vector<std::string>>();
    std::vector<std::string> subjects;
    std::vector<std::vector<double>> rows;
    for (const auto& row : j.at("table").at("rows")) {
      std::vector<double> vals;
      bool complete = true;
      for (const auto& c : row.at("cells")) {
        if (c.at("n_sessions").get<int>() == 0) complete = false;
        else vals.push_back(c.at("mean_pct").get<double>() / 100.0);
      }
      if (!complete) continue;
      if (vals.size() != methods.size()) throw DataError("row width does not match the method list");
      subjects.push_back(row.at("subject").get<std::string>());
      rows.push_back(std::move(vals));
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(methods.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
      for (std::size_t c = 0; c < methods.size(); ++c) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return compute_stats(m, methods, std::move(subjects));
  } catch (const json::exception& e) {
    throw DataError(std::string("report schema violation: ") + e.what());
  }
}

std::string stats_markdown(const StatsSummary& s) {
  std::string out = "## Repeated-measures ANOVA\n\n";
  out += "F(" + std::to_string(s.anova.df_effect) + ", " + std::to_string(s.anova.df_error) +
         ") = " + fmt("%.3f", s.anova.f_stat) + ", p = " + fmt("%.4g", s.anova.p_value) + " (" +
         std::to_string(s.subjects.size()) + " subjects)\n\n";
  out += "## Pairwise paired t-tests (Bonferroni, m = " + std::to_string(s.pairs.size()) + ")\n\n";
  out += "| Comparison | t | df | p | p (Bonferroni) |\n|---|---|---|---|---|\n";
  for (const auto& p : s.pairs) {
    out += "| " + p.a + " vs " + p.b + " | " + fmt("%.3f", p.test.t) + " | " + std::to_string(p.test.df) + " | " +
           fmt("%.4g", p.test.p_two_sided) + " | " + fmt("%.4g", p.p_bonferroni) + " |\n";
  }
  return out;
}

}  // namespace bcidal
