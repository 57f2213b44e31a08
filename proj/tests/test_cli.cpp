#include <doctest.h>

#include "bcidal/error.hpp"
#include "bcidal/model_io.hpp"
#include "bcidal/pipeline.hpp"
#include "bcidal/report.hpp"
#include "bcidal/synthgen.hpp"
#include "helpers.hpp"

#include <json.hpp>

#include <cmath>
#include <regex>

using namespace bcidal;
using json = nlohmann::json;

namespace {

MethodConfig quick_method() {
  MethodConfig m;
  m.lambda_grid_size = 6;
  m.inner_folds = 3;
  m.margin = 2;
  return m;
}

Session synth_session(double fs, double depth, std::uint64_t seed, int per_class = 30, double noise = 1.0) {
  synth::SynthSpec spec;
  spec.fs_hz = fs;
  spec.erd_depth = depth;
  spec.seed = seed;
  spec.trials_per_class = per_class;
  spec.noise_scale = noise;
  return synth::generate_session(spec).session;
}

}  // namespace

TEST_CASE("method tags") {
  for (Method m : all_methods()) {
    CHECK(method_from_string(method_tag(m)) == m);
    CHECK(method_from_string(method_label(m)) == m);
  }
  CHECK(method_tag(Method::DalGlr) == "dal-glr");
  CHECK(method_label(Method::DalGlr) == "DAL-GLR");
  CHECK_THROWS_WITH_AS(method_from_string("svm"), doctest::Contains("svm"), ConfigError);
}

TEST_CASE("preprocessing") {
  const Preprocessing p = default_preprocessing();
  REQUIRE(p.resample.has_value());
  CHECK(p.resample->from_hz == 250.0);
  CHECK(p.resample->to_hz == 128.0);
  CHECK(p.bandpass.sampling_rate_hz == 128.0);
  CHECK_FALSE(default_preprocessing(128.0).resample.has_value());

  synth::SynthSpec spec;
  spec.trials_per_class = 2;
  const Session raw = synth::generate_session(spec).session;
  const Session pre = preprocess(raw, p);
  CHECK(pre.sampling_rate_hz == 128.0);
  CHECK(pre.n_samples() == 512);
  CHECK(pre.n_trials() == 4);
  CHECK_THROWS_WITH_AS(preprocess(raw, default_preprocessing(128.0)), doctest::Contains("preprocessing mismatch"),
                       DataError);
}

TEST_CASE("model files round-trip") {
  const Session raw = synth_session(250.0, 0.5, 4);
  const Preprocessing pre = default_preprocessing();
  const auto dir = testutil::temp_dir("models");
  for (Method m : all_methods()) {
    const TrainedModel model = train_model(raw, m, pre, quick_method(), is_dal(m) ? std::optional<double>(0.2) : std::nullopt);
    const auto path = dir / (method_tag(m) + ".json");
    emit_model(model, path);
    const TrainedModel back = load_model(path);
    CHECK(serialize_model(back) == serialize_model(model));
    CHECK(back.method == m);
    CHECK(back.preprocessing == pre);
    // Identical predictions from the reloaded model.
    const auto a = predict_session(model, raw), b = predict_session(back, raw);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].label == b[i].label);
      CHECK(a[i].score == b[i].score);
    }
    if (is_dal(m)) {
      const auto& clf = std::get<DalClassifier>(back.body);
      CHECK(clf.lambda_ratio == 0.2);
      CHECK(clf.preset == dal_preset(m));
    }
  }
}

TEST_CASE("model file errors") {
  const Session raw = synth_session(250.0, 0.5, 5);
  const TrainedModel model = train_model(raw, Method::CspLda, default_preprocessing(), quick_method());
  json j = json::parse(serialize_model(model));

  json bad_tag = j;
  bad_tag["method"] = "dal-xyz";
  CHECK_THROWS_WITH_AS(parse_model(bad_tag.dump()), doctest::Contains("dal-xyz"), ConfigError);

  json bad_version = j;
  bad_version["version"] = kModelFormatVersion + 1;
  CHECK_THROWS_AS(parse_model(bad_version.dump()), ConfigError);

  json missing = j;
  missing.erase("lda");
  CHECK_THROWS_WITH_AS(parse_model(missing.dump()), doctest::Contains("schema violation"), DataError);
  CHECK_THROWS_AS(parse_model("{not json"), DataError);
  CHECK_THROWS_AS(load_model("/nonexistent/model.json"), ConfigError);
}

TEST_CASE("model trained at 128 Hz refuses a 250 Hz session") {
  const Session at128 = synth_session(128.0, 0.5, 6);
  const TrainedModel model = train_model(at128, Method::CspLda, default_preprocessing(128.0), quick_method());
  const TrainedModel back = parse_model(serialize_model(model));
  CHECK_THROWS_WITH_AS(predict_session(back, synth_session(250.0, 0.5, 6)), doctest::Contains("preprocessing mismatch"),
                       DataError);
  CHECK_NOTHROW(predict_session(back, at128));
}

TEST_CASE("cross-validation reports") {
  const Session pre = preprocess(synth_session(250.0, 0.9, 8, 30, 0.1), default_preprocessing());
  const CvPlan plan{pre.n_trials(), 10, 5};
  SUBCASE("strong planted effect") {
    for (Method m : {Method::CspLda, Method::DalGlr}) {
      const CvReport r = cross_validate_method(pre, m, plan, MethodConfig{});
      CHECK(r.fold_errors.size() == 10u);
      double s = 0.0;
      for (double e : r.fold_errors) s += e;
      CHECK(r.mean_error == doctest::Approx(s / 10.0).epsilon(1e-12));
      CHECK(r.mean_error <= (m == Method::CspLda ? 0.05 : 0.1));
      CHECK(r.method == method_tag(m));
      if (is_dal(m)) CHECK(r.chosen_lambdas.size() == 10u);
    }
  }
  SUBCASE("plan must match the session") {
    const CvPlan wrong{pre.n_trials() + 1, 10, 5};
    CHECK_THROWS_AS(cross_validate_method(pre, Method::CspLda, wrong, MethodConfig{}), ConfigError);
  }
}

TEST_CASE("lambda selection only reads its training rows") {
  const Session pre = preprocess(synth_session(250.0, 0.5, 9), default_preprocessing());
  const auto spec = feature_map_for(Method::DalGlr, quick_method());
  auto raw = dal::build_raw_feature_blocks(pre, spec);
  const auto folds = eval::make_blockwise_folds(pre.n_trials(), 10, 5);
  const auto& fold = folds[4];
  const auto first = select_lambda(raw, fold.train, dal::Preset::GLR, quick_method());
  // Scramble every trial outside the training rows.
  std::mt19937_64 rng(1);
  for (int i = 0; i < pre.n_trials(); ++i) {
    if (std::find(fold.train.begin(), fold.train.end(), i) != fold.train.end()) continue;
    raw[static_cast<std::size_t>(i)].blocks[0] = testutil::random_spd(rng, 11);
    raw[static_cast<std::size_t>(i)].label = -raw[static_cast<std::size_t>(i)].label;
  }
  const auto second = select_lambda(raw, fold.train, dal::Preset::GLR, quick_method());
  CHECK(first.ratio == second.ratio);
  CHECK(first.cv_errors == second.cv_errors);
  CHECK(first.ratios.size() == 6u);
  for (std::size_t i = 1; i < first.ratios.size(); ++i) CHECK(first.ratios[i] < first.ratios[i - 1]);
}

TEST_CASE("cell formatting and rounding") {
  CHECK(format_cell(37.6, 8.7) == "37.6 ± 8.7");
  CHECK(format_cell(37.64, 8.66) == "37.6 ± 8.7");
  CHECK(format_cell(std::nan(""), 0.0) == "n/a");
  CHECK(round_half_away(0.25, 1) == 0.3);
  CHECK(round_half_away(-0.25, 1) == -0.3);
  CHECK(round_half_away(2.5, 0) == 3.0);
  CHECK(round_half_away(-2.5, 0) == -3.0);
  CHECK(round_half_away(0.75, 1) == 0.8);
  CHECK(format_cell(0.25, 0.75) == "0.3 ± 0.8");
  CHECK(format_cell(-0.0, 0.0) == "0.0 ± 0.0");
}

TEST_CASE("config overlay") {
  const RunConfig base;
  const RunConfig c = run_config_from_json(
      R"({"methods": ["csp-lda", "DAL-GLR"], "outer_folds": 5, "margin": 3,
          "bandpass": {"low_hz": 8}, "solver": {"max_outer": 50}, "synth": {"erd_depth": 0.2}})",
      base);
  CHECK(c.methods == std::vector<Method>{Method::CspLda, Method::DalGlr});
  CHECK(c.outer_folds == 5);
  CHECK(c.method.margin == 3);
  CHECK(c.bandpass.low_hz == 8.0);
  CHECK(c.bandpass.high_hz == base.bandpass.high_hz);
  CHECK(c.method.solver.max_outer == 50);
  CHECK(c.method.solver.eta0 == base.method.solver.eta0);
  CHECK(c.synth.erd_depth == 0.2);
  CHECK(c.method.inner_folds == base.method.inner_folds);

  const RunConfig again = run_config_from_json(run_config_to_json(c));
  CHECK(run_config_to_json(again) == run_config_to_json(c));

  CHECK_THROWS_WITH_AS(run_config_from_json(R"({"outer_fold": 3})"), doctest::Contains("outer_fold"), ConfigError);
  CHECK_THROWS_WITH_AS(run_config_from_json(R"({"solver": {"tol": 1}})"), doctest::Contains("solver.tol"), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(R"({"methods": ["lda"]})"), ConfigError);
  CHECK_THROWS_AS(run_config_from_json("[1]"), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(R"({"outer_folds": "ten"})"), ConfigError);
}

TEST_CASE("statistics summary") {
  Eigen::MatrixXd e(3, 2);
  e << 0.1, 0.2, 0.2, 0.3, 0.3, 0.5;
  const auto s = compute_stats(e, {"a", "b"}, {"1", "2", "3"});
  CHECK(s.anova.f_stat == doctest::Approx(16.0));
  REQUIRE(s.pairs.size() == 1u);
  CHECK(s.pairs[0].test.t == doctest::Approx(-4.0));
  CHECK(s.pairs[0].p_bonferroni == doctest::Approx(s.pairs[0].test.p_two_sided));
  const auto md = stats_markdown(s);
  CHECK(md.find("F(1, 2) = 16.000") != std::string::npos);
  CHECK_THROWS_AS(compute_stats(Eigen::MatrixXd::Ones(1, 2), {"a", "b"}, {"1"}), DataError);

  Eigen::MatrixXd four(5, 4);
  std::mt19937_64 rng(3);
  four = testutil::random_matrix(rng, 5, 4).cwiseAbs();
  const auto s4 = compute_stats(four, {"w", "x", "y", "z"}, {"1", "2", "3", "4", "5"});
  CHECK(s4.pairs.size() == 6u);
  for (const auto& p : s4.pairs) CHECK(p.p_bonferroni == doctest::Approx(std::min(1.0, 6.0 * p.test.p_two_sided)));
}

TEST_CASE("compare on a small dataset") {
  const auto dir = testutil::temp_dir("compare");
  RunConfig cfg;
  cfg.methods = {Method::CspLda, Method::DalGlr};
  cfg.subjects = 3;
  cfg.sessions = 2;
  cfg.seed = 40;
  cfg.synth.trials_per_class = 20;
  cfg.synth.erd_depth = 0.7;
  cfg.outer_folds = 4;
  cfg.method = quick_method();
  write_synthetic_dataset(cfg, dir / "data");
  CHECK(session_seed(cfg, 2, 1) == 42u);
  CHECK(std::filesystem::exists(dir / "data" / "subject_3" / "session_2" / "trials.csv"));

  // One broken session is reported and the rest still runs.
  const auto broken = session_dir(dir / "data", "3", 3);
  save_session(synth_session(250.0, 0.5, 1, 20), broken);
  std::filesystem::remove(broken / "labels.csv");

  const CompareReport rep = run_compare(cfg, dir / "data");
  CHECK(rep.rows.size() == 3u);
  REQUIRE(rep.failures.size() == 1u);
  CHECK(rep.failures[0].subject == "3");
  CHECK(rep.failures[0].error.find("missing labels file") != std::string::npos);
  CHECK(rep.sessions.size() == 12u);
  REQUIRE(rep.stats.has_value());
  CHECK(rep.stats->mean_errors.rows() == 3);

  const std::string js = compare_report_json(rep);
  const std::string md = compare_report_markdown(rep);
  CHECK(compare_report_json(run_compare(cfg, dir / "data")) == js);

  // Every table number equals its JSON value rounded half away from zero.
  const json j = json::parse(js);
  std::vector<std::string> expected_rows;
  for (const auto& row : j["table"]["rows"]) {
    std::string line = "| " + row["subject"].get<std::string>() + " |";
    double best = 1e300;
    for (const auto& c : row["cells"]) best = std::min(best, c["mean_pct"].get<double>());
    for (const auto& c : row["cells"]) {
      const std::string t = format_cell(c["mean_pct"].get<double>(), c["std_pct"].get<double>());
      line += c["mean_pct"].get<double>() == best ? " **" + t + "** |" : " " + t + " |";
    }
    expected_rows.push_back(line);
  }
  for (const auto& line : expected_rows) CHECK(md.find(line + "\n") != std::string::npos);
  std::string avg = "| Average |";
  for (const auto& c : j["table"]["average"]["cells"])
    avg += " " + format_cell(c["mean_pct"].get<double>(), c["std_pct"].get<double>()) + " |";
  CHECK(md.find(avg + "\n") != std::string::npos);

  // Session rows average to the table cells.
  for (std::size_t r = 0; r < rep.rows.size(); ++r)
    for (std::size_t m = 0; m < cfg.methods.size(); ++m) {
      std::vector<double> errs;
      for (const auto& s : rep.sessions)
        if (s.subject == rep.rows[r].subject && s.report.method == method_tag(cfg.methods[m]))
          errs.push_back(100.0 * s.report.mean_error);
      CHECK(rep.rows[r].cells[m].n_sessions == static_cast<int>(errs.size()));
      CHECK(rep.rows[r].cells[m].mean_pct == doctest::Approx(eval::mean(errs)).epsilon(1e-12));
      CHECK(rep.rows[r].cells[m].std_pct == doctest::Approx(eval::sample_std(errs)).epsilon(1e-12));
    }

  const StatsSummary again = stats_from_report_json(js);
  CHECK(again.anova.f_stat == doctest::Approx(rep.stats->anova.f_stat).epsilon(1e-12));
  CHECK(stats_markdown(again) == stats_markdown(*rep.stats));

  CHECK_THROWS_AS(run_compare(cfg, dir / "empty_missing"), DataError);
}
