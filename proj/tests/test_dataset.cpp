#include <doctest.h>

#include "bcidal/dataset.hpp"
#include "bcidal/error.hpp"
#include "bcidal/synthgen.hpp"
#include "helpers.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

using namespace bcidal;
namespace fs = std::filesystem;

namespace {

Session small_session(int n_trials = 6, int n_channels = 3, int n_samples = 5) {
  Session s;
  s.sampling_rate_hz = 250.0;
  for (int c = 0; c < n_channels; ++c) s.channel_names.push_back("ch" + std::to_string(c));
  std::mt19937_64 rng(7);
  for (int t = 0; t < n_trials; ++t) {
    Trial tr;
    tr.data = testutil::random_matrix(rng, n_channels, n_samples);
    tr.label = (t % 2 == 0) ? Label::MotorImagery : Label::Rest;
    tr.index = t;
    s.trials.push_back(tr);
  }
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool any_contains(const std::vector<std::string>& v, const std::string& needle) {
  for (const auto& s : v)
    if (s.find(needle) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("session round-trips through its directory form") {
  const auto dir = testutil::temp_dir("roundtrip");
  const Session s = small_session();
  save_session(s, dir / "a");
  const Session back = load_session(dir / "a");
  CHECK(back == s);

  save_session(back, dir / "b");
  for (const char* f : {"session.json", "trials.csv", "labels.csv"}) CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
}

TEST_CASE("format_double is exact") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-2.0) == "-2");
}

TEST_CASE("missing labels file is reported") {
  const auto dir = testutil::temp_dir("nolabels");
  save_session(small_session(), dir / "s");
  fs::remove(dir / "s" / "labels.csv");
  CHECK_THROWS_WITH_AS(load_session(dir / "s"), doctest::Contains("missing labels file"), DataError);
}

TEST_CASE("channel count mismatch names the trial") {
  Session s = small_session(6, 11, 4);
  s.trials[3].data = Eigen::MatrixXd::Zero(10, 4);
  const auto problems = validate_session(s);
  REQUIRE(problems.size() == 1);
  CHECK(problems[0].find("trial 3") != std::string::npos);
  CHECK(problems[0].find("10 channels") != std::string::npos);

  // Same defect written by hand to disk: the loader rejects it and names trial 3.
  const auto dir = testutil::temp_dir("badchan");
  save_session(small_session(6, 11, 4), dir / "s");
  std::ostringstream rows;
  rows << "trial,channel,sample,value\n";
  for (int t = 0; t < 6; ++t)
    for (int c = 0; c < (t == 3 ? 10 : 11); ++c)
      for (int k = 0; k < 4; ++k) rows << t << ',' << c << ',' << k << ",0.5\n";
  std::ofstream(dir / "s" / "trials.csv") << rows.str();
  CHECK_THROWS_WITH_AS(load_session(dir / "s"), doctest::Contains("trial 3"), DataError);
}

TEST_CASE("validate_session") {
  SUBCASE("valid 60-trial session") {
    synth::SynthSpec spec;
    spec.trial_seconds = 1.1;
    CHECK(validate_session(synth::generate_session(spec).session).empty());
  }
  SUBCASE("one NaN sample") {
    Session s = small_session();
    s.trials[2].data(1, 4) = std::numeric_limits<double>::quiet_NaN();
    const auto problems = validate_session(s);
    REQUIRE(problems.size() == 1);
    CHECK(problems[0] == "non-finite value at trial 2, channel 1, sample 4");
  }
  SUBCASE("duplicate and gapped indices") {
    Session s = small_session();
    const int idx[] = {0, 1, 1, 3, 4, 5};
    for (int i = 0; i < 6; ++i) s.trials[i].index = idx[i];
    const auto problems = validate_session(s);
    CHECK(any_contains(problems, "duplicate trial index 1"));
    CHECK(any_contains(problems, "not contiguous"));
  }
}

TEST_CASE("validate_session is empty exactly when load accepts") {
  const auto dir = testutil::temp_dir("validate_load");
  save_session(small_session(), dir / "ok");
  CHECK_NOTHROW(load_session(dir / "ok"));

  // An unsorted trials.csv is rejected by the loader.
  std::string rows = slurp(dir / "ok" / "trials.csv");
  const auto first = rows.find('\n') + 1;
  const auto second = rows.find('\n', first) + 1;
  const auto third = rows.find('\n', second) + 1;
  const std::string swapped =
      rows.substr(0, first) + rows.substr(second, third - second) + rows.substr(first, second - first) + rows.substr(third);
  std::ofstream(dir / "ok" / "trials.csv") << swapped;
  CHECK_THROWS_AS(load_session(dir / "ok"), DataError);

  // save refuses what validate rejects.
  Session bad = small_session();
  bad.trials[0].data(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_FALSE(validate_session(bad).empty());
  CHECK_THROWS_AS(save_session(bad, dir / "bad"), DataError);
}

TEST_CASE("dataset listing orders sessions numerically") {
  const auto dir = testutil::temp_dir("listing");
  const Session s = small_session();
  for (int k : {1, 2, 10}) save_session(s, session_dir(dir, "1", k));
  save_session(s, session_dir(dir, "2", 1));
  const auto listing = list_dataset_sessions(dir);
  REQUIRE(listing.size() == 2);
  const auto& subj = listing.at("1");
  REQUIRE(subj.size() == 3);
  CHECK(subj[0].filename() == "session_1");
  CHECK(subj[1].filename() == "session_2");
  CHECK(subj[2].filename() == "session_10");
  CHECK(load_dataset(dir).subjects.at("1").size() == 3);
}

TEST_CASE("label conversion") {
  CHECK(label_from_int(1) == Label::MotorImagery);
  CHECK(label_from_int(-1) == Label::Rest);
  CHECK_THROWS_AS(label_from_int(0), DataError);
  CHECK(default_channel_names().size() == 11);
}
