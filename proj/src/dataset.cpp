#include "bcidal/dataset.hpp"

#include "bcidal/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace bcidal {

namespace fs = std::filesystem;
using nlohmann::json;

Label label_from_int(int v) {
  if (v == 1) return Label::MotorImagery;
  if (v == -1) return Label::Rest;
  throw DataError("label must be 1 or -1, got " + std::to_string(v));
}

std::vector<Label> Session::labels() const {
  std::vector<Label> out;
  out.reserve(trials.size());
  for (const auto& t : trials) out.push_back(t.label);
  return out;
}

const std::vector<std::string>& default_channel_names() {
  static const std::vector<std::string> names{"F3", "Fz", "F4", "T3", "C3", "Cz", "C4", "T4", "P3", "Pz", "P4"};
  return names;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::vector<std::string> validate_session(const Session& s) {
  std::vector<std::string> out;
  if (!(s.sampling_rate_hz > 0.0) || !std::isfinite(s.sampling_rate_hz))
    out.push_back("sampling rate must be positive and finite");
  if (s.channel_names.empty()) out.push_back("channel layout is empty");

  const auto n_ch = static_cast<Eigen::Index>(s.channel_names.size());
  const Eigen::Index n_samp = s.trials.empty() ? 0 : s.trials.front().data.cols();
  std::set<int> seen;
  bool duplicate = false;
  int prev_index = -1;
  bool ordered = true;
  for (std::size_t k = 0; k < s.trials.size(); ++k) {
    const Trial& t = s.trials[k];
    const std::string name = "trial " + std::to_string(t.index);
    if (t.data.rows() < 1 || t.data.cols() < 1) out.push_back(name + " has no data");
    if (t.data.rows() != n_ch)
      out.push_back(name + " has " + std::to_string(t.data.rows()) + " channels while layout declares " +
                    std::to_string(n_ch));
    if (t.data.cols() != n_samp)
      out.push_back(name + " has " + std::to_string(t.data.cols()) + " samples, expected " + std::to_string(n_samp));
    for (Eigen::Index c = 0; c < t.data.rows(); ++c) {
      for (Eigen::Index j = 0; j < t.data.cols(); ++j) {
        if (!std::isfinite(t.data(c, j))) {
          out.push_back("non-finite value at trial " + std::to_string(t.index) + ", channel " + std::to_string(c) +
                        ", sample " + std::to_string(j));
          goto next_trial;
        }
      }
    }
  next_trial:
    if (t.index < 0) out.push_back(name + " has a negative index");
    if (!seen.insert(t.index).second && !duplicate) {
      out.push_back("duplicate trial index " + std::to_string(t.index));
      duplicate = true;
    }
    if (t.index <= prev_index) ordered = false;
    prev_index = t.index;
  }
  if (!ordered) out.push_back("trials are not in chronological index order");
  if (!seen.empty()) {
    int expect = 0;
    for (int idx : seen) {
      if (idx != expect) {
        out.push_back("trial indices are not contiguous from 0 (missing " + std::to_string(expect) + ")");
        break;
      }
      ++expect;
    }
  }
  return out;
}

namespace {

std::string read_file(const fs::path& p, const std::string& what) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("missing " + what + " file: " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Splits `text` into lines, tolerating a trailing newline and CRLF endings.
std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = end + 1;
  }
  return lines;
}

struct RowRef {
  const char* file;
  std::size_t line;
  std::string str() const { return std::string(file) + ":" + std::to_string(line); }
};

template <typename T>
T parse_field(std::string_view field, const RowRef& where) {
  T value{};
  auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size())
    throw DataError("malformed row " + where.str() + ": cannot parse '" + std::string(field) + "'");
  return value;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> parts;
  std::size_t pos = 0;
  while (true) {
    std::size_t end = line.find(',', pos);
    if (end == std::string_view::npos) {
      parts.push_back(line.substr(pos));
      break;
    }
    parts.push_back(line.substr(pos, end - pos));
    pos = end + 1;
  }
  return parts;
}

}  // namespace

Session load_session(const fs::path& dir) {
  const fs::path meta_path = dir / "session.json";
  const fs::path trials_path = dir / "trials.csv";
  const fs::path labels_path = dir / "labels.csv";
  if (!fs::exists(meta_path)) throw DataError("missing session metadata file: " + meta_path.string());
  if (!fs::exists(trials_path)) throw DataError("missing trials file: " + trials_path.string());
  if (!fs::exists(labels_path)) throw DataError("missing labels file: " + labels_path.string());

  Session s;
  int n_trials = 0;
  int n_samples = 0;
  try {
    json meta = json::parse(read_file(meta_path, "session metadata"));
    s.sampling_rate_hz = meta.at("sampling_rate_hz").get<double>();
    s.channel_names = meta.at("channel_names").get<std::vector<std::string>>();
    n_trials = meta.at("n_trials").get<int>();
    n_samples = meta.at("n_samples").get<int>();
  } catch (const json::exception& e) {
    throw DataError("malformed session.json: " + std::string(e.what()));
  }
  if (n_trials < 0 || n_samples < 1) throw DataError("session.json declares an invalid trial or sample count");
  const int n_ch = static_cast<int>(s.channel_names.size());

  // labels.csv
  const std::string label_text = read_file(labels_path, "labels");
  auto label_lines = split_lines(label_text);
  if (label_lines.empty() || label_lines.front() != "trial,label") throw DataError("labels.csv: bad header");
  std::map<int, Label> labels;
  for (std::size_t i = 1; i < label_lines.size(); ++i) {
    if (label_lines[i].empty()) continue;
    const RowRef where{"labels.csv", i + 1};
    auto parts = split_commas(label_lines[i]);
    if (parts.size() != 2) throw DataError("malformed row " + where.str());
    int trial = parse_field<int>(parts[0], where);
    int lab = parse_field<int>(parts[1], where);
    Label l;
    try {
      l = label_from_int(lab);
    } catch (const DataError& e) {
      throw DataError("malformed row " + where.str() + ": " + e.what());
    }
    if (!labels.emplace(trial, l).second) throw DataError("duplicate trial index " + std::to_string(trial) + " in labels.csv");
  }

  // trials.csv: rows sorted by (trial, channel, sample).
  const std::string trial_text = read_file(trials_path, "trials");
  auto lines = split_lines(trial_text);
  if (lines.empty() || lines.front() != "trial,channel,sample,value") throw DataError("trials.csv: bad header");

  struct Acc {
    std::vector<double> values;  // channel-major
    int channels = 0;
    int samples_in_channel = 0;
  };
  std::map<int, Acc> acc;
  long prev_t = -1, prev_c = -1, prev_k = -1;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const RowRef where{"trials.csv", i + 1};
    auto parts = split_commas(lines[i]);
    if (parts.size() != 4) throw DataError("malformed row " + where.str());
    const int t = parse_field<int>(parts[0], where);
    const int c = parse_field<int>(parts[1], where);
    const int k = parse_field<int>(parts[2], where);
    const double v = parse_field<double>(parts[3], where);
    if (!std::isfinite(v)) throw DataError("non-finite value at trial " + std::to_string(t) + ", channel " +
                                           std::to_string(c) + ", sample " + std::to_string(k));
    if (t < 0 || c < 0 || k < 0) throw DataError("malformed row " + where.str() + ": negative index");
    if (t == prev_t && c == prev_c && k == prev_k)
      throw DataError("duplicate row for trial " + std::to_string(t) + " at " + where.str());
    const bool ascending = t > prev_t || (t == prev_t && (c > prev_c || (c == prev_c && k > prev_k)));
    if (!ascending) throw DataError("malformed row " + where.str() + ": rows not sorted by (trial, channel, sample)");

    Acc& a = acc[t];
    if (t != prev_t || c != prev_c) {
      if (c != a.channels) throw DataError("trial " + std::to_string(t) + ": channel indices not contiguous");
      if (a.channels > 0 && a.samples_in_channel != n_samples)
        throw DataError("trial " + std::to_string(t) + " has " + std::to_string(a.samples_in_channel) +
                        " samples in a channel, expected " + std::to_string(n_samples));
      ++a.channels;
      a.samples_in_channel = 0;
    }
    if (k != a.samples_in_channel)
      throw DataError("trial " + std::to_string(t) + ": sample indices not contiguous at " + where.str());
    a.values.push_back(v);
    ++a.samples_in_channel;
    prev_t = t;
    prev_c = c;
    prev_k = k;
  }

  for (const auto& [t, a] : acc) {
    if (a.channels != n_ch)
      throw DataError("trial " + std::to_string(t) + " has " + std::to_string(a.channels) +
                      " channels while layout declares " + std::to_string(n_ch));
    if (a.samples_in_channel != n_samples)
      throw DataError("trial " + std::to_string(t) + " has " + std::to_string(a.samples_in_channel) +
                      " samples in a channel, expected " + std::to_string(n_samples));
    auto it = labels.find(t);
    if (it == labels.end()) throw DataError("trial " + std::to_string(t) + " has no label");
    Trial trial;
    trial.index = t;
    trial.label = it->second;
    trial.data = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        a.values.data(), n_ch, n_samples);
    s.trials.push_back(std::move(trial));
  }
  if (labels.size() != acc.size()) throw DataError("labels.csv lists trials absent from trials.csv");
  if (static_cast<int>(s.trials.size()) != n_trials)
    throw DataError("session.json declares " + std::to_string(n_trials) + " trials, found " +
                    std::to_string(s.trials.size()));

  auto problems = validate_session(s);
  if (!problems.empty()) throw DataError("invalid session " + dir.string() + ": " + problems.front());
  return s;
}

void save_session(const Session& s, const fs::path& dir) {
  auto problems = validate_session(s);
  if (!problems.empty()) throw DataError("refusing to save invalid session: " + problems.front());
  fs::create_directories(dir);

  json meta;
  meta["sampling_rate_hz"] = s.sampling_rate_hz;
  meta["channel_names"] = s.channel_names;
  meta["n_trials"] = s.n_trials();
  meta["n_samples"] = s.n_samples();
  {
    std::ofstream out(dir / "session.json", std::ios::binary);
    out << meta.dump(2) << '\n';
  }
  {
    std::string buf = "trial,channel,sample,value\n";
    for (const Trial& t : s.trials) {
      const std::string tprefix = std::to_string(t.index) + ",";
      for (Eigen::Index c = 0; c < t.data.rows(); ++c) {
        const std::string cprefix = tprefix + std::to_string(c) + ",";
        for (Eigen::Index k = 0; k < t.data.cols(); ++k) {
          buf += cprefix;
          buf += std::to_string(k);
          buf += ',';
          buf += format_double(t.data(c, k));
          buf += '\n';
        }
      }
    }
    std::ofstream out(dir / "trials.csv", std::ios::binary);
    out << buf;
  }
  {
    std::ofstream out(dir / "labels.csv", std::ios::binary);
    out << "trial,label\n";
    for (const Trial& t : s.trials) out << t.index << ',' << static_cast<int>(t.label) << '\n';
  }
  if (!fs::exists(dir / "labels.csv")) throw DataError("failed to write session to " + dir.string());
}

fs::path session_dir(const fs::path& root, const std::string& subject, int session) {
  return root / ("subject_" + subject) / ("session_" + std::to_string(session));
}

std::map<std::string, std::vector<fs::path>> list_dataset_sessions(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError("dataset root is not a directory: " + root.string());
  std::map<std::string, std::vector<fs::path>> out;
  for (const auto& subj : fs::directory_iterator(root)) {
    const std::string name = subj.path().filename().string();
    if (!subj.is_directory() || name.rfind("subject_", 0) != 0) continue;
    std::vector<std::pair<int, fs::path>> sessions;
    for (const auto& sess : fs::directory_iterator(subj.path())) {
      const std::string sname = sess.path().filename().string();
      if (!sess.is_directory() || sname.rfind("session_", 0) != 0) continue;
      int k = 0;
      auto tail = std::string_view(sname).substr(8);
      auto res = std::from_chars(tail.data(), tail.data() + tail.size(), k);
      if (res.ec != std::errc() || res.ptr != tail.data() + tail.size()) continue;
      sessions.emplace_back(k, sess.path());
    }
    std::sort(sessions.begin(), sessions.end());
    auto& list = out[name.substr(8)];
    for (const auto& [k, p] : sessions) list.push_back(p);
  }
  return out;
}

Dataset load_dataset(const fs::path& root) {
  Dataset ds;
  for (const auto& [subject, paths] : list_dataset_sessions(root)) {
    auto& list = ds.subjects[subject];
    for (const auto& p : paths) list.push_back(load_session(p));
  }
  return ds;
}

}  // namespace bcidal
