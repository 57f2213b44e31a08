#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace bcidal {

/// Class tag of a trial. Values double as the ±1 targets of the classifiers.
enum class Label : int { Rest = -1, MotorImagery = 1 };

inline double label_sign(Label l) { return static_cast<double>(static_cast<int>(l)); }
Label label_from_int(int v);

/// One pre-epoched trial: channels × samples, amplitude in microvolts.
struct Trial {
  Eigen::MatrixXd data;
  Label label = Label::Rest;
  int index = 0;

  friend bool operator==(const Trial&, const Trial&) = default;
};

struct Session {
  std::vector<Trial> trials;
  double sampling_rate_hz = 0.0;
  std::vector<std::string> channel_names;

  int n_channels() const { return static_cast<int>(channel_names.size()); }
  int n_samples() const { return trials.empty() ? 0 : static_cast<int>(trials.front().data.cols()); }
  int n_trials() const { return static_cast<int>(trials.size()); }
  std::vector<Label> labels() const;

  friend bool operator==(const Session&, const Session&) = default;
};

/// Subject id → chronologically ordered sessions.
struct Dataset {
  std::map<std::string, std::vector<Session>> subjects;
};

/// The eleven-electrode motor montage used as default channel layout.
const std::vector<std::string>& default_channel_names();

/// Returns one human-readable entry per violated invariant; empty iff valid.
std::vector<std::string> validate_session(const Session& s);

/// Reads `session.json`, `trials.csv` and `labels.csv` from `dir`.
/// Throws DataError on any structural problem or invariant violation.
Session load_session(const std::filesystem::path& dir);

/// Writes the canonical directory form read by load_session.
void save_session(const Session& s, const std::filesystem::path& dir);

/// Lists `root/subject_<id>/session_<k>/` directories, sessions ordered by numeric k.
std::map<std::string, std::vector<std::filesystem::path>> list_dataset_sessions(const std::filesystem::path& root);

/// Loads every session found by list_dataset_sessions.
Dataset load_dataset(const std::filesystem::path& root);

/// Session directory path for a subject/session pair under `root`.
std::filesystem::path session_dir(const std::filesystem::path& root, const std::string& subject, int session);

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace bcidal
