#pragma once

#include "bcidal/dataset.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

namespace bcidal::synth {

struct SynthSpec {
  int n_channels = 11;
  double fs_hz = 250.0;
  double trial_seconds = 4.0;
  int trials_per_class = 30;
  double mu_freq_hz = 10.0;
  double erd_depth = 0.5;
  std::vector<int> active_channels{4, 5};  // C3, Cz in the default montage
  double mixing_spread = 0.3;
  double noise_scale = 1.0;
  double mu_amplitude = 0.45;     // rest-state oscillation amplitude before mixing
  double amplitude_jitter = 0.2;  // log-normal spread of the per-trial amplitude (mean preserving)
  std::uint64_t seed = 1;
};

struct GroundTruth {
  std::vector<int> active_channels;
  std::vector<double> per_trial_mu_amplitude;  // chronological
};

/// Independent generator for a (seed, key...) tuple; draws do not depend on
/// the order in which other streams are consumed.
class KeyedStream {
 public:
  KeyedStream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);
  double uniform();  // [0, 1)
  double normal();
  std::uint64_t below(std::uint64_t bound);  // [0, bound)

 private:
  std::mt19937_64 engine_;
};

/// Zero-mean, unit-variance 1/f noise: a fixed bank of first-order sections
/// shaping white noise, followed by a DC blocker. n_samples >= 256.
Eigen::VectorXd pink_noise(int n_samples, KeyedStream& stream);

/// I + spread * D^-1/2 A D^-1/2 over the montage neighbor graph (a chain for
/// layouts other than the default eleven electrodes).
Eigen::MatrixXd mixing_matrix(int n_channels, double spread);

struct GeneratedSession {
  Session session;
  GroundTruth truth;
};

void validate(const SynthSpec& spec);

GeneratedSession generate_session(const SynthSpec& spec);

/// Writes the session directory plus ground_truth.json.
void save_generated(const GeneratedSession& g, const std::filesystem::path& dir);

}  // namespace bcidal::synth
