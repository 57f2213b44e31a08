#include "bcidal/synthgen.hpp"

#include "bcidal/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <utility>

namespace bcidal::synth {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Stream tags, so that different uses of the same (trial, channel) key never collide.
enum : std::uint64_t { kNoise = 1, kPhase = 2, kAmplitude = 3, kShuffle = 4 };

// Paul Kellet's refined pink filter: parallel one-pole sections plus direct terms.
constexpr std::array<double, 6> kPoles{0.99886, 0.99332, 0.96900, 0.86650, 0.55000, -0.7616};
constexpr std::array<double, 6> kGains{0.0555179, 0.0750759, 0.1538520, 0.3104856, 0.5329522, -0.0168980};
constexpr double kDirect = 0.5362;
constexpr double kDelayed = 0.115926;  // white noise delayed by one sample
constexpr double kDcBlock = 0.995;
constexpr int kBurnIn = 4096;

struct PinkState {
  std::array<double, 6> s{};
  double prev_white = 0.0;
  double prev_in = 0.0;
  double prev_out = 0.0;

  double step(double white) {
    double pink = kDirect * white + kDelayed * prev_white;
    for (std::size_t j = 0; j < s.size(); ++j) {
      s[j] = kPoles[j] * s[j] + kGains[j] * white;
      pink += s[j];
    }
    prev_white = white;
    const double out = pink - prev_in + kDcBlock * prev_out;
    prev_in = pink;
    prev_out = out;
    return out;
  }
};

// Standard deviation of the filter output for unit-variance white input.
double pink_output_std() {
  static const double value = [] {
    PinkState st;
    double energy = 0.0;
    for (int k = 0; k < 400000; ++k) {
      const double h = st.step(k == 0 ? 1.0 : 0.0);
      energy += h * h;
    }
    return std::sqrt(energy);
  }();
  return value;
}

}  // namespace

KeyedStream::KeyedStream(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  h = splitmix64(h ^ c);
  engine_.seed(h);
}

double KeyedStream::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double KeyedStream::normal() {
  // Box-Muller; uses 1 - u to keep the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t KeyedStream::below(std::uint64_t bound) {
  // Rejection sampling for an unbiased draw.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % bound;
}

Eigen::VectorXd pink_noise(int n_samples, KeyedStream& stream) {
  if (n_samples < 256) throw ConfigError("pink_noise: need at least 256 samples");
  PinkState st;
  for (int k = 0; k < kBurnIn; ++k) st.step(stream.normal());
  const double scale = 1.0 / pink_output_std();
  Eigen::VectorXd out(n_samples);
  for (int k = 0; k < n_samples; ++k) out(k) = scale * st.step(stream.normal());
  return out;
}

Eigen::MatrixXd mixing_matrix(int n_channels, double spread) {
  Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(n_channels, n_channels);
  if (n_channels == 11) {
    // F3 Fz F4 / T3 C3 Cz C4 T4 / P3 Pz P4
    static constexpr std::array<std::pair<int, int>, 18> edges{{{0, 1},
                                                                {1, 2},
                                                                {0, 3},
                                                                {0, 4},
                                                                {1, 5},
                                                                {2, 6},
                                                                {2, 7},
                                                                {3, 4},
                                                                {4, 5},
                                                                {5, 6},
                                                                {6, 7},
                                                                {3, 8},
                                                                {4, 8},
                                                                {5, 9},
                                                                {6, 10},
                                                                {7, 10},
                                                                {8, 9},
                                                                {9, 10}}};
    for (auto [a, b] : edges) adj(a, b) = adj(b, a) = 1.0;
  } else {
    for (int i = 0; i + 1 < n_channels; ++i) adj(i, i + 1) = adj(i + 1, i) = 1.0;
  }
  Eigen::VectorXd inv_sqrt_deg = adj.rowwise().sum().cwiseMax(1.0).cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd normalized = inv_sqrt_deg.asDiagonal() * adj * inv_sqrt_deg.asDiagonal();
  return Eigen::MatrixXd::Identity(n_channels, n_channels) + spread * normalized;
}

void validate(const SynthSpec& spec) {
  if (spec.n_channels < 1) throw ConfigError("synth: n_channels must be >= 1");
  if (!(spec.fs_hz > 0.0) || !(spec.trial_seconds > 0.0)) throw ConfigError("synth: fs and duration must be positive");
  if (spec.trials_per_class < 1) throw ConfigError("synth: trials_per_class must be >= 1");
  if (!(spec.erd_depth >= 0.0 && spec.erd_depth <= 1.0)) throw ConfigError("synth: erd_depth must lie in [0, 1]");
  if (!(spec.mixing_spread >= 0.0)) throw ConfigError("synth: mixing_spread must be >= 0");
  if (!(spec.noise_scale > 0.0)) throw ConfigError("synth: noise_scale must be positive");
  if (!(spec.mu_amplitude >= 0.0) || !(spec.amplitude_jitter >= 0.0))
    throw ConfigError("synth: amplitude parameters must be >= 0");
  if (!(spec.mu_freq_hz > 0.0 && spec.mu_freq_hz < spec.fs_hz / 2.0))
    throw ConfigError("synth: mu frequency must lie below Nyquist");
  for (int c : spec.active_channels)
    if (c < 0 || c >= spec.n_channels) throw ConfigError("synth: active channel " + std::to_string(c) + " out of range");
  const long n = std::lround(spec.trial_seconds * spec.fs_hz);
  if (n < 256)
    throw ConfigError("synth: trials of " + std::to_string(n) + " samples are too short for the filter supports (need 256)");
}

GeneratedSession generate_session(const SynthSpec& spec) {
  validate(spec);
  const int n_samples = static_cast<int>(std::lround(spec.trial_seconds * spec.fs_hz));
  const int n_trials = 2 * spec.trials_per_class;

  std::vector<Label> order(static_cast<std::size_t>(n_trials));
  for (int i = 0; i < n_trials; ++i) order[static_cast<std::size_t>(i)] = i < spec.trials_per_class ? Label::MotorImagery : Label::Rest;
  KeyedStream shuffle(spec.seed, kShuffle);
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[shuffle.below(i + 1)]);

  const Eigen::MatrixXd mixing = mixing_matrix(spec.n_channels, spec.mixing_spread);
  GeneratedSession out;
  out.session.sampling_rate_hz = spec.fs_hz;
  if (spec.n_channels == 11) {
    out.session.channel_names = default_channel_names();
  } else {
    for (int c = 0; c < spec.n_channels; ++c) out.session.channel_names.push_back("Ch" + std::to_string(c + 1));
  }
  out.truth.active_channels = spec.active_channels;

  const double sigma = spec.amplitude_jitter;
  const double omega = 2.0 * std::numbers::pi * spec.mu_freq_hz / spec.fs_hz;
  for (int t = 0; t < n_trials; ++t) {
    const auto ut = static_cast<std::uint64_t>(t);
    Trial trial;
    trial.index = t;
    trial.label = order[static_cast<std::size_t>(t)];

    KeyedStream amp_stream(spec.seed, kAmplitude, ut);
    const double jitter = std::exp(sigma * amp_stream.normal() - 0.5 * sigma * sigma);
    const double class_amp = trial.label == Label::MotorImagery ? (1.0 - spec.erd_depth) : 1.0;
    const double amplitude = spec.mu_amplitude * class_amp * jitter;
    out.truth.per_trial_mu_amplitude.push_back(amplitude);

    Eigen::MatrixXd sources = Eigen::MatrixXd::Zero(spec.n_channels, n_samples);
    for (int c : spec.active_channels) {
      KeyedStream phase_stream(spec.seed, kPhase, ut, static_cast<std::uint64_t>(c));
      const double phase = 2.0 * std::numbers::pi * phase_stream.uniform();
      for (int k = 0; k < n_samples; ++k) sources(c, k) = amplitude * std::sin(omega * k + phase);
    }
    trial.data = mixing * sources;
    for (int c = 0; c < spec.n_channels; ++c) {
      KeyedStream noise_stream(spec.seed, kNoise, ut, static_cast<std::uint64_t>(c));
      trial.data.row(c) += spec.noise_scale * pink_noise(n_samples, noise_stream).transpose();
    }
    out.session.trials.push_back(std::move(trial));
  }
  return out;
}

void save_generated(const GeneratedSession& g, const std::filesystem::path& dir) {
  save_session(g.session, dir);
  nlohmann::json j;
  j["active_channels"] = g.truth.active_channels;
  j["per_trial_mu_amplitude"] = g.truth.per_trial_mu_amplitude;
  std::ofstream out(dir / "ground_truth.json", std::ios::binary);
  out << j.dump(2) << '\n';
}

}  // namespace bcidal::synth
