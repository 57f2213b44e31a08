#pragma once

#include <Eigen/Dense>

#include <array>
#include <complex>
#include <vector>

namespace bcidal::signal {

struct BandpassSpec {
  double low_hz = 6.0;
  double high_hz = 32.0;
  int prototype_order = 2;
  double sampling_rate_hz = 128.0;

  friend bool operator==(const BandpassSpec&, const BandpassSpec&) = default;
};

/// One biquad: H(z) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2).
struct Biquad {
  std::array<double, 3> b{};
  std::array<double, 2> a{};  // a1, a2
};

struct FilterCoefficients {
  std::vector<Biquad> sections;
};

struct ResampleSpec {
  double from_hz = 250.0;
  double to_hz = 128.0;
  int antialias_taps = 127;
  double antialias_cutoff_fraction = 0.9;

  friend bool operator==(const ResampleSpec&, const ResampleSpec&) = default;
};

/// Throws ConfigError unless 0 < low < high < fs/2 and order >= 1.
void validate(const BandpassSpec& spec);
void validate(const ResampleSpec& spec);

/// Butterworth bandpass as a cascade of biquads. The analog prototype of
/// order N is transformed to a 2N-pole bandpass and discretized by the
/// bilinear transform with both band edges prewarped. Gain is normalized
/// to 1 at the geometric center, so both edges sit at 1/sqrt(2).
FilterCoefficients design_bandpass(const BandpassSpec& spec);

/// Complex response of the cascade at `freq_hz`.
std::complex<double> frequency_response(const FilterCoefficients& c, double freq_hz, double fs_hz);

/// Poles of every section (two per biquad).
std::vector<std::complex<double>> section_poles(const FilterCoefficients& c);

/// Causal cascade filtering along rows (one channel per row), zero initial state.
Eigen::MatrixXd apply_filter(const Eigen::MatrixXd& x, const FilterCoefficients& c);

/// Reduced up/down factors p/q with to/from = p/q.
struct RationalFactor {
  int up = 1;
  int down = 1;
};
RationalFactor rational_factor(double from_hz, double to_hz);

/// Hamming-windowed sinc prototype at the upsampled rate, scaled to sum to `up`.
/// Length is (taps - 1) * up + 1 so its delay is an integer number of upsampled ticks.
Eigen::VectorXd antialias_lowpass(const ResampleSpec& spec);

/// Polyphase rational resampling of every row. Output length is ceil(n * p / q);
/// the filter's group delay is removed exactly.
Eigen::MatrixXd resample_trial(const Eigen::MatrixXd& x, const ResampleSpec& spec);

}  // namespace bcidal::signal
