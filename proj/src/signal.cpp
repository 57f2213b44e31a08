#include "bcidal/signal.hpp"

#include "bcidal/error.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace bcidal::signal {

using cd = std::complex<double>;

void validate(const BandpassSpec& spec) {
  if (!(spec.sampling_rate_hz > 0.0)) throw ConfigError("bandpass: sampling rate must be positive");
  if (spec.prototype_order < 1) throw ConfigError("bandpass: prototype order must be >= 1");
  if (!(spec.low_hz > 0.0 && spec.low_hz < spec.high_hz))
    throw ConfigError("bandpass: need 0 < low_hz < high_hz");
  if (!(spec.high_hz < spec.sampling_rate_hz / 2.0))
    throw ConfigError("bandpass: band edge " + std::to_string(spec.high_hz) + " Hz at or beyond Nyquist (" +
                      std::to_string(spec.sampling_rate_hz / 2.0) + " Hz)");
}

void validate(const ResampleSpec& spec) {
  if (!(spec.from_hz > 0.0 && spec.to_hz > 0.0)) throw ConfigError("resample: rates must be positive");
  if (spec.from_hz == spec.to_hz) throw ConfigError("resample: from_hz equals to_hz");
  if (spec.antialias_taps < 1 || spec.antialias_taps % 2 == 0)
    throw ConfigError("resample: antialias_taps must be a positive odd integer");
  if (!(spec.antialias_cutoff_fraction > 0.0 && spec.antialias_cutoff_fraction <= 1.0))
    throw ConfigError("resample: antialias_cutoff_fraction must lie in (0, 1]");
  rational_factor(spec.from_hz, spec.to_hz);
}

FilterCoefficients design_bandpass(const BandpassSpec& spec) {
  validate(spec);
  const double fs = spec.sampling_rate_hz;
  const int order = spec.prototype_order;
  const double w_lo = 2.0 * fs * std::tan(std::numbers::pi * spec.low_hz / fs);
  const double w_hi = 2.0 * fs * std::tan(std::numbers::pi * spec.high_hz / fs);
  const double bw = w_hi - w_lo;
  const double w0_sq = w_lo * w_hi;

  // Analog bandpass poles grouped into pairs that become one biquad each.
  std::vector<std::array<cd, 2>> pairs;
  for (int k = 1; k <= order; ++k) {
    const cd p = std::polar(1.0, std::numbers::pi * (2.0 * k + order - 1) / (2.0 * order));
    const cd disc = std::sqrt(p * p * bw * bw - 4.0 * w0_sq);
    const cd s1 = (p * bw + disc) / 2.0;
    const cd s2 = (p * bw - disc) / 2.0;
    if (std::abs(p.imag()) < 1e-12) {
      pairs.push_back({s1, s2});  // real prototype pole: its two roots are conjugate or both real
    } else if (p.imag() > 0.0) {
      pairs.push_back({s1, std::conj(s1)});
      pairs.push_back({s2, std::conj(s2)});
    }
  }

  FilterCoefficients out;
  const double two_fs = 2.0 * fs;
  for (const auto& pr : pairs) {
    const cd z1 = (two_fs + pr[0]) / (two_fs - pr[0]);
    const cd z2 = (two_fs + pr[1]) / (two_fs - pr[1]);
    Biquad q;
    q.b = {1.0, 0.0, -1.0};  // one zero at DC, one at Nyquist
    q.a = {-(z1 + z2).real(), (z1 * z2).real()};
    out.sections.push_back(q);
  }

  const double f_center = fs / std::numbers::pi * std::atan(std::sqrt(w0_sq) / two_fs);
  const double g = 1.0 / std::abs(frequency_response(out, f_center, fs));
  const double g_sec = std::pow(g, 1.0 / static_cast<double>(out.sections.size()));
  for (auto& q : out.sections)
    for (double& b : q.b) b *= g_sec;
  return out;
}

cd frequency_response(const FilterCoefficients& c, double freq_hz, double fs_hz) {
  const cd zinv = std::polar(1.0, -2.0 * std::numbers::pi * freq_hz / fs_hz);
  const cd zinv2 = zinv * zinv;
  cd h = 1.0;
  for (const auto& q : c.sections) {
    const cd num = q.b[0] + q.b[1] * zinv + q.b[2] * zinv2;
    const cd den = 1.0 + q.a[0] * zinv + q.a[1] * zinv2;
    h *= num / den;
  }
  return h;
}

std::vector<cd> section_poles(const FilterCoefficients& c) {
  std::vector<cd> poles;
  for (const auto& q : c.sections) {
    // z^2 + a1 z + a2 = 0
    const cd disc = std::sqrt(cd(q.a[0] * q.a[0] - 4.0 * q.a[1], 0.0));
    poles.push_back((-q.a[0] + disc) / 2.0);
    poles.push_back((-q.a[0] - disc) / 2.0);
  }
  return poles;
}

Eigen::MatrixXd apply_filter(const Eigen::MatrixXd& x, const FilterCoefficients& c) {
  if (!x.allFinite()) throw DataError("apply_filter: non-finite input");
  Eigen::MatrixXd y = x;
  const Eigen::Index n = x.cols();
  for (Eigen::Index ch = 0; ch < y.rows(); ++ch) {
    for (const auto& q : c.sections) {
      // transposed direct form II
      double s1 = 0.0, s2 = 0.0;
      for (Eigen::Index k = 0; k < n; ++k) {
        const double in = y(ch, k);
        const double out = q.b[0] * in + s1;
        s1 = q.b[1] * in - q.a[0] * out + s2;
        s2 = q.b[2] * in - q.a[1] * out;
        y(ch, k) = out;
      }
    }
  }
  return y;
}

RationalFactor rational_factor(double from_hz, double to_hz) {
  const double ratio = to_hz / from_hz;
  for (int q = 1; q <= 1024; ++q) {
    const double p = std::round(ratio * q);
    if (p >= 1.0 && p <= 1024.0 && std::abs(p / q - ratio) <= 1e-12 * ratio)
      return {static_cast<int>(p), q};
  }
  throw ConfigError("resample: rate ratio " + std::to_string(to_hz) + "/" + std::to_string(from_hz) +
                    " is not a rational p/q with p, q <= 1024");
}

Eigen::VectorXd antialias_lowpass(const ResampleSpec& spec) {
  validate(spec);
  const auto [up, down] = rational_factor(spec.from_hz, spec.to_hz);
  const Eigen::Index len = static_cast<Eigen::Index>(spec.antialias_taps - 1) * up + 1;
  const double fs_up = spec.from_hz * up;
  const double cutoff = spec.antialias_cutoff_fraction * std::min(spec.from_hz, spec.to_hz) / 2.0;
  const double wc = 2.0 * cutoff / fs_up;  // normalized to the upsampled Nyquist = 1
  const double mid = static_cast<double>(len - 1) / 2.0;
  Eigen::VectorXd h(len);
  for (Eigen::Index n = 0; n < len; ++n) {
    const double t = static_cast<double>(n) - mid;
    const double arg = std::numbers::pi * wc * t;
    const double sinc = (t == 0.0) ? 1.0 : std::sin(arg) / arg;
    const double window =
        len > 1 ? 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(len - 1))
                : 1.0;
    h(n) = wc * sinc * window;
  }
  h *= static_cast<double>(up) / h.sum();
  return h;
}

Eigen::MatrixXd resample_trial(const Eigen::MatrixXd& x, const ResampleSpec& spec) {
  validate(spec);
  if (x.cols() < spec.antialias_taps)
    throw DataError("resample: input has " + std::to_string(x.cols()) + " samples, shorter than the " +
                    std::to_string(spec.antialias_taps) + "-tap anti-alias filter");
  const auto [up, down] = rational_factor(spec.from_hz, spec.to_hz);
  const Eigen::VectorXd h = antialias_lowpass(spec);
  const long len = static_cast<long>(h.size());
  const long delay = (len - 1) / 2;
  const long n_in = static_cast<long>(x.cols());
  const long n_out = (n_in * up + down - 1) / down;

  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(x.rows(), n_out);
  for (long m = 0; m < n_out; ++m) {
    const long center = m * down + delay;  // position on the upsampled grid
    // h index = center - k * up must lie in [0, len)
    long k_lo = center - (len - 1);
    k_lo = k_lo <= 0 ? 0 : (k_lo + up - 1) / up;
    const long k_hi = std::min(n_in - 1, center / up);
    for (long k = k_lo; k <= k_hi; ++k) {
      const double w = h(center - k * up);
      y.col(m) += w * x.col(k);
    }
  }
  return y;
}

}  // namespace bcidal::signal
