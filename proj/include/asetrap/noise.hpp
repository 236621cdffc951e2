#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Core>

namespace asetrap {

/// Flat band model of the fractional fluctuation eps(t).
///
/// The spectrum is a one-sided density over angular frequency,
/// S(w) = s0 * tau0 for 0 <= w < 1/tau0 and zero above, so that
/// <eps^2> = integral_0^inf S(w) dw = s0.
struct NoiseSpec {
  double s0 = 0.0;
  double tau0 = 1.0;

  /// Density S(w) at angular frequency w, with half weight exactly on the edge.
  double density(double omega) const;
  /// Angular frequency of the band edge, 1/tau0.
  double band_edge() const { return 1.0 / tau0; }
  void validate() const;
};

/// A sampled realization of eps(t), t_k = k * dt.
struct NoiseTrace {
  double dt = 1.0;
  Eigen::VectorXd samples;
  std::uint64_t seed = 0;

  Eigen::Index size() const { return samples.size(); }
  double duration() const { return dt * static_cast<double>(samples.size() - 1); }
  /// Linear interpolation at time t; throws NumericalError outside the trace.
  double at(double t) const;
};

/// Uniformly sampled scalar signal, the input of the SNR cascade.
struct IntensityTrace {
  double fs = 1.0;
  Eigen::VectorXd samples;
  std::string unit = "V";

  Eigen::Index size() const { return samples.size(); }
};

enum class PsdConvention {
  /// One-sided density per unit angular frequency (rad per time unit).
  AngularOneSided,
  /// One-sided density per hertz.
  HertzOneSided,
};

/// Averaged-periodogram estimate. integral() approximates the trace variance.
struct Psd {
  Eigen::VectorXd frequencies;
  Eigen::VectorXd density;
  PsdConvention convention = PsdConvention::HertzOneSided;

  double resolution() const;
  double integral() const;
  /// Mean density over bins whose frequency lies in [lo, hi].
  double mean_density(double lo, double hi) const;
};

/// Frequency-domain synthesis of a zero-mean Gaussian process with a flat
/// one-sided angular spectrum of total variance `variance` on [0, omega_edge).
/// Bin k carries variance S * dw * (overlap of its cell with the band), the
/// cell of bin k being [w_k - dw/2, w_k + dw/2].
Eigen::VectorXd synthesize_flat_band(Eigen::Index n, double dt, double omega_edge,
                                     double variance, std::uint64_t seed);

/// Realization of eps(t) covering [0, duration] at spacing dt.
NoiseTrace synth_band_limited(const NoiseSpec& spec, double duration, double dt,
                              std::uint64_t seed);

/// Mean value plus flat band-limited Gaussian noise of rms mean / snr_raw.
/// snr_raw may be +inf (noiseless trace).
IntensityTrace synth_ase_trace(double mean, double snr_raw, double bandwidth_hz,
                               double fs, Eigen::Index n, std::uint64_t seed);

/// Welch estimate with a Hann window and 50% overlap, after removing the
/// overall mean. Requires at least 8 segments.
Psd psd_estimate(const Eigen::Ref<const Eigen::VectorXd>& samples, double sample_spacing,
                 Eigen::Index segment_length, PsdConvention convention);
Psd psd_estimate(const NoiseTrace& trace, Eigen::Index segment_length);
Psd psd_estimate(const IntensityTrace& trace, Eigen::Index segment_length);

/// Smallest n' >= n whose only prime factors are 2, 3 and 5.
Eigen::Index fft_friendly_size(Eigen::Index n);

}  // namespace asetrap
