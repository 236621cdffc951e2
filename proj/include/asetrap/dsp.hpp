#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "asetrap/error.hpp"
#include "asetrap/noise.hpp"

namespace asetrap {

/// Linear-phase FIR lowpass. fc_norm is the -3 dB point as a fraction of Nyquist.
template <typename Scalar>
struct BasicFirFilter {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> taps;
  Scalar fc_norm = Scalar(0);

  int order() const { return static_cast<int>(taps.size()) - 1; }
};

using FirFilter = BasicFirFilter<double>;

/// |H(f)| for normalized frequency f in [0, 1] (1 = Nyquist).
template <typename Derived>
typename Derived::Scalar magnitude_response(const Eigen::MatrixBase<Derived>& taps,
                                            typename Derived::Scalar f_norm) {
  using Scalar = typename Derived::Scalar;
  std::complex<Scalar> acc(0);
  for (Eigen::Index n = 0; n < taps.size(); ++n) {
    acc += taps[n] * std::polar(Scalar(1), -std::numbers::pi_v<Scalar> * f_norm * Scalar(n));
  }
  return std::abs(acc);
}

/// Hamming window of length `length` (symmetric).
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> hamming(Eigen::Index length) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> w(length);
  if (length == 1) {
    w[0] = Scalar(1);
    return w;
  }
  for (Eigen::Index n = 0; n < length; ++n) {
    w[n] = Scalar(0.54) - Scalar(0.46) * std::cos(Scalar(2) * std::numbers::pi_v<Scalar> *
                                                  Scalar(n) / Scalar(length - 1));
  }
  return w;
}

/// Hamming-windowed sinc with sinc cutoff `sinc_cutoff` (fraction of Nyquist),
/// normalized to unit DC gain.
template <typename Scalar = double>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> windowed_sinc(int order, Scalar sinc_cutoff) {
  const Eigen::Index length = order + 1;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> taps = hamming<Scalar>(length);
  const Scalar center = Scalar(order) / Scalar(2);
  for (Eigen::Index n = 0; n < length; ++n) {
    const Scalar x = sinc_cutoff * (Scalar(n) - center);
    const Scalar s = x == Scalar(0) ? Scalar(1)
                                    : std::sin(std::numbers::pi_v<Scalar> * x) /
                                          (std::numbers::pi_v<Scalar> * x);
    taps[n] *= sinc_cutoff * s;
  }
  return taps / taps.sum();
}

/// Windowed-sinc design whose magnitude response crosses -3 dB (half power)
/// exactly at fc_norm. Throws NumericalError when no sinc cutoff achieves it
/// within 0.2 dB.
FirFilter design_lowpass(int order, double fc_norm);

/// Direct-form convolution keeping only fully overlapped outputs, i.e. the
/// first and last (taps - 1) samples of the full convolution are dropped.
IntensityTrace filter_apply(const IntensityTrace& trace, const FirFilter& filter);

/// Keeps samples 0, d, 2d, ...; fs' = fs / d.
IntensityTrace decimate(const IntensityTrace& trace, int d);

/// Raised by snr() when the mean is zero (to 1e-9 of the rms).
class UndefinedSnr : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// mean / rms, rms from the unbiased variance about the mean. A constant
/// trace yields +infinity.
double snr(const Eigen::Ref<const Eigen::VectorXd>& samples);
double snr(const IntensityTrace& trace);

struct StageConfig {
  int decimation = 2;
  double fc_norm = 0.5;
  int order = 30;
};

struct CascadeConfig {
  StageConfig first_stage{10, 0.1, 150};
  StageConfig later_stage{2, 0.5, 30};
  int passes_per_stage = 1;
  /// The cascade stops before a stage whose input is shorter than this.
  Eigen::Index min_samples = 2048;

  void validate() const;
};

struct SnrPoint {
  double cutoff_hz = 0.0;
  double snr = 0.0;
  /// Length of the filtered signal the SNR was measured on.
  Eigen::Index samples = 0;
};

struct PowerLawFit {
  /// snr = amplitude * (f / f_ref)^exponent
  double amplitude = 0.0;
  double exponent = 0.0;
  double f_ref = 1e6;
  /// Frequency at which the fitted law reaches SNR = 1.
  double f_unity = 0.0;
  int points = 0;
};

struct SnrCurve {
  std::vector<SnrPoint> points;
  std::optional<PowerLawFit> fit;
};

/// Filter-then-decimate cascade. After every stage's filtering the point
/// (fc_norm * fs_current / 2, snr of the filtered signal) is recorded, then the
/// signal is decimated.
SnrCurve cascade_snr(const IntensityTrace& trace, const CascadeConfig& config);

/// cascade_snr with every stage filter applied twice.
SnrCurve double_pass_variant(const IntensityTrace& trace, CascadeConfig config);

/// Least squares of log(snr) on log(f / f_ref) over points with
/// f_min <= cutoff <= f_max. Needs at least 4 points.
PowerLawFit fit_power_law(const SnrCurve& curve, double f_min, double f_max, double f_ref = 1e6);

/// Frequency where amplitude * (f / f_ref)^exponent = 1.
double unity_frequency(double amplitude, double exponent, double f_ref);

}  // namespace asetrap
