#include "asetrap/noise.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "asetrap/error.hpp"
#include "asetrap/seeding.hpp"

namespace asetrap {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

bool is_smooth(Eigen::Index n) {
  for (Eigen::Index p : {2, 3, 5}) {
    while (n % p == 0) n /= p;
  }
  return n == 1;
}

}  // namespace

double NoiseSpec::density(double omega) const {
  const double edge = band_edge();
  if (omega < 0.0 || omega > edge) return 0.0;
  const double level = s0 * tau0;
  return omega == edge ? 0.5 * level : level;
}

void NoiseSpec::validate() const {
  if (!(s0 >= 0.0) || !std::isfinite(s0)) throw InputError("noise power s0 must be finite and >= 0");
  if (!(tau0 > 0.0) || !std::isfinite(tau0)) {
    throw InputError("coherence time tau0 must be finite and > 0");
  }
}

double NoiseTrace::at(double t) const {
  const double x = t / dt;
  const auto last = static_cast<double>(samples.size() - 1);
  if (samples.size() == 0 || x < -1e-9 || x > last + 1e-9) {
    throw NumericalError("noise trace exhausted at t = " + std::to_string(t) +
                         " (trace covers [0, " + std::to_string(duration()) + "])");
  }
  const double clamped = std::clamp(x, 0.0, last);
  auto i = static_cast<Eigen::Index>(clamped);
  if (i >= samples.size() - 1) return samples[samples.size() - 1];
  const double frac = clamped - static_cast<double>(i);
  return samples[i] + frac * (samples[i + 1] - samples[i]);
}

double Psd::resolution() const {
  return frequencies.size() > 1 ? frequencies[1] - frequencies[0] : 0.0;
}

double Psd::integral() const { return density.sum() * resolution(); }

double Psd::mean_density(double lo, double hi) const {
  double sum = 0.0;
  int count = 0;
  for (Eigen::Index k = 0; k < frequencies.size(); ++k) {
    if (frequencies[k] >= lo && frequencies[k] <= hi) {
      sum += density[k];
      ++count;
    }
  }
  if (count == 0) throw InputError("no PSD bins inside the requested range");
  return sum / count;
}

Eigen::Index fft_friendly_size(Eigen::Index n) {
  Eigen::Index m = std::max<Eigen::Index>(4, n);
  m += (4 - m % 4) % 4;
  while (!is_smooth(m)) m += 4;
  return m;
}

Eigen::VectorXd synthesize_flat_band(Eigen::Index n, double dt, double omega_edge,
                                     double variance, std::uint64_t seed) {
  if (n < 1) throw InputError("synthesis length must be positive");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  if (variance == 0.0) return out;

  const Eigen::Index nfft = fft_friendly_size(n);
  const Eigen::Index half = nfft / 2;
  const double nf = static_cast<double>(nfft);
  const double dw = kTwoPi / (nf * dt);
  const double level = variance / omega_edge;

  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<std::complex<double>> spectrum(static_cast<std::size_t>(half + 1));
  for (Eigen::Index k = 0; k <= half; ++k) {
    const double wk = dw * static_cast<double>(k);
    const double lo = std::max(0.0, wk - 0.5 * dw);
    const double hi = (k == half) ? wk : wk + 0.5 * dw;
    const double overlap = std::max(0.0, std::min(hi, omega_edge) - lo);
    if (overlap <= 0.0) continue;
    const double sigma = std::sqrt(level * overlap);
    if (k == 0 || k == half) {
      spectrum[static_cast<std::size_t>(k)] = nf * sigma * gauss(rng);
    } else {
      const double re = gauss(rng);
      const double im = gauss(rng);
      spectrum[static_cast<std::size_t>(k)] = 0.5 * nf * sigma * std::complex<double>(re, -im);
    }
  }

  std::vector<double> series(static_cast<std::size_t>(nfft));
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  fft.inv(series.data(), spectrum.data(), nfft);
  out = Eigen::Map<const Eigen::VectorXd>(series.data(), n);
  return out;
}

NoiseTrace synth_band_limited(const NoiseSpec& spec, double duration, double dt,
                              std::uint64_t seed) {
  spec.validate();
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InputError("sample spacing dt must be > 0");
  if (!(duration > 0.0) || !std::isfinite(duration)) throw InputError("duration must be > 0");
  if (dt > std::numbers::pi * spec.tau0) {
    throw InputError("dt too coarse to resolve the band edge (need dt <= pi * tau0)");
  }
  const auto n = static_cast<Eigen::Index>(std::floor(duration / dt + 1e-9)) + 1;
  NoiseTrace trace;
  trace.dt = dt;
  trace.seed = seed;
  trace.samples = synthesize_flat_band(std::max<Eigen::Index>(n, 2), dt, spec.band_edge(),
                                       spec.s0, seed);
  return trace;
}

IntensityTrace synth_ase_trace(double mean, double snr_raw, double bandwidth_hz, double fs,
                               Eigen::Index n, std::uint64_t seed) {
  if (!(fs > 0.0) || !(bandwidth_hz > 0.0)) throw InputError("fs and bandwidth must be > 0");
  if (fs < 2.0 * bandwidth_hz) {
    throw InputError("fs < 2 * bandwidth: the construction would alias");
  }
  if (!(snr_raw > 0.0)) throw InputError("snr_raw must be > 0");
  if (!std::isfinite(mean)) throw InputError("mean must be finite");
  if (n < 2) throw InputError("trace needs at least 2 samples");

  IntensityTrace trace;
  trace.fs = fs;
  const double rms = std::isinf(snr_raw) ? 0.0 : std::abs(mean) / snr_raw;
  trace.samples = synthesize_flat_band(n, 1.0 / fs, kTwoPi * bandwidth_hz, rms * rms, seed);
  trace.samples.array() += mean;
  return trace;
}

Psd psd_estimate(const Eigen::Ref<const Eigen::VectorXd>& samples, double sample_spacing,
                 Eigen::Index segment_length, PsdConvention convention) {
  const Eigen::Index n = samples.size();
  if (segment_length < 4) throw InputError("segment_length must be >= 4");
  if (n < segment_length) throw InputError("trace shorter than segment_length");
  const Eigen::Index hop = segment_length / 2;
  const Eigen::Index segments = (n - segment_length) / hop + 1;
  if (segments < 8) {
    throw InputError("psd_estimate needs at least 8 averaging segments, got " +
                     std::to_string(segments));
  }

  const double L = static_cast<double>(segment_length);
  Eigen::VectorXd window(segment_length);
  for (Eigen::Index j = 0; j < segment_length; ++j) {
    window[j] = 0.5 * (1.0 - std::cos(kTwoPi * static_cast<double>(j) / L));
  }
  const double window_power = window.squaredNorm();
  const double mean = samples.mean();

  const Eigen::Index half = segment_length / 2;
  Eigen::VectorXd accum = Eigen::VectorXd::Zero(half + 1);
  std::vector<double> buffer(static_cast<std::size_t>(segment_length));
  std::vector<std::complex<double>> spectrum(static_cast<std::size_t>(segment_length));
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  for (Eigen::Index s = 0; s < segments; ++s) {
    Eigen::Map<Eigen::VectorXd> seg(buffer.data(), segment_length);
    seg = (samples.segment(s * hop, segment_length).array() - mean) * window.array();
    fft.fwd(spectrum.data(), buffer.data(), segment_length);
    for (Eigen::Index k = 0; k <= half; ++k) accum[k] += std::norm(spectrum[static_cast<std::size_t>(k)]);
  }

  const double fs = 1.0 / sample_spacing;
  Psd psd;
  psd.convention = convention;
  psd.frequencies.resize(half + 1);
  psd.density.resize(half + 1);
  for (Eigen::Index k = 0; k <= half; ++k) {
    const double one_sided = (k == 0 || k == half) ? 1.0 : 2.0;
    psd.frequencies[k] = static_cast<double>(k) * fs / L;
    psd.density[k] = one_sided * accum[k] / (static_cast<double>(segments) * fs * window_power);
  }
  if (convention == PsdConvention::AngularOneSided) {
    psd.frequencies *= kTwoPi;
    psd.density /= kTwoPi;
  }
  return psd;
}

Psd psd_estimate(const NoiseTrace& trace, Eigen::Index segment_length) {
  return psd_estimate(trace.samples, trace.dt, segment_length, PsdConvention::AngularOneSided);
}

Psd psd_estimate(const IntensityTrace& trace, Eigen::Index segment_length) {
  return psd_estimate(trace.samples, 1.0 / trace.fs, segment_length, PsdConvention::HertzOneSided);
}

}  // namespace asetrap
