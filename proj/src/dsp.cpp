#include "asetrap/dsp.hpp"

#include <limits>
#include <string>

namespace asetrap {

namespace {

const double kHalfPower = 1.0 / std::sqrt(2.0);

double response_db(const Eigen::VectorXd& taps, double f) {
  return 20.0 * std::log10(magnitude_response(taps, f));
}

}  // namespace

FirFilter design_lowpass(int order, double fc_norm) {
  if (order < 8) throw InputError("FIR order must be >= 8");
  if (!(fc_norm > 0.0 && fc_norm < 1.0)) throw InputError("fc_norm must lie in (0, 1)");

  const auto gain_at_fc = [&](double cutoff) {
    return magnitude_response(windowed_sinc<double>(order, cutoff), fc_norm);
  };
  double lo = 1e-6;
  double hi = 1.0;
  if (gain_at_fc(lo) > kHalfPower || gain_at_fc(hi) < kHalfPower) {
    throw NumericalError("order " + std::to_string(order) + " cannot place -3 dB at fc_norm = " +
                         std::to_string(fc_norm));
  }
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (gain_at_fc(mid) < kHalfPower ? lo : hi) = mid;
  }

  FirFilter filter;
  filter.taps = windowed_sinc<double>(order, 0.5 * (lo + hi));
  filter.fc_norm = fc_norm;
  if (std::abs(response_db(filter.taps, fc_norm) + 3.0) > 0.2) {
    throw NumericalError("designed filter misses -3 dB at fc_norm by more than 0.2 dB");
  }
  return filter;
}

IntensityTrace filter_apply(const IntensityTrace& trace, const FirFilter& filter) {
  const Eigen::Index taps = filter.taps.size();
  if (taps < 1) throw InputError("filter has no taps");
  if (trace.size() <= 10 * taps) {
    throw InputError("trace of " + std::to_string(trace.size()) + " samples too short for a " +
                     std::to_string(taps) + "-tap filter");
  }
  const Eigen::VectorXd reversed = filter.taps.reverse();
  const Eigen::Index out_len = trace.size() - taps + 1;

  IntensityTrace out;
  out.fs = trace.fs;
  out.unit = trace.unit;
  out.samples.resize(out_len);
  for (Eigen::Index i = 0; i < out_len; ++i) {
    out.samples[i] = reversed.dot(trace.samples.segment(i, taps));
  }
  return out;
}

IntensityTrace decimate(const IntensityTrace& trace, int d) {
  if (d < 1) throw InputError("decimation factor must be >= 1");
  IntensityTrace out;
  out.fs = trace.fs / d;
  out.unit = trace.unit;
  const Eigen::Index n = (trace.size() + d - 1) / d;
  out.samples = Eigen::Map<const Eigen::VectorXd, 0, Eigen::InnerStride<>>(
      trace.samples.data(), n, Eigen::InnerStride<>(d));
  return out;
}

double snr(const Eigen::Ref<const Eigen::VectorXd>& samples) {
  const Eigen::Index n = samples.size();
  if (n < 100) throw InputError("snr needs at least 100 samples");
  const double mean = samples.mean();
  const double var = (samples.array() - mean).square().sum() / static_cast<double>(n - 1);
  const double rms = std::sqrt(var);
  // A constant trace leaves only rounding residue in the rms.
  if (rms <= 64.0 * std::numeric_limits<double>::epsilon() * std::abs(mean)) {
    if (mean != 0.0) return std::numeric_limits<double>::infinity();
  }
  if (mean == 0.0 || std::abs(mean) <= 1e-9 * rms) {
    throw UndefinedSnr("SNR undefined for a zero-mean trace");
  }
  return mean / rms;
}

double snr(const IntensityTrace& trace) { return snr(trace.samples); }

void CascadeConfig::validate() const {
  for (const StageConfig* stage : {&first_stage, &later_stage}) {
    if (stage->decimation < 2) throw InputError("cascade decimation factors must be >= 2");
    if (stage->fc_norm > 1.0 / stage->decimation + 1e-12) {
      throw InputError("stage cutoff fc_norm must be <= 1/D to avoid aliasing");
    }
  }
  if (passes_per_stage != 1 && passes_per_stage != 2) {
    throw InputError("passes_per_stage must be 1 or 2");
  }
  if (min_samples < 100) throw InputError("min_samples must be >= 100");
}

SnrCurve cascade_snr(const IntensityTrace& trace, const CascadeConfig& config) {
  config.validate();
  if (!(trace.fs > 0.0)) throw InputError("sample rate must be > 0");
  const FirFilter first = design_lowpass(config.first_stage.order, config.first_stage.fc_norm);
  const FirFilter later = design_lowpass(config.later_stage.order, config.later_stage.fc_norm);

  SnrCurve curve;
  IntensityTrace current = trace;
  for (int stage = 0;; ++stage) {
    const StageConfig& cfg = stage == 0 ? config.first_stage : config.later_stage;
    const FirFilter& filter = stage == 0 ? first : later;
    const Eigen::Index taps = filter.taps.size();
    const Eigen::Index needed = std::max<Eigen::Index>(
        config.min_samples, 10 * taps + 1 + (config.passes_per_stage - 1) * (taps - 1));
    if (current.size() < needed) break;

    IntensityTrace filtered = filter_apply(current, filter);
    for (int pass = 1; pass < config.passes_per_stage; ++pass) {
      filtered = filter_apply(filtered, filter);
    }
    curve.points.push_back({filter.fc_norm * current.fs / 2.0, snr(filtered), filtered.size()});
    current = decimate(filtered, cfg.decimation);
  }
  if (curve.points.empty()) {
    throw InputError("trace shorter than one cascade stage (" + std::to_string(trace.size()) +
                     " samples)");
  }
  return curve;
}

SnrCurve double_pass_variant(const IntensityTrace& trace, CascadeConfig config) {
  config.passes_per_stage = 2;
  return cascade_snr(trace, config);
}

double unity_frequency(double amplitude, double exponent, double f_ref) {
  if (exponent == 0.0) return std::numeric_limits<double>::infinity();
  return f_ref * std::pow(amplitude, -1.0 / exponent);
}

PowerLawFit fit_power_law(const SnrCurve& curve, double f_min, double f_max, double f_ref) {
  std::vector<double> x, y;
  for (const auto& p : curve.points) {
    if (p.cutoff_hz >= f_min && p.cutoff_hz <= f_max && std::isfinite(p.snr) && p.snr > 0.0) {
      x.push_back(std::log(p.cutoff_hz / f_ref));
      y.push_back(std::log(p.snr));
    }
  }
  if (x.size() < 4) {
    throw InputError("power-law fit needs >= 4 points in [f_min, f_max], got " +
                     std::to_string(x.size()));
  }
  const Eigen::Map<const Eigen::ArrayXd> lx(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::Map<const Eigen::ArrayXd> ly(y.data(), static_cast<Eigen::Index>(y.size()));
  const double mx = lx.mean(), my = ly.mean();
  const double slope = ((lx - mx) * (ly - my)).sum() / (lx - mx).square().sum();

  PowerLawFit fit;
  fit.exponent = slope;
  fit.amplitude = std::exp(my - slope * mx);
  fit.f_ref = f_ref;
  fit.f_unity = unity_frequency(fit.amplitude, fit.exponent, f_ref);
  fit.points = static_cast<int>(x.size());
  return fit;
}

}  // namespace asetrap
