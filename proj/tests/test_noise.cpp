#include "test_support.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "asetrap/error.hpp"
#include "asetrap/noise.hpp"

using namespace asetrap;

namespace {

constexpr double kPi = std::numbers::pi;

double variance(const Eigen::VectorXd& x) {
  return (x.array() - x.mean()).square().sum() / static_cast<double>(x.size() - 1);
}

// Normalized sample autocorrelation at integer lag.
double autocorrelation(const Eigen::VectorXd& x, Eigen::Index lag) {
  const Eigen::VectorXd c = x.array() - x.mean();
  const Eigen::Index n = c.size() - lag;
  return c.head(n).dot(c.tail(n)) / static_cast<double>(n) / (c.squaredNorm() / static_cast<double>(c.size()));
}

}  // namespace

TEST_SUITE("noise") {
  TEST_CASE("density is flat to the band edge with half weight on the edge") {
    const NoiseSpec spec{0.02, 0.5};
    CHECK(spec.density(0.0) == approx(0.01));
    CHECK(spec.density(1.99) == approx(0.01));
    CHECK(spec.density(2.0) == approx(0.005));
    CHECK(spec.density(2.01) == 0.0);
    // Midpoint integral over the band equals s0.
    const int n = 100000;
    double integral = 0.0;
    for (int i = 0; i < n; ++i) integral += spec.density((i + 0.5) * 4.0 / n) * 4.0 / n;
    CHECK(integral == approx(0.02).epsilon(1e-9));
  }

  TEST_CASE("zero power gives an all-zero trace") {
    const NoiseTrace trace = synth_band_limited({0.0, 1.0}, 100.0, 0.05, 3);
    CHECK(trace.samples.cwiseAbs().maxCoeff() == 0.0);
  }

  TEST_CASE("band-limited variance matches s0 and Parseval") {
    const NoiseTrace trace = synth_band_limited({0.01, 1.0}, 1e4, 0.05, 11);
    CHECK(trace.size() == 200001);
    const double var = variance(trace.samples);
    CHECK(var == approx(0.01).epsilon(0.1));
    const Psd psd = psd_estimate(trace, 4096);
    CHECK(psd.convention == PsdConvention::AngularOneSided);
    CHECK(psd.integral() == approx(var).epsilon(0.05));
  }

  TEST_CASE("autocorrelation follows sin(t/tau0)/(t/tau0)") {
    const double tau0 = 1.0, dt = 0.05;
    const NoiseTrace trace = synth_band_limited({0.01, tau0}, 2e4, dt, 5);
    Eigen::Index first_zero = 0;
    for (Eigen::Index lag = 1; lag < 200; ++lag) {
      const double t = lag * dt / tau0;
      CHECK(std::abs(autocorrelation(trace.samples, lag) - std::sin(t) / t) < 0.05);
      if (first_zero == 0 && autocorrelation(trace.samples, lag) <= 0.0) first_zero = lag;
    }
    CHECK(first_zero * dt == approx(kPi * tau0).epsilon(0.05));
  }

  TEST_CASE("stationarity: halves of a long realization have equal variance") {
    const NoiseTrace trace = synth_band_limited({0.01, 0.1}, 1e5, 0.05, 8);
    const Eigen::Index half = trace.size() / 2;
    const double a = variance(trace.samples.head(half));
    const double b = variance(trace.samples.tail(half));
    CHECK(std::abs(a / b - 1.0) < 0.05);
  }

  TEST_CASE("band-limited density lies within 1.5 dB of s0 tau0 inside the band") {
    const double s0 = 0.01, tau0 = 1.0;
    const NoiseTrace trace = synth_band_limited({s0, tau0}, 1e4, 0.05, 21);
    const Psd psd = psd_estimate(trace, 2048);
    int inside = 0;
    for (Eigen::Index k = 0; k < psd.frequencies.size(); ++k) {
      const double w = psd.frequencies[k];
      if (w < 0.05 / tau0 || w > 0.95 / tau0) continue;
      ++inside;
      CHECK(std::abs(10.0 * std::log10(psd.density[k] / (s0 * tau0))) < 1.5);
    }
    CHECK(inside >= 10);
    CHECK(psd.mean_density(2.0, 10.0) < 1e-3 * s0 * tau0);
  }

  TEST_CASE("synthesis is deterministic in the seed") {
    const NoiseTrace a = synth_band_limited({0.01, 1.0}, 500.0, 0.05, 99);
    const NoiseTrace b = synth_band_limited({0.01, 1.0}, 500.0, 0.05, 99);
    const NoiseTrace c = synth_band_limited({0.01, 1.0}, 500.0, 0.05, 100);
    CHECK(a.samples == b.samples);
    CHECK(a.samples != c.samples);
    CHECK(a.seed == 99);
  }

  TEST_CASE("band-limited synthesis rejects bad arguments") {
    CHECK_THROWS_AS(synth_band_limited({0.01, 1.0}, 100.0, 0.0, 1), InputError);
    CHECK_THROWS_AS(synth_band_limited({0.01, 1.0}, 0.0, 0.05, 1), InputError);
    CHECK_THROWS_AS(synth_band_limited({0.01, 1.0}, 100.0, 3.2, 1), InputError);  // dt > pi tau0
    CHECK_THROWS_AS(synth_band_limited({-1.0, 1.0}, 100.0, 0.05, 1), InputError);
    CHECK_NOTHROW(synth_band_limited({0.01, 1.0}, 100.0, 3.1, 1));
  }

  TEST_CASE("trace interpolation and exhaustion") {
    NoiseTrace trace;
    trace.dt = 0.5;
    trace.samples = Eigen::Vector3d(0.0, 1.0, 3.0);
    CHECK(trace.at(0.25) == approx(0.5));
    CHECK(trace.at(0.75) == approx(2.0));
    CHECK(trace.at(1.0) == approx(3.0));
    CHECK_THROWS_AS(trace.at(1.01), NumericalError);
  }

  TEST_CASE("ASE trace statistics") {
    SUBCASE("mean 168, snr_raw 56 at 1 GHz / 20 GS/s") {
      const IntensityTrace t = synth_ase_trace(168.0, 56.0, 1e9, 20e9, 1 << 20, 4);
      const double snr = t.samples.mean() / std::sqrt(variance(t.samples));
      CHECK(std::abs(snr - 56.0) <= 1.0);
      CHECK(t.fs == 20e9);
    }
    SUBCASE("mean 10, snr_raw 10 gives rms 1") {
      const IntensityTrace t = synth_ase_trace(10.0, 10.0, 1e9, 20e9, 1 << 20, 5);
      CHECK(std::sqrt(variance(t.samples)) == approx(1.0).epsilon(0.03));
      CHECK(t.samples.mean() == approx(10.0).epsilon(1e-3));
    }
    SUBCASE("infinite snr_raw gives a constant trace") {
      const IntensityTrace t =
          synth_ase_trace(0.5, std::numeric_limits<double>::infinity(), 1e9, 20e9, 1000, 6);
      CHECK(t.samples.minCoeff() == 0.5);
      CHECK(t.samples.maxCoeff() == 0.5);
    }
    SUBCASE("aliased construction is rejected") {
      CHECK_THROWS_AS(synth_ase_trace(1.0, 10.0, 2e9, 3e9, 1000, 1), InputError);
      CHECK_THROWS_AS(synth_ase_trace(1.0, 0.0, 1e9, 3e9, 1000, 1), InputError);
    }
  }

  TEST_CASE("PSD of white noise is flat with unit integral") {
    const IntensityTrace t = synth_ase_trace(5.0, 5.0, 0.5, 1.0, 1 << 18, 9);  // rms 1, band to Nyquist
    const Psd psd = psd_estimate(t, 1024);
    CHECK(psd.convention == PsdConvention::HertzOneSided);
    CHECK(psd.integral() == approx(1.0).epsilon(0.1));
    CHECK(psd.mean_density(0.02, 0.2) == approx(psd.mean_density(0.3, 0.48)).epsilon(0.1));
    CHECK(psd.mean_density(0.02, 0.48) == approx(2.0).epsilon(0.1));  // one-sided, fs = 1
  }

  TEST_CASE("PSD of a pure sinusoid") {
    const double amplitude = 0.7, f0 = 0.125;
    Eigen::VectorXd x(1 << 15);
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = amplitude * std::sin(2.0 * kPi * f0 * static_cast<double>(i));
    const Psd psd = psd_estimate(x, 1.0, 512, PsdConvention::HertzOneSided);
    Eigen::Index peak = 0;
    psd.density.maxCoeff(&peak);
    CHECK(psd.frequencies[peak] == approx(f0));
    CHECK(psd.integral() == approx(amplitude * amplitude / 2.0).epsilon(0.05));
    // Hann leakage confines the power to the peak and its two neighbours.
    const double near = psd.density.segment(peak - 1, 3).sum() * psd.resolution();
    CHECK(near / psd.integral() > 0.99);
  }

  TEST_CASE("PSD estimator rejects too few segments") {
    CHECK_THROWS_AS(psd_estimate(Eigen::VectorXd::Ones(1000), 1.0, 512, PsdConvention::HertzOneSided),
                    InputError);
  }

  TEST_CASE("fft_friendly_size returns a 5-smooth multiple of 4") {
    for (Eigen::Index n : {1, 5, 97, 1000, 200001, 1 << 20}) {
      Eigen::Index m = fft_friendly_size(n);
      CHECK(m >= n);
      CHECK(m % 4 == 0);
      for (Eigen::Index p : {2, 3, 5}) {
        while (m % p == 0) m /= p;
      }
      CHECK(m == 1);
    }
  }
}
