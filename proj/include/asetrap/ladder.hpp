#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "asetrap/noise.hpp"

namespace asetrap {

// Harmonic oscillator with spring constant k0 (1 + eps(t)).
//
// All dynamics run in dimensionless units: time in 1/omega0, energy in
// hbar*omega0, heating rates in hbar*omega0^2. The perturbation
// (hbar omega0 / 4) eps(t) (a + a^dagger)^2 couples |n> to |n> and |n +- 2>;
// amplitudes are kept in the interaction picture, so the n <-> n+2 coupling
// carries the phase exp(-2 i tau).

struct TrapSpec {
  /// Angular trap frequency. Only used to convert tau0 into 1/omega0 units.
  double omega0 = 1.0;
  /// Loss threshold level: population reaching it is removed.
  int n_max = 12;

  void validate() const;
};

/// Matrix elements of (a + a^dagger)^2, in units of hbar / (2 M omega0).
template <typename Scalar>
struct BasicCouplingTable {
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

  /// diagonal[n] = 2n + 1, n = 0 .. top.
  Array diagonal;
  /// off_diagonal[n] = sqrt((n + 1)(n + 2)) couples n <-> n + 2, n = 0 .. top - 2.
  Array off_diagonal;

  int top() const { return static_cast<int>(diagonal.size()) - 1; }

  Scalar element(int n, int m) const {
    if (n < 0 || m < 0 || n > top() || m > top()) return Scalar(0);
    if (n == m) return diagonal[n];
    if (m == n + 2) return off_diagonal[n];
    if (n == m + 2) return off_diagonal[m];
    return Scalar(0);
  }
};

using CouplingTable = BasicCouplingTable<double>;

template <typename Scalar = double>
BasicCouplingTable<Scalar> coupling_table(int top) {
  BasicCouplingTable<Scalar> table;
  table.diagonal.resize(top + 1);
  table.off_diagonal.resize(std::max(top - 1, 0));
  for (int n = 0; n <= top; ++n) table.diagonal[n] = Scalar(2 * n + 1);
  for (int n = 0; n + 2 <= top; ++n) {
    table.off_diagonal[n] = std::sqrt(Scalar((n + 1) * (n + 2)));
  }
  return table;
}

/// d a / d tau for amplitudes `a` at time tau under fractional fluctuation eps:
///   -(i/4) eps [ (2n+1) a_n + sqrt((n-1)n) e^{+2i tau} a_{n-2}
///                           + sqrt((n+1)(n+2)) e^{-2i tau} a_{n+2} ].
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> rhs(
    const Eigen::MatrixBase<Derived>& a,
    const BasicCouplingTable<typename Derived::RealScalar>& table,
    typename Derived::RealScalar eps, typename Derived::RealScalar tau) {
  using Complex = typename Derived::Scalar;
  using Real = typename Derived::RealScalar;
  const Eigen::Index size = a.size();
  eigen_assert(size == table.diagonal.size());

  Eigen::Matrix<Complex, Eigen::Dynamic, 1> out(size);
  out.array() = table.diagonal.template cast<Complex>() * a.array();
  if (size > 2) {
    const Complex up = std::polar(Real(1), Real(2) * tau);
    const auto off = table.off_diagonal.template cast<Complex>();
    out.tail(size - 2).array() += up * off * a.head(size - 2).array();
    out.head(size - 2).array() += std::conj(up) * off * a.tail(size - 2).array();
  }
  return out * Complex(Real(0), -eps / Real(4));
}

/// Mean energy sum_n n |a_n|^2 (zero-point term excluded), in hbar*omega0.
template <typename Derived>
typename Derived::RealScalar energy(const Eigen::MatrixBase<Derived>& a) {
  using Real = typename Derived::RealScalar;
  Real e(0);
  for (Eigen::Index n = 0; n < a.size(); ++n) e += Real(n) * std::norm(a[n]);
  return e;
}

struct LadderState {
  /// a_0 .. a_top; `top` is the absorbing level.
  Eigen::VectorXcd amplitudes;
  /// Cumulative absorbed population.
  double lost = 0.0;
  /// Dimensionless time.
  double t = 0.0;

  static LadderState number_state(int n, int top);

  int top() const { return static_cast<int>(amplitudes.size()) - 1; }
  double norm() const { return amplitudes.squaredNorm(); }
  /// norm() + lost; equals 1 for a normalized start.
  double total_population() const { return norm() + lost; }
};

/// Absorbing level for a ladder started from parity class of `level`: the
/// first level >= n_max reachable in steps of two.
int absorbing_level(int n_max, int level);

LadderState absorb(LadderState state);
double energy(const LadderState& state);
Eigen::VectorXcd rhs(const LadderState& state, double eps, double tau);

/// Classic RK4 step with eps linearly interpolated from the noise samples at
/// the stage times. Absorption is applied afterwards when `absorbing` is set.
LadderState step(const LadderState& state, const NoiseTrace& noise, double dt,
                 bool absorbing = true);

/// Step bound from the configured resolution rules: min(2 pi / 200, tau0 / 20),
/// with tau0 in 1/omega0 units.
double default_step(double tau0);

enum class InitialCondition { Ground, Thermal };

struct SimConfig {
  /// Integrator step in 1/omega0; 0 selects default_step(tau0).
  double dt = 0.0;
  double t_end = 100.0;
  int n_realizations = 100;
  std::uint64_t master_seed = 1;
  /// Fraction of [0, t_end] available to rate fits.
  double fit_window = 1.0;
  /// Fits stop where the ensemble-mean lost population reaches this value.
  double loss_threshold = 0.01;
  /// Output grid spacing for E(t) and lost(t), in 1/omega0.
  double record_interval = 1.0;
  InitialCondition initial = InitialCondition::Ground;
  /// k_B T / (hbar omega0) for the thermal initial ensemble.
  double thermal_temperature = 1.0;
  bool absorbing = true;
  /// Loss rates below max(2 stderr, loss_floor) are reported as unresolved.
  /// The default corresponds to 1e-6 of the population (the bookkeeping
  /// tolerance) lost over the default run length of 100 / omega0.
  double loss_floor = 1e-8;
  /// Worker threads; 0 uses the hardware concurrency.
  unsigned threads = 0;

  void validate() const;
};

struct RealizationSeries {
  std::vector<double> times;
  std::vector<double> energy;
  std::vector<double> lost;
  std::uint64_t seed = 0;
  int initial_level = 0;
  /// max |sum |a_n|^2 + lost - 1| over every step.
  double max_bookkeeping_error = 0.0;
};

/// Integrates `state` through `noise` up to t_end with `steps` equal steps,
/// recording every `record_every` steps (and the initial point).
RealizationSeries integrate(LadderState state, const NoiseTrace& noise, double t_end,
                            long steps, long record_every, bool absorbing = true);

/// One stochastic trajectory. The noise seed is derive_seed(master_seed, index).
RealizationSeries run_realization(const TrapSpec& trap, const NoiseSpec& spec,
                                  const SimConfig& config, std::uint64_t index);

enum class FitStatus { Ok, SaturatedLoss };

struct HeatingResult {
  double e_dot = 0.0;
  double loss_rate = 0.0;
  double stderr_e_dot = 0.0;
  double stderr_loss = 0.0;
  bool loss_below_resolution = true;
  FitStatus status = FitStatus::Ok;
  int fit_points = 0;
  double fit_t_end = 0.0;
  double max_bookkeeping_error = 0.0;
  std::vector<double> times;
  std::vector<double> mean_energy;
  std::vector<double> mean_lost;
  std::vector<std::uint64_t> seeds;
};

HeatingResult ensemble_heating(const TrapSpec& trap, const NoiseSpec& spec,
                               const SimConfig& config);

/// First-order (golden rule) energy growth rate in hbar*omega0^2 for the
/// populations of `initial`: transitions n -> n +- 2 at rate
/// (pi / 16) |<n +- 2|(a + a^dagger)^2|n>|^2 S(2 omega0).
double perturbative_rate(const TrapSpec& trap, const NoiseSpec& spec, const LadderState& initial);

/// n log-spaced values from lo to hi inclusive.
std::vector<double> log_spaced(double lo, double hi, int n);

/// Ordinary least-squares slope of y against x.
double ls_slope(const double* x, const double* y, int n);

}  // namespace asetrap
