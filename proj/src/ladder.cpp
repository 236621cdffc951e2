#include "asetrap/ladder.hpp"

#include <atomic>
#include <numbers>
#include <random>
#include <string>
#include <thread>

#include "asetrap/error.hpp"
#include "asetrap/seeding.hpp"

namespace asetrap {

namespace {

constexpr double kPi = std::numbers::pi;

// Largest |h * eigenvalue| of the coupling operator per RK4 substep. RK4 is not
// norm preserving; its per-step norm defect scales as (h rho)^6 / 72, so this
// keeps the population bookkeeping within 1e-6 even for strong noise.
constexpr double kMaxStepPhase = 0.05;

// RK4 driver with preallocated stage buffers; the hot loop of every run.
class Propagator {
 public:
  explicit Propagator(int top)
      : table_(coupling_table(top)),
        k1_(top + 1), k2_(top + 1), k3_(top + 1), k4_(top + 1), probe_(top + 1) {
    // Gershgorin bound on the spectral radius of the coupling matrix / |eps|.
    for (int n = 0; n <= top; ++n) {
      radius_ = std::max(radius_, 0.25 * (table_.element(n, n) + table_.element(n, n - 2) +
                                          table_.element(n, n + 2)));
    }
  }

  /// Advances by h with eps sampled at t, t + h/2 and t + h (linear in
  /// between), splitting into equal substeps when the coupling is strong.
  void advance(Eigen::VectorXcd& a, double t, double h, double eps0, double eps_mid,
               double eps1) {
    const double peak = std::max({std::abs(eps0), std::abs(eps_mid), std::abs(eps1)});
    const int substeps = std::max(1, static_cast<int>(std::ceil(h * radius_ * peak / kMaxStepPhase)));
    if (substeps == 1) {
      rk4(a, t, h, eps0, eps_mid, eps1);
      return;
    }
    const auto eps_at = [&](double s) {  // s in [0, 1]
      return s <= 0.5 ? eps0 + 2.0 * s * (eps_mid - eps0) : eps_mid + (2.0 * s - 1.0) * (eps1 - eps_mid);
    };
    const double hs = h / substeps;
    for (int k = 0; k < substeps; ++k) {
      const double s0 = static_cast<double>(k) / substeps;
      const double s1 = static_cast<double>(k + 1) / substeps;
      rk4(a, t + hs * k, hs, eps_at(s0), eps_at(0.5 * (s0 + s1)), eps_at(s1));
    }
  }

 private:
  void rk4(Eigen::VectorXcd& a, double t, double h, double eps0, double eps_mid, double eps1) {
    derivative(a, eps0, t, k1_);
    probe_.noalias() = a + (0.5 * h) * k1_;
    derivative(probe_, eps_mid, t + 0.5 * h, k2_);
    probe_.noalias() = a + (0.5 * h) * k2_;
    derivative(probe_, eps_mid, t + 0.5 * h, k3_);
    probe_.noalias() = a + h * k3_;
    derivative(probe_, eps1, t + h, k4_);
    a += (h / 6.0) * (k1_ + 2.0 * k2_ + 2.0 * k3_ + k4_);
  }

  void derivative(const Eigen::VectorXcd& a, double eps, double tau, Eigen::VectorXcd& out) const {
    const Eigen::Index size = a.size();
    const std::complex<double> scale(0.0, -0.25 * eps);
    if (eps == 0.0) {
      out.setZero();
      return;
    }
    const std::complex<double> up = std::polar(1.0, 2.0 * tau);
    const std::complex<double> down = std::conj(up);
    for (Eigen::Index n = 0; n < size; ++n) {
      std::complex<double> acc = table_.diagonal[n] * a[n];
      if (n >= 2) acc += up * table_.off_diagonal[n - 2] * a[n - 2];
      if (n + 2 < size) acc += down * table_.off_diagonal[n] * a[n + 2];
      out[n] = scale * acc;
    }
  }

  CouplingTable table_;
  double radius_ = 0.0;
  Eigen::VectorXcd k1_, k2_, k3_, k4_, probe_;
};

void absorb_in_place(LadderState& state) {
  auto& top = state.amplitudes[state.amplitudes.size() - 1];
  const double p = std::norm(top);
  if (p > 0.0) {
    state.lost += p;
    top = 0.0;
  }
}

int thermal_level(const SimConfig& config, int n_max, std::uint64_t seed) {
  if (config.initial == InitialCondition::Ground || config.thermal_temperature <= 0.0) return 0;
  std::vector<double> weights(static_cast<std::size_t>(n_max));
  for (int n = 0; n < n_max; ++n) {
    weights[static_cast<std::size_t>(n)] = std::exp(-n / config.thermal_temperature);
  }
  Rng rng(splitmix64(seed ^ 0x74686572'6D616CULL));
  std::discrete_distribution<int> pick(weights.begin(), weights.end());
  return pick(rng);
}

}  // namespace

void TrapSpec::validate() const {
  if (!(omega0 > 0.0) || !std::isfinite(omega0)) throw InputError("omega0 must be > 0");
  if (n_max < 4) throw InputError("n_max must be >= 4");
}

void SimConfig::validate() const {
  if (dt < 0.0 || !std::isfinite(dt)) throw InputError("dt must be >= 0 (0 selects the default)");
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw InputError("t_end must be > 0");
  if (n_realizations < 1) throw InputError("n_realizations must be >= 1");
  if (!(fit_window > 0.0) || fit_window > 1.0) throw InputError("fit_window must lie in (0, 1]");
  if (!(loss_threshold > 0.0)) throw InputError("loss_threshold must be > 0");
  if (!(record_interval > 0.0)) throw InputError("record_interval must be > 0");
}

LadderState LadderState::number_state(int n, int top) {
  if (n < 0 || n > top) throw InputError("number state outside the ladder");
  LadderState state;
  state.amplitudes = Eigen::VectorXcd::Zero(top + 1);
  state.amplitudes[n] = 1.0;
  return state;
}

int absorbing_level(int n_max, int level) {
  return ((n_max - level) % 2 == 0) ? n_max : n_max + 1;
}

LadderState absorb(LadderState state) {
  absorb_in_place(state);
  return state;
}

double energy(const LadderState& state) { return energy(state.amplitudes); }

Eigen::VectorXcd rhs(const LadderState& state, double eps, double tau) {
  return rhs(state.amplitudes, coupling_table(state.top()), eps, tau);
}

LadderState step(const LadderState& state, const NoiseTrace& noise, double dt, bool absorbing) {
  LadderState next = state;
  Propagator prop(state.top());
  prop.advance(next.amplitudes, state.t, dt, noise.at(state.t), noise.at(state.t + 0.5 * dt),
               noise.at(state.t + dt));
  next.t = state.t + dt;
  if (absorbing) absorb_in_place(next);
  return next;
}

double default_step(double tau0) { return std::min(2.0 * kPi / 200.0, tau0 / 20.0); }

RealizationSeries integrate(LadderState state, const NoiseTrace& noise, double t_end, long steps,
                            long record_every, bool absorbing) {
  if (steps < 1 || record_every < 1) throw InputError("integrate needs steps >= 1");
  const double t0 = state.t;
  const double h = (t_end - t0) / static_cast<double>(steps);
  if (!(h > 0.0)) throw InputError("integrate needs t_end > state.t");

  RealizationSeries series;
  series.seed = noise.seed;
  const auto record = [&] {
    series.times.push_back(state.t);
    series.energy.push_back(energy(state.amplitudes));
    series.lost.push_back(state.lost);
  };
  const double start_total = state.total_population();
  record();

  Propagator prop(state.top());
  double eps_prev = noise.at(t0);
  for (long i = 0; i < steps; ++i) {
    const double t = t0 + h * static_cast<double>(i);
    const double t_next = t0 + h * static_cast<double>(i + 1);
    const double eps_mid = noise.at(t + 0.5 * h);
    const double eps_next = noise.at(t_next);
    prop.advance(state.amplitudes, t, h, eps_prev, eps_mid, eps_next);
    eps_prev = eps_next;
    state.t = t_next;
    if (absorbing) absorb_in_place(state);
    series.max_bookkeeping_error =
        std::max(series.max_bookkeeping_error, std::abs(state.total_population() - start_total));
    if ((i + 1) % record_every == 0) record();
  }
  return series;
}

RealizationSeries run_realization(const TrapSpec& trap, const NoiseSpec& spec,
                                  const SimConfig& config, std::uint64_t index) {
  trap.validate();
  spec.validate();
  config.validate();

  const NoiseSpec scaled{spec.s0, spec.tau0 * trap.omega0};
  const double bound = std::min(2.0 * kPi, scaled.tau0) / 20.0;
  const double requested = config.dt > 0.0 ? config.dt : default_step(scaled.tau0);
  if (requested > bound * (1.0 + 1e-12)) {
    throw InputError("dt = " + std::to_string(requested) + " exceeds min(2 pi, tau0) / 20 = " +
                     std::to_string(bound));
  }
  const auto steps = static_cast<long>(std::ceil(config.t_end / requested - 1e-9));
  const double h = config.t_end / static_cast<double>(steps);
  const long record_every =
      std::max(1L, static_cast<long>(std::llround(config.record_interval / h)));

  const std::uint64_t seed = derive_seed(config.master_seed, index);
  const NoiseTrace noise = synth_band_limited(scaled, config.t_end, 0.5 * h, seed);

  const int level = thermal_level(config, trap.n_max, seed);
  LadderState state = LadderState::number_state(level, absorbing_level(trap.n_max, level));
  RealizationSeries series = integrate(std::move(state), noise, config.t_end, steps, record_every,
                                       config.absorbing);
  series.seed = seed;
  series.initial_level = level;
  return series;
}

double ls_slope(const double* x, const double* y, int n) {
  if (n < 2) return 0.0;
  double mx = 0.0, my = 0.0;
  for (int i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (int i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

HeatingResult ensemble_heating(const TrapSpec& trap, const NoiseSpec& spec,
                               const SimConfig& config) {
  config.validate();
  const auto count = static_cast<std::size_t>(config.n_realizations);
  std::vector<RealizationSeries> runs(count);

  unsigned workers = config.threads != 0 ? config.threads : std::thread::hardware_concurrency();
  workers = std::clamp<unsigned>(workers, 1U, static_cast<unsigned>(count));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count && !failed; i = next++) {
          try {
            runs[i] = run_realization(trap, spec, config, i);
          } catch (...) {
            if (!failed.exchange(true)) failure = std::current_exception();
          }
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);

  HeatingResult result;
  const std::size_t points = runs.front().times.size();
  result.times = runs.front().times;
  result.mean_energy.assign(points, 0.0);
  result.mean_lost.assign(points, 0.0);
  // Fixed summation order (by realization index) keeps results scheduling-independent.
  for (const auto& run : runs) {
    for (std::size_t k = 0; k < points; ++k) {
      result.mean_energy[k] += run.energy[k];
      result.mean_lost[k] += run.lost[k];
    }
    result.seeds.push_back(run.seed);
    result.max_bookkeeping_error = std::max(result.max_bookkeeping_error, run.max_bookkeeping_error);
  }
  for (std::size_t k = 0; k < points; ++k) {
    result.mean_energy[k] /= static_cast<double>(count);
    result.mean_lost[k] /= static_cast<double>(count);
  }

  const double t_limit = config.fit_window * config.t_end * (1.0 + 1e-12);
  int fit = 0;
  while (static_cast<std::size_t>(fit) < points && result.times[static_cast<std::size_t>(fit)] <= t_limit &&
         result.mean_lost[static_cast<std::size_t>(fit)] < config.loss_threshold) {
    ++fit;
  }
  if (fit < 3) {
    result.status = FitStatus::SaturatedLoss;
    fit = static_cast<int>(std::min<std::size_t>(3, points));
  }
  result.fit_points = fit;
  result.fit_t_end = result.times[static_cast<std::size_t>(fit - 1)];
  result.e_dot = ls_slope(result.times.data(), result.mean_energy.data(), fit);
  result.loss_rate = ls_slope(result.times.data(), result.mean_lost.data(), fit);

  if (count < 2) {
    result.stderr_e_dot = std::numeric_limits<double>::infinity();
    result.stderr_loss = std::numeric_limits<double>::infinity();
  } else {
    Eigen::ArrayXd e_slopes(static_cast<Eigen::Index>(count));
    Eigen::ArrayXd l_slopes(static_cast<Eigen::Index>(count));
    for (std::size_t i = 0; i < count; ++i) {
      e_slopes[static_cast<Eigen::Index>(i)] = ls_slope(result.times.data(), runs[i].energy.data(), fit);
      l_slopes[static_cast<Eigen::Index>(i)] = ls_slope(result.times.data(), runs[i].lost.data(), fit);
    }
    const auto stderr_of = [count](const Eigen::ArrayXd& v) {
      const double var = (v - v.mean()).square().sum() / static_cast<double>(count - 1);
      return std::sqrt(var / static_cast<double>(count));
    };
    result.stderr_e_dot = stderr_of(e_slopes);
    result.stderr_loss = stderr_of(l_slopes);
  }
  result.loss_below_resolution =
      !(result.loss_rate > std::max(2.0 * result.stderr_loss, config.loss_floor));
  return result;
}

double perturbative_rate(const TrapSpec& trap, const NoiseSpec& spec, const LadderState& initial) {
  trap.validate();
  spec.validate();
  const NoiseSpec scaled{spec.s0, spec.tau0 * trap.omega0};
  const double s_res = scaled.density(2.0);
  if (s_res == 0.0) return 0.0;

  const CouplingTable table = coupling_table(initial.top());
  double rate = 0.0;
  for (int n = 0; n <= initial.top(); ++n) {
    const double p = std::norm(initial.amplitudes[n]);
    if (p == 0.0) continue;
    const double up = n + 2 <= initial.top() ? table.element(n + 2, n) : 0.0;
    const double down = table.element(n - 2, n);
    // Each transition moves the energy by 2 hbar omega0.
    rate += p * 2.0 * (kPi / 16.0) * s_res * (up * up - down * down);
  }
  return rate;
}

std::vector<double> log_spaced(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi >= lo) || n < 1) throw InputError("invalid log-spaced grid");
  std::vector<double> grid(static_cast<std::size_t>(n));
  if (n == 1) {
    grid[0] = lo;
    return grid;
  }
  const double a = std::log10(lo), b = std::log10(hi);
  for (int i = 0; i < n; ++i) {
    grid[static_cast<std::size_t>(i)] = std::pow(10.0, a + (b - a) * i / (n - 1));
  }
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

}  // namespace asetrap
