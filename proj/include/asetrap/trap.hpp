#pragma once

#include <map>
#include <optional>
#include <string>

namespace asetrap {

namespace constants {
inline constexpr double hbar = 1.054571817e-34;       // J s
inline constexpr double planck = 6.62607015e-34;      // J s
inline constexpr double boltzmann = 1.380649e-23;     // J / K
inline constexpr double speed_of_light = 299792458.0;  // m / s
}  // namespace constants

struct Species {
  std::string name;
  double mass_kg = 0.0;

  /// h^2 / (2 M lambda^2).
  double recoil_energy(double wavelength_m) const;
};

/// Built-in species plus any entries added from a config file.
class SpeciesTable {
 public:
  SpeciesTable();

  void add(Species species);
  std::optional<Species> find(const std::string& name) const;
  const std::map<std::string, Species>& entries() const { return entries_; }

 private:
  std::map<std::string, Species> entries_;
};

struct BeamSpec {
  double power_w = 0.0;
  double waist_m = 0.0;
  double wavelength_m = 1560e-9;

  /// Peak intensity 2P / (pi w0^2).
  double peak_intensity() const;
  /// pi w0^2 / lambda.
  double rayleigh_length() const;
  void validate() const;
};

struct ScatteringReference {
  double depth_j = 0.0;
  double rate_k_per_s = 0.0;
};

struct CouplingConstants {
  /// Trap depth per unit peak intensity, J m^2 / W.
  double u_per_intensity = 0.0;
  ScatteringReference scattering;
};

/// u_per_intensity that gives `depth_k` (in kelvin) for `beam`.
double calibrate_u_per_intensity(const BeamSpec& beam, double depth_k);

/// Calibrated on 6 W, 28 um waist, 1560 nm -> 900 uK, with a scattering
/// heating of 30 nK/s at that depth.
CouplingConstants default_coupling();

struct TrapFrequencies {
  double radial_hz = 0.0;
  double axial_hz = 0.0;
};

struct TrapParams {
  double depth_j = 0.0;
  double depth_uk = 0.0;
  double radial_hz = 0.0;
  double axial_hz = 0.0;
  double rayleigh_m = 0.0;
};

/// U0 = u_per_intensity * 2P / (pi w0^2), in joules.
double depth(const BeamSpec& beam, const CouplingConstants& coupling);

/// Harmonic expansion of U0 exp(-2 r^2 / w0^2) / (1 + z^2 / zR^2) at the focus:
/// omega_r = sqrt(4 U0 / (M w0^2)), omega_z = sqrt(2 U0 / (M zR^2)).
TrapFrequencies trap_frequencies(double depth_j, const BeamSpec& beam, const Species& species);

TrapParams trap_params(const BeamSpec& beam, const Species& species,
                       const CouplingConstants& coupling);

/// Heating rate x hbar omega0^2 converted to K/s, omega0 = 2 pi f_trap.
double rate_to_kelvin(double e_dot, double f_trap_hz);

/// n hbar omega0 / k_B, omega0 = 2 pi f_trap.
double level_to_temperature(int n, double f_trap_hz);

/// Scattering heating proportional to depth at fixed wavelength.
double scattering_heating(double depth_j, const ScatteringReference& reference);

/// c / bandwidth.
double coherence_length(double bandwidth_hz);

inline double kelvin_to_joule(double t_k) { return t_k * constants::boltzmann; }
inline double joule_to_kelvin(double e_j) { return e_j / constants::boltzmann; }

}  // namespace asetrap
