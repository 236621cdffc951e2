#include "asetrap/trap.hpp"

#include <cmath>
#include <numbers>

#include "asetrap/error.hpp"

namespace asetrap {

namespace {
constexpr double kPi = std::numbers::pi;
}

double Species::recoil_energy(double wavelength_m) const {
  return constants::planck * constants::planck / (2.0 * mass_kg * wavelength_m * wavelength_m);
}

SpeciesTable::SpeciesTable() { add({"Rb87", 1.4432e-25}); }

void SpeciesTable::add(Species species) {
  if (!(species.mass_kg > 0.0)) throw InputError("species mass must be > 0: " + species.name);
  entries_[species.name] = std::move(species);
}

std::optional<Species> SpeciesTable::find(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

double BeamSpec::peak_intensity() const { return 2.0 * power_w / (kPi * waist_m * waist_m); }

double BeamSpec::rayleigh_length() const { return kPi * waist_m * waist_m / wavelength_m; }

void BeamSpec::validate() const {
  if (!(power_w >= 0.0) || !std::isfinite(power_w)) throw InputError("beam power must be >= 0");
  if (!(waist_m > 0.0) || !(wavelength_m > 0.0)) throw InputError("waist and wavelength must be > 0");
  if (waist_m < 0.5 * wavelength_m) throw InputError("waist below lambda/2 is outside the paraxial model");
}

double calibrate_u_per_intensity(const BeamSpec& beam, double depth_k) {
  beam.validate();
  if (!(beam.power_w > 0.0)) throw InputError("calibration needs a positive power");
  return kelvin_to_joule(depth_k) / beam.peak_intensity();
}

CouplingConstants default_coupling() {
  const BeamSpec anchor{6.0, 28e-6, 1560e-9};
  CouplingConstants c;
  c.u_per_intensity = calibrate_u_per_intensity(anchor, 900e-6);
  c.scattering = {kelvin_to_joule(900e-6), 30e-9};
  return c;
}

double depth(const BeamSpec& beam, const CouplingConstants& coupling) {
  beam.validate();
  return coupling.u_per_intensity * beam.peak_intensity();
}

TrapFrequencies trap_frequencies(double depth_j, const BeamSpec& beam, const Species& species) {
  beam.validate();
  if (depth_j < 0.0) throw InputError("trap depth must be >= 0");
  if (!(species.mass_kg > 0.0)) throw InputError("species mass must be > 0");
  const double w0 = beam.waist_m;
  const double zr = beam.rayleigh_length();
  const double omega_r = std::sqrt(4.0 * depth_j / (species.mass_kg * w0 * w0));
  const double omega_z = std::sqrt(2.0 * depth_j / (species.mass_kg * zr * zr));
  return {omega_r / (2.0 * kPi), omega_z / (2.0 * kPi)};
}

TrapParams trap_params(const BeamSpec& beam, const Species& species,
                       const CouplingConstants& coupling) {
  TrapParams p;
  p.depth_j = depth(beam, coupling);
  p.depth_uk = joule_to_kelvin(p.depth_j) * 1e6;
  const auto f = trap_frequencies(p.depth_j, beam, species);
  p.radial_hz = f.radial_hz;
  p.axial_hz = f.axial_hz;
  p.rayleigh_m = beam.rayleigh_length();
  return p;
}

double rate_to_kelvin(double e_dot, double f_trap_hz) {
  if (!(f_trap_hz > 0.0)) throw InputError("trap frequency must be > 0");
  const double omega = 2.0 * kPi * f_trap_hz;
  return e_dot * constants::hbar * omega * omega / constants::boltzmann;
}

double level_to_temperature(int n, double f_trap_hz) {
  if (n < 0) throw InputError("level must be >= 0");
  if (!(f_trap_hz > 0.0)) throw InputError("trap frequency must be > 0");
  return n * constants::hbar * 2.0 * kPi * f_trap_hz / constants::boltzmann;
}

double scattering_heating(double depth_j, const ScatteringReference& reference) {
  if (!(reference.depth_j > 0.0)) throw InputError("scattering reference depth must be > 0");
  return reference.rate_k_per_s * depth_j / reference.depth_j;
}

double coherence_length(double bandwidth_hz) {
  if (!(bandwidth_hz > 0.0)) throw InputError("bandwidth must be > 0");
  return constants::speed_of_light / bandwidth_hz;
}

}  // namespace asetrap
