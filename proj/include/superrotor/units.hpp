#ifndef SUPERROTOR_UNITS_HPP
#define SUPERROTOR_UNITS_HPP

// Single conversion point for the whole library.
// Internal units: energies in cm^-1, times in ps, angles in rad,
// angular frequencies in rad/ps, intensities in W/cm^2, polarizability volumes in A^3.

#include <numbers>

namespace superrotor::units {

inline constexpr double pi = std::numbers::pi;

inline constexpr double speed_of_light_si = 299792458.0;           // m/s
inline constexpr double speed_of_light_cm_per_ps = 2.99792458e-2;  // cm/ps
inline constexpr double hbar_si = 1.054571817e-34;                 // J s
inline constexpr double planck_si = 6.62607015e-34;                // J s
inline constexpr double epsilon0_si = 8.8541878128e-12;            // F/m
inline constexpr double boltzmann_si = 1.380649e-23;               // J/K

// hc/k in cm K (second radiation constant)
inline constexpr double second_radiation_constant = 1.438776877;

// cm^-1 -> rad/ps
inline constexpr double wavenumber_to_angular(double wavenumber) {
  return 2.0 * pi * speed_of_light_cm_per_ps * wavenumber;
}

inline constexpr double angular_to_wavenumber(double omega) {
  return omega / (2.0 * pi * speed_of_light_cm_per_ps);
}

// cm^-1 -> THz (cycles per ps)
inline constexpr double wavenumber_to_thz(double wavenumber) {
  return speed_of_light_cm_per_ps * wavenumber;
}

inline constexpr double thz_to_wavenumber(double thz) {
  return thz / speed_of_light_cm_per_ps;
}

// Polarizability volume (A^3) to SI polarizability (C m^2 / V).
inline constexpr double polarizability_volume_to_si(double volume_a3) {
  return 4.0 * pi * epsilon0_si * volume_a3 * 1e-30;
}

// Squared envelope amplitude (V^2/m^2) of a field with cycle-averaged intensity
// I = eps0 c E^2 / 2, intensity given in W/cm^2.
inline constexpr double field_squared_from_intensity(double intensity_w_cm2) {
  return 2.0 * intensity_w_cm2 * 1e4 / (epsilon0_si * speed_of_light_si);
}

// Interaction depth Delta_alpha E^2 / 4 expressed as an angular frequency (rad/ps).
inline constexpr double trap_depth_angular(double delta_alpha_a3, double intensity_w_cm2) {
  return 0.25 * polarizability_volume_to_si(delta_alpha_a3) *
         field_squared_from_intensity(intensity_w_cm2) / hbar_si * 1e-12;
}

inline constexpr double degrees(double deg) { return deg * pi / 180.0; }

}  // namespace superrotor::units

#endif  // SUPERROTOR_UNITS_HPP
