// Faraday-rotation coupling of a detuned linear probe to the two ground
// hyperfine multiplets, and the resulting spin-noise power budget.
#pragma once

#include "spinnoise/atomic.hpp"

#include <array>
#include <string>
#include <vector>

namespace spinnoise {

namespace constants {
inline constexpr double kSpeedOfLight = 299792458.0;           // m/s
inline constexpr double kClassicalElectronRadius = 2.8179403262e-15;  // m
inline constexpr double kBoltzmann = 1.380649e-23;             // J/K
inline constexpr double kAtomicMassUnit = 1.66053906660e-27;   // kg
inline constexpr double kRb87Mass = 86.909180527 * kAtomicMassUnit;
inline constexpr double kRb87D1Wavelength = 794.978851156e-9;  // m
inline constexpr double kRbSpinExchangeCrossSection = 1.9e-18;  // m^2
}  // namespace constants

/// Hyperfine line positions relative to the hyperfine-free line center.
struct TransitionOffsets {
  double aa = 0.0, ab = 0.0, ba = 0.0, bb = 0.0;  // Hz; first letter ground, second excited
  std::array<double, 4> all() const { return {aa, ab, ba, bb}; }
};

/// Center-of-gravity placement: E_a = +3/8 W, E_b = -5/8 W (same for W').
TransitionOffsets transition_offsets(double ground_splitting_hz, double excited_splitting_hz);

struct OpticalLine {
  double wavelength_m = constants::kRb87D1Wavelength;
  double ground_splitting_hz = 6.8347e9;
  double excited_splitting_hz = 0.8166e9;
  double oscillator_strength = 0.34;
  double lorentzian_fwhm_hz = 5.75e6;
  double doppler_fwhm_hz = 0.0;
  double nuclear_spin = 1.5;

  TransitionOffsets offsets() const {
    return transition_offsets(ground_splitting_hz, excited_splitting_hz);
  }
  double line_center_hz() const { return constants::kSpeedOfLight / wavelength_m; }
  /// pi r_e c f / (2I + 1), in m^2 Hz.
  double prefactor() const;

  /// 87Rb D1 with the Doppler width of a vapor at `temperature_k`.
  static OpticalLine rb87_d1(double temperature_k);
};

double doppler_fwhm(double line_frequency_hz, double mass_kg, double temperature_k);

/// Real (dispersive) part of the Voigt profile, normalized so that its
/// absorptive partner integrates to one; tends to 1/(pi dnu) in the wings.
/// Units 1/Hz.
double dispersive_line(double detuning_hz, double lorentzian_fwhm_hz, double doppler_fwhm_hz);

struct DetuningFactors {
  double nu = 0.0;     // Hz, relative to the line center
  double chi_a = 0.0;  // m^2
  double chi_b = 0.0;  // m^2
};

DetuningFactors chi_factors(double nu, const OpticalLine& line);

struct NoiseBudget {
  double phi2_plus = 0.0;
  double phi2_minus = 0.0;
  double phi2_total = 0.0;
  double xi_plus = 0.0;
  double xi_minus = 0.0;
  double xi = 0.0;
  /// False when the total power underflows; ratios are then NaN.
  bool defined = true;
};

/// Requires the I = 3/2 eigenobservables in `ops`.
NoiseBudget noise_budget(const DetuningFactors& chi, const SpinOperatorSet& ops);
NoiseBudget noise_budget(double nu, const OpticalLine& line, const SpinOperatorSet& ops);

/// Phi_+ = (5 chi_a + chi_b) F_z+ and Phi_- = (chi_b - chi_a) F_z-.
std::array<Matrix, 2> phi_observables(const DetuningFactors& chi, const SpinOperatorSet& ops);

enum class PolarKind { Plus, Minus };
std::string to_string(PolarKind kind);

struct PolarRoot {
  double nu_hz = 0.0;
  PolarKind kind = PolarKind::Plus;
  bool near_resonance = false;
};

/// Roots of chi_a - chi_b (Plus) and 5 chi_a + chi_b (Minus) inside
/// [lo, hi], bracketed on a grid partitioned at the transition centers and
/// refined by bisection. Sorted by frequency.
std::vector<PolarRoot> polar_frequencies(const OpticalLine& line, double window_lo_hz,
                                         double window_hi_hz, int samples_per_interval = 4000);

struct CellGeometry {
  double length_m = 0.023;
  double probe_area_m2 = 64e-6;
  double number_density_m3 = 1e19;
  void validate() const;
};

/// Variance of the rotation angle, (n l / A_p) <Phi^2>, in rad^2.
double osn_power(double nu, const OpticalLine& line, const CellGeometry& cell,
                 const SpinOperatorSet& ops);

/// Saturated Rb vapor density from the vapor-pressure curve (liquid above
/// the melting point, solid below).
double rb_vapor_density(double temperature_k);
/// Mean relative speed sqrt(16 k T / (pi m)) of two like atoms.
double mean_relative_speed(double mass_kg, double temperature_k);

}  // namespace spinnoise
