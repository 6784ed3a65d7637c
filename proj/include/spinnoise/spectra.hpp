// Analytic one-sided power spectral densities built from Lorentzian lines:
// zero-field, dc-field and pi-pulse-modulated (comb) spectra.
#pragma once

#include "spinnoise/dynamics.hpp"
#include "spinnoise/optics.hpp"

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace spinnoise {

/// Widths below this are raised to it and the model is marked delta-like.
inline constexpr double kMinimumFwhmHz = 1e-6;

struct LorentzianComponent {
  double center = 0.0;  // Hz
  double fwhm = 1.0;    // Hz, > 0
  double area = 0.0;    // >= 0

  void validate() const;
};

/// One-sided density of a Lorentzian line plus its mirror image about zero
/// frequency, so that the integral over [0, inf) equals `area` for any center.
double lorentzian_psd(double freq_hz, double center, double fwhm, double area);

struct SpectrumModel {
  std::vector<LorentzianComponent> components;
  double floor = 0.0;       // flat PSD level
  bool delta_like = false;  // some width was raised to kMinimumFwhmHz

  void validate() const;
};

struct PmFieldSpec {
  double pulse_rate_hz = 2000.0;
  double duty_cycle = 0.0014;
  int harmonic_count = 5;  // n_max, odd
  double wall_broadening_hz = 25.0;

  void validate() const;
  /// Odd harmonic numbers 1, 3, ..., n_max.
  std::vector<int> harmonics() const;
  double harmonic_center(int n) const { return 0.5 * n * pulse_rate_hz; }
};

struct DcFieldSpec {
  double resonance_hz = 10000.0;
  double nuclear_zeeman_split_hz = 159.0;
  double wall_broadening_hz = 25.0;

  void validate() const;
};

/// Narrow line (area Phi_+^2, fwhm dw) and broad line (area Phi_-^2,
/// fwhm dw + gamma_-/pi), both at zero frequency.
SpectrumModel zero_field_model(const NoiseBudget& budget, const RateSet& rates,
                               double wall_broadening_hz);

/// Fraction of a square-wave-modulated line's power landing in harmonic n.
double harmonic_weight(int n);

/// Comb of lines at n nu_p / 2 carrying harmonic_weight(n) * power each.
std::vector<LorentzianComponent> pm_comb(double power, double fwhm, const PmFieldSpec& pm);

/// Narrow comb of fwhm dw + d gamma_a / pi followed by a broad comb of fwhm
/// dw + gamma_- / pi. Component order: narrow harmonics, then broad.
SpectrumModel pm_field_model(const NoiseBudget& budget, const RateSet& rates,
                             const PmFieldSpec& pm);

/// Two uncorrelated multiplet lines split by the nuclear Zeeman shift.
SpectrumModel dc_field_model(const DetuningFactors& chi, const SpinOperatorSet& ops,
                             const RateSet& rates, const DcFieldSpec& spec);

/// Requires an ascending grid.
std::vector<double> evaluate_psd(const SpectrumModel& model, std::span<const double> freq_hz);

/// Sum of component areas plus floor * bandwidth.
double total_power(const SpectrumModel& model, double bandwidth_hz = 0.0);

/// First-harmonic area times pi^2 / 8.
double pm_power_from_first_harmonic(double first_harmonic_area);

/// Plain-text record:
///   # spinnoise spectrum model v1
///   floor <psd>
///   delta_like <0|1>
///   component <center_hz> <fwhm_hz> <area>
void write_model(std::ostream& out, const SpectrumModel& model);
SpectrumModel read_model(std::istream& in);

}  // namespace spinnoise
