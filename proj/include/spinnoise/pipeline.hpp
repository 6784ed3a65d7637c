// Extraction of the correlated-noise fractions from pulse-modulated spectra:
// a narrow-scan fit of the first harmonic (center held at nu_p / 2) followed
// by a comb fit of the broad base, and a synthetic end-to-end round trip
// through the noise generator.
#pragma once

#include "spinnoise/fitting.hpp"
#include "spinnoise/noisegen.hpp"

#include <optional>

namespace spinnoise {

enum class BaseFitStyle {
  /// Narrow harmonics masked; the base comb alone describes the rest.
  Masked,
  /// As Masked, with the narrow comb added as fixed lines so that its tails
  /// outside the masks are not attributed to the base; the narrow fit is then
  /// repeated with the base comb held fixed under it.
  MaskedDeblended,
};

struct PipelineOptions {
  /// Narrow fit covers nu_p/2 +- this.
  double narrow_half_window_hz = 150.0;
  /// Each narrow harmonic is masked over +- this * narrow fwhm, at least
  /// three bins and at most nu_p / 4.
  double mask_fwhm_multiple = 8.0;
  /// Upper edge of the base fit; 0 selects (n_max + 1) nu_p / 2.
  double wide_max_hz = 0.0;
  BaseFitStyle style = BaseFitStyle::MaskedDeblended;
  /// Alternating narrow/base refits in the deblended style.
  int deblend_passes = 2;
  /// Second pass of every fit weighted by 1 / model^2.
  bool inverse_variance_weights = false;
  /// Also run an unmasked fit with both combs free.
  bool joint_fit = true;
};

struct XiEstimate {
  FitResult narrow_fit;
  FitResult base_fit;
  std::optional<FitResult> joint;
  std::vector<FrequencyMask> masks;

  /// Present only when both fits converged.
  std::optional<double> phi2_plus, phi2_plus_sigma;
  std::optional<double> phi2_minus, phi2_minus_sigma;
  std::optional<double> xi_plus, xi_plus_sigma;
  std::optional<double> xi, xi_sigma;
  std::optional<double> narrow_fwhm_hz, broad_fwhm_hz, broad_fwhm_sigma_hz;
  std::optional<double> gamma_minus_over_pi_hz;
  /// Joint-fit counterparts.
  std::optional<double> joint_xi_plus, joint_broad_fwhm_hz;

  /// Narrow-comb power inside the unmasked base-fit bins relative to the
  /// base comb's power there.
  double blending_fraction = 0.0;
  /// The narrow line vanished and was refitted with its width held at the
  /// wall width.
  bool narrow_width_fixed = false;

  bool converged() const { return narrow_fit.converged && base_fit.converged; }
};

/// `theory_phi2_total` normalizes xi; pass NaN to skip it.
XiEstimate estimate_xi(const Spectrum& narrow_scan, const Spectrum& wide_scan,
                       const PmFieldSpec& pm, double theory_phi2_total,
                       const PipelineOptions& options = {});

struct RoundTripConfig {
  OpticalLine line{};
  double nu_hz = 0.0;
  RateSet rates{};
  PmFieldSpec pm{};
  TimeSeriesConfig series{};
  double variance_scale = 1.0;
  std::size_t narrow_segment = 32768;
  std::size_t wide_segment = 4096;
  double overlap_fraction = 0.5;
  /// Subtract a shot-noise-only spectrum generated with seed + 1.
  bool subtract_background = false;
  PipelineOptions options{};
};

struct RoundTripResult {
  XiEstimate estimate;
  NoiseBudget theory;
  double theory_phi2_total = 0.0;  // in series units
  std::size_t clamped_bins = 0;
};

RoundTripResult run_round_trip(const RoundTripConfig& cfg, const SpinOperatorSet& ops);

}  // namespace spinnoise
