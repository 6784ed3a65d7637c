// Constrained least-squares fitting of sums of Lorentzian lines to one-sided
// spectra (damped Gauss-Newton with analytic derivatives).
#pragma once

#include "spinnoise/spectra.hpp"

#include <limits>
#include <string>
#include <vector>

namespace spinnoise {

enum class ParamMode { Free, Fixed, Tied };

/// One model parameter. A NaN `value` on a free parameter requests an
/// automatic initial guess. A tied parameter equals ratio * g + offset where g
/// is shared by every member of `group`; offsets are only allowed on centers.
struct ParamSpec {
  ParamMode mode = ParamMode::Free;
  double value = std::numeric_limits<double>::quiet_NaN();
  int group = -1;
  double ratio = 1.0;
  double offset = 0.0;

  static ParamSpec free(double initial = std::numeric_limits<double>::quiet_NaN()) {
    return {ParamMode::Free, initial, -1, 1.0, 0.0};
  }
  static ParamSpec fixed(double v) { return {ParamMode::Fixed, v, -1, 1.0, 0.0}; }
  static ParamSpec tied(int group, double ratio = 1.0, double offset = 0.0,
                        double initial = std::numeric_limits<double>::quiet_NaN()) {
    return {ParamMode::Tied, initial, group, ratio, offset};
  }
};

struct ComponentTemplate {
  ParamSpec center;
  ParamSpec fwhm;
  ParamSpec area;
};

struct FrequencyMask {
  double lo_hz = 0.0;
  double hi_hz = 0.0;
  bool contains(double f) const { return f >= lo_hz && f <= hi_hz; }
};

struct FitProblem {
  std::vector<double> freq_hz;
  std::vector<double> psd;
  /// Per-bin weights; empty means uniform.
  std::vector<double> weights;
  std::vector<ComponentTemplate> components;
  ParamSpec floor = ParamSpec::free();
  std::vector<FrequencyMask> masks;
  int max_iterations = 200;
  /// Lower bound on free widths and on the base of tied width groups.
  double min_fwhm_hz = 0.0;
};

struct FittedComponent {
  double center = 0.0, fwhm = 0.0, area = 0.0;
  /// One-sigma uncertainties; NaN when the parameter is not identifiable.
  double center_sigma = 0.0, fwhm_sigma = 0.0, area_sigma = 0.0;
};

enum class FitStatus { Converged, MaxIterations, Singular };
std::string to_string(FitStatus status);

struct FitResult {
  std::vector<FittedComponent> components;
  double floor = 0.0;
  double floor_sigma = 0.0;
  /// sqrt(sum w (psd - model)^2) over unmasked bins, in data units.
  double residual_norm = 0.0;
  /// Residual sum of squares divided by (bins - free parameters).
  double reduced_residual = 0.0;
  int iterations = 0;
  int free_parameters = 0;
  std::size_t used_bins = 0;
  bool converged = false;
  FitStatus status = FitStatus::MaxIterations;
  /// Condition number of the column-normalized normal matrix.
  double condition_number = 0.0;
  std::string message;
  /// Objective after every accepted step, starting with the initial guess.
  std::vector<double> cost_history;

  SpectrumModel model() const;
};

FitResult fit_lorentzians(const FitProblem& problem);

/// Free single-line template with automatic initial guesses.
ComponentTemplate auto_component();

struct DcFitResult {
  FitResult fit;
  /// fwhm_a - wall broadening, i.e. gamma_a / pi.
  double gamma_a_over_pi_hz = 0.0;
  double gamma_b_over_pi_hz = 0.0;
  double total_area = 0.0;
  /// Zero split: both lines were forced to share width and area.
  bool degenerate = false;
};

/// Two lines with the center of b held at center_a + split. The initial
/// center comes from `spec.resonance_hz`.
DcFitResult fit_dc_spectrum(const std::vector<double>& freq_hz, const std::vector<double>& psd,
                            const DcFieldSpec& spec);

}  // namespace spinnoise
