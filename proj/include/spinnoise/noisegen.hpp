// Synthetic Faraday-rotation time series with exponential correlations, and
// Welch spectral estimation of sampled series.
#pragma once

#include "spinnoise/atomic.hpp"
#include "spinnoise/dynamics.hpp"
#include "spinnoise/optics.hpp"
#include "spinnoise/spectra.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace spinnoise {

struct TimeSeriesConfig {
  double sample_rate_hz = 20000.0;
  double duration_s = 120.0;
  std::uint64_t seed = 1;
  double shot_noise_psd = 0.0;  // one-sided, signal^2 / Hz

  /// round(sample_rate * duration); at least 2.
  std::size_t sample_count() const;
  double dt() const { return 1.0 / sample_rate_hz; }
  void validate() const;
};

struct OUProcessSpec {
  double variance = 1.0;
  double rate = 0.0;  // s^-1
};

/// Exact discretization of a stationary Ornstein-Uhlenbeck process started
/// from its stationary distribution. Requires rate * dt < 50.
std::vector<double> simulate_ou(const OUProcessSpec& spec, const TimeSeriesConfig& cfg,
                                std::uint32_t substream = 0);

enum class FieldMode { Zero, PulseModulated };

/// Everything the synthesizer needs: the two eigenobservable couplings and
/// their correlation rates.
struct FaradayNoiseSpec {
  double plus_coefficient = 0.0;   // 5 chi_a + chi_b
  double minus_coefficient = 0.0;  // chi_b - chi_a
  double plus_variance = 1.0 / 24.0;
  double minus_variance = 5.0 / 24.0;
  double plus_rate = 0.0;   // s^-1
  double minus_rate = 0.0;  // s^-1
  /// Multiplies the spin signal's variance (e.g. n l / A_p for radians).
  double variance_scale = 1.0;
  FieldMode mode = FieldMode::Zero;
  PmFieldSpec pm{};
};

/// Rates follow the model spectra: the narrow rate is pi dw (plus d gamma_a
/// under pulse modulation) and the broad rate is gamma_- + pi dw.
FaradayNoiseSpec make_faraday_noise_spec(const DetuningFactors& chi, const SpinOperatorSet& ops,
                                         const RateSet& rates, double wall_broadening_hz,
                                         FieldMode mode, const PmFieldSpec& pm = {},
                                         double variance_scale = 1.0);

/// Phi(t) = sqrt(scale) [c_+ x_+(t) + c_- x_-(t)], sign-flipped at every
/// pulse in modulated mode, plus white shot noise. Substreams 1, 2 and 3 feed
/// x_+, x_- and the shot noise.
std::vector<double> simulate_faraday_noise(const FaradayNoiseSpec& spec,
                                           const TimeSeriesConfig& cfg);

struct Spectrum {
  std::vector<double> freq_hz;
  std::vector<double> psd;
  /// Number of averaged segments, when estimated.
  std::size_t segments = 0;
};

enum class WindowKind { Hann };

/// One-sided Welch estimate with per-segment mean removal.
Spectrum welch_psd(std::span<const double> series, double sample_rate_hz,
                   std::size_t segment_length, double overlap_fraction = 0.5,
                   WindowKind window = WindowKind::Hann);

struct SubtractionResult {
  Spectrum spectrum;
  std::size_t clamped_bins = 0;
};

/// Pointwise difference on an identical grid; negative bins are set to zero.
SubtractionResult background_subtract(const Spectrum& psd, const Spectrum& background);

/// Restricts a spectrum to lo <= f <= hi.
Spectrum crop(const Spectrum& s, double lo_hz, double hi_hz);

}  // namespace spinnoise
