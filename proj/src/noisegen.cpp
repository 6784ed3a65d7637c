#include "spinnoise/noisegen.hpp"

#include "spinnoise/random.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>

namespace spinnoise {

using std::numbers::pi;

std::size_t TimeSeriesConfig::sample_count() const {
  return static_cast<std::size_t>(std::llround(sample_rate_hz * duration_s));
}

void TimeSeriesConfig::validate() const {
  if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz)) {
    throw std::invalid_argument("sample rate must be positive");
  }
  if (!(duration_s > 0.0) || !std::isfinite(duration_s) || sample_count() < 2) {
    throw std::invalid_argument("series must contain at least two samples");
  }
  if (!(shot_noise_psd >= 0.0)) throw std::invalid_argument("shot-noise PSD must be >= 0");
}

std::vector<double> simulate_ou(const OUProcessSpec& spec, const TimeSeriesConfig& cfg,
                                std::uint32_t substream) {
  cfg.validate();
  if (!(spec.variance >= 0.0)) throw std::invalid_argument("OU variance must be >= 0");
  if (!(spec.rate >= 0.0)) throw std::invalid_argument("OU rate must be >= 0");
  const double decay_exponent = spec.rate * cfg.dt();
  if (!(decay_exponent < 50.0)) {
    throw std::invalid_argument("OU rate times sample interval must be below 50");
  }
  const std::size_t n = cfg.sample_count();
  RandomStream rng(cfg.seed, substream);
  const double decay = std::exp(-decay_exponent);
  const double kick = std::sqrt(spec.variance * -std::expm1(-2.0 * decay_exponent));

  std::vector<double> x(n);
  x[0] = std::sqrt(spec.variance) * rng.normal();
  for (std::size_t k = 1; k < n; ++k) x[k] = x[k - 1] * decay + kick * rng.normal();
  return x;
}

FaradayNoiseSpec make_faraday_noise_spec(const DetuningFactors& chi, const SpinOperatorSet& ops,
                                         const RateSet& rates, double wall_broadening_hz,
                                         FieldMode mode, const PmFieldSpec& pm,
                                         double variance_scale) {
  if (!ops.Fz_plus || !ops.Fz_minus) {
    throw std::invalid_argument("noise synthesis requires the I = 3/2 eigenobservables");
  }
  if (!(wall_broadening_hz >= 0.0)) throw std::invalid_argument("wall broadening must be >= 0");
  FaradayNoiseSpec s;
  s.plus_coefficient = 5.0 * chi.chi_a + chi.chi_b;
  s.minus_coefficient = chi.chi_b - chi.chi_a;
  s.plus_variance = thermal_variance(ops, *ops.Fz_plus);
  s.minus_variance = thermal_variance(ops, *ops.Fz_minus);
  s.plus_rate = pi * wall_broadening_hz;
  s.minus_rate = rates.gamma_minus + pi * wall_broadening_hz;
  s.mode = mode;
  s.pm = pm;
  if (mode == FieldMode::PulseModulated) {
    pm.validate();
    s.plus_rate += pm.duty_cycle * rates.gamma_a;
  }
  s.variance_scale = variance_scale;
  return s;
}

std::vector<double> simulate_faraday_noise(const FaradayNoiseSpec& spec,
                                           const TimeSeriesConfig& cfg) {
  cfg.validate();
  if (!(spec.variance_scale >= 0.0)) throw std::invalid_argument("variance scale must be >= 0");
  const std::vector<double> x_plus = simulate_ou({spec.plus_variance, spec.plus_rate}, cfg, 1);
  const std::vector<double> x_minus = simulate_ou({spec.minus_variance, spec.minus_rate}, cfg, 2);
  const double amplitude = std::sqrt(spec.variance_scale);
  const double c_plus = amplitude * spec.plus_coefficient;
  const double c_minus = amplitude * spec.minus_coefficient;

  const std::size_t n = x_plus.size();
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = c_plus * x_plus[k] + c_minus * x_minus[k];

  if (spec.mode == FieldMode::PulseModulated) {
    spec.pm.validate();
    const double pulses_per_sample = spec.pm.pulse_rate_hz / cfg.sample_rate_hz;
    for (std::size_t k = 0; k < n; ++k) {
      const auto pulses = static_cast<long long>(std::floor(static_cast<double>(k) * pulses_per_sample));
      if (pulses % 2 != 0) out[k] = -out[k];
    }
  }
  if (cfg.shot_noise_psd > 0.0) {
    RandomStream rng(cfg.seed, 3);
    const double sigma = std::sqrt(0.5 * cfg.shot_noise_psd * cfg.sample_rate_hz);
    for (double& v : out) v += sigma * rng.normal();
  }
  return out;
}

namespace {

struct FftwPlanDeleter {
  void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};
struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

}  // namespace

Spectrum welch_psd(std::span<const double> series, double sample_rate_hz,
                   std::size_t segment_length, double overlap_fraction, WindowKind window) {
  if (!(sample_rate_hz > 0.0)) throw std::invalid_argument("sample rate must be positive");
  if (segment_length < 2 || segment_length > series.size()) {
    throw std::invalid_argument("segment length must lie in [2, series length]");
  }
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) {
    throw std::invalid_argument("overlap fraction must lie in [0, 1)");
  }
  const std::size_t step = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(segment_length * (1.0 - overlap_fraction))));
  if (step > segment_length) throw std::invalid_argument("degenerate segmentation");

  const std::size_t len = segment_length;
  std::vector<double> taper(len);
  double taper_power = 0.0;
  switch (window) {
    case WindowKind::Hann:
      // Periodic Hann.
      for (std::size_t i = 0; i < len; ++i) {
        taper[i] = 0.5 - 0.5 * std::cos(2.0 * pi * static_cast<double>(i) / static_cast<double>(len));
        taper_power += taper[i] * taper[i];
      }
      break;
  }

  const std::size_t bins = len / 2 + 1;
  std::unique_ptr<double, FftwFree> in(static_cast<double*>(fftw_malloc(sizeof(double) * len)));
  std::unique_ptr<fftw_complex, FftwFree> out(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * bins)));
  if (!in || !out) throw std::bad_alloc();
  std::unique_ptr<fftw_plan_s, FftwPlanDeleter> plan(
      fftw_plan_dft_r2c_1d(static_cast<int>(len), in.get(), out.get(), FFTW_ESTIMATE));
  if (!plan) throw std::runtime_error("FFT plan creation failed");

  Spectrum result;
  result.freq_hz.resize(bins);
  result.psd.assign(bins, 0.0);
  for (std::size_t k = 0; k < bins; ++k) {
    result.freq_hz[k] = static_cast<double>(k) * sample_rate_hz / static_cast<double>(len);
  }

  for (std::size_t start = 0; start + len <= series.size(); start += step) {
    double mean = 0.0;
    for (std::size_t i = 0; i < len; ++i) mean += series[start + i];
    mean /= static_cast<double>(len);
    for (std::size_t i = 0; i < len; ++i) in.get()[i] = (series[start + i] - mean) * taper[i];
    fftw_execute(plan.get());
    for (std::size_t k = 0; k < bins; ++k) {
      const double re = out.get()[k][0];
      const double im = out.get()[k][1];
      result.psd[k] += re * re + im * im;
    }
    ++result.segments;
  }

  const double norm = 1.0 / (sample_rate_hz * taper_power * static_cast<double>(result.segments));
  for (std::size_t k = 0; k < bins; ++k) {
    const bool unpaired = k == 0 || (len % 2 == 0 && k == bins - 1);
    result.psd[k] *= (unpaired ? 1.0 : 2.0) * norm;
  }
  return result;
}

SubtractionResult background_subtract(const Spectrum& psd, const Spectrum& background) {
  if (psd.freq_hz.size() != background.freq_hz.size() || psd.psd.size() != psd.freq_hz.size() ||
      background.psd.size() != background.freq_hz.size()) {
    throw std::invalid_argument("background grid does not match the spectrum grid");
  }
  for (std::size_t k = 0; k < psd.freq_hz.size(); ++k) {
    const double tol = 1e-9 * std::max(1.0, std::abs(psd.freq_hz[k]));
    if (std::abs(psd.freq_hz[k] - background.freq_hz[k]) > tol) {
      throw std::invalid_argument("background grid does not match the spectrum grid");
    }
  }
  SubtractionResult r;
  r.spectrum = psd;
  for (std::size_t k = 0; k < psd.psd.size(); ++k) {
    const double d = psd.psd[k] - background.psd[k];
    if (d < 0.0) {
      r.spectrum.psd[k] = 0.0;
      ++r.clamped_bins;
    } else {
      r.spectrum.psd[k] = d;
    }
  }
  return r;
}

Spectrum crop(const Spectrum& s, double lo_hz, double hi_hz) {
  Spectrum out;
  out.segments = s.segments;
  for (std::size_t k = 0; k < s.freq_hz.size(); ++k) {
    if (s.freq_hz[k] >= lo_hz && s.freq_hz[k] <= hi_hz) {
      out.freq_hz.push_back(s.freq_hz[k]);
      out.psd.push_back(s.psd[k]);
    }
  }
  return out;
}

}  // namespace spinnoise
