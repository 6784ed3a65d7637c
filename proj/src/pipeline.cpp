#include "spinnoise/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace spinnoise {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double bin_spacing(const Spectrum& s) {
  if (s.freq_hz.size() < 2) throw std::invalid_argument("spectrum needs at least two bins");
  return s.freq_hz[1] - s.freq_hz[0];
}

void check_grid(const Spectrum& s, const char* name) {
  if (s.freq_hz.size() != s.psd.size() || s.freq_hz.size() < 2) {
    throw std::invalid_argument(std::string(name) + " has an inconsistent grid");
  }
  for (std::size_t i = 1; i < s.freq_hz.size(); ++i) {
    if (!(s.freq_hz[i] > s.freq_hz[i - 1])) {
      throw std::invalid_argument(std::string(name) + " grid is not increasing");
    }
  }
}

// Broad comb: fixed centers, one shared width, areas in 1/n^2 proportion.
void append_comb(FitProblem& p, const PmFieldSpec& pm, int width_group, int area_group,
                 double fwhm_guess, double first_area_guess) {
  for (int n : pm.harmonics()) {
    ComponentTemplate t;
    t.center = ParamSpec::fixed(pm.harmonic_center(n));
    t.fwhm = ParamSpec::tied(width_group, 1.0, 0.0, fwhm_guess);
    t.area = ParamSpec::tied(area_group, 1.0 / (n * n), 0.0, first_area_guess);
    p.components.push_back(t);
  }
}

double comb_sum(const std::vector<FittedComponent>& comps, std::size_t first, std::size_t count,
                double f) {
  double s = 0.0;
  for (std::size_t k = first; k < first + count; ++k) {
    s += lorentzian_psd(f, comps[k].center, comps[k].fwhm, comps[k].area);
  }
  return s;
}

// Refits with weights 1 / model^2 taken from a first unweighted pass, since
// the scatter of averaged periodogram bins is proportional to their mean.
FitResult fit_weighted(FitProblem p, bool reweight) {
  FitResult r = fit_lorentzians(p);
  if (!reweight || !r.converged) return r;
  const std::vector<double> model = evaluate_psd(r.model(), p.freq_hz);
  if (!std::all_of(model.begin(), model.end(), [](double v) { return v > 0.0; })) return r;
  p.weights.resize(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) p.weights[i] = 1.0 / (model[i] * model[i]);
  return fit_lorentzians(p);
}

}  // namespace

XiEstimate estimate_xi(const Spectrum& narrow_scan, const Spectrum& wide_scan,
                       const PmFieldSpec& pm, double theory_phi2_total,
                       const PipelineOptions& options) {
  pm.validate();
  check_grid(narrow_scan, "narrow scan");
  check_grid(wide_scan, "wide scan");
  const double first = pm.harmonic_center(1);
  const double wide_max =
      options.wide_max_hz > 0.0 ? options.wide_max_hz : pm.harmonic_center(pm.harmonic_count + 1);
  if (wide_scan.freq_hz.back() < wide_max * 0.999) {
    throw std::invalid_argument("wide scan does not reach the last harmonic");
  }
  XiEstimate est;

  // Step 1: first harmonic of the narrow comb.
  const Spectrum narrow = crop(narrow_scan, first - options.narrow_half_window_hz,
                               first + options.narrow_half_window_hz);
  if (narrow.freq_hz.size() < 8) throw std::invalid_argument("narrow scan does not resolve the first harmonic");
  const double narrow_spacing = narrow.freq_hz[1] - narrow.freq_hz[0];
  auto fit_narrow = [&](const std::vector<FittedComponent>& base) {
    FitProblem p;
    p.freq_hz = narrow.freq_hz;
    p.psd = narrow.psd;
    p.components = {{ParamSpec::fixed(first), ParamSpec::free(), ParamSpec::free()}};
    p.min_fwhm_hz = narrow_spacing;
    for (const auto& c : base) {
      p.components.push_back(
          {ParamSpec::fixed(c.center), ParamSpec::fixed(c.fwhm), ParamSpec::fixed(c.area)});
    }
    FitResult r = fit_weighted(p, options.inverse_variance_weights);
    est.narrow_width_fixed = false;
    if (r.converged && !std::isfinite(r.components.front().area_sigma)) {
      // A vanishing line leaves its width undetermined; hold it at the wall
      // width so the area keeps a meaningful uncertainty.
      p.components.front().fwhm =
          ParamSpec::fixed(std::max(pm.wall_broadening_hz, narrow_spacing));
      r = fit_weighted(p, options.inverse_variance_weights);
      est.narrow_width_fixed = true;
    }
    r.components.resize(1);
    return r;
  };
  est.narrow_fit = fit_narrow({});

  // Step 2: broad comb on the wide scan with the narrow harmonics masked.
  const double spacing = bin_spacing(wide_scan);
  const double mask_half =
      std::clamp(options.mask_fwhm_multiple * est.narrow_fit.components.front().fwhm,
                 3.0 * spacing, std::max(0.25 * pm.pulse_rate_hz, 3.0 * spacing));
  for (int n : pm.harmonics()) {
    const double c = pm.harmonic_center(n);
    est.masks.push_back({c - mask_half, c + mask_half});
  }
  const Spectrum wide = crop(wide_scan, 1.5 * spacing, wide_max);
  const double base_fwhm_guess = std::max(0.5 * pm.pulse_rate_hz, 10.0 * spacing);
  double base_area_guess = 0.0;
  for (std::size_t i = 0; i + 1 < wide.freq_hz.size(); ++i) {
    base_area_guess += wide.psd[i] * (wide.freq_hz[i + 1] - wide.freq_hz[i]);
  }
  base_area_guess = std::max(0.5 * base_area_guess, std::numeric_limits<double>::min());

  auto narrow_comb_of = [&](const FitResult& nf) {
    std::vector<LorentzianComponent> comb;
    if (!nf.converged) return comb;
    const FittedComponent& c1 = nf.components.front();
    const double fwhm = std::max(c1.fwhm, kMinimumFwhmHz);
    for (int n : pm.harmonics()) comb.push_back({pm.harmonic_center(n), fwhm, c1.area / (n * n)});
    return comb;
  };
  auto fit_base = [&](const std::vector<LorentzianComponent>& narrow_comb) {
    FitProblem p;
    p.freq_hz = wide.freq_hz;
    p.psd = wide.psd;
    p.masks = est.masks;
    append_comb(p, pm, 0, 1, base_fwhm_guess, base_area_guess);
    for (const auto& c : narrow_comb) {
      p.components.push_back(
          {ParamSpec::fixed(c.center), ParamSpec::fixed(c.fwhm), ParamSpec::fixed(c.area)});
    }
    FitResult r = fit_weighted(p, options.inverse_variance_weights);
    r.components.resize(pm.harmonics().size());
    return r;
  };

  const bool deblend = options.style == BaseFitStyle::MaskedDeblended;
  est.base_fit = fit_base(deblend ? narrow_comb_of(est.narrow_fit) : std::vector<LorentzianComponent>{});
  for (int pass = 0; deblend && pass < options.deblend_passes; ++pass) {
    if (!est.base_fit.converged) break;
    est.narrow_fit = fit_narrow(est.base_fit.components);
    est.base_fit = fit_base(narrow_comb_of(est.narrow_fit));
  }
  const FittedComponent& nl = est.narrow_fit.components.front();
  const std::vector<LorentzianComponent> narrow_comb = narrow_comb_of(est.narrow_fit);

  const std::size_t n_harm = pm.harmonics().size();
  if (est.base_fit.converged && !narrow_comb.empty()) {
    double narrow_power = 0.0, base_power = 0.0;
    for (double f : wide.freq_hz) {
      const bool masked = std::any_of(est.masks.begin(), est.masks.end(),
                                      [f](const FrequencyMask& m) { return m.contains(f); });
      if (masked) continue;
      for (const auto& c : narrow_comb) narrow_power += lorentzian_psd(f, c.center, c.fwhm, c.area);
      base_power += comb_sum(est.base_fit.components, 0, n_harm, f);
    }
    est.blending_fraction = base_power > 0.0 ? narrow_power / base_power : kNaN;
  }

  if (options.joint_fit) {
    FitProblem p;
    p.freq_hz = wide.freq_hz;
    p.psd = wide.psd;
    append_comb(p, pm, 0, 1, base_fwhm_guess, base_area_guess);
    const double nf = std::max(est.narrow_fit.converged ? nl.fwhm : 0.0, 3.0 * spacing);
    const double na = est.narrow_fit.converged && nl.area > 0.0 ? nl.area : 0.1 * base_area_guess;
    append_comb(p, pm, 2, 3, nf, na);
    p.min_fwhm_hz = spacing;
    FitResult joint = fit_weighted(p, options.inverse_variance_weights);
    if (joint.converged) {
      const double a_plus = joint.components[n_harm].area;
      const double a_minus = joint.components[0].area;
      est.joint_xi_plus = a_plus / (a_plus + a_minus);
      est.joint_broad_fwhm_hz = joint.components[0].fwhm;
    }
    est.joint = std::move(joint);
  }

  if (!est.converged()) return est;

  const double to_total = std::numbers::pi * std::numbers::pi / 8.0;
  const FittedComponent& bl = est.base_fit.components.front();
  const double plus = pm_power_from_first_harmonic(nl.area);
  const double minus = pm_power_from_first_harmonic(bl.area);
  const double s_plus = to_total * nl.area_sigma;
  const double s_minus = to_total * bl.area_sigma;
  const double sum = plus + minus;
  est.phi2_plus = plus;
  est.phi2_plus_sigma = s_plus;
  est.phi2_minus = minus;
  est.phi2_minus_sigma = s_minus;
  est.xi_plus = plus / sum;
  est.xi_plus_sigma = std::hypot(minus * s_plus, plus * s_minus) / (sum * sum);
  if (std::isfinite(theory_phi2_total) && theory_phi2_total > 0.0) {
    est.xi = sum / theory_phi2_total;
    est.xi_sigma = std::hypot(s_plus, s_minus) / theory_phi2_total;
  }
  est.narrow_fwhm_hz = nl.fwhm;
  est.broad_fwhm_hz = bl.fwhm;
  est.broad_fwhm_sigma_hz = bl.fwhm_sigma;
  est.gamma_minus_over_pi_hz = bl.fwhm - pm.wall_broadening_hz;
  return est;
}

RoundTripResult run_round_trip(const RoundTripConfig& cfg, const SpinOperatorSet& ops) {
  const DetuningFactors chi = chi_factors(cfg.nu_hz, cfg.line);
  RoundTripResult out;
  out.theory = noise_budget(chi, ops);
  out.theory_phi2_total = out.theory.phi2_total * cfg.variance_scale;

  const FaradayNoiseSpec spec =
      make_faraday_noise_spec(chi, ops, cfg.rates, cfg.pm.wall_broadening_hz,
                              FieldMode::PulseModulated, cfg.pm, cfg.variance_scale);
  const std::vector<double> series = simulate_faraday_noise(spec, cfg.series);
  const double fs = cfg.series.sample_rate_hz;
  Spectrum narrow = welch_psd(series, fs, cfg.narrow_segment, cfg.overlap_fraction);
  Spectrum wide = welch_psd(series, fs, cfg.wide_segment, cfg.overlap_fraction);

  if (cfg.subtract_background) {
    TimeSeriesConfig bg_cfg = cfg.series;
    bg_cfg.seed = cfg.series.seed + 1;
    FaradayNoiseSpec silent = spec;
    silent.variance_scale = 0.0;
    const std::vector<double> bg = simulate_faraday_noise(silent, bg_cfg);
    auto n = background_subtract(narrow, welch_psd(bg, fs, cfg.narrow_segment, cfg.overlap_fraction));
    auto w = background_subtract(wide, welch_psd(bg, fs, cfg.wide_segment, cfg.overlap_fraction));
    narrow = std::move(n.spectrum);
    wide = std::move(w.spectrum);
    out.clamped_bins = n.clamped_bins + w.clamped_bins;
  }
  out.estimate = estimate_xi(narrow, wide, cfg.pm, out.theory_phi2_total, cfg.options);
  return out;
}

}  // namespace spinnoise
