#include "spinnoise/optics.hpp"

#include "spinnoise/faddeeva.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace spinnoise {

using std::numbers::pi;

TransitionOffsets transition_offsets(double ground_splitting_hz, double excited_splitting_hz) {
  const double e_a = 3.0 / 8.0 * ground_splitting_hz;
  const double e_b = -5.0 / 8.0 * ground_splitting_hz;
  const double e_ap = 3.0 / 8.0 * excited_splitting_hz;
  const double e_bp = -5.0 / 8.0 * excited_splitting_hz;
  return {e_ap - e_a, e_bp - e_a, e_ap - e_b, e_bp - e_b};
}

double OpticalLine::prefactor() const {
  return pi * constants::kClassicalElectronRadius * constants::kSpeedOfLight *
         oscillator_strength / (2 * nuclear_spin + 1);
}

double doppler_fwhm(double line_frequency_hz, double mass_kg, double temperature_k) {
  const double c = constants::kSpeedOfLight;
  return line_frequency_hz *
         std::sqrt(8.0 * constants::kBoltzmann * temperature_k * std::log(2.0) / (mass_kg * c * c));
}

OpticalLine OpticalLine::rb87_d1(double temperature_k) {
  OpticalLine line;
  line.doppler_fwhm_hz = doppler_fwhm(line.line_center_hz(), constants::kRb87Mass, temperature_k);
  return line;
}

double dispersive_line(double detuning_hz, double lorentzian_fwhm_hz, double doppler_fwhm_hz) {
  if (lorentzian_fwhm_hz < 0.0 || doppler_fwhm_hz < 0.0) {
    throw std::invalid_argument("line widths must be non-negative");
  }
  if (lorentzian_fwhm_hz == 0.0 && doppler_fwhm_hz == 0.0) {
    throw std::invalid_argument("at least one line width must be positive");
  }
  if (doppler_fwhm_hz == 0.0) {
    const double half = 0.5 * lorentzian_fwhm_hz;
    return detuning_hz / (pi * (detuning_hz * detuning_hz + half * half));
  }
  const double sigma = doppler_fwhm_hz / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  const std::complex<double> z(detuning_hz, 0.5 * lorentzian_fwhm_hz);
  return faddeeva(z / (sigma * std::numbers::sqrt2)).imag() / (sigma * std::sqrt(2.0 * pi));
}

DetuningFactors chi_factors(double nu, const OpticalLine& line) {
  const TransitionOffsets off = line.offsets();
  auto shape = [&](double center) {
    return dispersive_line(nu - center, line.lorentzian_fwhm_hz, line.doppler_fwhm_hz);
  };
  const double k = line.prefactor();
  DetuningFactors out;
  out.nu = nu;
  out.chi_a = k * (0.25 * shape(off.aa) + 0.75 * shape(off.ab));
  out.chi_b = -k * (1.25 * shape(off.ba) - 0.25 * shape(off.bb));
  return out;
}

NoiseBudget noise_budget(const DetuningFactors& chi, const SpinOperatorSet& ops) {
  if (!ops.Fz_plus || !ops.Fz_minus) {
    throw std::invalid_argument("noise budget requires the I = 3/2 eigenobservables");
  }
  if (!std::isfinite(chi.chi_a) || !std::isfinite(chi.chi_b)) {
    throw std::invalid_argument("detuning factors are not finite");
  }
  const double var_a = thermal_variance(ops, ops.Fza);
  const double var_b = thermal_variance(ops, ops.Fzb);
  const double sum_p = 5.0 * chi.chi_a + chi.chi_b;
  const double diff = chi.chi_a - chi.chi_b;

  NoiseBudget nb;
  nb.phi2_plus = sum_p * sum_p * (var_a + var_b) / 36.0;
  nb.phi2_minus = diff * diff * (var_a + 25.0 * var_b) / 36.0;
  nb.phi2_total = chi.chi_a * chi.chi_a * var_a + chi.chi_b * chi.chi_b * var_b;
  if (!(nb.phi2_total > std::numeric_limits<double>::min())) {
    nb.defined = false;
    nb.xi_plus = nb.xi_minus = nb.xi = std::numeric_limits<double>::quiet_NaN();
    return nb;
  }
  nb.xi_plus = nb.phi2_plus / nb.phi2_total;
  nb.xi_minus = nb.phi2_minus / nb.phi2_total;
  nb.xi = nb.xi_plus + nb.xi_minus;
  return nb;
}

NoiseBudget noise_budget(double nu, const OpticalLine& line, const SpinOperatorSet& ops) {
  return noise_budget(chi_factors(nu, line), ops);
}

std::array<Matrix, 2> phi_observables(const DetuningFactors& chi, const SpinOperatorSet& ops) {
  if (!ops.Fz_plus || !ops.Fz_minus) {
    throw std::invalid_argument("Phi decomposition requires the I = 3/2 eigenobservables");
  }
  return {(5.0 * chi.chi_a + chi.chi_b) * *ops.Fz_plus, (chi.chi_b - chi.chi_a) * *ops.Fz_minus};
}

std::string to_string(PolarKind kind) { return kind == PolarKind::Plus ? "plus" : "minus"; }

std::vector<PolarRoot> polar_frequencies(const OpticalLine& line, double window_lo_hz,
                                         double window_hi_hz, int samples_per_interval) {
  if (!std::isfinite(window_lo_hz) || !std::isfinite(window_hi_hz) || window_hi_hz <= window_lo_hz) {
    throw std::invalid_argument("polar search window must be finite and non-empty");
  }
  samples_per_interval = std::max(samples_per_interval, 16);
  const auto centers = line.offsets().all();

  std::vector<double> edges{window_lo_hz, window_hi_hz};
  for (double c : centers) {
    if (c > window_lo_hz && c < window_hi_hz) edges.push_back(c);
  }
  std::sort(edges.begin(), edges.end());

  auto g_plus = [&](double nu) {
    const auto chi = chi_factors(nu, line);
    return chi.chi_a - chi.chi_b;
  };
  auto g_minus = [&](double nu) {
    const auto chi = chi_factors(nu, line);
    return 5.0 * chi.chi_a + chi.chi_b;
  };
  const double near_width =
      3.0 * (line.doppler_fwhm_hz > 0.0 ? line.doppler_fwhm_hz : line.lorentzian_fwhm_hz);

  std::vector<PolarRoot> roots;
  auto record = [&](double nu, PolarKind kind) {
    PolarRoot r{nu, kind, false};
    for (double c : centers) r.near_resonance = r.near_resonance || std::abs(nu - c) < near_width;
    roots.push_back(r);
  };

  for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
    const double lo = edges[s], hi = edges[s + 1];
    const double step = (hi - lo) / samples_per_interval;
    for (const auto kind : {PolarKind::Plus, PolarKind::Minus}) {
      auto g = [&](double nu) { return kind == PolarKind::Plus ? g_plus(nu) : g_minus(nu); };
      double x0 = lo;
      double g0 = g(x0);
      for (int i = 1; i <= samples_per_interval; ++i) {
        const double x1 = (i == samples_per_interval) ? hi : lo + i * step;
        const double g1 = g(x1);
        if (g0 == 0.0) {
          record(x0, kind);
        } else if (g0 * g1 < 0.0) {
          double a = x0, b = x1, ga = g0;
          for (int it = 0; it < 200 && b - a > 1e-3; ++it) {
            const double m = 0.5 * (a + b);
            const double gm = g(m);
            if (gm == 0.0) {
              a = b = m;
              break;
            }
            if ((gm < 0.0) == (ga < 0.0)) {
              a = m;
              ga = gm;
            } else {
              b = m;
            }
          }
          record(0.5 * (a + b), kind);
        }
        x0 = x1;
        g0 = g1;
      }
    }
  }
  std::sort(roots.begin(), roots.end(),
            [](const PolarRoot& x, const PolarRoot& y) { return x.nu_hz < y.nu_hz; });
  // A root sitting exactly on an interval edge is seen from both sides.
  roots.erase(std::unique(roots.begin(), roots.end(),
                          [](const PolarRoot& x, const PolarRoot& y) {
                            return x.kind == y.kind && std::abs(x.nu_hz - y.nu_hz) < 1.0;
                          }),
              roots.end());
  return roots;
}

void CellGeometry::validate() const {
  if (!(length_m > 0.0) || !(probe_area_m2 > 0.0) || !(number_density_m3 > 0.0)) {
    throw std::invalid_argument("cell length, probe area and density must be positive");
  }
}

double osn_power(double nu, const OpticalLine& line, const CellGeometry& cell,
                 const SpinOperatorSet& ops) {
  cell.validate();
  const NoiseBudget nb = noise_budget(nu, line, ops);
  return cell.number_density_m3 * cell.length_m / cell.probe_area_m2 * nb.phi2_total;
}

double rb_vapor_density(double temperature_k) {
  constexpr double kMeltingPoint = 312.46;
  constexpr double kTorr = 133.322368;
  const double log10_torr = temperature_k >= kMeltingPoint
                                ? 2.881 + 4.312 - 4040.0 / temperature_k
                                : 2.881 + 4.857 - 4215.0 / temperature_k;
  return std::pow(10.0, log10_torr) * kTorr / (constants::kBoltzmann * temperature_k);
}

double mean_relative_speed(double mass_kg, double temperature_k) {
  return std::sqrt(16.0 * constants::kBoltzmann * temperature_k / (pi * mass_kg));
}

}  // namespace spinnoise
