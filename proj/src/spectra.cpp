#include "spinnoise/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace spinnoise {

using std::numbers::pi;

void LorentzianComponent::validate() const {
  if (!std::isfinite(center) || !(fwhm > 0.0) || !std::isfinite(fwhm) || !(area >= 0.0) ||
      !std::isfinite(area)) {
    throw std::invalid_argument("Lorentzian component needs finite center, fwhm > 0, area >= 0");
  }
}

double lorentzian_psd(double freq_hz, double center, double fwhm, double area) {
  const double half = 0.5 * fwhm;
  const double h2 = half * half;
  const double dp = freq_hz - center;
  const double dm = freq_hz + center;
  return area * half / pi * (1.0 / (dp * dp + h2) + 1.0 / (dm * dm + h2));
}

void SpectrumModel::validate() const {
  for (const auto& c : components) c.validate();
  if (!std::isfinite(floor)) throw std::invalid_argument("spectrum floor must be finite");
}

void PmFieldSpec::validate() const {
  if (!(pulse_rate_hz > 0.0) || !std::isfinite(pulse_rate_hz)) {
    throw std::invalid_argument("pulse rate must be positive");
  }
  if (!(duty_cycle > 0.0 && duty_cycle < 1.0)) {
    throw std::invalid_argument("duty cycle must lie in (0, 1)");
  }
  if (harmonic_count < 1 || harmonic_count % 2 == 0) {
    throw std::invalid_argument("harmonic count must be a positive odd integer");
  }
  if (!(wall_broadening_hz >= 0.0)) throw std::invalid_argument("wall broadening must be >= 0");
}

std::vector<int> PmFieldSpec::harmonics() const {
  std::vector<int> out;
  for (int n = 1; n <= harmonic_count; n += 2) out.push_back(n);
  return out;
}

void DcFieldSpec::validate() const {
  if (!std::isfinite(resonance_hz)) throw std::invalid_argument("dc resonance must be finite");
  if (!(nuclear_zeeman_split_hz >= 0.0)) {
    throw std::invalid_argument("nuclear Zeeman split must be >= 0");
  }
  if (!(wall_broadening_hz >= 0.0)) throw std::invalid_argument("wall broadening must be >= 0");
}

namespace {

LorentzianComponent make_line(double center, double fwhm, double area, bool& delta_like) {
  if (!(fwhm >= kMinimumFwhmHz)) {
    fwhm = kMinimumFwhmHz;
    delta_like = true;
  }
  LorentzianComponent c{center, fwhm, area};
  c.validate();
  return c;
}

void check_rates(const RateSet& rates) {
  if (!(rates.gamma_a >= 0.0) || !(rates.gamma_b >= 0.0) || !(rates.gamma_minus >= 0.0)) {
    throw std::invalid_argument("relaxation rates must be non-negative");
  }
}

}  // namespace

SpectrumModel zero_field_model(const NoiseBudget& budget, const RateSet& rates,
                               double wall_broadening_hz) {
  check_rates(rates);
  if (!(wall_broadening_hz >= 0.0)) throw std::invalid_argument("wall broadening must be >= 0");
  SpectrumModel m;
  m.components.push_back(make_line(0.0, wall_broadening_hz, budget.phi2_plus, m.delta_like));
  m.components.push_back(make_line(0.0, wall_broadening_hz + rates.gamma_minus / pi,
                                   budget.phi2_minus, m.delta_like));
  return m;
}

double harmonic_weight(int n) {
  if (n < 1 || n % 2 == 0) throw std::invalid_argument("harmonic number must be odd and positive");
  return 8.0 / (pi * pi * n * n);
}

std::vector<LorentzianComponent> pm_comb(double power, double fwhm, const PmFieldSpec& pm) {
  pm.validate();
  std::vector<LorentzianComponent> out;
  bool unused = false;
  for (int n : pm.harmonics()) {
    out.push_back(make_line(pm.harmonic_center(n), fwhm, harmonic_weight(n) * power, unused));
  }
  return out;
}

SpectrumModel pm_field_model(const NoiseBudget& budget, const RateSet& rates,
                             const PmFieldSpec& pm) {
  pm.validate();
  check_rates(rates);
  SpectrumModel m;
  double narrow = pm.wall_broadening_hz + pm.duty_cycle * rates.gamma_a / pi;
  double broad = pm.wall_broadening_hz + rates.gamma_minus / pi;
  if (narrow < kMinimumFwhmHz || broad < kMinimumFwhmHz) m.delta_like = true;
  narrow = std::max(narrow, kMinimumFwhmHz);
  broad = std::max(broad, kMinimumFwhmHz);
  for (const auto& c : pm_comb(budget.phi2_plus, narrow, pm)) m.components.push_back(c);
  for (const auto& c : pm_comb(budget.phi2_minus, broad, pm)) m.components.push_back(c);
  return m;
}

SpectrumModel dc_field_model(const DetuningFactors& chi, const SpinOperatorSet& ops,
                             const RateSet& rates, const DcFieldSpec& spec) {
  spec.validate();
  check_rates(rates);
  SpectrumModel m;
  const double area_a = chi.chi_a * chi.chi_a * thermal_variance(ops, ops.Fza);
  const double area_b = chi.chi_b * chi.chi_b * thermal_variance(ops, ops.Fzb);
  m.components.push_back(make_line(spec.resonance_hz,
                                   spec.wall_broadening_hz + rates.gamma_a / pi, area_a,
                                   m.delta_like));
  m.components.push_back(make_line(spec.resonance_hz + spec.nuclear_zeeman_split_hz,
                                   spec.wall_broadening_hz + rates.gamma_b / pi, area_b,
                                   m.delta_like));
  return m;
}

std::vector<double> evaluate_psd(const SpectrumModel& model, std::span<const double> freq_hz) {
  model.validate();
  for (std::size_t i = 1; i < freq_hz.size(); ++i) {
    if (!(freq_hz[i] >= freq_hz[i - 1])) throw std::invalid_argument("frequency grid not sorted");
  }
  std::vector<double> out(freq_hz.size(), model.floor);
  for (const auto& c : model.components) {
    for (std::size_t i = 0; i < freq_hz.size(); ++i) {
      out[i] += lorentzian_psd(freq_hz[i], c.center, c.fwhm, c.area);
    }
  }
  return out;
}

double total_power(const SpectrumModel& model, double bandwidth_hz) {
  double sum = model.floor * bandwidth_hz;
  for (const auto& c : model.components) sum += c.area;
  return sum;
}

double pm_power_from_first_harmonic(double first_harmonic_area) {
  return first_harmonic_area * pi * pi / 8.0;
}

void write_model(std::ostream& out, const SpectrumModel& model) {
  model.validate();
  const auto old_precision = out.precision(17);
  out << "# spinnoise spectrum model v1\n";
  out << "floor " << model.floor << "\n";
  out << "delta_like " << (model.delta_like ? 1 : 0) << "\n";
  for (const auto& c : model.components) {
    out << "component " << c.center << ' ' << c.fwhm << ' ' << c.area << "\n";
  }
  out.precision(old_precision);
}

SpectrumModel read_model(std::istream& in) {
  SpectrumModel model;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key) || key.front() == '#') continue;
    auto fail = [&](const std::string& why) {
      throw std::runtime_error("spectrum model line " + std::to_string(line_no) + ": " + why);
    };
    if (key == "floor") {
      if (!(ls >> model.floor)) fail("expected floor value");
    } else if (key == "delta_like") {
      int flag = 0;
      if (!(ls >> flag)) fail("expected 0 or 1");
      model.delta_like = flag != 0;
    } else if (key == "component") {
      LorentzianComponent c;
      if (!(ls >> c.center >> c.fwhm >> c.area)) fail("expected center fwhm area");
      model.components.push_back(c);
    } else {
      fail("unknown record '" + key + "'");
    }
    std::string extra;
    if (ls >> extra) fail("trailing text '" + extra + "'");
  }
  model.validate();
  return model;
}

}  // namespace spinnoise
