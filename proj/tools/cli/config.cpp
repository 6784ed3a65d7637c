#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace osn {
namespace {

using spinnoise::constants::kRb87Mass;

const char* const kAuto = "auto";

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

const ConfigKey* find_key(const std::string& key) {
  for (const auto& k : config_keys()) {
    if (k.key == key) return &k;
  }
  return nullptr;
}

double parse_real(const std::string& key, const std::string& text) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw ConfigError(key + ": expected a finite number, got '" + text + "'");
  }
  return v;
}

long long parse_integer(const std::string& key, const std::string& text) {
  long long v = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(key + ": expected an integer, got '" + text + "'");
  }
  return v;
}

bool parse_boolean(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

void check_value(const ConfigKey& k, const std::string& value) {
  if (value == kAuto) {
    if (k.default_value != kAuto) throw ConfigError(k.key + ": 'auto' is not allowed");
    return;
  }
  switch (k.type) {
    case ValueType::Real: parse_real(k.key, value); break;
    case ValueType::Integer: parse_integer(k.key, value); break;
    case ValueType::Boolean: parse_boolean(k.key, value); break;
    case ValueType::Text: break;
  }
}

std::size_t positive_size(const FlatConfig& cfg, const std::string& key) {
  const long long v = cfg.integer(key);
  if (v < 2) throw ConfigError(key + ": must be at least 2");
  return static_cast<std::size_t>(v);
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  using enum ValueType;
  static const std::vector<ConfigKey> keys = {
      {"atom.isotope", Text, "87Rb", "label only"},
      {"atom.nuclear_spin", Real, "1.5", "I; 2I must be a positive integer"},
      {"atom.hyperfine_splitting_ghz", Real, "6.834682611", "ground splitting W"},
      {"atom.excited_splitting_ghz", Real, "0.8166", "excited splitting W'"},
      {"optical.wavelength_nm", Real, "794.978851156", "vacuum wavelength of the line"},
      {"optical.oscillator_strength", Real, "0.34", "f of the line"},
      {"optical.lorentzian_fwhm_mhz", Real, "5.75", "homogeneous width"},
      {"optical.doppler_fwhm_mhz", Real, kAuto, "auto: from cell.temperature_k"},
      {"cell.temperature_k", Real, "381.35", "vapor temperature"},
      {"cell.length_mm", Real, "23", "optical path length l"},
      {"cell.probe_area_mm2", Real, "64", "probe beam area A_p"},
      {"cell.density_m3", Real, kAuto, "auto: saturated vapor at cell.temperature_k"},
      {"se.rate_per_s", Real, kAuto, "Gamma; auto: density * cross section * speed"},
      {"se.cross_section_m2", Real, "1.9e-18", "spin-exchange cross section"},
      {"se.relative_speed_m_s", Real, kAuto, "auto: mean relative thermal speed"},
      {"se.omega_e_rad_s", Real, "0", "bare-electron Larmor frequency"},
      {"se.hyperfine_over_gamma", Real, "1e8", "2 pi W / Gamma for rate extraction"},
      {"se.larmor_over_gamma", Real, "100", "omega_0 / Gamma for rate extraction"},
      {"probe.nu_ghz", Real, "0", "probe detuning from the reference"},
      {"probe.relative_to", Text, "center",
       "center, aa, ab, ba, bb, polar_plus or polar_minus"},
      {"pm.pulse_rate_hz", Real, "2000", "nu_p"},
      {"pm.duty_cycle", Real, "0.0014", "d"},
      {"pm.harmonic_count", Integer, "5", "highest odd harmonic n_max"},
      {"pm.wall_broadening_hz", Real, "25", "delta_w"},
      {"dc.resonance_hz", Real, "10000", "Larmor resonance of the dc spectrum"},
      {"dc.nuclear_zeeman_split_hz", Real, "159", "line separation"},
      {"simulation.seed", Integer, "1", "generator seed"},
      {"simulation.sample_rate_hz", Real, "20000", "sampling rate"},
      {"simulation.duration_s", Real, "120", "record length"},
      {"simulation.shot_noise_psd_rad2_per_hz", Real, "0", "one-sided white floor"},
      {"analysis.narrow_segment", Integer, "32768", "Welch segment for the narrow scan"},
      {"analysis.wide_segment", Integer, "4096", "Welch segment for the wide scan"},
      {"analysis.overlap_fraction", Real, "0.5", "Welch overlap"},
      {"analysis.subtract_background", Boolean, "false", "subtract a shot-only spectrum"},
      {"analysis.base_fit", Text, "deblended", "deblended or masked"},
      {"analysis.deblend_passes", Integer, "2", "alternating refits"},
      {"analysis.joint_fit", Boolean, "true", "also run the unmasked joint fit"},
      {"analysis.inverse_variance_weights", Boolean, "false", "1/model^2 second pass"},
      {"analysis.narrow_half_window_hz", Real, "150", "narrow fit half window"},
      {"analysis.mask_fwhm_multiple", Real, "8", "mask half width in narrow widths"},
      {"analysis.wide_max_hz", Real, "0", "base fit upper edge; 0 picks (n_max+1) nu_p/2"},
  };
  return keys;
}

std::string type_name(ValueType t) {
  switch (t) {
    case ValueType::Real: return "real";
    case ValueType::Integer: return "integer";
    case ValueType::Text: return "text";
    case ValueType::Boolean: return "boolean";
  }
  return "unknown";
}

FlatConfig::FlatConfig() {
  for (const auto& k : config_keys()) values_[k.key] = k.default_value;
}

void FlatConfig::set(const std::string& key, const std::string& value) {
  const ConfigKey* k = find_key(key);
  if (k == nullptr) throw ConfigError("unknown key '" + key + "'");
  check_value(*k, value);
  values_[key] = value;
}

void FlatConfig::merge(std::istream& in, const std::string& source) {
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(number) + ": expected key = value");
    }
    try {
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(source + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

const std::string& FlatConfig::raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown key '" + key + "'");
  return it->second;
}

bool FlatConfig::is_auto(const std::string& key) const { return raw(key) == kAuto; }
double FlatConfig::real(const std::string& key) const { return parse_real(key, raw(key)); }
long long FlatConfig::integer(const std::string& key) const {
  return parse_integer(key, raw(key));
}
std::string FlatConfig::text(const std::string& key) const { return raw(key); }
bool FlatConfig::boolean(const std::string& key) const { return parse_boolean(key, raw(key)); }

void FlatConfig::write(std::ostream& out) const {
  for (const auto& k : config_keys()) out << k.key << " = " << raw(k.key) << '\n';
}

double probe_frequency(const spinnoise::OpticalLine& line, const std::string& reference,
                       double offset_ghz) {
  const double offset = offset_ghz * 1e9;
  const auto t = line.offsets();
  if (reference == "center") return offset;
  if (reference == "aa") return t.aa + offset;
  if (reference == "ab") return t.ab + offset;
  if (reference == "ba") return t.ba + offset;
  if (reference == "bb") return t.bb + offset;
  if (reference == "polar_plus" || reference == "polar_minus") {
    const auto kind =
        reference == "polar_plus" ? spinnoise::PolarKind::Plus : spinnoise::PolarKind::Minus;
    for (const auto& root : spinnoise::polar_frequencies(line, -2e9, 10e9)) {
      if (root.kind == kind && !root.near_resonance) return root.nu_hz + offset;
    }
    throw ConfigError("probe.relative_to: no " + reference + " root in [-2, 10] GHz");
  }
  throw ConfigError("probe.relative_to: unknown reference '" + reference + "'");
}

RunConfig resolve(const FlatConfig& cfg) {
  RunConfig run;
  run.atom.isotope_label = cfg.text("atom.isotope");
  run.atom.nuclear_spin = cfg.real("atom.nuclear_spin");
  run.atom.hyperfine_splitting_hz = cfg.real("atom.hyperfine_splitting_ghz") * 1e9;
  run.atom.validate();

  const double temperature = cfg.real("cell.temperature_k");
  if (!(temperature > 0.0)) throw ConfigError("cell.temperature_k: must be positive");

  auto& line = run.line;
  line.wavelength_m = cfg.real("optical.wavelength_nm") * 1e-9;
  if (!(line.wavelength_m > 0.0)) throw ConfigError("optical.wavelength_nm: must be positive");
  line.ground_splitting_hz = run.atom.hyperfine_splitting_hz;
  line.excited_splitting_hz = cfg.real("atom.excited_splitting_ghz") * 1e9;
  line.oscillator_strength = cfg.real("optical.oscillator_strength");
  line.lorentzian_fwhm_hz = cfg.real("optical.lorentzian_fwhm_mhz") * 1e6;
  line.doppler_fwhm_hz =
      cfg.is_auto("optical.doppler_fwhm_mhz")
          ? spinnoise::doppler_fwhm(line.line_center_hz(), kRb87Mass, temperature)
          : cfg.real("optical.doppler_fwhm_mhz") * 1e6;
  line.nuclear_spin = run.atom.nuclear_spin;
  if (line.lorentzian_fwhm_hz < 0.0 || line.doppler_fwhm_hz < 0.0 ||
      line.lorentzian_fwhm_hz + line.doppler_fwhm_hz <= 0.0) {
    throw ConfigError("optical: line widths must be nonnegative and not both zero");
  }

  run.cell.length_m = cfg.real("cell.length_mm") * 1e-3;
  run.cell.probe_area_m2 = cfg.real("cell.probe_area_mm2") * 1e-6;
  run.cell.number_density_m3 = cfg.is_auto("cell.density_m3")
                                   ? spinnoise::rb_vapor_density(temperature)
                                   : cfg.real("cell.density_m3");
  run.cell.validate();

  if (cfg.is_auto("se.rate_per_s")) {
    const double speed = cfg.is_auto("se.relative_speed_m_s")
                             ? spinnoise::mean_relative_speed(kRb87Mass, temperature)
                             : cfg.real("se.relative_speed_m_s");
    run.gamma_se = spinnoise::SEParams::from_collisions(run.cell.number_density_m3,
                                                        cfg.real("se.cross_section_m2"), speed)
                       .gamma_se;
  } else {
    run.gamma_se = cfg.real("se.rate_per_s");
  }
  run.omega_e = cfg.real("se.omega_e_rad_s");
  spinnoise::SEParams{run.gamma_se, run.omega_e}.validate();
  run.regime.hyperfine_over_gamma = cfg.real("se.hyperfine_over_gamma");
  run.regime.larmor_over_gamma = cfg.real("se.larmor_over_gamma");
  if (!(run.regime.hyperfine_over_gamma > 0.0) || !(run.regime.larmor_over_gamma > 0.0)) {
    throw ConfigError("se: rate-extraction ratios must be positive");
  }

  run.probe_nu_hz =
      probe_frequency(line, cfg.text("probe.relative_to"), cfg.real("probe.nu_ghz"));

  run.pm.pulse_rate_hz = cfg.real("pm.pulse_rate_hz");
  run.pm.duty_cycle = cfg.real("pm.duty_cycle");
  run.pm.harmonic_count = static_cast<int>(cfg.integer("pm.harmonic_count"));
  run.pm.wall_broadening_hz = cfg.real("pm.wall_broadening_hz");
  run.pm.validate();

  run.dc.resonance_hz = cfg.real("dc.resonance_hz");
  run.dc.nuclear_zeeman_split_hz = cfg.real("dc.nuclear_zeeman_split_hz");
  run.dc.wall_broadening_hz = run.pm.wall_broadening_hz;
  run.dc.validate();

  const long long seed = cfg.integer("simulation.seed");
  if (seed < 0) throw ConfigError("simulation.seed: must be nonnegative");
  run.series.seed = static_cast<std::uint64_t>(seed);
  run.series.sample_rate_hz = cfg.real("simulation.sample_rate_hz");
  run.series.duration_s = cfg.real("simulation.duration_s");
  run.series.shot_noise_psd = cfg.real("simulation.shot_noise_psd_rad2_per_hz");
  run.series.validate();

  run.narrow_segment = positive_size(cfg, "analysis.narrow_segment");
  run.wide_segment = positive_size(cfg, "analysis.wide_segment");
  run.overlap_fraction = cfg.real("analysis.overlap_fraction");
  if (!(run.overlap_fraction >= 0.0 && run.overlap_fraction < 1.0)) {
    throw ConfigError("analysis.overlap_fraction: must lie in [0, 1)");
  }
  run.subtract_background = cfg.boolean("analysis.subtract_background");
  const std::string style = cfg.text("analysis.base_fit");
  if (style == "deblended") {
    run.pipeline.style = spinnoise::BaseFitStyle::MaskedDeblended;
  } else if (style == "masked") {
    run.pipeline.style = spinnoise::BaseFitStyle::Masked;
  } else {
    throw ConfigError("analysis.base_fit: expected deblended or masked");
  }
  run.pipeline.deblend_passes = static_cast<int>(cfg.integer("analysis.deblend_passes"));
  if (run.pipeline.deblend_passes < 0) throw ConfigError("analysis.deblend_passes: negative");
  run.pipeline.joint_fit = cfg.boolean("analysis.joint_fit");
  run.pipeline.inverse_variance_weights = cfg.boolean("analysis.inverse_variance_weights");
  run.pipeline.narrow_half_window_hz = cfg.real("analysis.narrow_half_window_hz");
  run.pipeline.mask_fwhm_multiple = cfg.real("analysis.mask_fwhm_multiple");
  run.pipeline.wide_max_hz = cfg.real("analysis.wide_max_hz");
  if (!(run.pipeline.narrow_half_window_hz > 0.0) ||
      !(run.pipeline.mask_fwhm_multiple > 0.0) || run.pipeline.wide_max_hz < 0.0) {
    throw ConfigError("analysis: window sizes must be positive");
  }
  return run;
}

}  // namespace osn
