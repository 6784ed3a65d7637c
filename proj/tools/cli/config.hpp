// Flat "section.key = value" run configuration with units in key names.
#pragma once

#include <spinnoise/dynamics.hpp>
#include <spinnoise/noisegen.hpp>
#include <spinnoise/optics.hpp>
#include <spinnoise/pipeline.hpp>
#include <spinnoise/spectra.hpp>

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace osn {

enum class ValueType { Real, Integer, Text, Boolean };

struct ConfigKey {
  std::string key;
  ValueType type;
  std::string default_value;  // "auto" marks a derived quantity
  std::string description;
};

const std::vector<ConfigKey>& config_keys();
std::string type_name(ValueType t);

/// Thrown for malformed or unknown configuration entries.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FlatConfig {
 public:
  /// Defaults for every known key.
  FlatConfig();

  /// Lines "key = value"; '#' starts a comment. Later entries win.
  void merge(std::istream& in, const std::string& source);
  /// Single "key=value" override.
  void set(const std::string& key, const std::string& value);

  bool is_auto(const std::string& key) const;
  double real(const std::string& key) const;
  long long integer(const std::string& key) const;
  std::string text(const std::string& key) const;
  bool boolean(const std::string& key) const;

  /// Canonical dump, one key per line in schema order.
  void write(std::ostream& out) const;

 private:
  const std::string& raw(const std::string& key) const;
  std::map<std::string, std::string> values_;
};

std::vector<std::string> preset_names();
/// Throws ConfigError for an unknown preset.
const std::string& preset_text(const std::string& name);

/// Everything a subcommand needs, with derived quantities resolved.
struct RunConfig {
  spinnoise::AtomSpec atom;
  spinnoise::OpticalLine line;
  spinnoise::CellGeometry cell;
  double gamma_se = 0.0;  // s^-1
  double omega_e = 0.0;   // rad/s
  spinnoise::RateRegime regime;
  double probe_nu_hz = 0.0;  // relative to the hyperfine-free line center
  spinnoise::PmFieldSpec pm;
  spinnoise::DcFieldSpec dc;
  spinnoise::TimeSeriesConfig series;
  std::size_t narrow_segment = 32768;
  std::size_t wide_segment = 4096;
  double overlap_fraction = 0.5;
  bool subtract_background = false;
  spinnoise::PipelineOptions pipeline;

  /// Rotation variance per unit spin variance, n l / A_p.
  double signal_scale() const {
    return cell.number_density_m3 * cell.length_m / cell.probe_area_m2;
  }
};

RunConfig resolve(const FlatConfig& cfg);

/// Probe frequency for `offset_ghz` relative to the named reference.
double probe_frequency(const spinnoise::OpticalLine& line, const std::string& reference,
                       double offset_ghz);

}  // namespace osn
