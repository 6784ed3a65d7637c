#include "commands.hpp"

#include "config.hpp"

#include <spinnoise/fitting.hpp>
#include <spinnoise/pipeline.hpp>
#include <spinnoise/timeseries_io.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace osn {
namespace {

using Json = nlohmann::ordered_json;
namespace sn = spinnoise;

/// Input problems that are not configuration keys (files, flags).
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised after output is written when a fit did not converge.
struct FitFlagged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string sig9(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

Json num(double v) {
  if (!std::isfinite(v)) return nullptr;
  return std::stod(sig9(v));
}

Json num(const std::optional<double>& v) { return v ? num(*v) : Json(nullptr); }

/// Destination of a subcommand's main output: a file or the caller's stream.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback, bool binary = false) {
    if (path.empty() || path == "-") {
      stream_ = &fallback;
      return;
    }
    file_.open(path, binary ? std::ios::binary | std::ios::out : std::ios::out);
    if (!file_) throw InputError("cannot open '" + path + "' for writing");
    stream_ = &file_;
  }
  std::ostream& get() { return *stream_; }
  void finish() {
    stream_->flush();
    if (!*stream_) throw InputError("write failed");
  }

 private:
  std::ofstream file_;
  std::ostream* stream_ = nullptr;
};

std::ifstream open_input(const std::string& path, bool binary = false) {
  std::ifstream in(path, binary ? std::ios::binary | std::ios::in : std::ios::in);
  if (!in) throw InputError("cannot open '" + path + "'");
  return in;
}

void write_json(std::ostream& out, const Json& j) { out << j.dump(2) << '\n'; }

/// Scales every area and the floor, e.g. from spin units to rad^2.
sn::SpectrumModel scaled(sn::SpectrumModel model, double factor) {
  for (auto& c : model.components) c.area *= factor;
  model.floor *= factor;
  return model;
}

struct Context {
  FlatConfig flat;
  RunConfig run;
};

sn::SpinOperatorSet operators(const RunConfig& run) { return sn::build_operators(run.atom); }

sn::RateSet rates(const RunConfig& run) {
  return sn::compute_rate_set(run.gamma_se, run.atom.nuclear_spin, run.regime);
}

Json fit_json(const sn::FitResult& fit) {
  Json comps = Json::array();
  for (const auto& c : fit.components) {
    comps.push_back({{"center_hz", num(c.center)},
                     {"center_sigma_hz", num(c.center_sigma)},
                     {"fwhm_hz", num(c.fwhm)},
                     {"fwhm_sigma_hz", num(c.fwhm_sigma)},
                     {"area", num(c.area)},
                     {"area_sigma", num(c.area_sigma)}});
  }
  return {{"status", sn::to_string(fit.status)},
          {"converged", fit.converged},
          {"message", fit.message},
          {"iterations", fit.iterations},
          {"free_parameters", fit.free_parameters},
          {"used_bins", fit.used_bins},
          {"residual_norm", num(fit.residual_norm)},
          {"reduced_residual", num(fit.reduced_residual)},
          {"condition_number", num(fit.condition_number)},
          {"floor", num(fit.floor)},
          {"floor_sigma", num(fit.floor_sigma)},
          {"components", comps}};
}

// ---------------------------------------------------------------- sweep

struct SweepArgs {
  double from_ghz = -60.0, to_ghz = 60.0, step_ghz = 0.1;
  std::string out;
};

void cmd_sweep(const Context& ctx, const SweepArgs& a, std::ostream& stdout_) {
  if (!(a.step_ghz > 0.0)) throw InputError("--step-ghz must be positive");
  if (!(a.to_ghz >= a.from_ghz)) throw InputError("--to-ghz must not be below --from-ghz");
  const auto count = static_cast<long long>(std::floor((a.to_ghz - a.from_ghz) / a.step_ghz + 1e-9)) + 1;
  if (count > 10'000'000) throw InputError("sweep has too many rows");
  const auto ops = operators(ctx.run);
  const double scale = ctx.run.signal_scale();

  Sink sink(a.out, stdout_);
  auto& out = sink.get();
  out << "nu_ghz,chi_a,chi_b,xi_plus,xi_minus,xi_total,phi2_total\n";
  for (long long i = 0; i < count; ++i) {
    const double nu_ghz = a.from_ghz + static_cast<double>(i) * a.step_ghz;
    const auto chi = sn::chi_factors(nu_ghz * 1e9, ctx.run.line);
    const auto b = sn::noise_budget(chi, ops);
    out << sig9(nu_ghz) << ',' << sig9(chi.chi_a) << ',' << sig9(chi.chi_b) << ','
        << sig9(b.xi_plus) << ',' << sig9(b.xi_minus) << ',' << sig9(b.xi) << ','
        << sig9(b.phi2_total * scale) << '\n';
  }
  sink.finish();
}

// ---------------------------------------------------------------- polar

void cmd_polar(const Context& ctx, double lo_ghz, double hi_ghz, std::ostream& out) {
  const auto ops = operators(ctx.run);
  Json roots = Json::array();
  for (const auto& r : sn::polar_frequencies(ctx.run.line, lo_ghz * 1e9, hi_ghz * 1e9)) {
    const auto b = sn::noise_budget(r.nu_hz, ctx.run.line, ops);
    roots.push_back({{"nu_ghz", num(r.nu_hz * 1e-9)},
                     {"kind", sn::to_string(r.kind)},
                     {"near_resonance", r.near_resonance},
                     {"xi_plus", num(b.xi_plus)},
                     {"xi_minus", num(b.xi_minus)}});
  }
  write_json(out, {{"schema_version", kSchemaVersion},
                   {"window_ghz", {num(lo_ghz), num(hi_ghz)}},
                   {"roots", roots}});
}

// ---------------------------------------------------------------- rates

void cmd_rates(const Context& ctx, std::ostream& out) {
  const double g = ctx.run.gamma_se;
  const auto r = rates(ctx.run);
  const auto table = [](double a, double b, double p, double m) {
    return Json{{"gamma_a", num(a)}, {"gamma_b", num(b)}, {"gamma_plus", num(p)},
                {"gamma_minus", num(m)}};
  };
  const double pi = std::numbers::pi;
  write_json(out,
             {{"schema_version", kSchemaVersion},
              {"gamma_se_per_s", num(g)},
              {"eigen_per_s", table(r.gamma_a, r.gamma_b, r.gamma_plus, r.gamma_minus)},
              {"eigen_over_pi_hz",
               table(r.gamma_a / pi, r.gamma_b / pi, r.gamma_plus / pi, r.gamma_minus / pi)},
              {"analytic_per_s", table(g / 8.0, 5.0 * g / 8.0, 0.0, 3.0 * g / 4.0)},
              {"gamma_minus_over_gamma_a",
               r.gamma_a > 0.0 ? num(r.gamma_minus / r.gamma_a) : Json(nullptr)}});
}

// ---------------------------------------------------------------- spectrum

struct SpectrumArgs {
  std::string mode = "pm";
  double from_hz = 0.0;
  double to_hz = -1.0;  // negative: mode-dependent default
  double step_hz = 1.0;
  std::string out, model_out;
};

sn::SpectrumModel theory_model(const RunConfig& run, const std::string& mode) {
  const auto ops = operators(run);
  const auto r = rates(run);
  const auto chi = sn::chi_factors(run.probe_nu_hz, run.line);
  sn::SpectrumModel model;
  if (mode == "pm") {
    model = sn::pm_field_model(sn::noise_budget(chi, ops), r, run.pm);
  } else if (mode == "zf") {
    model = sn::zero_field_model(sn::noise_budget(chi, ops), r, run.pm.wall_broadening_hz);
  } else if (mode == "dc") {
    model = sn::dc_field_model(chi, ops, r, run.dc);
  } else {
    throw InputError("--mode must be dc, zf or pm");
  }
  return scaled(std::move(model), run.signal_scale());
}

void cmd_spectrum(const Context& ctx, const SpectrumArgs& a, std::ostream& stdout_) {
  const auto model = theory_model(ctx.run, a.mode);
  double to = a.to_hz;
  if (to < 0.0) {
    if (a.mode == "pm") to = 0.5 * (ctx.run.pm.harmonic_count + 1) * ctx.run.pm.pulse_rate_hz;
    if (a.mode == "zf") to = 20000.0;
    if (a.mode == "dc") to = 2.0 * ctx.run.dc.resonance_hz;
  }
  if (!(a.step_hz > 0.0) || !(to > a.from_hz) || a.from_hz < 0.0) {
    throw InputError("frequency grid needs 0 <= from < to and a positive step");
  }
  const auto count = static_cast<std::size_t>(std::floor((to - a.from_hz) / a.step_hz + 1e-9)) + 1;
  if (count > 50'000'000) throw InputError("frequency grid is too large");
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i) grid[i] = a.from_hz + static_cast<double>(i) * a.step_hz;
  const auto psd = sn::evaluate_psd(model, grid);

  Sink sink(a.out, stdout_);
  sink.get() << "freq_hz,psd\n";
  for (std::size_t i = 0; i < count; ++i) sink.get() << sig9(grid[i]) << ',' << sig9(psd[i]) << '\n';
  sink.finish();
  if (!a.model_out.empty()) {
    Sink model_sink(a.model_out, stdout_);
    sn::write_model(model_sink.get(), model);
    model_sink.finish();
  }
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string mode = "pm";
  std::string format;  // bin or csv; empty: from the extension
  std::string out;
};

std::vector<double> synthesize(const RunConfig& run, sn::FieldMode mode) {
  const auto ops = operators(run);
  const auto chi = sn::chi_factors(run.probe_nu_hz, run.line);
  const auto spec = sn::make_faraday_noise_spec(chi, ops, rates(run), run.pm.wall_broadening_hz,
                                                mode, run.pm, run.signal_scale());
  return sn::simulate_faraday_noise(spec, run.series);
}

void cmd_simulate(const Context& ctx, const SimulateArgs& a) {
  sn::FieldMode mode;
  if (a.mode == "pm") {
    mode = sn::FieldMode::PulseModulated;
  } else if (a.mode == "zf") {
    mode = sn::FieldMode::Zero;
  } else {
    throw InputError("--mode must be zf or pm");
  }
  std::string format = a.format;
  if (format.empty()) format = a.out.ends_with(".csv") ? "csv" : "bin";
  if (format != "bin" && format != "csv") throw InputError("--format must be bin or csv");

  sn::TimeSeries series{ctx.run.series.sample_rate_hz, ctx.run.series.seed,
                        synthesize(ctx.run, mode)};
  std::ofstream file(a.out, format == "bin" ? std::ios::binary | std::ios::out : std::ios::out);
  if (!file) throw InputError("cannot open '" + a.out + "' for writing");
  if (format == "bin") {
    sn::write_series_binary(file, series);
  } else {
    sn::write_series_csv(file, series);
  }
  file.flush();
  if (!file) throw InputError("write failed");
}

// ---------------------------------------------------------------- welch

sn::TimeSeries load_series(const std::string& path) {
  auto in = open_input(path, true);
  return sn::read_series_binary(in);
}

void cmd_welch(const std::string& in_path, std::size_t segment, double overlap,
               const std::string& out_path, std::ostream& stdout_) {
  const auto series = load_series(in_path);
  const auto spectrum = sn::welch_psd(series.samples, series.sample_rate_hz, segment, overlap);
  Sink sink(out_path, stdout_);
  sn::write_spectrum_csv(sink.get(), spectrum);
  sink.finish();
}

// ---------------------------------------------------------------- fit

sn::ParamSpec param_from_json(const Json& j, const std::string& where) {
  if (j.is_number()) return sn::ParamSpec::free(j.get<double>());
  if (j.is_string() && j.get<std::string>() == "auto") return sn::ParamSpec::free();
  if (!j.is_object()) throw InputError(where + ": expected a number, \"auto\" or an object");
  for (const auto& [key, value] : j.items()) {
    if (key != "mode" && key != "value" && key != "group" && key != "ratio" && key != "offset") {
      throw InputError(where + ": unknown field '" + key + "'");
    }
  }
  const std::string mode = j.value("mode", "free");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double value = j.contains("value") ? j.at("value").get<double>() : nan;
  if (mode == "free") return sn::ParamSpec::free(value);
  if (mode == "fixed") {
    if (!j.contains("value")) throw InputError(where + ": fixed parameter needs a value");
    return sn::ParamSpec::fixed(value);
  }
  if (mode == "tied") {
    if (!j.contains("group")) throw InputError(where + ": tied parameter needs a group");
    return sn::ParamSpec::tied(j.at("group").get<int>(), j.value("ratio", 1.0),
                               j.value("offset", 0.0), value);
  }
  throw InputError(where + ": mode must be free, fixed or tied");
}

/// Template from JSON {floor, components: [{center, fwhm, area}], ...} or
/// from a model record whose values become initial guesses.
void load_template(const std::string& path, sn::FitProblem& problem) {
  auto in = open_input(path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    Json j;
    try {
      j = Json::parse(text);
    } catch (const Json::parse_error& e) {
      throw InputError(path + ": " + e.what());
    }
    for (const auto& [key, value] : j.items()) {
      if (key != "floor" && key != "components" && key != "min_fwhm_hz" &&
          key != "max_iterations") {
        throw InputError(path + ": unknown field '" + key + "'");
      }
    }
    if (j.contains("floor")) problem.floor = param_from_json(j.at("floor"), "floor");
    problem.min_fwhm_hz = j.value("min_fwhm_hz", 0.0);
    problem.max_iterations = j.value("max_iterations", 200);
    if (!j.contains("components") || !j.at("components").is_array()) {
      throw InputError(path + ": 'components' array required");
    }
    int index = 0;
    for (const auto& c : j.at("components")) {
      const std::string where = "components[" + std::to_string(index++) + "]";
      sn::ComponentTemplate t;
      t.center = param_from_json(c.value("center", Json("auto")), where + ".center");
      t.fwhm = param_from_json(c.value("fwhm", Json("auto")), where + ".fwhm");
      t.area = param_from_json(c.value("area", Json("auto")), where + ".area");
      problem.components.push_back(t);
    }
    return;
  }
  std::istringstream model_text(text);
  const auto model = sn::read_model(model_text);
  problem.floor = sn::ParamSpec::free(model.floor);
  for (const auto& c : model.components) {
    problem.components.push_back(sn::ComponentTemplate{
        sn::ParamSpec::free(c.center), sn::ParamSpec::free(c.fwhm), sn::ParamSpec::free(c.area)});
  }
}

sn::FrequencyMask parse_mask(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw InputError("mask '" + text + "' is not lo:hi");
  try {
    std::size_t used_lo = 0, used_hi = 0;
    const std::string lo = text.substr(0, colon), hi = text.substr(colon + 1);
    sn::FrequencyMask m{std::stod(lo, &used_lo), std::stod(hi, &used_hi)};
    if (used_lo != lo.size() || used_hi != hi.size() || !(m.hi_hz > m.lo_hz)) throw InputError("");
    return m;
  } catch (const std::exception&) {
    throw InputError("mask '" + text + "' is not lo:hi with lo < hi");
  }
}

struct FitArgs {
  std::string in, model, out;
  std::vector<std::string> masks;
  std::size_t segment = 0;  // 0: analysis.wide_segment
  double from_hz = 0.0, to_hz = 0.0;
  bool dc = false;
};

sn::Spectrum load_spectrum(const RunConfig& run, const std::string& path, std::size_t segment) {
  if (sn::is_series_binary(path)) {
    const auto series = load_series(path);
    return sn::welch_psd(series.samples, series.sample_rate_hz,
                         segment == 0 ? run.wide_segment : segment, run.overlap_fraction);
  }
  auto in = open_input(path);
  return sn::read_spectrum_csv(in);
}

void cmd_fit(const Context& ctx, const FitArgs& a, std::ostream& stdout_) {
  sn::Spectrum spectrum = load_spectrum(ctx.run, a.in, a.segment);
  if (a.to_hz > 0.0 || a.from_hz > 0.0) {
    spectrum = sn::crop(spectrum, a.from_hz, a.to_hz > 0.0 ? a.to_hz : spectrum.freq_hz.back());
  }
  Json doc{{"schema_version", kSchemaVersion}, {"input", a.in}};
  bool converged = false;
  if (a.dc) {
    if (!a.model.empty() || !a.masks.empty()) {
      throw InputError("--dc takes neither --model nor --mask");
    }
    const auto dc = sn::fit_dc_spectrum(spectrum.freq_hz, spectrum.psd, ctx.run.dc);
    doc["fit"] = fit_json(dc.fit);
    doc["gamma_a_over_pi_hz"] = num(dc.gamma_a_over_pi_hz);
    doc["gamma_b_over_pi_hz"] = num(dc.gamma_b_over_pi_hz);
    doc["total_area"] = num(dc.total_area);
    doc["degenerate"] = dc.degenerate;
    converged = dc.fit.converged;
  } else {
    sn::FitProblem problem;
    problem.freq_hz = spectrum.freq_hz;
    problem.psd = spectrum.psd;
    if (a.model.empty()) {
      problem.components.push_back(sn::auto_component());
    } else {
      load_template(a.model, problem);
    }
    for (const auto& m : a.masks) problem.masks.push_back(parse_mask(m));
    const auto fit = sn::fit_lorentzians(problem);
    doc["fit"] = fit_json(fit);
    converged = fit.converged;
  }
  Sink sink(a.out, stdout_);
  write_json(sink.get(), doc);
  sink.finish();
  if (!converged) throw FitFlagged("fit did not converge");
}

// ---------------------------------------------------------------- pipeline

void cmd_pipeline(const Context& ctx, const std::string& out_path, std::ostream& stdout_) {
  const RunConfig& run = ctx.run;
  sn::RoundTripConfig cfg;
  cfg.line = run.line;
  cfg.nu_hz = run.probe_nu_hz;
  cfg.rates = rates(run);
  cfg.pm = run.pm;
  cfg.series = run.series;
  cfg.variance_scale = run.signal_scale();
  cfg.narrow_segment = run.narrow_segment;
  cfg.wide_segment = run.wide_segment;
  cfg.overlap_fraction = run.overlap_fraction;
  cfg.subtract_background = run.subtract_background;
  cfg.options = run.pipeline;
  const auto result = sn::run_round_trip(cfg, operators(run));
  const auto& e = result.estimate;

  Json masks = Json::array();
  for (const auto& m : e.masks) masks.push_back({num(m.lo_hz), num(m.hi_hz)});
  Json diagnostics{{"narrow_fwhm_hz", num(e.narrow_fwhm_hz)},
                   {"broad_fwhm_hz", num(e.broad_fwhm_hz)},
                   {"broad_fwhm_sigma_hz", num(e.broad_fwhm_sigma_hz)},
                   {"phi2_plus", num(e.phi2_plus)},
                   {"phi2_plus_sigma", num(e.phi2_plus_sigma)},
                   {"phi2_minus", num(e.phi2_minus)},
                   {"phi2_minus_sigma", num(e.phi2_minus_sigma)},
                   {"blending_fraction", num(e.blending_fraction)},
                   {"narrow_width_fixed", e.narrow_width_fixed},
                   {"joint_xi_plus", num(e.joint_xi_plus)},
                   {"joint_broad_fwhm_hz", num(e.joint_broad_fwhm_hz)},
                   {"clamped_bins", result.clamped_bins},
                   {"masks_hz", masks},
                   {"narrow_fit", fit_json(e.narrow_fit)},
                   {"base_fit", fit_json(e.base_fit)}};
  if (e.joint) diagnostics["joint_fit"] = fit_json(*e.joint);

  Json doc{{"schema_version", kSchemaVersion},
           {"nu_ghz", num(run.probe_nu_hz * 1e-9)},
           {"seed", run.series.seed},
           {"converged", e.converged()},
           {"xi_plus", num(e.xi_plus)},
           {"xi_plus_sigma", num(e.xi_plus_sigma)},
           {"xi", num(e.xi)},
           {"xi_sigma", num(e.xi_sigma)},
           {"gamma_minus_over_pi_hz", num(e.gamma_minus_over_pi_hz)},
           {"theory",
            {{"xi_plus", num(result.theory.xi_plus)},
             {"phi2_total_rad2", num(result.theory_phi2_total)},
             {"gamma_minus_over_pi_hz", num(cfg.rates.gamma_minus / std::numbers::pi)}}},
           {"diagnostics", diagnostics}};
  Sink sink(out_path, stdout_);
  write_json(sink.get(), doc);
  sink.finish();
  if (!e.converged()) throw FitFlagged("pipeline fits did not converge");
}

// ---------------------------------------------------------------- schema

Json schema_json() {
  Json keys = Json::array();
  for (const auto& k : config_keys()) {
    keys.push_back({{"key", k.key},
                    {"type", type_name(k.type)},
                    {"default", k.default_value},
                    {"description", k.description}});
  }
  const Json fit_fields = {"status", "converged", "message", "iterations", "free_parameters",
                           "used_bins", "residual_norm", "reduced_residual", "condition_number",
                           "floor", "floor_sigma", "components"};
  return {
      {"schema_version", kSchemaVersion},
      {"config", {{"format", "key = value lines, '#' comments"}, {"keys", keys}}},
      {"presets", preset_names()},
      {"outputs",
       {{"sweep_csv",
         {"nu_ghz", "chi_a", "chi_b", "xi_plus", "xi_minus", "xi_total", "phi2_total"}},
        {"spectrum_csv", {"freq_hz", "psd"}},
        {"welch_csv", {"freq_hz", "psd"}},
        {"series_csv", {"time_s", "signal"}},
        {"series_bin",
         "64-byte little-endian header: magic SPNOISE\\0, u32 version 1, u32 header size, "
         "f64 sample rate, u64 count, u64 seed; then f64 samples"},
        {"model_text", "lines: floor <psd>; delta_like <0|1>; component <center> <fwhm> <area>"},
        {"polar_json", {"schema_version", "window_ghz", "roots"}},
        {"rates_json",
         {"schema_version", "gamma_se_per_s", "eigen_per_s", "eigen_over_pi_hz",
          "analytic_per_s", "gamma_minus_over_gamma_a"}},
        {"fit_json", {{"top", {"schema_version", "input", "fit"}}, {"fit", fit_fields}}},
        {"pipeline_json",
         {"schema_version", "nu_ghz", "seed", "converged", "xi_plus", "xi_plus_sigma", "xi",
          "xi_sigma", "gamma_minus_over_pi_hz", "theory", "diagnostics"}},
        {"error_json", {{"error", {"kind", "message"}}}}}},
      {"units",
       {{"psd", "rad^2/Hz"}, {"area", "rad^2"}, {"chi", "m^2"}, {"phi2_total", "rad^2"}}},
      {"exit_codes", {{"0", "success"}, {"1", "input error"}, {"2", "fit flagged"}}}};
}

void report(std::ostream& err, const std::string& kind, const std::string& message) {
  err << Json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Optical spin-noise modeling, synthesis and analysis", "osn"};
  app.require_subcommand(0, 1);
  app.fallthrough();

  std::string config_path, preset;
  std::vector<std::string> overrides;
  bool print_schema = false, print_config = false;
  app.add_option("--config", config_path, "Configuration file");
  app.add_option("--preset", preset, "Built-in configuration applied before --config");
  app.add_option("--set", overrides, "key=value override, applied last")->take_all();
  app.add_flag("--schema", print_schema, "Print the machine-readable schema and exit");
  app.add_flag("--print-config", print_config, "Print the merged configuration and exit");

  SweepArgs sweep;
  auto* sweep_cmd = app.add_subcommand("sweep", "xi_+ and xi versus detuning from the line center");
  sweep_cmd->add_option("--from-ghz", sweep.from_ghz, "First detuning")->capture_default_str();
  sweep_cmd->add_option("--to-ghz", sweep.to_ghz, "Last detuning")->capture_default_str();
  sweep_cmd->add_option("--step-ghz", sweep.step_ghz, "Detuning step")->capture_default_str();
  sweep_cmd->add_option("--out", sweep.out, "CSV destination (default stdout)");

  double polar_lo = -2.0, polar_hi = 10.0;
  auto* polar_cmd = app.add_subcommand("polar", "Detunings where one eigen-noise vanishes");
  polar_cmd->add_option("--from-ghz", polar_lo, "Window start")->capture_default_str();
  polar_cmd->add_option("--to-ghz", polar_hi, "Window end")->capture_default_str();

  auto* rates_cmd = app.add_subcommand("rates", "Spin-exchange relaxation rates");

  SpectrumArgs spectrum;
  auto* spectrum_cmd = app.add_subcommand("spectrum", "Analytic spectrum at the probe detuning");
  spectrum_cmd->add_option("--mode", spectrum.mode, "dc, zf or pm")->capture_default_str();
  spectrum_cmd->add_option("--from-hz", spectrum.from_hz, "Grid start")->capture_default_str();
  spectrum_cmd->add_option("--to-hz", spectrum.to_hz, "Grid end (default depends on mode)");
  spectrum_cmd->add_option("--step-hz", spectrum.step_hz, "Grid step")->capture_default_str();
  spectrum_cmd->add_option("--out", spectrum.out, "CSV destination (default stdout)");
  spectrum_cmd->add_option("--model-out", spectrum.model_out, "Also write the model record");

  SimulateArgs simulate;
  auto* simulate_cmd = app.add_subcommand("simulate", "Synthetic Faraday-rotation series");
  simulate_cmd->add_option("--mode", simulate.mode, "zf or pm")->capture_default_str();
  simulate_cmd->add_option("--format", simulate.format, "bin or csv (default from extension)");
  simulate_cmd->add_option("--out", simulate.out, "Destination file")->required();

  std::string welch_in, welch_out;
  std::size_t welch_segment = 0;
  double welch_overlap = -1.0;
  auto* welch_cmd = app.add_subcommand("welch", "Welch spectrum of a binary series");
  welch_cmd->add_option("--in", welch_in, "Binary series")->required();
  welch_cmd->add_option("--segment", welch_segment, "Segment length (default analysis.wide_segment)");
  welch_cmd->add_option("--overlap", welch_overlap, "Overlap fraction (default from config)");
  welch_cmd->add_option("--out", welch_out, "CSV destination (default stdout)");

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Least-squares Lorentzian fit of a spectrum");
  fit_cmd->add_option("--in", fit.in, "Spectrum CSV or binary series")->required();
  fit_cmd->add_option("--model", fit.model, "JSON template or model record");
  fit_cmd->add_option("--mask", fit.masks, "Excluded band lo:hi in Hz (repeatable)");
  fit_cmd->add_option("--segment", fit.segment, "Welch segment when the input is a series");
  fit_cmd->add_option("--from-hz", fit.from_hz, "Crop start");
  fit_cmd->add_option("--to-hz", fit.to_hz, "Crop end");
  fit_cmd->add_flag("--dc", fit.dc, "Two-line dc-field fit using the dc.* settings");
  fit_cmd->add_option("--out", fit.out, "JSON destination (default stdout)");

  std::string pipeline_out;
  auto* pipeline_cmd = app.add_subcommand("pipeline", "Simulate, estimate spectra and extract xi");
  pipeline_cmd->add_option("--out", pipeline_out, "JSON destination (default stdout)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    report(err, "usage", e.what());
    return kExitInputError;
  }

  try {
    if (print_schema) {
      write_json(out, schema_json());
      return kExitOk;
    }
    Context ctx;
    if (!preset.empty()) {
      std::istringstream in(preset_text(preset));
      ctx.flat.merge(in, "preset " + preset);
    }
    if (!config_path.empty()) {
      auto in = open_input(config_path);
      ctx.flat.merge(in, config_path);
    }
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
      ctx.flat.set(o.substr(0, eq), o.substr(eq + 1));
    }
    if (print_config) {
      ctx.flat.write(out);
      return kExitOk;
    }
    if (app.get_subcommands().empty()) {
      report(err, "usage", "a subcommand is required; see --help");
      return kExitInputError;
    }
    ctx.run = resolve(ctx.flat);

    if (sweep_cmd->parsed()) cmd_sweep(ctx, sweep, out);
    if (polar_cmd->parsed()) cmd_polar(ctx, polar_lo, polar_hi, out);
    if (rates_cmd->parsed()) cmd_rates(ctx, out);
    if (spectrum_cmd->parsed()) cmd_spectrum(ctx, spectrum, out);
    if (simulate_cmd->parsed()) cmd_simulate(ctx, simulate);
    if (welch_cmd->parsed()) {
      cmd_welch(welch_in, welch_segment == 0 ? ctx.run.wide_segment : welch_segment,
                welch_overlap < 0.0 ? ctx.run.overlap_fraction : welch_overlap, welch_out, out);
    }
    if (fit_cmd->parsed()) cmd_fit(ctx, fit, out);
    if (pipeline_cmd->parsed()) cmd_pipeline(ctx, pipeline_out, out);
    return kExitOk;
  } catch (const FitFlagged& e) {
    report(err, "fit", e.what());
    return kExitFitFlagged;
  } catch (const ConfigError& e) {
    report(err, "config", e.what());
  } catch (const InputError& e) {
    report(err, "input", e.what());
  } catch (const std::exception& e) {
    report(err, "input", e.what());
  }
  return kExitInputError;
}

}  // namespace osn
