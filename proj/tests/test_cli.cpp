#include "commands.hpp"
#include "config.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using Json = nlohmann::json;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome invoke(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = osn::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::vector<double>> csv_rows(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::istringstream cells(line);
    std::string cell;
    while (std::getline(cells, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

std::filesystem::path temp(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("osn_test_" + name);
}

}  // namespace

TEST_CASE("sweep rows satisfy the fraction identity") {
  const auto r = invoke({"--preset", "reference", "sweep", "--from-ghz", "-60", "--to-ghz", "60",
                         "--step-ghz", "0.5"});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("nu_ghz,chi_a,chi_b,xi_plus,xi_minus,xi_total,phi2_total\n", 0) == 0);
  const auto rows = csv_rows(r.out);
  REQUIRE(rows.size() == 241);
  for (const auto& row : rows) CHECK(std::abs(row[3] + row[4] - 1.0) < 1e-8);
  const double target = -3.0734e9 * 1e-9 - 14.1;
  const auto nearest = std::min_element(rows.begin(), rows.end(), [&](auto& a, auto& b) {
    return std::abs(a[0] - target) < std::abs(b[0] - target);
  });
  CHECK((*nearest)[3] == doctest::Approx(0.58).epsilon(0.03));
  // Oracle values of the far rows (tests/oracle/generate.py).
  CHECK(rows.front()[3] == doctest::Approx(0.4892320036702443).epsilon(1e-3));
  CHECK(rows.back()[3] == doctest::Approx(0.39472948798801).epsilon(1e-3));
}

TEST_CASE("sweep rejects a nonpositive step") {
  const auto r = invoke({"sweep", "--step-ghz", "0"});
  CHECK(r.code == 1);
  CHECK(Json::parse(r.err)["error"]["kind"] == "input");
}

TEST_CASE("polar roots are reported with their kinds") {
  const auto r = invoke({"--preset", "reference", "polar"});
  REQUIRE(r.code == 0);
  const auto j = Json::parse(r.out);
  bool plus = false, minus = false;
  for (const auto& root : j["roots"]) {
    if (root["near_resonance"]) continue;
    if (root["kind"] == "plus") plus = std::abs(root["nu_ghz"].get<double>() - 1.0165) < 1e-3;
    if (root["kind"] == "minus") minus = std::abs(root["nu_ghz"].get<double>() - 6.6418) < 1e-3;
  }
  CHECK(plus);
  CHECK(minus);
}

TEST_CASE("rate table at the reference spin-exchange rate") {
  const auto j = Json::parse(invoke({"--preset", "reference", "rates"}).out);
  CHECK(j["eigen_over_pi_hz"]["gamma_a"].get<double>() == doctest::Approx(315.0).epsilon(0.01));
  CHECK(j["gamma_minus_over_gamma_a"].get<double>() == doctest::Approx(6.0).epsilon(1e-3));
  const auto zero = Json::parse(invoke({"--set", "se.rate_per_s=0", "rates"}).out);
  for (const auto& [k, v] : zero["eigen_per_s"].items()) CHECK(v.get<double>() == 0.0);
}

TEST_CASE("pm spectrum peaks at 1 kHz with a 25 Hz width") {
  const auto r = invoke({"--preset", "reference", "spectrum", "--mode", "pm", "--from-hz", "900",
                         "--to-hz", "1100", "--step-hz", "0.1"});
  REQUIRE(r.code == 0);
  const auto rows = csv_rows(r.out);
  const auto peak = std::max_element(rows.begin(), rows.end(),
                                     [](auto& a, auto& b) { return a[1] < b[1]; });
  CHECK((*peak)[0] == doctest::Approx(1000.0));
  const double half = 0.5 * ((*peak)[1] + rows.front()[1]);
  double lo = 0.0, hi = 0.0;
  for (const auto& row : rows) {
    if (row[1] >= half) {
      if (lo == 0.0) lo = row[0];
      hi = row[0];
    }
  }
  CHECK(hi - lo == doctest::Approx(25.0).epsilon(0.1));
}

TEST_CASE("dc spectrum has two peaks 159 Hz apart") {
  const auto path = temp("dc_model.txt");
  const auto r = invoke({"--preset", "reference", "spectrum", "--mode", "dc", "--model-out",
                         path.string(), "--from-hz", "9000", "--to-hz", "11000"});
  REQUIRE(r.code == 0);
  std::ifstream in(path);
  const auto model = spinnoise::read_model(in);
  REQUIRE(model.components.size() == 2);
  CHECK(model.components[1].center - model.components[0].center == doctest::Approx(159.0));
  std::filesystem::remove(path);
}

TEST_CASE("zero-field spectrum integrates to the swept total power") {
  const auto path = temp("zf_model.txt");
  const auto r = invoke({"--preset", "reference", "spectrum", "--mode", "zf", "--model-out",
                         path.string(), "--to-hz", "100"});
  REQUIRE(r.code == 0);
  std::ifstream in(path);
  const double area = spinnoise::total_power(spinnoise::read_model(in));
  std::filesystem::remove(path);
  const auto sweep = csv_rows(invoke({"--preset", "reference", "sweep", "--from-ghz", "-17.1733810",
                                      "--to-ghz", "-17.1733810", "--step-ghz", "1"})
                                  .out);
  REQUIRE(sweep.size() == 1);
  CHECK(area == doctest::Approx(sweep[0][6]).epsilon(0.01));
}

TEST_CASE("pipeline at the reference preset") {
  const auto r = invoke({"--preset", "reference", "pipeline"});
  REQUIRE(r.code == 0);
  const auto j = Json::parse(r.out);
  CHECK(j["xi_plus"].get<double>() > 0.55);
  CHECK(j["xi_plus"].get<double>() < 0.61);
  CHECK(j["converged"] == true);
  CHECK(j.contains("diagnostics"));
  CHECK(r.out == invoke({"--preset", "reference", "pipeline"}).out);
}

TEST_CASE("pipeline at the vanishing-narrow-noise root gives the broad width") {
  const auto r = invoke({"--preset", "nu_minus", "pipeline"});
  REQUIRE(r.code == 0);
  const auto j = Json::parse(r.out);
  CHECK(j["gamma_minus_over_pi_hz"].get<double>() == doctest::Approx(1900.0).epsilon(0.1));
}

TEST_CASE("simulate, welch and fit chain through files") {
  const auto series = temp("series.bin");
  const auto spectrum = temp("spectrum.csv");
  const auto fit_out = temp("fit.json");
  REQUIRE(invoke({"--preset", "reference", "--set", "simulation.duration_s=20", "simulate", "--out",
                  series.string()})
              .code == 0);
  REQUIRE(invoke({"welch", "--in", series.string(), "--segment", "16384", "--out",
                  spectrum.string()})
              .code == 0);
  const auto tmpl = temp("template.json");
  {
    std::ofstream t(tmpl);
    t << R"({"floor": {"mode": "fixed", "value": 0},
             "components": [{"center": {"mode": "fixed", "value": 1000}, "fwhm": 30, "area": "auto"}]})";
  }
  const auto r = invoke({"fit", "--in", spectrum.string(), "--model", tmpl.string(), "--from-hz",
                         "900", "--to-hz", "1100", "--out", fit_out.string()});
  CHECK(r.code == 0);
  std::ifstream in(fit_out);
  const auto j = Json::parse(in);
  CHECK(j["fit"]["components"][0]["fwhm_hz"].get<double>() == doctest::Approx(25.0).epsilon(0.3));
  for (const auto& p : {series, spectrum, fit_out, tmpl}) std::filesystem::remove(p);
}

TEST_CASE("configuration errors exit with code 1 and JSON on stderr") {
  auto r = invoke({"--set", "pm.bogus_hz=3", "rates"});
  CHECK(r.code == 1);
  CHECK(Json::parse(r.err)["error"]["kind"] == "config");
  r = invoke({"--set", "pm.pulse_rate_hz=fast", "rates"});
  CHECK(r.code == 1);
  r = invoke({"--preset", "nope", "rates"});
  CHECK(r.code == 1);
  r = invoke({"fit", "--in", "/nonexistent/file.csv"});
  CHECK(r.code == 1);
  r = invoke({"--set", "pm.harmonic_count=4", "rates"});
  CHECK(r.code == 1);
}

TEST_CASE("a fit that cannot converge exits with code 2") {
  const auto spectrum = temp("flat.csv");
  {
    std::ofstream out(spectrum);
    out << "freq_hz,psd\n";
    for (int k = 0; k < 50; ++k) out << k << ',' << (k % 2 ? 1.0 : 3.0) << '\n';
  }
  const auto tmpl = temp("one_iteration.json");
  {
    std::ofstream t(tmpl);
    t << R"({"max_iterations": 1, "components": [{"center": 20, "fwhm": 3, "area": 1}]})";
  }
  const auto r = invoke({"fit", "--in", spectrum.string(), "--model", tmpl.string()});
  CHECK(r.code == 2);
  CHECK(Json::parse(r.err)["error"]["kind"] == "fit");
  CHECK(Json::parse(r.out)["fit"]["converged"] == false);
  std::filesystem::remove(spectrum);
  std::filesystem::remove(tmpl);
}

TEST_CASE("schema lists every configuration key") {
  const auto r = invoke({"--schema"});
  REQUIRE(r.code == 0);
  const auto j = Json::parse(r.out);
  CHECK(j["config"]["keys"].size() == osn::config_keys().size());
  CHECK(j["schema_version"] == osn::kSchemaVersion);
}

TEST_CASE("unit-suffixed keys and presets parse") {
  for (const auto& name : osn::preset_names()) {
    osn::FlatConfig cfg;
    std::istringstream in(osn::preset_text(name));
    CAPTURE(name);
    CHECK_NOTHROW(cfg.merge(in, name));
    CHECK_NOTHROW(osn::resolve(cfg));
  }
  for (const auto& k : osn::config_keys()) {
    const bool has_unit = k.key.find('_') != std::string::npos || k.type != osn::ValueType::Real;
    CAPTURE(k.key);
    CHECK(has_unit);
  }
}
