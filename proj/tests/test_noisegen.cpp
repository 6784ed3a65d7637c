#include <spinnoise/fitting.hpp>
#include <spinnoise/noisegen.hpp>
#include <spinnoise/random.hpp>
#include <spinnoise/timeseries_io.hpp>

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

using namespace spinnoise;
using std::numbers::pi;

namespace {

double integrate(const Spectrum& s) {
  const double df = s.freq_hz[1] - s.freq_hz[0];
  double sum = 0.0;
  for (double p : s.psd) sum += p * df;
  return sum;
}

double variance(const std::vector<double>& x) {
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(x.size());
}

}  // namespace

TEST_CASE("Welch integral equals the variance of white noise") {
  RandomStream rng(5, 0);
  std::vector<double> x(1 << 20);
  for (double& v : x) v = 3.0 * rng.normal();
  const auto s = welch_psd(x, 1000.0, 1024);
  CHECK(s.freq_hz.size() == 513);
  CHECK(s.freq_hz.back() == doctest::Approx(500.0));
  CHECK(s.segments == 2047);
  CHECK(integrate(s) == doctest::Approx(variance(x)).epsilon(0.01));
}

TEST_CASE("Welch places a sinusoid's power at its frequency") {
  const double fs = 1024.0, f0 = 64.0, amplitude = 2.0;
  std::vector<double> x(1 << 16);
  for (std::size_t k = 0; k < x.size(); ++k) x[k] = amplitude * std::sin(2 * pi * f0 * k / fs);
  const auto s = welch_psd(x, fs, 1024);
  CHECK(integrate(s) == doctest::Approx(amplitude * amplitude / 2.0).epsilon(1e-9));
  const auto peak = std::max_element(s.psd.begin(), s.psd.end()) - s.psd.begin();
  CHECK(s.freq_hz[static_cast<std::size_t>(peak)] == doctest::Approx(f0));
}

TEST_CASE("OU process has the stationary variance and exponential correlation") {
  TimeSeriesConfig cfg;
  cfg.sample_rate_hz = 1000.0;
  cfg.duration_s = 500.0;
  const double rate = 2 * pi * 20.0;
  const auto x = simulate_ou({2.0, rate}, cfg, 4);
  CHECK(x.size() == 500000);
  CHECK(variance(x) == doctest::Approx(2.0).epsilon(0.03));
  double lag1 = 0.0;
  for (std::size_t k = 1; k < x.size(); ++k) lag1 += x[k] * x[k - 1];
  lag1 /= static_cast<double>(x.size() - 1) * variance(x);
  CHECK(lag1 == doctest::Approx(std::exp(-rate * cfg.dt())).epsilon(0.01));
  CHECK_THROWS_AS(simulate_ou({1.0, 60.0 * cfg.sample_rate_hz}, cfg), std::invalid_argument);
}

TEST_CASE("OU spectrum is a Lorentzian of fwhm rate / pi") {
  TimeSeriesConfig cfg;
  cfg.sample_rate_hz = 4000.0;
  cfg.duration_s = 400.0;
  cfg.seed = 11;
  const double rate = 2 * pi * 50.0;
  const auto x = simulate_ou({1.0, rate}, cfg, 1);
  const auto s = crop(welch_psd(x, cfg.sample_rate_hz, 4096), 0.0, 1000.0);
  FitProblem problem;
  problem.freq_hz = s.freq_hz;
  problem.psd = s.psd;
  problem.components = {{ParamSpec::fixed(0.0), ParamSpec::free(80.0), ParamSpec::free(1.0)}};
  // Per-segment mean removal depletes the Hann main lobe at DC.
  const double df = s.freq_hz[1];
  problem.masks = {{0.0, 2.5 * df}};
  const auto fit = fit_lorentzians(problem);
  REQUIRE(fit.converged);
  CHECK(fit.components[0].fwhm == doctest::Approx(rate / pi).epsilon(0.05));
  CHECK(fit.components[0].area == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("pulse modulation moves the narrow noise to nu_p / 2") {
  const auto ops = build_operators(AtomSpec::rb87());
  DetuningFactors chi{0.0, 1.0, 1.0};  // only the conserved part couples
  RateSet rates{};
  PmFieldSpec pm;
  const auto spec = make_faraday_noise_spec(chi, ops, rates, 25.0, FieldMode::PulseModulated, pm);
  CHECK(spec.minus_coefficient == 0.0);
  CHECK(spec.plus_rate == doctest::Approx(25.0 * pi));
  TimeSeriesConfig cfg;
  cfg.duration_s = 20.0;
  const auto x = simulate_faraday_noise(spec, cfg);
  const auto s = welch_psd(x, cfg.sample_rate_hz, 8192);
  const auto peak = std::max_element(s.psd.begin() + 1, s.psd.end()) - s.psd.begin();
  CHECK(std::abs(s.freq_hz[static_cast<std::size_t>(peak)] - 1000.0) < 5.0);
  CHECK(variance(x) == doctest::Approx(36.0 / 24.0).epsilon(0.1));
}

TEST_CASE("synthesis is a pure function of the seed") {
  const auto ops = build_operators(AtomSpec::rb87());
  DetuningFactors chi{0.0, -5.0, 3.0};
  const auto spec = make_faraday_noise_spec(chi, ops, {1000.0, 5000.0, 0.0, 6000.0}, 25.0,
                                            FieldMode::PulseModulated);
  TimeSeriesConfig cfg;
  cfg.duration_s = 1.0;
  cfg.shot_noise_psd = 1e-3;
  const auto a = simulate_faraday_noise(spec, cfg);
  const auto b = simulate_faraday_noise(spec, cfg);
  CHECK(a == b);
  cfg.seed = 2;
  CHECK(simulate_faraday_noise(spec, cfg) != a);
}

TEST_CASE("background subtraction clamps negative bins") {
  Spectrum a{{0.0, 1.0, 2.0}, {3.0, 1.0, 2.0}, 1};
  Spectrum b{{0.0, 1.0, 2.0}, {1.0, 2.0, 2.0}, 1};
  const auto r = background_subtract(a, b);
  CHECK(r.spectrum.psd == std::vector<double>{2.0, 0.0, 0.0});
  CHECK(r.clamped_bins == 1);
  Spectrum c{{0.0, 1.5, 2.0}, {1.0, 1.0, 1.0}, 1};
  CHECK_THROWS_AS(background_subtract(a, c), std::invalid_argument);
  const auto cropped = crop(a, 0.5, 2.0);
  CHECK(cropped.freq_hz == std::vector<double>{1.0, 2.0});
}

TEST_CASE("Welch rejects bad segment lengths") {
  std::vector<double> x(100, 0.0);
  CHECK_THROWS_AS(welch_psd(x, 1.0, 200), std::invalid_argument);
  CHECK_THROWS_AS(welch_psd(x, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(welch_psd(x, 1.0, 10, 1.0), std::invalid_argument);
}

TEST_CASE("binary series format round-trips and is recognized") {
  TimeSeries series{20000.0, 42, {1.0, -2.5, 3.25e-9}};
  std::stringstream buffer;
  write_series_binary(buffer, series);
  CHECK(buffer.str().size() == kSeriesHeaderBytes + 3 * sizeof(double));
  CHECK(buffer.str().substr(0, 7) == "SPNOISE");
  const auto back = read_series_binary(buffer);
  CHECK(back.sample_rate_hz == series.sample_rate_hz);
  CHECK(back.seed == 42);
  CHECK(back.samples == series.samples);

  const auto path = std::filesystem::temp_directory_path() / "spinnoise_test_series.bin";
  {
    std::ofstream out(path, std::ios::binary);
    write_series_binary(out, series);
  }
  CHECK(is_series_binary(path));
  std::filesystem::remove(path);

  std::stringstream truncated(buffer.str().substr(0, 40));
  CHECK_THROWS(read_series_binary(truncated));
}

TEST_CASE("spectrum CSV round-trips") {
  Spectrum s{{0.0, 0.5, 1.0}, {1e-12, 2.5e-13, 0.0}, 0};
  std::stringstream text;
  write_spectrum_csv(text, s);
  CHECK(text.str().rfind("freq_hz,psd\n", 0) == 0);
  const auto back = read_spectrum_csv(text);
  CHECK(back.freq_hz == s.freq_hz);
  CHECK(back.psd == s.psd);
  std::stringstream headerless("0,1\n1,2\n");
  CHECK_THROWS(read_spectrum_csv(headerless));
}
