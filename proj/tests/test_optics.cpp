#include <spinnoise/faddeeva.hpp>
#include <spinnoise/optics.hpp>

#include <doctest.h>

#include <cmath>
#include <stdexcept>

using namespace spinnoise;

// Reference values come from tests/oracle/generate.py (scipy wofz, direct
// quadrature and the conserved-F_z projection).

namespace {

constexpr double kCellTemperature = 381.35;

struct WofzCase {
  double x, y, re, im;
};

constexpr WofzCase kWofz[] = {
    {0.5, 0.5, 0.5331567079121748, 0.2304882313844585},
    {2.0, 0.001, 0.018547236370405538, 0.3399528312073787},
    {10.0, 5.0, 0.022767948359820295, 0.04516957942734106},
    {0.001, 0.001, 0.9988716223354106, 0.001126380671599899},
    {3.0, 0.1, 0.007942680998770001, 0.20074234309867764},
    {-1.5, 2.0, 0.18333476238115004, -0.11929823300627299},
    {100.0, 1.0, 5.642177916144133e-05, 0.005641613670145867},
};

// Detuning, Doppler-convolved dispersion by quadrature (Hz^-1).
constexpr double kDispersion[][2] = {
    {1e6, 5.43208646073658e-12},           {1e8, 5.13126081534957e-10},
    {3e8, 1.0006285960800077e-09},         {1e9, 3.4161145381808695e-10},
    {5e9, 6.380998748472676e-11},          {2e10, 1.5917791870874816e-11},
};

constexpr double kXiPlus[][2] = {
    {-17173387500.0, 0.5813129737398165}, {60e9, 0.39472948798801},
    {-60e9, 0.4892320036702443},          {1e13, 0.4441609738498098},
    {-1e13, 0.4447277368224758},          {0.0, 0.9723165801901121},
    {2e9, 0.9527747359834214},
};

constexpr double kRootPlusHz = 1016530848.957596;
constexpr double kRootMinusHz = 6641829502.82606;

const OpticalLine& cell_line() {
  static const OpticalLine line = OpticalLine::rb87_d1(kCellTemperature);
  return line;
}

const SpinOperatorSet& rb87() {
  static const SpinOperatorSet ops = build_operators(AtomSpec::rb87());
  return ops;
}

}  // namespace

TEST_CASE("Faddeeva function matches reference values") {
  for (const auto& c : kWofz) {
    CAPTURE(c.x);
    CAPTURE(c.y);
    const auto w = faddeeva({c.x, c.y});
    CHECK(std::abs(w.real() - c.re) <= 1e-12 * std::abs(c.re) + 1e-14);
    CHECK(std::abs(w.imag() - c.im) <= 1e-12 * std::abs(c.im) + 1e-14);
  }
}

TEST_CASE("Faddeeva function satisfies w(-conj z) = conj w(z)") {
  for (const auto& c : kWofz) {
    const auto w = faddeeva({c.x, c.y});
    const auto mirrored = faddeeva({-c.x, c.y});
    CHECK(std::abs(mirrored - std::conj(w)) < 1e-13);
  }
}

TEST_CASE("Doppler width at the cell temperature") {
  CHECK(cell_line().doppler_fwhm_hz == doctest::Approx(565780909.221764).epsilon(1e-12));
}

TEST_CASE("Voigt dispersion agrees with direct quadrature") {
  const auto& line = cell_line();
  for (const auto& [delta, expected] : kDispersion) {
    CAPTURE(delta);
    const double got = dispersive_line(delta, line.lorentzian_fwhm_hz, line.doppler_fwhm_hz);
    CHECK(got == doctest::Approx(expected).epsilon(1e-9));
    CHECK(dispersive_line(-delta, line.lorentzian_fwhm_hz, line.doppler_fwhm_hz) ==
          doctest::Approx(-expected).epsilon(1e-12));
  }
  CHECK(dispersive_line(0.0, line.lorentzian_fwhm_hz, line.doppler_fwhm_hz) == 0.0);
}

TEST_CASE("dispersion tends to 1/(pi delta) far from resonance") {
  const double delta = 1e13;
  CHECK(dispersive_line(delta, 5.75e6, 5.6e8) * M_PI * delta == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(dispersive_line(delta, 5.75e6, 0.0) * M_PI * delta == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("dispersion rejects invalid widths") {
  CHECK_THROWS_AS(dispersive_line(1.0, -1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(dispersive_line(1.0, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("transition offsets sit at the hyperfine centers of gravity") {
  const auto t = transition_offsets(6.8347e9, 0.8166e9);
  CHECK(t.aa == doctest::Approx(-2.2568e9).epsilon(1e-4));
  CHECK(t.ab == doctest::Approx(-3.0734e9).epsilon(1e-4));
  CHECK(t.ba == doctest::Approx(4.5779e9).epsilon(1e-4));
  CHECK(t.bb == doctest::Approx(3.7613e9).epsilon(1e-4));
  CHECK(t.ba - t.aa == doctest::Approx(6.8347e9).epsilon(1e-12));
  CHECK(t.aa - t.ab == doctest::Approx(0.8166e9).epsilon(1e-12));
}

TEST_CASE("narrow-noise fraction agrees with the conserved-F_z projection") {
  for (const auto& [nu, expected] : kXiPlus) {
    CAPTURE(nu);
    const auto b = noise_budget(nu, cell_line(), rb87());
    CHECK(b.xi_plus == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("noise fractions sum to one and the power budget is conserved") {
  for (int k = -500; k <= 500; ++k) {
    const double nu = 1.2e8 * k;
    const auto chi = chi_factors(nu, cell_line());
    const auto b = noise_budget(chi, rb87());
    CAPTURE(nu);
    CHECK(std::abs(b.xi_plus + b.xi_minus - 1.0) < 1e-9);
    const double total = 1.25 * chi.chi_a * chi.chi_a + 0.25 * chi.chi_b * chi.chi_b;
    CHECK(std::abs(b.phi2_plus + b.phi2_minus - total) <= 1e-12 * total);
    CHECK(b.xi == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("far-detuning fractions approach 4/9 and 5/9") {
  for (double nu : {1e13, -1e13}) {
    const auto b = noise_budget(nu, cell_line(), rb87());
    CHECK(std::abs(b.xi_plus - 4.0 / 9.0) < 1e-3);
    CHECK(std::abs(b.xi_minus - 5.0 / 9.0) < 1e-3);
  }
}

TEST_CASE("polar frequencies outside the resonances") {
  const auto roots = polar_frequencies(cell_line(), -2e9, 10e9);
  const PolarRoot* plus = nullptr;
  const PolarRoot* minus = nullptr;
  for (const auto& r : roots) {
    if (r.near_resonance) continue;
    if (r.kind == PolarKind::Plus && plus == nullptr) plus = &r;
    if (r.kind == PolarKind::Minus && minus == nullptr) minus = &r;
  }
  REQUIRE(plus != nullptr);
  REQUIRE(minus != nullptr);
  CHECK(plus->nu_hz == doctest::Approx(kRootPlusHz).epsilon(1e-9));
  CHECK(minus->nu_hz == doctest::Approx(kRootMinusHz).epsilon(1e-9));
  CHECK(noise_budget(plus->nu_hz, cell_line(), rb87()).xi_plus == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(noise_budget(minus->nu_hz, cell_line(), rb87()).xi_minus ==
        doctest::Approx(1.0).epsilon(1e-6));
  for (std::size_t k = 1; k < roots.size(); ++k) CHECK(roots[k - 1].nu_hz < roots[k].nu_hz);
  CHECK_THROWS_AS(polar_frequencies(cell_line(), 1e9, 1e9), std::invalid_argument);
}

TEST_CASE("rotation variance scales with the column density") {
  CellGeometry cell;
  const double p1 = osn_power(-17e9, cell_line(), cell, rb87());
  cell.number_density_m3 *= 2.0;
  CHECK(osn_power(-17e9, cell_line(), cell, rb87()) == doctest::Approx(2.0 * p1).epsilon(1e-14));
  cell.length_m = -1.0;
  CHECK_THROWS_AS(cell.validate(), std::invalid_argument);
}

TEST_CASE("vapor density and relative speed are physical") {
  const double n = rb_vapor_density(kCellTemperature);
  CHECK(n > 1e18);
  CHECK(n < 1e20);
  CHECK(rb_vapor_density(400.0) > n);
  const double v = mean_relative_speed(constants::kRb87Mass, kCellTemperature);
  CHECK(v == doctest::Approx(std::sqrt(16.0 * constants::kBoltzmann * kCellTemperature /
                                       (M_PI * constants::kRb87Mass)))
                 .epsilon(1e-14));
}
