#include "spinnoise/faddeeva.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace spinnoise {

namespace {

constexpr int kTerms = 40;

struct WeidemanTable {
  double scale = 0.0;
  std::array<double, kTerms> coeff{};  // highest power first

  WeidemanTable() {
    constexpr int m = 2 * kTerms;
    constexpr int samples = 2 * m;
    scale = std::sqrt(kTerms / std::numbers::sqrt2);
    // f_k on k = -m+1 .. m-1, with f prepended by a zero; length 2m.
    std::array<double, samples> f{};
    for (int k = -m + 1; k <= m - 1; ++k) {
      const double theta = k * std::numbers::pi / m;
      const double t = scale * std::tan(theta / 2);
      f[k + m] = std::exp(-t * t) * (scale * scale + t * t);
    }
    // fftshift then the real part of the DFT, divided by the length.
    std::array<double, samples> shifted{};
    for (int i = 0; i < samples; ++i) shifted[i] = f[(i + m) % samples];
    std::array<double, kTerms> a{};
    for (int n = 1; n <= kTerms; ++n) {
      double acc = 0.0;
      for (int i = 0; i < samples; ++i) {
        acc += shifted[i] * std::cos(2 * std::numbers::pi * n * i / samples);
      }
      a[n - 1] = acc / samples;
    }
    for (int n = 0; n < kTerms; ++n) coeff[n] = a[kTerms - 1 - n];
  }
};

const WeidemanTable& table() {
  static const WeidemanTable t;
  return t;
}

std::complex<double> upper_half(std::complex<double> z) {
  const WeidemanTable& t = table();
  const std::complex<double> i(0.0, 1.0);
  const std::complex<double> denom = t.scale - i * z;
  const std::complex<double> zz = (t.scale + i * z) / denom;
  std::complex<double> p = 0.0;
  for (double c : t.coeff) p = p * zz + c;
  return 2.0 * p / (denom * denom) + (1.0 / std::sqrt(std::numbers::pi)) / denom;
}

}  // namespace

std::complex<double> faddeeva(std::complex<double> z) {
  if (z.imag() >= 0.0) return upper_half(z);
  return 2.0 * std::exp(-z * z) - upper_half(-z);
}

}  // namespace spinnoise
