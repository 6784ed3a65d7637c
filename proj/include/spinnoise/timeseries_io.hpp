// File formats for sampled series and spectra.
//
// Binary series layout, all fields little-endian:
//   offset  0  char[8]  magic "SPNOISE\0"
//   offset  8  uint32   format version (1)
//   offset 12  uint32   header size in bytes (64)
//   offset 16  float64  sample rate, Hz
//   offset 24  uint64   sample count
//   offset 32  uint64   generator seed
//   offset 40  zero padding up to 64
//   offset 64  float64[count] samples
#pragma once

#include "spinnoise/noisegen.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace spinnoise {

inline constexpr std::uint32_t kSeriesFormatVersion = 1;
inline constexpr std::size_t kSeriesHeaderBytes = 64;

struct TimeSeries {
  double sample_rate_hz = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> samples;
};

void write_series_binary(std::ostream& out, const TimeSeries& series);
TimeSeries read_series_binary(std::istream& in);

/// Header "time_s,signal".
void write_series_csv(std::ostream& out, const TimeSeries& series);

/// Header "freq_hz,psd".
void write_spectrum_csv(std::ostream& out, const Spectrum& spectrum);
/// Accepts the two-column layout written above; the header line is required.
Spectrum read_spectrum_csv(std::istream& in);

/// True when the file starts with the binary series magic.
bool is_series_binary(const std::filesystem::path& path);

}  // namespace spinnoise
