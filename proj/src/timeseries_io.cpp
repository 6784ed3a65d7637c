#include "spinnoise/timeseries_io.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace spinnoise {

namespace {

constexpr std::array<char, 8> kMagic{'S', 'P', 'N', 'O', 'I', 'S', 'E', '\0'};

template <typename T>
void put_le(unsigned char* dst, T value) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  const U bits = std::bit_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) dst[i] = static_cast<unsigned char>(bits >> (8 * i));
}

template <typename T>
T get_le(const unsigned char* src) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(src[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

}  // namespace

void write_series_binary(std::ostream& out, const TimeSeries& series) {
  std::array<unsigned char, kSeriesHeaderBytes> header{};
  std::memcpy(header.data(), kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(header.data() + 8, kSeriesFormatVersion);
  put_le<std::uint32_t>(header.data() + 12, static_cast<std::uint32_t>(kSeriesHeaderBytes));
  put_le<double>(header.data() + 16, series.sample_rate_hz);
  put_le<std::uint64_t>(header.data() + 24, series.samples.size());
  put_le<std::uint64_t>(header.data() + 32, series.seed);
  out.write(reinterpret_cast<const char*>(header.data()), header.size());

  std::vector<unsigned char> frames(series.samples.size() * 8);
  for (std::size_t i = 0; i < series.samples.size(); ++i) {
    put_le<double>(frames.data() + 8 * i, series.samples[i]);
  }
  out.write(reinterpret_cast<const char*>(frames.data()),
            static_cast<std::streamsize>(frames.size()));
  if (!out) throw std::runtime_error("failed to write time series");
}

TimeSeries read_series_binary(std::istream& in) {
  std::array<unsigned char, kSeriesHeaderBytes> header{};
  if (!in.read(reinterpret_cast<char*>(header.data()), header.size())) {
    throw std::runtime_error("time series header truncated");
  }
  if (std::memcmp(header.data(), kMagic.data(), kMagic.size()) != 0) {
    throw std::runtime_error("not a spinnoise time series (bad magic)");
  }
  const auto version = get_le<std::uint32_t>(header.data() + 8);
  const auto header_size = get_le<std::uint32_t>(header.data() + 12);
  if (version != kSeriesFormatVersion || header_size != kSeriesHeaderBytes) {
    throw std::runtime_error("unsupported time series version " + std::to_string(version));
  }
  TimeSeries s;
  s.sample_rate_hz = get_le<double>(header.data() + 16);
  const auto count = get_le<std::uint64_t>(header.data() + 24);
  s.seed = get_le<std::uint64_t>(header.data() + 32);
  if (!(s.sample_rate_hz > 0.0)) throw std::runtime_error("time series sample rate invalid");

  std::vector<unsigned char> frames(count * 8);
  if (!in.read(reinterpret_cast<char*>(frames.data()), static_cast<std::streamsize>(frames.size()))) {
    throw std::runtime_error("time series data truncated");
  }
  s.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) s.samples[i] = get_le<double>(frames.data() + 8 * i);
  return s;
}

void write_series_csv(std::ostream& out, const TimeSeries& series) {
  out << "time_s,signal\n" << std::setprecision(9);
  for (std::size_t i = 0; i < series.samples.size(); ++i) {
    out << static_cast<double>(i) / series.sample_rate_hz << ',' << series.samples[i] << '\n';
  }
}

void write_spectrum_csv(std::ostream& out, const Spectrum& spectrum) {
  out << "freq_hz,psd\n" << std::setprecision(9);
  for (std::size_t i = 0; i < spectrum.freq_hz.size(); ++i) {
    out << spectrum.freq_hz[i] << ',' << spectrum.psd[i] << '\n';
  }
}

Spectrum read_spectrum_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("spectrum CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "freq_hz,psd") {
    throw std::runtime_error("spectrum CSV header must be 'freq_hz,psd'");
  }
  Spectrum s;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw std::runtime_error("spectrum CSV line " + std::to_string(line_no) + ": expected two columns");
    }
    try {
      std::size_t used_f = 0, used_p = 0;
      const std::string fs = line.substr(0, comma), ps = line.substr(comma + 1);
      const double f = std::stod(fs, &used_f);
      const double p = std::stod(ps, &used_p);
      if (used_f != fs.size() || used_p != ps.size() || !std::isfinite(f) || !std::isfinite(p)) {
        throw std::invalid_argument("bad number");
      }
      s.freq_hz.push_back(f);
      s.psd.push_back(p);
    } catch (const std::exception&) {
      throw std::runtime_error("spectrum CSV line " + std::to_string(line_no) + ": invalid number");
    }
  }
  return s;
}

bool is_series_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::array<char, 8> head{};
  return in.read(head.data(), head.size()) && head == kMagic;
}

}  // namespace spinnoise
