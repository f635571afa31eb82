#pragma once

// Byte-stable output: shortest round-trip number formatting, LF-only CSV, the
// MIDS binary batch format, and SHA-256 digests for manifests.

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "midcs/midcs.hpp"

namespace midcs::cli {

// Shortest decimal that parses back to the same double; "inf", "-inf", "nan"
// for non-finite values.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : columns_(header.size()) { row_strings(header); }

  template <typename... Cells>
  void row(const Cells&... cells) {
    std::vector<std::string> out;
    (out.push_back(cell(cells)), ...);
    row_strings(out);
  }

  const std::string& str() const { return text_; }

 private:
  static std::string cell(double v) { return format_number(v); }
  static std::string cell(float v) { return format_number(v); }
  static std::string cell(bool v) { return v ? "true" : "false"; }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  template <typename I>
    requires std::is_integral_v<I>
  static std::string cell(I v) {
    return std::to_string(v);
  }

  void row_strings(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw DataError("csv: row width does not match the header");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].find_first_of(",\n\"") != std::string::npos) {
        std::string q = "\"";
        for (char c : cells[i]) q += c == '"' ? std::string("\"\"") : std::string(1, c);
        text_ += q + "\"";
      } else {
        text_ += cells[i];
      }
      text_ += i + 1 < cells.size() ? "," : "\n";
    }
  }

  std::size_t columns_;
  std::string text_;
};

inline std::string batch_csv(const SampleBatch& batch) {
  CsvWriter w({"trial", "i", "value"});
  for (std::size_t t = 0; t < batch.trials; ++t) {
    for (std::size_t i = 0; i < batch.n; ++i) w.row(t, i, batch.at(t, i));
  }
  return w.str();
}

namespace detail {

template <typename T>
void put_le(std::string& out, T v) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(const std::string& in, std::size_t offset) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, in.data() + offset, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T v;
  std::memcpy(&v, bytes, sizeof(T));
  return v;
}

}  // namespace detail

inline constexpr std::uint32_t kBinaryVersion = 1;

// 16-byte header ("MIDS", version, n, trials as u32 LE) then row-major f64 LE.
inline std::string batch_binary(const SampleBatch& batch) {
  if (batch.n > UINT32_MAX || batch.trials > UINT32_MAX) throw DataError("binary: batch dimensions exceed u32");
  std::string out = "MIDS";
  detail::put_le<std::uint32_t>(out, kBinaryVersion);
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(batch.n));
  detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(batch.trials));
  out.reserve(16 + 8 * batch.data.size());
  for (double v : batch.data) detail::put_le<double>(out, v);
  return out;
}

// Data only: the process and seed are not part of the binary format.
inline SampleBatch read_batch_binary(const std::string& bytes) {
  if (bytes.size() < 16 || bytes.compare(0, 4, "MIDS") != 0) throw DataError("binary: missing MIDS header");
  const auto version = detail::get_le<std::uint32_t>(bytes, 4);
  if (version != kBinaryVersion) throw DataError("binary: unsupported version " + std::to_string(version));
  SampleBatch b;
  b.n = detail::get_le<std::uint32_t>(bytes, 8);
  b.trials = detail::get_le<std::uint32_t>(bytes, 12);
  if (bytes.size() != 16 + 8 * b.n * b.trials) throw DataError("binary: payload length does not match the header");
  b.data.resize(b.n * b.trials);
  for (std::size_t i = 0; i < b.data.size(); ++i) b.data[i] = detail::get_le<double>(bytes, 16 + 8 * i);
  return b;
}

inline std::string sha256_hex(const std::string& bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw NumericError("sha256: digest computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ParameterError("out: cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ParameterError("out: write failed for '" + path.string() + "'");
}

}  // namespace midcs::cli
