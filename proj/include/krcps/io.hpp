#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "krcps/core.hpp"
#include "krcps/quantiles.hpp"

namespace krcps {

// Row-major matrix container for the array file formats.
struct Array2D {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec data;

  static Array2D from_vector(const Vec& v) {
    return Array2D{1, v.size(), v};
  }
};

namespace io {

inline constexpr char kMagic[8] = {'K', 'R', 'C', 'P', 'S', 'A', 'R', 'R'};
inline constexpr int kSchemaVersion = 1;

// Shortest digit string that round-trips a double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// CSV with header row x_0..x_{d-1}, one data row per matrix row.
inline void write_csv(const std::string& path, const Array2D& arr) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_csv: cannot open " + path);
  for (std::size_t j = 0; j < arr.cols; ++j)
    out << (j ? "," : "") << "x_" << j;
  out << "\n";
  for (std::size_t i = 0; i < arr.rows; ++i) {
    for (std::size_t j = 0; j < arr.cols; ++j)
      out << (j ? "," : "") << format_double(arr.data[i * arr.cols + j]);
    out << "\n";
  }
  if (!out) throw std::runtime_error("write_csv: write failed: " + path);
}

inline Array2D read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("read_csv: missing header: " + path);
  Array2D arr;
  arr.cols = static_cast<std::size_t>(
      std::count(line.begin(), line.end(), ',') + 1);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t got = 0;
    while (std::getline(ss, cell, ',')) {
      arr.data.push_back(std::stod(cell));
      ++got;
    }
    if (got != arr.cols)
      throw std::runtime_error("read_csv: ragged row in " + path);
    ++arr.rows;
  }
  return arr;
}

namespace detail_io {

inline void put_u32(std::ofstream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF),
                        static_cast<unsigned char>((v >> 24) & 0xFF)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

inline void put_f64(std::ofstream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i)
    b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline double get_f64(std::ifstream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace detail_io

// Flat little-endian binary: 8-byte magic, u32 rows, u32 cols, then
// rows*cols f64 values.
inline void write_binary(const std::string& path, const Array2D& arr) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw std::runtime_error("write_binary: cannot open " + path);
  out.write(kMagic, 8);
  detail_io::put_u32(out, static_cast<std::uint32_t>(arr.rows));
  detail_io::put_u32(out, static_cast<std::uint32_t>(arr.cols));
  for (double v : arr.data) detail_io::put_f64(out, v);
  if (!out) throw std::runtime_error("write_binary: write failed: " + path);
}

inline Array2D read_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_binary: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw std::runtime_error("read_binary: bad magic in " + path);
  Array2D arr;
  arr.rows = detail_io::get_u32(in);
  arr.cols = detail_io::get_u32(in);
  arr.data.resize(arr.rows * arr.cols);
  for (double& v : arr.data) v = detail_io::get_f64(in);
  if (!in) throw std::runtime_error("read_binary: truncated file " + path);
  return arr;
}

inline SampleBatch load_sample_batch(const std::string& path) {
  const bool binary = path.size() >= 4 &&
                      path.compare(path.size() - 4, 4, ".bin") == 0;
  const Array2D arr = binary ? read_binary(path) : read_csv(path);
  SampleBatch batch{arr.rows, arr.cols, arr.data};
  batch.validate();
  return batch;
}

// JSON sidecar attached to an exported lambda map.
struct Sidecar {
  double epsilon = 0.0;
  double delta = 0.0;
  double alpha = 0.0;
  std::size_t K = 0;
  double gamma_star = 0.0;
  Vec lambda_groups;
  std::uint64_t seed = 0;
  std::string ucb_kind;
};

inline void write_sidecar(const std::string& path, const Sidecar& s) {
  nlohmann::json j{{"schema_version", kSchemaVersion},
                   {"epsilon", s.epsilon},
                   {"delta", s.delta},
                   {"alpha", s.alpha},
                   {"K", s.K},
                   {"gamma_star", s.gamma_star},
                   {"lambda_groups", s.lambda_groups},
                   {"seed", s.seed},
                   {"ucb_kind", s.ucb_kind}};
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("write_sidecar: cannot open " + path);
  out << j.dump(2) << "\n";
}

inline Sidecar read_sidecar(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_sidecar: cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  Sidecar s;
  s.epsilon = j.at("epsilon").get<double>();
  s.delta = j.at("delta").get<double>();
  s.alpha = j.at("alpha").get<double>();
  s.K = j.at("K").get<std::size_t>();
  s.gamma_star = j.at("gamma_star").get<double>();
  s.lambda_groups = j.at("lambda_groups").get<Vec>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.ucb_kind = j.at("ucb_kind").get<std::string>();
  return s;
}

}  // namespace io
}  // namespace krcps
