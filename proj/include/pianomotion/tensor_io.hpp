#pragma once

// Minimal binary tensor container: 8-byte magic "PMTENSOR", uint32 rank,
// rank x uint64 dims, then float64 values in row-major order. All integers
// and floats little-endian.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "pianomotion/error.hpp"

namespace pianomotion::io {

static_assert(std::endian::native == std::endian::little, "tensor files assume a little-endian host");

inline constexpr char kTensorMagic[8] = {'P', 'M', 'T', 'E', 'N', 'S', 'O', 'R'};

struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<double> data;

  std::uint64_t element_count() const {
    return std::accumulate(dims.begin(), dims.end(), std::uint64_t{1}, std::multiplies<>());
  }

  /// Collapses all trailing dimensions: shape (d0, d1*d2*...).
  Eigen::MatrixXd as_matrix() const {
    require(!dims.empty(), Errc::ShapeMismatch, "scalar tensor has no matrix view");
    const auto rows = static_cast<Eigen::Index>(dims[0]);
    const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(data.size()) / rows;
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    return Eigen::Map<const RowMajor>(data.data(), rows, cols);
  }

  static Tensor from_matrix(const Eigen::MatrixXd& m) {
    Tensor t;
    t.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
    t.data.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) t.data.push_back(m(r, c));
    return t;
  }
};

inline void write_tensor(const Tensor& t, const std::string& path) {
  require(t.element_count() == t.data.size(), Errc::ShapeMismatch, "tensor data does not match its dims");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::Io, "cannot write " + path);
  out.write(kTensorMagic, sizeof kTensorMagic);
  const auto rank = static_cast<std::uint32_t>(t.dims.size());
  out.write(reinterpret_cast<const char*>(&rank), sizeof rank);
  out.write(reinterpret_cast<const char*>(t.dims.data()), static_cast<std::streamsize>(t.dims.size() * sizeof(std::uint64_t)));
  out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  if (!out) fail(Errc::Io, "short write to " + path);
}

inline Tensor read_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::Io, "cannot open " + path);
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kTensorMagic, sizeof magic) != 0)
    fail(Errc::SchemaViolation, path + ": not a tensor file");
  std::uint32_t rank = 0;
  in.read(reinterpret_cast<char*>(&rank), sizeof rank);
  if (!in || rank > 16) fail(Errc::SchemaViolation, path + ": bad tensor rank");
  Tensor t;
  t.dims.resize(rank);
  in.read(reinterpret_cast<char*>(t.dims.data()), static_cast<std::streamsize>(rank * sizeof(std::uint64_t)));
  if (!in) fail(Errc::SchemaViolation, path + ": truncated tensor header");
  const std::uint64_t count = t.element_count();
  if (count > (std::uint64_t{1} << 32)) fail(Errc::SchemaViolation, path + ": tensor too large");
  t.data.resize(static_cast<std::size_t>(count));
  in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) fail(Errc::SchemaViolation, path + ": truncated tensor data");
  return t;
}

}  // namespace pianomotion::io
