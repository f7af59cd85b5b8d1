#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "vsum/common.hpp"

namespace vsum::io {

// Tensor file layout, little-endian throughout:
//   magic "VSTN" | u8 dtype | u8 rank | rank x u32 dims | row-major payload
// dtypes: 0=f32, 1=i32, 2=u8 (dataset bundles); 3=f64 (parameter checkpoints,
// which need lossless round trips).
enum class TenDtype : std::uint8_t { f32 = 0, i32 = 1, u8 = 2, f64 = 3 };

struct TensorData {
  TenDtype dtype = TenDtype::f32;
  std::vector<std::uint32_t> dims;
  std::variant<std::vector<float>, std::vector<std::int32_t>, std::vector<std::uint8_t>,
               std::vector<double>>
      values;

  std::size_t element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

namespace detail {

constexpr std::array<char, 4> kMagic = {'V', 'S', 'T', 'N'};

template <typename T>
T from_le(const unsigned char* p) {
  static_assert(std::is_trivially_copyable_v<T>);
  T v;
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(&v, p, sizeof(T));
  } else {
    unsigned char swapped[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) swapped[i] = p[sizeof(T) - 1 - i];
    std::memcpy(&v, swapped, sizeof(T));
  }
  return v;
}

template <typename T>
void to_le(T v, unsigned char* p) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(p, raw, sizeof(T));
  } else {
    for (std::size_t i = 0; i < sizeof(T); ++i) p[i] = raw[sizeof(T) - 1 - i];
  }
}

template <typename T>
std::vector<T> read_payload(std::istream& in, std::size_t count, const std::string& path) {
  std::vector<unsigned char> raw(count * sizeof(T));
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw FormatError("truncated tensor payload in " + path);
  std::vector<T> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = from_le<T>(raw.data() + i * sizeof(T));
  return out;
}

template <typename T>
void write_payload(std::ostream& out, const std::vector<T>& values) {
  std::vector<unsigned char> raw(values.size() * sizeof(T));
  for (std::size_t i = 0; i < values.size(); ++i) to_le(values[i], raw.data() + i * sizeof(T));
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

}  // namespace detail

inline TensorData read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open tensor file: " + path.string());

  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (!in || magic != detail::kMagic) throw FormatError("bad magic in " + path.string());

  unsigned char dtype_rank[2];
  in.read(reinterpret_cast<char*>(dtype_rank), 2);
  if (!in) throw FormatError("truncated header in " + path.string());
  if (dtype_rank[0] > 3) throw FormatError("unknown dtype in " + path.string());

  TensorData t;
  t.dtype = static_cast<TenDtype>(dtype_rank[0]);
  const int rank = dtype_rank[1];
  t.dims.resize(rank);
  for (int i = 0; i < rank; ++i) {
    unsigned char buf[4];
    in.read(reinterpret_cast<char*>(buf), 4);
    if (!in) throw FormatError("truncated dims in " + path.string());
    t.dims[i] = detail::from_le<std::uint32_t>(buf);
  }

  const std::size_t n = t.element_count();
  switch (t.dtype) {
    case TenDtype::f32:
      t.values = detail::read_payload<float>(in, n, path.string());
      break;
    case TenDtype::i32:
      t.values = detail::read_payload<std::int32_t>(in, n, path.string());
      break;
    case TenDtype::u8:
      t.values = detail::read_payload<std::uint8_t>(in, n, path.string());
      break;
    case TenDtype::f64:
      t.values = detail::read_payload<double>(in, n, path.string());
      break;
  }
  return t;
}

inline void write_tensor(const std::filesystem::path& path, const TensorData& t) {
  if (t.dims.size() > 255) throw FormatError("tensor rank exceeds format limit");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write tensor file: " + path.string());

  out.write(detail::kMagic.data(), 4);
  const unsigned char dtype_rank[2] = {static_cast<unsigned char>(t.dtype),
                                       static_cast<unsigned char>(t.dims.size())};
  out.write(reinterpret_cast<const char*>(dtype_rank), 2);
  for (auto d : t.dims) {
    unsigned char buf[4];
    detail::to_le(d, buf);
    out.write(reinterpret_cast<const char*>(buf), 4);
  }

  std::visit([&](const auto& v) { detail::write_payload(out, v); }, t.values);
  if (!out) throw IoError("write failed: " + path.string());
}

// Eigen adapters. Payloads are row-major in the file regardless of the
// in-memory layout.

inline TensorData from_matrix_f32(const MatrixF& m) {
  TensorData t;
  t.dtype = TenDtype::f32;
  t.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  std::vector<float> v(static_cast<std::size_t>(m.rows()) * m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) v[r * m.cols() + c] = m(r, c);
  t.values = std::move(v);
  return t;
}

inline TensorData from_vector_f32(const VectorF& x) {
  TensorData t;
  t.dtype = TenDtype::f32;
  t.dims = {static_cast<std::uint32_t>(x.size())};
  t.values = std::vector<float>(x.data(), x.data() + x.size());
  return t;
}

inline TensorData from_matrix_f64(const Matrix& m) {
  TensorData t;
  t.dtype = TenDtype::f64;
  t.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  std::vector<double> v(static_cast<std::size_t>(m.rows()) * m.cols());
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) v[r * m.cols() + c] = m(r, c);
  t.values = std::move(v);
  return t;
}

inline TensorData from_mask_matrix(const MaskMatrix& m) {
  TensorData t;
  t.dtype = TenDtype::u8;
  t.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  t.values = std::vector<std::uint8_t>(m.data(), m.data() + m.size());
  return t;
}

inline TensorData from_i32_vector(const std::vector<std::int32_t>& v) {
  TensorData t;
  t.dtype = TenDtype::i32;
  t.dims = {static_cast<std::uint32_t>(v.size())};
  t.values = v;
  return t;
}

inline TensorData from_i32_pairs(const std::vector<std::array<int, 2>>& rows) {
  TensorData t;
  t.dtype = TenDtype::i32;
  t.dims = {static_cast<std::uint32_t>(rows.size()), 2};
  std::vector<std::int32_t> v;
  v.reserve(rows.size() * 2);
  for (const auto& r : rows) {
    v.push_back(r[0]);
    v.push_back(r[1]);
  }
  t.values = std::move(v);
  return t;
}

inline MatrixF to_matrix_f32(const TensorData& t, const std::string& what) {
  if (t.dtype != TenDtype::f32 || t.dims.size() != 2)
    throw FormatError(what + ": expected rank-2 f32 tensor");
  const auto& v = std::get<std::vector<float>>(t.values);
  MatrixF m(t.dims[0], t.dims[1]);
  for (std::uint32_t r = 0; r < t.dims[0]; ++r)
    for (std::uint32_t c = 0; c < t.dims[1]; ++c) m(r, c) = v[r * t.dims[1] + c];
  return m;
}

inline VectorF to_vector_f32(const TensorData& t, const std::string& what) {
  if (t.dtype != TenDtype::f32 || t.dims.size() != 1)
    throw FormatError(what + ": expected rank-1 f32 tensor");
  const auto& v = std::get<std::vector<float>>(t.values);
  return Eigen::Map<const VectorF>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline Matrix to_matrix_f64(const TensorData& t, const std::string& what) {
  if (t.dtype != TenDtype::f64 || t.dims.size() != 2)
    throw FormatError(what + ": expected rank-2 f64 tensor");
  const auto& v = std::get<std::vector<double>>(t.values);
  Matrix m(t.dims[0], t.dims[1]);
  for (std::uint32_t r = 0; r < t.dims[0]; ++r)
    for (std::uint32_t c = 0; c < t.dims[1]; ++c) m(r, c) = v[r * t.dims[1] + c];
  return m;
}

inline MaskMatrix to_mask_matrix(const TensorData& t, const std::string& what) {
  if (t.dtype != TenDtype::u8 || t.dims.size() != 2)
    throw FormatError(what + ": expected rank-2 u8 tensor");
  const auto& v = std::get<std::vector<std::uint8_t>>(t.values);
  MaskMatrix m(t.dims[0], t.dims[1]);
  std::memcpy(m.data(), v.data(), v.size());
  return m;
}

inline std::vector<std::int32_t> to_i32_vector(const TensorData& t, const std::string& what) {
  if (t.dtype != TenDtype::i32 || t.dims.size() != 1)
    throw FormatError(what + ": expected rank-1 i32 tensor");
  return std::get<std::vector<std::int32_t>>(t.values);
}

inline std::vector<std::array<int, 2>> to_i32_pairs(const TensorData& t, const std::string& what) {
  if (t.dtype != TenDtype::i32 || t.dims.size() != 2 || t.dims[1] != 2)
    throw FormatError(what + ": expected [n x 2] i32 tensor");
  const auto& v = std::get<std::vector<std::int32_t>>(t.values);
  std::vector<std::array<int, 2>> rows(t.dims[0]);
  for (std::uint32_t r = 0; r < t.dims[0]; ++r) rows[r] = {v[2 * r], v[2 * r + 1]};
  return rows;
}

}  // namespace vsum::io
