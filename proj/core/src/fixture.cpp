// Copyright 2026 The CFSAM Authors
// SPDX-License-Identifier: Apache-2.0

#include "cfsam/fixture.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "cfsam/errors.hpp"

namespace cfsam {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class U>
void put_le(std::ostream& out, U value) {
  std::array<char, sizeof(U)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(bytes.data(), bytes.size());
}

template <class U>
U get_le(std::istream& in, const char* what) {
  std::array<char, sizeof(U)> bytes;
  if (!in.read(bytes.data(), bytes.size())) {
    throw FormatError(std::string("truncated fixture while reading ") + what);
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  U value;
  std::memcpy(&value, bytes.data(), sizeof(U));
  return value;
}

template <class Stored, class T>
std::vector<T> read_payload(std::istream& in, std::size_t count) {
  std::vector<char> bytes(count * sizeof(Stored));
  if (!in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()))) {
    throw FormatError("truncated fixture payload: expected " + std::to_string(count) + " scalars");
  }
  std::vector<T> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    char* b = bytes.data() + i * sizeof(Stored);
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(Stored));
    Stored v;
    std::memcpy(&v, b, sizeof(Stored));
    values[i] = static_cast<T>(v);
  }
  return values;
}

}  // namespace

Precision peek_fixture_dtype(std::istream& in) {
  const auto start = in.tellg();
  std::array<char, 6> head{};
  if (!in.read(head.data(), head.size())) throw FormatError("truncated fixture header");
  in.seekg(start);
  if (std::memcmp(head.data(), kFixtureMagic, 4) != 0) throw FormatError("bad fixture magic (expected CFST)");
  const auto dtype = static_cast<std::uint8_t>(head[5]);
  if (dtype > 1) throw FormatError("unknown fixture dtype " + std::to_string(dtype));
  return static_cast<Precision>(dtype);
}

template <class T>
void write_tensor(std::ostream& out, const BasicTensor<T>& tensor) {
  const Shape& shape = tensor.shape();
  if (shape.size() > 255) throw FormatError("fixture rank must fit in one byte");
  out.write(kFixtureMagic, 4);
  put_le<std::uint8_t>(out, kFixtureVersion);
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(precision_of<T>()));
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(shape.size()));
  for (const std::size_t d : shape) {
    if (d > 0xFFFFFFFFu) throw FormatError("fixture dimension exceeds u32");
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(d));
  }
  const auto values = tensor.data();
  std::vector<char> bytes(values.size() * sizeof(T));
  std::memcpy(bytes.data(), values.data(), bytes.size());
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < values.size(); ++i) std::reverse(&bytes[i * sizeof(T)], &bytes[(i + 1) * sizeof(T)]);
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing fixture");
}

template <class T>
BasicTensor<T> read_tensor(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size())) throw FormatError("truncated fixture header");
  if (std::memcmp(magic.data(), kFixtureMagic, 4) != 0) throw FormatError("bad fixture magic (expected CFST)");
  const auto version = get_le<std::uint8_t>(in, "version");
  if (version != kFixtureVersion) {
    throw FormatError("unsupported fixture version " + std::to_string(version));
  }
  const auto dtype = get_le<std::uint8_t>(in, "dtype");
  if (dtype > 1) throw FormatError("unknown fixture dtype " + std::to_string(dtype));
  const auto rank = get_le<std::uint8_t>(in, "rank");
  Shape shape(rank);
  for (auto& d : shape) {
    d = get_le<std::uint32_t>(in, "dims");
    if (d == 0) throw FormatError("fixture has a zero dimension");
  }
  const std::size_t count = shape_numel(shape);
  std::vector<T> values = dtype == 0 ? read_payload<float, T>(in, count) : read_payload<double, T>(in, count);
  return BasicTensor<T>::from(std::move(shape), std::move(values));
}

template <class T>
void save_tensor(const std::filesystem::path& path, const BasicTensor<T>& tensor) {
  save_tensors<T>(path, {tensor});
}

template <class T>
BasicTensor<T> load_tensor(const std::filesystem::path& path) {
  auto all = load_tensors<T>(path);
  if (all.size() != 1) {
    throw FormatError(path.string() + ": expected one tensor record, found " + std::to_string(all.size()));
  }
  return all.front();
}

template <class T>
void save_tensors(const std::filesystem::path& path, const std::vector<BasicTensor<T>>& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  for (const auto& t : tensors) write_tensor(out, t);
}

template <class T>
std::vector<BasicTensor<T>> load_tensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::vector<BasicTensor<T>> out;
  while (in.peek() != std::char_traits<char>::eof()) out.push_back(read_tensor<T>(in));
  if (out.empty()) throw FormatError(path.string() + ": empty fixture");
  return out;
}

#define CFSAM_INSTANTIATE_FIXTURE(T)                                                          \
  template void write_tensor(std::ostream&, const BasicTensor<T>&);                           \
  template BasicTensor<T> read_tensor(std::istream&);                                         \
  template void save_tensor(const std::filesystem::path&, const BasicTensor<T>&);             \
  template BasicTensor<T> load_tensor(const std::filesystem::path&);                          \
  template void save_tensors(const std::filesystem::path&, const std::vector<BasicTensor<T>>&); \
  template std::vector<BasicTensor<T>> load_tensors(const std::filesystem::path&);

CFSAM_INSTANTIATE_FIXTURE(float)
CFSAM_INSTANTIATE_FIXTURE(double)

#undef CFSAM_INSTANTIATE_FIXTURE

}  // namespace cfsam
