// Copyright 2026 The CFSAM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "cfsam/tensor.hpp"

// Portable tensor fixture format ("CFST"), little-endian throughout:
//
//   offset 0  4 bytes   magic "CFST"
//   offset 4  u8        version (1)
//   offset 5  u8        dtype   (0 = f32, 1 = f64)
//   offset 6  u8        rank
//   offset 7  rank*u32  dims
//   ...       raw scalars, row-major
//
// A multi-tensor fixture (e.g. a pyramid) is a plain concatenation of records.
namespace cfsam {

inline constexpr char kFixtureMagic[4] = {'C', 'F', 'S', 'T'};
inline constexpr std::uint8_t kFixtureVersion = 1;

/// dtype byte of the next record in `in` without consuming it.
Precision peek_fixture_dtype(std::istream& in);

template <class T>
void write_tensor(std::ostream& out, const BasicTensor<T>& tensor);

/// Reads one record. Values stored at the other precision are converted.
template <class T>
BasicTensor<T> read_tensor(std::istream& in);

template <class T>
void save_tensor(const std::filesystem::path& path, const BasicTensor<T>& tensor);

/// Loads a file holding exactly one record.
template <class T>
BasicTensor<T> load_tensor(const std::filesystem::path& path);

template <class T>
void save_tensors(const std::filesystem::path& path, const std::vector<BasicTensor<T>>& tensors);

/// Loads every record in the file (at least one).
template <class T>
std::vector<BasicTensor<T>> load_tensors(const std::filesystem::path& path);

}  // namespace cfsam
