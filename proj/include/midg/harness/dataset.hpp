// SPDX-License-Identifier: Apache-2.0
//
// In-memory dataset and its text serialization:
//
//   MIDG1 <d_t> <d_a> <d_v>
//   <id> <train|valid|test> <domain> <label> <d_t + d_a + d_v reals>
//   ...

#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace midg::harness {

enum class Split { Train, Valid, Test };

std::string_view split_name(Split split);

struct Dims {
  std::size_t t = 8;
  std::size_t a = 4;
  std::size_t v = 6;

  std::size_t total() const { return t + a + v; }
  bool operator==(const Dims&) const = default;
};

struct Sample {
  std::string id;
  Split split = Split::Train;
  int domain = 0;
  double label = 0.0;
  std::vector<double> t;
  std::vector<double> a;
  std::vector<double> v;

  bool operator==(const Sample&) const = default;
};

struct Dataset {
  Dims dims;
  std::vector<Sample> samples;

  std::vector<const Sample*> select(Split split) const;
  bool operator==(const Dataset&) const = default;
};

/// Throws DataError if any vector length disagrees with `dims` or a value is non-finite.
void validate(const Dataset& dataset);

void write_dataset(const Dataset& dataset, std::ostream& out);
/// Writes through a temporary file in the same directory and renames it into place.
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);

/// Throws ParseError (malformed header/row or a final row without its newline, with line number) or
/// DataError (row length disagrees with the header dims).
Dataset read_dataset(std::istream& in);
Dataset read_dataset(const std::filesystem::path& path);

}  // namespace midg::harness
