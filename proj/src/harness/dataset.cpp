// SPDX-License-Identifier: Apache-2.0
#include "midg/harness/dataset.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "midg/errors.hpp"

namespace midg::harness {

namespace {

constexpr std::string_view kMagic = "MIDG1";

std::vector<std::string_view> tokenize(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

double parse_real(std::string_view token, std::size_t line, const char* what) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(value)) {
    throw ParseError(line, std::string(what) + " '" + std::string(token) + "' is not a finite real number");
  }
  return value;
}

template <class Int>
Int parse_int(std::string_view token, std::size_t line, const char* what) {
  Int value{};
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw ParseError(line, std::string(what) + " '" + std::string(token) + "' is not an integer");
  }
  return value;
}

Split parse_split(std::string_view token, std::size_t line) {
  if (token == "train") return Split::Train;
  if (token == "valid") return Split::Valid;
  if (token == "test") return Split::Test;
  throw ParseError(line, "unknown split '" + std::string(token) + "'");
}

void append_real(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, ptr);
}

}  // namespace

std::string_view split_name(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Valid: return "valid";
    case Split::Test: return "test";
  }
  return "train";
}

std::vector<const Sample*> Dataset::select(Split split) const {
  std::vector<const Sample*> out;
  for (const auto& s : samples) {
    if (s.split == split) out.push_back(&s);
  }
  return out;
}

void validate(const Dataset& dataset) {
  const Dims& d = dataset.dims;
  if (d.t == 0 || d.a == 0 || d.v == 0) throw DataError("dataset dims must be positive");
  for (const auto& s : dataset.samples) {
    if (s.t.size() != d.t || s.a.size() != d.a || s.v.size() != d.v) {
      throw DataError("sample '" + s.id + "': vector lengths (" + std::to_string(s.t.size()) + "," +
                      std::to_string(s.a.size()) + "," + std::to_string(s.v.size()) + ") disagree with dims (" +
                      std::to_string(d.t) + "," + std::to_string(d.a) + "," + std::to_string(d.v) + ")");
    }
    if (s.id.empty() || s.id.find_first_of(" \t\r\n") != std::string::npos) {
      throw DataError("sample ids must be nonempty and contain no whitespace");
    }
    if (!std::isfinite(s.label)) throw DataError("sample '" + s.id + "': non-finite label");
  }
}

void write_dataset(const Dataset& dataset, std::ostream& out) {
  validate(dataset);
  const Dims& d = dataset.dims;
  out << kMagic << ' ' << d.t << ' ' << d.a << ' ' << d.v << '\n';
  std::string line;
  for (const auto& s : dataset.samples) {
    line.clear();
    line += s.id;
    line += ' ';
    line += split_name(s.split);
    line += ' ';
    line += std::to_string(s.domain);
    line += ' ';
    append_real(line, s.label);
    for (const auto* vec : {&s.t, &s.a, &s.v}) {
      for (double x : *vec) {
        line += ' ';
        append_real(line, x);
      }
    }
    line += '\n';
    out << line;
  }
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ostringstream buffer;
  write_dataset(dataset, buffer);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    f << buffer.str();
    if (!f.flush()) throw std::runtime_error("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

Dataset read_dataset(std::istream& in) {
  Dataset ds;
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  {
    const auto tok = tokenize(line);
    if (tok.size() != 4 || tok[0] != kMagic) {
      throw ParseError(1, "header must be 'MIDG1 <d_t> <d_a> <d_v>'");
    }
    ds.dims.t = parse_int<std::size_t>(tok[1], 1, "d_t");
    ds.dims.a = parse_int<std::size_t>(tok[2], 1, "d_a");
    ds.dims.v = parse_int<std::size_t>(tok[3], 1, "d_v");
    if (ds.dims.t == 0 || ds.dims.a == 0 || ds.dims.v == 0) throw ParseError(1, "header dims must be positive");
  }
  const std::size_t width = 4 + ds.dims.total();
  while (std::getline(in, line)) {
    ++lineno;
    const auto tok = tokenize(line);
    if (tok.empty()) continue;
    if (in.eof()) throw ParseError(lineno, "row is truncated (missing final newline)");
    if (tok.size() < 4) throw ParseError(lineno, "row needs at least 'id split domain label'");
    Sample s;
    s.id = std::string(tok[0]);
    s.split = parse_split(tok[1], lineno);
    s.domain = parse_int<int>(tok[2], lineno, "domain");
    s.label = parse_real(tok[3], lineno, "label");
    if (tok.size() != width) {
      throw DataError("row " + std::to_string(lineno) + " (sample '" + s.id + "'): expected " +
                      std::to_string(ds.dims.total()) + " feature values for dims (" + std::to_string(ds.dims.t) +
                      "," + std::to_string(ds.dims.a) + "," + std::to_string(ds.dims.v) + "), got " +
                      std::to_string(tok.size() - 4));
    }
    std::size_t k = 4;
    for (auto [vec, n] : {std::pair{&s.t, ds.dims.t}, std::pair{&s.a, ds.dims.a}, std::pair{&s.v, ds.dims.v}}) {
      vec->reserve(n);
      for (std::size_t j = 0; j < n; ++j) vec->push_back(parse_real(tok[k++], lineno, "feature"));
    }
    ds.samples.push_back(std::move(s));
  }
  if (in.bad()) throw std::runtime_error("I/O error while reading dataset");
  return ds;
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open dataset '" + path.string() + "'");
  return read_dataset(f);
}

}  // namespace midg::harness
