// Copyright 2026 The topicnet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TOPICNET_DETAIL_IO_HPP_
#define TOPICNET_DETAIL_IO_HPP_

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <fmt/format.h>

#include "topicnet/error.hpp"

namespace topicnet::detail {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes `contents` to a sibling temp file and renames it over `path`, so
// readers never observe a partially written artifact.
inline void write_file_atomic(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError(fmt::format("cannot write '{}'", path.string()));
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw DataError(fmt::format("write failed for '{}'", path.string()));
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw DataError(fmt::format("cannot rename onto '{}': {}", path.string(),
                                ec.message()));
  }
}

inline std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(),
                 nullptr) != 1) {
    throw Error("sha256 digest failed");
  }
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", md[i]);
  return out;
}

inline std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(std::string_view s, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(delim, start);
    if (pos == std::string_view::npos) {
      out.emplace_back(s.substr(start));
      return out;
    }
    out.emplace_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::vector<std::string> lines(std::string_view text) {
  auto out = split(text, '\n');
  for (auto& l : out) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
  }
  if (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

// Tab-separated tables. Fields may not contain tabs or newlines; those are
// replaced by spaces on write.
class TsvWriter {
 public:
  explicit TsvWriter(std::vector<std::string> header) {
    row(header);
  }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ += '\t';
      for (char c : fields[i]) out_ += (c == '\t' || c == '\n' || c == '\r') ? ' ' : c;
    }
    out_ += '\n';
  }

  const std::string& str() const { return out_; }

 private:
  std::string out_;
};

struct TsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw DataError(fmt::format("table has no column '{}'", name));
    }
    return static_cast<std::size_t>(it - header.begin());
  }
};

inline TsvTable parse_tsv(std::string_view text) {
  TsvTable t;
  auto ls = lines(text);
  if (ls.empty()) throw DataError("table is empty (no header row)");
  t.header = split(ls[0], '\t');
  for (std::size_t i = 1; i < ls.size(); ++i) {
    if (ls[i].empty()) continue;
    auto fields = split(ls[i], '\t');
    if (fields.size() != t.header.size()) {
      throw DataError(fmt::format("table line {}: expected {} fields, got {}",
                                  i + 1, t.header.size(), fields.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  return t;
}

inline double parse_double(const std::string& s, std::string_view what) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(fmt::format("{}: '{}' is not a number", what, s));
  }
}

// Round-trippable shortest decimal representation.
inline std::string format_real(double v) {
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  if (std::isnan(v)) return "NaN";
  return fmt::format("{}", v);
}

}  // namespace topicnet::detail

#endif  // TOPICNET_DETAIL_IO_HPP_
