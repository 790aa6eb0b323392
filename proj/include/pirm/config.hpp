// Copyright 2026 The pirm-lab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Flat key = value configuration with optional [section] headers.
//
//   # comment
//   lambda = 10
//   partitions = 1,2,3,4,6,12,24
//
//   [scenario sep-min_overlap-high]
//   sigma = 1
//   delta = 0.1
//
//   [sem]
//   sigma_e = 0.2,1,2

#include <cctype>
#include <filesystem>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "pirm/io.hpp"

namespace pirm::config {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Section {
  std::string kind;  // "" for the top level, else the first word of the header
  std::string name;  // rest of the header, may be empty
  std::map<std::string, std::string> values;
};

struct KeyValueConfig {
  Section globals;
  std::vector<Section> sections;  // in file order

  std::vector<const Section*> sections_of(std::string_view kind) const {
    std::vector<const Section*> out;
    for (const auto& s : sections) {
      if (s.kind == kind) out.push_back(&s);
    }
    return out;
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

}  // namespace detail

inline KeyValueConfig parse_config(std::string_view text, const std::string& origin = "<config>") {
  KeyValueConfig cfg;
  Section* current = &cfg.globals;
  std::istringstream is{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + msg);
  };
  while (std::getline(is, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail("unterminated section header");
      const std::string header = detail::trim(std::string_view(line).substr(1, line.size() - 2));
      if (header.empty()) fail("empty section header");
      Section s;
      const auto sp = header.find_first_of(" \t");
      s.kind = header.substr(0, sp);
      s.name = sp == std::string::npos ? "" : detail::trim(header.substr(sp));
      cfg.sections.push_back(std::move(s));
      current = &cfg.sections.back();
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("expected key = value");
    const std::string key = detail::trim(std::string_view(line).substr(0, eq));
    const std::string value = detail::trim(std::string_view(line).substr(eq + 1));
    if (key.empty()) fail("empty key");
    if (!current->values.emplace(key, value).second) fail("duplicate key '" + key + "'");
  }
  return cfg;
}

inline KeyValueConfig load_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_text_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return parse_config(text, path.string());
}

}  // namespace pirm::config
