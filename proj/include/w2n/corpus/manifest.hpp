// Copyright 2026 The w2n Authors
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


// Manifest: UTF-8, one pair per line, TAB-separated
//
//   id <TAB> source <TAB> target [<TAB> labels [<TAB> transcript]]
//
// "-" or an empty field means "absent" for labels and transcript. Relative
// paths resolve against the manifest's directory. Blank lines and lines
// starting with '#' are skipped.

#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "w2n/errors.hpp"
#include "w2n/io/binary.hpp"

namespace w2n {

struct UtterancePair {
  std::string id;
  std::filesystem::path source;
  std::filesystem::path target;
  std::optional<std::filesystem::path> labels;
  std::optional<std::string> transcript;
};

inline std::vector<UtterancePair> parse_manifest(const std::string& text, const std::filesystem::path& base,
                                                 const std::string& source) {
  std::vector<UtterancePair> out;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path q(p);
    return q.is_absolute() ? q : base / q;
  };
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::size_t pos = 0;
    while (true) {
      const auto tab = line.find('\t', pos);
      f.push_back(line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    const std::string where = source + ":" + std::to_string(n);
    if (f.size() < 3 || f.size() > 5) throw DataError(where + ": expected 3 to 5 TAB-separated fields");
    if (f[0].empty() || f[1].empty() || f[2].empty()) throw DataError(where + ": id, source and target are required");
    if (!seen.insert(f[0]).second) throw DataError(where + ": duplicate id '" + f[0] + "'");
    UtterancePair p{f[0], resolve(f[1]), resolve(f[2]), std::nullopt, std::nullopt};
    if (f.size() > 3 && !f[3].empty() && f[3] != "-") p.labels = resolve(f[3]);
    if (f.size() > 4 && !f[4].empty() && f[4] != "-") p.transcript = f[4];
    out.push_back(std::move(p));
  }
  return out;
}

inline std::vector<UtterancePair> read_manifest(const std::filesystem::path& path) {
  const auto bytes = io::read_file(path);
  return parse_manifest(std::string(bytes.begin(), bytes.end()), path.parent_path(), path.string());
}

inline std::string format_manifest(const std::vector<UtterancePair>& pairs) {
  std::string s;
  for (const auto& p : pairs) {
    s += p.id + '\t' + p.source.string() + '\t' + p.target.string() + '\t' +
         (p.labels ? p.labels->string() : std::string("-"));
    if (p.transcript) s += '\t' + *p.transcript;
    s += '\n';
  }
  return s;
}

inline void write_manifest(const std::filesystem::path& path, const std::vector<UtterancePair>& pairs) {
  const std::string s = format_manifest(pairs);
  io::write_file(path, std::vector<std::uint8_t>(s.begin(), s.end()));
}

}  // namespace w2n
