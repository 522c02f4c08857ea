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


#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "w2n/errors.hpp"
#include "w2n/io/binary.hpp"

namespace w2n {

/// Dense triphone ids 0..P-1 in first-seen order. Saved one token per line,
/// line number = id.
class TriphoneVocab {
 public:
  std::size_t size() const noexcept { return tokens_.size(); }
  bool contains(const std::string& token) const { return ids_.count(token) != 0; }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  std::int32_t id(const std::string& token) const {
    auto it = ids_.find(token);
    if (it == ids_.end()) throw DataError("unknown triphone '" + token + "'");
    return it->second;
  }
  const std::string& token(std::int32_t id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
      throw DataError("triphone id " + std::to_string(id) + " outside vocabulary of " + std::to_string(size()));
    }
    return tokens_[static_cast<std::size_t>(id)];
  }

  /// Id of `token`, appending it when new.
  std::int32_t add(const std::string& token) {
    validate_token(token);
    auto [it, inserted] = ids_.try_emplace(token, static_cast<std::int32_t>(tokens_.size()));
    if (inserted) tokens_.push_back(token);
    return it->second;
  }

  std::string to_text() const {
    std::string s;
    for (const auto& t : tokens_) s += t + '\n';
    return s;
  }

  static TriphoneVocab from_text(const std::string& text, const std::string& source) {
    TriphoneVocab v;
    std::istringstream in(text);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
      ++n;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) throw FormatError(source + ":" + std::to_string(n) + ": empty vocabulary entry");
      if (v.contains(line)) throw FormatError(source + ":" + std::to_string(n) + ": duplicate token '" + line + "'");
      v.add(line);
    }
    return v;
  }

  void save(const std::filesystem::path& path) const {
    const std::string s = to_text();
    io::write_file(path, std::vector<std::uint8_t>(s.begin(), s.end()));
  }

  static TriphoneVocab load(const std::filesystem::path& path) {
    const auto bytes = io::read_file(path);
    return from_text(std::string(bytes.begin(), bytes.end()), path.string());
  }

  friend bool operator==(const TriphoneVocab& a, const TriphoneVocab& b) { return a.tokens_ == b.tokens_; }

 private:
  static void validate_token(const std::string& t) {
    if (t.empty()) throw DataError("empty triphone token");
    if (t.find_first_of("\n\r") != std::string::npos) throw DataError("triphone token contains a line break");
  }
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> ids_;
};

/// Per-frame ids from label text (one token per line, surrounding blanks
/// ignored). Unknown tokens are appended when `grow`, otherwise rejected.
inline std::vector<std::int32_t> parse_labels(const std::string& text, TriphoneVocab& vocab, bool grow,
                                              const std::string& source) {
  std::vector<std::int32_t> ids;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) throw DataError(source + ":" + std::to_string(n) + ": empty label line");
    const std::string tok = line.substr(b, line.find_last_not_of(" \t\r") - b + 1);
    if (grow) {
      ids.push_back(vocab.add(tok));
    } else if (!vocab.contains(tok)) {
      throw DataError(source + ":" + std::to_string(n) + ": triphone '" + tok + "' not in vocabulary");
    } else {
      ids.push_back(vocab.id(tok));
    }
  }
  if (ids.empty()) throw DataError(source + ": no labels");
  return ids;
}

inline std::vector<std::int32_t> read_labels(const std::filesystem::path& path, TriphoneVocab& vocab, bool grow) {
  const auto bytes = io::read_file(path);
  return parse_labels(std::string(bytes.begin(), bytes.end()), vocab, grow, path.string());
}

}  // namespace w2n
