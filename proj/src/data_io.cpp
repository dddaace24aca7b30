// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0

#include "certfair/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace certfair {

using nlohmann::json;

const GroupSchema& default_group_schema() {
  static const GroupSchema schema = {
      {"gender", {"male", "female", "transgender", "non-binary"}},
      {"orientation", {"heterosexual", "gay", "lesbian", "bisexual"}},
  };
  return schema;
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
    } else if (c < 0x80 && ((c >= '!' && c <= '/') || (c >= ':' && c <= '@') ||
                            (c >= '[' && c <= '`') || (c >= '{' && c <= '~'))) {
      continue;
    } else if (c >= 'A' && c <= 'Z') {
      current.push_back(static_cast<char>(c - 'A' + 'a'));
    } else {
      current.push_back(ch);
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

namespace {

[[noreturn]] void corpus_fail(const std::string& path, std::size_t line,
                              const std::string& what) {
  throw CorpusError(path + ":" + std::to_string(line) + ": " + what);
}

Example parse_record(const std::string& text, const std::string& path, std::size_t line,
                     const std::optional<GroupSchema>& schema) {
  json record;
  try {
    record = json::parse(text);
  } catch (const json::parse_error& e) {
    corpus_fail(path, line, std::string("malformed JSON: ") + e.what());
  }
  if (!record.is_object()) corpus_fail(path, line, "record is not an object");
  if (!record.contains("text") || !record["text"].is_string()) {
    corpus_fail(path, line, "missing required string field \"text\"");
  }
  if (!record.contains("label") || !record["label"].is_number_integer() ||
      record["label"].get<long long>() < 0) {
    corpus_fail(path, line, "missing required non-negative integer field \"label\"");
  }
  Example ex;
  ex.tokens = tokenize(record["text"].get<std::string>());
  ex.label = record["label"].get<std::size_t>();
  if (record.contains("groups")) {
    const json& groups = record["groups"];
    if (!groups.is_object()) corpus_fail(path, line, "\"groups\" must be an object");
    for (auto it = groups.begin(); it != groups.end(); ++it) {
      if (!it.value().is_array()) {
        corpus_fail(path, line, "groups axis \"" + it.key() + "\" must be an array");
      }
      std::vector<std::string> names;
      for (const json& g : it.value()) {
        if (!g.is_string()) corpus_fail(path, line, "group names must be strings");
        names.push_back(g.get<std::string>());
      }
      if (schema) {
        auto axis = schema->find(it.key());
        if (axis == schema->end()) corpus_fail(path, line, "unknown group axis \"" + it.key() + "\"");
        for (const auto& name : names) {
          if (std::find(axis->second.begin(), axis->second.end(), name) == axis->second.end()) {
            corpus_fail(path, line, "unknown group \"" + name + "\" on axis \"" + it.key() + "\"");
          }
        }
      }
      ex.groups.emplace(it.key(), std::move(names));
    }
  }
  return ex;
}

}  // namespace

Dataset read_corpus(const std::string& path, const std::optional<GroupSchema>& schema) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open corpus file " + path);
  Dataset dataset;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    dataset.push_back(parse_record(line, path, number, schema));
  }
  return dataset;
}

void write_corpus(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CorpusError("cannot write corpus file " + path);
  for (const Example& ex : dataset) {
    std::string text;
    for (std::size_t i = 0; i < ex.tokens.size(); ++i) {
      if (i > 0) text += ' ';
      text += ex.tokens[i];
    }
    json record = json::object();
    record["text"] = text;
    record["label"] = ex.label;
    json groups = json::object();
    for (const auto& [axis, names] : ex.groups) groups[axis] = names;
    record["groups"] = groups;
    out << record.dump() << '\n';
  }
  if (!out) throw CorpusError("failed writing corpus file " + path);
}

std::size_t class_count(const Dataset& dataset) {
  std::size_t top = 0;
  for (const Example& ex : dataset) top = std::max(top, ex.label);
  return dataset.empty() ? 0 : top + 1;
}

std::vector<std::string> read_word_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open word list " + path);
  std::vector<std::string> words;
  std::string line;
  while (std::getline(in, line)) {
    auto tokens = tokenize(line);
    if (line.starts_with("#") || tokens.empty()) continue;
    words.push_back(tokens.front());
  }
  return words;
}

void write_word_list(const std::vector<std::string>& words, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CorpusError("cannot write word list " + path);
  for (const auto& w : words) out << w << '\n';
}

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, end);
}

}  // namespace certfair
