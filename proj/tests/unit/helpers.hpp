#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "mgcs/corpus/types.hpp"
#include "mgcs/extract/extract.hpp"

namespace mgcs::test {

inline const nlohmann::json& oracles() {
  static const nlohmann::json j = [] {
    std::ifstream in(MGCS_ORACLES_FILE);
    return nlohmann::json::parse(in);
  }();
  return j;
}

inline std::string fixture_path(const std::string& rel) { return std::string(MGCS_FIXTURES_DIR) + "/" + rel; }

inline SourceFunction python_function(std::string source, std::string id = "t.py:1:f") {
  SourceFunction f;
  f.id = std::move(id);
  f.language = "python";
  f.source_text = std::move(source);
  return f;
}

inline const Snippet& snippet_by_id(const FunctionAnalysis& a, std::string_view suffix) {
  for (const auto& s : a.snippets)
    if (s.snippet_id.ends_with(suffix)) return s;
  throw std::runtime_error("no snippet " + std::string(suffix));
}

inline std::string text_of(const FunctionAnalysis& a, const Snippet& s) {
  return a.function.source_text.substr(s.bytes.start, s.bytes.size());
}

}  // namespace mgcs::test
