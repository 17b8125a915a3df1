#include "mgcs/extract/grammar.hpp"

#include <json.hpp>
#include <tree_sitter/api.h>

#include "mgcs/common/error.hpp"
#include "mgcs/corpus/jsonl.hpp"

extern "C" {
const TSLanguage* tree_sitter_python(void);
const TSLanguage* tree_sitter_javascript(void);
}

namespace mgcs {

namespace detail {
extern const std::string_view kBuiltinPythonGrammar;
extern const std::string_view kBuiltinJavascriptGrammar;
}  // namespace detail

namespace {

template <typename Set>
Set string_set(const nlohmann::json& j, const char* key) {
  Set out;
  if (!j.contains(key)) return out;
  for (const auto& v : j.at(key)) out.insert(out.end(), v.get<std::string>());
  return out;
}

}  // namespace

GrammarConfig GrammarConfig::from_json(std::string_view text) {
  GrammarConfig cfg;
  try {
    const auto j = nlohmann::json::parse(text);
    cfg.language = j.at("language").get<std::string>();
    cfg.extensions = string_set<std::vector<std::string>>(j, "extensions");
    cfg.function_kinds = string_set<std::set<std::string>>(j, "functions");
    cfg.body_field = j.value("body_field", cfg.body_field);
    cfg.name_field = j.value("name_field", cfg.name_field);
    cfg.comment_kinds = string_set<std::set<std::string>>(j, "comments");
    cfg.skip_fields = string_set<std::set<std::string>>(j, "skip_fields");
    if (j.contains("docstring")) {
      const auto& d = j.at("docstring");
      const auto pos = d.at("position").get<std::string>();
      if (pos == "body_first") cfg.docstring_position = DocstringPosition::BodyFirst;
      else if (pos == "before_function") cfg.docstring_position = DocstringPosition::BeforeFunction;
      else if (pos == "none") cfg.docstring_position = DocstringPosition::None;
      else throw Error(ErrorCode::ConfigError, "unknown docstring position '" + pos + "'");
      cfg.docstring_kinds = string_set<std::set<std::string>>(d, "kinds");
    }
    for (const auto& [kind, spec] : j.at("nodes").items()) {
      std::string role;
      BlockRule rule;
      if (spec.is_string()) {
        role = spec.get<std::string>();
      } else {
        role = spec.at("role").get<std::string>();
        if (spec.contains("head_field")) rule.head_field = spec.at("head_field").get<std::string>();
      }
      if (role == "block") cfg.blocks.emplace(kind, rule);
      else if (role == "statement") cfg.statements.insert(kind);
      else throw Error(ErrorCode::ConfigError, "node '" + kind + "': unknown role '" + role + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("grammar config: ") + e.what());
  }
  if (cfg.function_kinds.empty()) throw Error(ErrorCode::ConfigError, "grammar config declares no function kinds");
  return cfg;
}

GrammarConfig GrammarConfig::load(const std::filesystem::path& path) { return from_json(read_file(path)); }

const TSLanguage* find_ts_language(std::string_view language) noexcept {
  if (language == "python") return tree_sitter_python();
  if (language == "javascript") return tree_sitter_javascript();
  return nullptr;
}

GrammarRegistry GrammarRegistry::builtin() {
  GrammarRegistry registry;
  registry.add(GrammarConfig::from_json(detail::kBuiltinPythonGrammar));
  registry.add(GrammarConfig::from_json(detail::kBuiltinJavascriptGrammar));
  return registry;
}

void GrammarRegistry::add(GrammarConfig config) {
  if (!find_ts_language(config.language))
    throw Error(ErrorCode::UnsupportedLanguage, "no parser compiled in for '" + config.language + "'");
  auto name = config.language;
  configs_.insert_or_assign(std::move(name), std::move(config));
}

const GrammarConfig& GrammarRegistry::for_language(std::string_view language) const {
  if (const auto* cfg = find_language(language)) return *cfg;
  throw Error(ErrorCode::UnsupportedLanguage, "no grammar config for '" + std::string(language) + "'");
}

const GrammarConfig* GrammarRegistry::find_language(std::string_view language) const noexcept {
  auto it = configs_.find(language);
  return it == configs_.end() ? nullptr : &it->second;
}

const GrammarConfig* GrammarRegistry::for_extension(std::string_view extension) const noexcept {
  for (const auto& [_, cfg] : configs_)
    for (const auto& ext : cfg.extensions)
      if (ext == extension) return &cfg;
  return nullptr;
}

std::vector<std::string> GrammarRegistry::languages() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : configs_) out.push_back(name);
  return out;
}

}  // namespace mgcs
