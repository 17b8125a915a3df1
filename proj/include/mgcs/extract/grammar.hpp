#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

struct TSLanguage;

namespace mgcs {

enum class DocstringPosition {
  None,
  BodyFirst,       // first statement of the body is a bare string (Python)
  BeforeFunction,  // comment block directly above the definition (JSDoc)
};

struct BlockRule {
  // When set and the node continues past this field's child (an `else`
  // branch, say), an extra nested block covering the node up to the end of
  // that child is emitted as well.
  std::optional<std::string> head_field;
};

/// Declarative description of which concrete-syntax node kinds become
/// function/block/statement snippets and where docstrings live. Loaded from
/// JSON so new languages need a grammar, not new code.
struct GrammarConfig {
  std::string language;
  std::vector<std::string> extensions;
  std::set<std::string> function_kinds;
  std::string body_field = "body";
  std::string name_field = "name";
  std::set<std::string> comment_kinds;
  DocstringPosition docstring_position = DocstringPosition::None;
  std::set<std::string> docstring_kinds;
  std::map<std::string, BlockRule> blocks;
  std::set<std::string> statements;
  // Fields whose subtrees never yield snippets (e.g. a for-loop initializer).
  std::set<std::string> skip_fields;

  static GrammarConfig from_json(std::string_view text);
  static GrammarConfig load(const std::filesystem::path& path);

  bool is_block(std::string_view kind) const { return blocks.contains(std::string(kind)); }
  bool is_statement(std::string_view kind) const { return statements.contains(std::string(kind)); }
  bool is_function(std::string_view kind) const { return function_kinds.contains(std::string(kind)); }
  bool is_comment(std::string_view kind) const { return comment_kinds.contains(std::string(kind)); }
};

/// Parser tables compiled into the binary, keyed by language name.
const TSLanguage* find_ts_language(std::string_view language) noexcept;

class GrammarRegistry {
 public:
  /// Configs shipped in grammars/ (python, javascript).
  static GrammarRegistry builtin();

  /// Adds or replaces the config for its language.
  void add(GrammarConfig config);

  /// Throws UnsupportedLanguage when missing.
  const GrammarConfig& for_language(std::string_view language) const;
  const GrammarConfig* find_language(std::string_view language) const noexcept;
  const GrammarConfig* for_extension(std::string_view extension) const noexcept;

  std::vector<std::string> languages() const;

 private:
  std::map<std::string, GrammarConfig, std::less<>> configs_;
};

}  // namespace mgcs
