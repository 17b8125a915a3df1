#include "mgcs/extract/segmenter.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cstring>
#include <functional>
#include <memory>

#include <tree_sitter/api.h>

#include "mgcs/common/error.hpp"

namespace mgcs {
namespace {

struct ParserDeleter {
  void operator()(TSParser* p) const { ts_parser_delete(p); }
};
struct TreeDeleter {
  void operator()(TSTree* t) const { ts_tree_delete(t); }
};

class LineTable {
 public:
  explicit LineTable(std::string_view text) : size_(text.size()) {
    starts_.push_back(0);
    for (std::size_t i = 0; i < text.size(); ++i)
      if (text[i] == '\n') starts_.push_back(i + 1);
  }

  std::size_t line_of(std::size_t pos) const {
    return static_cast<std::size_t>(std::ranges::upper_bound(starts_, pos) - starts_.begin());
  }
  std::size_t line_start(std::size_t line) const { return starts_.at(line - 1); }
  std::size_t line_end(std::size_t line) const {
    return line < starts_.size() ? starts_[line] - 1 : size_;
  }
  std::size_t count() const { return starts_.size(); }

  LineSpan lines_of(ByteSpan b) const {
    return {line_of(b.start), line_of(b.end > b.start ? b.end - 1 : b.start)};
  }

 private:
  std::vector<std::size_t> starts_;
  std::size_t size_;
};

ByteSpan span_of(TSNode n) { return {ts_node_start_byte(n), ts_node_end_byte(n)}; }

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

template <typename Fn>
void for_each_named_child(TSNode node, Fn&& fn) {
  TSTreeCursor cursor = ts_tree_cursor_new(node);
  if (ts_tree_cursor_goto_first_child(&cursor)) {
    do {
      TSNode child = ts_tree_cursor_current_node(&cursor);
      if (ts_node_is_named(child)) fn(child, ts_tree_cursor_current_field_name(&cursor));
    } while (ts_tree_cursor_goto_next_sibling(&cursor));
  }
  ts_tree_cursor_delete(&cursor);
}

/// One parsed function: owns the tree and knows where the definition and
/// its docstring sit.
class ParsedFunction {
 public:
  ParsedFunction(const SourceFunction& func, const GrammarConfig& grammar)
      : func_(func), grammar_(grammar), lines_(func.source_text) {
    const TSLanguage* language = find_ts_language(grammar.language);
    if (!language) throw Error(ErrorCode::UnsupportedLanguage, "no parser for '" + grammar.language + "'");
    if (!func.language.empty() && func.language != grammar.language)
      throw Error(ErrorCode::UnsupportedLanguage,
                  func.id + ": function language '" + func.language + "' vs grammar '" + grammar.language + "'");
    std::unique_ptr<TSParser, ParserDeleter> parser(ts_parser_new());
    ts_parser_set_language(parser.get(), language);
    tree_.reset(ts_parser_parse_string(parser.get(), nullptr, func.source_text.data(),
                                       static_cast<uint32_t>(func.source_text.size())));
    if (!tree_) throw Error(ErrorCode::ParseError, func.id + ": parser returned no tree");
    root_ = ts_tree_root_node(tree_.get());
    if (ts_node_has_error(root_)) throw Error(ErrorCode::ParseError, func.id + ": syntax error");
    if (!find_function()) throw Error(ErrorCode::ParseError, func.id + ": no function definition found");
    find_docstring_statement();
  }

  const SourceFunction& func() const { return func_; }
  const GrammarConfig& grammar() const { return grammar_; }
  const LineTable& lines() const { return lines_; }
  TSNode root() const { return root_; }
  TSNode function() const { return function_; }
  std::optional<ByteSpan> docstring_statement() const { return doc_stmt_; }
  std::optional<ByteSpan> docstring_literal() const { return doc_literal_; }
  std::string_view text(ByteSpan b) const { return std::string_view(func_.source_text).substr(b.start, b.size()); }

 private:
  bool find_function() {
    std::vector<TSNode> stack{root_};
    while (!stack.empty()) {
      TSNode n = stack.back();
      stack.pop_back();
      if (grammar_.is_function(ts_node_type(n))) {
        function_ = n;
        return true;
      }
      std::vector<TSNode> kids;
      for_each_named_child(n, [&](TSNode c, const char*) { kids.push_back(c); });
      for (auto it = kids.rbegin(); it != kids.rend(); ++it) stack.push_back(*it);
    }
    return false;
  }

  void find_docstring_statement() {
    if (grammar_.docstring_position != DocstringPosition::BodyFirst) return;
    TSNode body = ts_node_child_by_field_name(function_, grammar_.body_field.c_str(),
                                              static_cast<uint32_t>(grammar_.body_field.size()));
    if (ts_node_is_null(body)) return;
    std::optional<TSNode> first;
    for_each_named_child(body, [&](TSNode c, const char*) {
      if (!first && !grammar_.is_comment(ts_node_type(c))) first = c;
    });
    if (!first || !grammar_.is_statement(ts_node_type(*first)) || ts_node_named_child_count(*first) != 1) return;
    TSNode literal = ts_node_named_child(*first, 0);
    if (!grammar_.docstring_kinds.contains(ts_node_type(literal))) return;
    doc_stmt_ = span_of(*first);
    doc_literal_ = span_of(literal);
  }

  const SourceFunction& func_;
  const GrammarConfig& grammar_;
  LineTable lines_;
  std::unique_ptr<TSTree, TreeDeleter> tree_;
  TSNode root_{};
  TSNode function_{};
  std::optional<ByteSpan> doc_stmt_;
  std::optional<ByteSpan> doc_literal_;
};

class Segmenter {
 public:
  explicit Segmenter(const ParsedFunction& parsed) : p_(parsed) {}

  Segmentation run() {
    const std::size_t root = emit(Granularity::Function, span_of(p_.function()), std::nullopt);
    visit_children(p_.function(), [root](TSNode) { return root; });
    assign_ids();
    Segmentation seg;
    seg.hierarchy = HierarchyIndex::build(snippets_);
    seg.snippets = std::move(snippets_);
    return seg;
  }

 private:
  std::size_t emit(Granularity g, ByteSpan span, std::optional<std::size_t> parent) {
    Snippet s;
    s.function_id = p_.func().id;
    s.granularity = g;
    s.bytes = span;
    s.lines = p_.lines().lines_of(span);
    snippets_.push_back(std::move(s));
    parents_.push_back(parent);
    return snippets_.size() - 1;
  }

  void visit_children(TSNode node, const std::function<std::size_t(TSNode)>& parent_of) {
    for_each_named_child(node, [&](TSNode child, const char* field) {
      if (field && p_.grammar().skip_fields.contains(field)) return;
      visit(child, parent_of(child));
    });
  }

  void visit(TSNode node, std::size_t parent) {
    const GrammarConfig& g = p_.grammar();
    const std::string_view kind = ts_node_type(node);
    const ByteSpan span = span_of(node);
    if (g.is_function(kind) || g.is_comment(kind)) return;

    if (auto it = g.blocks.find(std::string(kind)); it != g.blocks.end()) {
      const std::size_t full = emit(Granularity::Block, span, parent);
      if (const auto& field = it->second.head_field) {
        TSNode head = ts_node_child_by_field_name(node, field->c_str(), static_cast<uint32_t>(field->size()));
        if (!ts_node_is_null(head) && ts_node_end_byte(head) < span.end) {
          const ByteSpan head_span{span.start, ts_node_end_byte(head)};
          const std::size_t h = emit(Granularity::Block, head_span, full);
          visit_children(node, [&](TSNode c) { return ts_node_start_byte(c) < head_span.end ? h : full; });
          return;
        }
      }
      visit_children(node, [full](TSNode) { return full; });
      return;
    }

    if (g.is_statement(kind)) {
      if (p_.docstring_statement() == span) return;
      const LineSpan lines = p_.lines().lines_of(span);
      // Multi-line statements stay opaque; their tokens count toward the parent.
      if (lines.start_line == lines.end_line) emit(Granularity::Statement, span, parent);
      return;
    }

    visit_children(node, [parent](TSNode) { return parent; });
  }

  void assign_ids() {
    std::array<std::size_t, kGranularityCount> counters{};
    static constexpr std::array<char, kGranularityCount> kTags{'F', 'B', 'S'};
    for (auto& s : snippets_) {
      const auto g = static_cast<std::size_t>(s.granularity);
      s.snippet_id = s.function_id + "::" + kTags[g] + std::to_string(counters[g]++);
    }
    for (std::size_t i = 0; i < snippets_.size(); ++i)
      if (parents_[i]) snippets_[i].parent_id = snippets_[*parents_[i]].snippet_id;
  }

  const ParsedFunction& p_;
  std::vector<Snippet> snippets_;
  std::vector<std::optional<std::size_t>> parents_;
};

struct RawComment {
  ByteSpan span;
  LineSpan lines;
  std::string text;
};

std::vector<ByteSpan> collect_comment_nodes(const ParsedFunction& p) {
  std::vector<ByteSpan> out;
  std::vector<TSNode> stack{p.root()};
  while (!stack.empty()) {
    TSNode n = stack.back();
    stack.pop_back();
    if (p.grammar().is_comment(ts_node_type(n))) {
      out.push_back(span_of(n));
      continue;
    }
    for_each_named_child(n, [&](TSNode c, const char*) { stack.push_back(c); });
  }
  std::ranges::sort(out, {}, &ByteSpan::start);
  return out;
}

struct CommentScan {
  std::vector<CommentRecord> records;
  std::vector<ByteSpan> masked;
};

CommentScan scan_comments(const ParsedFunction& p) {
  const auto& text = p.func().source_text;
  const auto& lines = p.lines();
  const ByteSpan fn = span_of(p.function());
  const std::size_t fn_line = lines.line_of(fn.start);

  CommentScan scan;
  scan.masked = collect_comment_nodes(p);
  if (auto lit = p.docstring_literal()) {
    scan.masked.push_back(*lit);
    std::ranges::sort(scan.masked, {}, &ByteSpan::start);
  }

  // Per-line flag: holds a byte outside whitespace and outside every comment.
  std::vector<bool> has_code(lines.count() + 2, false);
  {
    std::size_t m = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
      while (m < scan.masked.size() && scan.masked[m].end <= i) ++m;
      const bool in_comment = m < scan.masked.size() && scan.masked[m].contains(i);
      if (!in_comment && !is_space(text[i])) has_code[lines.line_of(i)] = true;
    }
  }
  auto next_code_line = [&](std::size_t after) -> std::size_t {
    for (std::size_t l = after + 1; l <= lines.count(); ++l)
      if (has_code[l]) return l;
    return 0;
  };
  auto shares_line_with_code = [&](ByteSpan span) {
    const LineSpan ls = lines.lines_of(span);
    for (std::size_t i = lines.line_start(ls.start_line); i < span.start; ++i)
      if (!is_space(text[i])) return true;
    for (std::size_t i = span.end; i < lines.line_end(ls.end_line); ++i)
      if (!is_space(text[i])) return true;
    return false;
  };

  std::vector<RawComment> header;   // comment chain right above the definition
  std::vector<RawComment> inside;
  for (const ByteSpan& c : collect_comment_nodes(p)) {
    RawComment rc{c, lines.lines_of(c), normalize_comment(p.text(c))};
    if (c.start >= fn.start && c.start < fn.end) inside.push_back(std::move(rc));
    else if (c.end <= fn.start) header.push_back(std::move(rc));
  }

  auto push = [&](CommentKind kind, std::string body, std::size_t first, std::size_t last) {
    if (body.empty()) return;
    CommentRecord r;
    r.function_id = p.func().id;
    r.kind = kind;
    r.text = std::move(body);
    r.anchor_line = first;
    r.last_line = last;
    r.next_code_line = next_code_line(last);
    scan.records.push_back(std::move(r));
  };
  auto join = [](std::string& acc, const std::string& piece) {
    if (piece.empty()) return;
    if (!acc.empty()) acc += ' ';
    acc += piece;
  };

  if (p.grammar().docstring_position == DocstringPosition::BodyFirst) {
    if (auto lit = p.docstring_literal()) {
      const LineSpan ls = lines.lines_of(*lit);
      push(CommentKind::Docstring, normalize_comment(p.text(*lit)), ls.start_line, ls.end_line);
    }
  } else if (p.grammar().docstring_position == DocstringPosition::BeforeFunction) {
    std::size_t expect = fn_line - 1;
    std::vector<const RawComment*> chain;
    for (auto it = header.rbegin(); it != header.rend(); ++it) {
      if (expect == 0 || it->lines.end_line != expect || shares_line_with_code(it->span)) break;
      chain.push_back(&*it);
      expect = it->lines.start_line - 1;
    }
    if (!chain.empty()) {
      std::string body;
      for (auto it = chain.rbegin(); it != chain.rend(); ++it) join(body, (*it)->text);
      push(CommentKind::Docstring, std::move(body), chain.back()->lines.start_line, chain.front()->lines.end_line);
    }
  }

  // Whole-line comments on consecutive lines merge into one inline record.
  std::string group;
  std::size_t group_first = 0, group_last = 0;
  bool in_group = false;
  auto flush = [&] {
    if (in_group) push(CommentKind::Inline, std::move(group), group_first, group_last);
    group.clear();
    in_group = false;
  };
  for (const auto& c : inside) {
    if (shares_line_with_code(c.span)) {
      flush();
      push(CommentKind::Trailing, c.text, c.lines.start_line, c.lines.end_line);
      continue;
    }
    if (in_group && c.lines.start_line == group_last + 1) {
      join(group, c.text);
      group_last = c.lines.end_line;
      continue;
    }
    flush();
    in_group = true;
    group = c.text;
    group_first = c.lines.start_line;
    group_last = c.lines.end_line;
  }
  flush();

  std::ranges::stable_sort(scan.records, [](const CommentRecord& a, const CommentRecord& b) {
    if ((a.kind == CommentKind::Docstring) != (b.kind == CommentKind::Docstring))
      return a.kind == CommentKind::Docstring;
    return a.anchor_line < b.anchor_line;
  });
  for (std::size_t i = 0; i < scan.records.size(); ++i)
    scan.records[i].comment_id = p.func().id + "::C" + std::to_string(i);
  return scan;
}

std::string strip_string_literal(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size() && s[i] != '\0' && std::strchr("rRuUbBfF", s[i]) != nullptr) ++i;
  s.remove_prefix(i);
  for (std::string_view q : {"\"\"\"", "'''", "\"", "'"}) {
    if (s.size() >= 2 * q.size() && s.starts_with(q) && s.ends_with(q)) {
      s.remove_prefix(q.size());
      s.remove_suffix(q.size());
      break;
    }
  }
  return std::string(s);
}

std::string strip_block_comment(std::string_view s) {
  s.remove_prefix(2);
  if (s.ends_with("*/")) s.remove_suffix(2);
  std::string out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t nl = s.find('\n', pos);
    if (nl == std::string_view::npos) nl = s.size();
    std::string_view line = s.substr(pos, nl - pos);
    while (!line.empty() && is_space(line.front())) line.remove_prefix(1);
    while (!line.empty() && line.front() == '*') line.remove_prefix(1);
    out.append(line);
    out.push_back(' ');
    pos = nl + 1;
  }
  return out;
}

}  // namespace

std::string normalize_comment(std::string_view raw) {
  std::string body;
  if (raw.starts_with("/*")) {
    body = strip_block_comment(raw);
  } else if (raw.starts_with("//")) {
    while (raw.starts_with("/")) raw.remove_prefix(1);
    body = std::string(raw);
  } else if (raw.starts_with("#")) {
    while (raw.starts_with("#")) raw.remove_prefix(1);
    body = std::string(raw);
  } else {
    body = strip_string_literal(raw);
  }
  std::string out;
  bool pending_space = false;
  for (char c : body) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  return out;
}

Segmentation parse_and_segment(const SourceFunction& func, const GrammarConfig& grammar) {
  ParsedFunction parsed(func, grammar);
  return Segmenter(parsed).run();
}

std::vector<CommentRecord> classify_comments(const SourceFunction& func, const GrammarConfig& grammar) {
  ParsedFunction parsed(func, grammar);
  return scan_comments(parsed).records;
}

FunctionAnalysis analyze_function(const SourceFunction& func, const GrammarConfig& grammar) {
  ParsedFunction parsed(func, grammar);
  Segmentation seg = Segmenter(parsed).run();
  CommentScan scan = scan_comments(parsed);
  FunctionAnalysis out;
  out.function = func;
  out.snippets = std::move(seg.snippets);
  out.hierarchy = std::move(seg.hierarchy);
  out.comments = std::move(scan.records);
  out.comment_spans = std::move(scan.masked);
  std::ranges::sort(out.comment_spans, {}, &ByteSpan::start);
  return out;
}

std::vector<AlignmentPair> align_comments(std::span<const CommentRecord> comments,
                                          std::span<const Snippet> snippets,
                                          const HierarchyIndex& hierarchy, std::size_t max_candidates,
                                          AlignStats* stats) {
  std::vector<AlignmentPair> pairs;
  if (snippets.empty()) return pairs;
  const std::size_t root = hierarchy.root();

  for (const auto& c : comments) {
    std::vector<std::size_t> chain;
    Granularity g = Granularity::Function;
    switch (c.kind) {
      case CommentKind::Docstring:
        chain.push_back(root);
        break;
      case CommentKind::Trailing: {
        g = Granularity::Statement;
        std::optional<std::size_t> best;
        for (std::size_t i = 0; i < snippets.size(); ++i) {
          const auto& s = snippets[i];
          if (s.granularity == Granularity::Statement && s.lines.start_line == c.anchor_line &&
              (!best || s.bytes.start > snippets[*best].bytes.start))
            best = i;
        }
        if (best) chain.push_back(*best);
        break;
      }
      case CommentKind::Inline: {
        g = Granularity::Block;
        if (c.next_code_line == 0) break;
        std::optional<std::size_t> innermost;
        for (std::size_t i = 0; i < snippets.size(); ++i) {
          const auto& s = snippets[i];
          if (s.granularity != Granularity::Block || s.lines.start_line != c.next_code_line) continue;
          if (!innermost || hierarchy.node(i).ancestors.size() > hierarchy.node(*innermost).ancestors.size())
            innermost = i;
        }
        std::optional<std::size_t> cur = innermost;
        while (cur && chain.size() < max_candidates) {
          const auto& s = snippets[*cur];
          if (s.granularity != Granularity::Block || s.lines.start_line != c.next_code_line) break;
          chain.push_back(*cur);
          cur = hierarchy.node(*cur).parent;
        }
        break;
      }
    }
    const auto k = static_cast<std::size_t>(c.kind);
    if (chain.empty()) {
      if (stats) ++stats->unaligned[k];
      continue;
    }
    if (stats) ++stats->aligned[k];
    AlignmentPair pair;
    pair.pair_id = c.function_id + "::P" + std::to_string(pairs.size());
    pair.comment = c;
    pair.granularity = g;
    for (std::size_t i : chain) pair.candidates.push_back(snippets[i].snippet_id);
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

}  // namespace mgcs
