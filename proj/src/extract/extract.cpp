#include "mgcs/extract/extract.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <memory>
#include <set>
#include <tuple>
#include <unordered_map>

#include <spdlog/spdlog.h>
#include <tree_sitter/api.h>

#include "mgcs/common/error.hpp"
#include "mgcs/common/parallel.hpp"
#include "mgcs/corpus/jsonl.hpp"

namespace mgcs {
namespace {

namespace fs = std::filesystem;

struct ParserDeleter {
  void operator()(TSParser* p) const { ts_parser_delete(p); }
};
struct TreeDeleter {
  void operator()(TSTree* t) const { ts_tree_delete(t); }
};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::size_t line_start_of(std::string_view text, std::size_t pos) {
  while (pos > 0 && text[pos - 1] != '\n') --pos;
  return pos;
}

std::string dedent(std::string_view text, std::size_t indent) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    const std::size_t end = nl == std::string_view::npos ? text.size() : nl + 1;
    std::size_t skip = 0;
    while (skip < indent && pos + skip < end && (text[pos + skip] == ' ' || text[pos + skip] == '\t')) ++skip;
    out.append(text.substr(pos + skip, end - pos - skip));
    pos = end;
  }
  return out;
}

struct FileScan {
  std::vector<SourceFunction> functions;
  bool failed = false;
};

FileScan scan_file(const fs::path& file, const fs::path& root, const GrammarConfig& grammar) {
  FileScan scan;
  const std::string text = read_file(file);
  std::unique_ptr<TSParser, ParserDeleter> parser(ts_parser_new());
  ts_parser_set_language(parser.get(), find_ts_language(grammar.language));
  std::unique_ptr<TSTree, TreeDeleter> tree(
      ts_parser_parse_string(parser.get(), nullptr, text.data(), static_cast<uint32_t>(text.size())));
  if (!tree) {
    scan.failed = true;
    return scan;
  }
  const TSNode root_node = ts_tree_root_node(tree.get());
  if (ts_node_has_error(root_node)) {
    scan.failed = true;
    return scan;
  }

  std::vector<TSNode> functions;
  std::vector<std::pair<std::size_t, std::size_t>> comments;  // byte spans
  std::vector<TSNode> stack{root_node};
  while (!stack.empty()) {
    TSNode n = stack.back();
    stack.pop_back();
    const char* kind = ts_node_type(n);
    if (grammar.is_comment(kind)) {
      comments.emplace_back(ts_node_start_byte(n), ts_node_end_byte(n));
      continue;
    }
    if (grammar.is_function(kind)) {
      functions.push_back(n);
      continue;
    }
    const uint32_t count = ts_node_named_child_count(n);
    for (uint32_t i = count; i > 0; --i) stack.push_back(ts_node_named_child(n, i - 1));
  }
  std::ranges::sort(functions, {}, [](TSNode n) { return ts_node_start_byte(n); });
  std::ranges::sort(comments);

  const std::string rel = fs::relative(file, root).generic_string();
  const std::string repo = root.filename().empty() ? root.parent_path().filename().string() : root.filename().string();
  for (TSNode fn : functions) {
    const std::size_t fn_start = ts_node_start_byte(fn);
    const std::size_t fn_end = ts_node_end_byte(fn);
    std::size_t start = line_start_of(text, fn_start);
    std::size_t indent = 0;
    while (start + indent < fn_start && (text[start + indent] == ' ' || text[start + indent] == '\t')) ++indent;

    if (grammar.docstring_position == DocstringPosition::BeforeFunction) {
      // Pull in the comment block sitting directly above the definition.
      std::size_t boundary = start;
      for (auto it = comments.rbegin(); it != comments.rend(); ++it) {
        if (it->second > boundary) continue;
        const std::string_view gap(text.data() + it->second, boundary - it->second);
        if (std::ranges::count(gap, '\n') > 1 || !std::ranges::all_of(gap, is_space)) break;
        const std::size_t ls = line_start_of(text, it->first);
        if (!std::ranges::all_of(std::string_view(text.data() + ls, it->first - ls), is_space)) break;
        boundary = ls;
      }
      start = boundary;
    }

    TSNode name = ts_node_child_by_field_name(fn, grammar.name_field.c_str(),
                                              static_cast<uint32_t>(grammar.name_field.size()));
    const std::string fn_name =
        ts_node_is_null(name) ? "anonymous"
                              : text.substr(ts_node_start_byte(name), ts_node_end_byte(name) - ts_node_start_byte(name));
    const std::size_t line = static_cast<std::size_t>(ts_node_start_point(fn).row) + 1;

    SourceFunction f;
    f.id = rel + ":" + std::to_string(line) + ":" + fn_name;
    f.language = grammar.language;
    f.repo = repo;
    f.path = rel;
    f.source_text = dedent(std::string_view(text).substr(start, fn_end - start), indent);
    if (f.source_text.empty() || f.source_text.back() != '\n') f.source_text.push_back('\n');
    scan.functions.push_back(std::move(f));
  }
  return scan;
}

}  // namespace

std::vector<SourceFunction> collect_functions(const fs::path& root, const GrammarRegistry& grammars,
                                              ExtractStats* stats, unsigned jobs) {
  if (!fs::exists(root)) throw Error(ErrorCode::IoError, "no such input: " + root.string());
  std::vector<fs::path> files;
  if (fs::is_regular_file(root)) {
    files.push_back(root);
  } else {
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
      if (entry.is_regular_file() && grammars.for_extension(entry.path().extension().string()))
        files.push_back(entry.path());
    }
  }
  std::ranges::sort(files);
  const fs::path base = fs::is_regular_file(root) ? root.parent_path() : root;

  std::vector<FileScan> scans(files.size());
  parallel_for(files.size(), jobs, [&](std::size_t i) {
    const auto* grammar = grammars.for_extension(files[i].extension().string());
    if (!grammar) return;
    scans[i] = scan_file(files[i], base, *grammar);
  });

  std::vector<SourceFunction> out;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (scans[i].failed) {
      spdlog::warn("skipping {}: does not parse", files[i].string());
      if (stats) ++stats->skipped_functions;
      continue;
    }
    for (auto& f : scans[i].functions) out.push_back(std::move(f));
  }
  if (stats) stats->files += files.size();
  return out;
}

std::vector<CorpusRecord> to_records(const FunctionAnalysis& analysis, std::span<const AlignmentPair> pairs) {
  std::unordered_map<std::string_view, const Snippet*> by_id;
  for (const auto& s : analysis.snippets) by_id.emplace(s.snippet_id, &s);
  std::vector<CorpusRecord> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    CorpusRecord r;
    r.pair_id = p.pair_id;
    r.function_id = analysis.function.id;
    r.language = analysis.function.language;
    r.comment_text = p.comment.text;
    r.comment_kind = p.comment.kind;
    r.granularity = p.granularity;
    for (const auto& id : p.candidates) {
      const Snippet& s = *by_id.at(id);
      r.candidate_spans.push_back({s.snippet_id, s.bytes, s.lines, s.parent_id});
    }
    r.function_source = analysis.function.source_text;
    out.push_back(std::move(r));
  }
  return out;
}

ExtractResult extract_corpus(std::span<const SourceFunction> functions, const GrammarRegistry& grammars,
                             const ExtractOptions& options) {
  std::vector<const SourceFunction*> order;
  order.reserve(functions.size());
  for (const auto& f : functions) order.push_back(&f);
  std::ranges::sort(order, [](const SourceFunction* a, const SourceFunction* b) {
    return std::tie(a->path, a->id) < std::tie(b->path, b->id);
  });

  struct Job {
    std::vector<CorpusRecord> records;
    AlignStats align;
    std::size_t comments = 0;
    bool skipped = false;
  };
  std::vector<Job> jobs(order.size());
  parallel_for(order.size(), options.jobs, [&](std::size_t i) {
    const SourceFunction& f = *order[i];
    const GrammarConfig* grammar = grammars.find_language(f.language);
    if (!grammar) {
      spdlog::warn("skipping {}: unsupported language '{}'", f.id, f.language);
      jobs[i].skipped = true;
      return;
    }
    try {
      FunctionAnalysis analysis = analyze_function(f, *grammar);
      auto pairs = align_comments(analysis.comments, analysis.snippets, analysis.hierarchy, options.max_candidates,
                                  &jobs[i].align);
      jobs[i].comments = analysis.comments.size();
      jobs[i].records = to_records(analysis, pairs);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::ParseError) throw;
      spdlog::warn("skipping {}: {}", f.id, e.what());
      jobs[i].skipped = true;
    }
  });

  ExtractResult result;
  std::set<std::string> seen;
  for (auto& job : jobs) {
    if (job.skipped) {
      ++result.stats.skipped_functions;
      continue;
    }
    ++result.stats.functions;
    result.stats.comments += job.comments;
    for (std::size_t k = 0; k < 3; ++k) {
      const auto name = std::string(to_string(static_cast<CommentKind>(k)));
      result.stats.pairs_by_kind[name] += job.align.aligned[k];
      result.stats.unaligned_by_kind[name] += job.align.unaligned[k];
    }
    for (auto& r : job.records) {
      if (!seen.insert(r.pair_id).second) throw Error(ErrorCode::FormatError, "duplicate pair id " + r.pair_id);
      result.records.push_back(std::move(r));
    }
  }
  result.stats.pairs = result.records.size();
  return result;
}

std::vector<FunctionAnalysis> analyze_corpus_functions(std::span<const CorpusRecord> records,
                                                       const GrammarRegistry& grammars, unsigned jobs) {
  std::map<std::string, const CorpusRecord*> first;
  for (const auto& r : records) first.emplace(r.function_id, &r);

  std::vector<const CorpusRecord*> reps;
  for (const auto& [_, r] : first) reps.push_back(r);
  std::vector<FunctionAnalysis> out(reps.size());
  parallel_for(reps.size(), jobs, [&](std::size_t i) {
    SourceFunction f;
    f.id = reps[i]->function_id;
    f.language = reps[i]->language;
    f.source_text = reps[i]->function_source;
    out[i] = analyze_function(f, grammars.for_language(f.language));
  });

  std::unordered_map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < out.size(); ++i) index.emplace(out[i].function.id, i);
  for (const auto& r : records) {
    const auto& a = out[index.at(r.function_id)];
    if (a.function.source_text != r.function_source)
      throw Error(ErrorCode::FormatError, "function " + r.function_id + " has conflicting sources");
    for (const auto& c : r.candidate_spans) {
      auto at = a.hierarchy.find(c.snippet_id);
      if (!at || !(a.snippets[*at].bytes == c.bytes))
        throw Error(ErrorCode::FormatError, "candidate " + c.snippet_id + " does not match the re-parsed function");
    }
  }
  return out;
}

}  // namespace mgcs
