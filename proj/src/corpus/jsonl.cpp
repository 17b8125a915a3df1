#include "mgcs/corpus/jsonl.hpp"

#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "mgcs/common/error.hpp"

namespace mgcs {

using nlohmann::ordered_json;

std::string to_json_line(const CorpusRecord& r) {
  ordered_json spans = ordered_json::array();
  for (const auto& c : r.candidate_spans) {
    spans.push_back({{"snippet_id", c.snippet_id},
                     {"byte_start", c.bytes.start},
                     {"byte_end", c.bytes.end},
                     {"start_line", c.lines.start_line},
                     {"end_line", c.lines.end_line},
                     {"parent_id", c.parent_id ? ordered_json(*c.parent_id) : ordered_json(nullptr)}});
  }
  ordered_json j = {{"pair_id", r.pair_id},
                    {"function_id", r.function_id},
                    {"language", r.language},
                    {"comment_text", r.comment_text},
                    {"comment_kind", to_string(r.comment_kind)},
                    {"granularity", to_string(r.granularity)},
                    {"candidate_spans", std::move(spans)},
                    {"function_source", r.function_source}};
  return j.dump();
}

CorpusRecord corpus_record_from_json(const std::string& line) {
  try {
    const auto j = ordered_json::parse(line);
    CorpusRecord r;
    r.pair_id = j.at("pair_id").get<std::string>();
    r.function_id = j.at("function_id").get<std::string>();
    r.language = j.at("language").get<std::string>();
    r.comment_text = j.at("comment_text").get<std::string>();
    auto kind = parse_comment_kind(j.at("comment_kind").get<std::string>());
    auto gran = parse_granularity(j.at("granularity").get<std::string>());
    if (!kind || !gran) throw Error(ErrorCode::FormatError, "bad comment_kind/granularity in " + r.pair_id);
    r.comment_kind = *kind;
    r.granularity = *gran;
    for (const auto& c : j.at("candidate_spans")) {
      CandidateSpan span;
      span.snippet_id = c.at("snippet_id").get<std::string>();
      span.bytes = {c.at("byte_start").get<std::size_t>(), c.at("byte_end").get<std::size_t>()};
      span.lines = {c.at("start_line").get<std::size_t>(), c.at("end_line").get<std::size_t>()};
      if (c.contains("parent_id") && !c.at("parent_id").is_null())
        span.parent_id = c.at("parent_id").get<std::string>();
      r.candidate_spans.push_back(std::move(span));
    }
    if (r.candidate_spans.empty()) throw Error(ErrorCode::FormatError, "pair without candidates: " + r.pair_id);
    r.function_source = j.at("function_source").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::FormatError, std::string("corpus line: ") + e.what());
  }
}

std::vector<CorpusRecord> read_corpus(std::istream& in) {
  std::vector<CorpusRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(corpus_record_from_json(line));
  }
  return out;
}

std::vector<CorpusRecord> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return read_corpus(in);
}

void write_corpus(std::ostream& out, std::span<const CorpusRecord> records) {
  for (const auto& r : records) out << to_json_line(r) << '\n';
}

void write_corpus(const std::filesystem::path& path, std::span<const CorpusRecord> records) {
  std::ostringstream buf;
  write_corpus(buf, records);
  write_file(path, buf.str());
}

std::vector<SourceFunction> read_functions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::vector<SourceFunction> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = ordered_json::parse(line);
      SourceFunction f;
      f.id = j.at("id").get<std::string>();
      f.language = j.at("language").get<std::string>();
      f.source_text = j.at("source_text").get<std::string>();
      f.repo = j.value("repo", std::string{});
      f.path = j.value("path", std::string{});
      out.push_back(std::move(f));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::FormatError, std::string("function line: ") + e.what());
    }
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path.string());
}

}  // namespace mgcs
