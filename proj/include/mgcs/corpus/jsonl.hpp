#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "mgcs/corpus/types.hpp"

namespace mgcs {

std::string to_json_line(const CorpusRecord& record);
CorpusRecord corpus_record_from_json(const std::string& line);

std::vector<CorpusRecord> read_corpus(std::istream& in);
std::vector<CorpusRecord> read_corpus(const std::filesystem::path& path);
void write_corpus(std::ostream& out, std::span<const CorpusRecord> records);
void write_corpus(const std::filesystem::path& path, std::span<const CorpusRecord> records);

/// Reads {id, language, repo, path, source_text} objects, one per line.
std::vector<SourceFunction> read_functions(const std::filesystem::path& path);

// Small file helpers shared by the other modules.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace mgcs
