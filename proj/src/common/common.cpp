#include "mgcs/common/error.hpp"
#include "mgcs/common/types.hpp"

namespace mgcs {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnsupportedLanguage: return "UnsupportedLanguage";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::EmptyStatement: return "EmptyStatement";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyCandidates: return "EmptyCandidates";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::DegenerateCorpus: return "DegenerateCorpus";
    case ErrorCode::CheckpointMismatch: return "CheckpointMismatch";
    case ErrorCode::EmptyIndex: return "EmptyIndex";
    case ErrorCode::GoldMissing: return "GoldMissing";
    case ErrorCode::FunctionMissing: return "FunctionMissing";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::FormatError: return "FormatError";
  }
  return "Error";
}

std::string_view to_string(Granularity g) noexcept {
  switch (g) {
    case Granularity::Function: return "function";
    case Granularity::Block: return "block";
    case Granularity::Statement: return "statement";
  }
  return "unknown";
}

std::optional<Granularity> parse_granularity(std::string_view s) noexcept {
  if (s == "function") return Granularity::Function;
  if (s == "block") return Granularity::Block;
  if (s == "statement") return Granularity::Statement;
  return std::nullopt;
}

}  // namespace mgcs
