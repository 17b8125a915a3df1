#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mgcs::testing {

struct PlantedFile {
  std::string path;
  std::string text;
};

struct PlantedOptions {
  std::size_t functions = 200;
  std::size_t functions_per_file = 20;
  std::size_t concepts = 64;
  std::size_t concepts_per_snippet = 3;
  std::uint64_t seed = 0;
};

/// Synthetic Python module set. Every function carries a docstring, inline
/// comments above its blocks and trailing comments on some statements. Each
/// commented snippet draws a few concepts from a shared pool; comments name a
/// concept with one pseudo-word and the code with a different one.
std::vector<PlantedFile> planted_corpus(const PlantedOptions& options = {});

void write_planted(const std::filesystem::path& dir, const PlantedOptions& options = {});

}  // namespace mgcs::testing
