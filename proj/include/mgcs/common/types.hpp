#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mgcs {

using Vector = std::vector<double>;

enum class Granularity : std::uint8_t { Function = 0, Block = 1, Statement = 2 };

inline constexpr std::size_t kGranularityCount = 3;

std::string_view to_string(Granularity g) noexcept;
std::optional<Granularity> parse_granularity(std::string_view s) noexcept;

/// Half-open byte range [start, end).
struct ByteSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const noexcept { return end - start; }
  bool contains(const ByteSpan& other) const noexcept {
    return start <= other.start && other.end <= end;
  }
  bool contains(std::size_t pos) const noexcept { return start <= pos && pos < end; }
  friend bool operator==(const ByteSpan&, const ByteSpan&) = default;
};

/// 1-based inclusive line range.
struct LineSpan {
  std::size_t start_line = 0;
  std::size_t end_line = 0;
  friend bool operator==(const LineSpan&, const LineSpan&) = default;
};

}  // namespace mgcs
