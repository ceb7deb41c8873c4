#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace kbench {

inline constexpr const char* kVersion = "0.1.0";

/// Invalid configuration, malformed input files, violated preconditions.
/// The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Numerical failure: divergence, undefined statistic (zero variance, ...).
/// The CLI maps this to exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Well-formed query with no satisfying answer (e.g. no comparison
/// benchmark of the requested family). The CLI maps this to exit code 4.
struct QueryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A group is the (attribute, label) pair of a sample. Ordering is
/// lexicographic on (attribute, label), which all tie-breaks rely on.
struct GroupId {
  int attribute = 0;
  int label = 0;
  auto operator<=>(const GroupId&) const = default;
};

/// Compact textual form, e.g. "a0y1".
std::string to_string(const GroupId& g);
GroupId parse_group_id(const std::string& s);

/// FNV-1a 64-bit; used for dataset fingerprints and manifest digests.
std::uint64_t fnv1a(const void* data, std::size_t len,
                    std::uint64_t h = 14695981039346656037ull);
std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 14695981039346656037ull);

std::string hex64(std::uint64_t v);

/// Shortest round-trip decimal form of a double. All CSV output goes
/// through this so emitted files are byte-stable and parse back losslessly.
std::string format_double(double v);

}  // namespace kbench
