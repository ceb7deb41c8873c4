#include "kbench/common.hpp"

#include <charconv>
#include <cmath>

namespace kbench {

std::string to_string(const GroupId& g) {
  return "a" + std::to_string(g.attribute) + "y" + std::to_string(g.label);
}

GroupId parse_group_id(const std::string& s) {
  // expects "a<int>y<int>"
  if (s.size() < 4 || s[0] != 'a') throw ConfigError("bad group id: " + s);
  auto ypos = s.find('y', 1);
  if (ypos == std::string::npos) throw ConfigError("bad group id: " + s);
  GroupId g;
  auto r1 = std::from_chars(s.data() + 1, s.data() + ypos, g.attribute);
  auto r2 = std::from_chars(s.data() + ypos + 1, s.data() + s.size(), g.label);
  if (r1.ec != std::errc{} || r2.ec != std::errc{} ||
      r1.ptr != s.data() + ypos || r2.ptr != s.data() + s.size())
    throw ConfigError("bad group id: " + s);
  return g;
}

std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t fnv1a(const std::string& s, std::uint64_t h) {
  return fnv1a(s.data(), s.size(), h);
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace kbench
