// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef TYPOMINE_COMMON_HPP
#define TYPOMINE_COMMON_HPP

#include <atomic>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace typomine {

// Cell value of a binarized feature for one language.
enum class Ternary : unsigned char { False = 0, True = 1, Unknown = 2 };

inline bool known(Ternary t) { return t != Ternary::Unknown; }

class UsageError : public std::runtime_error {
public:
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

class ParseError : public std::runtime_error {
public:
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

class ValidationError : public std::runtime_error {
public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// FNV-1a, used to derive per-candidate RNG streams from (seed, feature ids).
// Stable across platforms so reruns are byte-identical regardless of worker
// scheduling.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 14695981039346656037ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t stable_hash(std::uint64_t seed, std::initializer_list<std::string_view> parts) {
  std::uint64_t h = 14695981039346656037ull;
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = char((seed >> (8 * i)) & 0xff);
  h = fnv1a(std::string_view(buf, 8), h);
  for (auto p : parts) {
    h = fnv1a("\x1f", h);
    h = fnv1a(p, h);
  }
  return h;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) {
  // splitmix64 scramble so nearby seeds give unrelated streams
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return Rng(z ^ (z >> 31));
}

// Embarrassingly parallel index map. fn(i) must only touch slot i of its
// output; results are then independent of the worker count.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto body = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  int nw = std::min<std::size_t>(workers, n);
  pool.reserve(nw);
  for (int w = 0; w < nw; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
}

inline std::string trim(std::string_view s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.emplace_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

}  // namespace typomine

#endif
