#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lymebench {

namespace fs = std::filesystem;

// Fatal errors across the harness. Callers that want to continue after a
// per-item failure (e.g. one training run out of many) catch this and record
// an error entry instead of unwinding the whole program.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

// ---------------------------------------------------------------------------
// Deterministic RNG. std::shuffle / std::uniform_* are implementation-defined,
// so every randomized decision in the pipeline goes through this generator to
// keep serialized artifacts byte-identical across platforms.
// ---------------------------------------------------------------------------
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    // splitmix64
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // uniform in [0, n)
  uint64_t next_below(uint64_t n) {
    // rejection sampling to avoid modulo bias
    const uint64_t bound = n == 0 ? 0 : (~uint64_t{0} - (~uint64_t{0} % n));
    uint64_t v = next_u64();
    while (v >= bound && n > 1) v = next_u64();
    return n == 0 ? 0 : v % n;
  }

  // uniform in [0, 1)
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in [lo, hi)
  double next_range(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = size_t(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // standard normal (Box-Muller, deterministic)
  double next_gaussian() {
    double u1 = next_double(), u2 = next_double();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

 private:
  uint64_t state_;
};

// 64-bit FNV-1a, used to derive independent substreams: hash(seed, key).
uint64_t fnv1a64(std::string_view data, uint64_t seed = 0xcbf29ce484222325ULL);
uint64_t substream_seed(uint64_t seed, std::string_view key);

// SHA-256 (for run ids; reproducible content addressing).
std::string sha256_hex(std::string_view data);

// ---------------------------------------------------------------------------
// Locale-independent number formatting for serialized artifacts.
// ---------------------------------------------------------------------------
std::string fmt_double(double v, int precision);   // fixed precision
std::string fmt_shortest(double v);                // shortest round-trip

// ---------------------------------------------------------------------------
// Small string / CSV helpers.
// ---------------------------------------------------------------------------
std::vector<std::string> split(std::string_view s, char delim);
std::string trim(std::string_view s);
std::string csv_escape(std::string_view field);
std::vector<std::string> csv_parse_line(std::string_view line);

std::string read_text_file(const fs::path& p);
void write_text_file(const fs::path& p, std::string_view content);
std::vector<std::string> read_lines(const fs::path& p);

}  // namespace lymebench
