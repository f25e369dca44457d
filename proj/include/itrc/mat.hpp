#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace itrc {

using VecD = std::vector<double>;

// Dense row-major matrix of doubles. Rows are the unit the kernels operate
// on, so row pointers are the primary access path.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  VecD v;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}

  double* row(std::size_t r) { return v.data() + r * cols; }
  const double* row(std::size_t r) const { return v.data() + r * cols; }
  double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
  bool empty() const { return rows == 0 || cols == 0; }
};

// Uniform double in [0, 1) with the full 53-bit mantissa. std::mt19937_64 is
// fully specified by the standard; the distributions are not, so sampling is
// done by hand to keep results identical across stdlib implementations.
inline double uniform01(std::mt19937_64& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Unbiased integer in [0, n) via Lemire's multiply-shift rejection.
inline std::uint64_t uniform_below(std::mt19937_64& gen, std::uint64_t n) {
  std::uint64_t x = gen();
  unsigned __int128 m = static_cast<unsigned __int128>(x) * n;
  auto lo = static_cast<std::uint64_t>(m);
  if (lo < n) {
    const std::uint64_t t = -n % n;
    while (lo < t) {
      x = gen();
      m = static_cast<unsigned __int128>(x) * n;
      lo = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

}  // namespace itrc
