#pragma once

// Internal: shared between kernels.cpp and the per-ISA kernel translation
// units. Not part of the public headers.

#include <cstddef>

#include "itrc/kernels.hpp"

namespace itrc::kernels {

struct KernelTable {
  Backend backend;
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*matvec)(const double*, std::size_t, std::size_t, const double*, double*);
  double (*reduce_max)(const double*, std::size_t);
  double (*reduce_sum)(const double*, std::size_t);
  void (*cell_state)(const double*, const double*, const double*, double*, std::size_t);
  void (*highway)(const double*, const double*, const double*, double*, std::size_t);
};

// nullptr when this build carries no AVX2 code path.
const KernelTable* avx2_table() noexcept;
// True when the running CPU can execute the AVX2 path.
bool avx2_cpu_ok() noexcept;

}  // namespace itrc::kernels
