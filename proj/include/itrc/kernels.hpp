#pragma once

// Vector math kernels used by the encoder and output layers.
//
// Every kernel has a scalar reference implementation and, on x86-64, an
// AVX2 variant. The backend is selected once at startup (AVX2 when the CPU
// supports it) and can be forced via force() or the ITRC_KERNELS
// environment variable ("scalar" / "avx2"). Elementwise kernels produce
// bit-identical results across backends; reduction kernels (dot, sums)
// may differ in the last ulps because the accumulation order differs.

#include <cstddef>
#include <string>

namespace itrc::kernels {

enum class Backend { scalar, avx2 };

// Backend in effect. Resolved on first use: honors ITRC_KERNELS, otherwise
// picks the widest variant the CPU supports.
Backend active() noexcept;
bool supported(Backend b) noexcept;
const char* name(Backend b) noexcept;

// Switch backend explicitly. Throws std::invalid_argument when this build
// or CPU cannot run it. Not thread-safe against in-flight kernel calls.
void force(Backend b);

// y = sum_i a[i] * b[i]
double dot(const double* a, const double* b, std::size_t n) noexcept;

// y[i] += alpha * x[i]
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;

// y[r] = dot(m[r * cols .. ], x) for r in [0, rows); m is row-major
void matvec(const double* m, std::size_t rows, std::size_t cols,
            const double* x, double* y) noexcept;

double reduce_max(const double* x, std::size_t n) noexcept;  // n >= 1
double reduce_sum(const double* x, std::size_t n) noexcept;

// c[i] = f[i] * cprev[i] + (1 - f[i]) * g[i]
void cell_state(const double* f, const double* g, const double* cprev,
                double* c, std::size_t n) noexcept;

// h[i] = r[i] * tc[i] + (1 - r[i]) * x[i]
void highway(const double* r, const double* tc, const double* x,
             double* h, std::size_t n) noexcept;

// Transcendentals are evaluated with libm in every backend so that results
// do not depend on the selected backend.
void sigmoid(const double* x, double* y, std::size_t n) noexcept;
void tanh(const double* x, double* y, std::size_t n) noexcept;

// In-place softmax: x[i] = exp(x[i] - max) / sum. n >= 1.
void softmax_inplace(double* x, std::size_t n) noexcept;

}  // namespace itrc::kernels
