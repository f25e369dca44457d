#include "itrc/kernels.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <stdexcept>

#include "kernels_detail.hpp"

namespace itrc::kernels {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void matvec_scalar(const double* m, std::size_t rows, std::size_t cols,
                   const double* x, double* y) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot_scalar(m + r * cols, x, cols);
}

double reduce_max_scalar(const double* x, std::size_t n) {
  double m = x[0];
  for (std::size_t i = 1; i < n; ++i)
    if (x[i] > m) m = x[i];
  return m;
}

double reduce_sum_scalar(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

void cell_state_scalar(const double* f, const double* g, const double* cprev,
                       double* c, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) c[i] = f[i] * cprev[i] + (1.0 - f[i]) * g[i];
}

void highway_scalar(const double* r, const double* tc, const double* x,
                    double* h, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) h[i] = r[i] * tc[i] + (1.0 - r[i]) * x[i];
}

constexpr KernelTable kScalarTable = {
    Backend::scalar,     dot_scalar,        axpy_scalar, matvec_scalar,
    reduce_max_scalar,   reduce_sum_scalar, cell_state_scalar,
    highway_scalar,
};

std::atomic<const KernelTable*> g_table{nullptr};
std::once_flag g_init_once;

const KernelTable* resolve_default() {
  const char* env = std::getenv("ITRC_KERNELS");
  if (env != nullptr) {
    if (std::strcmp(env, "scalar") == 0) return &kScalarTable;
    if (std::strcmp(env, "avx2") == 0 && supported(Backend::avx2))
      return avx2_table();
    // Unknown or unsupported value: fall through to auto-detection.
  }
  if (supported(Backend::avx2)) return avx2_table();
  return &kScalarTable;
}

const KernelTable& table() {
  const KernelTable* t = g_table.load(std::memory_order_acquire);
  if (t == nullptr) {
    std::call_once(g_init_once, [] {
      g_table.store(resolve_default(), std::memory_order_release);
    });
    t = g_table.load(std::memory_order_acquire);
  }
  return *t;
}

}  // namespace

Backend active() noexcept { return table().backend; }

bool supported(Backend b) noexcept {
  if (b == Backend::scalar) return true;
  return avx2_table() != nullptr && avx2_cpu_ok();
}

const char* name(Backend b) noexcept {
  return b == Backend::scalar ? "scalar" : "avx2";
}

void force(Backend b) {
  if (!supported(b))
    throw std::invalid_argument(std::string("kernel backend not available: ") + name(b));
  table();  // make sure init ran
  g_table.store(b == Backend::scalar ? &kScalarTable : avx2_table(),
                std::memory_order_release);
}

double dot(const double* a, const double* b, std::size_t n) noexcept {
  return table().dot(a, b, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept {
  table().axpy(alpha, x, y, n);
}

void matvec(const double* m, std::size_t rows, std::size_t cols,
            const double* x, double* y) noexcept {
  table().matvec(m, rows, cols, x, y);
}

double reduce_max(const double* x, std::size_t n) noexcept {
  return table().reduce_max(x, n);
}

double reduce_sum(const double* x, std::size_t n) noexcept {
  return table().reduce_sum(x, n);
}

void cell_state(const double* f, const double* g, const double* cprev,
                double* c, std::size_t n) noexcept {
  table().cell_state(f, g, cprev, c, n);
}

void highway(const double* r, const double* tc, const double* x,
             double* h, std::size_t n) noexcept {
  table().highway(r, tc, x, h, n);
}

void sigmoid(const double* x, double* y, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

void tanh(const double* x, double* y, std::size_t n) noexcept {
  for (std::size_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

void softmax_inplace(double* x, std::size_t n) noexcept {
  const double m = reduce_max(x, n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::exp(x[i] - m);
  const double s = reduce_sum(x, n);
  for (std::size_t i = 0; i < n; ++i) x[i] /= s;
}

}  // namespace itrc::kernels
