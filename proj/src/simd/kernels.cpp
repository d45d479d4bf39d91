#include "engsf/simd/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace engsf::simd {

namespace {

double scalar_sum(const double* x, std::size_t n) {
  double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 += x[i];
    acc1 += x[i + 1];
    acc2 += x[i + 2];
    acc3 += x[i + 3];
  }
  if (i < n) acc0 += x[i];
  if (i + 1 < n) acc1 += x[i + 1];
  if (i + 2 < n) acc2 += x[i + 2];
  return (acc0 + acc1) + (acc2 + acc3);
}

double scalar_dot(const double* a, const double* b, std::size_t n) {
  double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc0 += a[i] * b[i];
    acc1 += a[i + 1] * b[i + 1];
    acc2 += a[i + 2] * b[i + 2];
    acc3 += a[i + 3] * b[i + 3];
  }
  if (i < n) acc0 += a[i] * b[i];
  if (i + 1 < n) acc1 += a[i + 1] * b[i + 1];
  if (i + 2 < n) acc2 += a[i + 2] * b[i + 2];
  return (acc0 + acc1) + (acc2 + acc3);
}

void scalar_axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scalar_add_scaled(const double* x, double a, const double* k, double* out,
                       std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] + a * k[i];
}

void scalar_rk4_combine(const double* x, const double* k1, const double* k2,
                        const double* k3, const double* k4, double dt,
                        double* out, std::size_t n) {
  const double c = dt / 6.0;
  for (std::size_t i = 0; i < n; ++i) {
    double s = k1[i] + 2.0 * k2[i];
    s = s + 2.0 * k3[i];
    s = s + k4[i];
    out[i] = x[i] + c * s;
  }
}

void scalar_lorenz95_drift(const double* x, std::size_t m, double forcing,
                           double* out) {
  // Interior components have all three neighbours in range; only
  // j = 0, 1, m-1 wrap.
  for (std::size_t j = 2; j + 1 < m; ++j) {
    out[j] = ((x[j + 1] - x[j - 2]) * x[j - 1] - x[j]) + forcing;
  }
  out[0] = ((x[1] - x[m - 2]) * x[m - 1] - x[0]) + forcing;
  out[1] = ((x[2] - x[m - 1]) * x[0] - x[1]) + forcing;
  out[m - 1] = ((x[0] - x[m - 3]) * x[m - 2] - x[m - 1]) + forcing;
}

const KernelTable kScalarTable = {
    Isa::Scalar,       scalar_sum,         scalar_dot,
    scalar_axpy,       scalar_add_scaled,  scalar_rk4_combine,
    scalar_lorenz95_drift,
};

const KernelTable* pick_default() {
  const KernelTable* table = &kScalarTable;
  if (const KernelTable* avx2 = kernels_for(Isa::Avx2)) table = avx2;
  if (const char* env = std::getenv("ENGSF_SIMD")) {
    if (std::strcmp(env, "scalar") == 0) table = &kScalarTable;
    if (std::strcmp(env, "avx2") == 0) {
      if (const KernelTable* avx2 = kernels_for(Isa::Avx2)) table = avx2;
    }
  }
  return table;
}

const KernelTable* g_active = nullptr;

}  // namespace

// Defined in kernels_avx2.cpp; returns nullptr when the compiler or the
// running CPU lacks AVX2 support.
const KernelTable* avx2_kernel_table();

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
  }
  return "unknown";
}

const KernelTable& scalar_kernels() { return kScalarTable; }

const KernelTable* kernels_for(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return &kScalarTable;
    case Isa::Avx2:
      return avx2_kernel_table();
  }
  return nullptr;
}

std::vector<const KernelTable*> available_kernels() {
  std::vector<const KernelTable*> tables{&kScalarTable};
  if (const KernelTable* avx2 = kernels_for(Isa::Avx2)) tables.push_back(avx2);
  return tables;
}

const KernelTable& active_kernels() {
  if (g_active == nullptr) g_active = pick_default();
  return *g_active;
}

void set_active_kernels(const KernelTable& table) { g_active = &table; }

}  // namespace engsf::simd
