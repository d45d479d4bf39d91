#pragma once

#include <cstddef>
#include <string>
#include <vector>

// Low-level array kernels with scalar reference implementations and optional
// SIMD variants selected at runtime. Every variant of a kernel is required to
// produce bit-identical results to the scalar reference, not merely close
// ones: reductions use a fixed blocked 4-accumulator order in every
// implementation, elementwise kernels use identical operation trees, and no
// variant may use fused multiply-add (the build also disables FP contraction).
// This keeps results reproducible across machines that dispatch differently.

namespace engsf::simd {

enum class Isa {
  Scalar,
  Avx2,
};

const char* isa_name(Isa isa);

struct KernelTable {
  Isa isa;

  // Blocked reduction: acc[k] accumulates elements with index ≡ k (mod 4)
  // while 4 or more remain, trailing elements fold into acc[0..rem);
  // final combine is (acc0 + acc1) + (acc2 + acc3).
  double (*sum)(const double* x, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);

  // y[i] += a * x[i]
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  // out[i] = x[i] + a * k[i]
  void (*add_scaled)(const double* x, double a, const double* k, double* out,
                     std::size_t n);
  // out[i] = x[i] + (dt/6) * (((k1[i] + 2*k2[i]) + 2*k3[i]) + k4[i])
  void (*rk4_combine)(const double* x, const double* k1, const double* k2,
                      const double* k3, const double* k4, double dt,
                      double* out, std::size_t n);
  // Cyclic advection-forcing drift on m >= 4 components:
  //   out[j] = ((x[j+1] - x[j-2]) * x[j-1] - x[j]) + forcing
  // with indices wrapped mod m.
  void (*lorenz95_drift)(const double* x, std::size_t m, double forcing,
                         double* out);
};

// The reference implementation; always available.
const KernelTable& scalar_kernels();

// Table for a specific ISA, or nullptr when not compiled in or not supported
// by the running CPU.
const KernelTable* kernels_for(Isa isa);

// Every table usable on this machine (scalar first).
std::vector<const KernelTable*> available_kernels();

// The table used by the convenience wrappers below. Defaults to the widest
// available ISA; the ENGSF_SIMD environment variable ("scalar", "avx2")
// overrides that at startup, and set_active_kernels() overrides it at runtime
// (used by the equivalence tests).
const KernelTable& active_kernels();
void set_active_kernels(const KernelTable& table);

inline double sum(const double* x, std::size_t n) {
  return active_kernels().sum(x, n);
}
inline double dot(const double* a, const double* b, std::size_t n) {
  return active_kernels().dot(a, b, n);
}
inline void axpy(double a, const double* x, double* y, std::size_t n) {
  active_kernels().axpy(a, x, y, n);
}
inline void add_scaled(const double* x, double a, const double* k, double* out,
                       std::size_t n) {
  active_kernels().add_scaled(x, a, k, out, n);
}
inline void rk4_combine(const double* x, const double* k1, const double* k2,
                        const double* k3, const double* k4, double dt,
                        double* out, std::size_t n) {
  active_kernels().rk4_combine(x, k1, k2, k3, k4, dt, out, n);
}
inline void lorenz95_drift(const double* x, std::size_t m, double forcing,
                           double* out) {
  active_kernels().lorenz95_drift(x, m, forcing, out);
}

}  // namespace engsf::simd
