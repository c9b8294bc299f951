#pragma once

#include <cstddef>
#include <string>

namespace nodulekit::kernels {

// Dense double-precision primitives behind the convolution / fully-connected
// inner loops. A scalar reference implementation always exists; an AVX2+FMA
// variant is selected at runtime when the CPU supports it. The two are
// equivalence-tested (SIMD reorders the accumulation, so results agree to
// rounding, not bit-for-bit). Within one process the active variant is fixed,
// which keeps repeated runs bit-identical.
struct Ops {
    // sum_i x[i]*y[i]
    double (*dot)(const double* x, const double* y, std::size_t n);
    // y[i] += a*x[i]
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // x[i] *= a
    void (*scale)(double* x, double a, std::size_t n);
    // sum_i x[i]
    double (*sum)(const double* x, std::size_t n);
    // y[i] = max(x[i], 0)
    void (*relu)(const double* x, double* y, std::size_t n);
    // g[i] = x[i] > 0 ? g[i] : 0   (in place, x is the pre-activation input)
    void (*relu_mask)(const double* x, double* g, std::size_t n);
};

enum class Isa { scalar, avx2 };

const char* isa_name(Isa isa);

// Best ISA this CPU supports.
Isa detected_isa();

// Currently active ISA (detected at startup unless forced).
Isa active_isa();

// Test hook. Throws nodulekit::Error if the requested ISA is unavailable.
void force_isa(Isa isa);

// Kernel table for the active ISA.
const Ops& ops();

// Kernel table for a specific ISA (nullptr members never occur; requesting an
// unavailable ISA throws).
const Ops& ops_for(Isa isa);

extern const Ops scalar_ops;
#if defined(__x86_64__) || defined(_M_X64)
extern const Ops avx2_ops;
bool avx2_available();
#endif

}  // namespace nodulekit::kernels
