#include "nodulekit/kernels.hpp"

#include "nodulekit/errors.hpp"

namespace nodulekit::kernels {

namespace {
Isa g_active = detected_isa();
}

const char* isa_name(Isa isa) {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
    }
    return "?";
}

Isa detected_isa() {
#if defined(__x86_64__) || defined(_M_X64)
    if (avx2_available()) return Isa::avx2;
#endif
    return Isa::scalar;
}

Isa active_isa() { return g_active; }

void force_isa(Isa isa) {
#if defined(__x86_64__) || defined(_M_X64)
    if (isa == Isa::avx2 && !avx2_available())
        throw Error("force_isa: avx2 not supported on this CPU");
#else
    if (isa == Isa::avx2) throw Error("force_isa: avx2 not supported on this CPU");
#endif
    g_active = isa;
}

const Ops& ops_for(Isa isa) {
#if defined(__x86_64__) || defined(_M_X64)
    if (isa == Isa::avx2) {
        if (!avx2_available())
            throw Error("ops_for: avx2 not supported on this CPU");
        return avx2_ops;
    }
#else
    if (isa == Isa::avx2) throw Error("ops_for: avx2 not supported on this CPU");
#endif
    return scalar_ops;
}

const Ops& ops() { return ops_for(g_active); }

}  // namespace nodulekit::kernels
