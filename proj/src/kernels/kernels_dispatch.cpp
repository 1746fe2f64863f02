#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "simip/kernels.hpp"

namespace simip::kernels {

#ifndef SIMIP_HAVE_AVX2
const Table* avx2_table() { return nullptr; }
#endif

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("popcnt");
#else
    return false;
#endif
}

bool backend_available(Backend b) {
    switch (b) {
        case Backend::Scalar: return true;
        case Backend::Avx2: return avx2_table() != nullptr && cpu_has_avx2();
    }
    return false;
}

namespace {

const Table* pick_default() {
    if (const char* env = std::getenv("SIMIP_KERNELS")) {
        std::string v = env;
        if (v == "scalar") return &scalar_table();
        if (v == "avx2" && backend_available(Backend::Avx2)) return avx2_table();
    }
    if (backend_available(Backend::Avx2)) return avx2_table();
    return &scalar_table();
}

std::atomic<const Table*>& slot() {
    static std::atomic<const Table*> s{pick_default()};
    return s;
}

}  // namespace

const Table& active() { return *slot().load(std::memory_order_relaxed); }

Backend active_backend() { return active().backend; }

void set_backend(Backend b) {
    if (!backend_available(b))
        throw std::invalid_argument("kernel backend not available: " + std::string(backend_name(b)));
    slot().store(b == Backend::Avx2 ? avx2_table() : &scalar_table());
}

std::string_view backend_name(Backend b) {
    return b == Backend::Avx2 ? "avx2" : "scalar";
}

}  // namespace simip::kernels
