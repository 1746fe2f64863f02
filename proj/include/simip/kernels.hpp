#pragma once
// Byte-mask kernels used by compositing, conflict counting and IoU scoring.
//
// Every kernel exists as a scalar reference and, on x86-64, as an AVX2
// variant. The active table is chosen once at startup from CPUID and can be
// forced with SIMIP_KERNELS=scalar|avx2 or set_backend().

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace simip::kernels {

enum class Backend { Scalar, Avx2 };

struct Table {
    Backend backend;
    // number of nonzero bytes
    std::size_t (*count_nonzero)(const std::uint8_t* a, std::size_t n);
    // number of i with a[i] != 0 && b[i] != 0
    std::size_t (*count_and)(const std::uint8_t* a, const std::uint8_t* b, std::size_t n);
    // dst[i] = mask[i] ? src[i] : dst[i]
    void (*masked_copy)(std::uint8_t* dst, const std::uint8_t* src, const std::uint8_t* mask,
                        std::size_t n);
    // dst[i] = (dst[i] | src[i]) != 0
    void (*or_into)(std::uint8_t* dst, const std::uint8_t* src, std::size_t n);
    // dst[i] = dst[i] != 0 && src[i] != 0
    void (*and_into)(std::uint8_t* dst, const std::uint8_t* src, std::size_t n);
    // dst[i] = dst[i] != 0 && src[i] == 0
    void (*andnot_into)(std::uint8_t* dst, const std::uint8_t* src, std::size_t n);
};

const Table& scalar_table();
// nullptr when the binary was built without the AVX2 translation unit.
const Table* avx2_table();

bool cpu_has_avx2();
bool backend_available(Backend b);

const Table& active();
Backend active_backend();
// Throws std::invalid_argument if the backend is not available on this host.
void set_backend(Backend b);
std::string_view backend_name(Backend b);

inline std::size_t count_nonzero(std::span<const std::uint8_t> a) {
    return active().count_nonzero(a.data(), a.size());
}
inline std::size_t count_and(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    return active().count_and(a.data(), b.data(), a.size() < b.size() ? a.size() : b.size());
}
inline void masked_copy(std::span<std::uint8_t> dst, std::span<const std::uint8_t> src,
                        std::span<const std::uint8_t> mask) {
    active().masked_copy(dst.data(), src.data(), mask.data(), dst.size());
}
inline void or_into(std::span<std::uint8_t> dst, std::span<const std::uint8_t> src) {
    active().or_into(dst.data(), src.data(), dst.size());
}
inline void and_into(std::span<std::uint8_t> dst, std::span<const std::uint8_t> src) {
    active().and_into(dst.data(), src.data(), dst.size());
}
inline void andnot_into(std::span<std::uint8_t> dst, std::span<const std::uint8_t> src) {
    active().andnot_into(dst.data(), src.data(), dst.size());
}

}  // namespace simip::kernels
