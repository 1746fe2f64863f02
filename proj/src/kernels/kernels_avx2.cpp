// Compiled with -mavx2 -mpopcnt; only reached when CPUID reports AVX2.
#include <immintrin.h>

#include "simip/kernels.hpp"

namespace simip::kernels {
namespace {

std::size_t count_nonzero_avx2(const std::uint8_t* a, std::size_t n) {
    const __m256i zero = _mm256_setzero_si256();
    std::size_t zeros = 0;
    std::size_t i = 0;
    for (; i + 32 <= n; i += 32) {
        __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
        auto m = static_cast<std::uint32_t>(_mm256_movemask_epi8(_mm256_cmpeq_epi8(va, zero)));
        zeros += static_cast<std::size_t>(_mm_popcnt_u32(m));
    }
    std::size_t c = i - zeros;
    for (; i < n; ++i) c += a[i] != 0;
    return c;
}

std::size_t count_and_avx2(const std::uint8_t* a, const std::uint8_t* b, std::size_t n) {
    const __m256i zero = _mm256_setzero_si256();
    std::size_t misses = 0;
    std::size_t i = 0;
    for (; i + 32 <= n; i += 32) {
        __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a + i));
        __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b + i));
        __m256i either_zero =
            _mm256_or_si256(_mm256_cmpeq_epi8(va, zero), _mm256_cmpeq_epi8(vb, zero));
        auto m = static_cast<std::uint32_t>(_mm256_movemask_epi8(either_zero));
        misses += static_cast<std::size_t>(_mm_popcnt_u32(m));
    }
    std::size_t c = i - misses;
    for (; i < n; ++i) c += (a[i] != 0) & (b[i] != 0);
    return c;
}

void masked_copy_avx2(std::uint8_t* dst, const std::uint8_t* src, const std::uint8_t* mask,
                      std::size_t n) {
    const __m256i zero = _mm256_setzero_si256();
    std::size_t i = 0;
    for (; i + 32 <= n; i += 32) {
        __m256i vd = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(dst + i));
        __m256i vs = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(src + i));
        __m256i vm = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(mask + i));
        __m256i keep = _mm256_cmpeq_epi8(vm, zero);
        _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst + i), _mm256_blendv_epi8(vs, vd, keep));
    }
    for (; i < n; ++i)
        if (mask[i]) dst[i] = src[i];
}

// Normalizes any nonzero byte to 1.
inline __m256i to_bit(__m256i v) {
    const __m256i zero = _mm256_setzero_si256();
    const __m256i one = _mm256_set1_epi8(1);
    return _mm256_andnot_si256(_mm256_cmpeq_epi8(v, zero), one);
}

void or_into_avx2(std::uint8_t* dst, const std::uint8_t* src, std::size_t n) {
    std::size_t i = 0;
    for (; i + 32 <= n; i += 32) {
        __m256i vd = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(dst + i));
        __m256i vs = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(src + i));
        _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst + i), to_bit(_mm256_or_si256(vd, vs)));
    }
    for (; i < n; ++i) dst[i] = (dst[i] | src[i]) != 0;
}

void and_into_avx2(std::uint8_t* dst, const std::uint8_t* src, std::size_t n) {
    std::size_t i = 0;
    for (; i + 32 <= n; i += 32) {
        __m256i vd = to_bit(_mm256_loadu_si256(reinterpret_cast<const __m256i*>(dst + i)));
        __m256i vs = to_bit(_mm256_loadu_si256(reinterpret_cast<const __m256i*>(src + i)));
        _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst + i), _mm256_and_si256(vd, vs));
    }
    for (; i < n; ++i) dst[i] = (dst[i] != 0) & (src[i] != 0);
}

void andnot_into_avx2(std::uint8_t* dst, const std::uint8_t* src, std::size_t n) {
    std::size_t i = 0;
    for (; i + 32 <= n; i += 32) {
        __m256i vd = to_bit(_mm256_loadu_si256(reinterpret_cast<const __m256i*>(dst + i)));
        __m256i vs = to_bit(_mm256_loadu_si256(reinterpret_cast<const __m256i*>(src + i)));
        _mm256_storeu_si256(reinterpret_cast<__m256i*>(dst + i), _mm256_andnot_si256(vs, vd));
    }
    for (; i < n; ++i) dst[i] = (dst[i] != 0) & (src[i] == 0);
}

}  // namespace

const Table* avx2_table() {
    static const Table t{Backend::Avx2,    count_nonzero_avx2, count_and_avx2,
                         masked_copy_avx2, or_into_avx2,       and_into_avx2,
                         andnot_into_avx2};
    return &t;
}

}  // namespace simip::kernels
