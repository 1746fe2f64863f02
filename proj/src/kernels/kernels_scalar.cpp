#include "simip/kernels.hpp"

namespace simip::kernels {
namespace {

std::size_t count_nonzero_scalar(const std::uint8_t* a, std::size_t n) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i) c += a[i] != 0;
    return c;
}

std::size_t count_and_scalar(const std::uint8_t* a, const std::uint8_t* b, std::size_t n) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i) c += (a[i] != 0) & (b[i] != 0);
    return c;
}

void masked_copy_scalar(std::uint8_t* dst, const std::uint8_t* src, const std::uint8_t* mask,
                        std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (mask[i]) dst[i] = src[i];
}

void or_into_scalar(std::uint8_t* dst, const std::uint8_t* src, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = (dst[i] | src[i]) != 0;
}

void and_into_scalar(std::uint8_t* dst, const std::uint8_t* src, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = (dst[i] != 0) & (src[i] != 0);
}

void andnot_into_scalar(std::uint8_t* dst, const std::uint8_t* src, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = (dst[i] != 0) & (src[i] == 0);
}

}  // namespace

const Table& scalar_table() {
    static const Table t{Backend::Scalar,    count_nonzero_scalar, count_and_scalar,
                         masked_copy_scalar, or_into_scalar,       and_into_scalar,
                         andnot_into_scalar};
    return t;
}

}  // namespace simip::kernels
