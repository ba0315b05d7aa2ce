#include "syncmatrix/rng.hpp"

namespace syncmatrix {

namespace {
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

inline std::uint64_t fnv_byte(std::uint64_t h, unsigned char b) {
    return (h ^ b) * kFnvPrime;
}

inline std::uint64_t fnv_u64(std::uint64_t h, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) h = fnv_byte(h, static_cast<unsigned char>(v >> (8 * i)));
    return h;
}

// splitmix64 finalizer, spreads FNV output across all bits
inline std::uint64_t finalize(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}
}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index) {
    std::uint64_t h = kFnvOffset;
    h = fnv_u64(h, base);
    for (unsigned char c : tag) h = fnv_byte(h, c);
    h = fnv_u64(h, index);
    return finalize(h);
}

}  // namespace syncmatrix
