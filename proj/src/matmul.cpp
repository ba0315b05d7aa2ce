#include "syncmatrix/detail/matmul.hpp"

#include <algorithm>
#include <cstring>

#include "syncmatrix/parallel.hpp"

namespace syncmatrix::detail {

namespace {
constexpr std::size_t kGrainFlops = 1u << 21;  // don't spawn threads for small products

// block sizes chosen so the shared operand tile stays cache-resident while a
// thread sweeps its row range
constexpr std::size_t kBlockK = 32;
constexpr std::size_t kBlockJ = 16;

std::size_t row_grain(std::size_t k, std::size_t n) {
    std::size_t per_row = 2 * k * n;
    if (per_row == 0) return 1;
    std::size_t rows = kGrainFlops / per_row;
    return rows == 0 ? 1 : rows;
}
}  // namespace

void mm_nn(const double* a, const double* b, double* c,
           std::size_t m, std::size_t k, std::size_t n) {
    runtime::parallel_for(m, row_grain(k, n), [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i)
            std::memset(c + i * n, 0, n * sizeof(double));
        // k-blocks outer so a block of B rows is reused across the row range;
        // each C element still accumulates in increasing-k order
        for (std::size_t kb = 0; kb < k; kb += kBlockK) {
            const std::size_t kend = std::min(kb + kBlockK, k);
            for (std::size_t i = i0; i < i1; ++i) {
                double* crow = c + i * n;
                const double* arow = a + i * k;
                for (std::size_t kk = kb; kk < kend; ++kk) {
                    const double aik = arow[kk];
                    const double* brow = b + kk * n;
                    for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
                }
            }
        }
    });
}

void mm_nt(const double* a, const double* b, double* c,
           std::size_t m, std::size_t k, std::size_t n) {
    runtime::parallel_for(m, row_grain(k, n), [&](std::size_t i0, std::size_t i1) {
        // j-blocks outer so a tile of B rows is reused across the row range
        for (std::size_t jb = 0; jb < n; jb += kBlockJ) {
            const std::size_t jend = std::min(jb + kBlockJ, n);
            for (std::size_t i = i0; i < i1; ++i) {
                const double* arow = a + i * k;
                double* crow = c + i * n;
                std::size_t j = jb;
                for (; j + 2 <= jend; j += 2) {
                    const double* b0 = b + j * k;
                    const double* b1 = b0 + k;
                    double s00 = 0, s01 = 0, s02 = 0, s03 = 0;
                    double s10 = 0, s11 = 0, s12 = 0, s13 = 0;
                    std::size_t kk = 0;
                    for (; kk + 4 <= k; kk += 4) {
                        s00 += arow[kk] * b0[kk];
                        s01 += arow[kk + 1] * b0[kk + 1];
                        s02 += arow[kk + 2] * b0[kk + 2];
                        s03 += arow[kk + 3] * b0[kk + 3];
                        s10 += arow[kk] * b1[kk];
                        s11 += arow[kk + 1] * b1[kk + 1];
                        s12 += arow[kk + 2] * b1[kk + 2];
                        s13 += arow[kk + 3] * b1[kk + 3];
                    }
                    for (; kk < k; ++kk) {
                        s00 += arow[kk] * b0[kk];
                        s10 += arow[kk] * b1[kk];
                    }
                    crow[j] = (s00 + s01) + (s02 + s03);
                    crow[j + 1] = (s10 + s11) + (s12 + s13);
                }
                for (; j < jend; ++j) {
                    const double* brow = b + j * k;
                    double s0 = 0, s1 = 0, s2 = 0, s3 = 0;
                    std::size_t kk = 0;
                    for (; kk + 4 <= k; kk += 4) {
                        s0 += arow[kk] * brow[kk];
                        s1 += arow[kk + 1] * brow[kk + 1];
                        s2 += arow[kk + 2] * brow[kk + 2];
                        s3 += arow[kk + 3] * brow[kk + 3];
                    }
                    for (; kk < k; ++kk) s0 += arow[kk] * brow[kk];
                    crow[j] = (s0 + s1) + (s2 + s3);
                }
            }
        }
    });
}

void mm_tn(const double* a, const double* b, double* c,
           std::size_t m, std::size_t k, std::size_t n) {
    runtime::parallel_for(m, row_grain(k, n), [&](std::size_t i0, std::size_t i1) {
        for (std::size_t i = i0; i < i1; ++i)
            std::memset(c + i * n, 0, n * sizeof(double));
        for (std::size_t kb = 0; kb < k; kb += kBlockK) {
            const std::size_t kend = std::min(kb + kBlockK, k);
            for (std::size_t i = i0; i < i1; ++i) {
                double* crow = c + i * n;
                for (std::size_t kk = kb; kk < kend; ++kk) {
                    const double aik = a[kk * m + i];
                    const double* brow = b + kk * n;
                    for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
                }
            }
        }
    });
}

}  // namespace syncmatrix::detail
