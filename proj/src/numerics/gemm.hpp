#pragma once

#include <cstddef>
#include <vector>

// Row-major GEMM helpers. Every output element is accumulated in ascending
// inner-index order and depends only on its own row of the left operand, so
// a row's result is bitwise independent of how many other rows are in the
// batch. The symmetric-embedding invariants rely on this.
namespace kicl::detail {

// C[m x n] (+)= A[m x k] * B[k x n]
inline void gemm_nn(const double* A, const double* B, double* C, std::size_t m, std::size_t k,
                    std::size_t n, bool accumulate) {
    if (!accumulate)
        for (std::size_t i = 0; i < m * n; ++i) C[i] = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
        double* c0 = C + (i + 0) * n;
        double* c1 = C + (i + 1) * n;
        double* c2 = C + (i + 2) * n;
        double* c3 = C + (i + 3) * n;
        const double* a0 = A + (i + 0) * k;
        const double* a1 = A + (i + 1) * k;
        const double* a2 = A + (i + 2) * k;
        const double* a3 = A + (i + 3) * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double* b = B + p * n;
            const double x0 = a0[p], x1 = a1[p], x2 = a2[p], x3 = a3[p];
            for (std::size_t j = 0; j < n; ++j) {
                const double bj = b[j];
                c0[j] += x0 * bj;
                c1[j] += x1 * bj;
                c2[j] += x2 * bj;
                c3[j] += x3 * bj;
            }
        }
    }
    for (; i < m; ++i) {
        double* c = C + i * n;
        const double* a = A + i * k;
        for (std::size_t p = 0; p < k; ++p) {
            const double* b = B + p * n;
            const double x = a[p];
            for (std::size_t j = 0; j < n; ++j) c[j] += x * b[j];
        }
    }
}

// C[k x n] (+)= A[m x k]^T * B[m x n]
inline void gemm_tn(const double* A, const double* B, double* C, std::size_t m, std::size_t k,
                    std::size_t n, bool accumulate) {
    if (!accumulate)
        for (std::size_t i = 0; i < k * n; ++i) C[i] = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double* a = A + i * k;
        const double* b = B + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double x = a[p];
            double* c = C + p * n;
            for (std::size_t j = 0; j < n; ++j) c[j] += x * b[j];
        }
    }
}

// C[m x n] (+)= A[m x k] * B[n x k]^T
inline void gemm_nt(const double* A, const double* B, double* C, std::size_t m, std::size_t k,
                    std::size_t n, bool accumulate) {
    std::vector<double> bt(k * n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = B[j * k + p];
    gemm_nn(A, bt.data(), C, m, k, n, accumulate);
}

}  // namespace kicl::detail
