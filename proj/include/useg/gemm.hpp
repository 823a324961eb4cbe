#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#if defined(_OPENMP)
#include <omp.h>
#endif

namespace useg {

// Small dense matmul kernels, contiguous row-major operands. All variants
// accumulate into C (callers zero-fill when they want plain assignment).
//
// Parallel loops split complete output rows across threads and every output
// element keeps a fixed sequential reduction order, so results are identical
// for any thread count.

namespace detail {
constexpr size_t kParMinWork = size_t{1} << 16;  // skip thread startup on tiny products
}

// C[M,N] += A[M,K] * B[K,N]
template <typename T>
void gemm_nn(size_t M, size_t K, size_t N, const T* A, const T* B, T* C) {
#if defined(_OPENMP)
#pragma omp parallel for schedule(static) if (M * K * N >= detail::kParMinWork)
#endif
    for (long long ii = 0; ii < static_cast<long long>(M); ++ii) {
        const size_t i = static_cast<size_t>(ii);
        T* c = C + i * N;
        const T* a = A + i * K;
        for (size_t k = 0; k < K; ++k) {
            const T av = a[k];
            const T* b = B + k * N;
            for (size_t j = 0; j < N; ++j) c[j] += av * b[j];
        }
    }
}

// out[cols,rows] = in[rows,cols]^T
template <typename T>
void transpose(size_t rows, size_t cols, const T* in, T* out) {
    constexpr size_t TB = 32;
    for (size_t i0 = 0; i0 < rows; i0 += TB)
        for (size_t j0 = 0; j0 < cols; j0 += TB) {
            const size_t imax = std::min(rows, i0 + TB);
            const size_t jmax = std::min(cols, j0 + TB);
            for (size_t i = i0; i < imax; ++i)
                for (size_t j = j0; j < jmax; ++j) out[j * rows + i] = in[i * cols + j];
        }
}

// C[M,N] += A[M,K] * B[N,K]^T. Transposes B into scratch so the hot loop
// stays the stride-1 kernel above.
template <typename T>
void gemm_nt(size_t M, size_t K, size_t N, const T* A, const T* B, T* C) {
    std::vector<T> bt(K * N);
    transpose(N, K, B, bt.data());
    gemm_nn(M, K, N, A, bt.data(), C);
}

// C[M,N] += A[K,M]^T * B[K,N]
template <typename T>
void gemm_tn(size_t M, size_t K, size_t N, const T* A, const T* B, T* C) {
    std::vector<T> at(M * K);
    transpose(K, M, A, at.data());
    gemm_nn(M, K, N, at.data(), B, C);
}

// y[M] += A[M,N] * x[N]
template <typename T>
void gemv(size_t M, size_t N, const T* A, const T* x, T* y) {
    for (size_t i = 0; i < M; ++i) {
        const T* a = A + i * N;
        T acc = 0;
        for (size_t j = 0; j < N; ++j) acc += a[j] * x[j];
        y[i] += acc;
    }
}

}  // namespace useg
