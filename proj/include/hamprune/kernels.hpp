#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hamprune::kernels {

// The parallel backend partitions work so that every output element is
// written by exactly one thread with the same inner accumulation order as
// the serial backend. Scalar reductions use a fixed chunk decomposition
// (independent of the thread count), so serial and parallel results are
// bitwise identical and runs are reproducible on any machine.

bool parallel_enabled();
void set_parallel(bool on);

// Work sizes below this many scalar ops stay on the serial path.
inline constexpr size_t kParallelGrain = 16384;
inline constexpr size_t kReduceChunks = 64;

namespace serial {

template <typename T>
void matmul_nn(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool acc) {
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) {
            T sum = 0;
            for (size_t p = 0; p < k; ++p) sum += a[i * k + p] * b[p * n + j];
            c[i * n + j] = acc ? c[i * n + j] + sum : sum;
        }
}

// c[m,n] = a[m,k] * b[n,k]^T
template <typename T>
void matmul_nt(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool acc) {
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) {
            T sum = 0;
            for (size_t p = 0; p < k; ++p) sum += a[i * k + p] * b[j * k + p];
            c[i * n + j] = acc ? c[i * n + j] + sum : sum;
        }
}

// c[k,n] = a[m,k]^T * b[m,n]
template <typename T>
void matmul_tn(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool acc) {
    for (size_t i = 0; i < k; ++i)
        for (size_t j = 0; j < n; ++j) {
            T sum = 0;
            for (size_t p = 0; p < m; ++p) sum += a[p * k + i] * b[p * n + j];
            c[i * n + j] = acc ? c[i * n + j] + sum : sum;
        }
}

template <typename T>
void transpose(const T* a, T* out, size_t m, size_t n) {
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
}

template <typename T>
void vmul(const T* a, const T* b, T* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename T>
void vadd(const T* a, const T* b, T* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename T>
void vsub(const T* a, const T* b, T* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

// y += alpha * x
template <typename T>
void axpy(T alpha, const T* x, T* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

// y += a .* b
template <typename T>
void vmul_acc(const T* a, const T* b, T* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += a[i] * b[i];
}

template <typename T>
void vscale(const T* x, T alpha, T* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = alpha * x[i];
}

template <typename T>
void sigmoid(const T* x, T* y, size_t n) {
    for (size_t i = 0; i < n; ++i) {
        if (x[i] >= 0) {
            y[i] = T(1) / (T(1) + std::exp(-x[i]));
        } else {
            T e = std::exp(x[i]);
            y[i] = e / (T(1) + e);
        }
    }
}

template <typename T>
void relu(const T* x, T* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] = x[i] > 0 ? x[i] : T(0);
}

// m = 1 where a > 0, else 0
template <typename T>
void step_positive(const T* a, T* m, size_t n) {
    for (size_t i = 0; i < n; ++i) m[i] = a[i] > 0 ? T(1) : T(0);
}

template <typename T>
T chunk_sum(const T* x, size_t lo, size_t hi) {
    T s = 0;
    for (size_t i = lo; i < hi; ++i) s += x[i];
    return s;
}

template <typename T>
T reduce_sum(const T* x, size_t n) {
    if (n < 2 * kReduceChunks) return chunk_sum(x, 0, n);
    size_t step = (n + kReduceChunks - 1) / kReduceChunks;
    T partial[kReduceChunks];
    size_t nchunks = 0;
    for (size_t lo = 0; lo < n; lo += step) {
        size_t hi = lo + step < n ? lo + step : n;
        partial[nchunks++] = chunk_sum(x, lo, hi);
    }
    T s = 0;
    for (size_t c = 0; c < nchunks; ++c) s += partial[c];
    return s;
}

template <typename T>
void row_sum(const T* x, T* out, size_t rows, size_t cols) {
    for (size_t i = 0; i < rows; ++i) {
        T s = 0;
        for (size_t j = 0; j < cols; ++j) s += x[i * cols + j];
        out[i] = s;
    }
}

template <typename T>
void col_sum(const T* x, T* out, size_t rows, size_t cols, bool acc) {
    for (size_t j = 0; j < cols; ++j) {
        T s = 0;
        for (size_t i = 0; i < rows; ++i) s += x[i * cols + j];
        out[j] = acc ? out[j] + s : s;
    }
}

template <typename T>
void mul_rowvec(const T* m, const T* v, T* out, size_t rows, size_t cols) {
    for (size_t i = 0; i < rows; ++i)
        for (size_t j = 0; j < cols; ++j) out[i * cols + j] = m[i * cols + j] * v[j];
}

template <typename T>
void add_rowvec(const T* m, const T* v, T* out, size_t rows, size_t cols) {
    for (size_t i = 0; i < rows; ++i)
        for (size_t j = 0; j < cols; ++j) out[i * cols + j] = m[i * cols + j] + v[j];
}

// dv[j] += sum_i g[i,j] * m[i,j]
template <typename T>
void mul_rowvec_grad_vec(const T* g, const T* m, T* dv, size_t rows, size_t cols) {
    for (size_t j = 0; j < cols; ++j) {
        T s = 0;
        for (size_t i = 0; i < rows; ++i) s += g[i * cols + j] * m[i * cols + j];
        dv[j] += s;
    }
}

template <typename T>
void gather_rows(const T* tab, const uint32_t* idx, T* out, size_t nout, size_t cols) {
    for (size_t i = 0; i < nout; ++i) {
        const T* src = tab + size_t(idx[i]) * cols;
        T* dst = out + i * cols;
        for (size_t j = 0; j < cols; ++j) dst[j] = src[j];
    }
}

// tab[idx[i],:] += src[i,:]; duplicate indices accumulate in row order.
template <typename T>
void scatter_add_rows(T* tab, const uint32_t* idx, const T* src, size_t nsrc, size_t cols) {
    for (size_t j = 0; j < cols; ++j)
        for (size_t i = 0; i < nsrc; ++i) tab[size_t(idx[i]) * cols + j] += src[i * cols + j];
}

}  // namespace serial

namespace par {

#ifdef _OPENMP

template <typename T>
void matmul_nn(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool acc) {
#pragma omp parallel for schedule(static) collapse(2)
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) {
            T sum = 0;
            for (size_t p = 0; p < k; ++p) sum += a[i * k + p] * b[p * n + j];
            c[i * n + j] = acc ? c[i * n + j] + sum : sum;
        }
}

template <typename T>
void matmul_nt(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool acc) {
#pragma omp parallel for schedule(static) collapse(2)
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) {
            T sum = 0;
            for (size_t p = 0; p < k; ++p) sum += a[i * k + p] * b[j * k + p];
            c[i * n + j] = acc ? c[i * n + j] + sum : sum;
        }
}

template <typename T>
void matmul_tn(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool acc) {
#pragma omp parallel for schedule(static) collapse(2)
    for (size_t i = 0; i < k; ++i)
        for (size_t j = 0; j < n; ++j) {
            T sum = 0;
            for (size_t p = 0; p < m; ++p) sum += a[p * k + i] * b[p * n + j];
            c[i * n + j] = acc ? c[i * n + j] + sum : sum;
        }
}

template <typename T>
void transpose(const T* a, T* out, size_t m, size_t n) {
#pragma omp parallel for schedule(static)
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
}

template <typename T>
void vmul(const T* a, const T* b, T* out, size_t n) {
#pragma omp parallel for schedule(static)
    for (size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename T>
void vadd(const T* a, const T* b, T* out, size_t n) {
#pragma omp parallel for schedule(static)
    for (size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename T>
void vsub(const T* a, const T* b, T* out, size_t n) {
#pragma omp parallel for schedule(static)
    for (size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

template <typename T>
void axpy(T alpha, const T* x, T* y, size_t n) {
#pragma omp parallel for schedule(static)
    for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void vmul_acc(const T* a, const T* b, T* y, size_t n) {
#pragma omp parallel for schedule(static)
    for (size_t i = 0; i < n; ++i) y[i] += a[i] * b[i];
}

template <typename T>
void vscale(const T* x, T alpha, T* out, size_t n) {
#pragma omp parallel for schedule(static)
    for (size_t i = 0; i < n; ++i) out[i] = alpha * x[i];
}

template <typename T>
void sigmoid(const T* x, T* y, size_t n) {
#pragma omp parallel for schedule(static)
    for (size_t i = 0; i < n; ++i) {
        if (x[i] >= 0) {
            y[i] = T(1) / (T(1) + std::exp(-x[i]));
        } else {
            T e = std::exp(x[i]);
            y[i] = e / (T(1) + e);
        }
    }
}

template <typename T>
void relu(const T* x, T* y, size_t n) {
#pragma omp parallel for schedule(static)
    for (size_t i = 0; i < n; ++i) y[i] = x[i] > 0 ? x[i] : T(0);
}

template <typename T>
void step_positive(const T* a, T* m, size_t n) {
#pragma omp parallel for schedule(static)
    for (size_t i = 0; i < n; ++i) m[i] = a[i] > 0 ? T(1) : T(0);
}

// Same fixed chunk decomposition as the serial backend.
template <typename T>
T reduce_sum(const T* x, size_t n) {
    if (n < 2 * kReduceChunks) return serial::chunk_sum(x, 0, n);
    size_t step = (n + kReduceChunks - 1) / kReduceChunks;
    size_t nchunks = (n + step - 1) / step;
    T partial[kReduceChunks];
#pragma omp parallel for schedule(static)
    for (size_t c = 0; c < nchunks; ++c) {
        size_t lo = c * step;
        size_t hi = lo + step < n ? lo + step : n;
        partial[c] = serial::chunk_sum(x, lo, hi);
    }
    T s = 0;
    for (size_t c = 0; c < nchunks; ++c) s += partial[c];
    return s;
}

template <typename T>
void row_sum(const T* x, T* out, size_t rows, size_t cols) {
#pragma omp parallel for schedule(static)
    for (size_t i = 0; i < rows; ++i) {
        T s = 0;
        for (size_t j = 0; j < cols; ++j) s += x[i * cols + j];
        out[i] = s;
    }
}

template <typename T>
void col_sum(const T* x, T* out, size_t rows, size_t cols, bool acc) {
#pragma omp parallel for schedule(static)
    for (size_t j = 0; j < cols; ++j) {
        T s = 0;
        for (size_t i = 0; i < rows; ++i) s += x[i * cols + j];
        out[j] = acc ? out[j] + s : s;
    }
}

template <typename T>
void mul_rowvec(const T* m, const T* v, T* out, size_t rows, size_t cols) {
#pragma omp parallel for schedule(static)
    for (size_t i = 0; i < rows; ++i)
        for (size_t j = 0; j < cols; ++j) out[i * cols + j] = m[i * cols + j] * v[j];
}

template <typename T>
void add_rowvec(const T* m, const T* v, T* out, size_t rows, size_t cols) {
#pragma omp parallel for schedule(static)
    for (size_t i = 0; i < rows; ++i)
        for (size_t j = 0; j < cols; ++j) out[i * cols + j] = m[i * cols + j] + v[j];
}

template <typename T>
void mul_rowvec_grad_vec(const T* g, const T* m, T* dv, size_t rows, size_t cols) {
#pragma omp parallel for schedule(static)
    for (size_t j = 0; j < cols; ++j) {
        T s = 0;
        for (size_t i = 0; i < rows; ++i) s += g[i * cols + j] * m[i * cols + j];
        dv[j] += s;
    }
}

template <typename T>
void gather_rows(const T* tab, const uint32_t* idx, T* out, size_t nout, size_t cols) {
#pragma omp parallel for schedule(static)
    for (size_t i = 0; i < nout; ++i) {
        const T* src = tab + size_t(idx[i]) * cols;
        T* dst = out + i * cols;
        for (size_t j = 0; j < cols; ++j) dst[j] = src[j];
    }
}

// Parallel over columns: rows with equal indices collide on the same table
// row, so each column is accumulated by one thread in row order.
template <typename T>
void scatter_add_rows(T* tab, const uint32_t* idx, const T* src, size_t nsrc, size_t cols) {
#pragma omp parallel for schedule(static)
    for (size_t j = 0; j < cols; ++j)
        for (size_t i = 0; i < nsrc; ++i) tab[size_t(idx[i]) * cols + j] += src[i * cols + j];
}

#else

using serial::add_rowvec;
using serial::axpy;
using serial::col_sum;
using serial::gather_rows;
using serial::matmul_nn;
using serial::matmul_nt;
using serial::matmul_tn;
using serial::mul_rowvec;
using serial::mul_rowvec_grad_vec;
using serial::reduce_sum;
using serial::relu;
using serial::row_sum;
using serial::scatter_add_rows;
using serial::sigmoid;
using serial::step_positive;
using serial::transpose;
using serial::vadd;
using serial::vmul;
using serial::vmul_acc;
using serial::vscale;
using serial::vsub;

#endif  // _OPENMP

}  // namespace par

// Dispatching front used by the graph layer: parallel backend when enabled
// and the work is large enough to amortize thread startup.

inline bool use_par(size_t work) { return parallel_enabled() && work >= kParallelGrain; }

template <typename T>
void matmul_nn(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool acc = false) {
    if (use_par(m * n * (k + 1))) par::matmul_nn(a, b, c, m, k, n, acc);
    else serial::matmul_nn(a, b, c, m, k, n, acc);
}

template <typename T>
void matmul_nt(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool acc = false) {
    if (use_par(m * n * (k + 1))) par::matmul_nt(a, b, c, m, k, n, acc);
    else serial::matmul_nt(a, b, c, m, k, n, acc);
}

template <typename T>
void matmul_tn(const T* a, const T* b, T* c, size_t m, size_t k, size_t n, bool acc = false) {
    if (use_par(m * n * (k + 1))) par::matmul_tn(a, b, c, m, k, n, acc);
    else serial::matmul_tn(a, b, c, m, k, n, acc);
}

template <typename T>
void transpose(const T* a, T* out, size_t m, size_t n) {
    if (use_par(m * n)) par::transpose(a, out, m, n);
    else serial::transpose(a, out, m, n);
}

template <typename T>
void vmul(const T* a, const T* b, T* out, size_t n) {
    if (use_par(n)) par::vmul(a, b, out, n);
    else serial::vmul(a, b, out, n);
}

template <typename T>
void vadd(const T* a, const T* b, T* out, size_t n) {
    if (use_par(n)) par::vadd(a, b, out, n);
    else serial::vadd(a, b, out, n);
}

template <typename T>
void vsub(const T* a, const T* b, T* out, size_t n) {
    if (use_par(n)) par::vsub(a, b, out, n);
    else serial::vsub(a, b, out, n);
}

template <typename T>
void axpy(T alpha, const T* x, T* y, size_t n) {
    if (use_par(n)) par::axpy(alpha, x, y, n);
    else serial::axpy(alpha, x, y, n);
}

template <typename T>
void vmul_acc(const T* a, const T* b, T* y, size_t n) {
    if (use_par(n)) par::vmul_acc(a, b, y, n);
    else serial::vmul_acc(a, b, y, n);
}

template <typename T>
void vscale(const T* x, T alpha, T* out, size_t n) {
    if (use_par(n)) par::vscale(x, alpha, out, n);
    else serial::vscale(x, alpha, out, n);
}

template <typename T>
void sigmoid(const T* x, T* y, size_t n) {
    if (use_par(n * 8)) par::sigmoid(x, y, n);
    else serial::sigmoid(x, y, n);
}

template <typename T>
void relu(const T* x, T* y, size_t n) {
    if (use_par(n)) par::relu(x, y, n);
    else serial::relu(x, y, n);
}

template <typename T>
void step_positive(const T* a, T* m, size_t n) {
    if (use_par(n)) par::step_positive(a, m, n);
    else serial::step_positive(a, m, n);
}

template <typename T>
T reduce_sum(const T* x, size_t n) {
    if (use_par(n)) return par::reduce_sum(x, n);
    return serial::reduce_sum(x, n);
}

template <typename T>
void row_sum(const T* x, T* out, size_t rows, size_t cols) {
    if (use_par(rows * cols)) par::row_sum(x, out, rows, cols);
    else serial::row_sum(x, out, rows, cols);
}

template <typename T>
void col_sum(const T* x, T* out, size_t rows, size_t cols, bool acc = false) {
    if (use_par(rows * cols)) par::col_sum(x, out, rows, cols, acc);
    else serial::col_sum(x, out, rows, cols, acc);
}

template <typename T>
void mul_rowvec(const T* m, const T* v, T* out, size_t rows, size_t cols) {
    if (use_par(rows * cols)) par::mul_rowvec(m, v, out, rows, cols);
    else serial::mul_rowvec(m, v, out, rows, cols);
}

template <typename T>
void add_rowvec(const T* m, const T* v, T* out, size_t rows, size_t cols) {
    if (use_par(rows * cols)) par::add_rowvec(m, v, out, rows, cols);
    else serial::add_rowvec(m, v, out, rows, cols);
}

template <typename T>
void mul_rowvec_grad_vec(const T* g, const T* m, T* dv, size_t rows, size_t cols) {
    if (use_par(rows * cols)) par::mul_rowvec_grad_vec(g, m, dv, rows, cols);
    else serial::mul_rowvec_grad_vec(g, m, dv, rows, cols);
}

template <typename T>
void gather_rows(const T* tab, const uint32_t* idx, T* out, size_t nout, size_t cols) {
    if (use_par(nout * cols)) par::gather_rows(tab, idx, out, nout, cols);
    else serial::gather_rows(tab, idx, out, nout, cols);
}

template <typename T>
void scatter_add_rows(T* tab, const uint32_t* idx, const T* src, size_t nsrc, size_t cols) {
    if (use_par(nsrc * cols)) par::scatter_add_rows(tab, idx, src, nsrc, cols);
    else serial::scatter_add_rows(tab, idx, src, nsrc, cols);
}

}  // namespace hamprune::kernels
