#pragma once

#include "crlc/matrix.hpp"

namespace crlc::kernels {

// OpenMP-parallel dense kernels. Every parallel loop writes disjoint output
// elements and every reduction runs in a fixed serial order inside one
// thread, so results are bit-identical for any thread count or schedule.
// The serial reference implementations in kernels::ref use the plain
// textbook loop orders and exist for testing and benchmarking.

// C = A * B            A: m x k, B: k x n, C: m x n
void matmul(const Matrix& A, const Matrix& B, Matrix& C);

// C = A * B^T          A: m x k, B: n x k, C: m x n
void matmul_nt(const Matrix& A, const Matrix& B, Matrix& C);

// C = A^T * B          A: k x m, B: k x n, C: m x n
// With accumulate, adds into C instead of overwriting.
void matmul_tn(const Matrix& A, const Matrix& B, Matrix& C,
               bool accumulate = false);

// Y[i, :] += b
void add_bias(Matrix& Y, const std::vector<double>& b);

// out[j] = sum_i A[i, j]; with accumulate, adds into out.
void colsum(const Matrix& A, std::vector<double>& out, bool accumulate = false);

// Y = max(X, 0)
void relu(const Matrix& X, Matrix& Y);

// dX = dY where pre > 0, else 0
void relu_backward(const Matrix& dY, const Matrix& pre, Matrix& dX);

// Row-wise softmax with max subtraction.
void softmax_rows(const Matrix& U, Matrix& Q);

// Z[i,:] = H[i,:] / ||H[i,:]||; norms[i] = ||H[i,:]||.
// Throws std::domain_error if some row norm is below `min_norm`.
void normalize_rows(const Matrix& H, Matrix& Z, std::vector<double>& norms,
                    double min_norm = 1e-12);

namespace ref {
void matmul(const Matrix& A, const Matrix& B, Matrix& C);
void matmul_nt(const Matrix& A, const Matrix& B, Matrix& C);
void matmul_tn(const Matrix& A, const Matrix& B, Matrix& C);
void colsum(const Matrix& A, std::vector<double>& out);
void relu(const Matrix& X, Matrix& Y);
void softmax_rows(const Matrix& U, Matrix& Q);
void normalize_rows(const Matrix& H, Matrix& Z, std::vector<double>& norms,
                    double min_norm = 1e-12);
}  // namespace ref

}  // namespace crlc::kernels
