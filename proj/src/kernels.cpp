#include "crlc/kernels.hpp"

#include <cmath>
#include <stdexcept>

namespace crlc::kernels {

namespace {

void check(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

}  // namespace

void matmul(const Matrix& A, const Matrix& B, Matrix& C) {
  check(A.cols == B.rows, "matmul: inner dimensions differ");
  check(C.rows == A.rows && C.cols == B.cols, "matmul: bad output shape");
  const int m = A.rows, k = A.cols, n = B.cols;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    double* crow = C.row(i);
    for (int j = 0; j < n; ++j) crow[j] = 0.0;
    const double* arow = A.row(i);
    for (int t = 0; t < k; ++t) {
      const double a = arow[t];
      const double* brow = B.row(t);
      for (int j = 0; j < n; ++j) crow[j] += a * brow[j];
    }
  }
}

void matmul_nt(const Matrix& A, const Matrix& B, Matrix& C) {
  check(A.cols == B.cols, "matmul_nt: inner dimensions differ");
  check(C.rows == A.rows && C.cols == B.rows, "matmul_nt: bad output shape");
  const int m = A.rows, k = A.cols, n = B.rows;
  // Transpose B once so the inner loop runs contiguous axpy updates; the
  // per-element summation order (ascending t, one accumulator) is unchanged.
  std::vector<double> bt(static_cast<std::size_t>(k) * n);
#pragma omp parallel for schedule(static)
  for (int t = 0; t < k; ++t) {
    double* row = bt.data() + static_cast<std::size_t>(t) * n;
    for (int j = 0; j < n; ++j) row[j] = B.at(j, t);
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    const double* arow = A.row(i);
    double* crow = C.row(i);
    for (int j = 0; j < n; ++j) crow[j] = 0.0;
    for (int t = 0; t < k; ++t) {
      const double a = arow[t];
      const double* brow = bt.data() + static_cast<std::size_t>(t) * n;
      for (int j = 0; j < n; ++j) crow[j] += a * brow[j];
    }
  }
}

void matmul_tn(const Matrix& A, const Matrix& B, Matrix& C, bool accumulate) {
  check(A.rows == B.rows, "matmul_tn: inner dimensions differ");
  check(C.rows == A.cols && C.cols == B.cols, "matmul_tn: bad output shape");
  const int k = A.rows, m = A.cols, n = B.cols;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    double* crow = C.row(i);
    if (!accumulate)
      for (int j = 0; j < n; ++j) crow[j] = 0.0;
    for (int b = 0; b < k; ++b) {
      const double a = A.at(b, i);
      const double* brow = B.row(b);
      for (int j = 0; j < n; ++j) crow[j] += a * brow[j];
    }
  }
}

void add_bias(Matrix& Y, const std::vector<double>& b) {
  check(static_cast<int>(b.size()) == Y.cols, "add_bias: width mismatch");
#pragma omp parallel for schedule(static)
  for (int i = 0; i < Y.rows; ++i) {
    double* yrow = Y.row(i);
    for (int j = 0; j < Y.cols; ++j) yrow[j] += b[j];
  }
}

void colsum(const Matrix& A, std::vector<double>& out, bool accumulate) {
  if (!accumulate) out.assign(A.cols, 0.0);
  check(static_cast<int>(out.size()) == A.cols, "colsum: output width mismatch");
#pragma omp parallel for schedule(static)
  for (int j = 0; j < A.cols; ++j) {
    double acc = 0.0;
    for (int i = 0; i < A.rows; ++i) acc += A.at(i, j);
    out[j] += acc;
  }
}

void relu(const Matrix& X, Matrix& Y) {
  check(X.same_shape(Y), "relu: shape mismatch");
#pragma omp parallel for schedule(static)
  for (int i = 0; i < X.rows; ++i) {
    const double* x = X.row(i);
    double* y = Y.row(i);
    for (int j = 0; j < X.cols; ++j) y[j] = x[j] > 0.0 ? x[j] : 0.0;
  }
}

void relu_backward(const Matrix& dY, const Matrix& pre, Matrix& dX) {
  check(dY.same_shape(pre) && dY.same_shape(dX), "relu_backward: shape mismatch");
#pragma omp parallel for schedule(static)
  for (int i = 0; i < dY.rows; ++i) {
    const double* g = dY.row(i);
    const double* p = pre.row(i);
    double* d = dX.row(i);
    for (int j = 0; j < dY.cols; ++j) d[j] = p[j] > 0.0 ? g[j] : 0.0;
  }
}

void softmax_rows(const Matrix& U, Matrix& Q) {
  check(U.same_shape(Q), "softmax_rows: shape mismatch");
#pragma omp parallel for schedule(static)
  for (int i = 0; i < U.rows; ++i) {
    const double* u = U.row(i);
    double* q = Q.row(i);
    double mx = u[0];
    for (int j = 1; j < U.cols; ++j) mx = u[j] > mx ? u[j] : mx;
    double z = 0.0;
    for (int j = 0; j < U.cols; ++j) {
      q[j] = std::exp(u[j] - mx);
      z += q[j];
    }
    const double inv = 1.0 / z;
    for (int j = 0; j < U.cols; ++j) q[j] *= inv;
  }
}

void normalize_rows(const Matrix& H, Matrix& Z, std::vector<double>& norms,
                    double min_norm) {
  check(H.same_shape(Z), "normalize_rows: shape mismatch");
  norms.assign(H.rows, 0.0);
#pragma omp parallel for schedule(static)
  for (int i = 0; i < H.rows; ++i) {
    const double* h = H.row(i);
    double acc = 0.0;
    for (int j = 0; j < H.cols; ++j) acc += h[j] * h[j];
    norms[i] = std::sqrt(acc);
  }
  // The throw happens outside the parallel region.
  for (int i = 0; i < H.rows; ++i) {
    if (!(norms[i] > min_norm))
      throw std::domain_error("normalize_rows: row norm too small to normalize");
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < H.rows; ++i) {
    const double inv = 1.0 / norms[i];
    const double* h = H.row(i);
    double* z = Z.row(i);
    for (int j = 0; j < H.cols; ++j) z[j] = h[j] * inv;
  }
}

namespace ref {

void matmul(const Matrix& A, const Matrix& B, Matrix& C) {
  check(A.cols == B.rows && C.rows == A.rows && C.cols == B.cols,
        "ref::matmul: shape mismatch");
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < B.cols; ++j) {
      double acc = 0.0;
      for (int t = 0; t < A.cols; ++t) acc += A.at(i, t) * B.at(t, j);
      C.at(i, j) = acc;
    }
}

void matmul_nt(const Matrix& A, const Matrix& B, Matrix& C) {
  check(A.cols == B.cols && C.rows == A.rows && C.cols == B.rows,
        "ref::matmul_nt: shape mismatch");
  for (int i = 0; i < A.rows; ++i)
    for (int j = 0; j < B.rows; ++j) {
      double acc = 0.0;
      for (int t = 0; t < A.cols; ++t) acc += A.at(i, t) * B.at(j, t);
      C.at(i, j) = acc;
    }
}

void matmul_tn(const Matrix& A, const Matrix& B, Matrix& C) {
  check(A.rows == B.rows && C.rows == A.cols && C.cols == B.cols,
        "ref::matmul_tn: shape mismatch");
  for (int i = 0; i < A.cols; ++i)
    for (int j = 0; j < B.cols; ++j) {
      double acc = 0.0;
      for (int b = 0; b < A.rows; ++b) acc += A.at(b, i) * B.at(b, j);
      C.at(i, j) = acc;
    }
}

void colsum(const Matrix& A, std::vector<double>& out) {
  out.assign(A.cols, 0.0);
  for (int j = 0; j < A.cols; ++j)
    for (int i = 0; i < A.rows; ++i) out[j] += A.at(i, j);
}

void relu(const Matrix& X, Matrix& Y) {
  for (int i = 0; i < X.rows; ++i)
    for (int j = 0; j < X.cols; ++j) Y.at(i, j) = std::max(0.0, X.at(i, j));
}

void softmax_rows(const Matrix& U, Matrix& Q) {
  for (int i = 0; i < U.rows; ++i) {
    double mx = U.at(i, 0);
    for (int j = 1; j < U.cols; ++j) mx = std::max(mx, U.at(i, j));
    double z = 0.0;
    for (int j = 0; j < U.cols; ++j) z += std::exp(U.at(i, j) - mx);
    for (int j = 0; j < U.cols; ++j) Q.at(i, j) = std::exp(U.at(i, j) - mx) / z;
  }
}

void normalize_rows(const Matrix& H, Matrix& Z, std::vector<double>& norms,
                    double min_norm) {
  norms.assign(H.rows, 0.0);
  for (int i = 0; i < H.rows; ++i) {
    double acc = 0.0;
    for (int j = 0; j < H.cols; ++j) acc += H.at(i, j) * H.at(i, j);
    norms[i] = std::sqrt(acc);
    if (!(norms[i] > min_norm))
      throw std::domain_error("ref::normalize_rows: row norm too small");
    for (int j = 0; j < H.cols; ++j) Z.at(i, j) = H.at(i, j) / norms[i];
  }
}

}  // namespace ref

}  // namespace crlc::kernels
