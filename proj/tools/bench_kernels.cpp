// Times the OpenMP kernels against their serial reference implementations
// at the shapes the training loop actually uses and prints the speedup.

#include "crlc/kernels.hpp"
#include "crlc/rng.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <omp.h>

namespace {

using crlc::Matrix;

double time_of(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count() / reps;
}

void fill(Matrix& m, crlc::Rng& rng) {
  for (double& v : m.data) v = rng.uniform(-1.0, 1.0);
}

void report(const char* name, double flops, double serial_s, double parallel_s) {
  std::printf("%-22s serial %8.2f ms (%6.2f GF/s)   omp %8.2f ms (%6.2f GF/s)   speedup %.2fx\n",
              name, serial_s * 1e3, flops / serial_s / 1e9, parallel_s * 1e3,
              flops / parallel_s / 1e9, serial_s / parallel_s);
}

}  // namespace

int main() {
  crlc::Rng rng(1234);
  std::printf("threads: %d\n", omp_get_max_threads());

  {
    const int m = 512, k = 256, n = 256;
    Matrix a(m, k), b(k, n), c1(m, n), c2(m, n);
    fill(a, rng);
    fill(b, rng);
    const double flops = 2.0 * m * k * n;
    const double ts = time_of([&] { crlc::kernels::ref::matmul(a, b, c1); }, 10);
    const double tp = time_of([&] { crlc::kernels::matmul(a, b, c2); }, 10);
    report("matmul 512x256x256", flops, ts, tp);
  }
  {
    const int m = 512, k = 256, n = 512;
    Matrix a(m, k), b(n, k), c1(m, n), c2(m, n);
    fill(a, rng);
    fill(b, rng);
    const double flops = 2.0 * m * k * n;
    const double ts = time_of([&] { crlc::kernels::ref::matmul_nt(a, b, c1); }, 10);
    const double tp = time_of([&] { crlc::kernels::matmul_nt(a, b, c2); }, 10);
    report("matmul_nt 512x256x512", flops, ts, tp);
  }
  {
    const int k = 512, m = 256, n = 256;
    Matrix a(k, m), b(k, n), c1(m, n), c2(m, n);
    fill(a, rng);
    fill(b, rng);
    const double flops = 2.0 * k * m * n;
    const double ts = time_of([&] { crlc::kernels::ref::matmul_tn(a, b, c1); }, 10);
    const double tp = time_of([&] { crlc::kernels::matmul_tn(a, b, c2); }, 10);
    report("matmul_tn 512x256x256", flops, ts, tp);
  }
  {
    const int m = 2048, n = 512;
    Matrix u(m, n), q1(m, n), q2(m, n);
    fill(u, rng);
    const double flops = 5.0 * m * n;  // rough: exp + adds
    const double ts = time_of([&] { crlc::kernels::ref::softmax_rows(u, q1); }, 20);
    const double tp = time_of([&] { crlc::kernels::softmax_rows(u, q2); }, 20);
    report("softmax 2048x512", flops, ts, tp);
  }
  {
    const int m = 2048, n = 128;
    Matrix h(m, n), z1(m, n), z2(m, n);
    fill(h, rng);
    std::vector<double> norms;
    const double flops = 3.0 * m * n;
    const double ts =
        time_of([&] { crlc::kernels::ref::normalize_rows(h, z1, norms); }, 20);
    const double tp =
        time_of([&] { crlc::kernels::normalize_rows(h, z2, norms); }, 20);
    report("normalize 2048x128", flops, ts, tp);
  }
  return 0;
}
