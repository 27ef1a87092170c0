#include "crlc/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace crlc {

namespace {

void check_pair(const Partition& pred, const Partition& truth) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("metrics: partition lengths differ");
  if (pred.empty()) throw std::invalid_argument("metrics: empty partitions");
  for (int v : pred)
    if (v < 0) throw std::invalid_argument("metrics: negative label");
  for (int v : truth)
    if (v < 0) throw std::invalid_argument("metrics: negative label");
}

int block_count(const Partition& p) {
  int k = 0;
  for (int v : p) k = std::max(k, v + 1);
  return k;
}

Matrix contingency(const Partition& pred, const Partition& truth, int k) {
  Matrix m(k, k, 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i) m.at(pred[i], truth[i]) += 1.0;
  return m;
}

double comb2(double n) { return n * (n - 1.0) / 2.0; }

}  // namespace

std::vector<int> hungarian(const Matrix& cost) {
  if (cost.rows != cost.cols)
    throw std::invalid_argument("hungarian: matrix must be square");
  const int n = cost.rows;
  if (n == 0) throw std::invalid_argument("hungarian: empty matrix");
  for (double v : cost.data)
    if (!std::isfinite(v))
      throw std::invalid_argument("hungarian: costs must be finite");

  const double inf = std::numeric_limits<double>::infinity();
  // Shortest augmenting path with potentials, 1-indexed internally.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost.at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> result(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] != 0) result[p[j] - 1] = j - 1;
  return result;
}

double clustering_accuracy(const Partition& pred, const Partition& truth) {
  check_pair(pred, truth);
  const int k = std::max(block_count(pred), block_count(truth));
  const Matrix counts = contingency(pred, truth, k);
  Matrix cost(k, k);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) cost.at(i, j) = -counts.at(i, j);
  const auto match = hungarian(cost);
  double hits = 0.0;
  for (int i = 0; i < k; ++i) hits += counts.at(i, match[i]);
  return hits / static_cast<double>(pred.size());
}

double nmi(const Partition& pred, const Partition& truth) {
  check_pair(pred, truth);
  const int kp = block_count(pred), kt = block_count(truth);
  const double n = static_cast<double>(pred.size());
  Matrix joint(kp, kt, 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i)
    joint.at(pred[i], truth[i]) += 1.0;
  std::vector<double> rp(kp, 0.0), rt(kt, 0.0);
  for (int i = 0; i < kp; ++i)
    for (int j = 0; j < kt; ++j) {
      rp[i] += joint.at(i, j);
      rt[j] += joint.at(i, j);
    }
  double hp = 0.0, ht = 0.0, mi = 0.0;
  for (int i = 0; i < kp; ++i)
    if (rp[i] > 0.0) hp -= rp[i] / n * std::log(rp[i] / n);
  for (int j = 0; j < kt; ++j)
    if (rt[j] > 0.0) ht -= rt[j] / n * std::log(rt[j] / n);
  for (int i = 0; i < kp; ++i)
    for (int j = 0; j < kt; ++j) {
      const double nij = joint.at(i, j);
      if (nij > 0.0) mi += nij / n * std::log(nij * n / (rp[i] * rt[j]));
    }
  const double denom = 0.5 * (hp + ht);
  if (denom == 0.0) return 1.0;  // both partitions trivial and identical
  const double val = mi / denom;
  return std::min(1.0, std::max(0.0, val));
}

double ari(const Partition& pred, const Partition& truth) {
  check_pair(pred, truth);
  if (pred.size() < 2) throw std::invalid_argument("ari: needs N >= 2");
  const int kp = block_count(pred), kt = block_count(truth);
  Matrix joint(kp, kt, 0.0);
  for (std::size_t i = 0; i < pred.size(); ++i)
    joint.at(pred[i], truth[i]) += 1.0;
  std::vector<double> rp(kp, 0.0), rt(kt, 0.0);
  for (int i = 0; i < kp; ++i)
    for (int j = 0; j < kt; ++j) {
      rp[i] += joint.at(i, j);
      rt[j] += joint.at(i, j);
    }
  double index = 0.0;
  for (double v : joint.data) index += comb2(v);
  double sum_a = 0.0, sum_b = 0.0;
  for (double v : rp) sum_a += comb2(v);
  for (double v : rt) sum_b += comb2(v);
  const double total = comb2(static_cast<double>(pred.size()));
  const double expected = sum_a * sum_b / total;
  const double max_index = 0.5 * (sum_a + sum_b);
  const double denom = max_index - expected;
  if (denom == 0.0) return 1.0;  // both partitions trivial
  return (index - expected) / denom;
}

}  // namespace crlc
