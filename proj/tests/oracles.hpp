#pragma once

// Independent oracles for the test suites: central finite differences,
// permutation brute force for matching-based accuracy, and direct pair
// enumeration for the adjusted Rand index. These deliberately avoid the
// library's implementation paths.

#include "crlc/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

namespace oracles {

// Central finite differences of f at x.
inline std::vector<double> finite_diff(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& x, double h = 1e-5) {
  std::vector<double> g(x.size());
  std::vector<double> probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double fp = f(probe);
    probe[i] = x[i] - h;
    const double fm = f(probe);
    probe[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline double max_rel_error(const std::vector<double>& a,
                            const std::vector<double>& b,
                            double floor = 1e-8) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

// Max matched fraction over every cluster<->class permutation.
inline double brute_force_accuracy(const std::vector<int>& pred,
                                   const std::vector<int>& truth) {
  int k = 0;
  for (int v : pred) k = std::max(k, v + 1);
  for (int v : truth) k = std::max(k, v + 1);
  std::vector<int> perm(k);
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    int hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
      if (perm[pred[i]] == truth[i]) ++hits;
    best = std::max(best, static_cast<double>(hits) / pred.size());
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Hubert-Arabie ARI directly from pair counts.
inline double brute_force_ari(const std::vector<int>& pred,
                              const std::vector<int>& truth) {
  const std::size_t n = pred.size();
  double both_same = 0.0, pred_same = 0.0, truth_same = 0.0, total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      total += 1.0;
      const bool sp = pred[i] == pred[j];
      const bool st = truth[i] == truth[j];
      if (sp) pred_same += 1.0;
      if (st) truth_same += 1.0;
      if (sp && st) both_same += 1.0;
    }
  }
  const double expected = pred_same * truth_same / total;
  const double max_index = 0.5 * (pred_same + truth_same);
  if (max_index - expected == 0.0) return 1.0;
  return (both_same - expected) / (max_index - expected);
}

// Minimum assignment cost over all permutations.
inline double brute_force_assignment_cost(const crlc::Matrix& cost) {
  const int n = cost.rows;
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += cost.at(i, perm[i]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// All canonical labelings of n elements into at most max_blocks blocks
// (restricted growth strings).
inline std::vector<std::vector<int>> partitions_up_to(int n, int max_blocks) {
  std::vector<std::vector<int>> out;
  std::vector<int> cur(n, 0);
  std::function<void(int, int)> rec = [&](int i, int used) {
    if (i == n) {
      out.push_back(cur);
      return;
    }
    const int limit = std::min(used + 1, max_blocks);
    for (int b = 0; b < limit; ++b) {
      cur[i] = b;
      rec(i + 1, std::max(used, b + 1));
    }
  };
  rec(0, 0);
  return out;
}

}  // namespace oracles
