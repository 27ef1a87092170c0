#pragma once

#include "crlc/matrix.hpp"
#include "crlc/rng.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace crlc {

// Nonparametric N x C store of per-sample cluster-assignment probabilities.
// Rows start uniform and move toward fresh probabilities by momentum:
//   row_n <- alpha * row_n + (1 - alpha) * q_hat.
// Single writer; the training loop serializes sampling and updates.
class MemoryBank {
 public:
  MemoryBank(int n, int c, double alpha, std::uint64_t seed);

  int size() const { return n_; }
  int classes() const { return c_; }
  double alpha() const { return alpha_; }

  std::span<const double> row(int n) const;

  void update(int n, std::span<const double> q_hat);

  // M - 1 indices drawn uniformly with replacement from [0, N) \ {exclude}.
  std::vector<int> sample_negatives(int m, int exclude);

  // Binary checkpoint: magic, version, N, C, alpha, row-major doubles.
  void save(const std::string& path) const;
  static MemoryBank load(const std::string& path);

 private:
  int n_;
  int c_;
  double alpha_;
  Matrix rows_;
  Rng rng_;
};

}  // namespace crlc
