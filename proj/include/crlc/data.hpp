#pragma once

#include "crlc/matrix.hpp"
#include "crlc/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace crlc {

// Vector datasets: synthetic Gaussian mixtures with stochastic views, plus
// CSV ingestion (header f0,...,f{D-1},label; label -1 means unlabeled).

struct Dataset {
  Matrix features;          // N x D
  std::vector<int> labels;  // -1 or 0..C-1
  int class_count = 0;

  int size() const { return features.rows; }
  int dim() const { return features.cols; }
  void validate() const;
};

// Class means drawn uniformly on the sphere of radius `separation`, unit
// isotropic within-class noise, exactly n_per_class samples per class in
// class-major order.
Dataset gen_mixture(int classes, int dim, int n_per_class, double separation,
                    std::uint64_t seed);

struct ViewConfig {
  double noise_sigma = 0.5;
  double mask_prob = 0.1;    // in [0, 1)
  double scale_jitter = 0.1;

  void validate() const;
};

// One stochastic view: additive Gaussian noise, then independent coordinate
// masking, then a global scale by (1 + u), u ~ U(-jitter, jitter).
std::vector<double> make_view(std::span<const double> x, const ViewConfig& cfg,
                              Rng& rng);

// Two independent views of the same sample.
std::pair<std::vector<double>, std::vector<double>> make_views(
    std::span<const double> x, const ViewConfig& cfg, Rng& rng);

Dataset load_csv(const std::string& path);
void save_csv(const Dataset& ds, const std::string& path);

// Exactly n_per_class labeled indices per class, drawn uniformly without
// replacement; throws if some class has fewer labeled candidates.
std::vector<int> sample_labeled(const Dataset& ds, int n_per_class,
                                std::uint64_t seed);

// Epoch-wise shuffle without replacement; the last short batch is dropped
// so the contrastive candidate count stays constant.
class BatchSampler {
 public:
  BatchSampler(int n, int batch_size, std::uint64_t seed);
  // Batches of the given epoch, deterministic in (seed, epoch).
  std::vector<std::vector<int>> epoch_batches(int epoch) const;
  int batches_per_epoch() const;

 private:
  int n_;
  int batch_;
  std::uint64_t seed_;
};

}  // namespace crlc
