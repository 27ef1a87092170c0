#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "crlc/data.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

using namespace crlc;

TEST_CASE("gen_mixture: balance, determinism, argument checks") {
  const Dataset ds = gen_mixture(4, 16, 500, 6.0, 7);
  CHECK(ds.size() == 2000);
  CHECK(ds.dim() == 16);
  std::vector<int> counts(4, 0);
  for (int l : ds.labels) counts[l]++;
  for (int c = 0; c < 4; ++c) CHECK(counts[c] == 500);

  const Dataset again = gen_mixture(4, 16, 500, 6.0, 7);
  CHECK(ds.features.data == again.features.data);
  const Dataset other = gen_mixture(4, 16, 500, 6.0, 8);
  CHECK(ds.features.data != other.features.data);

  CHECK_THROWS_AS(gen_mixture(1, 16, 10, 6.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(gen_mixture(4, 1, 10, 6.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(gen_mixture(4, 16, 10, 0.0, 1), std::invalid_argument);
}

TEST_CASE("well-separated mixture is solved by nearest-true-mean classification") {
  const int classes = 4, dim = 16, per_class = 250;
  const Dataset ds = gen_mixture(classes, dim, per_class, 10.0, 3);
  // Recover the class means empirically (they are not exported).
  Matrix means(classes, dim, 0.0);
  for (int i = 0; i < ds.size(); ++i)
    for (int d = 0; d < dim; ++d)
      means.at(ds.labels[i], d) += ds.features.at(i, d) / per_class;
  int hits = 0;
  for (int i = 0; i < ds.size(); ++i) {
    int best = 0;
    double best_d = 1e300;
    for (int c = 0; c < classes; ++c) {
      double acc = 0.0;
      for (int d = 0; d < dim; ++d) {
        const double diff = ds.features.at(i, d) - means.at(c, d);
        acc += diff * diff;
      }
      if (acc < best_d) {
        best_d = acc;
        best = c;
      }
    }
    if (best == ds.labels[i]) ++hits;
  }
  CHECK(static_cast<double>(hits) / ds.size() >= 0.999);
}

TEST_CASE("make_views: identity config and stochasticity") {
  const std::vector<double> x{1.0, -2.0, 3.0};
  ViewConfig zero;
  zero.noise_sigma = 0.0;
  zero.mask_prob = 0.0;
  zero.scale_jitter = 0.0;
  Rng rng(1);
  const auto [v1, v2] = make_views(x, zero, rng);
  CHECK(v1 == x);
  CHECK(v2 == x);

  ViewConfig noisy;
  noisy.noise_sigma = 0.5;
  noisy.mask_prob = 0.0;
  noisy.scale_jitter = 0.0;
  Rng rng2(2);
  const auto [w1, w2] = make_views(x, noisy, rng2);
  CHECK(w1 != w2);
  CHECK(w1.size() == x.size());

  ViewConfig bad;
  bad.mask_prob = 1.0;
  CHECK_THROWS_AS(make_view(x, bad, rng2), std::invalid_argument);
}

TEST_CASE("noise-only views have the expected mean squared displacement") {
  const int dim = 32;
  std::vector<double> x(dim, 0.7);
  ViewConfig cfg;
  cfg.noise_sigma = 0.3;
  cfg.mask_prob = 0.0;
  cfg.scale_jitter = 0.0;
  Rng rng(99);
  double acc = 0.0;
  const int draws = 10000;
  for (int t = 0; t < draws; ++t) {
    const auto v = make_view(x, cfg, rng);
    for (int d = 0; d < dim; ++d) acc += (v[d] - x[d]) * (v[d] - x[d]);
  }
  const double expected = dim * cfg.noise_sigma * cfg.noise_sigma;
  CHECK(acc / draws == doctest::Approx(expected).epsilon(0.05));
}

TEST_CASE("csv roundtrip is bit-exact") {
  Dataset ds = gen_mixture(3, 5, 20, 4.0, 17);
  ds.labels[3] = -1;  // include an unlabeled row
  const std::string path = "roundtrip.csv";
  save_csv(ds, path);
  const Dataset back = load_csv(path);
  CHECK(back.features.data == ds.features.data);
  CHECK(back.labels == ds.labels);
  std::remove(path.c_str());
}

TEST_CASE("csv errors carry line numbers and schema details") {
  const std::string path = "bad.csv";
  {
    std::ofstream f(path);
    f << "f0,f1,label\n0.5,1.5,0\n0.25,oops,1\n";
  }
  CHECK_THROWS_WITH_AS(load_csv(path), doctest::Contains("line 3"),
                       std::runtime_error);
  {
    std::ofstream f(path);
    f << "f0,f1,label\n0.5,1.5,0\n0.25,0\n";
  }
  CHECK_THROWS_WITH_AS(load_csv(path), doctest::Contains("line 3"),
                       std::runtime_error);
  {
    std::ofstream f(path);
    f << "f0,f1\n0.5,1.5\n";
  }
  CHECK_THROWS_AS(load_csv(path), std::runtime_error);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_csv("does_not_exist.csv"), std::runtime_error);
}

TEST_CASE("fully unlabeled csv loads with labels -1") {
  const std::string path = "unlabeled.csv";
  {
    std::ofstream f(path);
    f << "f0,f1,label\n1,2,-1\n3,4,-1\n";
  }
  const Dataset ds = load_csv(path);
  CHECK(ds.size() == 2);
  for (int l : ds.labels) CHECK(l == -1);
  std::remove(path.c_str());
}

TEST_CASE("sample_labeled: per-class counts, determinism, errors") {
  const Dataset ds = gen_mixture(10, 4, 30, 5.0, 21);
  const auto idx = sample_labeled(ds, 1, 5);
  REQUIRE(idx.size() == 10);
  std::set<int> seen_class;
  for (int i : idx) seen_class.insert(ds.labels[i]);
  CHECK(seen_class.size() == 10);

  CHECK(sample_labeled(ds, 1, 5) == idx);
  CHECK(sample_labeled(ds, 1, 6) != idx);

  const auto idx3 = sample_labeled(ds, 3, 9);
  std::vector<int> hist(10, 0);
  for (int i : idx3) hist[ds.labels[i]]++;
  for (int c = 0; c < 10; ++c) CHECK(hist[c] == 3);
  std::set<int> unique(idx3.begin(), idx3.end());
  CHECK(unique.size() == idx3.size());  // without replacement

  CHECK_THROWS_AS(sample_labeled(ds, 31, 5), std::invalid_argument);

  Dataset part = ds;
  for (int i = 0; i < part.size(); ++i)
    if (part.labels[i] == 2) part.labels[i] = -1;
  CHECK_THROWS_AS(sample_labeled(part, 1, 5), std::invalid_argument);
}

TEST_CASE("batch sampler shuffles per epoch and drops the short tail") {
  BatchSampler sampler(103, 20, 3);
  CHECK(sampler.batches_per_epoch() == 5);
  const auto e0 = sampler.epoch_batches(0);
  REQUIRE(e0.size() == 5);
  std::set<int> seen;
  for (const auto& b : e0) {
    CHECK(b.size() == 20);
    seen.insert(b.begin(), b.end());
  }
  CHECK(seen.size() == 100);  // no index twice within an epoch

  CHECK(sampler.epoch_batches(0) == e0);     // deterministic
  CHECK(sampler.epoch_batches(1) != e0);     // reshuffled
  BatchSampler same(103, 20, 3);
  CHECK(same.epoch_batches(7) == sampler.epoch_batches(7));
}
