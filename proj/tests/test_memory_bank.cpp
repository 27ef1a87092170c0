#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "crlc/critics.hpp"
#include "crlc/memory_bank.hpp"

#include <cmath>
#include <cstdio>
#include <map>

using namespace crlc;

TEST_CASE("bank_init: uniform rows, argument checks") {
  MemoryBank bank(3, 2, 0.5, 1);
  for (int n = 0; n < 3; ++n) {
    const auto r = bank.row(n);
    CHECK(r[0] == doctest::Approx(0.5));
    CHECK(r[1] == doctest::Approx(0.5));
  }
  MemoryBank big(17, 5, 0.25, 9);
  for (int n = 0; n < 17; ++n) {
    double sum = 0.0;
    for (double v : big.row(n)) sum += v;
    CHECK(sum == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(MemoryBank(0, 2, 0.5, 1), std::invalid_argument);
  CHECK_THROWS_AS(MemoryBank(3, 1, 0.5, 1), std::invalid_argument);
  CHECK_THROWS_AS(MemoryBank(3, 2, 1.5, 1), std::invalid_argument);
}

TEST_CASE("bank_update: momentum arithmetic and edge momenta") {
  MemoryBank bank(2, 2, 0.5, 1);
  bank.update(0, std::vector<double>{1.0, 0.0});
  CHECK(bank.row(0)[0] == doctest::Approx(0.75));
  CHECK(bank.row(0)[1] == doctest::Approx(0.25));

  MemoryBank keep(2, 2, 1.0, 1);
  keep.update(0, std::vector<double>{1.0, 0.0});
  CHECK(keep.row(0)[0] == doctest::Approx(0.5));

  MemoryBank replace(2, 2, 0.0, 1);
  replace.update(0, std::vector<double>{1.0, 0.0});
  CHECK(replace.row(0)[0] == doctest::Approx(1.0));

  CHECK_THROWS_AS(bank.update(5, std::vector<double>{0.5, 0.5}),
                  std::out_of_range);
}

TEST_CASE("rows stay on the simplex under arbitrary update sequences") {
  Rng rng(33);
  MemoryBank bank(8, 4, 0.7, 2);
  for (int step = 0; step < 500; ++step) {
    std::vector<double> q(4);
    double z = 0.0;
    for (double& v : q) {
      v = rng.uniform();
      z += v;
    }
    for (double& v : q) v /= z;
    bank.update(static_cast<int>(rng.uniform_int(8)), q);
  }
  for (int n = 0; n < 8; ++n) CHECK(on_simplex(bank.row(n)));
}

TEST_CASE("update contracts toward the new probability with factor alpha") {
  MemoryBank bank(1, 3, 0.3, 4);
  const std::vector<double> target{0.2, 0.5, 0.3};
  // ||row - target|| shrinks by alpha each update, in any norm.
  double dist = 0.0;
  for (int c = 0; c < 3; ++c) dist += std::abs(bank.row(0)[c] - target[c]);
  for (int it = 0; it < 5; ++it) {
    bank.update(0, target);
    double next = 0.0;
    for (int c = 0; c < 3; ++c) next += std::abs(bank.row(0)[c] - target[c]);
    CHECK(next == doctest::Approx(0.3 * dist).epsilon(1e-9));
    dist = next;
  }
}

TEST_CASE("sampling: exclusion, N=2 degenerate case, determinism") {
  MemoryBank two(2, 2, 0.5, 11);
  const auto negs = two.sample_negatives(4, 0);
  REQUIRE(negs.size() == 3);
  for (int i : negs) CHECK(i == 1);

  MemoryBank a(10, 2, 0.5, 5), b(10, 2, 0.5, 5);
  CHECK(a.sample_negatives(64, 3) == b.sample_negatives(64, 3));

  MemoryBank c(10, 2, 0.5, 6);
  for (int rep = 0; rep < 100; ++rep)
    for (int i : c.sample_negatives(16, 7)) CHECK(i != 7);

  MemoryBank lone(1, 2, 0.5, 1);
  CHECK_THROWS_AS(lone.sample_negatives(4, 0), std::invalid_argument);
}

TEST_CASE("sampling is uniform over the eligible indices") {
  MemoryBank bank(10, 2, 0.5, 123);
  std::map<int, int> counts;
  const int draws = 100000;
  int done = 0;
  while (done < draws) {
    for (int i : bank.sample_negatives(101, 0)) {
      counts[i] += 1;
      if (++done >= draws) break;
    }
  }
  for (int i = 1; i < 10; ++i) {
    const double freq = counts[i] / static_cast<double>(draws);
    CHECK(freq == doctest::Approx(1.0 / 9.0).epsilon(0.02));
  }
  CHECK(counts.count(0) == 0);
}

TEST_CASE("checkpoint roundtrip") {
  MemoryBank bank(5, 3, 0.5, 77);
  bank.update(2, std::vector<double>{0.7, 0.2, 0.1});
  bank.update(4, std::vector<double>{0.1, 0.1, 0.8});
  const std::string path = "bank_roundtrip.bin";
  bank.save(path);
  const MemoryBank loaded = MemoryBank::load(path);
  CHECK(loaded.size() == 5);
  CHECK(loaded.classes() == 3);
  CHECK(loaded.alpha() == doctest::Approx(0.5));
  for (int n = 0; n < 5; ++n) {
    const auto r1 = bank.row(n);
    const auto r2 = loaded.row(n);
    for (int c = 0; c < 3; ++c) CHECK(r1[c] == r2[c]);
  }
  std::remove(path.c_str());
  CHECK_THROWS_AS(MemoryBank::load("missing_bank.bin"), std::runtime_error);
}
