#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "crlc/critics.hpp"
#include "crlc/rng.hpp"

#include <cmath>

using namespace crlc;

namespace {

std::vector<double> random_simplex(int c, Rng& rng) {
  std::vector<double> q(c);
  double z = 0.0;
  for (double& v : q) {
    v = -std::log(1.0 - rng.uniform());
    z += v;
  }
  for (double& v : q) v /= z;
  return q;
}

double l2_to_uniform(const std::vector<double>& q) {
  const double r = 1.0 / q.size();
  double acc = 0.0;
  for (double v : q) acc += (v - r) * (v - r);
  return std::sqrt(acc);
}

}  // namespace

TEST_CASE("smooth: identity, uniform pull, and worked value") {
  CHECK(smooth(std::vector<double>{1.0, 0.0}, 0.0) ==
        std::vector<double>{1.0, 0.0});
  const auto s = smooth(std::vector<double>{1.0, 0.0}, 0.01);
  CHECK(s[0] == doctest::Approx(0.995));
  CHECK(s[1] == doctest::Approx(0.005));
  const auto full = smooth(std::vector<double>{0.2, 0.8}, 1.0);
  CHECK(full[0] == doctest::Approx(0.5));
  CHECK(full[1] == doctest::Approx(0.5));
  CHECK_THROWS_AS(smooth(std::vector<double>{1.0, 0.0}, 1.5),
                  std::invalid_argument);
}

TEST_CASE("smooth is a contraction toward uniform and stays on the simplex") {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const int c = 2 + static_cast<int>(rng.uniform_int(9));
    const auto q = random_simplex(c, rng);
    const double gamma = rng.uniform();
    const auto s = smooth(q, gamma);
    CHECK(on_simplex(s));
    CHECK(l2_to_uniform(s) ==
          doctest::Approx((1.0 - gamma) * l2_to_uniform(q)).epsilon(1e-9));
  }
}

TEST_CASE("critic_log_dot examples") {
  CHECK(critic_log_dot(std::vector<double>{1.0, 0.0, 0.0},
                       std::vector<double>{1.0, 0.0, 0.0}) == doctest::Approx(0.0));
  const std::vector<double> u4(4, 0.25);
  CHECK(critic_log_dot(u4, u4) == doctest::Approx(std::log(0.25)));
  CHECK(critic_log_dot(std::vector<double>{0.995, 0.005},
                       std::vector<double>{0.005, 0.995}) ==
        doctest::Approx(std::log(0.00995)).epsilon(1e-10));
  CHECK_THROWS_AS(critic_log_dot(std::vector<double>{1.0, 0.0},
                                 std::vector<double>{0.0, 1.0}),
                  std::domain_error);
}

TEST_CASE("critic_dot examples") {
  CHECK(critic_dot(std::vector<double>{0.0, 1.0}, std::vector<double>{0.0, 1.0}) ==
        doctest::Approx(1.0));
  CHECK(critic_dot(std::vector<double>{1.0, 0.0}, std::vector<double>{0.0, 1.0}) ==
        doctest::Approx(0.0));
  CHECK(critic_dot(std::vector<double>{0.5, 0.5}, std::vector<double>{0.5, 0.5}) ==
        doctest::Approx(0.5));
}

TEST_CASE("critic_neg_l2 examples") {
  const std::vector<double> p{0.3, 0.7};
  CHECK(critic_neg_l2(p, p) == doctest::Approx(0.0));
  CHECK(critic_neg_l2(std::vector<double>{1.0, 0.0},
                      std::vector<double>{0.0, 1.0}) == doctest::Approx(-2.0));
  CHECK(critic_neg_l2(std::vector<double>{0.7, 0.3},
                      std::vector<double>{0.4, 0.6}) == doctest::Approx(-0.18));
}

TEST_CASE("critic_neg_js examples and range") {
  const std::vector<double> p{0.3, 0.7};
  CHECK(critic_neg_js(p, p) == doctest::Approx(0.0));
  CHECK(critic_neg_js(std::vector<double>{1.0, 0.0},
                      std::vector<double>{0.0, 1.0}) ==
        doctest::Approx(-std::log(2.0)));
  CHECK(critic_neg_js(std::vector<double>{0.5, 0.5},
                      std::vector<double>{1.0, 0.0}) ==
        doctest::Approx(-0.215762).epsilon(1e-5));

  Rng rng(9);
  for (int t = 0; t < 300; ++t) {
    const int c = 2 + static_cast<int>(rng.uniform_int(7));
    const double v = critic_neg_js(random_simplex(c, rng), random_simplex(c, rng));
    CHECK(v <= 1e-12);
    CHECK(v >= -std::log(2.0) - 1e-12);
  }
}

TEST_CASE("critic_scaled_cosine examples") {
  const std::vector<double> z{1.0, 0.0};
  CHECK(critic_scaled_cosine(z, z, 0.1) == doctest::Approx(10.0));
  CHECK(critic_scaled_cosine(z, std::vector<double>{0.0, 1.0}, 0.1) ==
        doctest::Approx(0.0));
  CHECK(critic_scaled_cosine(z, std::vector<double>{-1.0, 0.0}, 0.5) ==
        doctest::Approx(-2.0));
  CHECK_THROWS_AS(critic_scaled_cosine(z, z, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(critic_scaled_cosine(z, z, -1.0), std::invalid_argument);
}

TEST_CASE("all critics are symmetric") {
  Rng rng(31);
  for (int t = 0; t < 200; ++t) {
    const int c = 2 + static_cast<int>(rng.uniform_int(8));
    const auto p = random_simplex(c, rng);
    const auto q = random_simplex(c, rng);
    for (CriticKind kind : {CriticKind::LogDot, CriticKind::Dot,
                            CriticKind::NegL2, CriticKind::NegJS}) {
      CHECK(prob_critic(kind, p, q) ==
            doctest::Approx(prob_critic(kind, q, p)).epsilon(1e-12));
    }
    std::vector<double> z1(c), z2(c);
    double n1 = 0.0, n2 = 0.0;
    for (int i = 0; i < c; ++i) {
      z1[i] = rng.normal();
      z2[i] = rng.normal();
      n1 += z1[i] * z1[i];
      n2 += z2[i] * z2[i];
    }
    for (int i = 0; i < c; ++i) {
      z1[i] /= std::sqrt(n1);
      z2[i] /= std::sqrt(n2);
    }
    CHECK(critic_scaled_cosine(z1, z2, 0.1) ==
          doctest::Approx(critic_scaled_cosine(z2, z1, 0.1)));
  }
}

TEST_CASE("log_dot is nonpositive with equality only at matching one-hots") {
  Rng rng(17);
  for (int t = 0; t < 300; ++t) {
    const int c = 2 + static_cast<int>(rng.uniform_int(8));
    const auto p = random_simplex(c, rng);
    const auto q = random_simplex(c, rng);
    CHECK(critic_log_dot(p, q) <= 1e-12);
  }
  // Interior points are strictly negative.
  const std::vector<double> u{0.5, 0.5};
  CHECK(critic_log_dot(u, u) < 0.0);
}

TEST_CASE("C=2 grid: dot optimum at one-hot corners, L2/JS maxima on the diagonal") {
  // 0.01-step sweep of ([a, 1-a], [b, 1-b]).
  double best_dot = -1e9, worst_dot = 1e9;
  double best_a = -1, best_b = -1, worst_a = -1, worst_b = -1;
  for (int i = 0; i <= 100; ++i) {
    for (int j = 0; j <= 100; ++j) {
      const std::vector<double> p{i / 100.0, 1.0 - i / 100.0};
      const std::vector<double> q{j / 100.0, 1.0 - j / 100.0};
      const double d = critic_dot(p, q);
      if (d > best_dot) { best_dot = d; best_a = i / 100.0; best_b = j / 100.0; }
      if (d < worst_dot) { worst_dot = d; worst_a = i / 100.0; worst_b = j / 100.0; }
      // For the diagonal critics the row maximum must sit at p = q.
      CHECK(critic_neg_l2(p, q) <= critic_neg_l2(p, p) + 1e-12);
      CHECK(critic_neg_js(p, q) <= critic_neg_js(p, p) + 1e-12);
    }
  }
  CHECK(best_dot == doctest::Approx(1.0));
  CHECK((best_a == 0.0 || best_a == 1.0));
  CHECK(best_a == best_b);
  CHECK(worst_dot == doctest::Approx(0.0));
  CHECK((worst_a == 0.0 || worst_a == 1.0));
  CHECK(worst_b == doctest::Approx(1.0 - worst_a));
}

TEST_CASE("critic_grad_fd matches the analytic log_dot gradient direction") {
  Rng rng(23);
  for (int t = 0; t < 50; ++t) {
    const int c = 2 + static_cast<int>(rng.uniform_int(5));
    const auto p = smooth(random_simplex(c, rng), 0.01);
    const auto q = smooth(random_simplex(c, rng), 0.01);
    const auto fd = critic_grad_fd(CriticKind::LogDot, p, q);
    // d log(p.q) / d p_c = q_c / (p.q)
    double dot = 0.0;
    for (int i = 0; i < c; ++i) dot += p[i] * q[i];
    for (int i = 0; i < c; ++i)
      CHECK(fd[i] == doctest::Approx(q[i] / dot).epsilon(1e-6));
  }
}

TEST_CASE("prob_critic rejects the feature critic") {
  const std::vector<double> p{0.5, 0.5};
  CHECK_THROWS_AS(prob_critic(CriticKind::ScaledCosine, p, p),
                  std::invalid_argument);
}
