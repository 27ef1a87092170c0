#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "crlc/losses.hpp"
#include "crlc/rng.hpp"

#include "oracles.hpp"

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

std::vector<double> softmax(const std::vector<double>& u) {
  double mx = u[0];
  for (double v : u) mx = std::max(mx, v);
  std::vector<double> q(u.size());
  double z = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    q[i] = std::exp(u[i] - mx);
    z += q[i];
  }
  for (double& v : q) v /= z;
  return q;
}

ProbBatch random_batch(int c, int m, Rng& rng) {
  ProbBatch b;
  b.rows = Matrix(m, c);
  for (int i = 0; i < m; ++i) {
    const auto row = random_simplex(c, rng);
    std::copy(row.begin(), row.end(), b.rows.row(i));
  }
  b.positive_index = static_cast<int>(rng.uniform_int(m));
  return b;
}

// Paper-form gradient at gamma = 0, transcribed term for term; a second
// algebraic route to check the chain-rule implementation against.
std::vector<double> textbook_grad(const std::vector<double>& anchor,
                                  const ProbBatch& batch) {
  const int c = static_cast<int>(anchor.size());
  const int m = batch.rows.rows;
  std::vector<double> g(c, 0.0);
  double denom_all = 0.0;
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < c; ++k) denom_all += anchor[k] * batch.rows.at(i, k);
  double denom_pos = 0.0;
  for (int k = 0; k < c; ++k)
    denom_pos += anchor[k] * batch.rows.at(batch.positive_index, k);
  for (int t = 0; t < c; ++t) {
    double num = 0.0;
    for (int i = 0; i < m; ++i) num += anchor[t] * batch.rows.at(i, t);
    g[t] = num / denom_all -
           anchor[t] * batch.rows.at(batch.positive_index, t) / denom_pos;
  }
  return g;
}

}  // namespace

TEST_CASE("contrast_from_scores: trivial and worked values") {
  CHECK(contrast_from_scores(std::vector<double>{3.7}, 0) == doctest::Approx(0.0));
  CHECK(contrast_from_scores(std::vector<double>{1.0, 1.0, 1.0, 1.0}, 2) ==
        doctest::Approx(std::log(4.0)));
  CHECK(contrast_from_scores(std::vector<double>{5.0, 0.0, 0.0}, 0) ==
        doctest::Approx(0.0133859).epsilon(1e-5));
  CHECK_THROWS_AS(contrast_from_scores(std::vector<double>{1.0, 2.0}, 5),
                  std::invalid_argument);
}

TEST_CASE("contrast_from_scores is nonnegative and shift-invariant") {
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    const int m = 1 + static_cast<int>(rng.uniform_int(12));
    std::vector<double> s(m);
    for (double& v : s) v = rng.uniform(-8.0, 8.0);
    const int pos = static_cast<int>(rng.uniform_int(m));
    const double base = contrast_from_scores(s, pos);
    CHECK(base >= 0.0);
    const double shift = rng.uniform(-30.0, 30.0);
    std::vector<double> shifted = s;
    for (double& v : shifted) v += shift;
    CHECK(contrast_from_scores(shifted, pos) ==
          doctest::Approx(base).epsilon(1e-9));
  }
}

TEST_CASE("loss_fc worked examples") {
  // Two anchors equal to their positives, the other candidate orthogonal.
  Matrix anchors(2, 2), cands(2, 2);
  anchors.at(0, 0) = 1.0;
  anchors.at(1, 1) = 1.0;
  cands.at(0, 0) = 1.0;
  cands.at(1, 1) = 1.0;
  const double expected = std::log(1.0 + std::exp(-10.0));
  CHECK(loss_fc(anchors, cands, {0, 1}, 0.1) ==
        doctest::Approx(expected).epsilon(1e-9));

  // Single pair: the positive is the only candidate.
  Matrix a1(1, 2), c1(1, 2);
  a1.at(0, 0) = 1.0;
  c1.at(0, 1) = 1.0;
  CHECK(loss_fc(a1, c1, {0}, 0.1) == doctest::Approx(0.0));

  // All candidates identical: indistinguishable scores give log M.
  Matrix csame(4, 2);
  for (int i = 0; i < 4; ++i) csame.at(i, 0) = 1.0;
  Matrix a4(4, 2);
  for (int i = 0; i < 4; ++i) a4.at(i, 0) = 1.0;
  CHECK(loss_fc(a4, csame, {0, 1, 2, 3}, 0.1) == doctest::Approx(std::log(4.0)));

  CHECK_THROWS_AS(loss_fc(anchors, cands, {0}, 0.1), std::invalid_argument);
}

TEST_CASE("loss_pc examples") {
  CriticConfig cfg;
  cfg.kind = CriticKind::LogDot;
  cfg.gamma = 0.0;

  // All candidates identical to the anchor: log M for any critic.
  for (CriticKind kind : {CriticKind::LogDot, CriticKind::Dot, CriticKind::NegL2,
                          CriticKind::NegJS}) {
    ProbBatch b;
    b.anchor = {0.6, 0.4};
    b.rows = Matrix(5, 2);
    for (int i = 0; i < 5; ++i) {
      b.rows.at(i, 0) = 0.6;
      b.rows.at(i, 1) = 0.4;
    }
    b.positive_index = 3;
    CriticConfig c2 = cfg;
    c2.kind = kind;
    CHECK(loss_pc(b, c2) == doctest::Approx(std::log(5.0)).epsilon(1e-9));
  }

  ProbBatch single;
  single.anchor = {0.9, 0.1};
  single.rows = Matrix(1, 2);
  single.rows.at(0, 0) = 0.2;
  single.rows.at(0, 1) = 0.8;
  single.positive_index = 0;
  CHECK(loss_pc(single, cfg) == doctest::Approx(0.0));

  ProbBatch worked;
  worked.anchor = {0.9, 0.1};
  worked.rows = Matrix(2, 2);
  worked.rows.at(0, 0) = 0.9;
  worked.rows.at(0, 1) = 0.1;
  worked.rows.at(1, 0) = 0.1;
  worked.rows.at(1, 1) = 0.9;
  worked.positive_index = 0;
  CHECK(loss_pc(worked, cfg) == doctest::Approx(0.198451).epsilon(1e-5));

  // Un-smoothed disjoint one-hots poison the log: domain error.
  ProbBatch corner;
  corner.anchor = {1.0, 0.0};
  corner.rows = Matrix(1, 2);
  corner.rows.at(0, 1) = 1.0;
  corner.positive_index = 0;
  CHECK_THROWS_AS(loss_pc(corner, cfg), std::domain_error);
  CriticConfig smoothed = cfg;
  smoothed.gamma = 0.01;
  CHECK_NOTHROW(loss_pc(corner, smoothed));
}

TEST_CASE("marginal_entropy examples") {
  Matrix ones(3, 3);
  for (int i = 0; i < 3; ++i) ones.at(i, 0) = 1.0;
  CHECK(marginal_entropy(ones) == doctest::Approx(0.0));

  Matrix two(2, 2);
  two.at(0, 0) = 1.0;
  two.at(1, 1) = 1.0;
  CHECK(marginal_entropy(two) == doctest::Approx(std::log(2.0)));

  Matrix four(4, 2);
  four.at(0, 0) = four.at(1, 0) = 1.0;
  four.at(2, 1) = four.at(3, 1) = 1.0;
  CHECK(marginal_entropy(four) == doctest::Approx(std::log(2.0)));

  Matrix empty;
  CHECK_THROWS_AS(marginal_entropy(empty), std::invalid_argument);
}

TEST_CASE("loss_cluster composes loss_pc and the anchor entropy") {
  CriticConfig cfg;
  cfg.kind = CriticKind::LogDot;
  cfg.gamma = 0.0;
  ProbBatch b;
  b.anchor = {0.9, 0.1};
  b.rows = Matrix(2, 2);
  b.rows.at(0, 0) = 0.9;
  b.rows.at(0, 1) = 0.1;
  b.rows.at(1, 0) = 0.1;
  b.rows.at(1, 1) = 0.9;
  b.positive_index = 0;

  LossWeights w0;
  w0.lambda1 = 0.0;
  CHECK(loss_cluster(b, w0, cfg) == doctest::Approx(loss_pc(b, cfg)));

  LossWeights w1;
  w1.lambda1 = 1.0;
  CHECK(loss_cluster(b, w1, cfg) == doctest::Approx(-0.126632).epsilon(1e-4));

  ProbBatch uni;
  uni.anchor = {0.5, 0.5};
  uni.rows = b.rows;
  uni.positive_index = 0;
  CHECK(loss_cluster(uni, w1, cfg) ==
        doctest::Approx(loss_pc(uni, cfg) - std::log(2.0)));
}

TEST_CASE("loss_crlc arithmetic") {
  LossWeights w;
  w.lambda1 = 0.0;
  w.lambda2 = 0.0;
  CHECK(loss_crlc(1.25, 9.0, 4.0, w) == doctest::Approx(1.25));
  w.lambda1 = 1.0;
  w.lambda2 = 10.0;
  CHECK(loss_crlc(1.0, 0.2, 0.5, w) == doctest::Approx(2.5));
}

TEST_CASE("loss_crlc_semi") {
  LossWeights w;
  w.lambda3 = 0.0;
  CHECK(loss_crlc_semi(2.0, {}, w) == doctest::Approx(2.0));
  w.lambda3 = 1.0;
  CHECK(loss_crlc_semi(2.0, {0.0, 0.0}, w) == doctest::Approx(2.0));
  CHECK(loss_crlc_semi(1.0, {std::log(0.5)}, w) ==
        doctest::Approx(1.0 + std::log(2.0)));
  CHECK_THROWS_AS(loss_crlc_semi(1.0, {}, w), std::invalid_argument);
}

TEST_CASE("grad_pc_logits: saturation example and symmetry zero") {
  // One-hot anchor against a near-one-hot positive: exactly zero critic-term
  // gradient without smoothing.
  const std::vector<double> q{0.0, 1.0, 0.0};
  const std::vector<double> p{0.998, 0.001, 0.001};
  const auto g0 = grad_critic_logdot(q, p);
  for (double v : g0) CHECK(std::abs(v) <= 1e-12);

  // With smoothing the critic gradient pushes mass toward class 1.
  const auto gs = grad_critic_logdot(smooth(q, 0.01), smooth(p, 0.01));
  CHECK(gs[0] > 0.0);  // maximizing f raises logit 1; descent on -f does too

  // Fully uniform instance: zero gradient by symmetry.
  ProbBatch b;
  b.anchor = {0.25, 0.25, 0.25, 0.25};
  b.rows = Matrix(3, 4, 0.25);
  b.positive_index = 1;
  const std::vector<double> logits(4, 0.3);
  const auto g = grad_pc_logits(logits, b, 0.0);
  for (double v : g) CHECK(std::abs(v) <= 1e-14);
}

TEST_CASE("grad_pc_logits equals the paper-form expression at gamma = 0") {
  Rng rng(77);
  for (int t = 0; t < 100; ++t) {
    const int c = 2 + static_cast<int>(rng.uniform_int(9));
    const int m = 2 + static_cast<int>(rng.uniform_int(15));
    ProbBatch b = random_batch(c, m, rng);
    std::vector<double> logits(c);
    for (double& v : logits) v = rng.uniform(-3.0, 3.0);
    b.anchor = softmax(logits);
    const auto chain = grad_pc_logits(logits, b, 0.0);
    const auto paper = textbook_grad(b.anchor, b);
    CHECK(oracles::max_rel_error(chain, paper) < 1e-10);
  }
}

TEST_CASE("grad_pc_logits matches finite differences of loss_pc") {
  Rng rng(101);
  double worst = 0.0;
  for (int t = 0; t < 120; ++t) {
    const int c = 2 + static_cast<int>(rng.uniform_int(9));   // 2..10
    const int m = 2 + static_cast<int>(rng.uniform_int(15));  // 2..16
    const double gamma = t % 2 == 0 ? 0.0 : 0.01;
    ProbBatch b = random_batch(c, m, rng);
    std::vector<double> logits(c);
    for (double& v : logits) v = rng.uniform(-3.0, 3.0);
    b.anchor = softmax(logits);

    CriticConfig cfg;
    cfg.kind = CriticKind::LogDot;
    cfg.gamma = gamma;
    auto f = [&](const std::vector<double>& u) {
      ProbBatch probe = b;
      probe.anchor = softmax(u);
      return loss_pc(probe, cfg);
    };
    const auto fd = oracles::finite_diff(f, logits);
    const auto analytic = grad_pc_logits(logits, b, gamma);
    worst = std::max(worst, oracles::max_rel_error(fd, analytic));

    double sum = 0.0;
    for (double v : analytic) sum += v;
    CHECK(std::abs(sum) <= 1e-9);
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("grad_pc_logits flags a zero denominator") {
  ProbBatch b;
  b.anchor = {1.0, 0.0};
  b.rows = Matrix(1, 2);
  b.rows.at(0, 1) = 1.0;
  b.positive_index = 0;
  // exp(-1600) underflows to zero, so the softmax is an exact one-hot and
  // the positive dot product vanishes.
  const std::vector<double> logits{800.0, -800.0};
  CHECK_THROWS_AS(grad_pc_logits(logits, b, 0.0), std::domain_error);
}

TEST_CASE("info_nce_estimate") {
  CHECK(info_nce_estimate(0.0, 8) == doctest::Approx(std::log(8.0)));
  CHECK(info_nce_estimate(std::log(5.0), 5) == doctest::Approx(0.0));
  CHECK(info_nce_estimate(0.198451, 2) == doctest::Approx(0.494696).epsilon(1e-5));
  CHECK_THROWS_AS(info_nce_estimate(1.0, 0), std::invalid_argument);

  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    const int m = 1 + static_cast<int>(rng.uniform_int(20));
    std::vector<double> s(m);
    for (double& v : s) v = rng.uniform(-5.0, 5.0);
    const double loss = contrast_from_scores(s, 0);
    CHECK(info_nce_estimate(loss, m) <= std::log(static_cast<double>(m)) + 1e-12);
  }
}

TEST_CASE("loss_cluster is linear and decreasing in lambda1") {
  CriticConfig cfg;
  cfg.kind = CriticKind::LogDot;
  cfg.gamma = 0.01;
  Rng rng(12);
  ProbBatch b = random_batch(3, 6, rng);
  b.anchor = random_simplex(3, rng);
  double prev = 1e300;
  for (double l1 : {0.0, 0.5, 1.0, 2.0}) {
    LossWeights w;
    w.lambda1 = l1;
    const double v = loss_cluster(b, w, cfg);
    CHECK(v <= prev + 1e-12);
    prev = v;
  }
}
