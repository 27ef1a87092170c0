#include "crlc/critics.hpp"

#include <cmath>
#include <stdexcept>

namespace crlc {

namespace {

void check_same_size(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("critic: vector lengths differ");
}

}  // namespace

CriticKind critic_from_string(const std::string& s) {
  if (s == "log_dot") return CriticKind::LogDot;
  if (s == "dot") return CriticKind::Dot;
  if (s == "neg_l2") return CriticKind::NegL2;
  if (s == "neg_js") return CriticKind::NegJS;
  if (s == "scaled_cosine") return CriticKind::ScaledCosine;
  throw std::invalid_argument("unknown critic: " + s);
}

std::string to_string(CriticKind k) {
  switch (k) {
    case CriticKind::LogDot: return "log_dot";
    case CriticKind::Dot: return "dot";
    case CriticKind::NegL2: return "neg_l2";
    case CriticKind::NegJS: return "neg_js";
    case CriticKind::ScaledCosine: return "scaled_cosine";
  }
  throw std::logic_error("unreachable");
}

bool is_probability_critic(CriticKind k) { return k != CriticKind::ScaledCosine; }

void CriticConfig::validate() const {
  if (!(tau > 0.0)) throw std::invalid_argument("CriticConfig: tau must be > 0");
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw std::invalid_argument("CriticConfig: gamma must be in [0, 1]");
}

std::vector<double> smooth(std::span<const double> q, double gamma) {
  std::vector<double> out(q.size());
  smooth_into(q, gamma, out);
  return out;
}

void smooth_into(std::span<const double> q, double gamma, std::span<double> out) {
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw std::invalid_argument("smooth: gamma must be in [0, 1]");
  const double r = gamma / static_cast<double>(q.size());
  for (std::size_t c = 0; c < q.size(); ++c) out[c] = (1.0 - gamma) * q[c] + r;
}

double critic_log_dot(std::span<const double> p, std::span<const double> q) {
  check_same_size(p, q);
  double dot = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) dot += p[c] * q[c];
  if (dot <= 0.0)
    throw std::domain_error(
        "critic_log_dot: zero dot product (probabilities were not smoothed)");
  return std::log(dot);
}

double critic_dot(std::span<const double> p, std::span<const double> q) {
  check_same_size(p, q);
  double dot = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) dot += p[c] * q[c];
  return dot;
}

double critic_neg_l2(std::span<const double> p, std::span<const double> q) {
  check_same_size(p, q);
  double acc = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    const double d = p[c] - q[c];
    acc += d * d;
  }
  return -acc;
}

double critic_neg_js(std::span<const double> p, std::span<const double> q) {
  check_same_size(p, q);
  // -1/2 [ KL(p || m) + KL(q || m) ], m = (p + q) / 2.
  double acc = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    const double m = 0.5 * (p[c] + q[c]);
    if (p[c] > 0.0) acc += 0.5 * p[c] * std::log(p[c] / m);
    if (q[c] > 0.0) acc += 0.5 * q[c] * std::log(q[c] / m);
  }
  return -acc;
}

double critic_scaled_cosine(std::span<const double> z1, std::span<const double> z2,
                            double tau) {
  check_same_size(z1, z2);
  if (!(tau > 0.0))
    throw std::invalid_argument("critic_scaled_cosine: tau must be > 0");
  double dot = 0.0;
  for (std::size_t c = 0; c < z1.size(); ++c) dot += z1[c] * z2[c];
  return dot / tau;
}

double prob_critic(CriticKind kind, std::span<const double> p,
                   std::span<const double> q) {
  switch (kind) {
    case CriticKind::LogDot: return critic_log_dot(p, q);
    case CriticKind::Dot: return critic_dot(p, q);
    case CriticKind::NegL2: return critic_neg_l2(p, q);
    case CriticKind::NegJS: return critic_neg_js(p, q);
    case CriticKind::ScaledCosine:
      throw std::invalid_argument("prob_critic: scaled cosine is a feature critic");
  }
  throw std::logic_error("unreachable");
}

std::vector<double> grad_critic_logdot(std::span<const double> q,
                                       std::span<const double> p) {
  check_same_size(q, p);
  double dot = 0.0;
  for (std::size_t c = 0; c < q.size(); ++c) dot += q[c] * p[c];
  if (dot <= 0.0)
    throw std::domain_error("grad_critic_logdot: zero denominator");
  std::vector<double> g(q.size());
  for (std::size_t c = 0; c < q.size(); ++c) g[c] = q[c] * p[c] / dot - q[c];
  return g;
}

std::vector<double> critic_grad_fd(CriticKind kind, std::span<const double> p,
                                   std::span<const double> q, double h) {
  std::vector<double> pp(p.begin(), p.end());
  std::vector<double> g(p.size());
  for (std::size_t c = 0; c < p.size(); ++c) {
    const double orig = pp[c];
    pp[c] = orig + h;
    const double fp = prob_critic(kind, pp, q);
    pp[c] = orig - h;
    const double fm = prob_critic(kind, pp, q);
    pp[c] = orig;
    g[c] = (fp - fm) / (2.0 * h);
  }
  return g;
}

bool on_simplex(std::span<const double> q, double eps) {
  double sum = 0.0;
  for (double v : q) {
    if (v < 0.0) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= eps;
}

bool unit_norm(std::span<const double> z, double eps) {
  double acc = 0.0;
  for (double v : z) acc += v * v;
  return std::abs(std::sqrt(acc) - 1.0) <= eps;
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

}  // namespace crlc
