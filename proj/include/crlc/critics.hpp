#pragma once

#include <span>
#include <string>
#include <vector>

namespace crlc {

// Similarity kernels used inside the contrastive losses. Probability
// critics score pairs of cluster-assignment vectors on the C-simplex;
// the feature critic scores pairs of unit-norm representation vectors.
// Natural logs throughout, with the 0*log(0) = 0 convention.

enum class CriticKind { LogDot, Dot, NegL2, NegJS, ScaledCosine };

CriticKind critic_from_string(const std::string& s);
std::string to_string(CriticKind k);
bool is_probability_critic(CriticKind k);

struct CriticConfig {
  CriticKind kind = CriticKind::LogDot;
  double tau = 0.1;     // feature critic temperature
  double gamma = 0.01;  // probability smoothing coefficient

  void validate() const;
};

// (1 - gamma) * q + gamma * (1/C, ..., 1/C)
std::vector<double> smooth(std::span<const double> q, double gamma);
void smooth_into(std::span<const double> q, double gamma, std::span<double> out);

// log(p . q); throws std::domain_error when p . q == 0 (un-smoothed
// different one-hots indicate a pipeline bug upstream).
double critic_log_dot(std::span<const double> p, std::span<const double> q);

// p . q
double critic_dot(std::span<const double> p, std::span<const double> q);

// -||p - q||_2^2
double critic_neg_l2(std::span<const double> p, std::span<const double> q);

// -D_JS(p || q), in [-log 2, 0]
double critic_neg_js(std::span<const double> p, std::span<const double> q);

// z1 . z2 / tau for unit-norm z1, z2; throws std::invalid_argument on tau <= 0.
double critic_scaled_cosine(std::span<const double> z1, std::span<const double> z2,
                            double tau);

// Dispatch over the probability critics (rejects ScaledCosine).
double prob_critic(CriticKind kind, std::span<const double> p,
                   std::span<const double> q);

// d f(q, p) / d u where q = softmax(u), for the log-of-dot-product critic,
// evaluated at the given probability pair:
//   g_c = q_c p_c / (q . p) - q_c.
// Callers pass smoothed vectors when smoothing is in effect.
std::vector<double> grad_critic_logdot(std::span<const double> q,
                                       std::span<const double> p);

// Numerical d f / d p by central differences, used in training for the
// critics without a hand-derived gradient.
std::vector<double> critic_grad_fd(CriticKind kind, std::span<const double> p,
                                   std::span<const double> q, double h = 1e-6);

// Validation helpers for the domain invariants.
bool on_simplex(std::span<const double> q, double eps = 1e-9);
bool unit_norm(std::span<const double> z, double eps = 1e-7);
double entropy(std::span<const double> p);  // natural log, 0*log0 = 0

}  // namespace crlc
