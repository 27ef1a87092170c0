#include "crlc/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace crlc {

void LossWeights::validate() const {
  if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0)
    throw std::invalid_argument("LossWeights: coefficients must be >= 0");
}

double contrast_from_scores(std::span<const double> scores, int positive_index) {
  if (scores.empty()) throw std::invalid_argument("contrast_from_scores: empty");
  if (positive_index < 0 || positive_index >= static_cast<int>(scores.size()))
    throw std::invalid_argument("contrast_from_scores: positive index out of range");
  double mx = scores[0];
  for (double s : scores) mx = s > mx ? s : mx;
  double z = 0.0;
  for (double s : scores) z += std::exp(s - mx);
  return std::log(z) - (scores[positive_index] - mx);
}

std::vector<double> contrast_grad_scores(std::span<const double> scores,
                                         int positive_index) {
  double mx = scores[0];
  for (double s : scores) mx = s > mx ? s : mx;
  double z = 0.0;
  std::vector<double> g(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    g[i] = std::exp(scores[i] - mx);
    z += g[i];
  }
  for (std::size_t i = 0; i < scores.size(); ++i) g[i] /= z;
  g[positive_index] -= 1.0;
  return g;
}

double loss_fc(const Matrix& anchors, const Matrix& candidates,
               const std::vector<int>& positives, double tau) {
  if (anchors.cols != candidates.cols)
    throw std::invalid_argument("loss_fc: feature widths differ");
  if (static_cast<int>(positives.size()) != anchors.rows)
    throw std::invalid_argument("loss_fc: positives size must match anchor count");
  if (!(tau > 0.0)) throw std::invalid_argument("loss_fc: tau must be > 0");
  const int a = anchors.rows, m = candidates.rows;
  std::vector<double> per_anchor(a, 0.0);
#pragma omp parallel for schedule(static)
  for (int j = 0; j < a; ++j) {
    std::vector<double> scores(m);
    for (int i = 0; i < m; ++i)
      scores[i] = critic_scaled_cosine(anchors.row_span(j),
                                       candidates.row_span(i), tau);
    per_anchor[j] = contrast_from_scores(scores, positives[j]);
  }
  double acc = 0.0;
  for (int j = 0; j < a; ++j) acc += per_anchor[j];
  return acc / a;
}

double loss_pc(const ProbBatch& batch, const CriticConfig& cfg) {
  cfg.validate();
  if (!is_probability_critic(cfg.kind))
    throw std::invalid_argument("loss_pc: needs a probability critic");
  const int m = batch.rows.rows;
  if (m < 1) throw std::invalid_argument("loss_pc: empty candidate set");
  if (batch.positive_index < 0 || batch.positive_index >= m)
    throw std::invalid_argument("loss_pc: positive index out of range");
  const std::vector<double> anchor_s = smooth(batch.anchor, cfg.gamma);
  std::vector<double> scores(m);
  std::vector<double> cand(batch.rows.cols);
  for (int i = 0; i < m; ++i) {
    smooth_into(batch.rows.row_span(i), cfg.gamma, cand);
    scores[i] = prob_critic(cfg.kind, anchor_s, cand);
  }
  return contrast_from_scores(scores, batch.positive_index);
}

double marginal_entropy(const Matrix& probs) {
  if (probs.rows < 1) throw std::invalid_argument("marginal_entropy: empty");
  std::vector<double> mean(probs.cols, 0.0);
  for (int i = 0; i < probs.rows; ++i)
    for (int j = 0; j < probs.cols; ++j) mean[j] += probs.at(i, j);
  for (double& v : mean) v /= probs.rows;
  return entropy(mean);
}

double marginal_entropy(const std::vector<std::vector<double>>& probs) {
  if (probs.empty()) throw std::invalid_argument("marginal_entropy: empty");
  std::vector<double> mean(probs[0].size(), 0.0);
  for (const auto& row : probs) {
    if (row.size() != mean.size())
      throw std::invalid_argument("marginal_entropy: ragged rows");
    for (std::size_t j = 0; j < row.size(); ++j) mean[j] += row[j];
  }
  for (double& v : mean) v /= static_cast<double>(probs.size());
  return entropy(mean);
}

double loss_cluster(const ProbBatch& batch, const LossWeights& w,
                    const CriticConfig& cfg) {
  w.validate();
  return loss_pc(batch, cfg) - w.lambda1 * entropy(batch.anchor);
}

double loss_crlc(double prob_part, double fc_part, double entropy_part,
                 const LossWeights& w) {
  w.validate();
  return prob_part - w.lambda1 * entropy_part + w.lambda2 * fc_part;
}

double loss_crlc_semi(double crlc, const std::vector<double>& labeled_logprobs,
                      const LossWeights& w) {
  w.validate();
  if (w.lambda3 == 0.0) return crlc;
  if (labeled_logprobs.empty())
    throw std::invalid_argument("loss_crlc_semi: no labeled samples");
  double acc = 0.0;
  for (double lp : labeled_logprobs) acc -= lp;
  return crlc + w.lambda3 * acc / static_cast<double>(labeled_logprobs.size());
}

std::vector<double> grad_pc_logits(std::span<const double> anchor_logits,
                                   const ProbBatch& batch, double gamma) {
  const int c_count = static_cast<int>(anchor_logits.size());
  const int m = batch.rows.rows;
  if (batch.rows.cols != c_count)
    throw std::invalid_argument("grad_pc_logits: class count mismatch");
  if (batch.positive_index < 0 || batch.positive_index >= m)
    throw std::invalid_argument("grad_pc_logits: positive index out of range");

  // q = softmax(u); qs = smooth(q); scores s_i = log(qs . ps_i).
  std::vector<double> q(c_count);
  double mx = anchor_logits[0];
  for (double u : anchor_logits) mx = u > mx ? u : mx;
  double z = 0.0;
  for (int c = 0; c < c_count; ++c) {
    q[c] = std::exp(anchor_logits[c] - mx);
    z += q[c];
  }
  for (int c = 0; c < c_count; ++c) q[c] /= z;
  const std::vector<double> qs = smooth(q, gamma);

  // w = dL/d qs = -ps_1 / (qs.ps_1) + sum_i ps_i / sum_i (qs.ps_i)
  std::vector<double> cand(c_count);
  std::vector<double> w(c_count, 0.0);
  double denom_all = 0.0;
  std::vector<double> dots(m, 0.0);
  Matrix smoothed(m, c_count);
  for (int i = 0; i < m; ++i) {
    smooth_into(batch.rows.row_span(i), gamma, smoothed.row_span(i));
    double dot = 0.0;
    for (int c = 0; c < c_count; ++c) dot += qs[c] * smoothed.at(i, c);
    if (dot <= 0.0)
      throw std::domain_error("grad_pc_logits: zero dot product (missing smoothing)");
    dots[i] = dot;
    denom_all += dot;
  }
  for (int i = 0; i < m; ++i)
    for (int c = 0; c < c_count; ++c) w[c] += smoothed.at(i, c) / denom_all;
  const int pos = batch.positive_index;
  for (int c = 0; c < c_count; ++c) w[c] -= smoothed.at(pos, c) / dots[pos];

  // Chain through smoothing and softmax: g_c = (1-gamma) q_c (w_c - q.w).
  double qw = 0.0;
  for (int c = 0; c < c_count; ++c) qw += q[c] * w[c];
  std::vector<double> g(c_count);
  for (int c = 0; c < c_count; ++c) g[c] = (1.0 - gamma) * q[c] * (w[c] - qw);
  return g;
}

double info_nce_estimate(double contrast_loss, int m) {
  if (m < 1) throw std::invalid_argument("info_nce_estimate: M must be >= 1");
  return std::log(static_cast<double>(m)) - contrast_loss;
}

}  // namespace crlc
