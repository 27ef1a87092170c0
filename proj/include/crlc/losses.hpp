#pragma once

#include "crlc/critics.hpp"
#include "crlc/matrix.hpp"

#include <span>
#include <vector>

namespace crlc {

struct LossWeights {
  double lambda1 = 1.0;   // marginal entropy weight
  double lambda2 = 10.0;  // feature contrastive weight
  double lambda3 = 1.0;   // labeled crossentropy weight

  void validate() const;
};

// One anchor against M candidate probability rows; candidate
// `positive_index` is the positive, the rest are negatives.
struct ProbBatch {
  Matrix rows;                 // M x C, each row on the simplex
  std::vector<double> anchor;  // length C, on the simplex
  int positive_index = 0;
};

// -log( exp(s[pos]) / sum_i exp(s[i]) ), stabilized by max subtraction.
// Nonnegative; shift-invariant in the scores.
double contrast_from_scores(std::span<const double> scores, int positive_index);

// d contrast / d s = softmax(s) - onehot(pos).
std::vector<double> contrast_grad_scores(std::span<const double> scores,
                                         int positive_index);

// Mean over anchors of the contrastive loss on scaled-cosine scores.
// anchors: A x d (unit rows), candidates: M x d (unit rows),
// positives[j] = index of anchor j's positive among the candidates.
double loss_fc(const Matrix& anchors, const Matrix& candidates,
               const std::vector<int>& positives, double tau);

// Probability contrastive loss for one anchor. Smoothing with cfg.gamma is
// applied to the anchor and every candidate row before the critic.
double loss_pc(const ProbBatch& batch, const CriticConfig& cfg);

// Entropy of the mean of the rows; in [0, log C].
double marginal_entropy(const Matrix& probs);
double marginal_entropy(const std::vector<std::vector<double>>& probs);

// loss_pc(batch) - lambda1 * H(anchor distribution across the batch).
double loss_cluster(const ProbBatch& batch, const LossWeights& w,
                    const CriticConfig& cfg);

// prob_part - lambda1 * entropy_part + lambda2 * fc_part.
double loss_crlc(double prob_part, double fc_part, double entropy_part,
                 const LossWeights& w);

// crlc + lambda3 * mean(-logprob) over the labeled samples.
double loss_crlc_semi(double crlc, const std::vector<double>& labeled_logprobs,
                      const LossWeights& w);

// Analytic gradient of loss_pc with respect to the anchor logits, for the
// log-of-dot-product critic. Exact through the internal smoothing, so it
// matches central finite differences of loss_pc for any gamma; at gamma = 0
// it reduces to
//   g_c = sum_i q_c q_ic / sum_i sum_k q_k q_ik  -  q_c q_1c / sum_k q_k q_1k.
// Components sum to zero. Throws std::domain_error on a zero dot product.
std::vector<double> grad_pc_logits(std::span<const double> anchor_logits,
                                   const ProbBatch& batch, double gamma);

// log M - contrast_loss; never exceeds log M since the loss is nonnegative.
double info_nce_estimate(double contrast_loss, int m);

}  // namespace crlc
