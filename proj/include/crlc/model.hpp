#pragma once

#include "crlc/critics.hpp"
#include "crlc/losses.hpp"
#include "crlc/matrix.hpp"
#include "crlc/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace crlc {

// Fully-connected backbone with a unit-normalizing representation head and
// S independent softmax cluster subheads. Forward caches activations;
// backward accumulates into per-layer gradient buffers. A model instance is
// not re-entrant during a step; distinct instances may run in parallel.

struct ModelSpec {
  int input_dim = 0;
  std::vector<int> backbone = {256, 256};  // affine sizes, each followed by ReLU
  int rl_hidden = 256;
  int rl_dim = 128;
  int c_hidden = 256;
  int classes = 0;
  int subheads = 10;
  double logit_clamp = 25.0;

  void validate() const;
  bool operator==(const ModelSpec&) const = default;
};

struct Affine {
  Matrix w;  // out x in
  std::vector<double> b, gw, gb, vw, vb;

  void init(int in, int out, Rng& rng);  // He-uniform weights, zero biases
  void forward(const Matrix& x, Matrix& y) const;
  // Accumulates gw, gb; writes dx unless null.
  void backward(const Matrix& x, const Matrix& dy, Matrix* dx);
  void zero_grad();
};

struct ForwardCache {
  Matrix input;
  std::vector<Matrix> bb_pre, bb_act;
  Matrix rl_pre1, rl_act1, rl_prenorm;
  std::vector<double> rl_norms;
  Matrix z;  // unit-norm rows
  std::vector<Matrix> head_pre1, head_act1, head_logits_raw;
  std::vector<Matrix> logits;  // clamped to [-clamp, clamp]
  std::vector<Matrix> probs;   // softmax rows
  bool has_rl = false;
  bool has_c = false;
};

class TwoHeadModel {
 public:
  TwoHeadModel() = default;  // empty shell, assign before use
  TwoHeadModel(const ModelSpec& spec, std::uint64_t init_seed);

  const ModelSpec& spec() const { return spec_; }

  ForwardCache forward(const Matrix& x, bool need_rl = true,
                       bool need_c = true) const;

  // dz: gradient w.r.t. the unit-norm features (may be null).
  // dlogits: per-subhead gradients w.r.t. the clamped logits (may be null).
  void backward(const ForwardCache& f, const Matrix* dz,
                const std::vector<Matrix>* dlogits);

  void zero_grad();

  void set_backbone_frozen(bool frozen) { backbone_frozen_ = frozen; }
  bool backbone_frozen() const { return backbone_frozen_; }
  std::uint64_t backbone_checksum() const;  // FNV-1a over backbone parameters

  // Fixed-order access to every parameter and its gradient, for probing.
  std::size_t param_count() const;
  double* param_at(std::size_t i);
  double grad_at(std::size_t i) const;

  void save(const std::string& path) const;
  static TwoHeadModel load(const std::string& path);

  std::vector<Affine*> layers();                // backbone first
  std::vector<const Affine*> layers() const;
  std::vector<Affine*> trainable_layers();      // honors the backbone freeze

 private:
  ModelSpec spec_;
  std::vector<Affine> backbone_;
  Affine rl1_, rl2_;
  std::vector<Affine> head1_, head2_;
  bool backbone_frozen_ = false;
};

// Cosine decay: lr_min + (lr_init - lr_min) * (1 + cos(pi t / T)) / 2.
double lr_at(int t, int horizon, double lr_init, double lr_min);

struct SgdState {
  double lr_init = 0.1;
  double lr_min = 0.001;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  bool nesterov = false;
  bool cosine = false;  // constant learning rate when false
  int t = 0;
  int horizon = 1;

  double current_lr() const;
};

// v <- momentum v + (grad + wd param); param <- param - lr v; grads cleared.
void sgd_step(TwoHeadModel& model, const SgdState& state);

// du = q * (dq - (q . dq)) row-wise; the softmax Jacobian applied to dq.
void softmax_backward_rows(const Matrix& q, const Matrix& dq, Matrix& du);

// dh = (dz - z (z . dz)) / ||h|| row-wise; the unit-normalization Jacobian.
void normalize_backward_rows(const Matrix& z, const std::vector<double>& norms,
                             const Matrix& dz, Matrix& dh);

// Mean over subheads of (per-anchor-mean contrastive loss - lambda1 * H of
// the mean anchor distribution). positives[j] indexes anchor j's positive
// among the candidate rows.
double multihead_cluster_loss(const std::vector<Matrix>& anchor_probs,
                              const std::vector<Matrix>& candidate_probs,
                              const std::vector<int>& positives,
                              const LossWeights& w, const CriticConfig& cfg);

}  // namespace crlc
