#pragma once

#include "crlc/config.hpp"
#include "crlc/metrics.hpp"
#include "crlc/report.hpp"

#include <vector>

namespace crlc {

// Training procedures. Every run is a pure function of (config, seed):
// randomness comes from named sub-streams of the master seed, parallel
// loops write disjoint outputs, and all reductions run in fixed order.

// When out_model is non-null, it receives a copy of the trained model.
RunReport train_end_to_end(const RunConfig& cfg,
                           TwoHeadModel* out_model = nullptr);

// L_FC pretraining, cosine-neighbor mining, then C-head training with
// neighbor positives (backbone trainable or frozen per cfg.stage2_mode).
RunReport train_two_stage(const RunConfig& cfg,
                          TwoHeadModel* out_model = nullptr);

// End-to-end training plus crossentropy on a labeled subset.
RunReport train_semi(const RunConfig& cfg, const std::vector<int>& labeled,
                     TwoHeadModel* out_model = nullptr);
RunReport train_semi(const RunConfig& cfg,
                     TwoHeadModel* out_model = nullptr);  // via sample_labeled

enum class AblationAxis { Critic, Lambda2, PcBackend, Momentum, NumNegatives };

AblationAxis ablation_axis_from_string(const std::string& s);
std::string to_string(AblationAxis a);

// One run per value, shared data seed, collated in value order.
std::vector<RunReport> ablation_sweep(const RunConfig& base, AblationAxis axis,
                                      const std::vector<std::string>& values,
                                      int jobs = 1);

// Per row, the K highest-cosine other rows, descending similarity, ties by
// lowest index; rows must be unit-norm.
std::vector<std::vector<int>> mine_neighbors(const Matrix& features, int k);

// Argmax assignments of subhead 0 over the dataset.
Partition predict_assignments(const TwoHeadModel& model, const Dataset& ds,
                              int batch = 512);

struct EvalResult {
  double acc = 0.0;
  double nmi = 0.0;
  double ari = 0.0;
  double labeled_acc = 0.0;  // identity mapping, no Hungarian
};

EvalResult evaluate_model(const TwoHeadModel& model, const Dataset& ds,
                          int batch = 512);

// Unit-norm features from the RL head over the whole dataset.
Matrix embed_features(const TwoHeadModel& model, const Dataset& ds,
                      int batch = 512);

// Mean L_CRLC (plus crossentropy when labeled indices are given) of one
// already-built pair of view batches; shared by training and the
// finite-difference checks in the tests.
struct BatchLossBreakdown {
  double loss_pc = 0.0;
  double loss_fc = 0.0;
  double entropy = 0.0;
  double xent = 0.0;
  double total = 0.0;
};

BatchLossBreakdown compute_batch_loss(const TwoHeadModel& model,
                                      const Matrix& view1, const Matrix& view2,
                                      const RunConfig& cfg,
                                      const Matrix* labeled_x = nullptr,
                                      const std::vector<int>* labeled_y = nullptr);

// Computes the same loss and accumulates its gradients into the model.
BatchLossBreakdown batch_loss_and_backward(TwoHeadModel& model,
                                           const Matrix& view1,
                                           const Matrix& view2,
                                           const RunConfig& cfg,
                                           const Matrix* labeled_x = nullptr,
                                           const std::vector<int>* labeled_y = nullptr);

}  // namespace crlc
