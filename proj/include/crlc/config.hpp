#pragma once

#include "crlc/critics.hpp"
#include "crlc/data.hpp"
#include "crlc/losses.hpp"
#include "crlc/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace crlc {

using ordered_json = nlohmann::ordered_json;

enum class PcBackend { InBatch, MemoryBank };
enum class Stage2Mode { TrainBackbone, FreezeBackbone };

PcBackend pc_backend_from_string(const std::string& s);
std::string to_string(PcBackend b);
Stage2Mode stage2_mode_from_string(const std::string& s);
std::string to_string(Stage2Mode m);

struct DatasetSpec {
  std::string kind = "mixture";  // "mixture" | "csv"
  std::string path;
  int classes = 4;
  int dim = 16;
  int per_class = 500;
  double separation = 6.0;
};

struct OptimizerConfig {
  double lr_init = 0.1;
  double lr_min = 0.001;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  bool nesterov = false;
  std::string schedule = "constant";  // "constant" | "cosine"
};

struct RunConfig {
  DatasetSpec dataset;

  std::vector<int> backbone = {256, 256};
  int rl_hidden = 256;
  int rl_dim = 128;
  int c_hidden = 256;
  int subheads = 10;
  double logit_clamp = 25.0;

  std::string critic = "log_dot";
  double tau = 0.1;
  double gamma = 0.01;
  double lambda1 = 1.0;
  double lambda2 = 10.0;
  double lambda3 = 1.0;

  int batch_size = 512;
  int epochs = 200;
  std::uint64_t seed = 1;
  int eval_every = 10;

  std::string pc_backend = "in_batch";
  double alpha = 0.5;
  int bank_negatives = 128;  // candidate count M in memory-bank mode

  int neighbors_k = 50;
  std::string stage2_mode = "train_backbone";
  int stage1_epochs = 100;
  int stage2_epochs = 60;

  OptimizerConfig optimizer;
  OptimizerConfig stage1_optimizer{0.4, 0.001, 0.9, 1e-4, false, "cosine"};
  OptimizerConfig stage2_optimizer{0.1, 0.001, 0.9, 1e-4, false, "constant"};

  ViewConfig view;

  int labels_per_class = 1;
  int labeled_batch = 64;

  void validate() const;
  ModelSpec model_spec(int input_dim, int classes) const;
  CriticConfig critic_config() const;
  LossWeights weights() const;
  Dataset make_dataset() const;

  static RunConfig from_json(const ordered_json& j);
  static RunConfig from_file(const std::string& path);
  ordered_json to_json() const;
};

}  // namespace crlc
