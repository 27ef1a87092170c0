#include "crlc/config.hpp"

#include <fstream>
#include <stdexcept>

namespace crlc {

PcBackend pc_backend_from_string(const std::string& s) {
  if (s == "in_batch") return PcBackend::InBatch;
  if (s == "memory_bank") return PcBackend::MemoryBank;
  throw std::invalid_argument("unknown pc_backend: " + s);
}

std::string to_string(PcBackend b) {
  return b == PcBackend::InBatch ? "in_batch" : "memory_bank";
}

Stage2Mode stage2_mode_from_string(const std::string& s) {
  if (s == "train_backbone") return Stage2Mode::TrainBackbone;
  if (s == "freeze_backbone") return Stage2Mode::FreezeBackbone;
  throw std::invalid_argument("unknown stage2_mode: " + s);
}

std::string to_string(Stage2Mode m) {
  return m == Stage2Mode::TrainBackbone ? "train_backbone" : "freeze_backbone";
}

void RunConfig::validate() const {
  if (dataset.kind != "mixture" && dataset.kind != "csv")
    throw std::invalid_argument("config: dataset.kind must be mixture or csv");
  if (dataset.kind == "csv" && dataset.path.empty())
    throw std::invalid_argument("config: dataset.path required for csv datasets");
  if (dataset.kind == "mixture") {
    if (dataset.classes < 2 || dataset.dim < 2 || dataset.per_class < 1 ||
        !(dataset.separation > 0.0))
      throw std::invalid_argument("config: invalid mixture parameters");
  }
  critic_config().validate();   // tau, gamma ranges
  (void)critic_from_string(critic);
  if (!is_probability_critic(critic_from_string(critic)))
    throw std::invalid_argument("config: critic must be a probability critic");
  weights().validate();
  if (batch_size < 2) throw std::invalid_argument("config: batch_size must be >= 2");
  if (epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
  if (eval_every < 1) throw std::invalid_argument("config: eval_every must be >= 1");
  (void)pc_backend_from_string(pc_backend);
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("config: alpha must be in [0, 1]");
  if (bank_negatives < 2)
    throw std::invalid_argument("config: bank_negatives must be >= 2");
  if (neighbors_k < 1) throw std::invalid_argument("config: neighbors_k must be >= 1");
  (void)stage2_mode_from_string(stage2_mode);
  if (stage1_epochs < 0 || stage2_epochs < 0)
    throw std::invalid_argument("config: stage epochs must be >= 0");
  for (const auto* o : {&optimizer, &stage1_optimizer, &stage2_optimizer}) {
    if (!(o->lr_init > 0.0) || o->lr_min < 0.0 || o->lr_min > o->lr_init)
      throw std::invalid_argument("config: need 0 <= lr_min <= lr_init, lr_init > 0");
    if (o->momentum < 0.0 || o->momentum >= 1.0)
      throw std::invalid_argument("config: momentum must be in [0, 1)");
    if (o->weight_decay < 0.0)
      throw std::invalid_argument("config: weight_decay must be >= 0");
    if (o->schedule != "constant" && o->schedule != "cosine")
      throw std::invalid_argument("config: schedule must be constant or cosine");
  }
  view.validate();
  if (labels_per_class < 1)
    throw std::invalid_argument("config: labels_per_class must be >= 1");
  if (labeled_batch < 1)
    throw std::invalid_argument("config: labeled_batch must be >= 1");
  ModelSpec ms = model_spec(std::max(dataset.dim, 2), std::max(dataset.classes, 2));
  ms.validate();
}

ModelSpec RunConfig::model_spec(int input_dim, int classes) const {
  ModelSpec s;
  s.input_dim = input_dim;
  s.backbone = backbone;
  s.rl_hidden = rl_hidden;
  s.rl_dim = rl_dim;
  s.c_hidden = c_hidden;
  s.classes = classes;
  s.subheads = subheads;
  s.logit_clamp = logit_clamp;
  return s;
}

CriticConfig RunConfig::critic_config() const {
  CriticConfig c;
  c.kind = critic_from_string(critic);
  c.tau = tau;
  c.gamma = gamma;
  return c;
}

LossWeights RunConfig::weights() const {
  LossWeights w;
  w.lambda1 = lambda1;
  w.lambda2 = lambda2;
  w.lambda3 = lambda3;
  return w;
}

Dataset RunConfig::make_dataset() const {
  if (dataset.kind == "csv") return load_csv(dataset.path);
  return gen_mixture(dataset.classes, dataset.dim, dataset.per_class,
                     dataset.separation, seed);
}

namespace {

template <typename T>
void get_if(const ordered_json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

OptimizerConfig opt_from_json(const ordered_json& j, OptimizerConfig base) {
  get_if(j, "lr_init", base.lr_init);
  get_if(j, "lr_min", base.lr_min);
  get_if(j, "momentum", base.momentum);
  get_if(j, "weight_decay", base.weight_decay);
  get_if(j, "nesterov", base.nesterov);
  get_if(j, "schedule", base.schedule);
  return base;
}

ordered_json opt_to_json(const OptimizerConfig& o) {
  return ordered_json{{"lr_init", o.lr_init},
                      {"lr_min", o.lr_min},
                      {"momentum", o.momentum},
                      {"weight_decay", o.weight_decay},
                      {"nesterov", o.nesterov},
                      {"schedule", o.schedule}};
}

}  // namespace

RunConfig RunConfig::from_json(const ordered_json& j) {
  RunConfig c;
  if (j.contains("dataset")) {
    const auto& d = j.at("dataset");
    get_if(d, "kind", c.dataset.kind);
    get_if(d, "path", c.dataset.path);
    get_if(d, "classes", c.dataset.classes);
    get_if(d, "dim", c.dataset.dim);
    get_if(d, "per_class", c.dataset.per_class);
    get_if(d, "separation", c.dataset.separation);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    get_if(m, "backbone", c.backbone);
    get_if(m, "rl_hidden", c.rl_hidden);
    get_if(m, "rl_dim", c.rl_dim);
    get_if(m, "c_hidden", c.c_hidden);
    get_if(m, "subheads", c.subheads);
    get_if(m, "logit_clamp", c.logit_clamp);
  }
  get_if(j, "critic", c.critic);
  get_if(j, "tau", c.tau);
  get_if(j, "gamma", c.gamma);
  get_if(j, "lambda1", c.lambda1);
  get_if(j, "lambda2", c.lambda2);
  get_if(j, "lambda3", c.lambda3);
  get_if(j, "batch_size", c.batch_size);
  get_if(j, "epochs", c.epochs);
  get_if(j, "seed", c.seed);
  get_if(j, "eval_every", c.eval_every);
  get_if(j, "pc_backend", c.pc_backend);
  get_if(j, "alpha", c.alpha);
  get_if(j, "bank_negatives", c.bank_negatives);
  get_if(j, "neighbors_k", c.neighbors_k);
  get_if(j, "stage2_mode", c.stage2_mode);
  get_if(j, "stage1_epochs", c.stage1_epochs);
  get_if(j, "stage2_epochs", c.stage2_epochs);
  if (j.contains("optimizer")) c.optimizer = opt_from_json(j.at("optimizer"), c.optimizer);
  if (j.contains("stage1_optimizer"))
    c.stage1_optimizer = opt_from_json(j.at("stage1_optimizer"), c.stage1_optimizer);
  if (j.contains("stage2_optimizer"))
    c.stage2_optimizer = opt_from_json(j.at("stage2_optimizer"), c.stage2_optimizer);
  if (j.contains("view")) {
    const auto& v = j.at("view");
    get_if(v, "noise_sigma", c.view.noise_sigma);
    get_if(v, "mask_prob", c.view.mask_prob);
    get_if(v, "scale_jitter", c.view.scale_jitter);
  }
  get_if(j, "labels_per_class", c.labels_per_class);
  get_if(j, "labeled_batch", c.labeled_batch);
  return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path);
  ordered_json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("config: JSON parse error in " + path + ": " +
                             e.what());
  }
  return from_json(j);
}

ordered_json RunConfig::to_json() const {
  ordered_json j;
  j["dataset"] = ordered_json{{"kind", dataset.kind},
                              {"path", dataset.path},
                              {"classes", dataset.classes},
                              {"dim", dataset.dim},
                              {"per_class", dataset.per_class},
                              {"separation", dataset.separation}};
  j["model"] = ordered_json{{"backbone", backbone},
                            {"rl_hidden", rl_hidden},
                            {"rl_dim", rl_dim},
                            {"c_hidden", c_hidden},
                            {"subheads", subheads},
                            {"logit_clamp", logit_clamp}};
  j["critic"] = critic;
  j["tau"] = tau;
  j["gamma"] = gamma;
  j["lambda1"] = lambda1;
  j["lambda2"] = lambda2;
  j["lambda3"] = lambda3;
  j["batch_size"] = batch_size;
  j["epochs"] = epochs;
  j["seed"] = seed;
  j["eval_every"] = eval_every;
  j["pc_backend"] = pc_backend;
  j["alpha"] = alpha;
  j["bank_negatives"] = bank_negatives;
  j["neighbors_k"] = neighbors_k;
  j["stage2_mode"] = stage2_mode;
  j["stage1_epochs"] = stage1_epochs;
  j["stage2_epochs"] = stage2_epochs;
  j["optimizer"] = opt_to_json(optimizer);
  j["stage1_optimizer"] = opt_to_json(stage1_optimizer);
  j["stage2_optimizer"] = opt_to_json(stage2_optimizer);
  j["view"] = ordered_json{{"noise_sigma", view.noise_sigma},
                           {"mask_prob", view.mask_prob},
                           {"scale_jitter", view.scale_jitter}};
  j["labels_per_class"] = labels_per_class;
  j["labeled_batch"] = labeled_batch;
  return j;
}

}  // namespace crlc
