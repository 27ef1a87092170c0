// Command-line front end: training runs, ablations, gradient checks, data
// generation, neighbor mining, and checkpoint evaluation, driven by JSON
// configs. Reports are deterministic in (config, seed) outside the
// `runtime_s` / `meta` fields.

#include "crlc/data.hpp"
#include "crlc/kernels.hpp"
#include "crlc/losses.hpp"
#include "crlc/metrics.hpp"
#include "crlc/pipeline.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace {

using crlc::ordered_json;

constexpr int kExitError = 1;
constexpr int kExitMissingFile = 2;

// Seed precedence: --seed flag, then an explicit "seed" in the config file,
// then the CRLC_SEED environment variable, then the config default.
crlc::RunConfig load_config(const std::string& path,
                            const std::optional<std::uint64_t>& seed_flag) {
  if (!std::filesystem::exists(path))
    throw std::system_error(std::make_error_code(std::errc::no_such_file_or_directory),
                            "config file not found: " + path);
  std::ifstream f(path);
  ordered_json j;
  f >> j;
  crlc::RunConfig cfg = crlc::RunConfig::from_json(j);
  if (seed_flag) {
    cfg.seed = *seed_flag;
  } else if (!j.contains("seed")) {
    if (const char* env = std::getenv("CRLC_SEED")) cfg.seed = std::strtoull(env, nullptr, 10);
  }
  cfg.validate();
  return cfg;
}

void write_outputs(const crlc::RunReport& report, const std::string& out,
                   const std::string& curves, const std::string& save_model,
                   const crlc::TwoHeadModel* model) {
  report.write_json(out);
  if (!curves.empty()) report.write_curves_csv(curves);
  if (!save_model.empty() && model) model->save(save_model);
}

int run_grad_check(int trials, std::uint64_t seed, bool model_check, double h) {
  crlc::Rng rng(crlc::stream_seed(seed, "grad-check"));
  double max_rel = 0.0;

  if (!model_check) {
    // Random loss_pc instances vs. the analytic logit gradient.
    for (int t = 0; t < trials; ++t) {
      const int c = 2 + static_cast<int>(rng.uniform_int(9));   // 2..10
      const int m = 2 + static_cast<int>(rng.uniform_int(15));  // 2..16
      const double gamma = rng.uniform() < 0.5 ? 0.0 : 0.01;
      std::vector<double> logits(c);
      for (double& v : logits) v = rng.uniform(-3.0, 3.0);
      crlc::ProbBatch batch;
      batch.rows = crlc::Matrix(m, c);
      for (int i = 0; i < m; ++i) {
        double z = 0.0;
        for (int j = 0; j < c; ++j) {
          batch.rows.at(i, j) = std::exp(rng.uniform(-3.0, 3.0));
          z += batch.rows.at(i, j);
        }
        for (int j = 0; j < c; ++j) batch.rows.at(i, j) /= z;
      }
      batch.positive_index = static_cast<int>(rng.uniform_int(m));
      crlc::CriticConfig critic;
      critic.kind = crlc::CriticKind::LogDot;
      critic.gamma = gamma;

      auto loss_of = [&](const std::vector<double>& u) {
        double mx = u[0];
        for (double v : u) mx = v > mx ? v : mx;
        double z = 0.0;
        crlc::ProbBatch b = batch;
        b.anchor.resize(c);
        for (int j = 0; j < c; ++j) {
          b.anchor[j] = std::exp(u[j] - mx);
          z += b.anchor[j];
        }
        for (int j = 0; j < c; ++j) b.anchor[j] /= z;
        return crlc::loss_pc(b, critic);
      };
      crlc::ProbBatch b = batch;
      b.anchor.resize(c);
      {
        double mx = logits[0];
        for (double v : logits) mx = v > mx ? v : mx;
        double z = 0.0;
        for (int j = 0; j < c; ++j) {
          b.anchor[j] = std::exp(logits[j] - mx);
          z += b.anchor[j];
        }
        for (int j = 0; j < c; ++j) b.anchor[j] /= z;
      }
      const auto analytic = crlc::grad_pc_logits(logits, batch, gamma);
      for (int j = 0; j < c; ++j) {
        std::vector<double> u = logits;
        u[j] += h;
        const double fp = loss_of(u);
        u[j] = logits[j] - h;
        const double fm = loss_of(u);
        const double fd = (fp - fm) / (2.0 * h);
        const double denom = std::max({std::abs(fd), std::abs(analytic[j]), 1e-8});
        max_rel = std::max(max_rel, std::abs(fd - analytic[j]) / denom);
      }
    }
  } else {
    // End-to-end L_CRLC gradient on a small model, probing random parameters.
    crlc::RunConfig cfg;
    cfg.dataset.classes = 3;
    cfg.dataset.dim = 8;
    cfg.backbone = {24, 24};
    cfg.rl_hidden = 16;
    cfg.rl_dim = 12;
    cfg.c_hidden = 16;
    cfg.subheads = 2;
    cfg.lambda2 = 10.0;
    crlc::ModelSpec spec = cfg.model_spec(cfg.dataset.dim, cfg.dataset.classes);
    crlc::TwoHeadModel model(spec, seed);
    const int m = 6;
    crlc::Matrix v1(m, cfg.dataset.dim), v2(m, cfg.dataset.dim);
    for (double& v : v1.data) v = rng.normal();
    for (double& v : v2.data) v = rng.normal();

    model.zero_grad();
    crlc::batch_loss_and_backward(model, v1, v2, cfg);
    for (int t = 0; t < trials; ++t) {
      const std::size_t p = rng.uniform_int(model.param_count());
      const double analytic = model.grad_at(p);
      double* slot = model.param_at(p);
      const double orig = *slot;
      *slot = orig + h;
      const double fp = crlc::compute_batch_loss(model, v1, v2, cfg).total;
      *slot = orig - h;
      const double fm = crlc::compute_batch_loss(model, v1, v2, cfg).total;
      *slot = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double denom = std::max({std::abs(fd), std::abs(analytic), 1e-8});
      max_rel = std::max(max_rel, std::abs(fd - analytic) / denom);
    }
  }

  std::printf("grad-check: %d trials, max relative error %.3e\n", trials, max_rel);
  return max_rel <= 1e-4 ? 0 : kExitError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CRLC contrastive clustering"};
  app.require_subcommand(1);

  std::string config_path, out_path = "report.json", curves_path, save_model;
  std::optional<std::uint64_t> seed_flag;

  auto add_run_options = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run config")->required();
    sub->add_option("--out", out_path, "output report JSON path");
    sub->add_option("--curves", curves_path, "per-epoch curves CSV path");
    sub->add_option("--save-model", save_model, "write a model checkpoint");
    sub->add_option("--seed", seed_flag, "seed override");
  };

  auto* train = app.add_subcommand("train", "end-to-end training");
  add_run_options(train);
  auto* two_stage = app.add_subcommand("two-stage", "pretrain, mine neighbors, cluster");
  add_run_options(two_stage);
  auto* semi = app.add_subcommand("semi", "semi-supervised training");
  add_run_options(semi);

  auto* ablate = app.add_subcommand("ablate", "sweep one config axis");
  std::string axis_str, values_str, out_dir = ".";
  int jobs = 1;
  ablate->add_option("--config", config_path, "base JSON run config")->required();
  ablate->add_option("--axis", axis_str,
                     "critic|lambda2|pc_backend|momentum|num_negatives")
      ->required();
  ablate->add_option("--values", values_str, "comma-separated values")->required();
  ablate->add_option("--out-dir", out_dir, "directory for reports");
  ablate->add_option("--jobs", jobs, "parallel runs");
  ablate->add_option("--seed", seed_flag, "seed override");

  auto* grad_check = app.add_subcommand("grad-check", "analytic vs finite differences");
  int trials = 100;
  std::uint64_t gc_seed = 7;
  bool gc_model = false;
  grad_check->add_option("--trials", trials, "number of random instances");
  grad_check->add_option("--seed", gc_seed, "seed");
  grad_check->add_flag("--model", gc_model, "check the full-model gradient");

  auto* mine = app.add_subcommand("mine-neighbors", "K nearest cosine neighbors");
  std::string data_path, ckpt_path, neighbors_out = "neighbors.csv";
  int k = 50;
  mine->add_option("--data", data_path, "dataset CSV")->required();
  mine->add_option("--checkpoint", ckpt_path, "model checkpoint for features");
  mine->add_option("--k", k, "neighbor count");
  mine->add_option("--out", neighbors_out, "output CSV of neighbor indices");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  std::string eval_out = "metrics.json";
  eval->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
  eval->add_option("--data", data_path, "dataset CSV")->required();
  eval->add_option("--out", eval_out, "metrics JSON path");

  auto* gen = app.add_subcommand("gen-data", "synthetic Gaussian mixture CSV");
  int classes = 4, dim = 16, per_class = 500;
  double separation = 6.0;
  std::uint64_t gen_seed = 1;
  std::string gen_out = "data.csv";
  gen->add_option("--classes", classes);
  gen->add_option("--dim", dim);
  gen->add_option("--per-class", per_class);
  gen->add_option("--separation", separation);
  gen->add_option("--seed", gen_seed);
  gen->add_option("--out", gen_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed() || two_stage->parsed() || semi->parsed()) {
      const crlc::RunConfig cfg = load_config(config_path, seed_flag);
      crlc::TwoHeadModel model;
      crlc::RunReport report;
      if (train->parsed()) report = crlc::train_end_to_end(cfg, &model);
      else if (two_stage->parsed()) report = crlc::train_two_stage(cfg, &model);
      else report = crlc::train_semi(cfg, &model);
      write_outputs(report, out_path, curves_path, save_model, &model);
      std::printf("report written to %s (final acc %.4f)\n", out_path.c_str(),
                  report.final_metrics.acc);
      return 0;
    }
    if (ablate->parsed()) {
      const crlc::RunConfig cfg = load_config(config_path, seed_flag);
      const auto axis = crlc::ablation_axis_from_string(axis_str);
      std::vector<std::string> values;
      std::string cur;
      for (char ch : values_str) {
        if (ch == ',') {
          values.push_back(cur);
          cur.clear();
        } else {
          cur.push_back(ch);
        }
      }
      values.push_back(cur);
      const auto reports = crlc::ablation_sweep(cfg, axis, values, jobs);
      std::filesystem::create_directories(out_dir);
      ordered_json summary = ordered_json::array();
      for (std::size_t i = 0; i < reports.size(); ++i) {
        const std::string path =
            out_dir + "/ablate_" + axis_str + "_" + values[i] + ".json";
        reports[i].write_json(path);
        summary.push_back(ordered_json{{"value", values[i]},
                                       {"acc", reports[i].final_metrics.acc},
                                       {"nmi", reports[i].final_metrics.nmi},
                                       {"ari", reports[i].final_metrics.ari},
                                       {"report", path}});
      }
      std::ofstream sf(out_dir + "/ablate_" + axis_str + "_summary.json");
      sf << summary.dump(2) << "\n";
      std::printf("%zu reports written to %s\n", reports.size(), out_dir.c_str());
      return 0;
    }
    if (grad_check->parsed()) return run_grad_check(trials, gc_seed, gc_model, 1e-5);
    if (mine->parsed()) {
      const crlc::Dataset ds = crlc::load_csv(data_path);
      crlc::Matrix feats;
      if (!ckpt_path.empty()) {
        const crlc::TwoHeadModel model = crlc::TwoHeadModel::load(ckpt_path);
        feats = crlc::embed_features(model, ds);
      } else {
        feats = ds.features;
        std::vector<double> norms;
        crlc::Matrix z(feats.rows, feats.cols);
        crlc::kernels::normalize_rows(feats, z, norms);
        feats = std::move(z);
      }
      const auto nbrs = crlc::mine_neighbors(feats, k);
      std::ofstream f(neighbors_out);
      if (!f) throw std::runtime_error("cannot open " + neighbors_out);
      for (const auto& row : nbrs) {
        for (std::size_t i = 0; i < row.size(); ++i)
          f << row[i] << (i + 1 < row.size() ? ',' : '\n');
      }
      std::printf("neighbors written to %s\n", neighbors_out.c_str());
      return 0;
    }
    if (eval->parsed()) {
      const crlc::TwoHeadModel model = crlc::TwoHeadModel::load(ckpt_path);
      const crlc::Dataset ds = crlc::load_csv(data_path);
      const crlc::EvalResult r = crlc::evaluate_model(model, ds);
      ordered_json j{{"acc", r.acc}, {"nmi", r.nmi}, {"ari", r.ari},
                     {"labeled_acc", r.labeled_acc}};
      std::ofstream f(eval_out);
      f << j.dump(2) << "\n";
      std::printf("acc %.4f nmi %.4f ari %.4f\n", r.acc, r.nmi, r.ari);
      return 0;
    }
    if (gen->parsed()) {
      const crlc::Dataset ds =
          crlc::gen_mixture(classes, dim, per_class, separation, gen_seed);
      crlc::save_csv(ds, gen_out);
      std::printf("%d samples written to %s\n", ds.size(), gen_out.c_str());
      return 0;
    }
  } catch (const std::system_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitMissingFile;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return kExitError;
}
