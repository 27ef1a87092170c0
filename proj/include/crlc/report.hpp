#pragma once

#include "crlc/config.hpp"

#include <optional>
#include <string>
#include <vector>

namespace crlc {

struct EpochRecord {
  int epoch = 0;
  int stage = 0;  // 0 single-stage training, 1/2 for the two-stage pipeline
  std::optional<double> loss_pc;
  std::optional<double> loss_fc;
  std::optional<double> loss_cluster;
  std::optional<double> marginal_entropy;
  std::optional<double> info_nce_pc;
  std::optional<double> info_nce_fc;
  std::optional<double> lr;
  std::optional<double> xent;
  std::optional<double> acc;
  std::optional<double> nmi;
  std::optional<double> ari;
  std::optional<double> labeled_acc;
};

struct FinalMetrics {
  double acc = 0.0;
  double nmi = 0.0;
  double ari = 0.0;
  std::optional<double> labeled_acc;
};

// Everything outside `runtime_s` and `meta` is a pure function of
// (config, seed); comparison mode strips those two fields.
struct RunReport {
  ordered_json config;  // fully-resolved echo
  std::vector<EpochRecord> per_epoch;
  FinalMetrics final_metrics;
  double runtime_s = 0.0;
  std::string timestamp;

  ordered_json to_json() const;
  static ordered_json strip_volatile(ordered_json j);  // comparison form
  void write_json(const std::string& path) const;
  void write_curves_csv(const std::string& path) const;
};

}  // namespace crlc
