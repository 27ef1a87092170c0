#include "crlc/report.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace crlc {

namespace {

ordered_json opt_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  return *v;
}

void csv_cell(std::string& line, const std::optional<double>& v) {
  line.push_back(',');
  if (v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", *v);
    line += buf;
  }
}

}  // namespace

ordered_json RunReport::to_json() const {
  ordered_json j;
  j["config"] = config;
  ordered_json epochs = ordered_json::array();
  for (const auto& e : per_epoch) {
    ordered_json r;
    r["epoch"] = e.epoch;
    r["stage"] = e.stage;
    r["loss_pc"] = opt_json(e.loss_pc);
    r["loss_fc"] = opt_json(e.loss_fc);
    r["loss_cluster"] = opt_json(e.loss_cluster);
    r["marginal_entropy"] = opt_json(e.marginal_entropy);
    r["info_nce_pc"] = opt_json(e.info_nce_pc);
    r["info_nce_fc"] = opt_json(e.info_nce_fc);
    r["lr"] = opt_json(e.lr);
    r["xent"] = opt_json(e.xent);
    r["acc"] = opt_json(e.acc);
    r["nmi"] = opt_json(e.nmi);
    r["ari"] = opt_json(e.ari);
    r["labeled_acc"] = opt_json(e.labeled_acc);
    epochs.push_back(std::move(r));
  }
  j["per_epoch"] = std::move(epochs);
  ordered_json fm;
  fm["acc"] = final_metrics.acc;
  fm["nmi"] = final_metrics.nmi;
  fm["ari"] = final_metrics.ari;
  if (final_metrics.labeled_acc) fm["labeled_acc"] = *final_metrics.labeled_acc;
  j["final_metrics"] = std::move(fm);
  j["runtime_s"] = runtime_s;
  j["meta"] = ordered_json{{"timestamp", timestamp}};
  return j;
}

ordered_json RunReport::strip_volatile(ordered_json j) {
  j.erase("runtime_s");
  j.erase("meta");
  return j;
}

void RunReport::write_json(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("report: cannot open " + path);
  f << to_json().dump(2) << "\n";
  if (!f) throw std::runtime_error("report: write failed for " + path);
}

void RunReport::write_curves_csv(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("report: cannot open " + path);
  f << "epoch,stage,loss_pc,loss_fc,loss_cluster,marginal_entropy,"
       "info_nce_pc,info_nce_fc,lr,xent,acc,nmi,ari,labeled_acc\n";
  for (const auto& e : per_epoch) {
    std::string line = std::to_string(e.epoch);
    line += ',';
    line += std::to_string(e.stage);
    csv_cell(line, e.loss_pc);
    csv_cell(line, e.loss_fc);
    csv_cell(line, e.loss_cluster);
    csv_cell(line, e.marginal_entropy);
    csv_cell(line, e.info_nce_pc);
    csv_cell(line, e.info_nce_fc);
    csv_cell(line, e.lr);
    csv_cell(line, e.xent);
    csv_cell(line, e.acc);
    csv_cell(line, e.nmi);
    csv_cell(line, e.ari);
    csv_cell(line, e.labeled_acc);
    f << line << "\n";
  }
  if (!f) throw std::runtime_error("report: write failed for " + path);
}

}  // namespace crlc
