#include "crlc/data.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace crlc {

void Dataset::validate() const {
  if (features.rows < 1) throw std::invalid_argument("Dataset: empty");
  if (static_cast<int>(labels.size()) != features.rows)
    throw std::invalid_argument("Dataset: label count mismatch");
  if (class_count < 1) throw std::invalid_argument("Dataset: class_count < 1");
  for (int l : labels)
    if (l < -1 || l >= class_count)
      throw std::invalid_argument("Dataset: label out of range");
}

Dataset gen_mixture(int classes, int dim, int n_per_class, double separation,
                    std::uint64_t seed) {
  if (classes < 2) throw std::invalid_argument("gen_mixture: classes must be >= 2");
  if (dim < 2) throw std::invalid_argument("gen_mixture: dim must be >= 2");
  if (n_per_class < 1)
    throw std::invalid_argument("gen_mixture: n_per_class must be >= 1");
  if (!(separation > 0.0))
    throw std::invalid_argument("gen_mixture: separation must be > 0");

  Rng rng(stream_seed(seed, "data"));
  Matrix means(classes, dim);
  for (int c = 0; c < classes; ++c) {
    double norm = 0.0;
    for (int d = 0; d < dim; ++d) {
      means.at(c, d) = rng.normal();
      norm += means.at(c, d) * means.at(c, d);
    }
    norm = std::sqrt(norm);
    for (int d = 0; d < dim; ++d) means.at(c, d) *= separation / norm;
  }

  Dataset ds;
  ds.class_count = classes;
  ds.features = Matrix(classes * n_per_class, dim);
  ds.labels.resize(classes * n_per_class);
  int row = 0;
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < n_per_class; ++i, ++row) {
      ds.labels[row] = c;
      for (int d = 0; d < dim; ++d)
        ds.features.at(row, d) = means.at(c, d) + rng.normal();
    }
  }
  return ds;
}

void ViewConfig::validate() const {
  if (noise_sigma < 0.0) throw std::invalid_argument("ViewConfig: noise_sigma < 0");
  if (!(mask_prob >= 0.0 && mask_prob < 1.0))
    throw std::invalid_argument("ViewConfig: mask_prob must be in [0, 1)");
  if (scale_jitter < 0.0)
    throw std::invalid_argument("ViewConfig: scale_jitter < 0");
}

std::vector<double> make_view(std::span<const double> x, const ViewConfig& cfg,
                              Rng& rng) {
  cfg.validate();
  std::vector<double> v(x.begin(), x.end());
  if (cfg.noise_sigma > 0.0)
    for (double& e : v) e += cfg.noise_sigma * rng.normal();
  if (cfg.mask_prob > 0.0)
    for (double& e : v)
      if (rng.uniform() < cfg.mask_prob) e = 0.0;
  if (cfg.scale_jitter > 0.0) {
    const double s = 1.0 + rng.uniform(-cfg.scale_jitter, cfg.scale_jitter);
    for (double& e : v) e *= s;
  }
  return v;
}

std::pair<std::vector<double>, std::vector<double>> make_views(
    std::span<const double> x, const ViewConfig& cfg, Rng& rng) {
  auto v1 = make_view(x, cfg, rng);
  auto v2 = make_view(x, cfg, rng);
  return {std::move(v1), std::move(v2)};
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& tok, int line_no) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0' || errno == ERANGE)
    throw std::runtime_error("csv parse error at line " + std::to_string(line_no) +
                             ": non-numeric token '" + tok + "'");
  return v;
}

}  // namespace

Dataset load_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("load_csv: cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw std::runtime_error("load_csv: empty file " + path);
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header.back() != "label")
    throw std::runtime_error("load_csv: header must be f0,...,f{D-1},label");
  const int dim = static_cast<int>(header.size()) - 1;
  for (int d = 0; d < dim; ++d) {
    if (header[d] != "f" + std::to_string(d))
      throw std::runtime_error("load_csv: unexpected header column '" + header[d] +
                               "'");
  }

  std::vector<double> values;
  std::vector<int> labels;
  int line_no = 1;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto toks = split_csv_line(line);
    if (static_cast<int>(toks.size()) != dim + 1)
      throw std::runtime_error("csv schema error at line " + std::to_string(line_no) +
                               ": expected " + std::to_string(dim + 1) +
                               " columns, got " + std::to_string(toks.size()));
    for (int d = 0; d < dim; ++d) values.push_back(parse_double(toks[d], line_no));
    const double lab = parse_double(toks[dim], line_no);
    const int ilab = static_cast<int>(lab);
    if (static_cast<double>(ilab) != lab || ilab < -1)
      throw std::runtime_error("csv parse error at line " + std::to_string(line_no) +
                               ": label must be an integer >= -1");
    labels.push_back(ilab);
  }
  if (labels.empty()) throw std::runtime_error("load_csv: no data rows in " + path);

  Dataset ds;
  ds.features = Matrix(static_cast<int>(labels.size()), dim);
  ds.features.data = std::move(values);
  ds.labels = std::move(labels);
  int max_label = -1;
  for (int l : ds.labels) max_label = std::max(max_label, l);
  ds.class_count = max_label + 1 > 0 ? max_label + 1 : 1;
  return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("save_csv: cannot open " + path);
  for (int d = 0; d < ds.dim(); ++d) f << "f" << d << ",";
  f << "label\n";
  char buf[32];
  for (int i = 0; i < ds.size(); ++i) {
    for (int d = 0; d < ds.dim(); ++d) {
      // %.17g round-trips doubles exactly.
      std::snprintf(buf, sizeof(buf), "%.17g", ds.features.at(i, d));
      f << buf << ",";
    }
    f << ds.labels[i] << "\n";
  }
  if (!f) throw std::runtime_error("save_csv: write failed");
}

std::vector<int> sample_labeled(const Dataset& ds, int n_per_class,
                                std::uint64_t seed) {
  if (n_per_class < 1)
    throw std::invalid_argument("sample_labeled: n_per_class must be >= 1");
  std::vector<std::vector<int>> per_class(ds.class_count);
  for (int i = 0; i < ds.size(); ++i)
    if (ds.labels[i] >= 0) per_class[ds.labels[i]].push_back(i);
  Rng rng(stream_seed(seed, "labeled"));
  std::vector<int> out;
  for (int c = 0; c < ds.class_count; ++c) {
    auto& candidates = per_class[c];
    if (static_cast<int>(candidates.size()) < n_per_class)
      throw std::invalid_argument("sample_labeled: class " + std::to_string(c) +
                                  " has only " +
                                  std::to_string(candidates.size()) +
                                  " labeled candidates");
    rng.shuffle(candidates);
    std::vector<int> pick(candidates.begin(), candidates.begin() + n_per_class);
    std::sort(pick.begin(), pick.end());
    out.insert(out.end(), pick.begin(), pick.end());
  }
  return out;
}

BatchSampler::BatchSampler(int n, int batch_size, std::uint64_t seed)
    : n_(n), batch_(batch_size), seed_(stream_seed(seed, "data")) {
  if (n < 1) throw std::invalid_argument("BatchSampler: empty dataset");
  if (batch_size < 1) throw std::invalid_argument("BatchSampler: batch size < 1");
  if (batch_size > n)
    throw std::invalid_argument("BatchSampler: batch size exceeds dataset");
}

int BatchSampler::batches_per_epoch() const { return n_ / batch_; }

std::vector<std::vector<int>> BatchSampler::epoch_batches(int epoch) const {
  std::vector<int> order(n_);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(mix_seed(seed_, static_cast<std::uint64_t>(epoch)));
  rng.shuffle(order);
  std::vector<std::vector<int>> batches;
  const int nb = batches_per_epoch();
  batches.reserve(nb);
  for (int b = 0; b < nb; ++b)
    batches.emplace_back(order.begin() + static_cast<std::size_t>(b) * batch_,
                         order.begin() + static_cast<std::size_t>(b + 1) * batch_);
  return batches;
}

}  // namespace crlc
