#include "crlc/memory_bank.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace crlc {

namespace {
constexpr char kMagic[8] = {'C', 'R', 'L', 'C', 'B', 'A', 'N', 'K'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

MemoryBank::MemoryBank(int n, int c, double alpha, std::uint64_t seed)
    : n_(n), c_(c), alpha_(alpha), rows_(std::max(n, 0), std::max(c, 0)),
      rng_(stream_seed(seed, "bank")) {
  if (n < 1) throw std::invalid_argument("MemoryBank: N must be >= 1");
  if (c < 2) throw std::invalid_argument("MemoryBank: C must be >= 2");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("MemoryBank: alpha must be in [0, 1]");
  rows_.fill(1.0 / c);
}

std::span<const double> MemoryBank::row(int n) const {
  if (n < 0 || n >= n_) throw std::out_of_range("MemoryBank::row: index");
  return rows_.row_span(n);
}

void MemoryBank::update(int n, std::span<const double> q_hat) {
  if (n < 0 || n >= n_) throw std::out_of_range("MemoryBank::update: index");
  if (static_cast<int>(q_hat.size()) != c_)
    throw std::invalid_argument("MemoryBank::update: width mismatch");
  double* r = rows_.row(n);
  for (int c = 0; c < c_; ++c)
    r[c] = alpha_ * r[c] + (1.0 - alpha_) * q_hat[c];
}

std::vector<int> MemoryBank::sample_negatives(int m, int exclude) {
  if (m < 1) throw std::invalid_argument("sample_negatives: M must be >= 1");
  if (exclude < 0 || exclude >= n_)
    throw std::out_of_range("sample_negatives: exclude index");
  if (n_ == 1)
    throw std::invalid_argument("sample_negatives: bank of size 1 has no negatives");
  std::vector<int> out;
  out.reserve(m - 1);
  for (int i = 0; i < m - 1; ++i) {
    // Uniform over the N-1 eligible indices.
    int idx = static_cast<int>(rng_.uniform_int(static_cast<std::uint64_t>(n_ - 1)));
    if (idx >= exclude) ++idx;
    out.push_back(idx);
  }
  return out;
}

void MemoryBank::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("MemoryBank::save: cannot open " + path);
  f.write(kMagic, sizeof(kMagic));
  std::uint32_t version = kVersion;
  f.write(reinterpret_cast<const char*>(&version), sizeof(version));
  std::int64_t n = n_, c = c_;
  f.write(reinterpret_cast<const char*>(&n), sizeof(n));
  f.write(reinterpret_cast<const char*>(&c), sizeof(c));
  f.write(reinterpret_cast<const char*>(&alpha_), sizeof(alpha_));
  f.write(reinterpret_cast<const char*>(rows_.data.data()),
          static_cast<std::streamsize>(rows_.data.size() * sizeof(double)));
  if (!f) throw std::runtime_error("MemoryBank::save: write failed");
}

MemoryBank MemoryBank::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("MemoryBank::load: cannot open " + path);
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("MemoryBank::load: bad magic in " + path);
  std::uint32_t version = 0;
  f.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != kVersion)
    throw std::runtime_error("MemoryBank::load: unsupported version");
  std::int64_t n = 0, c = 0;
  double alpha = 0.0;
  f.read(reinterpret_cast<char*>(&n), sizeof(n));
  f.read(reinterpret_cast<char*>(&c), sizeof(c));
  f.read(reinterpret_cast<char*>(&alpha), sizeof(alpha));
  MemoryBank bank(static_cast<int>(n), static_cast<int>(c), alpha, 0);
  f.read(reinterpret_cast<char*>(bank.rows_.data.data()),
         static_cast<std::streamsize>(bank.rows_.data.size() * sizeof(double)));
  if (!f) throw std::runtime_error("MemoryBank::load: truncated file");
  return bank;
}

}  // namespace crlc
