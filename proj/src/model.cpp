#include "crlc/model.hpp"

#include "crlc/kernels.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace crlc {

namespace {
constexpr char kMagic[8] = {'C', 'R', 'L', 'C', 'M', 'O', 'D', 'L'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& f, T& v) {
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
}
}  // namespace

void ModelSpec::validate() const {
  if (input_dim < 1) throw std::invalid_argument("ModelSpec: input_dim must be >= 1");
  if (backbone.empty()) throw std::invalid_argument("ModelSpec: empty backbone");
  for (int s : backbone)
    if (s < 1) throw std::invalid_argument("ModelSpec: backbone size must be >= 1");
  if (rl_hidden < 1 || rl_dim < 1 || c_hidden < 1)
    throw std::invalid_argument("ModelSpec: head sizes must be >= 1");
  if (classes < 2) throw std::invalid_argument("ModelSpec: classes must be >= 2");
  if (subheads < 1) throw std::invalid_argument("ModelSpec: subheads must be >= 1");
  if (!(logit_clamp > 0.0))
    throw std::invalid_argument("ModelSpec: logit_clamp must be > 0");
}

void Affine::init(int in, int out, Rng& rng) {
  w = Matrix(out, in);
  const double limit = std::sqrt(6.0 / in);
  for (double& v : w.data) v = rng.uniform(-limit, limit);
  b.assign(out, 0.0);
  gw.assign(w.data.size(), 0.0);
  gb.assign(out, 0.0);
  vw.assign(w.data.size(), 0.0);
  vb.assign(out, 0.0);
}

void Affine::forward(const Matrix& x, Matrix& y) const {
  if (x.cols != w.cols) throw std::invalid_argument("Affine: input width mismatch");
  y = Matrix(x.rows, w.rows);
  kernels::matmul_nt(x, w, y);
  kernels::add_bias(y, b);
}

void Affine::backward(const Matrix& x, const Matrix& dy, Matrix* dx) {
  // gw += dy^T x, gb += colsum(dy), dx = dy W.
  Matrix gwm(w.rows, w.cols);
  gwm.data.swap(gw);
  kernels::matmul_tn(dy, x, gwm, /*accumulate=*/true);
  gwm.data.swap(gw);
  kernels::colsum(dy, gb, /*accumulate=*/true);
  if (dx) {
    *dx = Matrix(dy.rows, w.cols);
    kernels::matmul(dy, w, *dx);
  }
}

void Affine::zero_grad() {
  std::fill(gw.begin(), gw.end(), 0.0);
  std::fill(gb.begin(), gb.end(), 0.0);
}

TwoHeadModel::TwoHeadModel(const ModelSpec& spec, std::uint64_t init_seed)
    : spec_(spec) {
  spec_.validate();
  Rng rng(stream_seed(init_seed, "init"));
  int in = spec_.input_dim;
  backbone_.resize(spec_.backbone.size());
  for (std::size_t i = 0; i < backbone_.size(); ++i) {
    backbone_[i].init(in, spec_.backbone[i], rng);
    in = spec_.backbone[i];
  }
  rl1_.init(in, spec_.rl_hidden, rng);
  rl2_.init(spec_.rl_hidden, spec_.rl_dim, rng);
  head1_.resize(spec_.subheads);
  head2_.resize(spec_.subheads);
  for (int s = 0; s < spec_.subheads; ++s) {
    head1_[s].init(in, spec_.c_hidden, rng);
    head2_[s].init(spec_.c_hidden, spec_.classes, rng);
  }
}

ForwardCache TwoHeadModel::forward(const Matrix& x, bool need_rl,
                                   bool need_c) const {
  if (x.cols != spec_.input_dim)
    throw std::invalid_argument("forward: input width mismatch");
  ForwardCache f;
  f.input = x;
  f.bb_pre.resize(backbone_.size());
  f.bb_act.resize(backbone_.size());
  const Matrix* cur = &f.input;
  for (std::size_t i = 0; i < backbone_.size(); ++i) {
    backbone_[i].forward(*cur, f.bb_pre[i]);
    f.bb_act[i] = Matrix(f.bb_pre[i].rows, f.bb_pre[i].cols);
    kernels::relu(f.bb_pre[i], f.bb_act[i]);
    cur = &f.bb_act[i];
  }
  const Matrix& h = *cur;

  if (need_rl) {
    rl1_.forward(h, f.rl_pre1);
    f.rl_act1 = Matrix(f.rl_pre1.rows, f.rl_pre1.cols);
    kernels::relu(f.rl_pre1, f.rl_act1);
    rl2_.forward(f.rl_act1, f.rl_prenorm);
    f.z = Matrix(f.rl_prenorm.rows, f.rl_prenorm.cols);
    kernels::normalize_rows(f.rl_prenorm, f.z, f.rl_norms);
    f.has_rl = true;
  }

  if (need_c) {
    const int s_count = spec_.subheads;
    f.head_pre1.resize(s_count);
    f.head_act1.resize(s_count);
    f.head_logits_raw.resize(s_count);
    f.logits.resize(s_count);
    f.probs.resize(s_count);
    const double clamp = spec_.logit_clamp;
    for (int s = 0; s < s_count; ++s) {
      head1_[s].forward(h, f.head_pre1[s]);
      f.head_act1[s] = Matrix(f.head_pre1[s].rows, f.head_pre1[s].cols);
      kernels::relu(f.head_pre1[s], f.head_act1[s]);
      head2_[s].forward(f.head_act1[s], f.head_logits_raw[s]);
      Matrix& raw = f.head_logits_raw[s];
      f.logits[s] = raw;
      for (double& v : f.logits[s].data)
        v = v > clamp ? clamp : (v < -clamp ? -clamp : v);
      f.probs[s] = Matrix(raw.rows, raw.cols);
      kernels::softmax_rows(f.logits[s], f.probs[s]);
    }
    f.has_c = true;
  }
  return f;
}

void TwoHeadModel::backward(const ForwardCache& f, const Matrix* dz,
                            const std::vector<Matrix>* dlogits) {
  const Matrix& h = f.bb_act.back();
  Matrix dh(h.rows, h.cols, 0.0);
  bool have_dh = false;

  if (dz) {
    if (!f.has_rl) throw std::logic_error("backward: cache lacks RL activations");
    Matrix dprenorm(f.z.rows, f.z.cols);
    normalize_backward_rows(f.z, f.rl_norms, *dz, dprenorm);
    Matrix dact1;
    rl2_.backward(f.rl_act1, dprenorm, &dact1);
    Matrix dpre1(dact1.rows, dact1.cols);
    kernels::relu_backward(dact1, f.rl_pre1, dpre1);
    if (backbone_frozen_) {
      rl1_.backward(h, dpre1, nullptr);
    } else {
      Matrix dh_rl;
      rl1_.backward(h, dpre1, &dh_rl);
      for (std::size_t i = 0; i < dh.data.size(); ++i) dh.data[i] += dh_rl.data[i];
    }
    have_dh = true;
  }

  if (dlogits) {
    if (!f.has_c) throw std::logic_error("backward: cache lacks C activations");
    if (static_cast<int>(dlogits->size()) != spec_.subheads)
      throw std::invalid_argument("backward: dlogits per subhead expected");
    const double clamp = spec_.logit_clamp;
    for (int s = 0; s < spec_.subheads; ++s) {
      if ((*dlogits)[s].rows == 0) continue;  // subhead not involved
      // Hard clip: zero gradient where the raw logit was clamped.
      Matrix dlog = (*dlogits)[s];
      const Matrix& raw = f.head_logits_raw[s];
      for (std::size_t i = 0; i < dlog.data.size(); ++i)
        if (raw.data[i] > clamp || raw.data[i] < -clamp) dlog.data[i] = 0.0;
      Matrix dact1;
      head2_[s].backward(f.head_act1[s], dlog, &dact1);
      Matrix dpre1(dact1.rows, dact1.cols);
      kernels::relu_backward(dact1, f.head_pre1[s], dpre1);
      if (backbone_frozen_) {
        head1_[s].backward(h, dpre1, nullptr);
      } else {
        Matrix dh_s;
        head1_[s].backward(h, dpre1, &dh_s);
        for (std::size_t i = 0; i < dh.data.size(); ++i) dh.data[i] += dh_s.data[i];
      }
      have_dh = true;
    }
  }

  if (!have_dh || backbone_frozen_) return;

  Matrix dcur = std::move(dh);
  for (int i = static_cast<int>(backbone_.size()) - 1; i >= 0; --i) {
    Matrix dpre(dcur.rows, dcur.cols);
    kernels::relu_backward(dcur, f.bb_pre[i], dpre);
    const Matrix& layer_in = i == 0 ? f.input : f.bb_act[i - 1];
    if (i == 0) {
      backbone_[i].backward(layer_in, dpre, nullptr);
    } else {
      Matrix dnext;
      backbone_[i].backward(layer_in, dpre, &dnext);
      dcur = std::move(dnext);
    }
  }
}

void TwoHeadModel::zero_grad() {
  for (Affine* l : layers()) l->zero_grad();
}

std::vector<Affine*> TwoHeadModel::layers() {
  std::vector<Affine*> out;
  for (auto& l : backbone_) out.push_back(&l);
  out.push_back(&rl1_);
  out.push_back(&rl2_);
  for (auto& l : head1_) out.push_back(&l);
  for (auto& l : head2_) out.push_back(&l);
  return out;
}

std::vector<const Affine*> TwoHeadModel::layers() const {
  std::vector<const Affine*> out;
  for (auto& l : backbone_) out.push_back(&l);
  out.push_back(&rl1_);
  out.push_back(&rl2_);
  for (auto& l : head1_) out.push_back(&l);
  for (auto& l : head2_) out.push_back(&l);
  return out;
}

std::vector<Affine*> TwoHeadModel::trainable_layers() {
  std::vector<Affine*> out;
  if (!backbone_frozen_)
    for (auto& l : backbone_) out.push_back(&l);
  out.push_back(&rl1_);
  out.push_back(&rl2_);
  for (auto& l : head1_) out.push_back(&l);
  for (auto& l : head2_) out.push_back(&l);
  return out;
}

std::uint64_t TwoHeadModel::backbone_checksum() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix_bytes = [&h](const void* p, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& l : backbone_) {
    mix_bytes(l.w.data.data(), l.w.data.size() * sizeof(double));
    mix_bytes(l.b.data(), l.b.size() * sizeof(double));
  }
  return h;
}

std::size_t TwoHeadModel::param_count() const {
  std::size_t n = 0;
  for (const Affine* l : layers()) n += l->w.data.size() + l->b.size();
  return n;
}

double* TwoHeadModel::param_at(std::size_t i) {
  for (Affine* l : layers()) {
    if (i < l->w.data.size()) return &l->w.data[i];
    i -= l->w.data.size();
    if (i < l->b.size()) return &l->b[i];
    i -= l->b.size();
  }
  throw std::out_of_range("param_at");
}

double TwoHeadModel::grad_at(std::size_t i) const {
  for (const Affine* l : layers()) {
    if (i < l->gw.size()) return l->gw[i];
    i -= l->gw.size();
    if (i < l->gb.size()) return l->gb[i];
    i -= l->gb.size();
  }
  throw std::out_of_range("grad_at");
}

void TwoHeadModel::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("model save: cannot open " + path);
  f.write(kMagic, sizeof(kMagic));
  write_pod(f, kVersion);
  write_pod(f, static_cast<std::int32_t>(spec_.input_dim));
  write_pod(f, static_cast<std::int32_t>(spec_.backbone.size()));
  for (int s : spec_.backbone) write_pod(f, static_cast<std::int32_t>(s));
  write_pod(f, static_cast<std::int32_t>(spec_.rl_hidden));
  write_pod(f, static_cast<std::int32_t>(spec_.rl_dim));
  write_pod(f, static_cast<std::int32_t>(spec_.c_hidden));
  write_pod(f, static_cast<std::int32_t>(spec_.classes));
  write_pod(f, static_cast<std::int32_t>(spec_.subheads));
  write_pod(f, spec_.logit_clamp);
  for (const Affine* l : layers()) {
    f.write(reinterpret_cast<const char*>(l->w.data.data()),
            static_cast<std::streamsize>(l->w.data.size() * sizeof(double)));
    f.write(reinterpret_cast<const char*>(l->b.data()),
            static_cast<std::streamsize>(l->b.size() * sizeof(double)));
  }
  if (!f) throw std::runtime_error("model save: write failed");
}

TwoHeadModel TwoHeadModel::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("model load: cannot open " + path);
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("model load: bad magic in " + path);
  std::uint32_t version = 0;
  read_pod(f, version);
  if (version != kVersion) throw std::runtime_error("model load: unsupported version");
  ModelSpec spec;
  std::int32_t v = 0, nb = 0;
  read_pod(f, v);
  spec.input_dim = v;
  read_pod(f, nb);
  spec.backbone.clear();
  for (int i = 0; i < nb; ++i) {
    read_pod(f, v);
    spec.backbone.push_back(v);
  }
  read_pod(f, v);
  spec.rl_hidden = v;
  read_pod(f, v);
  spec.rl_dim = v;
  read_pod(f, v);
  spec.c_hidden = v;
  read_pod(f, v);
  spec.classes = v;
  read_pod(f, v);
  spec.subheads = v;
  read_pod(f, spec.logit_clamp);
  if (!f) throw std::runtime_error("model load: truncated header");
  TwoHeadModel model(spec, 0);
  for (Affine* l : model.layers()) {
    f.read(reinterpret_cast<char*>(l->w.data.data()),
           static_cast<std::streamsize>(l->w.data.size() * sizeof(double)));
    f.read(reinterpret_cast<char*>(l->b.data()),
           static_cast<std::streamsize>(l->b.size() * sizeof(double)));
  }
  if (!f) throw std::runtime_error("model load: truncated parameters");
  return model;
}

double lr_at(int t, int horizon, double lr_init, double lr_min) {
  if (horizon < 1) throw std::invalid_argument("lr_at: horizon must be >= 1");
  if (t < 0 || t > horizon)
    throw std::invalid_argument("lr_at: epoch outside [0, horizon]");
  const double frac =
      (1.0 + std::cos(3.14159265358979323846 * t / horizon)) / 2.0;
  return lr_min + (lr_init - lr_min) * frac;
}

double SgdState::current_lr() const {
  return cosine ? lr_at(t, horizon, lr_init, lr_min) : lr_init;
}

void sgd_step(TwoHeadModel& model, const SgdState& state) {
  const double lr = state.current_lr();
  const double m = state.momentum, wd = state.weight_decay;
  for (Affine* l : model.trainable_layers()) {
    auto update = [&](std::vector<double>& p, std::vector<double>& g,
                      std::vector<double>& vel) {
      const std::size_t n = p.size();
#pragma omp parallel for schedule(static)
      for (std::int64_t i = 0; i < static_cast<std::int64_t>(n); ++i) {
        const double d = g[i] + wd * p[i];
        vel[i] = m * vel[i] + d;
        p[i] -= lr * (state.nesterov ? d + m * vel[i] : vel[i]);
      }
    };
    update(l->w.data, l->gw, l->vw);
    update(l->b, l->gb, l->vb);
  }
  model.zero_grad();
}

void softmax_backward_rows(const Matrix& q, const Matrix& dq, Matrix& du) {
  if (!q.same_shape(dq) || !q.same_shape(du))
    throw std::invalid_argument("softmax_backward_rows: shape mismatch");
#pragma omp parallel for schedule(static)
  for (int i = 0; i < q.rows; ++i) {
    const double* qi = q.row(i);
    const double* gi = dq.row(i);
    double* oi = du.row(i);
    double dot = 0.0;
    for (int j = 0; j < q.cols; ++j) dot += qi[j] * gi[j];
    for (int j = 0; j < q.cols; ++j) oi[j] = qi[j] * (gi[j] - dot);
  }
}

void normalize_backward_rows(const Matrix& z, const std::vector<double>& norms,
                             const Matrix& dz, Matrix& dh) {
  if (!z.same_shape(dz) || !z.same_shape(dh))
    throw std::invalid_argument("normalize_backward_rows: shape mismatch");
#pragma omp parallel for schedule(static)
  for (int i = 0; i < z.rows; ++i) {
    const double* zi = z.row(i);
    const double* gi = dz.row(i);
    double* oi = dh.row(i);
    double dot = 0.0;
    for (int j = 0; j < z.cols; ++j) dot += zi[j] * gi[j];
    const double inv = 1.0 / norms[i];
    for (int j = 0; j < z.cols; ++j) oi[j] = (gi[j] - zi[j] * dot) * inv;
  }
}

double multihead_cluster_loss(const std::vector<Matrix>& anchor_probs,
                              const std::vector<Matrix>& candidate_probs,
                              const std::vector<int>& positives,
                              const LossWeights& w, const CriticConfig& cfg) {
  if (anchor_probs.empty() || anchor_probs.size() != candidate_probs.size())
    throw std::invalid_argument("multihead_cluster_loss: subhead count mismatch");
  double total = 0.0;
  for (std::size_t s = 0; s < anchor_probs.size(); ++s) {
    const Matrix& anchors = anchor_probs[s];
    const Matrix& cands = candidate_probs[s];
    if (static_cast<int>(positives.size()) != anchors.rows)
      throw std::invalid_argument("multihead_cluster_loss: positives mismatch");
    double pc = 0.0;
    for (int j = 0; j < anchors.rows; ++j) {
      ProbBatch b;
      b.rows = cands;
      b.anchor.assign(anchors.row(j), anchors.row(j) + anchors.cols);
      b.positive_index = positives[j];
      pc += loss_pc(b, cfg);
    }
    pc /= anchors.rows;
    total += pc - w.lambda1 * marginal_entropy(anchors);
  }
  return total / static_cast<double>(anchor_probs.size());
}

}  // namespace crlc
