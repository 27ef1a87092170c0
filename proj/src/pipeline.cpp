#include "crlc/pipeline.hpp"

#include "crlc/kernels.hpp"
#include "crlc/memory_bank.hpp"
#include "crlc/metrics.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace crlc {

namespace {

// ---------------------------------------------------------------------------
// Loss machinery shared by the pipelines and the gradient checks.
// Per-anchor losses are means over anchors; the in-batch candidate set of an
// anchor view is the positive views of the whole batch, positive on the
// diagonal. All probability critics are symmetric, so the two symmetrized
// orderings just swap the roles of the two view matrices.
// ---------------------------------------------------------------------------

void smooth_rows(const Matrix& q, double gamma, Matrix& out) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < q.rows; ++i)
    smooth_into(q.row_span(i), gamma, out.row_span(i));
}

struct OrderingStats {
  double loss = 0.0;     // mean contrastive loss over anchors
  double entropy = 0.0;  // marginal entropy of the anchors
};

std::vector<double> column_mean(const Matrix& q) {
  std::vector<double> out(q.cols, 0.0);
  kernels::colsum(q, out);
  for (double& v : out) v /= q.rows;
  return out;
}

// Chain one side's probability-space gradient through the smoothing factor,
// the entropy term of the orderings where this side anchored, and the
// softmax; accumulate into the logit buffer.
void chain_prob_grad_to_logits(const Matrix& q, const Matrix& w, double gamma,
                               const std::vector<double>& ent_term, Matrix* du) {
  if (!du) return;
  const int m = q.rows, c = q.cols;
  Matrix dq(m, c);
#pragma omp parallel for schedule(static)
  for (int j = 0; j < m; ++j)
    for (int t = 0; t < c; ++t)
      dq.at(j, t) = (1.0 - gamma) * w.at(j, t) + ent_term[t];
  Matrix tmp(m, c);
  softmax_backward_rows(q, dq, tmp);
  for (std::size_t i = 0; i < tmp.data.size(); ++i) du->data[i] += tmp.data[i];
}

std::vector<double> entropy_grad_term(const std::vector<double>& qbar,
                                      double lambda1, double kappa, int m) {
  std::vector<double> term(qbar.size(), 0.0);
  if (lambda1 != 0.0)
    for (std::size_t t = 0; t < qbar.size(); ++t)
      term[t] = kappa * lambda1 * (std::log(qbar[t]) + 1.0) / m;
  return term;
}

// Both symmetrized orderings of the in-batch probability-contrastive loss
// for one subhead. The candidate set of anchor j is the whole other-view
// batch with the positive on the diagonal. Per-ordering gradients carry
// kappa; the anchor-side entropy term rides along before the softmax.
//
// For the log-of-dot-product critic the softmax over scores telescopes:
// softmax_i(log d_i) = d_i / sum(d), so the loss is log(sum_i q.p_i) -
// log(q.p_pos) and the score-weighted candidate sums collapse to O(M C)
// without materializing the M x M score matrix.
std::pair<OrderingStats, OrderingStats> pc_pair(const Matrix& qa,
                                                const Matrix& qb,
                                                CriticKind kind, double gamma,
                                                double lambda1, double kappa,
                                                Matrix* dua, Matrix* dub) {
  const int m = qa.rows, c = qa.cols;
  Matrix qa_s(m, c), qb_s(m, c);
  smooth_rows(qa, gamma, qa_s);
  smooth_rows(qb, gamma, qb_s);

  const std::vector<double> qbar_a = column_mean(qa);
  const std::vector<double> qbar_b = column_mean(qb);

  OrderingStats st_ab, st_ba;
  st_ab.entropy = entropy(qbar_a);
  st_ba.entropy = entropy(qbar_b);

  // Probability-space gradients per side (anchor role + candidate role).
  Matrix wa, wb;
  if (dua || dub) {
    wa = Matrix(m, c, 0.0);
    wb = Matrix(m, c, 0.0);
  }

  if (kind == CriticKind::LogDot) {
    std::vector<double> csum_a(c, 0.0), csum_b(c, 0.0);
    kernels::colsum(qa_s, csum_a);
    kernels::colsum(qb_s, csum_b);

    std::vector<double> diag(m), rows_ab(m), rows_ba(m);
    bool positive = true;
#pragma omp parallel for schedule(static) reduction(&& : positive)
    for (int j = 0; j < m; ++j) {
      const double* aj = qa_s.row(j);
      const double* bj = qb_s.row(j);
      double d = 0.0, ra = 0.0, rb = 0.0;
      for (int t = 0; t < c; ++t) {
        d += aj[t] * bj[t];
        ra += aj[t] * csum_b[t];
        rb += bj[t] * csum_a[t];
      }
      diag[j] = d;
      rows_ab[j] = ra;
      rows_ba[j] = rb;
      positive = positive && d > 0.0 && ra > 0.0 && rb > 0.0;
    }
    if (!positive)
      throw std::domain_error("loss_pc: zero dot product (missing smoothing)");

    double acc_ab = 0.0, acc_ba = 0.0;
    for (int j = 0; j < m; ++j) {
      acc_ab += std::log(rows_ab[j]) - std::log(diag[j]);
      acc_ba += std::log(rows_ba[j]) - std::log(diag[j]);
    }
    st_ab.loss = acc_ab / m;
    st_ba.loss = acc_ba / m;

    if (dua || dub) {
      // Ordering a->b: dL/dqa_s[j] = (kappa/m)(csum_b / rows_ab[j] - qb_s[j]/diag[j])
      //                dL/dqb_s[i] = (kappa/m)(sum_j qa_s[j]/rows_ab[j] - qa_s[i]/diag[i])
      // and symmetrically for b->a; both roles accumulate into wa / wb.
      std::vector<double> wsum_ab(c, 0.0), wsum_ba(c, 0.0);
      for (int j = 0; j < m; ++j) {
        const double* aj = qa_s.row(j);
        const double* bj = qb_s.row(j);
        for (int t = 0; t < c; ++t) {
          wsum_ab[t] += aj[t] / rows_ab[j];
          wsum_ba[t] += bj[t] / rows_ba[j];
        }
      }
      const double scale = kappa / m;
#pragma omp parallel for schedule(static)
      for (int j = 0; j < m; ++j) {
        const double* aj = qa_s.row(j);
        const double* bj = qb_s.row(j);
        double* waj = wa.row(j);
        double* wbj = wb.row(j);
        for (int t = 0; t < c; ++t) {
          // anchor role of a->b plus candidate role of b->a (and vice versa);
          // both diagonal corrections hit the opposite view's row.
          waj[t] = scale * (csum_b[t] / rows_ab[j] + wsum_ba[t] -
                            2.0 * bj[t] / diag[j]);
          wbj[t] = scale * (csum_a[t] / rows_ba[j] + wsum_ab[t] -
                            2.0 * aj[t] / diag[j]);
        }
      }
    }
  } else {
    // Generic critics: materialize the score matrix once; the reverse
    // ordering reads it transposed. Softmax row statistics give the loss
    // and the score gradient in one pass.
    Matrix scores(m, m);
#pragma omp parallel for schedule(static)
    for (int j = 0; j < m; ++j)
      for (int i = 0; i < m; ++i)
        scores.at(j, i) = prob_critic(kind, qa_s.row_span(j), qb_s.row_span(i));

    // g_ab[j,i] = kappa/m (softmax_i(S[j,:]) - delta), g_ba over columns.
    Matrix g_ab(m, m), g_ba(m, m);
    std::vector<double> loss_ab(m), loss_ba(m);
    const double scale = kappa / m;
#pragma omp parallel for schedule(static)
    for (int j = 0; j < m; ++j) {
      double mx = scores.at(j, 0);
      for (int i = 1; i < m; ++i) mx = std::max(mx, scores.at(j, i));
      double z = 0.0;
      for (int i = 0; i < m; ++i) {
        g_ab.at(j, i) = std::exp(scores.at(j, i) - mx);
        z += g_ab.at(j, i);
      }
      loss_ab[j] = std::log(z) - (scores.at(j, j) - mx);
      for (int i = 0; i < m; ++i) g_ab.at(j, i) *= scale / z;
      g_ab.at(j, j) -= scale;
    }
#pragma omp parallel for schedule(static)
    for (int i = 0; i < m; ++i) {
      double mx = scores.at(0, i);
      for (int j = 1; j < m; ++j) mx = std::max(mx, scores.at(j, i));
      double z = 0.0;
      for (int j = 0; j < m; ++j) {
        g_ba.at(i, j) = std::exp(scores.at(j, i) - mx);
        z += g_ba.at(i, j);
      }
      loss_ba[i] = std::log(z) - (scores.at(i, i) - mx);
      for (int j = 0; j < m; ++j) g_ba.at(i, j) *= scale / z;
      g_ba.at(i, i) -= scale;
    }
    double acc_ab = 0.0, acc_ba = 0.0;
    for (int j = 0; j < m; ++j) {
      acc_ab += loss_ab[j];
      acc_ba += loss_ba[j];
    }
    st_ab.loss = acc_ab / m;
    st_ba.loss = acc_ba / m;

    if (dua || dub) {
      if (kind == CriticKind::Dot) {
        // d f(p, q) / d p = q.
        kernels::matmul(g_ab, qb_s, wa);
        kernels::matmul_tn(g_ab, qa_s, wb, /*accumulate=*/true);
        Matrix tmp(m, c);
        kernels::matmul(g_ba, qa_s, tmp);
        for (std::size_t i = 0; i < wb.data.size(); ++i) wb.data[i] += tmp.data[i];
        kernels::matmul_tn(g_ba, qb_s, wa, /*accumulate=*/true);
      } else {
        // Numerical critic gradients, chained analytically. The critics
        // are symmetric, so one per-pair evaluation serves all four roles.
#pragma omp parallel for schedule(static)
        for (int j = 0; j < m; ++j) {
          double* waj = wa.row(j);
          for (int i = 0; i < m; ++i) {
            const auto fd =
                critic_grad_fd(kind, qa_s.row_span(j), qb_s.row_span(i));
            const double w_anchor = g_ab.at(j, i);   // j anchors i in a->b
            const double w_cand = g_ba.at(i, j);     // i anchors j in b->a
            for (int t = 0; t < c; ++t) waj[t] += (w_anchor + w_cand) * fd[t];
          }
        }
#pragma omp parallel for schedule(static)
        for (int i = 0; i < m; ++i) {
          double* wbi = wb.row(i);
          for (int j = 0; j < m; ++j) {
            const auto fd =
                critic_grad_fd(kind, qb_s.row_span(i), qa_s.row_span(j));
            const double w_cand = g_ab.at(j, i);
            const double w_anchor = g_ba.at(i, j);
            for (int t = 0; t < c; ++t) wbi[t] += (w_anchor + w_cand) * fd[t];
          }
        }
      }
    }
  }

  if (dua || dub) {
    chain_prob_grad_to_logits(qa, wa, gamma,
                              entropy_grad_term(qbar_a, lambda1, kappa, m), dua);
    chain_prob_grad_to_logits(qb, wb, gamma,
                              entropy_grad_term(qbar_b, lambda1, kappa, m), dub);
  }
  return {st_ab, st_ba};
}

// Both orderings of the feature-contrastive loss; gradients scaled by kappa.
std::pair<double, double> fc_pair(const Matrix& za, const Matrix& zb, double tau,
                                  double kappa, Matrix* dza, Matrix* dzb) {
  const int m = za.rows;
  Matrix scores(m, m);
  kernels::matmul_nt(za, zb, scores);
  for (double& v : scores.data) v /= tau;

  const bool grads = dza != nullptr;
  Matrix g_ab, g_ba;
  if (grads) {
    g_ab = Matrix(m, m);
    g_ba = Matrix(m, m);
  }
  std::vector<double> loss_ab(m), loss_ba(m);
  const double scale = grads ? kappa / (m * tau) : 0.0;
#pragma omp parallel for schedule(static)
  for (int j = 0; j < m; ++j) {
    double mx = scores.at(j, 0);
    for (int i = 1; i < m; ++i) mx = std::max(mx, scores.at(j, i));
    double z = 0.0;
    if (grads) {
      for (int i = 0; i < m; ++i) {
        g_ab.at(j, i) = std::exp(scores.at(j, i) - mx);
        z += g_ab.at(j, i);
      }
      for (int i = 0; i < m; ++i) g_ab.at(j, i) *= scale / z;
      g_ab.at(j, j) -= scale;
    } else {
      for (int i = 0; i < m; ++i) z += std::exp(scores.at(j, i) - mx);
    }
    loss_ab[j] = std::log(z) - (scores.at(j, j) - mx);
  }
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    double mx = scores.at(0, i);
    for (int j = 1; j < m; ++j) mx = std::max(mx, scores.at(j, i));
    double z = 0.0;
    if (grads) {
      for (int j = 0; j < m; ++j) {
        g_ba.at(i, j) = std::exp(scores.at(j, i) - mx);
        z += g_ba.at(i, j);
      }
      for (int j = 0; j < m; ++j) g_ba.at(i, j) *= scale / z;
      g_ba.at(i, i) -= scale;
    } else {
      for (int j = 0; j < m; ++j) z += std::exp(scores.at(j, i) - mx);
    }
    loss_ba[i] = std::log(z) - (scores.at(i, i) - mx);
  }

  double acc_ab = 0.0, acc_ba = 0.0;
  for (int j = 0; j < m; ++j) {
    acc_ab += loss_ab[j];
    acc_ba += loss_ba[j];
  }

  if (grads) {
    // dza gets the anchor role of a->b plus the candidate role of b->a.
    kernels::matmul(g_ab, zb, *dza);
    kernels::matmul_tn(g_ba, zb, *dza, /*accumulate=*/true);
    kernels::matmul(g_ba, za, *dzb);
    kernels::matmul_tn(g_ab, za, *dzb, /*accumulate=*/true);
  }
  return {acc_ab / m, acc_ba / m};
}

// Crossentropy of labels against subhead 0, from clamped logits.
double xent_from_logits(const Matrix& logits, const std::vector<int>& y,
                        double grad_scale, Matrix* dlogits) {
  const int m = logits.rows, c = logits.cols;
  double total = 0.0;
  for (int j = 0; j < m; ++j) {
    const double* u = logits.row(j);
    double mx = u[0];
    for (int t = 1; t < c; ++t) mx = u[t] > mx ? u[t] : mx;
    double z = 0.0;
    for (int t = 0; t < c; ++t) z += std::exp(u[t] - mx);
    total -= u[y[j]] - mx - std::log(z);
    if (dlogits) {
      for (int t = 0; t < c; ++t)
        dlogits->at(j, t) += grad_scale * (std::exp(u[t] - mx) / z -
                                           (t == y[j] ? 1.0 : 0.0)) / m;
    }
  }
  return total / m;
}

struct PairLossOptions {
  bool use_pc = true;
  bool use_fc = true;
  double fc_weight = 10.0;  // lambda2, or 1.0 for the L_FC-only stage
};

BatchLossBreakdown pair_losses(const TwoHeadModel& model, const Matrix& v1,
                               const Matrix& v2, const RunConfig& cfg,
                               const PairLossOptions& opt, const Matrix* lx,
                               const std::vector<int>* ly,
                               TwoHeadModel* grad_target) {
  if (v1.rows != v2.rows || v1.cols != v2.cols)
    throw std::invalid_argument("pair_losses: view shapes differ");
  const CriticConfig critic = cfg.critic_config();
  const bool use_fc = opt.use_fc && opt.fc_weight > 0.0;
  const bool grads = grad_target != nullptr;

  ForwardCache f1 = model.forward(v1, use_fc, opt.use_pc);
  ForwardCache f2 = model.forward(v2, use_fc, opt.use_pc);

  const int m = v1.rows;
  const int s_count = model.spec().subheads;
  const int classes = model.spec().classes;

  std::vector<Matrix> du1, du2;
  Matrix dz1, dz2;
  if (grads) {
    if (opt.use_pc) {
      du1.assign(s_count, Matrix(m, classes, 0.0));
      du2.assign(s_count, Matrix(m, classes, 0.0));
    }
    if (use_fc) {
      dz1 = Matrix(m, model.spec().rl_dim, 0.0);
      dz2 = Matrix(m, model.spec().rl_dim, 0.0);
    }
  }

  BatchLossBreakdown out;
  if (opt.use_pc) {
    const double kappa = 1.0 / (2.0 * s_count);
    for (int s = 0; s < s_count; ++s) {
      const auto [st12, st21] =
          pc_pair(f1.probs[s], f2.probs[s], critic.kind, critic.gamma,
                  cfg.lambda1, kappa, grads ? &du1[s] : nullptr,
                  grads ? &du2[s] : nullptr);
      out.loss_pc += 0.5 * (st12.loss + st21.loss);
      out.entropy += 0.5 * (st12.entropy + st21.entropy);
    }
    out.loss_pc /= s_count;
    out.entropy /= s_count;
  }
  if (use_fc) {
    const auto [l12, l21] =
        fc_pair(f1.z, f2.z, critic.tau, opt.fc_weight / 2.0,
                grads ? &dz1 : nullptr, grads ? &dz2 : nullptr);
    out.loss_fc = 0.5 * (l12 + l21);
  }

  ForwardCache fl;
  std::vector<Matrix> dul;
  if (lx) {
    if (!ly || static_cast<int>(ly->size()) != lx->rows)
      throw std::invalid_argument("pair_losses: labeled batch mismatch");
    fl = model.forward(*lx, false, true);
    if (grads) {
      dul.assign(s_count, Matrix());
      dul[0] = Matrix(lx->rows, classes, 0.0);
    }
    out.xent = xent_from_logits(fl.logits[0], *ly, cfg.lambda3,
                                grads ? &dul[0] : nullptr);
  }

  out.total = out.loss_pc - cfg.lambda1 * out.entropy +
              opt.fc_weight * out.loss_fc + cfg.lambda3 * out.xent;

  if (grads) {
    grad_target->backward(f1, use_fc ? &dz1 : nullptr,
                          opt.use_pc ? &du1 : nullptr);
    grad_target->backward(f2, use_fc ? &dz2 : nullptr,
                          opt.use_pc ? &du2 : nullptr);
    if (lx) grad_target->backward(fl, nullptr, &dul);
  }
  return out;
}

PairLossOptions options_from_config(const RunConfig& cfg) {
  PairLossOptions opt;
  opt.use_pc = true;
  opt.use_fc = cfg.lambda2 > 0.0;
  opt.fc_weight = cfg.lambda2;
  return opt;
}

// Memory-bank path: anchors are parametric, candidates are bank rows
// (positive first, then sampled negatives); no candidate gradients. The
// log-of-dot-product softmax telescopes here too.
OrderingStats pc_bank_ordering(const Matrix& qa, const Matrix& cand_rows,
                               const std::vector<int>& cand_offsets,
                               CriticKind kind, double gamma, double lambda1,
                               double kappa, Matrix* dua) {
  const int m = qa.rows, c = qa.cols;
  const int m_cand = cand_offsets[1] - cand_offsets[0];
  Matrix qa_s(m, c);
  smooth_rows(qa, gamma, qa_s);
  Matrix cand_s(cand_rows.rows, c);
  smooth_rows(cand_rows, gamma, cand_s);

  const std::vector<double> qbar = column_mean(qa);

  std::vector<double> per_anchor(m, 0.0);
  Matrix dqa;
  if (dua) dqa = Matrix(m, c, 0.0);
  bool positive = true;
#pragma omp parallel for schedule(static) reduction(&& : positive)
  for (int j = 0; j < m; ++j) {
    const double* aj = qa_s.row(j);
    double* out = dua ? dqa.row(j) : nullptr;
    if (kind == CriticKind::LogDot) {
      std::vector<double> csum(c, 0.0);
      double pos_dot = 0.0, rowsum = 0.0;
      for (int i = 0; i < m_cand; ++i) {
        const double* cand = cand_s.row(cand_offsets[j] + i);
        double dot = 0.0;
        for (int t = 0; t < c; ++t) {
          dot += aj[t] * cand[t];
          csum[t] += cand[t];
        }
        if (i == 0) pos_dot = dot;
        rowsum += dot;
      }
      if (!(pos_dot > 0.0) || !(rowsum > 0.0)) {
        positive = false;
        continue;
      }
      per_anchor[j] = std::log(rowsum) - std::log(pos_dot);
      if (out) {
        const double* pos = cand_s.row(cand_offsets[j]);
        const double scale = kappa / m;
        for (int t = 0; t < c; ++t)
          out[t] = scale * (csum[t] / rowsum - pos[t] / pos_dot);
      }
    } else {
      std::vector<double> scores(m_cand);
      for (int i = 0; i < m_cand; ++i)
        scores[i] = prob_critic(kind, qa_s.row_span(j),
                                cand_s.row_span(cand_offsets[j] + i));
      per_anchor[j] = contrast_from_scores(scores, 0);
      if (out) {
        auto g = contrast_grad_scores(scores, 0);
        for (int i = 0; i < m_cand; ++i) {
          const double gi = g[i] * kappa / m;
          const auto cand = cand_s.row_span(cand_offsets[j] + i);
          if (kind == CriticKind::Dot) {
            for (int t = 0; t < c; ++t) out[t] += gi * cand[t];
          } else {
            const auto fd = critic_grad_fd(kind, qa_s.row_span(j), cand);
            for (int t = 0; t < c; ++t) out[t] += gi * fd[t];
          }
        }
      }
    }
  }
  if (!positive)
    throw std::domain_error("loss_pc: zero dot product (missing smoothing)");

  OrderingStats st;
  for (int j = 0; j < m; ++j) st.loss += per_anchor[j];
  st.loss /= m;
  st.entropy = entropy(qbar);

  if (dua)
    chain_prob_grad_to_logits(qa, dqa, gamma,
                              entropy_grad_term(qbar, lambda1, kappa, m), dua);
  return st;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

enum class RunMode { EndToEnd, Semi, TwoStage };

struct Trainer {
  RunConfig cfg;
  RunMode mode;
  Dataset ds;
  TwoHeadModel model;
  SgdState sgd;
  std::vector<MemoryBank> banks;
  Rng aug_root;
  Rng labeled_root;
  Rng neighbor_root;
  std::vector<int> labeled_idx;
  std::vector<std::vector<int>> neighbors;
  PcBackend backend;
  long global_step = 0;

  static RunConfig validated(RunConfig c) {
    c.validate();
    return c;
  }

  Trainer(const RunConfig& c, RunMode m, const std::vector<int>* labeled)
      : cfg(validated(c)),
        mode(m),
        ds(cfg.make_dataset()),
        model(cfg.model_spec(ds.dim(), cfg.dataset.classes), cfg.seed),
        aug_root(stream_seed(cfg.seed, "augment")),
        labeled_root(stream_seed(cfg.seed, "labeled-batch")),
        neighbor_root(stream_seed(cfg.seed, "neighbors")),
        backend(pc_backend_from_string(cfg.pc_backend)) {
    ds.validate();
    if (cfg.batch_size > ds.size())
      throw std::invalid_argument("config: batch_size exceeds dataset size");
    if (mode != RunMode::TwoStage && backend == PcBackend::MemoryBank) {
      banks.reserve(cfg.subheads);
      for (int s = 0; s < cfg.subheads; ++s)
        banks.emplace_back(ds.size(), cfg.dataset.classes, cfg.alpha,
                           mix_seed(cfg.seed, static_cast<std::uint64_t>(s)));
    }
    if (mode == RunMode::Semi) {
      labeled_idx = labeled ? *labeled
                            : sample_labeled(ds, cfg.labels_per_class, cfg.seed);
      if (labeled_idx.empty())
        throw std::invalid_argument("train_semi: empty labeled set");
      for (int i : labeled_idx) {
        if (i < 0 || i >= ds.size() || ds.labels[i] < 0)
          throw std::invalid_argument("train_semi: invalid labeled index");
      }
    }
  }

  Matrix gather_views(const std::vector<int>& idx, int view_slot) {
    Matrix x(static_cast<int>(idx.size()), ds.dim());
#pragma omp parallel for schedule(static)
    for (int j = 0; j < static_cast<int>(idx.size()); ++j) {
      Rng rng = aug_root.substream(static_cast<std::uint64_t>(global_step),
                                   static_cast<std::uint64_t>(idx[j]));
      auto [v1, v2] = make_views(ds.features.row_span(idx[j]), cfg.view, rng);
      const auto& v = view_slot == 0 ? v1 : v2;
      std::copy(v.begin(), v.end(), x.row(j));
    }
    return x;
  }

  // Stage-2 positives: one view of the sample, one view of a drawn neighbor.
  std::pair<Matrix, Matrix> gather_neighbor_views(const std::vector<int>& idx) {
    Matrix x1(static_cast<int>(idx.size()), ds.dim());
    Matrix x2(static_cast<int>(idx.size()), ds.dim());
#pragma omp parallel for schedule(static)
    for (int j = 0; j < static_cast<int>(idx.size()); ++j) {
      const int n = idx[j];
      Rng pick = neighbor_root.substream(static_cast<std::uint64_t>(global_step),
                                         static_cast<std::uint64_t>(n));
      const auto& nbrs = neighbors[n];
      const int m = nbrs[pick.uniform_int(nbrs.size())];
      Rng rng = aug_root.substream(static_cast<std::uint64_t>(global_step),
                                   static_cast<std::uint64_t>(n));
      auto v1 = make_view(ds.features.row_span(n), cfg.view, rng);
      auto v2 = make_view(ds.features.row_span(m), cfg.view, rng);
      std::copy(v1.begin(), v1.end(), x1.row(j));
      std::copy(v2.begin(), v2.end(), x2.row(j));
    }
    return {std::move(x1), std::move(x2)};
  }

  BatchLossBreakdown bank_step(const std::vector<int>& idx) {
    const int m = static_cast<int>(idx.size());
    const int m_cand = cfg.bank_negatives;
    const CriticConfig critic = cfg.critic_config();
    Matrix x1 = gather_views(idx, 0);
    Matrix x2 = gather_views(idx, 1);
    const bool use_fc = cfg.lambda2 > 0.0;
    ForwardCache f1 = model.forward(x1, use_fc, true);
    ForwardCache f2 = model.forward(x2, use_fc, true);

    // Candidate indices are drawn once per step and shared by the subheads;
    // candidate 0 is the anchor's own bank row.
    std::vector<int> cand_offsets(m + 1);
    std::vector<int> cand_idx;
    cand_idx.reserve(static_cast<std::size_t>(m) * m_cand);
    for (int j = 0; j < m; ++j) {
      cand_offsets[j] = static_cast<int>(cand_idx.size());
      cand_idx.push_back(idx[j]);
      auto negs = banks[0].sample_negatives(m_cand, idx[j]);
      cand_idx.insert(cand_idx.end(), negs.begin(), negs.end());
    }
    cand_offsets[m] = static_cast<int>(cand_idx.size());

    const int s_count = cfg.subheads;
    const int classes = cfg.dataset.classes;
    std::vector<Matrix> du1(s_count, Matrix(m, classes, 0.0));
    std::vector<Matrix> du2(s_count, Matrix(m, classes, 0.0));
    Matrix dz1, dz2;
    if (use_fc) {
      dz1 = Matrix(m, cfg.rl_dim, 0.0);
      dz2 = Matrix(m, cfg.rl_dim, 0.0);
    }

    BatchLossBreakdown out;
    const double kappa = 1.0 / (2.0 * s_count);
    for (int s = 0; s < s_count; ++s) {
      Matrix cand_rows(static_cast<int>(cand_idx.size()), classes);
      for (std::size_t i = 0; i < cand_idx.size(); ++i) {
        const auto row = banks[s].row(cand_idx[i]);
        std::copy(row.begin(), row.end(), cand_rows.row(static_cast<int>(i)));
      }
      auto st1 = pc_bank_ordering(f1.probs[s], cand_rows, cand_offsets,
                                  critic.kind, critic.gamma, cfg.lambda1, kappa,
                                  &du1[s]);
      auto st2 = pc_bank_ordering(f2.probs[s], cand_rows, cand_offsets,
                                  critic.kind, critic.gamma, cfg.lambda1, kappa,
                                  &du2[s]);
      out.loss_pc += 0.5 * (st1.loss + st2.loss);
      out.entropy += 0.5 * (st1.entropy + st2.entropy);
    }
    out.loss_pc /= s_count;
    out.entropy /= s_count;

    if (use_fc) {
      const auto [l12, l21] =
          fc_pair(f1.z, f2.z, critic.tau, cfg.lambda2 / 2.0, &dz1, &dz2);
      out.loss_fc = 0.5 * (l12 + l21);
    }
    out.total = out.loss_pc - cfg.lambda1 * out.entropy + cfg.lambda2 * out.loss_fc;

    model.backward(f1, use_fc ? &dz1 : nullptr, &du1);
    model.backward(f2, use_fc ? &dz2 : nullptr, &du2);

    // Read-then-write: bank rows move only after the step's loss.
    for (int s = 0; s < s_count; ++s)
      for (int j = 0; j < m; ++j)
        banks[s].update(idx[j], f1.probs[s].row_span(j));
    return out;
  }

  BatchLossBreakdown in_batch_step(const std::vector<int>& idx) {
    Matrix x1 = gather_views(idx, 0);
    Matrix x2 = gather_views(idx, 1);
    Matrix lx;
    std::vector<int> ly;
    const bool semi = mode == RunMode::Semi && cfg.lambda3 > 0.0;
    if (semi) {
      Rng rng = labeled_root.substream(static_cast<std::uint64_t>(global_step));
      lx = Matrix(cfg.labeled_batch, ds.dim());
      ly.resize(cfg.labeled_batch);
      for (int j = 0; j < cfg.labeled_batch; ++j) {
        const int pick = labeled_idx[rng.uniform_int(labeled_idx.size())];
        std::copy(ds.features.row(pick), ds.features.row(pick) + ds.dim(),
                  lx.row(j));
        ly[j] = ds.labels[pick];
      }
    }
    return pair_losses(model, x1, x2, cfg, options_from_config(cfg),
                       semi ? &lx : nullptr, semi ? &ly : nullptr, &model);
  }

  BatchLossBreakdown stage1_step(const std::vector<int>& idx) {
    Matrix x1 = gather_views(idx, 0);
    Matrix x2 = gather_views(idx, 1);
    PairLossOptions opt;
    opt.use_pc = false;
    opt.use_fc = true;
    opt.fc_weight = 1.0;
    return pair_losses(model, x1, x2, cfg, opt, nullptr, nullptr, &model);
  }

  BatchLossBreakdown stage2_step(const std::vector<int>& idx) {
    auto [x1, x2] = gather_neighbor_views(idx);
    PairLossOptions opt;
    opt.use_pc = true;
    opt.use_fc = false;
    opt.fc_weight = 0.0;
    return pair_losses(model, x1, x2, cfg, opt, nullptr, nullptr, &model);
  }

  EpochRecord eval_record(int epoch, int stage) {
    EpochRecord r;
    r.epoch = epoch;
    r.stage = stage;
    const EvalResult ev = evaluate_model(model, ds, cfg.batch_size);
    r.acc = ev.acc;
    r.nmi = ev.nmi;
    r.ari = ev.ari;
    if (mode == RunMode::Semi) r.labeled_acc = ev.labeled_acc;
    return r;
  }

  // One training phase: `stage` tags the records, `step_fn` runs one batch.
  template <typename StepFn>
  void run_phase(RunReport& report, int epochs_total, int stage,
                 const OptimizerConfig& opt, StepFn&& step_fn, int pc_candidates,
                 bool fc_active, bool pc_active) {
    sgd.lr_init = opt.lr_init;
    sgd.lr_min = opt.lr_min;
    sgd.momentum = opt.momentum;
    sgd.weight_decay = opt.weight_decay;
    sgd.nesterov = opt.nesterov;
    sgd.cosine = opt.schedule == "cosine";
    sgd.horizon = std::max(epochs_total, 1);

    BatchSampler sampler(ds.size(), cfg.batch_size,
                         mix_seed(cfg.seed, static_cast<std::uint64_t>(stage)));
    for (int epoch = 1; epoch <= epochs_total; ++epoch) {
      sgd.t = epoch - 1;
      const auto batches = sampler.epoch_batches(epoch - 1);
      double sum_pc = 0.0, sum_fc = 0.0, sum_h = 0.0, sum_x = 0.0;
      for (const auto& batch : batches) {
        const BatchLossBreakdown b = step_fn(batch);
        sgd_step(model, sgd);
        ++global_step;
        sum_pc += b.loss_pc;
        sum_fc += b.loss_fc;
        sum_h += b.entropy;
        sum_x += b.xent;
      }
      const double nb = static_cast<double>(batches.size());
      EpochRecord r;
      r.epoch = epoch;
      r.stage = stage;
      r.lr = sgd.current_lr();
      if (pc_active) {
        r.loss_pc = sum_pc / nb;
        r.marginal_entropy = sum_h / nb;
        r.loss_cluster = *r.loss_pc - cfg.lambda1 * *r.marginal_entropy;
        r.info_nce_pc = info_nce_estimate(*r.loss_pc, pc_candidates);
      }
      if (fc_active) {
        r.loss_fc = sum_fc / nb;
        r.info_nce_fc = info_nce_estimate(*r.loss_fc, cfg.batch_size);
      }
      if (mode == RunMode::Semi && cfg.lambda3 > 0.0 && pc_active)
        r.xent = sum_x / nb;
      if (epoch % cfg.eval_every == 0 || epoch == epochs_total) {
        const EpochRecord ev = eval_record(epoch, stage);
        r.acc = ev.acc;
        r.nmi = ev.nmi;
        r.ari = ev.ari;
        r.labeled_acc = ev.labeled_acc;
      }
      report.per_epoch.push_back(std::move(r));
    }
  }

  RunReport run() {
    const auto t0 = std::chrono::steady_clock::now();
    RunReport report;
    report.config = cfg.to_json();
    const int stage0 = mode == RunMode::TwoStage ? 1 : 0;
    report.per_epoch.push_back(eval_record(0, stage0));

    if (mode == RunMode::TwoStage) {
      run_phase(report, cfg.stage1_epochs, 1, cfg.stage1_optimizer,
                [this](const std::vector<int>& b) { return stage1_step(b); },
                cfg.batch_size, true, false);
      const Matrix feats = embed_features(model, ds, cfg.batch_size);
      neighbors = mine_neighbors(feats, cfg.neighbors_k);
      model.set_backbone_frozen(stage2_mode_from_string(cfg.stage2_mode) ==
                                Stage2Mode::FreezeBackbone);
      run_phase(report, cfg.stage2_epochs, 2, cfg.stage2_optimizer,
                [this](const std::vector<int>& b) { return stage2_step(b); },
                cfg.batch_size, false, true);
      model.set_backbone_frozen(false);
    } else if (backend == PcBackend::MemoryBank) {
      run_phase(report, cfg.epochs, 0, cfg.optimizer,
                [this](const std::vector<int>& b) { return bank_step(b); },
                cfg.bank_negatives, cfg.lambda2 > 0.0, true);
    } else {
      run_phase(report, cfg.epochs, 0, cfg.optimizer,
                [this](const std::vector<int>& b) { return in_batch_step(b); },
                cfg.batch_size, cfg.lambda2 > 0.0, true);
    }

    const EvalResult ev = evaluate_model(model, ds, cfg.batch_size);
    report.final_metrics.acc = ev.acc;
    report.final_metrics.nmi = ev.nmi;
    report.final_metrics.ari = ev.ari;
    if (mode == RunMode::Semi) report.final_metrics.labeled_acc = ev.labeled_acc;
    report.runtime_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    report.timestamp = utc_timestamp();
    return report;
  }
};

}  // namespace

BatchLossBreakdown compute_batch_loss(const TwoHeadModel& model,
                                      const Matrix& view1, const Matrix& view2,
                                      const RunConfig& cfg, const Matrix* labeled_x,
                                      const std::vector<int>* labeled_y) {
  return pair_losses(model, view1, view2, cfg, options_from_config(cfg),
                     labeled_x, labeled_y, nullptr);
}

BatchLossBreakdown batch_loss_and_backward(TwoHeadModel& model,
                                           const Matrix& view1,
                                           const Matrix& view2,
                                           const RunConfig& cfg,
                                           const Matrix* labeled_x,
                                           const std::vector<int>* labeled_y) {
  return pair_losses(model, view1, view2, cfg, options_from_config(cfg),
                     labeled_x, labeled_y, &model);
}

RunReport train_end_to_end(const RunConfig& cfg, TwoHeadModel* out_model) {
  Trainer t(cfg, RunMode::EndToEnd, nullptr);
  RunReport r = t.run();
  if (out_model) *out_model = t.model;
  return r;
}

RunReport train_two_stage(const RunConfig& cfg, TwoHeadModel* out_model) {
  Trainer t(cfg, RunMode::TwoStage, nullptr);
  RunReport r = t.run();
  if (out_model) *out_model = t.model;
  return r;
}

RunReport train_semi(const RunConfig& cfg, const std::vector<int>& labeled,
                     TwoHeadModel* out_model) {
  Trainer t(cfg, RunMode::Semi, &labeled);
  RunReport r = t.run();
  if (out_model) *out_model = t.model;
  return r;
}

RunReport train_semi(const RunConfig& cfg, TwoHeadModel* out_model) {
  Trainer t(cfg, RunMode::Semi, nullptr);
  RunReport r = t.run();
  if (out_model) *out_model = t.model;
  return r;
}

AblationAxis ablation_axis_from_string(const std::string& s) {
  if (s == "critic") return AblationAxis::Critic;
  if (s == "lambda2") return AblationAxis::Lambda2;
  if (s == "pc_backend") return AblationAxis::PcBackend;
  if (s == "momentum") return AblationAxis::Momentum;
  if (s == "num_negatives") return AblationAxis::NumNegatives;
  throw std::invalid_argument("unknown ablation axis: " + s);
}

std::string to_string(AblationAxis a) {
  switch (a) {
    case AblationAxis::Critic: return "critic";
    case AblationAxis::Lambda2: return "lambda2";
    case AblationAxis::PcBackend: return "pc_backend";
    case AblationAxis::Momentum: return "momentum";
    case AblationAxis::NumNegatives: return "num_negatives";
  }
  throw std::logic_error("unreachable");
}

namespace {

RunConfig apply_axis(const RunConfig& base, AblationAxis axis,
                     const std::string& value) {
  RunConfig c = base;
  switch (axis) {
    case AblationAxis::Critic: c.critic = value; break;
    case AblationAxis::Lambda2: c.lambda2 = std::stod(value); break;
    case AblationAxis::PcBackend: c.pc_backend = value; break;
    case AblationAxis::Momentum: c.alpha = std::stod(value); break;
    case AblationAxis::NumNegatives: c.bank_negatives = std::stoi(value); break;
  }
  c.validate();
  return c;
}

}  // namespace

std::vector<RunReport> ablation_sweep(const RunConfig& base, AblationAxis axis,
                                      const std::vector<std::string>& values,
                                      int jobs) {
  if (values.empty()) throw std::invalid_argument("ablation_sweep: no values");
  if (jobs < 1) jobs = 1;
  std::vector<RunReport> reports(values.size());
  if (jobs == 1) {
    for (std::size_t i = 0; i < values.size(); ++i)
      reports[i] = train_end_to_end(apply_axis(base, axis, values[i]));
    return reports;
  }
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  for (int t = 0; t < jobs; ++t) {
    pool.emplace_back([&]() {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= values.size()) return;
        reports[i] = train_end_to_end(apply_axis(base, axis, values[i]));
      }
    });
  }
  for (auto& th : pool) th.join();
  return reports;
}

std::vector<std::vector<int>> mine_neighbors(const Matrix& features, int k) {
  const int n = features.rows;
  if (k < 1) throw std::invalid_argument("mine_neighbors: K must be >= 1");
  if (k >= n) throw std::invalid_argument("mine_neighbors: K must be < N");
  std::vector<std::vector<int>> out(n);
  const int chunk = 256;
  Matrix sims(std::min(chunk, n), n);
  for (int start = 0; start < n; start += chunk) {
    const int rows = std::min(chunk, n - start);
    Matrix block(rows, features.cols);
    for (int i = 0; i < rows; ++i)
      std::copy(features.row(start + i), features.row(start + i) + features.cols,
                block.row(i));
    if (sims.rows != rows) sims = Matrix(rows, n);
    kernels::matmul_nt(block, features, sims);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < rows; ++i) {
      const int self = start + i;
      std::vector<int> order;
      order.reserve(n - 1);
      for (int j = 0; j < n; ++j)
        if (j != self) order.push_back(j);
      const double* srow = sims.row(i);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        if (srow[a] != srow[b]) return srow[a] > srow[b];
        return a < b;
      });
      out[self].assign(order.begin(), order.begin() + k);
    }
  }
  return out;
}

Partition predict_assignments(const TwoHeadModel& model, const Dataset& ds,
                              int batch) {
  Partition pred(ds.size(), 0);
  for (int start = 0; start < ds.size(); start += batch) {
    const int rows = std::min(batch, ds.size() - start);
    Matrix x(rows, ds.dim());
    for (int i = 0; i < rows; ++i)
      std::copy(ds.features.row(start + i), ds.features.row(start + i) + ds.dim(),
                x.row(i));
    const ForwardCache f = model.forward(x, false, true);
    const Matrix& q = f.probs[0];
    for (int i = 0; i < rows; ++i) {
      int arg = 0;
      for (int c = 1; c < q.cols; ++c)
        if (q.at(i, c) > q.at(i, arg)) arg = c;
      pred[start + i] = arg;
    }
  }
  return pred;
}

EvalResult evaluate_model(const TwoHeadModel& model, const Dataset& ds,
                          int batch) {
  const Partition pred = predict_assignments(model, ds, batch);
  Partition pred_l, truth_l;
  int labeled_hits = 0, labeled_total = 0;
  for (int i = 0; i < ds.size(); ++i) {
    if (ds.labels[i] < 0) continue;
    pred_l.push_back(pred[i]);
    truth_l.push_back(ds.labels[i]);
    ++labeled_total;
    if (pred[i] == ds.labels[i]) ++labeled_hits;
  }
  EvalResult r;
  if (labeled_total == 0) return r;
  r.acc = clustering_accuracy(pred_l, truth_l);
  r.nmi = nmi(pred_l, truth_l);
  r.ari = ari(pred_l, truth_l);
  r.labeled_acc = static_cast<double>(labeled_hits) / labeled_total;
  return r;
}

Matrix embed_features(const TwoHeadModel& model, const Dataset& ds, int batch) {
  Matrix z(ds.size(), model.spec().rl_dim);
  for (int start = 0; start < ds.size(); start += batch) {
    const int rows = std::min(batch, ds.size() - start);
    Matrix x(rows, ds.dim());
    for (int i = 0; i < rows; ++i)
      std::copy(ds.features.row(start + i), ds.features.row(start + i) + ds.dim(),
                x.row(i));
    const ForwardCache f = model.forward(x, true, false);
    for (int i = 0; i < rows; ++i)
      std::copy(f.z.row(i), f.z.row(i) + f.z.cols, z.row(start + i));
  }
  return z;
}

}  // namespace crlc
