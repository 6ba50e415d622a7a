#pragma once

// Training: smoothed MLE for generative tables, smoothed conditional counts
// for discriminative table units, and mini-batch gradient descent for
// feature heads.
//
// Counting conventions follow each law's context positions: tables whose law
// is position-specific (p(y_1|x), p(y_2|x,y_1), p(x_2|x_1), HMC+ p(y_1|x_1))
// count only those positions; time-homogeneous kernels pool across t.

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "genclass/invert.hpp"
#include "genclass/model.hpp"
#include "genclass/rng.hpp"
#include "genclass/units.hpp"

namespace genclass {

struct TrainConfig {
  double smoothing_alpha = 1.0;  // additive smoothing; 0 disables
  double learning_rate = 0.1;
  int epochs = 100;
  int batch_size = 0;  // 0 = full batch
  std::uint64_t seed = 0;
  double momentum = 0.0;
  // HMC-family units: estimate p(x_t) as pooled label frequency (default) or
  // propagate it from the fitted prior/transition chain.
  bool chain_marginals = false;
};

// Integer count tensors mirroring the tables of one model kind. Merge is
// associative and commutative, so counting can be sharded.
struct CountAccumulator {
  ModelKind kind = ModelKind::NaiveBayes;
  int n = 0;  // labels
  int m = 0;  // observation symbols
  std::int64_t sequences = 0;
  std::vector<std::int64_t> prior, trans, trans2, emit, emit2, emit3;

  CountAccumulator() = default;
  CountAccumulator(ModelKind kind_, int n_, int m_) : kind(kind_), n(n_), m(m_) {
    const auto nn = static_cast<std::size_t>(n);
    const auto mm = static_cast<std::size_t>(m);
    prior.assign(nn, 0);
    switch (kind) {
      case ModelKind::NaiveBayes:
        emit.assign(nn * mm, 0);
        break;
      case ModelKind::PooledMC:
        emit.assign(nn * mm, 0);
        emit2.assign(nn * mm * mm, 0);
        break;
      case ModelKind::PooledMC2:
        emit.assign(nn * mm, 0);
        emit2.assign(nn * mm * mm, 0);
        emit3.assign(nn * mm * mm * mm, 0);
        break;
      case ModelKind::Hmc:
        trans.assign(nn * nn, 0);
        emit.assign(nn * mm, 0);
        break;
      case ModelKind::Hmc2:
        trans.assign(nn * nn, 0);
        trans2.assign(nn * nn * nn, 0);
        emit.assign(nn * mm, 0);
        break;
      case ModelKind::HmcPlus:
        trans.assign(nn * nn, 0);
        emit.assign(nn * mm, 0);
        emit2.assign(nn * nn * mm, 0);
        break;
    }
  }

  void add(const LabeledSequence& s) {
    const auto& y = s.obs.symbols;
    const auto& x = s.labels;
    const int t_len = static_cast<int>(y.size());
    const auto nn = static_cast<std::size_t>(n);
    const auto mm = static_cast<std::size_t>(m);
    ++sequences;
    switch (kind) {
      case ModelKind::NaiveBayes: {
        const auto c = static_cast<std::size_t>(x[0]);
        ++prior[c];
        for (int t = 0; t < t_len; ++t) ++emit[c * mm + static_cast<std::size_t>(y[static_cast<std::size_t>(t)])];
        break;
      }
      case ModelKind::PooledMC: {
        const auto c = static_cast<std::size_t>(x[0]);
        ++prior[c];
        ++emit[c * mm + static_cast<std::size_t>(y[0])];
        for (int t = 1; t < t_len; ++t)
          ++emit2[(c * mm + static_cast<std::size_t>(y[static_cast<std::size_t>(t - 1)])) * mm +
                  static_cast<std::size_t>(y[static_cast<std::size_t>(t)])];
        break;
      }
      case ModelKind::PooledMC2: {
        const auto c = static_cast<std::size_t>(x[0]);
        ++prior[c];
        ++emit[c * mm + static_cast<std::size_t>(y[0])];
        if (t_len >= 2) ++emit2[(c * mm + static_cast<std::size_t>(y[0])) * mm + static_cast<std::size_t>(y[1])];
        for (int t = 2; t < t_len; ++t)
          ++emit3[((c * mm + static_cast<std::size_t>(y[static_cast<std::size_t>(t - 2)])) * mm +
                   static_cast<std::size_t>(y[static_cast<std::size_t>(t - 1)])) *
                      mm +
                  static_cast<std::size_t>(y[static_cast<std::size_t>(t)])];
        break;
      }
      case ModelKind::Hmc: {
        ++prior[static_cast<std::size_t>(x[0])];
        for (int t = 0; t < t_len; ++t)
          ++emit[static_cast<std::size_t>(x[static_cast<std::size_t>(t)]) * mm + static_cast<std::size_t>(y[static_cast<std::size_t>(t)])];
        for (int t = 1; t < t_len; ++t)
          ++trans[static_cast<std::size_t>(x[static_cast<std::size_t>(t - 1)]) * nn + static_cast<std::size_t>(x[static_cast<std::size_t>(t)])];
        break;
      }
      case ModelKind::Hmc2: {
        ++prior[static_cast<std::size_t>(x[0])];
        for (int t = 0; t < t_len; ++t)
          ++emit[static_cast<std::size_t>(x[static_cast<std::size_t>(t)]) * mm + static_cast<std::size_t>(y[static_cast<std::size_t>(t)])];
        if (t_len >= 2) ++trans[static_cast<std::size_t>(x[0]) * nn + static_cast<std::size_t>(x[1])];
        for (int t = 2; t < t_len; ++t)
          ++trans2[(static_cast<std::size_t>(x[static_cast<std::size_t>(t - 2)]) * nn +
                    static_cast<std::size_t>(x[static_cast<std::size_t>(t - 1)])) *
                       nn +
                   static_cast<std::size_t>(x[static_cast<std::size_t>(t)])];
        break;
      }
      case ModelKind::HmcPlus: {
        ++prior[static_cast<std::size_t>(x[0])];
        ++emit[static_cast<std::size_t>(x[0]) * mm + static_cast<std::size_t>(y[0])];
        for (int t = 1; t < t_len; ++t) {
          ++trans[static_cast<std::size_t>(x[static_cast<std::size_t>(t - 1)]) * nn + static_cast<std::size_t>(x[static_cast<std::size_t>(t)])];
          ++emit2[(static_cast<std::size_t>(x[static_cast<std::size_t>(t - 1)]) * nn +
                   static_cast<std::size_t>(x[static_cast<std::size_t>(t)])) *
                      mm +
                  static_cast<std::size_t>(y[static_cast<std::size_t>(t)])];
        }
        break;
      }
    }
  }

  void merge(const CountAccumulator& o) {
    if (o.kind != kind || o.n != n || o.m != m)
      throw std::invalid_argument("CountAccumulator::merge: shape mismatch");
    sequences += o.sequences;
    auto acc = [](std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
      for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    };
    acc(prior, o.prior);
    acc(trans, o.trans);
    acc(trans2, o.trans2);
    acc(emit, o.emit);
    acc(emit2, o.emit2);
    acc(emit3, o.emit3);
  }
};

namespace detail {

// (count + alpha) / (total + alpha * width) per row; rows with no mass and
// no smoothing fall back to uniform.
inline Table normalized_table(const std::vector<std::int64_t>& counts, std::vector<int> shape,
                              double alpha) {
  Table t(std::move(shape), 0.0);
  const auto width = static_cast<std::size_t>(t.last_extent());
  for (std::size_t g = 0; g < t.num_slices(); ++g) {
    std::int64_t total = 0;
    for (std::size_t k = 0; k < width; ++k) total += counts[g * width + k];
    auto row = t.slice_at(g);
    const double denom = static_cast<double>(total) + alpha * static_cast<double>(width);
    for (std::size_t k = 0; k < width; ++k)
      row[k] = denom > 0.0 ? (static_cast<double>(counts[g * width + k]) + alpha) / denom
                           : 1.0 / static_cast<double>(width);
  }
  return t;
}

inline void check_training_data(ModelKind kind, const std::vector<LabeledSequence>& data, int n,
                                int m, bool discrete) {
  if (data.empty()) throw std::invalid_argument("fit: empty training data");
  for (const auto& s : data) {
    const int t_len = s.obs.length();
    if (t_len < 1) throw std::invalid_argument("fit: empty sequence in training data");
    if (discrete && s.obs.featurized())
      throw std::invalid_argument("fit: discrete observations required");
    if (discrete)
      for (int v : s.obs.symbols)
        if (v < 0 || v >= m) throw std::invalid_argument("fit: observation index out of range");
    const int want = is_class_kind(kind) ? 1 : t_len;
    if (static_cast<int>(s.labels.size()) != want)
      throw std::invalid_argument("fit: label count mismatch for kind " + std::string(kind_name(kind)));
    for (int x : s.labels)
      if (x < 0 || x >= n) throw std::invalid_argument("fit: label index out of range");
  }
}

}  // namespace detail

inline GenerativeModel fit_generative(ModelKind kind, const LabelSet& labels, const ObsSet& obs,
                                      const std::vector<LabeledSequence>& data,
                                      const TrainConfig& cfg = {}) {
  const int n = labels.size();
  const int m = obs.size();
  detail::check_training_data(kind, data, n, m, /*discrete=*/true);
  CountAccumulator c(kind, n, m);
  for (const auto& s : data) c.add(s);

  const double a = cfg.smoothing_alpha;
  GenerativeModel model;
  model.kind = kind;
  model.labels = labels;
  model.observations = obs;
  model.prior = detail::normalized_table(c.prior, {n}, a);
  if (!c.trans.empty()) model.trans = detail::normalized_table(c.trans, {n, n}, a);
  if (!c.trans2.empty()) model.trans2 = detail::normalized_table(c.trans2, {n, n, n}, a);
  if (!c.emit.empty()) model.emit = detail::normalized_table(c.emit, {n, m}, a);
  if (!c.emit2.empty())
    model.emit2 = detail::normalized_table(c.emit2, kind == ModelKind::HmcPlus
                                                        ? std::vector<int>{n, n, m}
                                                        : std::vector<int>{n, m, m},
                                           a);
  if (!c.emit3.empty()) model.emit3 = detail::normalized_table(c.emit3, {n, m, m, m}, a);
  return model;
}

// Mean per-sequence joint log-likelihood (e.g. for held-out reporting).
inline double mean_joint_log_prob(const GenerativeModel& m, const std::vector<LabeledSequence>& data) {
  if (data.empty()) throw std::invalid_argument("mean_joint_log_prob: empty data");
  double s = 0.0;
  for (const auto& seq : data) s += joint_log_prob(m, seq);
  return s / static_cast<double>(data.size());
}

namespace detail {

// Conditional label counts for one posterior unit: ctx_cells rows of N label
// counts, normalized over the label axis.
class UnitCounter {
 public:
  UnitCounter(std::vector<int> ctx_shape, int n) : n_(n), shape_(std::move(ctx_shape)) {
    std::size_t cells = 1;
    for (int d : shape_) cells *= static_cast<std::size_t>(d);
    counts_.assign(cells * static_cast<std::size_t>(n), 0);
  }
  void add(std::span<const int> ctx, int label) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < ctx.size(); ++i)
      off = off * static_cast<std::size_t>(shape_[i]) + static_cast<std::size_t>(ctx[i]);
    ++counts_[off * static_cast<std::size_t>(n_) + static_cast<std::size_t>(label)];
  }
  Table table(double alpha) const {
    std::vector<int> shape = shape_;
    shape.push_back(n_);
    return normalized_table(counts_, std::move(shape), alpha);
  }

 private:
  int n_;
  std::vector<int> shape_;
  std::vector<std::int64_t> counts_;
};

}  // namespace detail

inline DiscriminativeUnits fit_discriminative_tables(ModelKind kind, const LabelSet& labels,
                                                     const ObsSet& obs,
                                                     const std::vector<LabeledSequence>& data,
                                                     const TrainConfig& cfg = {}) {
  const int n = labels.size();
  const int m = obs.size();
  detail::check_training_data(kind, data, n, m, /*discrete=*/true);
  const double a = cfg.smoothing_alpha;

  DiscriminativeUnits u;
  u.kind = kind;
  u.labels = labels;
  u.observations = obs;

  CountAccumulator c(kind, n, m);
  for (const auto& s : data) c.add(s);
  u.prior = detail::normalized_table(c.prior, {n}, a);

  switch (kind) {
    case ModelKind::NaiveBayes: {
      detail::UnitCounter p1({m}, n);
      for (const auto& s : data)
        for (int v : s.obs.symbols) {
          const int ctx[1] = {v};
          p1.add(std::span<const int>(ctx, 1), s.labels[0]);
        }
      u.obs_posterior.table = p1.table(a);
      break;
    }
    case ModelKind::PooledMC:
    case ModelKind::PooledMC2: {
      detail::UnitCounter p1({m}, n);
      detail::UnitCounter p2({m, m}, n);
      detail::UnitCounter p3({m, m, m}, n);
      for (const auto& s : data) {
        const auto& y = s.obs.symbols;
        const int x = s.labels[0];
        {
          const int ctx[1] = {y[0]};
          p1.add(std::span<const int>(ctx, 1), x);
        }
        if (kind == ModelKind::PooledMC) {
          for (std::size_t t = 1; t < y.size(); ++t) {
            const int ctx[2] = {y[t], y[t - 1]};
            p2.add(std::span<const int>(ctx, 2), x);
          }
        } else {
          if (y.size() >= 2) {
            const int ctx[2] = {y[1], y[0]};
            p2.add(std::span<const int>(ctx, 2), x);
          }
          for (std::size_t t = 2; t < y.size(); ++t) {
            const int ctx[3] = {y[t], y[t - 1], y[t - 2]};
            p3.add(std::span<const int>(ctx, 3), x);
          }
        }
      }
      u.obs_posterior.table = p1.table(a);
      u.obs2_posterior.table = p2.table(a);
      if (kind == ModelKind::PooledMC2) u.obs3_posterior.table = p3.table(a);
      break;
    }
    case ModelKind::Hmc:
    case ModelKind::Hmc2: {
      u.trans = detail::normalized_table(c.trans, {n, n}, a);
      if (kind == ModelKind::Hmc2) u.trans2 = detail::normalized_table(c.trans2, {n, n, n}, a);
      detail::UnitCounter q({m}, n);
      std::vector<std::int64_t> freq(static_cast<std::size_t>(n), 0);
      for (const auto& s : data)
        for (std::size_t t = 0; t < s.obs.symbols.size(); ++t) {
          const int ctx[1] = {s.obs.symbols[t]};
          q.add(std::span<const int>(ctx, 1), s.labels[t]);
          ++freq[static_cast<std::size_t>(s.labels[t])];
        }
      u.obs_posterior.table = q.table(a);
      if (cfg.chain_marginals) {
        u.marginal_mode = MarginalMode::ChainPropagated;
      } else {
        u.marginal_mode = MarginalMode::Empirical;
        u.empirical_marginal = detail::normalized_table(freq, {n}, a);
      }
      break;
    }
    case ModelKind::HmcPlus: {
      u.trans = detail::normalized_table(c.trans, {n, n}, a);
      detail::UnitCounter q1({m}, n);
      std::vector<std::int64_t> pair_counts(static_cast<std::size_t>(m) * static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0);
      std::vector<std::int64_t> freq(static_cast<std::size_t>(n), 0);
      std::vector<std::int64_t> pair_freq(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0);
      for (const auto& s : data) {
        const auto& y = s.obs.symbols;
        const auto& x = s.labels;
        {
          const int ctx[1] = {y[0]};
          q1.add(std::span<const int>(ctx, 1), x[0]);
        }
        for (std::size_t t = 0; t < y.size(); ++t) ++freq[static_cast<std::size_t>(x[t])];
        for (std::size_t t = 1; t < y.size(); ++t) {
          const auto cell = (static_cast<std::size_t>(y[t]) * static_cast<std::size_t>(n) + static_cast<std::size_t>(x[t - 1])) *
                                static_cast<std::size_t>(n) +
                            static_cast<std::size_t>(x[t]);
          ++pair_counts[cell];
          ++pair_freq[static_cast<std::size_t>(x[t - 1]) * static_cast<std::size_t>(n) + static_cast<std::size_t>(x[t])];
        }
      }
      u.obs_posterior.table = q1.table(a);
      // pair posterior rows are distributions over the N*N label pairs
      {
        Table qp({m, n, n}, 0.0);
        const auto group = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
        for (int v = 0; v < m; ++v) {
          std::int64_t total = 0;
          for (std::size_t k = 0; k < group; ++k) total += pair_counts[static_cast<std::size_t>(v) * group + k];
          const double denom = static_cast<double>(total) + a * static_cast<double>(group);
          for (std::size_t k = 0; k < group; ++k)
            qp.values()[static_cast<std::size_t>(v) * group + k] =
                denom > 0.0 ? (static_cast<double>(pair_counts[static_cast<std::size_t>(v) * group + k]) + a) / denom
                            : 1.0 / static_cast<double>(group);
        }
        u.pair_posterior.table = std::move(qp);
      }
      if (cfg.chain_marginals) {
        u.marginal_mode = MarginalMode::ChainPropagated;
      } else {
        u.marginal_mode = MarginalMode::Empirical;
        u.empirical_marginal = detail::normalized_table(freq, {n}, a);
        u.empirical_pair = detail::normalized_table(pair_freq, {n * n}, a);
        // reshape [N*N] -> [N,N]
        Table pair({n, n}, 0.0);
        pair.values() = u.empirical_pair.values();
        u.empirical_pair = std::move(pair);
      }
      break;
    }
  }
  return u;
}

// ---- feature-head training -------------------------------------------------

// Mean cross-entropy and its gradient for one head over (features, label)
// pairs. Exposed so tests can difference it directly.
inline double head_loss_and_grad(const FeatureHead& h, const std::vector<std::vector<double>>& xs,
                                 const std::vector<int>& ys, std::vector<double>* gw,
                                 std::vector<double>* gb) {
  const std::size_t batch = xs.size();
  if (batch == 0) throw std::invalid_argument("head_loss_and_grad: empty batch");
  if (gw) gw->assign(h.w.size(), 0.0);
  if (gb) gb->assign(h.b.size(), 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    const auto& f = xs[i];
    const Categorical p = h.posterior(f);
    const auto target = static_cast<std::size_t>(ys[i]);
    loss -= log_safe(p[target]);
    if (!gw) continue;
    for (int k = 0; k < h.out_dim; ++k) {
      const double delta = p[static_cast<std::size_t>(k)] - (static_cast<std::size_t>(k) == target ? 1.0 : 0.0);
      (*gb)[static_cast<std::size_t>(k)] += delta;
      double* row = gw->data() + static_cast<std::size_t>(k) * static_cast<std::size_t>(h.input_dim);
      for (int j = 0; j < h.input_dim; ++j) row[j] += delta * f[static_cast<std::size_t>(j)];
    }
  }
  const double inv = 1.0 / static_cast<double>(batch);
  loss *= inv;
  if (gw) {
    for (double& v : *gw) v *= inv;
    for (double& v : *gb) v *= inv;
  }
  return loss;
}

inline double head_loss(const FeatureHead& h, const std::vector<std::vector<double>>& xs,
                        const std::vector<int>& ys) {
  return head_loss_and_grad(h, xs, ys, nullptr, nullptr);
}

// Trains one head by mini-batch gradient descent with optional momentum.
// Deterministic under cfg.seed; zero-initialized, so full-batch runs are
// seed-independent. Records the full-data loss before each epoch plus the
// final loss; aborts on non-finite loss.
inline std::vector<double> train_head(FeatureHead& h, const std::vector<std::vector<double>>& xs,
                                      const std::vector<int>& ys, const TrainConfig& cfg) {
  const std::size_t count = xs.size();
  if (count == 0) throw std::invalid_argument("train_head: empty training set");
  for (const auto& f : xs)
    if (static_cast<int>(f.size()) != h.input_dim)
      throw std::invalid_argument("train_head: feature dimension mismatch");

  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(cfg.epochs) + 1);
  std::vector<double> gw, gb;
  std::vector<double> vw(h.w.size(), 0.0), vb(h.b.size(), 0.0);
  const std::size_t batch =
      cfg.batch_size <= 0 ? count : std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), count);
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  Rng rng(cfg.seed);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double full = head_loss(h, xs, ys);
    if (!std::isfinite(full))
      throw std::runtime_error("train_head: non-finite loss at epoch " + std::to_string(epoch));
    trace.push_back(full);
    if (batch < count) {
      for (std::size_t i = count - 1; i > 0; --i) {
        const auto j = static_cast<std::size_t>(rng.next_u64() % (i + 1));
        std::swap(order[i], order[j]);
      }
    }
    for (std::size_t start = 0; start < count; start += batch) {
      const std::size_t stop = std::min(count, start + batch);
      std::vector<std::vector<double>> bx(stop - start);
      std::vector<int> by(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        bx[i - start] = xs[order[i]];
        by[i - start] = ys[order[i]];
      }
      head_loss_and_grad(h, bx, by, &gw, &gb);
      for (std::size_t i = 0; i < h.w.size(); ++i) {
        vw[i] = cfg.momentum * vw[i] - cfg.learning_rate * gw[i];
        h.w[i] += vw[i];
      }
      for (std::size_t i = 0; i < h.b.size(); ++i) {
        vb[i] = cfg.momentum * vb[i] - cfg.learning_rate * gb[i];
        h.b[i] += vb[i];
      }
    }
  }
  const double final_loss = head_loss(h, xs, ys);
  if (!std::isfinite(final_loss)) throw std::runtime_error("train_head: non-finite final loss");
  trace.push_back(final_loss);
  return trace;
}

struct HeadTrainResult {
  DiscriminativeUnits units;
  // one loss trace per trained unit, keyed by unit name
  std::vector<std::pair<std::string, std::vector<double>>> traces;
};

// Builds feature-head units for the kind and trains each head on the context
// pairs its unit conditions on. Structural tables come from the labels alone
// with the same counting scheme as fit_discriminative_tables.
inline HeadTrainResult train_feature_head(ModelKind kind, const LabelSet& labels,
                                          const std::vector<LabeledSequence>& data,
                                          const TrainConfig& cfg) {
  const int n = labels.size();
  if (data.empty()) throw std::invalid_argument("train_feature_head: empty training data");
  int dim = -1;
  for (const auto& s : data) {
    if (!s.obs.featurized())
      throw std::invalid_argument("train_feature_head: featurized observations required");
    for (const auto& f : s.obs.features) {
      if (dim < 0) dim = static_cast<int>(f.size());
      if (static_cast<int>(f.size()) != dim)
        throw std::invalid_argument("train_feature_head: feature dimension mismatch");
    }
    const int want = is_class_kind(kind) ? 1 : s.obs.length();
    if (static_cast<int>(s.labels.size()) != want)
      throw std::invalid_argument("train_feature_head: label count mismatch");
  }

  HeadTrainResult out;
  DiscriminativeUnits& u = out.units;
  u.kind = kind;
  u.labels = labels;
  u.marginal_mode = MarginalMode::Empirical;

  // structural counts from labels
  {
    std::vector<std::int64_t> prior(static_cast<std::size_t>(n), 0);
    std::vector<std::int64_t> freq(static_cast<std::size_t>(n), 0);
    std::vector<std::int64_t> trans(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0);
    std::vector<std::int64_t> trans2(static_cast<std::size_t>(n) * static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0);
    std::vector<std::int64_t> pair_freq(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0);
    for (const auto& s : data) {
      ++prior[static_cast<std::size_t>(s.labels[0])];
      for (int x : s.labels) ++freq[static_cast<std::size_t>(x)];
      for (std::size_t t = 1; t < s.labels.size(); ++t) {
        const auto a = static_cast<std::size_t>(s.labels[t - 1]);
        const auto b = static_cast<std::size_t>(s.labels[t]);
        if (kind != ModelKind::Hmc2 || t == 1) ++trans[a * static_cast<std::size_t>(n) + b];
        ++pair_freq[a * static_cast<std::size_t>(n) + b];
      }
      if (kind == ModelKind::Hmc2)
        for (std::size_t t = 2; t < s.labels.size(); ++t)
          ++trans2[(static_cast<std::size_t>(s.labels[t - 2]) * static_cast<std::size_t>(n) +
                    static_cast<std::size_t>(s.labels[t - 1])) *
                       static_cast<std::size_t>(n) +
                   static_cast<std::size_t>(s.labels[t])];
    }
    const double a = cfg.smoothing_alpha;
    u.prior = detail::normalized_table(prior, {n}, a);
    if (is_chain_kind(kind)) {
      u.trans = detail::normalized_table(trans, {n, n}, a);
      if (kind == ModelKind::Hmc2) u.trans2 = detail::normalized_table(trans2, {n, n, n}, a);
      u.empirical_marginal = detail::normalized_table(freq, {n}, a);
      if (kind == ModelKind::HmcPlus) {
        Table pair({n, n}, 0.0);
        Table flat = detail::normalized_table(pair_freq, {n * n}, a);
        pair.values() = flat.values();
        u.empirical_pair = std::move(pair);
      }
    }
  }

  auto train_unit = [&](PosteriorUnit& unit, const char* name, int out_dim, int in_dim,
                        const std::vector<std::vector<double>>& xs, const std::vector<int>& ys) {
    if (xs.empty())
      throw std::invalid_argument(std::string("train_feature_head: no training pairs for ") + name);
    unit.head = FeatureHead::zeros(out_dim, in_dim);
    out.traces.emplace_back(name, train_head(*unit.head, xs, ys, cfg));
  };

  std::vector<std::vector<double>> xs;
  std::vector<int> ys;
  auto concat2 = [](const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<double> f(a);
    f.insert(f.end(), b.begin(), b.end());
    return f;
  };

  switch (kind) {
    case ModelKind::NaiveBayes: {
      for (const auto& s : data)
        for (const auto& f : s.obs.features) {
          xs.push_back(f);
          ys.push_back(s.labels[0]);
        }
      train_unit(u.obs_posterior, "obs_posterior", n, dim, xs, ys);
      break;
    }
    case ModelKind::PooledMC:
    case ModelKind::PooledMC2: {
      for (const auto& s : data) {
        xs.push_back(s.obs.features[0]);
        ys.push_back(s.labels[0]);
      }
      train_unit(u.obs_posterior, "obs_posterior", n, dim, xs, ys);
      xs.clear();
      ys.clear();
      if (kind == ModelKind::PooledMC) {
        for (const auto& s : data)
          for (std::size_t t = 1; t < s.obs.features.size(); ++t) {
            xs.push_back(concat2(s.obs.features[t], s.obs.features[t - 1]));
            ys.push_back(s.labels[0]);
          }
        train_unit(u.obs2_posterior, "obs2_posterior", n, 2 * dim, xs, ys);
      } else {
        for (const auto& s : data)
          if (s.obs.features.size() >= 2) {
            xs.push_back(concat2(s.obs.features[1], s.obs.features[0]));
            ys.push_back(s.labels[0]);
          }
        train_unit(u.obs2_posterior, "obs2_posterior", n, 2 * dim, xs, ys);
        xs.clear();
        ys.clear();
        for (const auto& s : data)
          for (std::size_t t = 2; t < s.obs.features.size(); ++t) {
            std::vector<double> f = concat2(s.obs.features[t], s.obs.features[t - 1]);
            f.insert(f.end(), s.obs.features[t - 2].begin(), s.obs.features[t - 2].end());
            xs.push_back(std::move(f));
            ys.push_back(s.labels[0]);
          }
        train_unit(u.obs3_posterior, "obs3_posterior", n, 3 * dim, xs, ys);
      }
      break;
    }
    case ModelKind::Hmc:
    case ModelKind::Hmc2: {
      for (const auto& s : data)
        for (std::size_t t = 0; t < s.obs.features.size(); ++t) {
          xs.push_back(s.obs.features[t]);
          ys.push_back(s.labels[t]);
        }
      train_unit(u.obs_posterior, "obs_posterior", n, dim, xs, ys);
      break;
    }
    case ModelKind::HmcPlus: {
      for (const auto& s : data) {
        xs.push_back(s.obs.features[0]);
        ys.push_back(s.labels[0]);
      }
      train_unit(u.obs_posterior, "obs_posterior", n, dim, xs, ys);
      xs.clear();
      ys.clear();
      for (const auto& s : data)
        for (std::size_t t = 1; t < s.obs.features.size(); ++t) {
          xs.push_back(s.obs.features[t]);
          ys.push_back(s.labels[t - 1] * n + s.labels[t]);
        }
      train_unit(u.pair_posterior, "pair_posterior", n * n, dim, xs, ys);
      break;
    }
  }
  return out;
}

}  // namespace genclass
