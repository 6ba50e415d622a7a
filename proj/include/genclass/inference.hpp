#pragma once

// Every classifier in both constructions. Generative variants take the
// GenerativeModel and use p(y|x) tables; discriminative variants take
// DiscriminativeUnits and use only posterior units and structural priors.
//
// All decoding objectives are kept in natural-log space. Sum-product
// recursions run in linear space with per-step rescaling (argmax- and
// marginal-invariant), max-sum recursions add logs directly.
//
// DecodeResult.score is the construction's own log-domain objective; scores
// are not comparable across constructions (they differ by the x-independent
// factor kappa(y)).

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "genclass/model.hpp"
#include "genclass/table.hpp"
#include "genclass/units.hpp"

namespace genclass {

using PosteriorMarginals = std::vector<Categorical>;

struct DecodeResult {
  std::vector<int> labels;
  double score = 0.0;
  int ties_broken = 0;
};

struct MpmResult {
  PosteriorMarginals marginals;
  DecodeResult decode;
};

enum class Construction : std::uint8_t { Generative, Discriminative };

namespace detail {

// Lowest index among the maximizers; bumps *ties when there is more than one.
inline int argmax_lowest(std::span<const double> v, int* ties = nullptr) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  if (ties) {
    int eq = 0;
    for (double x : v) eq += (x == v[static_cast<std::size_t>(best)]);
    if (eq > 1) ++(*ties);
  }
  return best;
}

inline void check_discrete(const ObsSeq& y, const char* op) {
  if (y.featurized() || y.symbols.empty())
    throw std::invalid_argument(std::string(op) + ": discrete non-empty observations required");
}

inline void check_obs_range(const ObsSeq& y, int m, const char* op) {
  for (int v : y.symbols)
    if (v < 0 || v >= m) throw std::invalid_argument(std::string(op) + ": observation index out of range");
}

// log(post/marg) with consistent zero handling: a zero posterior gives -inf,
// a zero marginal under positive posterior is a hard error.
inline double log_ratio(double post, double marg, int position) {
  if (post <= 0.0) return kNegInf;
  if (marg <= 0.0)
    throw std::domain_error("zero marginal p(x_t) at position " + std::to_string(position + 1));
  return std::log(post) - std::log(marg);
}

// Two- and three-observation context lookups (most recent first). Feature
// heads receive the concatenated context features.
inline Categorical ctx2_value(const PosteriorUnit& unit, const ObsSeq& y, int t_cur, int t_prev) {
  if (unit.is_head()) {
    std::vector<double> f(y.features[static_cast<std::size_t>(t_cur)]);
    const auto& p = y.features[static_cast<std::size_t>(t_prev)];
    f.insert(f.end(), p.begin(), p.end());
    return unit.head->posterior(f);
  }
  const int ctx[2] = {y.symbols[static_cast<std::size_t>(t_cur)], y.symbols[static_cast<std::size_t>(t_prev)]};
  return genclass::unit_value(unit, std::span<const int>(ctx, 2));
}

inline Categorical ctx3_value(const PosteriorUnit& unit, const ObsSeq& y, int t_cur, int t_prev,
                              int t_prev2) {
  if (unit.is_head()) {
    std::vector<double> f(y.features[static_cast<std::size_t>(t_cur)]);
    const auto& p = y.features[static_cast<std::size_t>(t_prev)];
    const auto& q = y.features[static_cast<std::size_t>(t_prev2)];
    f.insert(f.end(), p.begin(), p.end());
    f.insert(f.end(), q.begin(), q.end());
    return unit.head->posterior(f);
  }
  const int ctx[3] = {y.symbols[static_cast<std::size_t>(t_cur)], y.symbols[static_cast<std::size_t>(t_prev)],
                      y.symbols[static_cast<std::size_t>(t_prev2)]};
  return genclass::unit_value(unit, std::span<const int>(ctx, 3));
}

inline DecodeResult class_argmax(std::span<const double> scores) {
  DecodeResult r;
  const int best = argmax_lowest(scores, &r.ties_broken);
  r.labels = {best};
  r.score = scores[static_cast<std::size_t>(best)];
  return r;
}

}  // namespace genclass::detail

// ---- Naive Bayes family ----------------------------------------------------

// argmax_x log p(x) + sum_t log p(y_t|x)
inline DecodeResult nb_classify_generative(const GenerativeModel& m, const ObsSeq& y) {
  detail::check_discrete(y, "nb_classify_generative");
  detail::check_obs_range(y, m.num_observations(), "nb_classify_generative");
  const int n = m.num_labels();
  std::vector<double> score(static_cast<std::size_t>(n));
  for (int x = 0; x < n; ++x) {
    double s = log_safe(m.prior(x));
    for (int v : y.symbols) s += log_safe(m.emit(x, v));
    score[static_cast<std::size_t>(x)] = s;
  }
  return detail::class_argmax(score);
}

// argmax_x (1-T) log p(x) + sum_t log p(x|y_t)
inline DecodeResult nb_classify_discriminative(const DiscriminativeUnits& u, const ObsSeq& y) {
  const int n = u.num_labels();
  const int t_len = y.length();
  if (t_len < 1) throw std::invalid_argument("nb_classify_discriminative: empty sequence");
  std::vector<double> score(static_cast<std::size_t>(n), 0.0);
  for (int x = 0; x < n; ++x) {
    if (!(u.prior(x) > 0.0)) throw std::domain_error("nb_classify_discriminative: zero prior p(x)");
    score[static_cast<std::size_t>(x)] = (1.0 - t_len) * std::log(u.prior(x));
  }
  for (int t = 0; t < t_len; ++t) {
    const Categorical post = obs_unit_value(u, u.obs_posterior, y, t);
    for (int x = 0; x < n; ++x) score[static_cast<std::size_t>(x)] += log_safe(post[static_cast<std::size_t>(x)]);
  }
  return detail::class_argmax(score);
}

// Pooled MC, generative: argmax_x of the row's joint.
inline DecodeResult pooledmc_classify(const GenerativeModel& m, const ObsSeq& y) {
  detail::check_discrete(y, "pooledmc_classify");
  detail::check_obs_range(y, m.num_observations(), "pooledmc_classify");
  const int n = m.num_labels();
  const auto& ys = y.symbols;
  std::vector<double> score(static_cast<std::size_t>(n));
  for (int x = 0; x < n; ++x) {
    double s = log_safe(m.prior(x)) + log_safe(m.emit(x, ys[0]));
    for (std::size_t t = 1; t < ys.size(); ++t) s += log_safe(m.emit2(x, ys[t - 1], ys[t]));
    score[static_cast<std::size_t>(x)] = s;
  }
  return detail::class_argmax(score);
}

// Pooled MC, discriminative:
// argmax_x log p(x|y_1) + sum_{t=2..T} [log p(x|y_t,y_{t-1}) - log p(x|y_{t-1})]
// (T = 1 degenerates to the NB form argmax p(x|y_1)).
inline DecodeResult pooledmc_classify(const DiscriminativeUnits& u, const ObsSeq& y) {
  const int n = u.num_labels();
  const int t_len = y.length();
  if (t_len < 1) throw std::invalid_argument("pooledmc_classify: empty sequence");
  std::vector<double> score(static_cast<std::size_t>(n), 0.0);
  {
    const Categorical p1 = obs_unit_value(u, u.obs_posterior, y, 0);
    for (int x = 0; x < n; ++x) score[static_cast<std::size_t>(x)] = log_safe(p1[static_cast<std::size_t>(x)]);
  }
  for (int t = 1; t < t_len; ++t) {
    const Categorical num = detail::ctx2_value(u.obs2_posterior, y, t, t - 1);
    const Categorical den = obs_unit_value(u, u.obs_posterior, y, t - 1);
    for (int x = 0; x < n; ++x)
      score[static_cast<std::size_t>(x)] += detail::log_ratio(num[static_cast<std::size_t>(x)], den[static_cast<std::size_t>(x)], t);
  }
  return detail::class_argmax(score);
}

// Pooled MC2, generative.
inline DecodeResult pooledmc2_classify(const GenerativeModel& m, const ObsSeq& y) {
  detail::check_discrete(y, "pooledmc2_classify");
  detail::check_obs_range(y, m.num_observations(), "pooledmc2_classify");
  const int n = m.num_labels();
  const auto& ys = y.symbols;
  std::vector<double> score(static_cast<std::size_t>(n));
  for (int x = 0; x < n; ++x) {
    double s = log_safe(m.prior(x)) + log_safe(m.emit(x, ys[0]));
    if (ys.size() >= 2) s += log_safe(m.emit2(x, ys[0], ys[1]));
    for (std::size_t t = 2; t < ys.size(); ++t) s += log_safe(m.emit3(x, ys[t - 2], ys[t - 1], ys[t]));
    score[static_cast<std::size_t>(x)] = s;
  }
  return detail::class_argmax(score);
}

// Pooled MC2, discriminative:
// argmax_x log p(x|y_2,y_1) + sum_{t=3..T} [log p(x|y_t,y_{t-1},y_{t-2}) -
// log p(x|y_{t-1},y_{t-2})]; shorter sequences degrade to the Pooled MC / NB
// forms.
inline DecodeResult pooledmc2_classify(const DiscriminativeUnits& u, const ObsSeq& y) {
  const int n = u.num_labels();
  const int t_len = y.length();
  if (t_len < 1) throw std::invalid_argument("pooledmc2_classify: empty sequence");
  std::vector<double> score(static_cast<std::size_t>(n), 0.0);
  if (t_len == 1) {
    const Categorical p1 = obs_unit_value(u, u.obs_posterior, y, 0);
    for (int x = 0; x < n; ++x) score[static_cast<std::size_t>(x)] = log_safe(p1[static_cast<std::size_t>(x)]);
    return detail::class_argmax(score);
  }
  {
    const Categorical p2 = detail::ctx2_value(u.obs2_posterior, y, 1, 0);
    for (int x = 0; x < n; ++x) score[static_cast<std::size_t>(x)] = log_safe(p2[static_cast<std::size_t>(x)]);
  }
  for (int t = 2; t < t_len; ++t) {
    const Categorical num = detail::ctx3_value(u.obs3_posterior, y, t, t - 1, t - 2);
    const Categorical den = detail::ctx2_value(u.obs2_posterior, y, t - 1, t - 2);
    for (int x = 0; x < n; ++x)
      score[static_cast<std::size_t>(x)] += detail::log_ratio(num[static_cast<std::size_t>(x)], den[static_cast<std::size_t>(x)], t);
  }
  return detail::class_argmax(score);
}

// ---- HMC family ------------------------------------------------------------

namespace detail {

// Max-sum decode over per-position node weights and per-step edge weights,
// all in log space. Per-step ties resolve to the lowest label index; ties on
// the returned path are counted.
struct LogLattice {
  int t_len = 0;
  int n = 0;
  std::vector<double> node;  // t_len x n
  std::vector<double> edge;  // (t_len-1) x n x n; empty means node-only (T=1)

  double& node_at(int t, int x) { return node[static_cast<std::size_t>(t * n + x)]; }
  double node_at(int t, int x) const { return node[static_cast<std::size_t>(t * n + x)]; }
  double& edge_at(int t, int a, int b) { return edge[static_cast<std::size_t>((t * n + a) * n + b)]; }
  double edge_at(int t, int a, int b) const { return edge[static_cast<std::size_t>((t * n + a) * n + b)]; }
};

inline DecodeResult viterbi_lattice(const LogLattice& lat, bool rescale) {
  const int t_len = lat.t_len;
  const int n = lat.n;
  std::vector<double> cur(static_cast<std::size_t>(n));
  std::vector<double> nxt(static_cast<std::size_t>(n));
  std::vector<int> bp(static_cast<std::size_t>((t_len > 0 ? t_len - 1 : 0) * n), 0);
  std::vector<char> bp_tie(bp.size(), 0);
  double offset = 0.0;

  for (int x = 0; x < n; ++x) cur[static_cast<std::size_t>(x)] = lat.node_at(0, x);
  for (int t = 1; t < t_len; ++t) {
    if (rescale) {
      const double m = *std::max_element(cur.begin(), cur.end());
      if (std::isfinite(m)) {
        for (double& v : cur) v -= m;
        offset += m;
      }
    }
    for (int b = 0; b < n; ++b) {
      double best = kNegInf;
      int arg = 0;
      bool tie = false;
      for (int a = 0; a < n; ++a) {
        const double s = cur[static_cast<std::size_t>(a)] + lat.edge_at(t - 1, a, b);
        if (s > best) {
          best = s;
          arg = a;
          tie = false;
        } else if (s == best && a != arg) {
          tie = true;
        }
      }
      nxt[static_cast<std::size_t>(b)] = best + lat.node_at(t, b);
      bp[static_cast<std::size_t>((t - 1) * n + b)] = arg;
      bp_tie[static_cast<std::size_t>((t - 1) * n + b)] = tie && std::isfinite(best);
    }
    cur.swap(nxt);
  }

  DecodeResult r;
  r.labels.assign(static_cast<std::size_t>(t_len), 0);
  int last = argmax_lowest(cur, &r.ties_broken);
  r.score = cur[static_cast<std::size_t>(last)] + offset;
  r.labels[static_cast<std::size_t>(t_len - 1)] = last;
  for (int t = t_len - 1; t >= 1; --t) {
    if (bp_tie[static_cast<std::size_t>((t - 1) * n + last)]) ++r.ties_broken;
    last = bp[static_cast<std::size_t>((t - 1) * n + last)];
    r.labels[static_cast<std::size_t>(t - 1)] = last;
  }
  return r;
}

// Sum-product forward-backward over the same lattice shape, linear space
// with optional per-step rescaling. Throws naming the position when a step
// has no mass.
inline MpmResult forward_backward_lattice(const std::vector<double>& node,
                                          const std::vector<double>& edge, int t_len, int n,
                                          bool rescale, const char* op) {
  std::vector<std::vector<double>> alpha(static_cast<std::size_t>(t_len),
                                         std::vector<double>(static_cast<std::size_t>(n)));
  std::vector<std::vector<double>> beta(static_cast<std::size_t>(t_len),
                                        std::vector<double>(static_cast<std::size_t>(n), 1.0));
  auto node_at = [&](int t, int x) { return node[static_cast<std::size_t>(t * n + x)]; };
  auto edge_at = [&](int t, int a, int b) { return edge[static_cast<std::size_t>((t * n + a) * n + b)]; };

  for (int x = 0; x < n; ++x) alpha[0][static_cast<std::size_t>(x)] = node_at(0, x);
  for (int t = 0; t < t_len; ++t) {
    if (t > 0)
      for (int b = 0; b < n; ++b) {
        double s = 0.0;
        for (int a = 0; a < n; ++a) s += alpha[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(a)] * edge_at(t - 1, a, b);
        alpha[static_cast<std::size_t>(t)][static_cast<std::size_t>(b)] = s * node_at(t, b);
      }
    if (rescale) {
      double s = sum(alpha[static_cast<std::size_t>(t)]);
      if (!(s > 0.0))
        throw std::domain_error(std::string(op) + ": no label mass at position " + std::to_string(t + 1));
      for (double& v : alpha[static_cast<std::size_t>(t)]) v /= s;
    }
  }
  for (int t = t_len - 2; t >= 0; --t) {
    for (int a = 0; a < n; ++a) {
      double s = 0.0;
      for (int b = 0; b < n; ++b)
        s += edge_at(t, a, b) * node_at(t + 1, b) * beta[static_cast<std::size_t>(t + 1)][static_cast<std::size_t>(b)];
      beta[static_cast<std::size_t>(t)][static_cast<std::size_t>(a)] = s;
    }
    if (rescale) {
      double s = sum(beta[static_cast<std::size_t>(t)]);
      if (!(s > 0.0))
        throw std::domain_error(std::string(op) + ": no label mass at position " + std::to_string(t + 1));
      for (double& v : beta[static_cast<std::size_t>(t)]) v /= s;
    }
  }

  MpmResult out;
  out.marginals.resize(static_cast<std::size_t>(t_len));
  out.decode.labels.resize(static_cast<std::size_t>(t_len));
  double score = 0.0;
  for (int t = 0; t < t_len; ++t) {
    Categorical g(static_cast<std::size_t>(n));
    for (int x = 0; x < n; ++x)
      g[static_cast<std::size_t>(x)] = alpha[static_cast<std::size_t>(t)][static_cast<std::size_t>(x)] * beta[static_cast<std::size_t>(t)][static_cast<std::size_t>(x)];
    if (!normalize(g))
      throw std::domain_error(std::string(op) + ": no label mass at position " + std::to_string(t + 1));
    const int best = argmax_lowest(g, &out.decode.ties_broken);
    out.decode.labels[static_cast<std::size_t>(t)] = best;
    score += log_safe(g[static_cast<std::size_t>(best)]);
    out.marginals[static_cast<std::size_t>(t)] = std::move(g);
  }
  out.decode.score = score;
  return out;
}

}  // namespace detail

// MAP decode (Viterbi), generative construction:
// max-sum over log p(x_1) + log p(y_1|x_1) + sum [log p(x_{t+1}|x_t) + log p(y_{t+1}|x_{t+1})].
inline DecodeResult hmc_viterbi(const GenerativeModel& m, const ObsSeq& y, bool rescale = false) {
  detail::check_discrete(y, "hmc_viterbi");
  detail::check_obs_range(y, m.num_observations(), "hmc_viterbi");
  const int n = m.num_labels();
  const int t_len = y.length();
  detail::LogLattice lat;
  lat.t_len = t_len;
  lat.n = n;
  lat.node.resize(static_cast<std::size_t>(t_len * n));
  lat.edge.resize(static_cast<std::size_t>((t_len - 1) * n * n));
  for (int x = 0; x < n; ++x)
    lat.node_at(0, x) = log_safe(m.prior(x)) + log_safe(m.emit(x, y.symbols[0]));
  for (int t = 1; t < t_len; ++t)
    for (int x = 0; x < n; ++x) lat.node_at(t, x) = log_safe(m.emit(x, y.symbols[static_cast<std::size_t>(t)]));
  for (int t = 0; t + 1 < t_len; ++t)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) lat.edge_at(t, a, b) = log_safe(m.trans(a, b));
  return detail::viterbi_lattice(lat, rescale);
}

// MAP decode, discriminative construction:
// max-sum over log p(x_1|y_1) + sum [log p(x_{t+1}|x_t) + log p(x_{t+1}|y_{t+1}) - log p(x_{t+1})].
inline DecodeResult hmc_viterbi(const DiscriminativeUnits& u, const ObsSeq& y, bool rescale = false) {
  const int n = u.num_labels();
  const int t_len = y.length();
  if (t_len < 1) throw std::invalid_argument("hmc_viterbi: empty sequence");
  const auto marg = label_marginals(u, t_len);
  detail::LogLattice lat;
  lat.t_len = t_len;
  lat.n = n;
  lat.node.resize(static_cast<std::size_t>(t_len * n));
  lat.edge.resize(static_cast<std::size_t>((t_len - 1) * n * n));
  for (int t = 0; t < t_len; ++t) {
    const Categorical post = position_posterior(u, marg, t, y);
    for (int x = 0; x < n; ++x)
      lat.node_at(t, x) =
          t == 0 ? log_safe(post[static_cast<std::size_t>(x)])
                 : detail::log_ratio(post[static_cast<std::size_t>(x)], marg[static_cast<std::size_t>(t)][static_cast<std::size_t>(x)], t);
  }
  for (int t = 0; t + 1 < t_len; ++t)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) lat.edge_at(t, a, b) = log_safe(u.trans(a, b));
  return detail::viterbi_lattice(lat, rescale);
}

// MPM via classic scaled forward-backward (generative construction).
inline MpmResult hmc_fb_mpm(const GenerativeModel& m, const ObsSeq& y, bool rescale = true) {
  detail::check_discrete(y, "hmc_fb_mpm");
  detail::check_obs_range(y, m.num_observations(), "hmc_fb_mpm");
  const int n = m.num_labels();
  const int t_len = y.length();
  std::vector<double> node(static_cast<std::size_t>(t_len * n));
  std::vector<double> edge(static_cast<std::size_t>((t_len - 1) * n * n));
  for (int x = 0; x < n; ++x) node[static_cast<std::size_t>(x)] = m.prior(x) * m.emit(x, y.symbols[0]);
  for (int t = 1; t < t_len; ++t)
    for (int x = 0; x < n; ++x) node[static_cast<std::size_t>(t * n + x)] = m.emit(x, y.symbols[static_cast<std::size_t>(t)]);
  for (int t = 0; t + 1 < t_len; ++t)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) edge[static_cast<std::size_t>((t * n + a) * n + b)] = m.trans(a, b);
  return detail::forward_backward_lattice(node, edge, t_len, n, rescale, "hmc_fb_mpm");
}

// MPM via the entropic forward-backward recursions (discriminative
// construction): step weights are p(x_{u+1}|y_{u+1}) / p(x_{u+1}).
inline MpmResult hmc_efb_mpm(const DiscriminativeUnits& u, const ObsSeq& y, bool rescale = true) {
  const int n = u.num_labels();
  const int t_len = y.length();
  if (t_len < 1) throw std::invalid_argument("hmc_efb_mpm: empty sequence");
  const auto marg = label_marginals(u, t_len);
  std::vector<double> node(static_cast<std::size_t>(t_len * n));
  std::vector<double> edge(static_cast<std::size_t>((t_len - 1) * n * n));
  for (int t = 0; t < t_len; ++t) {
    const Categorical post = position_posterior(u, marg, t, y);
    for (int x = 0; x < n; ++x) {
      if (t == 0) {
        node[static_cast<std::size_t>(x)] = post[static_cast<std::size_t>(x)];
      } else {
        const double pm = marg[static_cast<std::size_t>(t)][static_cast<std::size_t>(x)];
        const double px = post[static_cast<std::size_t>(x)];
        if (px > 0.0 && !(pm > 0.0))
          throw std::domain_error("hmc_efb_mpm: zero marginal p(x_t) at position " + std::to_string(t + 1));
        node[static_cast<std::size_t>(t * n + x)] = pm > 0.0 ? px / pm : 0.0;
      }
    }
  }
  for (int t = 0; t + 1 < t_len; ++t)
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) edge[static_cast<std::size_t>((t * n + a) * n + b)] = u.trans(a, b);
  return detail::forward_backward_lattice(node, edge, t_len, n, rescale, "hmc_efb_mpm");
}

namespace detail {

// Pair-state forward-backward shared by both HMC2 constructions. em(t, x) is
// the per-position weight: p(y_t|x_t) or the posterior/marginal ratio.
template <class EmFn>
MpmResult hmc2_mpm_impl(const Table& prior, const Table& trans, const Table& trans2, int n,
                        int t_len, EmFn em, bool rescale, const char* op) {
  MpmResult out;
  out.marginals.resize(static_cast<std::size_t>(t_len));
  out.decode.labels.resize(static_cast<std::size_t>(t_len));

  if (t_len == 1) {
    Categorical g(static_cast<std::size_t>(n));
    for (int x = 0; x < n; ++x) g[static_cast<std::size_t>(x)] = prior(x) * em(0, x);
    if (!normalize(g)) throw std::domain_error(std::string(op) + ": no label mass at position 1");
    const int best = argmax_lowest(g, &out.decode.ties_broken);
    out.decode.labels[0] = best;
    out.decode.score = log_safe(g[static_cast<std::size_t>(best)]);
    out.marginals[0] = std::move(g);
    return out;
  }

  // forward/backward over pair states (x_{t-1}, x_t), t = 2..T
  const int steps = t_len - 1;  // pair positions
  std::vector<Table> alpha(static_cast<std::size_t>(steps), Table({n, n}, 0.0));
  std::vector<Table> beta(static_cast<std::size_t>(steps), Table({n, n}, 1.0));

  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) alpha[0](a, b) = prior(a) * em(0, a) * trans(a, b) * em(1, b);
  auto rescale_pair = [&](Table& t, int pos) {
    double s = sum(t.values());
    if (!(s > 0.0))
      throw std::domain_error(std::string(op) + ": no label mass at position " + std::to_string(pos + 1));
    for (double& v : t.values()) v /= s;
  };
  if (rescale) rescale_pair(alpha[0], 1);
  for (int s = 1; s < steps; ++s) {
    // pair (b, c) at positions (s+1, s+2) 1-based
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c) {
        double acc = 0.0;
        for (int a = 0; a < n; ++a) acc += alpha[static_cast<std::size_t>(s - 1)](a, b) * trans2(a, b, c);
        alpha[static_cast<std::size_t>(s)](b, c) = acc * em(s + 1, c);
      }
    if (rescale) rescale_pair(alpha[static_cast<std::size_t>(s)], s + 1);
  }
  for (int s = steps - 2; s >= 0; --s) {
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        double acc = 0.0;
        for (int c = 0; c < n; ++c)
          acc += trans2(a, b, c) * em(s + 2, c) * beta[static_cast<std::size_t>(s + 1)](b, c);
        beta[static_cast<std::size_t>(s)](a, b) = acc;
      }
    if (rescale) rescale_pair(beta[static_cast<std::size_t>(s)], s + 1);
  }

  // position marginals from pair posteriors
  double score = 0.0;
  for (int t = 0; t < t_len; ++t) {
    Categorical g(static_cast<std::size_t>(n), 0.0);
    const int s = t == 0 ? 0 : t - 1;  // pair index covering position t
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) {
        const double w = alpha[static_cast<std::size_t>(s)](a, b) * beta[static_cast<std::size_t>(s)](a, b);
        g[static_cast<std::size_t>(t == 0 ? a : b)] += w;
      }
    if (!normalize(g))
      throw std::domain_error(std::string(op) + ": no label mass at position " + std::to_string(t + 1));
    const int best = argmax_lowest(g, &out.decode.ties_broken);
    out.decode.labels[static_cast<std::size_t>(t)] = best;
    score += log_safe(g[static_cast<std::size_t>(best)]);
    out.marginals[static_cast<std::size_t>(t)] = std::move(g);
  }
  out.decode.score = score;
  return out;
}

}  // namespace detail

// HMC2 MPM, generative construction.
inline MpmResult hmc2_mpm(const GenerativeModel& m, const ObsSeq& y, bool rescale = true) {
  detail::check_discrete(y, "hmc2_mpm");
  detail::check_obs_range(y, m.num_observations(), "hmc2_mpm");
  auto em = [&](int t, int x) { return m.emit(x, y.symbols[static_cast<std::size_t>(t)]); };
  return detail::hmc2_mpm_impl(m.prior, m.trans, m.trans2, m.num_labels(), y.length(), em, rescale,
                               "hmc2_mpm");
}

// HMC2 MPM, discriminative construction: each position contributes
// p(x_t|y_t)/p(x_t).
inline MpmResult hmc2_mpm(const DiscriminativeUnits& u, const ObsSeq& y, bool rescale = true) {
  const int n = u.num_labels();
  const int t_len = y.length();
  if (t_len < 1) throw std::invalid_argument("hmc2_mpm: empty sequence");
  const auto marg = label_marginals(u, t_len);
  std::vector<Categorical> ratio(static_cast<std::size_t>(t_len));
  for (int t = 0; t < t_len; ++t) {
    Categorical post = position_posterior(u, marg, t, y);
    for (int x = 0; x < n; ++x) {
      const double pm = marg[static_cast<std::size_t>(t)][static_cast<std::size_t>(x)];
      const double px = post[static_cast<std::size_t>(x)];
      if (px > 0.0 && !(pm > 0.0))
        throw std::domain_error("hmc2_mpm: zero marginal p(x_t) at position " + std::to_string(t + 1));
      post[static_cast<std::size_t>(x)] = pm > 0.0 ? px / pm : 0.0;
    }
    ratio[static_cast<std::size_t>(t)] = std::move(post);
  }
  auto em = [&](int t, int x) { return ratio[static_cast<std::size_t>(t)][static_cast<std::size_t>(x)]; };
  return detail::hmc2_mpm_impl(u.prior, u.trans, u.trans2, n, t_len, em, rescale, "hmc2_mpm");
}

namespace detail {

// Forward-backward with pairwise step weights w_t(a, b), shared by both
// HMC+ constructions.
template <class StartFn, class StepFn>
MpmResult hmcplus_mpm_impl(int n, int t_len, StartFn start, StepFn step, bool rescale,
                           const char* op) {
  std::vector<std::vector<double>> alpha(static_cast<std::size_t>(t_len),
                                         std::vector<double>(static_cast<std::size_t>(n)));
  std::vector<std::vector<double>> beta(static_cast<std::size_t>(t_len),
                                        std::vector<double>(static_cast<std::size_t>(n), 1.0));
  for (int x = 0; x < n; ++x) alpha[0][static_cast<std::size_t>(x)] = start(x);
  auto rescale_vec = [&](std::vector<double>& v, int pos) {
    double s = sum(v);
    if (!(s > 0.0))
      throw std::domain_error(std::string(op) + ": no label mass at position " + std::to_string(pos + 1));
    for (double& x : v) x /= s;
  };
  if (rescale) rescale_vec(alpha[0], 0);
  for (int t = 1; t < t_len; ++t) {
    for (int b = 0; b < n; ++b) {
      double s = 0.0;
      for (int a = 0; a < n; ++a) s += alpha[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(a)] * step(t, a, b);
      alpha[static_cast<std::size_t>(t)][static_cast<std::size_t>(b)] = s;
    }
    if (rescale) rescale_vec(alpha[static_cast<std::size_t>(t)], t);
  }
  for (int t = t_len - 2; t >= 0; --t) {
    for (int a = 0; a < n; ++a) {
      double s = 0.0;
      for (int b = 0; b < n; ++b) s += step(t + 1, a, b) * beta[static_cast<std::size_t>(t + 1)][static_cast<std::size_t>(b)];
      beta[static_cast<std::size_t>(t)][static_cast<std::size_t>(a)] = s;
    }
    if (rescale) rescale_vec(beta[static_cast<std::size_t>(t)], t);
  }
  MpmResult out;
  out.marginals.resize(static_cast<std::size_t>(t_len));
  out.decode.labels.resize(static_cast<std::size_t>(t_len));
  double score = 0.0;
  for (int t = 0; t < t_len; ++t) {
    Categorical g(static_cast<std::size_t>(n));
    for (int x = 0; x < n; ++x)
      g[static_cast<std::size_t>(x)] = alpha[static_cast<std::size_t>(t)][static_cast<std::size_t>(x)] * beta[static_cast<std::size_t>(t)][static_cast<std::size_t>(x)];
    if (!normalize(g))
      throw std::domain_error(std::string(op) + ": no label mass at position " + std::to_string(t + 1));
    const int best = argmax_lowest(g, &out.decode.ties_broken);
    out.decode.labels[static_cast<std::size_t>(t)] = best;
    score += log_safe(g[static_cast<std::size_t>(best)]);
    out.marginals[static_cast<std::size_t>(t)] = std::move(g);
  }
  out.decode.score = score;
  return out;
}

}  // namespace detail

// HMC+ MPM, generative construction.
inline MpmResult hmcplus_mpm(const GenerativeModel& m, const ObsSeq& y, bool rescale = true) {
  detail::check_discrete(y, "hmcplus_mpm");
  detail::check_obs_range(y, m.num_observations(), "hmcplus_mpm");
  auto start = [&](int x) { return m.prior(x) * m.emit(x, y.symbols[0]); };
  auto step = [&](int t, int a, int b) {
    return m.trans(a, b) * m.emit2(a, b, y.symbols[static_cast<std::size_t>(t)]);
  };
  return detail::hmcplus_mpm_impl(m.num_labels(), y.length(), start, step, rescale, "hmcplus_mpm");
}

// HMC+ MPM, discriminative construction: the step weight from x_t to x_{t+1}
// is p(x_t, x_{t+1} | y_{t+1}) / p(x_t).
inline MpmResult hmcplus_mpm(const DiscriminativeUnits& u, const ObsSeq& y, bool rescale = true) {
  const int n = u.num_labels();
  const int t_len = y.length();
  if (t_len < 1) throw std::invalid_argument("hmcplus_mpm: empty sequence");
  const auto marg = label_marginals(u, t_len);
  const auto pairs = pair_label_marginals(u, t_len);
  const Categorical first = position_posterior(u, marg, 0, y);
  std::vector<Table> pair_post;
  pair_post.reserve(static_cast<std::size_t>(t_len - 1));
  for (int t = 1; t < t_len; ++t) pair_post.push_back(position_pair_posterior(u, pairs, t, y));

  auto start = [&](int x) { return first[static_cast<std::size_t>(x)]; };
  auto step = [&](int t, int a, int b) {
    const double num = pair_post[static_cast<std::size_t>(t - 1)](a, b);
    const double den = marg[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(a)];
    if (num <= 0.0) return 0.0;
    if (!(den > 0.0))
      throw std::domain_error("hmcplus_mpm: zero marginal p(x_t) at position " + std::to_string(t));
    return num / den;
  };
  return detail::hmcplus_mpm_impl(n, t_len, start, step, rescale, "hmcplus_mpm");
}

// ---- exact enumeration oracle ----------------------------------------------

// Exact p(x_H | y) by full enumeration of label assignments, log-space
// normalized. H holds 0-based positions into the hidden vector (class kinds
// have a single hidden variable, so H = {0}). Guarded to N^T <= 10^7.
inline Categorical brute_force_posterior(const GenerativeModel& m, const ObsSeq& y,
                                         const std::vector<int>& h) {
  detail::check_discrete(y, "brute_force_posterior");
  detail::check_obs_range(y, m.num_observations(), "brute_force_posterior");
  const int n = m.num_labels();
  const int t_hidden = is_class_kind(m.kind) ? 1 : y.length();
  double states = 1.0;
  for (int t = 0; t < t_hidden; ++t) {
    states *= n;
    if (states > 1e7) throw std::length_error("brute_force_posterior: N^T guard exceeded");
  }
  if (h.empty()) throw std::invalid_argument("brute_force_posterior: empty position set");
  for (int pos : h)
    if (pos < 0 || pos >= t_hidden)
      throw std::invalid_argument("brute_force_posterior: position out of range");

  std::size_t cells = 1;
  for (std::size_t i = 0; i < h.size(); ++i) cells *= static_cast<std::size_t>(n);
  std::vector<std::vector<double>> bucket(cells);

  LabeledSequence seq;
  seq.obs = y;
  seq.labels.assign(static_cast<std::size_t>(t_hidden), 0);
  const auto total = static_cast<std::size_t>(states);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (int t = t_hidden - 1; t >= 0; --t) {
      seq.labels[static_cast<std::size_t>(t)] = static_cast<int>(c % static_cast<std::size_t>(n));
      c /= static_cast<std::size_t>(n);
    }
    const double lp = joint_log_prob(m, seq);
    std::size_t cell = 0;
    for (int pos : h) cell = cell * static_cast<std::size_t>(n) + static_cast<std::size_t>(seq.labels[static_cast<std::size_t>(pos)]);
    bucket[cell].push_back(lp);
  }

  Categorical out(cells);
  double norm = kNegInf;
  std::vector<double> cell_lp(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    cell_lp[i] = log_sum_exp(bucket[i]);
    norm = std::max(norm, cell_lp[i]);
  }
  if (norm == kNegInf)
    throw std::domain_error("brute_force_posterior: observation sequence has zero probability");
  double z = 0.0;
  for (std::size_t i = 0; i < cells; ++i) z += std::exp(cell_lp[i] - norm);
  for (std::size_t i = 0; i < cells; ++i) out[i] = std::exp(cell_lp[i] - norm) / z;
  return out;
}

// Exact MAP over full label assignments (ties: lexicographically smallest).
inline DecodeResult brute_force_map(const GenerativeModel& m, const ObsSeq& y) {
  detail::check_discrete(y, "brute_force_map");
  const int n = m.num_labels();
  const int t_hidden = is_class_kind(m.kind) ? 1 : y.length();
  double states = 1.0;
  for (int t = 0; t < t_hidden; ++t) {
    states *= n;
    if (states > 1e7) throw std::length_error("brute_force_map: N^T guard exceeded");
  }
  LabeledSequence seq;
  seq.obs = y;
  seq.labels.assign(static_cast<std::size_t>(t_hidden), 0);
  DecodeResult best;
  best.score = kNegInf;
  const auto total = static_cast<std::size_t>(states);
  for (std::size_t code = 0; code < total; ++code) {
    std::size_t c = code;
    for (int t = t_hidden - 1; t >= 0; --t) {
      seq.labels[static_cast<std::size_t>(t)] = static_cast<int>(c % static_cast<std::size_t>(n));
      c /= static_cast<std::size_t>(n);
    }
    const double lp = joint_log_prob(m, seq);
    if (lp > best.score) {
      best.score = lp;
      best.labels = seq.labels;
    } else if (lp == best.score && best.labels.empty()) {
      best.labels = seq.labels;
    }
  }
  if (best.labels.empty()) best.labels = seq.labels;
  return best;
}

// Exact per-position MPM marginals by enumeration: two passes over all
// assignments (max shift, then accumulation), so cost does not scale with T
// beyond the enumeration itself.
inline PosteriorMarginals brute_force_marginals(const GenerativeModel& m, const ObsSeq& y) {
  detail::check_discrete(y, "brute_force_marginals");
  const int n = m.num_labels();
  const int t_hidden = is_class_kind(m.kind) ? 1 : y.length();
  double states = 1.0;
  for (int t = 0; t < t_hidden; ++t) {
    states *= n;
    if (states > 1e7) throw std::length_error("brute_force_marginals: N^T guard exceeded");
  }
  const auto total = static_cast<std::size_t>(states);
  LabeledSequence seq;
  seq.obs = y;
  seq.labels.assign(static_cast<std::size_t>(t_hidden), 0);
  auto decode_assignment = [&](std::size_t code) {
    for (int t = t_hidden - 1; t >= 0; --t) {
      seq.labels[static_cast<std::size_t>(t)] = static_cast<int>(code % static_cast<std::size_t>(n));
      code /= static_cast<std::size_t>(n);
    }
  };

  double max_lp = kNegInf;
  for (std::size_t code = 0; code < total; ++code) {
    decode_assignment(code);
    max_lp = std::max(max_lp, joint_log_prob(m, seq));
  }
  if (max_lp == kNegInf)
    throw std::domain_error("brute_force_marginals: observation sequence has zero probability");

  std::vector<double> acc(static_cast<std::size_t>(t_hidden * n), 0.0);
  double z = 0.0;
  for (std::size_t code = 0; code < total; ++code) {
    decode_assignment(code);
    const double w = std::exp(joint_log_prob(m, seq) - max_lp);
    z += w;
    for (int t = 0; t < t_hidden; ++t)
      acc[static_cast<std::size_t>(t * n + seq.labels[static_cast<std::size_t>(t)])] += w;
  }
  PosteriorMarginals out(static_cast<std::size_t>(t_hidden), Categorical(static_cast<std::size_t>(n)));
  for (int t = 0; t < t_hidden; ++t)
    for (int x = 0; x < n; ++x)
      out[static_cast<std::size_t>(t)][static_cast<std::size_t>(x)] = acc[static_cast<std::size_t>(t * n + x)] / z;
  return out;
}

}  // namespace genclass
