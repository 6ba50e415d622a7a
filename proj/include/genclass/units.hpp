#pragma once

// Discriminative units: the posterior-table / feature-head ingredients a
// discriminatively constructed classifier consumes, plus the structural
// priors it keeps from the model. No emission or observation-given-label
// table ever appears here.
//
// Posterior tables are stored at the law's canonical context positions
// (e.g. p(x|y_1) at position 1, p(x|y_t,y_{t-1}) at positions (2,1)). For
// chain kinds the per-position posterior p(x_t|y_t) is recovered exactly by
// reweighting the canonical table with the position marginal, which keeps
// every quantity a posterior/prior functional of the same joint.

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "genclass/model.hpp"
#include "genclass/table.hpp"

namespace genclass {

// How p(x_t) (and pair marginals) are produced for chain kinds.
//  ChainPropagated: from prior and transition tables, position-indexed.
//  Empirical: one stationary vector, e.g. pooled label frequency from data.
enum class MarginalMode : std::uint8_t { ChainPropagated, Empirical };

// Linear-softmax map from a real feature vector to a distribution over
// out_dim classes. The zero head is the uniform posterior.
struct FeatureHead {
  int input_dim = 0;
  int out_dim = 0;
  std::vector<double> w;  // out_dim x input_dim, row-major
  std::vector<double> b;  // out_dim

  static FeatureHead zeros(int out_dim, int input_dim) {
    FeatureHead h;
    h.input_dim = input_dim;
    h.out_dim = out_dim;
    h.w.assign(static_cast<std::size_t>(out_dim) * static_cast<std::size_t>(input_dim), 0.0);
    h.b.assign(static_cast<std::size_t>(out_dim), 0.0);
    return h;
  }

  void logits(std::span<const double> f, std::span<double> out) const {
    for (int k = 0; k < out_dim; ++k) {
      double z = b[static_cast<std::size_t>(k)];
      const double* row = w.data() + static_cast<std::size_t>(k) * static_cast<std::size_t>(input_dim);
      for (int j = 0; j < input_dim; ++j) z += row[j] * f[static_cast<std::size_t>(j)];
      out[static_cast<std::size_t>(k)] = z;
    }
  }

  Categorical posterior(std::span<const double> f) const {
    Categorical z(static_cast<std::size_t>(out_dim));
    logits(f, z);
    double m = z[0];
    for (double v : z) m = std::max(m, v);
    double s = 0.0;
    for (double& v : z) {
      v = std::exp(v - m);
      s += v;
    }
    for (double& v : z) v /= s;
    return z;
  }
};

// One posterior unit: a conditional table over discrete contexts or a
// feature head over the concatenated context features.
struct PosteriorUnit {
  Table table;
  std::optional<FeatureHead> head;

  bool is_head() const { return head.has_value(); }
  bool defined() const { return is_head() || !table.empty(); }
};

struct DiscriminativeUnits {
  ModelKind kind = ModelKind::NaiveBayes;
  LabelSet labels;
  ObsSet observations;  // empty when every unit is a feature head

  MarginalMode marginal_mode = MarginalMode::ChainPropagated;
  Table prior;               // [N] p(x) / p(x_1)
  Table trans;               // [N,N] chain kinds
  Table trans2;              // [N,N,N] HMC2
  Table empirical_marginal;  // [N] Empirical mode
  Table empirical_pair;      // [N,N] HMC+ Empirical mode

  PosteriorUnit obs_posterior;   // [M,N]: NB p(x|y); PooledMC* p(x|y_1); chain kinds p(x_1|y_1)
  PosteriorUnit obs2_posterior;  // [M,M,N] PooledMC*: p(x|y_t,y_{t-1}), context order (y_t, y_{t-1})
  PosteriorUnit obs3_posterior;  // [M,M,M,N] PooledMC2: p(x|y_t,y_{t-1},y_{t-2})
  PosteriorUnit pair_posterior;  // [M,N,N] HMC+: p(x_{t-1},x_t|y_t), value over the label pair

  int num_labels() const { return labels.size(); }
  bool featurized() const { return obs_posterior.is_head(); }
};

namespace detail {

inline void check_unit(std::vector<Violation>& out, const PosteriorUnit& u, const char* name,
                       const std::vector<int>& want_shape, int value_width) {
  if (u.is_head()) {
    const FeatureHead& h = *u.head;
    if (h.out_dim != value_width)
      out.push_back({name, "head out_dim " + std::to_string(h.out_dim) + " != " + std::to_string(value_width)});
    if (h.input_dim <= 0) out.push_back({name, "head input_dim must be positive"});
    if (h.w.size() != static_cast<std::size_t>(h.out_dim) * static_cast<std::size_t>(h.input_dim) ||
        h.b.size() != static_cast<std::size_t>(h.out_dim))
      out.push_back({name, "head parameter sizes inconsistent"});
    return;
  }
  if (u.table.empty()) {
    out.push_back({name, "missing unit"});
    return;
  }
  check_shape(out, u.table, name, want_shape);
  if (u.table.shape() == want_shape) {
    // value dimension may span the trailing one or two axes (label pairs)
    const std::size_t groups = u.table.size() / static_cast<std::size_t>(value_width);
    for (std::size_t g = 0; g < groups; ++g) {
      double s = 0.0;
      bool neg = false;
      for (int k = 0; k < value_width; ++k) {
        const double v = u.table.values()[g * static_cast<std::size_t>(value_width) + static_cast<std::size_t>(k)];
        if (!(v >= 0.0)) neg = true;
        s += v;
      }
      if (neg || std::abs(s - 1.0) > 1e-9)
        out.push_back({std::string(name) + "[" + std::to_string(g) + "]",
                       neg ? "negative entry" : "slice sum " + std::to_string(s) + " != 1"});
    }
  }
}

inline void check_positive(std::vector<Violation>& out, const Table& t, const char* name) {
  for (std::size_t i = 0; i < t.size(); ++i)
    if (!(t.values()[i] > 0.0)) {
      out.push_back({name, "zero denominator marginal at index " + std::to_string(i)});
      return;
    }
}

}  // namespace detail

inline std::vector<Violation> validate(const DiscriminativeUnits& u) {
  std::vector<Violation> v;
  const int n = u.num_labels();
  if (n < 1) {
    v.push_back({"labels", "empty label set"});
    return v;
  }
  const int mm = u.observations.size();
  const bool discrete = !u.featurized();
  if (discrete && mm < 1) {
    v.push_back({"observations", "empty observation set for table units"});
    return v;
  }

  detail::check_shape(v, u.prior, "prior", {n});
  if (!v.empty()) return v;
  detail::check_rows(v, u.prior, "prior");

  switch (u.kind) {
    case ModelKind::NaiveBayes:
      detail::check_unit(v, u.obs_posterior, "obs_posterior", {mm, n}, n);
      break;
    case ModelKind::PooledMC:
      detail::check_unit(v, u.obs_posterior, "obs_posterior", {mm, n}, n);
      detail::check_unit(v, u.obs2_posterior, "obs2_posterior", {mm, mm, n}, n);
      break;
    case ModelKind::PooledMC2:
      detail::check_unit(v, u.obs_posterior, "obs_posterior", {mm, n}, n);
      detail::check_unit(v, u.obs2_posterior, "obs2_posterior", {mm, mm, n}, n);
      detail::check_unit(v, u.obs3_posterior, "obs3_posterior", {mm, mm, mm, n}, n);
      break;
    case ModelKind::Hmc:
    case ModelKind::Hmc2: {
      detail::check_unit(v, u.obs_posterior, "obs_posterior", {mm, n}, n);
      detail::check_shape(v, u.trans, "transition", {n, n});
      if (u.kind == ModelKind::Hmc2) detail::check_shape(v, u.trans2, "transition2", {n, n, n});
      if (!u.trans.empty() && u.trans.shape() == std::vector<int>{n, n}) detail::check_rows(v, u.trans, "transition");
      if (!u.trans2.empty()) detail::check_rows(v, u.trans2, "transition2");
      break;
    }
    case ModelKind::HmcPlus: {
      detail::check_unit(v, u.obs_posterior, "obs_posterior", {mm, n}, n);
      detail::check_unit(v, u.pair_posterior, "pair_posterior", {mm, n, n}, n * n);
      detail::check_shape(v, u.trans, "transition", {n, n});
      if (!u.trans.empty() && u.trans.shape() == std::vector<int>{n, n}) detail::check_rows(v, u.trans, "transition");
      break;
    }
  }

  // Marginals appear as denominators; zeroes are hard validation errors.
  if (is_class_kind(u.kind)) {
    detail::check_positive(v, u.prior, "prior");
  } else if (u.marginal_mode == MarginalMode::Empirical) {
    if (u.empirical_marginal.shape() != std::vector<int>{n})
      v.push_back({"empirical_marginal", "missing or wrong shape"});
    else
      detail::check_positive(v, u.empirical_marginal, "empirical_marginal");
    if (u.kind == ModelKind::HmcPlus) {
      if (u.empirical_pair.shape() != std::vector<int>{n, n})
        v.push_back({"empirical_pair", "missing or wrong shape"});
      else
        detail::check_positive(v, u.empirical_pair, "empirical_pair");
    }
  } else {
    detail::check_positive(v, u.prior, "prior");
    if (u.kind == ModelKind::Hmc && !u.trans.empty()) {
      // a transition column with no mass sends some p(x_t) to zero
      for (int b = 0; b < n; ++b) {
        double col = 0.0;
        for (int a = 0; a < n; ++a) col += u.trans(a, b);
        if (!(col > 0.0))
          v.push_back({"transition", "zero denominator marginal: column " + std::to_string(b) + " has no mass"});
      }
    }
    if (u.kind == ModelKind::HmcPlus && !u.trans.empty()) {
      detail::check_positive(v, u.trans, "transition (pair marginal denominator)");
    }
  }
  return v;
}

// ---- position-aware evaluation -------------------------------------------

namespace detail {

inline double safe_div(double num, double den) {
  if (den > 0.0) return num / den;
  if (num == 0.0) return 0.0;
  throw std::domain_error("discriminative units: zero denominator marginal for a reachable label");
}

}  // namespace detail

// p(x_t) for t = 1..T under the units' marginal convention.
inline std::vector<Categorical> label_marginals(const DiscriminativeUnits& u, int t_len) {
  if (is_class_kind(u.kind) || u.marginal_mode == MarginalMode::ChainPropagated)
    return chain_label_marginals(u.kind, u.prior, u.trans, u.trans2, t_len);
  return std::vector<Categorical>(static_cast<std::size_t>(t_len), u.empirical_marginal.values());
}

// p(x_t, x_{t+1}) for t = 1..T-1 (HMC+).
inline std::vector<Table> pair_label_marginals(const DiscriminativeUnits& u, int t_len) {
  if (u.marginal_mode == MarginalMode::ChainPropagated)
    return chain_pair_marginals(u.prior, u.trans, t_len);
  return std::vector<Table>(static_cast<std::size_t>(t_len > 0 ? t_len - 1 : 0), u.empirical_pair);
}

// Raw unit lookup for a discrete context (most recent observation first).
inline Categorical unit_value(const PosteriorUnit& unit, std::span<const int> ctx) {
  auto s = unit.table.slice(ctx);
  return Categorical(s.begin(), s.end());
}

// Raw unit lookup for a featurized context (already concatenated).
inline Categorical unit_value(const PosteriorUnit& unit, std::span<const double> features) {
  return unit.head->posterior(features);
}

// Observation context passed to single-observation units.
inline Categorical obs_unit_value(const DiscriminativeUnits& u, const PosteriorUnit& unit,
                                  const ObsSeq& y, int t) {
  if (y.featurized()) return unit_value(unit, std::span<const double>(y.features[static_cast<std::size_t>(t)]));
  const int ctx[1] = {y.symbols[static_cast<std::size_t>(t)]};
  (void)u;
  return unit_value(unit, std::span<const int>(ctx, 1));
}

// p(x_t | y_t) at 0-based position t, consistent with label_marginals. For
// ChainPropagated units the canonical table is reweighted to the exact
// position-t posterior; otherwise the stored unit is used as-is.
inline Categorical position_posterior(const DiscriminativeUnits& u,
                                      const std::vector<Categorical>& marginals, int t,
                                      const ObsSeq& y) {
  Categorical q = obs_unit_value(u, u.obs_posterior, y, t);
  if (is_class_kind(u.kind) || u.marginal_mode == MarginalMode::Empirical || t == 0) return q;
  const auto& pi_t = marginals[static_cast<std::size_t>(t)];
  for (std::size_t x = 0; x < q.size(); ++x)
    q[x] = pi_t[x] * detail::safe_div(q[x], u.prior(static_cast<int>(x)));
  if (!normalize(q))
    throw std::domain_error("position_posterior: no label mass at position " + std::to_string(t + 1));
  return q;
}

// p(x_{t-1}, x_t | y_t) as an [N,N] table at 0-based position t >= 1 (HMC+).
inline Table position_pair_posterior(const DiscriminativeUnits& u,
                                     const std::vector<Table>& pair_marginals, int t,
                                     const ObsSeq& y) {
  const int n = u.num_labels();
  Table out({n, n}, 0.0);
  if (u.pair_posterior.is_head()) {
    Categorical q = obs_unit_value(u, u.pair_posterior, y, t);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) out(a, b) = q[static_cast<std::size_t>(a * n + b)];
    return out;
  }
  const int yt = y.symbols[static_cast<std::size_t>(t)];
  if (u.marginal_mode == MarginalMode::Empirical) {
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) out(a, b) = u.pair_posterior.table(yt, a, b);
    return out;
  }
  const Table& mu_t = pair_marginals[static_cast<std::size_t>(t - 1)];
  double s = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const double ref = u.prior(a) * u.trans(a, b);  // canonical pair marginal p(x_1,x_2)
      const double v = mu_t(a, b) * detail::safe_div(u.pair_posterior.table(yt, a, b), ref);
      out(a, b) = v;
      s += v;
    }
  if (!(s > 0.0))
    throw std::domain_error("position_pair_posterior: no pair mass at position " + std::to_string(t + 1));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) out(a, b) /= s;
  return out;
}

}  // namespace genclass
