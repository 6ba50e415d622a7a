#pragma once

// Generative sequence/classification models. Six kinds share one table
// container; which tables are present and their shapes depend on the kind.
//
// Conventions used throughout the library:
//  * positions are 1-based in comments and error messages, 0-based in code;
//  * conditional tables store conditioning indices first, variable last;
//  * all scoring is done in natural-log space, log 0 = -inf.

#include <cmath>
#include <cstdint>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "genclass/alphabet.hpp"
#include "genclass/table.hpp"

namespace genclass {

enum class ModelKind : std::uint8_t {
  NaiveBayes,  // p(x) prod_t p(y_t|x)
  PooledMC,    // p(x) p(y_1|x) prod p(y_{t+1}|x,y_t)
  PooledMC2,   // p(x) p(y_1|x) p(y_2|x,y_1) prod p(y_{t+2}|x,y_t,y_{t+1})
  Hmc,         // p(x_1) prod p(x_{t+1}|x_t) prod p(y_t|x_t)
  Hmc2,        // p(x_1) p(x_2|x_1) prod p(x_{t+2}|x_t,x_{t+1}) prod p(y_t|x_t)
  HmcPlus,     // p(x_1) prod p(x_{t+1}|x_t) p(y_1|x_1) prod p(y_{t+1}|x_t,x_{t+1})
};

inline bool is_class_kind(ModelKind k) {
  return k == ModelKind::NaiveBayes || k == ModelKind::PooledMC || k == ModelKind::PooledMC2;
}
inline bool is_chain_kind(ModelKind k) { return !is_class_kind(k); }

inline const char* kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::NaiveBayes: return "nb";
    case ModelKind::PooledMC: return "pooled_mc";
    case ModelKind::PooledMC2: return "pooled_mc2";
    case ModelKind::Hmc: return "hmc";
    case ModelKind::Hmc2: return "hmc2";
    case ModelKind::HmcPlus: return "hmc_plus";
  }
  return "?";
}

// Observation side of a sequence: either symbol indices into an ObsSet or
// one real feature vector per position (for feature-head units).
struct ObsSeq {
  std::vector<int> symbols;
  std::vector<std::vector<double>> features;

  bool featurized() const { return !features.empty(); }
  int length() const {
    return static_cast<int>(featurized() ? features.size() : symbols.size());
  }
};

// (x, y) pair. Chain kinds carry one label per position; class kinds carry a
// single label for the whole sequence.
struct LabeledSequence {
  std::vector<int> labels;
  ObsSeq obs;
};

struct GenerativeModel {
  ModelKind kind = ModelKind::NaiveBayes;
  LabelSet labels;
  ObsSet observations;

  Table prior;   // [N]       p(x) / p(x_1)
  Table trans;   // [N,N]     p(x_{t+1}|x_t); HMC2: p(x_2|x_1)
  Table trans2;  // [N,N,N]   HMC2: p(x_{t+2}|x_t,x_{t+1})
  Table emit;    // [N,M]     p(y_t|x) / p(y_t|x_t); PooledMC*: p(y_1|x); HMC+: p(y_1|x_1)
  Table emit2;   // PooledMC: [N,M,M] p(y_{t+1}|x,y_t); PooledMC2: [N,M,M] p(y_2|x,y_1);
                 // HMC+: [N,N,M] p(y_{t+1}|x_t,x_{t+1})
  Table emit3;   // PooledMC2: [N,M,M,M] p(y_{t+2}|x,y_t,y_{t+1})

  int num_labels() const { return labels.size(); }
  int num_observations() const { return observations.size(); }
};

struct Violation {
  std::string where;    // table / field name, with indices where relevant
  std::string message;  // failed constraint

  std::string str() const { return where + ": " + message; }
};

namespace detail {

inline void check_shape(std::vector<Violation>& out, const Table& t, const char* name,
                        const std::vector<int>& want) {
  if (t.shape() == want) return;
  std::ostringstream os;
  os << "expected shape (";
  for (std::size_t i = 0; i < want.size(); ++i) os << (i ? "," : "") << want[i];
  os << "), got (";
  for (std::size_t i = 0; i < t.shape().size(); ++i) os << (i ? "," : "") << t.shape()[i];
  os << ")";
  out.push_back({name, os.str()});
}

inline void check_rows(std::vector<Violation>& out, const Table& t, const char* name,
                       double tol = 1e-9) {
  for (std::size_t i = 0; i < t.num_slices(); ++i) {
    auto row = t.slice_at(i);
    double s = 0.0;
    bool neg = false;
    for (double v : row) {
      if (!(v >= 0.0)) neg = true;
      s += v;
    }
    if (neg || std::abs(s - 1.0) > tol) {
      std::ostringstream os;
      os << name << "[";
      auto idx = t.slice_index(i);
      for (std::size_t k = 0; k < idx.size(); ++k) os << (k ? "," : "") << idx[k];
      os << "]";
      std::ostringstream msg;
      if (neg)
        msg << "negative entry";
      else
        msg << "row sum " << s << " != 1";
      out.push_back({os.str(), msg.str()});
    }
  }
}

}  // namespace detail

// Structural integrity check. Violations are data, not failures: an empty
// result means every invariant holds.
inline std::vector<Violation> validate(const GenerativeModel& m) {
  std::vector<Violation> v;
  const int n = m.num_labels();
  const int mm = m.num_observations();
  if (n < 1) v.push_back({"labels", "empty label set"});
  if (mm < 1) v.push_back({"observations", "empty observation set"});
  if (n < 1 || mm < 1) return v;

  detail::check_shape(v, m.prior, "prior", {n});
  switch (m.kind) {
    case ModelKind::NaiveBayes:
      detail::check_shape(v, m.emit, "emission", {n, mm});
      break;
    case ModelKind::PooledMC:
      detail::check_shape(v, m.emit, "emission", {n, mm});
      detail::check_shape(v, m.emit2, "emission2", {n, mm, mm});
      break;
    case ModelKind::PooledMC2:
      detail::check_shape(v, m.emit, "emission", {n, mm});
      detail::check_shape(v, m.emit2, "emission2", {n, mm, mm});
      detail::check_shape(v, m.emit3, "emission3", {n, mm, mm, mm});
      break;
    case ModelKind::Hmc:
      detail::check_shape(v, m.trans, "transition", {n, n});
      detail::check_shape(v, m.emit, "emission", {n, mm});
      break;
    case ModelKind::Hmc2:
      detail::check_shape(v, m.trans, "transition", {n, n});
      detail::check_shape(v, m.trans2, "transition2", {n, n, n});
      detail::check_shape(v, m.emit, "emission", {n, mm});
      break;
    case ModelKind::HmcPlus:
      detail::check_shape(v, m.trans, "transition", {n, n});
      detail::check_shape(v, m.emit, "emission", {n, mm});
      detail::check_shape(v, m.emit2, "emission2", {n, n, mm});
      break;
  }
  if (!v.empty()) return v;  // row checks assume shapes are right

  detail::check_rows(v, m.prior, "prior");
  if (!m.trans.empty()) detail::check_rows(v, m.trans, "transition");
  if (!m.trans2.empty()) detail::check_rows(v, m.trans2, "transition2");
  if (!m.emit.empty()) detail::check_rows(v, m.emit, "emission");
  if (!m.emit2.empty()) detail::check_rows(v, m.emit2, "emission2");
  if (!m.emit3.empty()) detail::check_rows(v, m.emit3, "emission3");
  return v;
}

namespace detail {

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

inline void check_sequence(const GenerativeModel& m, const LabeledSequence& seq) {
  require(!seq.obs.featurized(), "discrete observations required for " + std::string(kind_name(m.kind)));
  const int t_len = seq.obs.length();
  require(t_len >= 1, "sequence must have at least one observation");
  const int want_labels = is_class_kind(m.kind) ? 1 : t_len;
  require(static_cast<int>(seq.labels.size()) == want_labels,
          "label count mismatch: got " + std::to_string(seq.labels.size()) + ", want " +
              std::to_string(want_labels));
  for (int x : seq.labels)
    require(x >= 0 && x < m.num_labels(), "label index out of range");
  for (int y : seq.obs.symbols)
    require(y >= 0 && y < m.num_observations(), "observation index out of range");
}

}  // namespace detail

// Exact log p(x, y) under the model's factorization. Returns -inf when any
// factor vanishes.
inline double joint_log_prob(const GenerativeModel& m, const LabeledSequence& seq) {
  detail::check_sequence(m, seq);
  const auto& y = seq.obs.symbols;
  const int t_len = static_cast<int>(y.size());
  double lp = 0.0;
  switch (m.kind) {
    case ModelKind::NaiveBayes: {
      const int x = seq.labels[0];
      lp = log_safe(m.prior(x));
      for (int t = 0; t < t_len; ++t) lp += log_safe(m.emit(x, y[t]));
      break;
    }
    case ModelKind::PooledMC: {
      const int x = seq.labels[0];
      lp = log_safe(m.prior(x)) + log_safe(m.emit(x, y[0]));
      for (int t = 1; t < t_len; ++t) lp += log_safe(m.emit2(x, y[t - 1], y[t]));
      break;
    }
    case ModelKind::PooledMC2: {
      const int x = seq.labels[0];
      lp = log_safe(m.prior(x)) + log_safe(m.emit(x, y[0]));
      if (t_len >= 2) lp += log_safe(m.emit2(x, y[0], y[1]));
      for (int t = 2; t < t_len; ++t) lp += log_safe(m.emit3(x, y[t - 2], y[t - 1], y[t]));
      break;
    }
    case ModelKind::Hmc: {
      const auto& x = seq.labels;
      lp = log_safe(m.prior(x[0])) + log_safe(m.emit(x[0], y[0]));
      for (int t = 1; t < t_len; ++t)
        lp += log_safe(m.trans(x[t - 1], x[t])) + log_safe(m.emit(x[t], y[t]));
      break;
    }
    case ModelKind::Hmc2: {
      const auto& x = seq.labels;
      lp = log_safe(m.prior(x[0])) + log_safe(m.emit(x[0], y[0]));
      if (t_len >= 2) lp += log_safe(m.trans(x[0], x[1])) + log_safe(m.emit(x[1], y[1]));
      for (int t = 2; t < t_len; ++t)
        lp += log_safe(m.trans2(x[t - 2], x[t - 1], x[t])) + log_safe(m.emit(x[t], y[t]));
      break;
    }
    case ModelKind::HmcPlus: {
      const auto& x = seq.labels;
      lp = log_safe(m.prior(x[0])) + log_safe(m.emit(x[0], y[0]));
      for (int t = 1; t < t_len; ++t)
        lp += log_safe(m.trans(x[t - 1], x[t])) + log_safe(m.emit2(x[t - 1], x[t], y[t]));
      break;
    }
  }
  return lp;
}

// Log p(x_{1:T}) (chain kinds) or log p(x) (class kinds): the structural part
// of the joint with all observation factors removed.
inline double structural_log_prob(const GenerativeModel& m, std::span<const int> x) {
  double lp = log_safe(m.prior(x[0]));
  const int t_len = static_cast<int>(x.size());
  switch (m.kind) {
    case ModelKind::NaiveBayes:
    case ModelKind::PooledMC:
    case ModelKind::PooledMC2:
      break;
    case ModelKind::Hmc:
    case ModelKind::HmcPlus:
      for (int t = 1; t < t_len; ++t) lp += log_safe(m.trans(x[t - 1], x[t]));
      break;
    case ModelKind::Hmc2:
      if (t_len >= 2) lp += log_safe(m.trans(x[0], x[1]));
      for (int t = 2; t < t_len; ++t) lp += log_safe(m.trans2(x[t - 2], x[t - 1], x[t]));
      break;
  }
  return lp;
}

// Per-position label marginals p(x_t), t = 1..T, by chain propagation from
// the prior. Class kinds have a single time-invariant marginal p(x).
inline std::vector<Categorical> chain_label_marginals(ModelKind kind, const Table& prior,
                                                      const Table& trans, const Table& trans2,
                                                      int t_len) {
  const int n = prior.extent(0);
  std::vector<Categorical> out;
  out.reserve(static_cast<std::size_t>(t_len));
  Categorical cur(prior.values());
  out.push_back(cur);
  if (is_class_kind(kind)) {
    for (int t = 1; t < t_len; ++t) out.push_back(cur);
    return out;
  }
  if (kind == ModelKind::Hmc2) {
    // propagate the pair joint p(x_{t-1}, x_t)
    Table pair({n, n}, 0.0);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) pair(a, b) = prior(a) * trans(a, b);
    for (int t = 1; t < t_len; ++t) {
      Categorical marg(static_cast<std::size_t>(n), 0.0);
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) marg[static_cast<std::size_t>(b)] += pair(a, b);
      out.push_back(marg);
      if (t + 1 < t_len) {
        Table next({n, n}, 0.0);
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b)
            for (int c = 0; c < n; ++c) next(b, c) += pair(a, b) * trans2(a, b, c);
        pair = std::move(next);
      }
    }
    return out;
  }
  for (int t = 1; t < t_len; ++t) {
    Categorical next(static_cast<std::size_t>(n), 0.0);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) next[static_cast<std::size_t>(b)] += cur[static_cast<std::size_t>(a)] * trans(a, b);
    cur = std::move(next);
    out.push_back(cur);
  }
  return out;
}

// Pair marginals p(x_t, x_{t+1}) for t = 1..T-1 under a first-order chain.
inline std::vector<Table> chain_pair_marginals(const Table& prior, const Table& trans, int t_len) {
  const int n = prior.extent(0);
  auto single = chain_label_marginals(ModelKind::Hmc, prior, trans, Table(), t_len);
  std::vector<Table> out;
  out.reserve(static_cast<std::size_t>(t_len > 0 ? t_len - 1 : 0));
  for (int t = 0; t + 1 < t_len; ++t) {
    Table pair({n, n}, 0.0);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) pair(a, b) = single[static_cast<std::size_t>(t)][static_cast<std::size_t>(a)] * trans(a, b);
    out.push_back(std::move(pair));
  }
  return out;
}

struct KappaLog {
  double value = 0.0;      // log kappa(y); +inf when degenerate
  bool degenerate = false; // some observation factor had zero probability
};

// log kappa(y) = -sum_t log p(y_t | A_y^t), every factor computed exactly
// from the joint. The conditioning contexts per kind:
//   NB:        p(y_t)                       HMC/HMC2: p(y_t) at position t
//   PooledMC:  p(y_t | y_{t-1})             HMC+:     p(y_t) at position t
//   PooledMC2: p(y_t | y_{t-1}, y_{t-2})
// Pooled contexts use the law's canonical positions (the kernels are
// time-homogeneous, so each context shape has one exact conditional); chain
// kinds use position-indexed label marginals.
inline KappaLog kappa_log(const GenerativeModel& m, const std::vector<int>& y) {
  detail::require(!y.empty(), "kappa_log: empty observation sequence");
  for (int v : y)
    detail::require(v >= 0 && v < m.num_observations(), "kappa_log: observation index out of range");
  const int n = m.num_labels();
  const int t_len = static_cast<int>(y.size());
  KappaLog out;
  auto absorb = [&](double p) {
    if (p > 0.0) {
      out.value -= std::log(p);
    } else {
      out.value = std::numeric_limits<double>::infinity();
      out.degenerate = true;
    }
  };

  switch (m.kind) {
    case ModelKind::NaiveBayes: {
      for (int t = 0; t < t_len; ++t) {
        double p = 0.0;
        for (int x = 0; x < n; ++x) p += m.prior(x) * m.emit(x, y[t]);
        absorb(p);
      }
      break;
    }
    case ModelKind::PooledMC: {
      double p1 = 0.0;
      for (int x = 0; x < n; ++x) p1 += m.prior(x) * m.emit(x, y[0]);
      absorb(p1);
      for (int t = 1; t < t_len; ++t) {
        double num = 0.0, den = 0.0;
        for (int x = 0; x < n; ++x) {
          const double w = m.prior(x) * m.emit(x, y[t - 1]);
          den += w;
          num += w * m.emit2(x, y[t - 1], y[t]);
        }
        absorb(den > 0.0 ? num / den : 0.0);
      }
      break;
    }
    case ModelKind::PooledMC2: {
      double p1 = 0.0;
      for (int x = 0; x < n; ++x) p1 += m.prior(x) * m.emit(x, y[0]);
      absorb(p1);
      if (t_len >= 2) {
        double num = 0.0, den = 0.0;
        for (int x = 0; x < n; ++x) {
          const double w = m.prior(x) * m.emit(x, y[0]);
          den += w;
          num += w * m.emit2(x, y[0], y[1]);
        }
        absorb(den > 0.0 ? num / den : 0.0);
      }
      for (int t = 2; t < t_len; ++t) {
        double num = 0.0, den = 0.0;
        for (int x = 0; x < n; ++x) {
          const double w = m.prior(x) * m.emit(x, y[t - 2]) * m.emit2(x, y[t - 2], y[t - 1]);
          den += w;
          num += w * m.emit3(x, y[t - 2], y[t - 1], y[t]);
        }
        absorb(den > 0.0 ? num / den : 0.0);
      }
      break;
    }
    case ModelKind::Hmc:
    case ModelKind::Hmc2: {
      auto marg = chain_label_marginals(m.kind, m.prior, m.trans, m.trans2, t_len);
      for (int t = 0; t < t_len; ++t) {
        double p = 0.0;
        for (int x = 0; x < n; ++x) p += marg[static_cast<std::size_t>(t)][static_cast<std::size_t>(x)] * m.emit(x, y[t]);
        absorb(p);
      }
      break;
    }
    case ModelKind::HmcPlus: {
      double p1 = 0.0;
      for (int x = 0; x < n; ++x) p1 += m.prior(x) * m.emit(x, y[0]);
      absorb(p1);
      auto pairs = chain_pair_marginals(m.prior, m.trans, t_len);
      for (int t = 1; t < t_len; ++t) {
        double p = 0.0;
        const Table& mu = pairs[static_cast<std::size_t>(t - 1)];
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) p += mu(a, b) * m.emit2(a, b, y[t]);
        absorb(p);
      }
      break;
    }
  }
  return out;
}

}  // namespace genclass
