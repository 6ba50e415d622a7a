#pragma once

// Exact inversion of a discrete generative model into the discriminative
// units of the same joint. Posterior tables land at the law's canonical
// context positions; chain kinds get ChainPropagated marginals so that
// position-t quantities are recovered exactly downstream.

#include <stdexcept>
#include <string>
#include <vector>

#include "genclass/model.hpp"
#include "genclass/units.hpp"

namespace genclass {

namespace detail {

// Contexts with zero probability under the model cannot be conditioned on;
// their rows are unidentifiable and filled uniform by convention. They are
// never produced by the model itself.
inline void fill_posterior_row(std::span<double> row, double norm) {
  if (norm > 0.0) {
    for (double& v : row) v /= norm;
  } else {
    const double u = 1.0 / static_cast<double>(row.size());
    for (double& v : row) v = u;
  }
}

// True iff some label outside the prior's support still gains chain mass at
// a later position. Inversion through the position-1 posterior would lose
// that label's observation weights.
inline bool prior_loses_reachable_mass(const GenerativeModel& m) {
  const int n = m.num_labels();
  std::vector<char> in_prior(static_cast<std::size_t>(n), 0);
  for (int x = 0; x < n; ++x) in_prior[static_cast<std::size_t>(x)] = m.prior(x) > 0.0;

  std::vector<char> reach = in_prior;
  if (m.kind == ModelKind::Hmc2) {
    // pair-state closure under (x_2|x_1) then (x_{t+2}|x_t,x_{t+1})
    std::vector<char> pair(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        if (m.prior(a) > 0.0 && m.trans(a, b) > 0.0) {
          pair[static_cast<std::size_t>(a * n + b)] = 1;
          reach[static_cast<std::size_t>(b)] = 1;
        }
    bool grew = true;
    while (grew) {
      grew = false;
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
          if (!pair[static_cast<std::size_t>(a * n + b)]) continue;
          for (int c = 0; c < n; ++c)
            if (m.trans2(a, b, c) > 0.0 && !pair[static_cast<std::size_t>(b * n + c)]) {
              pair[static_cast<std::size_t>(b * n + c)] = 1;
              reach[static_cast<std::size_t>(c)] = 1;
              grew = true;
            }
        }
    }
  } else if (is_chain_kind(m.kind)) {
    bool grew = true;
    while (grew) {
      grew = false;
      for (int a = 0; a < n; ++a) {
        if (!reach[static_cast<std::size_t>(a)]) continue;
        for (int b = 0; b < n; ++b)
          if (m.trans(a, b) > 0.0 && !reach[static_cast<std::size_t>(b)]) {
            reach[static_cast<std::size_t>(b)] = 1;
            grew = true;
          }
      }
    }
  }
  for (int x = 0; x < n; ++x)
    if (reach[static_cast<std::size_t>(x)] && !in_prior[static_cast<std::size_t>(x)]) return true;
  return false;
}

}  // namespace detail

inline DiscriminativeUnits bayes_invert(const GenerativeModel& m) {
  if (auto v = validate(m); !v.empty())
    throw std::invalid_argument("bayes_invert: invalid model: " + v.front().str());

  const int n = m.num_labels();
  const int mm = m.num_observations();

  DiscriminativeUnits u;
  u.kind = m.kind;
  u.labels = m.labels;
  u.observations = m.observations;
  u.prior = m.prior;
  u.marginal_mode = MarginalMode::ChainPropagated;

  if (is_chain_kind(m.kind) && detail::prior_loses_reachable_mass(m))
    throw std::domain_error(
        "bayes_invert: zero prior marginal p(x_1) for a label reachable at later positions "
        "(posterior unit p(x_t|y_t) would be lossy)");

  // single-observation posterior: p(x|y) (NB family) / p(x_1|y_1) (chain)
  {
    Table p1({mm, n}, 0.0);
    for (int v = 0; v < mm; ++v) {
      double norm = 0.0;
      for (int x = 0; x < n; ++x) {
        const double w = m.prior(x) * m.emit(x, v);
        p1(v, x) = w;
        norm += w;
      }
      detail::fill_posterior_row(p1.slice({v}), norm);
    }
    u.obs_posterior.table = std::move(p1);
  }

  switch (m.kind) {
    case ModelKind::NaiveBayes:
      break;
    case ModelKind::PooledMC:
    case ModelKind::PooledMC2: {
      // p(x | y_2, y_1), context order (current, previous)
      Table p2({mm, mm, n}, 0.0);
      for (int cur = 0; cur < mm; ++cur)
        for (int prev = 0; prev < mm; ++prev) {
          double norm = 0.0;
          for (int x = 0; x < n; ++x) {
            const double w = m.prior(x) * m.emit(x, prev) * m.emit2(x, prev, cur);
            p2(cur, prev, x) = w;
            norm += w;
          }
          detail::fill_posterior_row(p2.slice({cur, prev}), norm);
        }
      u.obs2_posterior.table = std::move(p2);
      if (m.kind == ModelKind::PooledMC2) {
        // p(x | y_3, y_2, y_1), context order (current, previous, previous2)
        Table p3({mm, mm, mm, n}, 0.0);
        for (int cur = 0; cur < mm; ++cur)
          for (int prev = 0; prev < mm; ++prev)
            for (int prev2 = 0; prev2 < mm; ++prev2) {
              double norm = 0.0;
              for (int x = 0; x < n; ++x) {
                const double w = m.prior(x) * m.emit(x, prev2) * m.emit2(x, prev2, prev) *
                                 m.emit3(x, prev2, prev, cur);
                p3(cur, prev, prev2, x) = w;
                norm += w;
              }
              detail::fill_posterior_row(p3.slice({cur, prev, prev2}), norm);
            }
        u.obs3_posterior.table = std::move(p3);
      }
      break;
    }
    case ModelKind::Hmc:
    case ModelKind::Hmc2:
      u.trans = m.trans;
      if (m.kind == ModelKind::Hmc2) u.trans2 = m.trans2;
      break;
    case ModelKind::HmcPlus: {
      u.trans = m.trans;
      // p(x_1, x_2 | y_2): reference pair marginal is p(x_1, x_2)
      Table qp({mm, n, n}, 0.0);
      const std::size_t group = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
      for (int v = 0; v < mm; ++v) {
        double norm = 0.0;
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) {
            const double w = m.prior(a) * m.trans(a, b) * m.emit2(a, b, v);
            qp(v, a, b) = w;
            norm += w;
          }
        std::span<double> row(qp.values().data() + static_cast<std::size_t>(v) * group, group);
        detail::fill_posterior_row(row, norm);
      }
      u.pair_posterior.table = std::move(qp);
      break;
    }
  }
  return u;
}

}  // namespace genclass
