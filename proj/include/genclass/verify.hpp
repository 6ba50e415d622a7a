#pragma once

// Randomized executable checks of the construction-equivalence claims: for
// every kind, discriminative classifiers fed exact inverted units must match
// the generative classifiers and the enumeration oracle, the kappa identity
// must close to 1e-9, and EFB must reproduce classic FB marginals.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "genclass/inference.hpp"
#include "genclass/invert.hpp"
#include "genclass/model.hpp"
#include "genclass/rng.hpp"
#include "genclass/synthgen.hpp"

namespace genclass {

// Strictly positive random model: every table entry drawn uniform in
// [0.1, 1.1) and slice-normalized, so no probability is tiny.
inline GenerativeModel random_model(ModelKind kind, int n, int m, Rng& rng) {
  auto rand_table = [&](std::vector<int> shape) {
    Table t(std::move(shape), 0.0);
    for (std::size_t g = 0; g < t.num_slices(); ++g) {
      auto row = t.slice_at(g);
      for (double& v : row) v = rng.uniform(0.1, 1.1);
      normalize(row);
    }
    return t;
  };
  GenerativeModel model;
  model.kind = kind;
  {
    std::vector<std::string> names;
    for (int i = 0; i < n; ++i) names.push_back("x" + std::to_string(i));
    model.labels = LabelSet(names);
  }
  {
    std::vector<std::string> names;
    for (int i = 0; i < m; ++i) names.push_back("y" + std::to_string(i));
    model.observations = ObsSet(names);
  }
  model.prior = rand_table({n});
  switch (kind) {
    case ModelKind::NaiveBayes:
      model.emit = rand_table({n, m});
      break;
    case ModelKind::PooledMC:
      model.emit = rand_table({n, m});
      model.emit2 = rand_table({n, m, m});
      break;
    case ModelKind::PooledMC2:
      model.emit = rand_table({n, m});
      model.emit2 = rand_table({n, m, m});
      model.emit3 = rand_table({n, m, m, m});
      break;
    case ModelKind::Hmc:
      model.trans = rand_table({n, n});
      model.emit = rand_table({n, m});
      break;
    case ModelKind::Hmc2:
      model.trans = rand_table({n, n});
      model.trans2 = rand_table({n, n, n});
      model.emit = rand_table({n, m});
      break;
    case ModelKind::HmcPlus:
      model.trans = rand_table({n, n});
      model.emit = rand_table({n, m});
      model.emit2 = rand_table({n, n, m});
      break;
  }
  return model;
}

// Sum over t of log p(A_x^t | y_t, A_y^t) - log p(A_x^t | A_y^t), evaluated
// from the units: the ratio product on the right-hand side of the
// posterior-only form of the classifier. x is a full label assignment.
inline double ratio_log_sum(const DiscriminativeUnits& u, const std::vector<int>& x,
                            const ObsSeq& y) {
  const int t_len = y.length();
  double s = 0.0;
  switch (u.kind) {
    case ModelKind::NaiveBayes: {
      const int c = x[0];
      for (int t = 0; t < t_len; ++t) {
        const Categorical p = obs_unit_value(u, u.obs_posterior, y, t);
        s += log_safe(p[static_cast<std::size_t>(c)]) - log_safe(u.prior(c));
      }
      break;
    }
    case ModelKind::PooledMC: {
      const int c = x[0];
      const Categorical p1 = obs_unit_value(u, u.obs_posterior, y, 0);
      s += log_safe(p1[static_cast<std::size_t>(c)]) - log_safe(u.prior(c));
      for (int t = 1; t < t_len; ++t) {
        const Categorical num = detail::ctx2_value(u.obs2_posterior, y, t, t - 1);
        const Categorical den = obs_unit_value(u, u.obs_posterior, y, t - 1);
        s += log_safe(num[static_cast<std::size_t>(c)]) - log_safe(den[static_cast<std::size_t>(c)]);
      }
      break;
    }
    case ModelKind::PooledMC2: {
      const int c = x[0];
      const Categorical p1 = obs_unit_value(u, u.obs_posterior, y, 0);
      s += log_safe(p1[static_cast<std::size_t>(c)]) - log_safe(u.prior(c));
      if (t_len >= 2) {
        const Categorical num = detail::ctx2_value(u.obs2_posterior, y, 1, 0);
        const Categorical den = obs_unit_value(u, u.obs_posterior, y, 0);
        s += log_safe(num[static_cast<std::size_t>(c)]) - log_safe(den[static_cast<std::size_t>(c)]);
      }
      for (int t = 2; t < t_len; ++t) {
        const Categorical num = detail::ctx3_value(u.obs3_posterior, y, t, t - 1, t - 2);
        const Categorical den = detail::ctx2_value(u.obs2_posterior, y, t - 1, t - 2);
        s += log_safe(num[static_cast<std::size_t>(c)]) - log_safe(den[static_cast<std::size_t>(c)]);
      }
      break;
    }
    case ModelKind::Hmc:
    case ModelKind::Hmc2: {
      const auto marg = label_marginals(u, t_len);
      for (int t = 0; t < t_len; ++t) {
        const Categorical post = position_posterior(u, marg, t, y);
        s += log_safe(post[static_cast<std::size_t>(x[static_cast<std::size_t>(t)])]) -
             log_safe(marg[static_cast<std::size_t>(t)][static_cast<std::size_t>(x[static_cast<std::size_t>(t)])]);
      }
      break;
    }
    case ModelKind::HmcPlus: {
      const auto marg = label_marginals(u, t_len);
      const auto pairs = pair_label_marginals(u, t_len);
      const Categorical post = position_posterior(u, marg, 0, y);
      s += log_safe(post[static_cast<std::size_t>(x[0])]) - log_safe(marg[0][static_cast<std::size_t>(x[0])]);
      for (int t = 1; t < t_len; ++t) {
        const Table pp = position_pair_posterior(u, pairs, t, y);
        const int a = x[static_cast<std::size_t>(t - 1)];
        const int b = x[static_cast<std::size_t>(t)];
        s += log_safe(pp(a, b)) - log_safe(pairs[static_cast<std::size_t>(t - 1)](a, b));
      }
      break;
    }
  }
  return s;
}

struct TrialOptions {
  int trials = 100;
  std::uint64_t seed = 1;
  bool sabotage = false;  // corrupt one posterior ratio per trial (self-test)
  int max_labels = 4;
  int max_observations = 5;
};

struct KindReport {
  ModelKind kind = ModelKind::NaiveBayes;
  int trials = 0;
  int equivalence_pass = 0;
  int kappa_pass = 0;
  int oracle_pass = 0;
  int efb_fb_pass = 0;
  bool efb_applicable = false;
  std::vector<std::uint64_t> failing_seeds;

  bool all_pass() const {
    return equivalence_pass == trials && kappa_pass == trials && oracle_pass == trials &&
           (!efb_applicable || efb_fb_pass == trials);
  }
};

struct VerifyReport {
  std::vector<KindReport> kinds;
  bool all_pass() const {
    for (const auto& k : kinds)
      if (!k.all_pass()) return false;
    return true;
  }
  nlohmann::json to_json() const {
    nlohmann::json ks;
    for (const auto& k : kinds) {
      nlohmann::json e = {{"trials", k.trials},
                          {"equivalence_pass", k.equivalence_pass},
                          {"kappa_pass", k.kappa_pass},
                          {"oracle_pass", k.oracle_pass},
                          {"failing_seeds", k.failing_seeds}};
      if (k.efb_applicable) e["efb_fb_pass"] = k.efb_fb_pass;
      ks[kind_name(k.kind)] = e;
    }
    return {{"kinds", ks}, {"all_pass", all_pass()}};
  }
};

namespace detail {

inline double max_abs_diff(const PosteriorMarginals& a, const PosteriorMarginals& b) {
  double d = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t)
    for (std::size_t x = 0; x < a[t].size(); ++x) d = std::max(d, std::abs(a[t][x] - b[t][x]));
  return d;
}

inline Categorical normalized_scores(const std::vector<double>& log_scores) {
  Categorical p(log_scores.size());
  double m = kNegInf;
  for (double v : log_scores) m = std::max(m, v);
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(log_scores[i] - m);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

// Posterior over the class from a class-kind classifier's per-label scores.
template <class ScoreFn>
Categorical class_posterior(int n, ScoreFn score) {
  std::vector<double> ls(static_cast<std::size_t>(n));
  for (int x = 0; x < n; ++x) ls[static_cast<std::size_t>(x)] = score(x);
  return normalized_scores(ls);
}

}  // namespace detail

inline KindReport run_kind_trials(ModelKind kind, const TrialOptions& opt) {
  constexpr double kTol = 1e-9;
  KindReport rep;
  rep.kind = kind;
  rep.trials = opt.trials;
  rep.efb_applicable = kind == ModelKind::Hmc;
  const int kind_index = static_cast<int>(kind);

  for (int trial = 0; trial < opt.trials; ++trial) {
    const std::uint64_t trial_seed =
        Rng::derive(opt.seed, static_cast<std::uint64_t>(kind_index) * 100003u + static_cast<std::uint64_t>(trial));
    Rng rng(trial_seed);
    const int n = 2 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(opt.max_labels - 1));
    const int m = 2 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(opt.max_observations - 1));
    // T <= 7 keeps the HMC MAP enumeration cheap; other kinds go to 8
    const int max_t = kind == ModelKind::Hmc ? 7 : 8;
    const int t_len = 1 + static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(max_t));

    GenerativeModel model = random_model(kind, n, m, rng);
    const ObsSeq y = sample(model, t_len, rng).obs;
    DiscriminativeUnits units = bayes_invert(model);
    if (opt.sabotage) {
      // flip one posterior ratio: scale a unit entry the trial will actually
      // consume, then renormalize the row
      auto row = units.obs_posterior.table.slice_at(static_cast<std::size_t>(y.symbols[0]));
      row[0] *= 1.7;
      normalize(row);
    }

    bool equivalence = true;
    bool kappa_ok = true;
    bool oracle_ok = true;
    bool efb_ok = true;

    try {
      // construction equivalence + posterior oracle
      if (is_class_kind(kind)) {
        DecodeResult gen, dis;
        if (kind == ModelKind::NaiveBayes) {
          gen = nb_classify_generative(model, y);
          dis = nb_classify_discriminative(units, y);
        } else if (kind == ModelKind::PooledMC) {
          gen = pooledmc_classify(model, y);
          dis = pooledmc_classify(units, y);
        } else {
          gen = pooledmc2_classify(model, y);
          dis = pooledmc2_classify(units, y);
        }
        const Categorical oracle = brute_force_posterior(model, y, {0});
        int oties = 0;
        const int oarg = detail::argmax_lowest(oracle, &oties);
        equivalence = gen.labels == dis.labels && gen.labels[0] == oarg;

        // normalized discriminative scores must reproduce the exact posterior
        const Categorical dis_post = detail::class_posterior(n, [&](int x) {
          std::vector<int> xs{x};
          return structural_log_prob(model, xs) + ratio_log_sum(units, xs, y);
        });
        for (int x = 0; x < n; ++x)
          if (std::abs(dis_post[static_cast<std::size_t>(x)] - oracle[static_cast<std::size_t>(x)]) > kTol)
            oracle_ok = false;
      } else {
        const PosteriorMarginals oracle = brute_force_marginals(model, y);
        PosteriorMarginals gen_marg, dis_marg;
        std::vector<int> gen_mpm, dis_mpm;
        if (kind == ModelKind::Hmc) {
          auto fb = hmc_fb_mpm(model, y);
          auto efb = hmc_efb_mpm(units, y);
          gen_marg = fb.marginals;
          dis_marg = efb.marginals;
          gen_mpm = fb.decode.labels;
          dis_mpm = efb.decode.labels;
          if (detail::max_abs_diff(fb.marginals, efb.marginals) > kTol) efb_ok = false;
          // MAP path equivalence against the enumeration oracle
          const DecodeResult vg = hmc_viterbi(model, y);
          const DecodeResult vd = hmc_viterbi(units, y);
          const DecodeResult bf = brute_force_map(model, y);
          if (vg.labels != vd.labels || vg.labels != bf.labels) equivalence = false;
        } else if (kind == ModelKind::Hmc2) {
          auto g = hmc2_mpm(model, y);
          auto d = hmc2_mpm(units, y);
          gen_marg = g.marginals;
          dis_marg = d.marginals;
          gen_mpm = g.decode.labels;
          dis_mpm = d.decode.labels;
        } else {
          auto g = hmcplus_mpm(model, y);
          auto d = hmcplus_mpm(units, y);
          gen_marg = g.marginals;
          dis_marg = d.marginals;
          gen_mpm = g.decode.labels;
          dis_mpm = d.decode.labels;
        }
        if (detail::max_abs_diff(gen_marg, oracle) > kTol) oracle_ok = false;
        if (detail::max_abs_diff(dis_marg, oracle) > kTol) oracle_ok = false;
        std::vector<int> oracle_mpm;
        for (const auto& g : oracle) oracle_mpm.push_back(detail::argmax_lowest(g));
        if (gen_mpm != dis_mpm || gen_mpm != oracle_mpm) equivalence = false;
      }

      // kappa identity on random full assignments
      const KappaLog kl = kappa_log(model, y.symbols);
      for (int rep_i = 0; rep_i < 3 && kappa_ok; ++rep_i) {
        LabeledSequence seq;
        seq.obs = y;
        const int hidden = is_class_kind(kind) ? 1 : t_len;
        for (int t = 0; t < hidden; ++t)
          seq.labels.push_back(static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(n)));
        const double lhs = kl.value + joint_log_prob(model, seq);
        const double rhs = structural_log_prob(model, seq.labels) + ratio_log_sum(units, seq.labels, y);
        if (kl.degenerate || std::abs(lhs - rhs) > kTol) kappa_ok = false;
      }
    } catch (const std::exception&) {
      equivalence = kappa_ok = oracle_ok = efb_ok = false;
    }

    rep.equivalence_pass += equivalence;
    rep.kappa_pass += kappa_ok;
    rep.oracle_pass += oracle_ok;
    rep.efb_fb_pass += efb_ok;
    if (!(equivalence && kappa_ok && oracle_ok && efb_ok)) rep.failing_seeds.push_back(trial_seed);
  }
  return rep;
}

inline VerifyReport run_verification(const TrialOptions& opt) {
  VerifyReport rep;
  for (ModelKind kind : {ModelKind::NaiveBayes, ModelKind::PooledMC, ModelKind::PooledMC2,
                         ModelKind::Hmc, ModelKind::Hmc2, ModelKind::HmcPlus})
    rep.kinds.push_back(run_kind_trials(kind, opt));
  return rep;
}

}  // namespace genclass
