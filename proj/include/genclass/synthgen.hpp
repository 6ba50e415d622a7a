#pragma once

// Ancestral samplers for all six model kinds and a misspecified featurized
// task generator. Everything draws from the pinned splitmix64 stream in
// rng.hpp, so corpora are reproducible bit for bit.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "genclass/model.hpp"
#include "genclass/rng.hpp"

namespace genclass {

// Draws one sequence in the factorization order of the model's law:
// class kinds draw x then y_1..y_T; chain kinds interleave x_t, y_t in time
// order.
inline LabeledSequence sample(const GenerativeModel& m, int t_len, Rng& rng) {
  if (t_len < 1) throw std::invalid_argument("sample: sequence length must be >= 1");
  LabeledSequence s;
  auto& y = s.obs.symbols;
  y.resize(static_cast<std::size_t>(t_len));
  switch (m.kind) {
    case ModelKind::NaiveBayes: {
      const int x = rng.next_categorical(m.prior.values());
      s.labels = {x};
      for (int t = 0; t < t_len; ++t) y[static_cast<std::size_t>(t)] = rng.next_categorical(m.emit.slice({x}));
      break;
    }
    case ModelKind::PooledMC: {
      const int x = rng.next_categorical(m.prior.values());
      s.labels = {x};
      y[0] = rng.next_categorical(m.emit.slice({x}));
      for (int t = 1; t < t_len; ++t)
        y[static_cast<std::size_t>(t)] = rng.next_categorical(m.emit2.slice({x, y[static_cast<std::size_t>(t - 1)]}));
      break;
    }
    case ModelKind::PooledMC2: {
      const int x = rng.next_categorical(m.prior.values());
      s.labels = {x};
      y[0] = rng.next_categorical(m.emit.slice({x}));
      if (t_len >= 2) y[1] = rng.next_categorical(m.emit2.slice({x, y[0]}));
      for (int t = 2; t < t_len; ++t)
        y[static_cast<std::size_t>(t)] = rng.next_categorical(
            m.emit3.slice({x, y[static_cast<std::size_t>(t - 2)], y[static_cast<std::size_t>(t - 1)]}));
      break;
    }
    case ModelKind::Hmc: {
      auto& x = s.labels;
      x.resize(static_cast<std::size_t>(t_len));
      x[0] = rng.next_categorical(m.prior.values());
      y[0] = rng.next_categorical(m.emit.slice({x[0]}));
      for (int t = 1; t < t_len; ++t) {
        x[static_cast<std::size_t>(t)] = rng.next_categorical(m.trans.slice({x[static_cast<std::size_t>(t - 1)]}));
        y[static_cast<std::size_t>(t)] = rng.next_categorical(m.emit.slice({x[static_cast<std::size_t>(t)]}));
      }
      break;
    }
    case ModelKind::Hmc2: {
      auto& x = s.labels;
      x.resize(static_cast<std::size_t>(t_len));
      x[0] = rng.next_categorical(m.prior.values());
      y[0] = rng.next_categorical(m.emit.slice({x[0]}));
      if (t_len >= 2) {
        x[1] = rng.next_categorical(m.trans.slice({x[0]}));
        y[1] = rng.next_categorical(m.emit.slice({x[1]}));
      }
      for (int t = 2; t < t_len; ++t) {
        x[static_cast<std::size_t>(t)] = rng.next_categorical(
            m.trans2.slice({x[static_cast<std::size_t>(t - 2)], x[static_cast<std::size_t>(t - 1)]}));
        y[static_cast<std::size_t>(t)] = rng.next_categorical(m.emit.slice({x[static_cast<std::size_t>(t)]}));
      }
      break;
    }
    case ModelKind::HmcPlus: {
      auto& x = s.labels;
      x.resize(static_cast<std::size_t>(t_len));
      x[0] = rng.next_categorical(m.prior.values());
      y[0] = rng.next_categorical(m.emit.slice({x[0]}));
      for (int t = 1; t < t_len; ++t) {
        x[static_cast<std::size_t>(t)] = rng.next_categorical(m.trans.slice({x[static_cast<std::size_t>(t - 1)]}));
        y[static_cast<std::size_t>(t)] = rng.next_categorical(
            m.emit2.slice({x[static_cast<std::size_t>(t - 1)], x[static_cast<std::size_t>(t)]}));
      }
      break;
    }
  }
  return s;
}

// One derived stream per sequence (seed + index hashed), so corpora can be
// sampled in parallel without changing the output.
inline std::vector<LabeledSequence> sample_corpus(const GenerativeModel& m, int count, int t_len,
                                                  std::uint64_t seed) {
  std::vector<LabeledSequence> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(i)));
    out.push_back(sample(m, t_len, rng));
  }
  return out;
}

// Label-conditional Gaussian-mixture features plus a 2-bin-per-dimension
// quantization of the same draws. The mixture means sit at
// offset + (separation/2) * s_c / sqrt(d) with sign codes s_c per class; the
// offset pushes both classes onto the same side of the quantization
// threshold, so the coarse symbols lose most of the class structure while
// the raw vectors keep it.
struct FeatureTask {
  LabelSet labels;
  ObsSet quantized_obs;                      // d:{lo,hi} symbols, 2 per dimension
  std::vector<LabeledSequence> featurized;   // one feature vector per example
  std::vector<LabeledSequence> quantized;    // d tokens per example
};

inline FeatureTask make_feature_task(int n_classes, int dim, double separation, double noise,
                                     int count, std::uint64_t seed) {
  if (n_classes < 2) throw std::invalid_argument("make_feature_task: n_classes must be >= 2");
  if (dim < 2) throw std::invalid_argument("make_feature_task: dim must be >= 2");
  if (count < 1) throw std::invalid_argument("make_feature_task: count must be >= 1");

  constexpr double kBinOffset = 2.0;  // pushes means past the quantization threshold at 0

  FeatureTask task;
  {
    std::vector<std::string> names;
    for (int c = 0; c < n_classes; ++c) names.push_back("c" + std::to_string(c));
    task.labels = LabelSet(names);
  }
  {
    std::vector<std::string> names;
    for (int j = 0; j < dim; ++j) {
      names.push_back("d" + std::to_string(j) + ":lo");
      names.push_back("d" + std::to_string(j) + ":hi");
    }
    task.quantized_obs = ObsSet(names);
  }

  Rng rng(seed);

  // per-class sign codes, rejection-sampled until all pairs differ in at
  // least dim/4 coordinates (keeps class separation from degenerating)
  std::vector<std::vector<int>> code(static_cast<std::size_t>(n_classes));
  for (int c = 0; c < n_classes; ++c) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      std::vector<int> cand(static_cast<std::size_t>(dim));
      for (int j = 0; j < dim; ++j) cand[static_cast<std::size_t>(j)] = (rng.next_u64() & 1u) ? 1 : -1;
      bool ok = true;
      for (int o = 0; o < c && ok; ++o) {
        int hamming = 0;
        for (int j = 0; j < dim; ++j) hamming += code[static_cast<std::size_t>(o)][static_cast<std::size_t>(j)] != cand[static_cast<std::size_t>(j)];
        ok = hamming * 4 >= dim;
      }
      if (ok) {
        code[static_cast<std::size_t>(c)] = std::move(cand);
        break;
      }
    }
    if (code[static_cast<std::size_t>(c)].empty())
      throw std::runtime_error("make_feature_task: could not place distinct class codes (dim too small?)");
  }

  const double scale = 0.5 * separation / std::sqrt(static_cast<double>(dim));
  for (int i = 0; i < count; ++i) {
    const int c = static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(n_classes));
    std::vector<double> f(static_cast<std::size_t>(dim));
    std::vector<int> toks(static_cast<std::size_t>(dim));
    for (int j = 0; j < dim; ++j) {
      const double mean = kBinOffset + scale * code[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)];
      const double v = mean + noise * rng.next_gaussian();
      f[static_cast<std::size_t>(j)] = v;
      toks[static_cast<std::size_t>(j)] = 2 * j + (v > 0.0 ? 1 : 0);
    }
    LabeledSequence feat;
    feat.labels = {c};
    feat.obs.features.push_back(std::move(f));
    task.featurized.push_back(std::move(feat));
    LabeledSequence quant;
    quant.labels = {c};
    quant.obs.symbols = std::move(toks);
    task.quantized.push_back(std::move(quant));
  }
  return task;
}

}  // namespace genclass
