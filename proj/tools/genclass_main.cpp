// genclass command-line front end: sample, fit, predict, eval, verify.
//
// Exit codes: 0 success, 1 verification/validation failure, 2 usage error.
// Reports are machine-readable JSON on stdout; diagnostics go to stderr.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "genclass/dataio.hpp"
#include "genclass/estimation.hpp"
#include "genclass/inference.hpp"
#include "genclass/invert.hpp"
#include "genclass/serialize.hpp"
#include "genclass/synthgen.hpp"
#include "genclass/verify.hpp"

namespace {

using namespace genclass;

const std::vector<std::string> kKindNames = {"nb",      "pooledmc", "pooled_mc", "pooledmc2",
                                             "pooled_mc2", "hmc",   "hmc2",      "hmcplus",
                                             "hmc_plus", "hmc+"};

DataFormat default_format(ModelKind kind, const std::string& path, const std::string& flag) {
  if (flag == "conll") return DataFormat::Conll;
  if (flag == "docs") return DataFormat::Docs;
  if (flag == "jsonl") return DataFormat::Jsonl;
  if (path.size() >= 6 && path.substr(path.size() - 6) == ".jsonl") return DataFormat::Jsonl;
  return is_class_kind(kind) ? DataFormat::Docs : DataFormat::Conll;
}

DataFormat detect_format(const std::string& path, const std::string& flag) {
  if (flag == "conll") return DataFormat::Conll;
  if (flag == "docs") return DataFormat::Docs;
  if (flag == "jsonl") return DataFormat::Jsonl;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  while (std::getline(in, line) && line.empty()) {
  }
  if (!line.empty() && line[0] == '{') return DataFormat::Jsonl;
  const auto tab = line.find('\t');
  if (tab != std::string::npos && line.find(' ', tab + 1) != std::string::npos)
    return DataFormat::Docs;
  return DataFormat::Conll;
}

long count_tokens(const DataFile& file) {
  long tokens = 0;
  for (const auto& s : file.sequences)
    tokens += static_cast<long>(s.tokens.empty() ? s.vectors.size() : s.tokens.size());
  return tokens;
}

struct SampleArgs {
  std::string model_path, out_path, quantized_path;
  int num = 1, len = 1;
  std::uint64_t seed = 0;
  bool feature_task = false;
  int classes = 2, dim = 8;
  double separation = 2.0, noise = 1.0;
};

int cmd_sample(const SampleArgs& a) {
  if (a.feature_task) {
    FeatureTask task = make_feature_task(a.classes, a.dim, a.separation, a.noise, a.num, a.seed);
    DataFile feats;
    feats.format = DataFormat::Jsonl;
    for (const auto& s : task.featurized) {
      RawSequence raw;
      raw.labels.push_back(task.labels.name(s.labels[0]));
      raw.vectors = s.obs.features;
      feats.sequences.push_back(std::move(raw));
    }
    write_data_file(a.out_path, feats);
    if (!a.quantized_path.empty()) {
      DataFile quant;
      quant.format = DataFormat::Docs;
      for (const auto& s : task.quantized) {
        RawSequence raw;
        raw.labels.push_back(task.labels.name(s.labels[0]));
        for (int v : s.obs.symbols) raw.tokens.push_back(task.quantized_obs.name(v));
        quant.sequences.push_back(std::move(raw));
      }
      write_data_file(a.quantized_path, quant);
    }
    std::cout << json{{"sequences", a.num}, {"tokens", a.num}}.dump() << "\n";
    return 0;
  }

  const LoadedModel loaded = load_model_file(a.model_path);
  if (!loaded.model)
    throw std::runtime_error("sample: '" + a.model_path + "' is not a generative model file");
  const GenerativeModel& m = *loaded.model;
  if (auto v = validate(m); !v.empty())
    throw std::runtime_error("sample: invalid model: " + v.front().str());

  const auto corpus = sample_corpus(m, a.num, a.len, a.seed);
  DataFile file;
  file.format = is_class_kind(m.kind) ? DataFormat::Docs : DataFormat::Conll;
  for (const auto& s : corpus) {
    RawSequence raw;
    for (int v : s.obs.symbols) raw.tokens.push_back(m.observations.name(v));
    if (is_class_kind(m.kind)) {
      raw.labels.push_back(m.labels.name(s.labels[0]));
    } else {
      for (int x : s.labels) raw.labels.push_back(m.labels.name(x));
    }
    file.sequences.push_back(std::move(raw));
  }
  write_data_file(a.out_path, file);
  std::cout << json{{"sequences", a.num}, {"tokens", static_cast<long>(a.num) * a.len}}.dump()
            << "\n";
  return 0;
}

struct FitArgs {
  std::string kind_name, data_path, out_path, dev_path, log_path, format = "auto";
  std::string construction = "generative";  // generative | tables | head
  double smoothing = 1.0;
  double lr = 0.1, momentum = 0.0;
  int epochs = 100, batch = 0;
  std::uint64_t seed = 0;
  bool chain_marginals = false;
};

int cmd_fit(const FitArgs& a) {
  const ModelKind kind = kind_from_string(a.kind_name);
  const DataFormat fmt = default_format(kind, a.data_path, a.format);
  const DataFile file = read_data_file(a.data_path, fmt);
  if (file.sequences.empty()) throw std::runtime_error("fit: no sequences in '" + a.data_path + "'");

  TrainConfig cfg;
  cfg.smoothing_alpha = a.smoothing;
  cfg.learning_rate = a.lr;
  cfg.momentum = a.momentum;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch;
  cfg.seed = a.seed;
  cfg.chain_marginals = a.chain_marginals;

  const LabelSet labels = labels_from_data(file);
  std::vector<LabeledSequence> data;

  json report{{"sequences", file.sequences.size()}, {"tokens", count_tokens(file)}};

  if (a.construction == "head") {
    if (fmt != DataFormat::Jsonl)
      throw std::runtime_error("fit: feature-head training needs jsonl feature data");
    for (const auto& raw : file.sequences)
      data.push_back(to_labeled(raw, is_class_kind(kind), labels, ObsSet()));
    HeadTrainResult res = train_feature_head(kind, labels, data, cfg);
    write_json_file(a.out_path, to_json(res.units));
    if (!a.log_path.empty()) {
      std::ofstream log(a.log_path);
      for (const auto& [unit, trace] : res.traces)
        for (std::size_t e = 0; e < trace.size(); ++e)
          log << json{{"unit", unit}, {"epoch", e}, {"loss", trace[e]}}.dump() << "\n";
    }
    for (const auto& [unit, trace] : res.traces) report["final_loss"][unit] = trace.back();
    std::cout << report.dump() << "\n";
    return 0;
  }

  const ObsSet obs = observations_from_data(file);
  for (const auto& raw : file.sequences)
    data.push_back(to_labeled(raw, is_class_kind(kind), labels, obs));

  if (a.construction == "tables") {
    DiscriminativeUnits units = fit_discriminative_tables(kind, labels, obs, data, cfg);
    write_json_file(a.out_path, to_json(units));
  } else {
    GenerativeModel model = fit_generative(kind, labels, obs, data, cfg);
    if (auto v = validate(model); !v.empty())
      throw std::runtime_error("fit: fitted model failed validation: " + v.front().str());
    write_json_file(a.out_path, to_json(model));
    if (!a.dev_path.empty()) {
      const DataFile dev = read_data_file(a.dev_path, fmt);
      std::vector<LabeledSequence> dev_data;
      for (const auto& raw : dev.sequences)
        dev_data.push_back(to_labeled(raw, is_class_kind(kind), labels, obs));
      report["dev_log_likelihood"] = mean_joint_log_prob(model, dev_data);
      report["dev_sequences"] = dev.sequences.size();
    }
  }
  std::cout << report.dump() << "\n";
  return 0;
}

struct PredictArgs {
  std::string model_path, data_path, out_path, format = "auto";
  std::string construction = "generative";  // generative | discriminative
  std::string algorithm = "map";            // map | mpm
};

int cmd_predict(const PredictArgs& a) {
  const LoadedModel loaded = load_model_file(a.model_path);
  std::optional<GenerativeModel> model = loaded.model;
  std::optional<DiscriminativeUnits> units = loaded.units;
  const ModelKind kind = model ? model->kind : units->kind;
  const bool discriminative = a.construction == "discriminative";

  if (discriminative && !units) {
    units = bayes_invert(*model);
    std::cerr << "note: generative model file given; applying exact Bayes inversion\n";
  }
  if (!discriminative && !model)
    throw std::runtime_error(
        "predict: generative construction needs a generative model file "
        "(units files only support --construction discriminative)");

  const LabelSet& labels = discriminative ? units->labels : model->labels;
  const ObsSet& obs = discriminative ? units->observations : model->observations;

  const DataFormat fmt = default_format(kind, a.data_path, a.format);
  DataFile file = read_data_file(a.data_path, fmt);

  for (auto& raw : file.sequences) {
    const LabeledSequence seq = to_labeled(raw, is_class_kind(kind), labels, obs,
                                           /*with_labels=*/false);
    std::vector<int> pred;
    if (is_class_kind(kind)) {
      DecodeResult r;
      if (discriminative) {
        switch (kind) {
          case ModelKind::NaiveBayes: r = nb_classify_discriminative(*units, seq.obs); break;
          case ModelKind::PooledMC: r = pooledmc_classify(*units, seq.obs); break;
          default: r = pooledmc2_classify(*units, seq.obs); break;
        }
      } else {
        switch (kind) {
          case ModelKind::NaiveBayes: r = nb_classify_generative(*model, seq.obs); break;
          case ModelKind::PooledMC: r = pooledmc_classify(*model, seq.obs); break;
          default: r = pooledmc2_classify(*model, seq.obs); break;
        }
      }
      pred = r.labels;
    } else if (a.algorithm == "map") {
      if (kind != ModelKind::Hmc)
        throw std::runtime_error("predict: --algorithm map is available for hmc only; use mpm");
      pred = discriminative ? hmc_viterbi(*units, seq.obs).labels
                            : hmc_viterbi(*model, seq.obs).labels;
    } else {
      MpmResult r;
      if (kind == ModelKind::Hmc)
        r = discriminative ? hmc_efb_mpm(*units, seq.obs) : hmc_fb_mpm(*model, seq.obs);
      else if (kind == ModelKind::Hmc2)
        r = discriminative ? hmc2_mpm(*units, seq.obs) : hmc2_mpm(*model, seq.obs);
      else
        r = discriminative ? hmcplus_mpm(*units, seq.obs) : hmcplus_mpm(*model, seq.obs);
      pred = r.decode.labels;
    }

    raw.labels.clear();
    for (int x : pred) raw.labels.push_back(labels.name(x));
  }

  write_data_file(a.out_path, file);
  std::cout << json{{"sequences", file.sequences.size()}, {"tokens", count_tokens(file)}}.dump()
            << "\n";
  return 0;
}

struct EvalArgs {
  std::string pred_path, gold_path, format = "auto";
};

int cmd_eval(const EvalArgs& a) {
  const DataFormat fmt = detect_format(a.gold_path, a.format);
  const DataFile pred = read_data_file(a.pred_path, fmt);
  const DataFile gold = read_data_file(a.gold_path, fmt);
  const MetricsReport r = evaluate(pred, gold);
  std::cout << r.to_json().dump(2) << "\n";
  return 0;
}

struct VerifyArgs {
  int trials = 100;
  std::uint64_t seed = 1;
  bool sabotage = false;
};

int cmd_verify(const VerifyArgs& a) {
  TrialOptions opt;
  opt.trials = a.trials;
  opt.seed = a.seed;
  opt.sabotage = a.sabotage;
  const VerifyReport rep = run_verification(opt);

  std::cerr << "kind        trials  equivalence  kappa  oracle  efb=fb\n";
  for (const auto& k : rep.kinds) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-11s %6d  %11d  %5d  %6d  %6s\n", kind_name(k.kind),
                  k.trials, k.equivalence_pass, k.kappa_pass, k.oracle_pass,
                  k.efb_applicable ? std::to_string(k.efb_fb_pass).c_str() : "n/a");
    std::cerr << line;
  }
  for (const auto& k : rep.kinds)
    for (auto s : k.failing_seeds)
      std::cerr << "FAIL " << kind_name(k.kind) << " seed=" << s << " (replay with --seed)\n";

  std::cout << rep.to_json().dump(2) << "\n";
  return rep.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generative sequence models with generative and discriminative classifier constructions"};
  app.require_subcommand(1);

  SampleArgs sa;
  auto* sample_cmd = app.add_subcommand("sample", "Sample sequences from a model, or generate the featurized task");
  sample_cmd->add_option("--model", sa.model_path, "generative model JSON");
  sample_cmd->add_option("--num", sa.num, "number of sequences")->check(CLI::PositiveNumber);
  sample_cmd->add_option("--len", sa.len, "sequence length")->check(CLI::PositiveNumber);
  sample_cmd->add_option("--seed", sa.seed, "rng seed");
  sample_cmd->add_option("-o,--out", sa.out_path, "output data file")->required();
  sample_cmd->add_flag("--feature-task", sa.feature_task, "generate the featurized Gaussian task instead");
  sample_cmd->add_option("--classes", sa.classes, "feature task: class count")->check(CLI::Range(2, 1 << 20));
  sample_cmd->add_option("--dim", sa.dim, "feature task: feature dimension")->check(CLI::Range(2, 1 << 20));
  sample_cmd->add_option("--separation", sa.separation, "feature task: class separation");
  sample_cmd->add_option("--noise", sa.noise, "feature task: noise stddev");
  sample_cmd->add_option("--quantized", sa.quantized_path, "feature task: also write quantized docs here");

  FitArgs fa;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model from labeled data");
  fit_cmd->add_option("--kind", fa.kind_name, "model kind")->required()->check(CLI::IsMember(kKindNames));
  fit_cmd->add_option("--data", fa.data_path, "training data")->required();
  fit_cmd->add_option("-o,--out", fa.out_path, "output model JSON")->required();
  fit_cmd->add_option("--construction", fa.construction, "generative | tables | head")
      ->check(CLI::IsMember({"generative", "tables", "head"}));
  fit_cmd->add_option("--smoothing", fa.smoothing, "additive smoothing alpha")->check(CLI::NonNegativeNumber);
  fit_cmd->add_option("--dev", fa.dev_path, "held-out data for log-likelihood report");
  fit_cmd->add_option("--format", fa.format, "conll | docs | jsonl (default by kind)")
      ->check(CLI::IsMember({"auto", "conll", "docs", "jsonl"}));
  fit_cmd->add_option("--lr", fa.lr, "head training: learning rate")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--epochs", fa.epochs, "head training: epochs")->check(CLI::PositiveNumber);
  fit_cmd->add_option("--batch", fa.batch, "head training: batch size (0 = full)")->check(CLI::NonNegativeNumber);
  fit_cmd->add_option("--momentum", fa.momentum, "head training: momentum")->check(CLI::NonNegativeNumber);
  fit_cmd->add_option("--seed", fa.seed, "head training: shuffle seed");
  fit_cmd->add_flag("--chain-marginals", fa.chain_marginals,
                    "HMC-family units: propagate p(x_t) from the chain instead of pooled frequency");
  fit_cmd->add_option("--log", fa.log_path, "head training: write {unit,epoch,loss} JSONL here");

  PredictArgs pa;
  auto* predict_cmd = app.add_subcommand("predict", "Label data with a model");
  predict_cmd->add_option("--model", pa.model_path, "model JSON (generative or units)")->required();
  predict_cmd->add_option("--data", pa.data_path, "input data")->required();
  predict_cmd->add_option("-o,--out", pa.out_path, "predictions file")->required();
  predict_cmd->add_option("--construction", pa.construction, "generative | discriminative")
      ->check(CLI::IsMember({"generative", "discriminative"}));
  predict_cmd->add_option("--algorithm", pa.algorithm, "map | mpm")
      ->check(CLI::IsMember({"map", "mpm"}));
  predict_cmd->add_option("--format", pa.format, "conll | docs | jsonl")
      ->check(CLI::IsMember({"auto", "conll", "docs", "jsonl"}));

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "Compare predictions against gold labels");
  eval_cmd->add_option("--pred", ea.pred_path, "predictions file")->required();
  eval_cmd->add_option("--gold", ea.gold_path, "gold file")->required();
  eval_cmd->add_option("--format", ea.format, "conll | docs | jsonl")
      ->check(CLI::IsMember({"auto", "conll", "docs", "jsonl"}));

  VerifyArgs va;
  auto* verify_cmd = app.add_subcommand("verify", "Run the construction-equivalence checks");
  verify_cmd->add_option("--trials", va.trials, "random models per kind")->check(CLI::PositiveNumber);
  verify_cmd->add_option("--seed", va.seed, "base seed");
  verify_cmd->add_flag("--sabotage", va.sabotage, "inject a fault to self-test the harness");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (sample_cmd->parsed()) {
      if (!sa.feature_task && sa.model_path.empty())
        throw CLI::RequiredError("--model (unless --feature-task)");
      return cmd_sample(sa);
    }
    if (fit_cmd->parsed()) return cmd_fit(fa);
    if (predict_cmd->parsed()) return cmd_predict(pa);
    if (eval_cmd->parsed()) return cmd_eval(ea);
    if (verify_cmd->parsed()) return cmd_verify(va);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
