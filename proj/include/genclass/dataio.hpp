#pragma once

// Data file formats and counting metrics.
//
//  conll  chain kinds: one "token<TAB>label" per line, blank line between
//         sequences; the label column may be absent on unlabeled input.
//  docs   class kinds: one document per line, "label<TAB>tok1 tok2 ...".
//  jsonl  featurized data: {"label": ...} or {"labels": [...]}, plus
//         "vectors": [[...], ...], one object per line.
//
// Parsing keeps the raw token strings so prediction output can reproduce the
// token columns byte for byte.

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "genclass/alphabet.hpp"
#include "genclass/model.hpp"

namespace genclass {

enum class DataFormat : std::uint8_t { Conll, Docs, Jsonl };

struct RawSequence {
  std::vector<std::string> tokens;            // conll: per position; docs: document tokens
  std::vector<std::string> labels;            // conll: per position; docs/jsonl class: single
  std::vector<std::vector<double>> vectors;   // jsonl only
};

struct DataFile {
  DataFormat format = DataFormat::Conll;
  std::vector<RawSequence> sequences;
};

namespace detail {

inline std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

}  // namespace detail

inline DataFile read_data_file(const std::string& path, DataFormat format) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  DataFile file;
  file.format = format;
  std::string line;
  std::size_t line_no = 0;

  if (format == DataFormat::Conll) {
    RawSequence cur;
    auto flush = [&] {
      if (!cur.tokens.empty()) file.sequences.push_back(std::move(cur));
      cur = RawSequence{};
    };
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) {
        flush();
        continue;
      }
      const auto tab = line.find('\t');
      if (tab == std::string::npos) {
        cur.tokens.push_back(line);
        cur.labels.emplace_back();
      } else {
        cur.tokens.push_back(line.substr(0, tab));
        cur.labels.push_back(line.substr(tab + 1));
      }
    }
    flush();
  } else if (format == DataFormat::Docs) {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": expected 'label<TAB>tokens...'");
      RawSequence s;
      s.labels.push_back(line.substr(0, tab));
      s.tokens = detail::split_ws(line.substr(tab + 1));
      if (s.tokens.empty())
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": document has no tokens");
      file.sequences.push_back(std::move(s));
    }
  } else {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
      }
      RawSequence s;
      if (j.contains("labels"))
        s.labels = j.at("labels").get<std::vector<std::string>>();
      else if (j.contains("label"))
        s.labels.push_back(j.at("label").get<std::string>());
      if (!j.contains("vectors"))
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": missing 'vectors'");
      s.vectors = j.at("vectors").get<std::vector<std::vector<double>>>();
      if (s.vectors.empty())
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": empty 'vectors'");
      file.sequences.push_back(std::move(s));
    }
  }
  return file;
}

inline void write_data_file(const std::string& path, const DataFile& file) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  if (file.format == DataFormat::Conll) {
    bool first = true;
    for (const auto& s : file.sequences) {
      if (!first) out << "\n";
      first = false;
      for (std::size_t t = 0; t < s.tokens.size(); ++t) {
        out << s.tokens[t];
        if (t < s.labels.size() && !s.labels[t].empty()) out << "\t" << s.labels[t];
        out << "\n";
      }
    }
  } else if (file.format == DataFormat::Docs) {
    for (const auto& s : file.sequences) {
      out << (s.labels.empty() ? "" : s.labels[0]);
      out << "\t";
      for (std::size_t t = 0; t < s.tokens.size(); ++t) out << (t ? " " : "") << s.tokens[t];
      out << "\n";
    }
  } else {
    for (const auto& s : file.sequences) {
      nlohmann::json j;
      if (s.labels.size() == 1)
        j["label"] = s.labels[0];
      else if (!s.labels.empty())
        j["labels"] = s.labels;
      j["vectors"] = s.vectors;
      out << j.dump() << "\n";
    }
  }
}

// Alphabets from labeled data (sorted for stable indexing independent of
// file order).
inline LabelSet labels_from_data(const DataFile& file) {
  std::set<std::string> names;
  for (const auto& s : file.sequences)
    for (const auto& l : s.labels)
      if (!l.empty()) names.insert(l);
  if (names.empty()) throw std::runtime_error("no labels found in data");
  return LabelSet(std::vector<std::string>(names.begin(), names.end()));
}

inline ObsSet observations_from_data(const DataFile& file) {
  std::set<std::string> names;
  for (const auto& s : file.sequences)
    for (const auto& t : s.tokens) names.insert(t);
  if (names.empty()) throw std::runtime_error("no tokens found in data");
  return ObsSet(std::vector<std::string>(names.begin(), names.end()));
}

// Raw sequence -> indexed LabeledSequence. class_task selects whether labels
// are per document or per position. with_labels=false skips labels (predict
// input).
inline LabeledSequence to_labeled(const RawSequence& raw, bool class_task, const LabelSet& labels,
                                  const ObsSet& obs, bool with_labels = true) {
  LabeledSequence out;
  if (!raw.vectors.empty()) {
    out.obs.features = raw.vectors;
  } else {
    out.obs.symbols.reserve(raw.tokens.size());
    for (const auto& t : raw.tokens) out.obs.symbols.push_back(obs.index_or_throw(t));
  }
  if (with_labels) {
    if (class_task) {
      if (raw.labels.empty() || raw.labels[0].empty())
        throw std::runtime_error("sequence is missing its class label");
      out.labels.push_back(labels.index_or_throw(raw.labels[0]));
    } else {
      if (raw.labels.size() != static_cast<std::size_t>(out.obs.length()))
        throw std::runtime_error("sequence labels do not cover every position");
      for (const auto& l : raw.labels) {
        if (l.empty()) throw std::runtime_error("sequence has an unlabeled position");
        out.labels.push_back(labels.index_or_throw(l));
      }
    }
  }
  return out;
}

// ---- metrics ----------------------------------------------------------------

struct LabelStats {
  long tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct MetricsReport {
  long correct = 0;
  long total = 0;
  long sequences = 0;
  double accuracy = 0.0;
  std::map<std::string, LabelStats> per_label;

  nlohmann::json to_json() const {
    nlohmann::json per;
    for (const auto& [name, st] : per_label)
      per[name] = {{"tp", st.tp},       {"fp", st.fp},         {"fn", st.fn},
                   {"precision", st.precision}, {"recall", st.recall}, {"f1", st.f1}};
    return {{"accuracy", accuracy}, {"correct", correct},   {"tokens", total},
            {"sequences", sequences}, {"per_label", per}};
  }
};

// Exact counting metrics over aligned prediction/gold files. Labels compare
// per position (conll) or per document (docs/jsonl).
inline MetricsReport evaluate(const DataFile& pred, const DataFile& gold) {
  if (pred.sequences.size() != gold.sequences.size())
    throw std::runtime_error("eval: sequence count mismatch: " + std::to_string(pred.sequences.size()) +
                             " vs " + std::to_string(gold.sequences.size()));
  MetricsReport r;
  r.sequences = static_cast<long>(gold.sequences.size());
  for (std::size_t i = 0; i < gold.sequences.size(); ++i) {
    const auto& p = pred.sequences[i].labels;
    const auto& g = gold.sequences[i].labels;
    if (p.size() != g.size())
      throw std::runtime_error("eval: label count mismatch at sequence " + std::to_string(i + 1) +
                               ": " + std::to_string(p.size()) + " vs " + std::to_string(g.size()));
    for (std::size_t t = 0; t < g.size(); ++t) {
      if (g[t].empty() || p[t].empty())
        throw std::runtime_error("eval: missing label at sequence " + std::to_string(i + 1) +
                                 ", position " + std::to_string(t + 1));
      ++r.total;
      if (p[t] == g[t]) {
        ++r.correct;
        ++r.per_label[g[t]].tp;
      } else {
        ++r.per_label[p[t]].fp;
        ++r.per_label[g[t]].fn;
      }
    }
  }
  r.accuracy = r.total > 0 ? static_cast<double>(r.correct) / static_cast<double>(r.total) : 0.0;
  for (auto& [name, st] : r.per_label) {
    st.precision = (st.tp + st.fp) > 0 ? static_cast<double>(st.tp) / static_cast<double>(st.tp + st.fp) : 0.0;
    st.recall = (st.tp + st.fn) > 0 ? static_cast<double>(st.tp) / static_cast<double>(st.tp + st.fn) : 0.0;
    st.f1 = (st.precision + st.recall) > 0.0
                ? 2.0 * st.precision * st.recall / (st.precision + st.recall)
                : 0.0;
  }
  return r;
}

}  // namespace genclass
