#pragma once

// Model file I/O. One JSON schema covers both generative models and
// discriminative units:
//   {schema_version, type, kind, labels, observations, tables{...}}
// with tables as nested arrays in row-major order. Feature heads serialize
// as {d, W, b}.

#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "genclass/model.hpp"
#include "genclass/units.hpp"

namespace genclass {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

inline ModelKind kind_from_string(const std::string& s) {
  if (s == "nb" || s == "naive_bayes") return ModelKind::NaiveBayes;
  if (s == "pooled_mc" || s == "pooledmc") return ModelKind::PooledMC;
  if (s == "pooled_mc2" || s == "pooledmc2") return ModelKind::PooledMC2;
  if (s == "hmc") return ModelKind::Hmc;
  if (s == "hmc2") return ModelKind::Hmc2;
  if (s == "hmc_plus" || s == "hmcplus" || s == "hmc+") return ModelKind::HmcPlus;
  throw std::runtime_error("unknown model kind '" + s + "'");
}

namespace detail {

inline json table_to_nested(const Table& t, std::size_t axis = 0, std::size_t offset = 0) {
  const auto extent = static_cast<std::size_t>(t.shape()[axis]);
  std::size_t stride = 1;
  for (std::size_t a = axis + 1; a < t.shape().size(); ++a) stride *= static_cast<std::size_t>(t.shape()[a]);
  json arr = json::array();
  if (axis + 1 == t.shape().size()) {
    for (std::size_t i = 0; i < extent; ++i) arr.push_back(t.values()[offset + i]);
  } else {
    for (std::size_t i = 0; i < extent; ++i)
      arr.push_back(table_to_nested(t, axis + 1, offset + i * stride));
  }
  return arr;
}

inline void nested_to_flat(const json& j, const std::vector<int>& shape, std::size_t axis,
                           std::vector<double>& out, const std::string& name) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(shape[axis]))
    throw std::runtime_error("table '" + name + "': axis " + std::to_string(axis) +
                             " expected length " + std::to_string(shape[axis]));
  if (axis + 1 == shape.size()) {
    for (const auto& v : j) {
      if (!v.is_number()) throw std::runtime_error("table '" + name + "': non-numeric entry");
      out.push_back(v.get<double>());
    }
  } else {
    for (const auto& v : j) nested_to_flat(v, shape, axis + 1, out, name);
  }
}

inline Table table_from_nested(const json& j, std::vector<int> shape, const std::string& name) {
  std::vector<double> flat;
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  flat.reserve(n);
  nested_to_flat(j, shape, 0, flat, name);
  Table t(std::move(shape), 0.0);
  t.values() = std::move(flat);
  return t;
}

inline json head_to_json(const FeatureHead& h) {
  json w = json::array();
  for (int k = 0; k < h.out_dim; ++k) {
    json row = json::array();
    for (int j = 0; j < h.input_dim; ++j)
      row.push_back(h.w[static_cast<std::size_t>(k) * static_cast<std::size_t>(h.input_dim) + static_cast<std::size_t>(j)]);
    w.push_back(row);
  }
  return json{{"d", h.input_dim}, {"W", w}, {"b", h.b}};
}

inline FeatureHead head_from_json(const json& j, const std::string& name) {
  if (!j.contains("d") || !j.contains("W") || !j.contains("b"))
    throw std::runtime_error("head '" + name + "': needs fields d, W, b");
  FeatureHead h;
  h.input_dim = j.at("d").get<int>();
  const auto& w = j.at("W");
  if (!w.is_array() || w.empty()) throw std::runtime_error("head '" + name + "': W must be a non-empty matrix");
  h.out_dim = static_cast<int>(w.size());
  for (const auto& row : w) {
    if (!row.is_array() || static_cast<int>(row.size()) != h.input_dim)
      throw std::runtime_error("head '" + name + "': W rows must have length d");
    for (const auto& v : row) h.w.push_back(v.get<double>());
  }
  h.b = j.at("b").get<std::vector<double>>();
  if (static_cast<int>(h.b.size()) != h.out_dim)
    throw std::runtime_error("head '" + name + "': b length must match W rows");
  return h;
}

inline json unit_to_json(const PosteriorUnit& u) {
  if (u.is_head()) return json{{"head", head_to_json(*u.head)}};
  return table_to_nested(u.table);
}

inline PosteriorUnit unit_from_json(const json& j, std::vector<int> shape, const std::string& name) {
  PosteriorUnit u;
  if (j.is_object() && j.contains("head")) {
    u.head = head_from_json(j.at("head"), name);
  } else {
    u.table = table_from_nested(j, std::move(shape), name);
  }
  return u;
}

inline const json& need(const json& j, const char* key) {
  if (!j.contains(key)) throw std::runtime_error(std::string("model file: missing field '") + key + "'");
  return j.at(key);
}

}  // namespace detail

inline json to_json(const GenerativeModel& m) {
  json tables;
  tables["prior"] = detail::table_to_nested(m.prior);
  if (!m.trans.empty()) tables["transition"] = detail::table_to_nested(m.trans);
  if (!m.trans2.empty()) tables["transition2"] = detail::table_to_nested(m.trans2);
  if (!m.emit.empty()) tables["emission"] = detail::table_to_nested(m.emit);
  if (!m.emit2.empty()) tables["emission2"] = detail::table_to_nested(m.emit2);
  if (!m.emit3.empty()) tables["emission3"] = detail::table_to_nested(m.emit3);
  return json{{"schema_version", kSchemaVersion},
              {"type", "generative"},
              {"kind", kind_name(m.kind)},
              {"labels", m.labels.names()},
              {"observations", m.observations.names()},
              {"tables", tables}};
}

inline json to_json(const DiscriminativeUnits& u) {
  json tables;
  tables["prior"] = detail::table_to_nested(u.prior);
  if (!u.trans.empty()) tables["transition"] = detail::table_to_nested(u.trans);
  if (!u.trans2.empty()) tables["transition2"] = detail::table_to_nested(u.trans2);
  if (!u.empirical_marginal.empty())
    tables["empirical_marginal"] = detail::table_to_nested(u.empirical_marginal);
  if (!u.empirical_pair.empty()) tables["empirical_pair"] = detail::table_to_nested(u.empirical_pair);
  if (u.obs_posterior.defined()) tables["obs_posterior"] = detail::unit_to_json(u.obs_posterior);
  if (u.obs2_posterior.defined()) tables["obs2_posterior"] = detail::unit_to_json(u.obs2_posterior);
  if (u.obs3_posterior.defined()) tables["obs3_posterior"] = detail::unit_to_json(u.obs3_posterior);
  if (u.pair_posterior.defined()) tables["pair_posterior"] = detail::unit_to_json(u.pair_posterior);
  return json{{"schema_version", kSchemaVersion},
              {"type", "discriminative_units"},
              {"kind", kind_name(u.kind)},
              {"labels", u.labels.names()},
              {"observations", u.observations.names()},
              {"marginal_mode",
               u.marginal_mode == MarginalMode::ChainPropagated ? "chain" : "empirical"},
              {"tables", tables}};
}

namespace detail {

inline void check_header(const json& j) {
  const auto& ver = need(j, "schema_version");
  if (!ver.is_number_integer() || ver.get<int>() != kSchemaVersion)
    throw std::runtime_error("model file: unsupported schema_version");
}

}  // namespace detail

inline GenerativeModel generative_from_json(const json& j) {
  detail::check_header(j);
  if (detail::need(j, "type").get<std::string>() != "generative")
    throw std::runtime_error("model file: expected type 'generative'");
  GenerativeModel m;
  m.kind = kind_from_string(detail::need(j, "kind").get<std::string>());
  m.labels = LabelSet(detail::need(j, "labels").get<std::vector<std::string>>());
  m.observations = ObsSet(detail::need(j, "observations").get<std::vector<std::string>>());
  const int n = m.num_labels();
  const int mm = m.num_observations();
  const auto& tables = detail::need(j, "tables");
  m.prior = detail::table_from_nested(detail::need(tables, "prior"), {n}, "prior");
  switch (m.kind) {
    case ModelKind::NaiveBayes:
      m.emit = detail::table_from_nested(detail::need(tables, "emission"), {n, mm}, "emission");
      break;
    case ModelKind::PooledMC:
    case ModelKind::PooledMC2:
      m.emit = detail::table_from_nested(detail::need(tables, "emission"), {n, mm}, "emission");
      m.emit2 = detail::table_from_nested(detail::need(tables, "emission2"), {n, mm, mm}, "emission2");
      if (m.kind == ModelKind::PooledMC2)
        m.emit3 = detail::table_from_nested(detail::need(tables, "emission3"), {n, mm, mm, mm}, "emission3");
      break;
    case ModelKind::Hmc:
    case ModelKind::Hmc2:
      m.trans = detail::table_from_nested(detail::need(tables, "transition"), {n, n}, "transition");
      if (m.kind == ModelKind::Hmc2)
        m.trans2 = detail::table_from_nested(detail::need(tables, "transition2"), {n, n, n}, "transition2");
      m.emit = detail::table_from_nested(detail::need(tables, "emission"), {n, mm}, "emission");
      break;
    case ModelKind::HmcPlus:
      m.trans = detail::table_from_nested(detail::need(tables, "transition"), {n, n}, "transition");
      m.emit = detail::table_from_nested(detail::need(tables, "emission"), {n, mm}, "emission");
      m.emit2 = detail::table_from_nested(detail::need(tables, "emission2"), {n, n, mm}, "emission2");
      break;
  }
  return m;
}

inline DiscriminativeUnits units_from_json(const json& j) {
  detail::check_header(j);
  if (detail::need(j, "type").get<std::string>() != "discriminative_units")
    throw std::runtime_error("model file: expected type 'discriminative_units'");
  DiscriminativeUnits u;
  u.kind = kind_from_string(detail::need(j, "kind").get<std::string>());
  u.labels = LabelSet(detail::need(j, "labels").get<std::vector<std::string>>());
  const auto obs_names = detail::need(j, "observations").get<std::vector<std::string>>();
  if (!obs_names.empty()) u.observations = ObsSet(obs_names);
  const std::string mode = detail::need(j, "marginal_mode").get<std::string>();
  if (mode == "chain")
    u.marginal_mode = MarginalMode::ChainPropagated;
  else if (mode == "empirical")
    u.marginal_mode = MarginalMode::Empirical;
  else
    throw std::runtime_error("model file: unknown marginal_mode '" + mode + "'");

  const int n = u.num_labels();
  const int mm = u.observations.size();
  const auto& tables = detail::need(j, "tables");
  u.prior = detail::table_from_nested(detail::need(tables, "prior"), {n}, "prior");
  if (tables.contains("transition"))
    u.trans = detail::table_from_nested(tables.at("transition"), {n, n}, "transition");
  if (tables.contains("transition2"))
    u.trans2 = detail::table_from_nested(tables.at("transition2"), {n, n, n}, "transition2");
  if (tables.contains("empirical_marginal"))
    u.empirical_marginal = detail::table_from_nested(tables.at("empirical_marginal"), {n}, "empirical_marginal");
  if (tables.contains("empirical_pair"))
    u.empirical_pair = detail::table_from_nested(tables.at("empirical_pair"), {n, n}, "empirical_pair");
  if (tables.contains("obs_posterior"))
    u.obs_posterior = detail::unit_from_json(tables.at("obs_posterior"), {mm, n}, "obs_posterior");
  if (tables.contains("obs2_posterior"))
    u.obs2_posterior = detail::unit_from_json(tables.at("obs2_posterior"), {mm, mm, n}, "obs2_posterior");
  if (tables.contains("obs3_posterior"))
    u.obs3_posterior = detail::unit_from_json(tables.at("obs3_posterior"), {mm, mm, mm, n}, "obs3_posterior");
  if (tables.contains("pair_posterior"))
    u.pair_posterior = detail::unit_from_json(tables.at("pair_posterior"), {mm, n, n}, "pair_posterior");
  return u;
}

// Either side of the schema, dispatched on "type".
struct LoadedModel {
  std::optional<GenerativeModel> model;
  std::optional<DiscriminativeUnits> units;
};

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("'" + path + "': " + e.what());
  }
  return j;
}

inline LoadedModel load_model_file(const std::string& path) {
  const json j = read_json_file(path);
  LoadedModel out;
  const std::string type = detail::need(j, "type").get<std::string>();
  if (type == "generative")
    out.model = generative_from_json(j);
  else if (type == "discriminative_units")
    out.units = units_from_json(j);
  else
    throw std::runtime_error("'" + path + "': unknown model type '" + type + "'");
  return out;
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

}  // namespace genclass
