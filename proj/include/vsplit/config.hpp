#pragma once

// Experiment configuration: one JSON document, loss-free round trip, dotted
// `key=value` overrides.

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "vsplit/data.hpp"
#include "vsplit/error.hpp"
#include "vsplit/merge.hpp"
#include "vsplit/neural.hpp"
#include "vsplit/protocol.hpp"

namespace vsplit {

using json = nlohmann::json;

/// Hidden and output sizes of one party's network; the input width is implied
/// (partition width for clients, merged width for the server, server output
/// for the head).
struct LayerSpec {
  std::vector<std::size_t> units;
  std::vector<Activation> activations;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;

  [[nodiscard]] NetSpec with_input(std::size_t in) const {
    NetSpec n;
    n.dims.push_back(in);
    n.dims.insert(n.dims.end(), units.begin(), units.end());
    n.activations = activations;
    return n;
  }
};

struct SyntheticSource {
  BlobSpec blobs;
  friend bool operator==(const SyntheticSource& a, const SyntheticSource& b) {
    return a.blobs.n_samples == b.blobs.n_samples && a.blobs.n_features == b.blobs.n_features &&
           a.blobs.n_classes == b.blobs.n_classes && a.blobs.informative_per_client == b.blobs.informative_per_client &&
           a.blobs.separation == b.blobs.separation;
  }
};

struct CsvSource {
  std::string path;
  std::string label_column;
  std::map<std::string, std::string> schema;  // column -> "numeric" | "categorical"
  std::string schema_path;
  std::string delimiter = "auto";
  friend bool operator==(const CsvSource&, const CsvSource&) = default;
};

/// Column references in a by_list plan may be raw column names or indices.
using ColumnRef = std::variant<std::size_t, std::string>;

struct PlanSpec {
  std::string mode = "contiguous";  // contiguous | by_list
  std::size_t clients = 2;
  std::vector<std::vector<ColumnRef>> columns;
  friend bool operator==(const PlanSpec&, const PlanSpec&) = default;
};

struct ExperimentConfig {
  std::variant<SyntheticSource, CsvSource> dataset = SyntheticSource{};
  double test_fraction = 0.2;
  PlanSpec plan;
  std::size_t label_client = 0;
  /// One entry shared by every client, or one entry per client.
  std::vector<LayerSpec> client_layers{LayerSpec{{16, 8}, {Activation::relu, Activation::relu}}};
  LayerSpec server{{16}, {Activation::relu}};
  LayerSpec head{{3}, {Activation::identity}};
  MergeKind merge = MergeKind::max;
  SgdConfig optimizer;
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  std::uint64_t seed = 42;
  DropSchedule train_drop{Phase::train};
  DropSchedule test_drop{Phase::test};
  std::size_t wire_element_size = 4;
  std::string output_dir = "out";

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;

  [[nodiscard]] const LayerSpec& client_layer(std::size_t k) const {
    if (client_layers.size() == 1) return client_layers.front();
    return client_layers.at(k);
  }
};

namespace detail {

inline LayerSpec layer_spec_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  LayerSpec s;
  s.units = j.at("layers").get<std::vector<std::size_t>>();
  if (s.units.empty()) throw ConfigError(where + ".layers must not be empty");
  const auto& acts = j.at("activations");
  if (acts.is_string()) {
    s.activations.assign(s.units.size(), parse_activation(acts.get<std::string>()));
  } else {
    for (const auto& a : acts) s.activations.push_back(parse_activation(a.get<std::string>()));
  }
  if (s.activations.size() != s.units.size()) {
    throw ConfigError(where + ": " + std::to_string(s.units.size()) + " layers but " +
                      std::to_string(s.activations.size()) + " activations");
  }
  return s;
}

inline json layer_spec_to_json(const LayerSpec& s) {
  json acts = json::array();
  for (const auto a : s.activations) acts.push_back(std::string(to_string(a)));
  return {{"layers", s.units}, {"activations", acts}};
}

inline DropSchedule drop_from_json(const json& j, Phase phase) {
  DropSchedule d;
  d.phase = phase;
  d.mode = parse_drop_mode(j.value("mode", std::string("none")));
  d.count = j.value("count", std::size_t{0});
  d.probability = j.value("probability", 0.0);
  d.protect_label_client = j.value("protect_label_client", true);
  return d;
}

inline json drop_to_json(const DropSchedule& d) {
  return {{"mode", std::string(to_string(d.mode))},
          {"count", d.count},
          {"probability", d.probability},
          {"protect_label_client", d.protect_label_client}};
}

}  // namespace detail

inline ExperimentConfig config_from_json(const json& j) {
  try {
    ExperimentConfig cfg;
    const json ds = j.value("dataset", json::object());
    const auto source = ds.value("source", std::string("synthetic"));
    if (source == "synthetic") {
      SyntheticSource s;
      s.blobs.n_samples = ds.value("n_samples", s.blobs.n_samples);
      s.blobs.n_features = ds.value("n_features", s.blobs.n_features);
      s.blobs.n_classes = ds.value("n_classes", s.blobs.n_classes);
      s.blobs.informative_per_client = ds.value("informative_per_client", s.blobs.informative_per_client);
      s.blobs.separation = ds.value("separation", s.blobs.separation);
      cfg.dataset = s;
      cfg.plan.clients = s.blobs.informative_per_client.size();
    } else if (source == "csv") {
      CsvSource c;
      c.path = ds.at("path").get<std::string>();
      c.label_column = ds.at("label_column").get<std::string>();
      c.schema = ds.value("schema", c.schema);
      c.schema_path = ds.value("schema_path", std::string());
      c.delimiter = ds.value("delimiter", c.delimiter);
      cfg.dataset = c;
    } else {
      throw ConfigError("dataset.source must be 'synthetic' or 'csv', got '" + source + "'");
    }

    cfg.test_fraction = j.value("test_fraction", cfg.test_fraction);
    if (j.contains("plan")) {
      const auto& p = j.at("plan");
      cfg.plan.mode = p.value("mode", cfg.plan.mode);
      cfg.plan.clients = p.value("clients", cfg.plan.clients);
      if (cfg.plan.mode == "by_list") {
        cfg.plan.columns.clear();
        for (const auto& list : p.at("columns")) {
          std::vector<ColumnRef> refs;
          for (const auto& r : list) {
            if (r.is_number_unsigned()) {
              refs.emplace_back(r.get<std::size_t>());
            } else if (r.is_string()) {
              refs.emplace_back(r.get<std::string>());
            } else {
              throw ConfigError("plan.columns entries must be column names or non-negative indices");
            }
          }
          cfg.plan.columns.push_back(std::move(refs));
        }
        cfg.plan.clients = cfg.plan.columns.size();
      } else if (cfg.plan.mode != "contiguous") {
        throw ConfigError("plan.mode must be 'contiguous' or 'by_list', got '" + cfg.plan.mode + "'");
      }
    }
    cfg.label_client = j.value("label_client", cfg.label_client);
    if (j.contains("clients")) {
      const auto& c = j.at("clients");
      cfg.client_layers.clear();
      if (c.is_array()) {
        for (std::size_t i = 0; i < c.size(); ++i) {
          cfg.client_layers.push_back(detail::layer_spec_from_json(c[i], "clients[" + std::to_string(i) + "]"));
        }
        if (cfg.client_layers.empty()) throw ConfigError("clients must not be an empty list");
      } else {
        cfg.client_layers.push_back(detail::layer_spec_from_json(c, "clients"));
      }
    }
    if (j.contains("server")) cfg.server = detail::layer_spec_from_json(j.at("server"), "server");
    if (j.contains("head")) cfg.head = detail::layer_spec_from_json(j.at("head"), "head");
    cfg.merge = parse_merge_kind(j.value("merge", std::string(to_string(cfg.merge))));
    if (j.contains("optimizer")) {
      cfg.optimizer.learning_rate = j.at("optimizer").value("learning_rate", cfg.optimizer.learning_rate);
      cfg.optimizer.momentum = j.at("optimizer").value("momentum", cfg.optimizer.momentum);
    }
    cfg.optimizer.validate();
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("train_drop")) cfg.train_drop = detail::drop_from_json(j.at("train_drop"), Phase::train);
    if (j.contains("test_drop")) cfg.test_drop = detail::drop_from_json(j.at("test_drop"), Phase::test);
    cfg.wire_element_size = j.value("wire_element_size", cfg.wire_element_size);
    cfg.output_dir = j.value("output_dir", cfg.output_dir);
    if (cfg.epochs == 0) throw ConfigError("epochs must be at least 1");
    if (cfg.batch_size == 0) throw ConfigError("batch_size must be at least 1");
    if (cfg.wire_element_size == 0) throw ConfigError("wire_element_size must be positive");
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline json config_to_json(const ExperimentConfig& cfg) {
  json j;
  if (const auto* s = std::get_if<SyntheticSource>(&cfg.dataset)) {
    j["dataset"] = {{"source", "synthetic"},
                    {"n_samples", s->blobs.n_samples},
                    {"n_features", s->blobs.n_features},
                    {"n_classes", s->blobs.n_classes},
                    {"informative_per_client", s->blobs.informative_per_client},
                    {"separation", s->blobs.separation}};
  } else {
    const auto& c = std::get<CsvSource>(cfg.dataset);
    j["dataset"] = {{"source", "csv"},       {"path", c.path},
                    {"label_column", c.label_column}, {"schema", c.schema},
                    {"schema_path", c.schema_path},   {"delimiter", c.delimiter}};
  }
  j["test_fraction"] = cfg.test_fraction;
  json plan = {{"mode", cfg.plan.mode}, {"clients", cfg.plan.clients}};
  if (cfg.plan.mode == "by_list") {
    json lists = json::array();
    for (const auto& list : cfg.plan.columns) {
      json refs = json::array();
      for (const auto& r : list) {
        if (const auto* idx = std::get_if<std::size_t>(&r)) {
          refs.push_back(*idx);
        } else {
          refs.push_back(std::get<std::string>(r));
        }
      }
      lists.push_back(refs);
    }
    plan["columns"] = lists;
  }
  j["plan"] = plan;
  j["label_client"] = cfg.label_client;
  if (cfg.client_layers.size() == 1) {
    j["clients"] = detail::layer_spec_to_json(cfg.client_layers.front());
  } else {
    j["clients"] = json::array();
    for (const auto& c : cfg.client_layers) j["clients"].push_back(detail::layer_spec_to_json(c));
  }
  j["server"] = detail::layer_spec_to_json(cfg.server);
  j["head"] = detail::layer_spec_to_json(cfg.head);
  j["merge"] = std::string(to_string(cfg.merge));
  j["optimizer"] = {{"learning_rate", cfg.optimizer.learning_rate}, {"momentum", cfg.optimizer.momentum}};
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["seed"] = cfg.seed;
  j["train_drop"] = detail::drop_to_json(cfg.train_drop);
  j["test_drop"] = detail::drop_to_json(cfg.test_drop);
  j["wire_element_size"] = cfg.wire_element_size;
  j["output_dir"] = cfg.output_dir;
  return j;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
}

/// Applies `a.b.c=value` to `doc`. The value is parsed as JSON when possible
/// and taken as a plain string otherwise; numeric path segments index arrays.
inline void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;
  }
  json* node = &doc;
  std::stringstream ss(path);
  std::string key;
  std::vector<std::string> keys;
  while (std::getline(ss, key, '.')) {
    if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty path segment");
    keys.push_back(key);
  }
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const bool last = i + 1 == keys.size();
    if (node->is_array()) {
      const auto idx = detail::parse_number(keys[i]);
      if (!idx || *idx < 0 || *idx >= static_cast<double>(node->size())) {
        throw ConfigError("override '" + assignment + "': bad array index '" + keys[i] + "'");
      }
      node = &(*node)[static_cast<std::size_t>(*idx)];
    } else {
      if (!node->is_object() && !node->is_null()) {
        throw ConfigError("override '" + assignment + "': '" + keys[i] + "' is below a non-object value");
      }
      node = &(*node)[keys[i]];
    }
    if (last) *node = value;
  }
}

inline std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (const unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

/// Digest of everything that affects results; the output directory is left out.
inline std::string config_digest(const ExperimentConfig& cfg) {
  auto doc = config_to_json(cfg);
  doc.erase("output_dir");
  return fnv1a_hex(doc.dump());
}

}  // namespace vsplit
