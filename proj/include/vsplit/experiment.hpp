#pragma once

// Experiment orchestration behind the command-line tool: data preparation from
// a config, training runs with JSON reports, analytic traffic/cost prediction,
// dropout sweeps, and the finite-difference gradient check.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vsplit/config.hpp"
#include "vsplit/data.hpp"
#include "vsplit/metrics.hpp"
#include "vsplit/neural.hpp"
#include "vsplit/protocol.hpp"

namespace vsplit {

inline constexpr std::uint64_t kDataStream = 0xDA7A;
inline constexpr std::uint64_t kSplitStream = 0x5917;
inline constexpr std::uint64_t kShuffleStream = 0x5411;
inline constexpr std::uint64_t kTrainDropStream = 0xD7A1;
inline constexpr std::uint64_t kTestDropStream = 0xD7E5;

struct PreparedData {
  Dataset train;
  Dataset test;
  PartitionPlan plan;  // over encoded feature columns
  SplitDataset train_split;
  SplitDataset test_split;
};

namespace detail {

inline ColumnSchema resolve_schema(const CsvSource& src) {
  ColumnSchema schema;
  if (!src.schema_path.empty()) {
    const auto doc = read_json_file(src.schema_path);
    if (!doc.is_object()) throw ConfigError("schema file must hold a JSON object");
    for (const auto& [col, kind] : doc.items()) schema[col] = parse_column_kind(kind.get<std::string>());
  }
  for (const auto& [col, kind] : src.schema) schema[col] = parse_column_kind(kind);
  return schema;
}

inline char resolve_delimiter(const std::string& d) {
  if (d == "auto" || d.empty()) return 0;
  if (d == "\\t" || d == "tab") return '\t';
  if (d.size() != 1) throw ConfigError("delimiter must be a single character or 'auto'");
  return d.front();
}

inline PartitionPlan resolve_plan(const PlanSpec& spec, const Dataset& ds) {
  const std::size_t raw = ds.source_names.size();
  PartitionPlan source_plan;
  if (spec.mode == "contiguous") {
    source_plan = make_contiguous_plan(raw, spec.clients);
  } else {
    std::vector<std::vector<std::size_t>> lists;
    for (const auto& refs : spec.columns) {
      std::vector<std::size_t> cols;
      for (const auto& r : refs) {
        if (const auto* idx = std::get_if<std::size_t>(&r)) {
          cols.push_back(*idx);
        } else {
          const auto& name = std::get<std::string>(r);
          const auto it = std::find(ds.source_names.begin(), ds.source_names.end(), name);
          if (it == ds.source_names.end()) throw PlanError("plan names unknown column '" + name + "'");
          cols.push_back(static_cast<std::size_t>(it - ds.source_names.begin()));
        }
      }
      lists.push_back(std::move(cols));
    }
    source_plan = make_plan_from_lists(raw, std::move(lists));
  }
  return expand_plan(source_plan, ds);
}

}  // namespace detail

inline PreparedData prepare_data(const ExperimentConfig& cfg) {
  PreparedData out;
  if (const auto* syn = std::get_if<SyntheticSource>(&cfg.dataset)) {
    Rng rng(derive_seed(cfg.seed, kDataStream));
    const auto all = synth_blobs(syn->blobs, rng);
    const auto idx = stratified_split(all.labels, all.n_classes, cfg.test_fraction, derive_seed(cfg.seed, kSplitStream));
    out.train = all.subset(idx.train);
    out.test = all.subset(idx.test.empty() ? idx.train : idx.test);
  } else {
    const auto& csv = std::get<CsvSource>(cfg.dataset);
    auto tt = load_csv(csv.path, csv.label_column, detail::resolve_schema(csv), cfg.test_fraction,
                       derive_seed(cfg.seed, kSplitStream), detail::resolve_delimiter(csv.delimiter));
    out.train = std::move(tt.train);
    out.test = std::move(tt.test);
  }
  out.plan = detail::resolve_plan(cfg.plan, out.train);
  if (cfg.label_client >= out.plan.clients()) {
    throw ConfigError("label_client " + std::to_string(cfg.label_client) + " out of range for " +
                      std::to_string(out.plan.clients()) + " clients");
  }
  out.train_split = vertical_split(out.train, out.plan, cfg.label_client);
  out.test_split = vertical_split(out.test, out.plan, cfg.label_client);
  return out;
}

inline SimulationConfig simulation_config(const ExperimentConfig& cfg, const PartitionPlan& plan, std::size_t n_classes) {
  const std::size_t k = plan.clients();
  if (cfg.client_layers.size() != 1 && cfg.client_layers.size() != k) {
    throw ConfigError("clients lists " + std::to_string(cfg.client_layers.size()) + " networks for " +
                      std::to_string(k) + " clients");
  }
  if (cfg.head.units.back() != n_classes) {
    throw ConfigError("head emits " + std::to_string(cfg.head.units.back()) + " logits but the dataset has " +
                      std::to_string(n_classes) + " classes");
  }
  SimulationConfig sc;
  std::vector<std::size_t> cuts;
  for (std::size_t c = 0; c < k; ++c) {
    sc.clients.push_back(cfg.client_layer(c).with_input(plan.columns(c).size()));
    cuts.push_back(sc.clients.back().dims.back());
  }
  if (auto err = cut_shape_error(cfg.merge, cuts)) throw ConfigError(*err);
  sc.server = cfg.server.with_input(merged_width(cfg.merge, cuts));
  sc.head = cfg.head.with_input(sc.server.dims.back());
  sc.merge = cfg.merge;
  sc.sgd = cfg.optimizer;
  sc.label_client = cfg.label_client;
  sc.wire_element_size = cfg.wire_element_size;
  sc.seed = cfg.seed;
  return sc;
}

inline TrainOptions train_options(const ExperimentConfig& cfg) {
  TrainOptions opt;
  opt.epochs = cfg.epochs;
  opt.batch_size = cfg.batch_size;
  opt.train_drop = cfg.train_drop;
  opt.train_drop.seed = derive_seed(cfg.seed, kTrainDropStream);
  opt.test_drop = cfg.test_drop;
  opt.test_drop.seed = derive_seed(cfg.seed, kTestDropStream);
  opt.shuffle_seed = derive_seed(cfg.seed, kShuffleStream);
  return opt;
}

// ---------------------------------------------------------------------------
// run

struct PartySummary {
  std::size_t id = 0;
  Role role = Role::role1;
  std::size_t params = 0;
  std::size_t flops_per_sample = 0;
};

struct RunReport {
  std::string config_digest;
  std::vector<EpochRecord> epochs;
  MetricsReport final_metrics;
  TrafficLog train_traffic;
  TrafficLog eval_traffic;
  std::vector<PartySummary> parties;
};

inline std::vector<PartySummary> summarize_parties(const Simulation& sim) {
  std::vector<PartySummary> out;
  for (std::size_t id = 0; id < sim.parties(); ++id) {
    const auto& p = sim.party(id);
    PartySummary s{id, p.role, count_params(p.model), count_flops_per_sample(p.model)};
    if (p.head) {
      s.params += count_params(*p.head);
      s.flops_per_sample += count_flops_per_sample(*p.head);
    }
    out.push_back(s);
  }
  return out;
}

inline RunReport run_experiment(const ExperimentConfig& cfg) {
  const auto data = prepare_data(cfg);
  auto sim = build_simulation(simulation_config(cfg, data.plan, data.train.n_classes));
  auto trained = run_training(sim, data.train_split, data.test_split, train_options(cfg));
  RunReport report;
  report.config_digest = config_digest(cfg);
  report.final_metrics = trained.epochs.back().test;
  report.epochs = std::move(trained.epochs);
  report.train_traffic = trained.train_traffic;
  report.eval_traffic = trained.eval_traffic;
  report.parties = summarize_parties(sim);
  return report;
}

namespace detail {

/// Sums per-party traffic into the three roles.
inline json traffic_by_role(const TrafficLog& log, const std::vector<PartySummary>& parties) {
  json out = json::object();
  for (const auto role : {Role::role0, Role::role1, Role::role3}) {
    std::uint64_t sent = 0, received = 0;
    for (const auto& p : parties) {
      if (p.role != role) continue;
      sent += log.sent(p.id);
      received += log.received(p.id);
    }
    out[std::string(to_string(role))] = {{"sent", sent}, {"received", received}};
  }
  return out;
}

inline json metrics_json(const MetricsReport& m) { return {{"acc", m.accuracy}, {"f1", m.f1}, {"loss", m.loss}}; }

}  // namespace detail

inline json epoch_record_json(const EpochRecord& rec, const std::vector<PartySummary>& parties) {
  return {{"epoch", rec.epoch},
          {"train", detail::metrics_json(rec.train)},
          {"test", detail::metrics_json(rec.test)},
          {"traffic", detail::traffic_by_role(rec.train_traffic, parties)}};
}

inline json report_json(const RunReport& r) {
  json parties = json::array();
  json per_party = json::array();
  for (const auto& p : r.parties) {
    parties.push_back({{"id", p.id},
                       {"role", std::string(to_string(p.role))},
                       {"params", p.params},
                       {"flops_per_sample", p.flops_per_sample}});
    per_party.push_back({{"id", p.id}, {"sent", r.train_traffic.sent(p.id)}, {"received", r.train_traffic.received(p.id)}});
  }
  return {{"config_digest", r.config_digest},
          {"epochs", r.epochs.size()},
          {"final", detail::metrics_json(r.final_metrics)},
          {"traffic",
           {{"per_role", detail::traffic_by_role(r.train_traffic, r.parties)},
            {"per_party", per_party},
            {"evaluation", detail::traffic_by_role(r.eval_traffic, r.parties)},
            {"messages", r.train_traffic.messages()}}},
          {"parties", parties}};
}

/// Writes metrics.jsonl and report.json under `dir`.
inline void write_run_outputs(const RunReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "metrics.jsonl");
    if (!out) throw ConfigError("cannot write to '" + dir.string() + "'");
    for (const auto& rec : r.epochs) out << epoch_record_json(rec, r.parties).dump() << '\n';
  }
  std::ofstream out(dir / "report.json");
  if (!out) throw ConfigError("cannot write to '" + dir.string() + "'");
  out << report_json(r).dump(2) << '\n';
}

inline void print_run_table(const RunReport& r, std::ostream& os) {
  os << std::left << std::setw(7) << "epoch" << std::setw(12) << "train_loss" << std::setw(11) << "train_acc"
     << std::setw(10) << "test_acc" << std::setw(9) << "test_f1" << '\n';
  os << std::fixed;
  for (const auto& e : r.epochs) {
    os << std::setw(7) << e.epoch << std::setw(12) << std::setprecision(5) << e.train.loss << std::setw(11)
       << std::setprecision(4) << e.train.accuracy << std::setw(10) << e.test.accuracy << std::setw(9) << e.test.f1
       << '\n';
  }
  os << "final test: acc " << std::setprecision(4) << r.final_metrics.accuracy << ", f1 " << r.final_metrics.f1
     << ", loss " << r.final_metrics.loss << '\n';
  os.unsetf(std::ios::floatfield);
}

// ---------------------------------------------------------------------------
// cost

struct RoleBytes {
  std::uint64_t sent = 0;
  std::uint64_t received = 0;
  friend bool operator==(const RoleBytes&, const RoleBytes&) = default;
};

struct CostReport {
  std::size_t train_rows = 0;
  std::vector<PartySummary> parties;
  std::vector<RoleBytes> predicted;  // per party, one training epoch without drops
  std::optional<std::vector<RoleBytes>> measured;

  [[nodiscard]] bool matches() const { return !measured || *measured == predicted; }
};

/// Bytes per party for one full-presence training epoch over `rows` samples.
/// Batching does not matter: every row crosses each cut once per direction.
inline std::vector<RoleBytes> predict_epoch_bytes(const SimulationConfig& sc, std::uint64_t rows) {
  const std::uint64_t e = sc.wire_element_size;
  const std::uint64_t server_out = sc.server.dims.back();
  std::vector<RoleBytes> out(sc.clients.size() + 1);
  for (std::size_t c = 0; c < sc.clients.size(); ++c) {
    const std::uint64_t cut_bytes = rows * sc.clients[c].dims.back() * e;
    out[c + 1].sent += cut_bytes;
    out[c + 1].received += cut_bytes;
    out[kServerId].received += cut_bytes;
    out[kServerId].sent += cut_bytes;
  }
  const std::uint64_t hop = rows * server_out * e;
  out[kServerId].sent += hop;
  out[kServerId].received += hop;
  out[sc.label_client + 1].received += hop;
  out[sc.label_client + 1].sent += hop;
  return out;
}

inline CostReport compute_cost(const ExperimentConfig& cfg, bool measure) {
  const auto data = prepare_data(cfg);
  const auto sc = simulation_config(cfg, data.plan, data.train.n_classes);
  auto sim = build_simulation(sc);
  CostReport report;
  report.train_rows = data.train_split.rows();
  report.parties = summarize_parties(sim);
  report.predicted = predict_epoch_bytes(sc, report.train_rows);
  if (measure) {
    auto opt = train_options(cfg);
    opt.epochs = 1;
    opt.train_drop = DropSchedule{Phase::train};
    const auto res = run_training(sim, data.train_split, data.test_split, opt);
    std::vector<RoleBytes> measured;
    for (std::size_t p = 0; p < sim.parties(); ++p) {
      measured.push_back({res.train_traffic.sent(p), res.train_traffic.received(p)});
    }
    report.measured = measured;
  }
  return report;
}

inline json cost_json(const CostReport& r) {
  json parties = json::array();
  std::map<std::string, RoleBytes> per_role;
  for (const auto& p : r.parties) {
    json entry = {{"id", p.id},
                  {"role", std::string(to_string(p.role))},
                  {"params", p.params},
                  {"flops_per_sample", p.flops_per_sample},
                  {"predicted", {{"sent", r.predicted[p.id].sent}, {"received", r.predicted[p.id].received}}}};
    if (r.measured) {
      entry["measured"] = {{"sent", (*r.measured)[p.id].sent}, {"received", (*r.measured)[p.id].received}};
    }
    auto& role = per_role[std::string(to_string(p.role))];
    role.sent += r.predicted[p.id].sent;
    role.received += r.predicted[p.id].received;
    parties.push_back(entry);
  }
  json roles = json::object();
  for (const auto& [name, b] : per_role) roles[name] = {{"sent", b.sent}, {"received", b.received}};
  json out = {{"train_rows", r.train_rows}, {"per_role_predicted", roles}, {"parties", parties}};
  if (r.measured) out["measured_matches"] = r.matches();
  return out;
}

inline void print_cost_table(const CostReport& r, std::ostream& os) {
  os << std::left << std::setw(6) << "party" << std::setw(7) << "role" << std::setw(10) << "params" << std::setw(12)
     << "flops/smpl" << std::setw(16) << "sent/epoch" << std::setw(16) << "recv/epoch";
  if (r.measured) os << std::setw(16) << "meas_sent" << std::setw(16) << "meas_recv";
  os << '\n';
  for (const auto& p : r.parties) {
    os << std::setw(6) << p.id << std::setw(7) << to_string(p.role) << std::setw(10) << p.params << std::setw(12)
       << p.flops_per_sample << std::setw(16) << r.predicted[p.id].sent << std::setw(16) << r.predicted[p.id].received;
    if (r.measured) os << std::setw(16) << (*r.measured)[p.id].sent << std::setw(16) << (*r.measured)[p.id].received;
    os << '\n';
  }
  if (r.measured) os << (r.matches() ? "measured traffic matches prediction\n" : "MISMATCH between measured and predicted traffic\n");
}

// ---------------------------------------------------------------------------
// dropsweep

struct SweepRow {
  std::size_t drop_count = 0;
  double median_accuracy = 0.0;
  double median_f1 = 0.0;
  std::vector<double> accuracies;
  std::vector<double> f1s;
};

inline double median(std::vector<double> v) {
  if (v.empty()) throw ConfigError("median of an empty list");
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

/// For each seed (cfg.seed + s) and drop count, the final test metrics.
/// Test phase: one full-presence training per seed, then one evaluation per
/// count. Train phase: one training per (seed, count), evaluated without drops.
/// Seeds run concurrently; each simulation is independent, so results do not
/// depend on scheduling.
inline std::vector<SweepRow> run_dropsweep(const ExperimentConfig& base, Phase phase, const std::vector<std::size_t>& counts,
                                           std::size_t seeds) {
  if (seeds == 0) throw ConfigError("--seeds must be at least 1");
  if (counts.empty()) throw ConfigError("no drop counts given");
  // Validate before spawning any work.
  const auto probe = prepare_data(base);
  const std::size_t droppable = probe.plan.clients() - (base.test_drop.protect_label_client ? 1 : 0);
  for (const auto c : counts) {
    if (c >= probe.plan.clients() || c > droppable) {
      throw ConfigError("cannot drop " + std::to_string(c) + " of " + std::to_string(probe.plan.clients()) +
                        " clients (" + std::to_string(droppable) + " droppable)");
    }
  }
  if (base.merge == MergeKind::concat && std::any_of(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; })) {
    throw ConfigError("concat merge cannot tolerate dropped clients");
  }

  auto run_seed = [&base, &counts, phase](std::size_t s) {
    ExperimentConfig cfg = base;
    cfg.seed = base.seed + s;
    const auto data = prepare_data(cfg);
    const auto sc = simulation_config(cfg, data.plan, data.train.n_classes);
    std::vector<MetricsReport> out;
    auto fixed = [&](Phase ph, std::size_t count, const DropSchedule& proto, std::uint64_t stream) {
      DropSchedule d = proto;
      d.phase = ph;
      d.mode = count == 0 ? DropMode::none : DropMode::fixed_count;
      d.count = count;
      d.seed = derive_seed(cfg.seed, stream);
      return d;
    };
    if (phase == Phase::test) {
      auto sim = build_simulation(sc);
      auto opt = train_options(cfg);
      opt.train_drop = DropSchedule{Phase::train};
      opt.test_drop = DropSchedule{Phase::test};
      (void)run_training(sim, data.train_split, data.test_split, opt);
      for (const auto c : counts) {
        out.push_back(evaluate_with_drop(sim, data.test_split, fixed(Phase::test, c, cfg.test_drop, kTestDropStream)));
      }
    } else {
      for (const auto c : counts) {
        auto sim = build_simulation(sc);
        auto opt = train_options(cfg);
        opt.train_drop = fixed(Phase::train, c, cfg.train_drop, kTrainDropStream);
        opt.test_drop = DropSchedule{Phase::test};
        out.push_back(run_training(sim, data.train_split, data.test_split, opt).epochs.back().test);
      }
    }
    return out;
  };

  std::vector<std::future<std::vector<MetricsReport>>> jobs;
  for (std::size_t s = 0; s < seeds; ++s) jobs.push_back(std::async(std::launch::async, run_seed, s));
  std::vector<std::vector<MetricsReport>> per_seed;
  for (auto& j : jobs) per_seed.push_back(j.get());

  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    SweepRow row;
    row.drop_count = counts[i];
    for (const auto& s : per_seed) {
      row.accuracies.push_back(s[i].accuracy);
      row.f1s.push_back(s[i].f1);
    }
    row.median_accuracy = median(row.accuracies);
    row.median_f1 = median(row.f1s);
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// gradcheck

struct GradcheckRow {
  std::size_t party = 0;
  Role role = Role::role1;
  std::string component;  // "model" or "head"
  std::size_t params = 0;
  double max_rel_error = 0.0;
};

struct GradcheckResult {
  std::vector<GradcheckRow> rows;
  double tolerance = 1e-5;
  [[nodiscard]] bool passed() const {
    return std::all_of(rows.begin(), rows.end(), [&](const GradcheckRow& r) { return r.max_rel_error < tolerance; });
  }
};

struct GradcheckOptions {
  MergeKind merge = MergeKind::max;
  std::size_t clients = 2;
  std::vector<std::size_t> client_dims{4, 3};  // input width .. cut width
  std::size_t server_hidden = 4;
  std::size_t classes = 3;
  std::size_t batch = 8;
  std::uint64_t seed = 42;
  double step = 1e-6;
  double tolerance = 1e-5;
  /// Central differences at step 1e-6 carry ~1e-10 of round-off, so gradients
  /// smaller than this are compared in absolute rather than relative terms.
  double error_floor = 1e-4;
};

/// Analytic gradients from the simulated protocol against central differences
/// of the forward-only loss, for every trainable scalar of every party.
/// All-tanh networks keep the check away from relu kinks.
inline GradcheckResult run_gradcheck(const GradcheckOptions& o) {
  if (o.client_dims.size() < 2) throw ConfigError("gradcheck needs client dims with at least two sizes");
  for (const auto d : o.client_dims) {
    if (d == 0 || d > 10) throw ConfigError("gradcheck layer sizes must lie in [1, 10]");
  }
  if (o.clients == 0 || o.server_hidden == 0 || o.classes == 0) throw ConfigError("gradcheck sizes must be positive");
  SimulationConfig sc;
  sc.merge = o.merge;
  sc.seed = o.seed;
  const std::vector<Activation> client_acts(o.client_dims.size() - 1, Activation::tanh);
  for (std::size_t c = 0; c < o.clients; ++c) sc.clients.push_back({o.client_dims, client_acts});
  const std::size_t cut = o.client_dims.back();
  sc.server = {{o.merge == MergeKind::concat ? cut * o.clients : cut, o.server_hidden}, {Activation::tanh}};
  sc.head = {{o.server_hidden, o.classes}, {Activation::identity}};
  Simulation sim = build_simulation(sc);

  // non-zero biases so every bias gradient is exercised
  Rng rng(derive_seed(o.seed, 0x6C4E));
  auto jitter = [&](Mlp& net) {
    for (std::size_t l = 0; l < net.depth(); ++l) {
      for (auto& b : net.layer(l).bias) b = rng.uniform(-0.2, 0.2);
    }
  };
  for (std::size_t c = 0; c < o.clients; ++c) jitter(sim.client(c).model);
  jitter(sim.server().model);
  jitter(sim.head());

  Batch batch;
  for (std::size_t c = 0; c < o.clients; ++c) {
    Matrix m(o.batch, o.client_dims.front());
    for (auto& v : m.values()) v = rng.uniform(-1.0, 1.0);
    batch.inputs.push_back(std::move(m));
  }
  for (std::size_t r = 0; r < o.batch; ++r) batch.labels.push_back(rng.below(o.classes));
  const auto mask = PresenceMask::all(o.clients);

  const auto analytic = sim.compute_gradients(batch, mask);
  auto loss = [&] { return *sim.infer(batch, mask).loss; };

  auto check = [&](Mlp& net, const GradientSet& grads) {
    std::vector<double> a;
    for_each_parameter(grads, [&](double v) { a.push_back(v); });
    double worst = 0.0;
    std::size_t i = 0;
    for_each_parameter(net, [&](double& p) {
      const double saved = p;
      p = saved + o.step;
      const double up = loss();
      p = saved - o.step;
      const double down = loss();
      p = saved;
      worst = std::max(worst, relative_error(a[i++], (up - down) / (2.0 * o.step), o.error_floor));
    });
    return std::pair{i, worst};
  };

  GradcheckResult result;
  result.tolerance = o.tolerance;
  {
    const auto [n, worst] = check(sim.server().model, analytic.server);
    result.rows.push_back({kServerId, Role::role0, "model", n, worst});
  }
  for (std::size_t c = 0; c < o.clients; ++c) {
    const auto [n, worst] = check(sim.client(c).model, *analytic.clients[c]);
    result.rows.push_back({c + 1, sim.client(c).role, "model", n, worst});
    if (c == sim.label_client()) {
      const auto [hn, hworst] = check(sim.head(), analytic.head);
      result.rows.push_back({c + 1, Role::role3, "head", hn, hworst});
    }
  }
  return result;
}

inline void print_gradcheck_table(const GradcheckResult& r, std::ostream& os) {
  os << std::left << std::setw(7) << "party" << std::setw(7) << "role" << std::setw(7) << "part" << std::setw(8)
     << "params" << std::setw(14) << "max_rel_err" << "status\n";
  for (const auto& row : r.rows) {
    std::ostringstream err;
    err << std::scientific << std::setprecision(3) << row.max_rel_error;
    os << std::setw(7) << row.party << std::setw(7) << to_string(row.role) << std::setw(7) << row.component
       << std::setw(8) << row.params << std::setw(14) << err.str() << (row.max_rel_error < r.tolerance ? "pass" : "FAIL")
       << '\n';
  }
}

}  // namespace vsplit
