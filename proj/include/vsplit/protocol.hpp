#pragma once

// In-process simulation of the role-based split-learning protocol.
//
// Party 0 is the role-0 server (computation only). Parties 1..K are the
// feature holders; exactly one of them is role 3 and additionally owns the
// loss head and the labels, the others are role 1. One training iteration is
// the fixed exchange
//
//   1. every present feature holder  -> server : cut activation
//   2. server (merge + its network)  -> role 3 : server output
//   3. role 3 (head + loss)          -> server : gradient at the server output
//   4. server (backward + split)     -> every present feature holder : cut gradient
//   5. every party that took part applies its optimizer step
//
// so a step with P present feature holders moves exactly 2P + 2 messages.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vsplit/data.hpp"
#include "vsplit/error.hpp"
#include "vsplit/merge.hpp"
#include "vsplit/metrics.hpp"
#include "vsplit/neural.hpp"
#include "vsplit/tensor.hpp"

namespace vsplit {

enum class Role { role0, role1, role3 };

inline std::string_view to_string(Role r) {
  switch (r) {
    case Role::role0: return "role0";
    case Role::role1: return "role1";
    case Role::role3: return "role3";
  }
  return "?";
}

enum class MessageKind { activation, gradient };

struct WireMessage {
  std::size_t sender = 0;
  std::size_t receiver = 0;
  MessageKind kind = MessageKind::activation;
  Matrix payload;
  std::uint64_t byte_size = 0;
};

inline constexpr std::size_t kServerId = 0;

/// Per-party byte counters. Only payload bytes are counted
/// (rows * cols * wire element size); framing is not modelled.
class TrafficLog {
 public:
  TrafficLog() = default;
  explicit TrafficLog(std::size_t parties) : sent_(parties, 0), received_(parties, 0) {}

  void record(const WireMessage& m) {
    sent_.at(m.sender) += m.byte_size;
    received_.at(m.receiver) += m.byte_size;
    ++(m.kind == MessageKind::activation ? activation_messages_ : gradient_messages_);
  }

  [[nodiscard]] std::size_t parties() const noexcept { return sent_.size(); }
  [[nodiscard]] std::uint64_t sent(std::size_t party) const { return sent_.at(party); }
  [[nodiscard]] std::uint64_t received(std::size_t party) const { return received_.at(party); }
  [[nodiscard]] std::uint64_t total_sent() const { return std::accumulate(sent_.begin(), sent_.end(), std::uint64_t{0}); }
  [[nodiscard]] std::uint64_t total_received() const {
    return std::accumulate(received_.begin(), received_.end(), std::uint64_t{0});
  }
  [[nodiscard]] std::uint64_t activation_messages() const noexcept { return activation_messages_; }
  [[nodiscard]] std::uint64_t gradient_messages() const noexcept { return gradient_messages_; }
  [[nodiscard]] std::uint64_t messages() const noexcept { return activation_messages_ + gradient_messages_; }

  TrafficLog& operator+=(const TrafficLog& other) {
    if (sent_.empty()) *this = TrafficLog(other.parties());
    if (other.parties() != parties()) throw ProtocolError("cannot add traffic logs of different party counts");
    for (std::size_t p = 0; p < parties(); ++p) {
      sent_[p] += other.sent_[p];
      received_[p] += other.received_[p];
    }
    activation_messages_ += other.activation_messages_;
    gradient_messages_ += other.gradient_messages_;
    return *this;
  }

  friend bool operator==(const TrafficLog&, const TrafficLog&) = default;

 private:
  std::vector<std::uint64_t> sent_;
  std::vector<std::uint64_t> received_;
  std::uint64_t activation_messages_ = 0;
  std::uint64_t gradient_messages_ = 0;
};

// ---------------------------------------------------------------------------
// Client dropout

enum class DropMode { none, fixed_count, probability };
enum class Phase { train, test };

inline std::string_view to_string(DropMode m) {
  switch (m) {
    case DropMode::none: return "none";
    case DropMode::fixed_count: return "fixed_count";
    case DropMode::probability: return "probability";
  }
  return "?";
}

inline DropMode parse_drop_mode(std::string_view s) {
  if (s == "none") return DropMode::none;
  if (s == "fixed_count") return DropMode::fixed_count;
  if (s == "probability") return DropMode::probability;
  throw ConfigError("unknown drop mode '" + std::string(s) + "' (expected none, fixed_count or probability)");
}

inline std::string_view to_string(Phase p) { return p == Phase::train ? "train" : "test"; }

inline Phase parse_phase(std::string_view s) {
  if (s == "train") return Phase::train;
  if (s == "test") return Phase::test;
  throw ConfigError("unknown phase '" + std::string(s) + "' (expected train or test)");
}

struct DropSchedule {
  Phase phase = Phase::train;
  DropMode mode = DropMode::none;
  std::size_t count = 0;
  double probability = 0.0;
  std::uint64_t seed = 0;
  /// The label holder's feature branch never drops.
  bool protect_label_client = true;

  friend bool operator==(const DropSchedule&, const DropSchedule&) = default;
};

/// Presence mask for one iteration. The mask depends only on (schedule seed,
/// iteration), never on how many masks were drawn before.
inline PresenceMask apply_drop(const DropSchedule& schedule, std::uint64_t iteration, std::size_t k,
                               std::optional<std::size_t> protected_client = std::nullopt) {
  if (k == 0) throw ConfigError("apply_drop: no clients");
  PresenceMask mask = PresenceMask::all(k);
  if (schedule.mode == DropMode::none) return mask;

  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < k; ++i) {
    if (!protected_client || *protected_client != i) candidates.push_back(i);
  }
  Rng rng(derive_seed(schedule.seed, 0xD509, iteration));

  if (schedule.mode == DropMode::fixed_count) {
    if (schedule.count >= k || schedule.count > candidates.size()) {
      throw ConfigError("cannot drop " + std::to_string(schedule.count) + " of " + std::to_string(k) +
                        " clients (" + std::to_string(candidates.size()) + " droppable)");
    }
    // partial Fisher-Yates: the first `count` slots become the absent set
    for (std::size_t i = 0; i < schedule.count; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(candidates.size() - i));
      std::swap(candidates[i], candidates[j]);
      mask.set(candidates[i], false);
    }
    return mask;
  }

  if (!(schedule.probability >= 0.0 && schedule.probability < 1.0)) {
    throw ConfigError("drop probability must lie in [0, 1)");
  }
  do {
    mask = PresenceMask::all(k);
    for (const auto c : candidates) {
      if (rng.uniform() < schedule.probability) mask.set(c, false);
    }
  } while (mask.count_present() == 0);
  return mask;
}

// ---------------------------------------------------------------------------
// Parties and simulation

/// Layer sizes including the input width, plus one activation per layer.
struct NetSpec {
  std::vector<std::size_t> dims;
  std::vector<Activation> activations;

  friend bool operator==(const NetSpec&, const NetSpec&) = default;
};

struct SimulationConfig {
  std::vector<NetSpec> clients;
  NetSpec server;
  NetSpec head;
  MergeKind merge = MergeKind::concat;
  SgdConfig sgd;
  std::size_t label_client = 0;
  std::size_t wire_element_size = 4;
  std::uint64_t seed = 42;
};

struct Party {
  std::size_t id = 0;
  Role role = Role::role1;
  Mlp model;
  SgdState optimizer;
  /// Loss-side layers; present on the role-3 party only.
  std::optional<Mlp> head;
  SgdState head_optimizer;
};

/// One mini-batch as seen by the parties: each feature holder's rows, and the
/// labels that only role 3 reads.
struct Batch {
  std::vector<Matrix> inputs;
  std::vector<std::size_t> labels;
};

inline Batch make_batch(const SplitDataset& data, std::span<const std::size_t> rows) {
  Batch b;
  for (const auto& part : data.parts) b.inputs.push_back(gather_rows(part, rows));
  for (const auto r : rows) b.labels.push_back(data.labels.at(r));
  return b;
}

struct StepGradients {
  double loss = 0.0;
  Matrix logits;
  std::vector<std::optional<GradientSet>> clients;
  GradientSet server;
  GradientSet head;
  std::vector<WireMessage> messages;
};

struct IterationResult {
  double loss = 0.0;
  std::vector<WireMessage> messages;
  std::vector<std::size_t> updated_parties;
};

struct InferenceResult {
  Matrix logits;
  std::optional<double> loss;
  std::vector<WireMessage> messages;
};

class Simulation {
 public:
  static inline constexpr std::uint64_t kPartyStream = 0x9A27;
  static inline constexpr std::uint64_t kHeadStream = 0x4EAD;

  explicit Simulation(const SimulationConfig& cfg) : cfg_(cfg) {
    const std::size_t k = cfg.clients.size();
    if (k == 0) throw ConfigError("simulation needs at least one feature-holding client");
    if (cfg.label_client >= k) {
      throw ConfigError("label_client " + std::to_string(cfg.label_client) + " out of range for " +
                        std::to_string(k) + " clients");
    }
    if (cfg.wire_element_size == 0) throw ConfigError("wire_element_size must be positive");
    cfg.sgd.validate();

    std::vector<std::size_t> cut_widths;
    for (std::size_t c = 0; c < k; ++c) {
      check_spec(cfg.clients[c], "client " + std::to_string(c));
      cut_widths.push_back(cfg.clients[c].dims.back());
    }
    if (auto err = cut_shape_error(cfg.merge, cut_widths)) throw ConfigError(*err);
    check_spec(cfg.server, "server");
    check_spec(cfg.head, "head");
    const std::size_t merged = merged_width(cfg.merge, cut_widths);
    if (cfg.server.dims.front() != merged) {
      throw ConfigError("server input width " + std::to_string(cfg.server.dims.front()) +
                        " does not match merged cut width " + std::to_string(merged));
    }
    if (cfg.head.dims.front() != cfg.server.dims.back()) {
      throw ConfigError("head input width " + std::to_string(cfg.head.dims.front()) +
                        " does not match server output width " + std::to_string(cfg.server.dims.back()));
    }

    Rng server_rng(derive_seed(cfg.seed, kPartyStream, kServerId));
    server_.id = kServerId;
    server_.role = Role::role0;
    server_.model = init_mlp(cfg.server.dims, cfg.server.activations, server_rng);
    for (std::size_t c = 0; c < k; ++c) {
      Party p;
      p.id = c + 1;
      p.role = c == cfg.label_client ? Role::role3 : Role::role1;
      Rng rng(derive_seed(cfg.seed, kPartyStream, p.id));
      p.model = init_mlp(cfg.clients[c].dims, cfg.clients[c].activations, rng);
      if (p.role == Role::role3) {
        Rng head_rng(derive_seed(cfg.seed, kHeadStream));
        p.head = init_mlp(cfg.head.dims, cfg.head.activations, head_rng);
      }
      clients_.push_back(std::move(p));
    }
  }

  [[nodiscard]] const SimulationConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] std::size_t clients() const noexcept { return clients_.size(); }
  [[nodiscard]] std::size_t parties() const noexcept { return clients_.size() + 1; }
  [[nodiscard]] std::size_t label_client() const noexcept { return cfg_.label_client; }
  [[nodiscard]] std::size_t label_party() const noexcept { return cfg_.label_client + 1; }
  [[nodiscard]] MergeKind merge_kind() const noexcept { return cfg_.merge; }

  [[nodiscard]] const Party& server() const noexcept { return server_; }
  [[nodiscard]] Party& server() noexcept { return server_; }
  [[nodiscard]] const Party& client(std::size_t c) const { return clients_.at(c); }
  [[nodiscard]] Party& client(std::size_t c) { return clients_.at(c); }
  [[nodiscard]] const Mlp& head() const { return *clients_[cfg_.label_client].head; }
  [[nodiscard]] Mlp& head() { return *clients_[cfg_.label_client].head; }

  [[nodiscard]] const Party& party(std::size_t id) const { return id == kServerId ? server_ : clients_.at(id - 1); }
  [[nodiscard]] Role role_of(std::size_t id) const { return party(id).role; }

  [[nodiscard]] std::vector<std::size_t> cut_widths() const {
    std::vector<std::size_t> w;
    for (const auto& c : clients_) w.push_back(c.model.out_dim());
    return w;
  }

  /// Runs the full message exchange for one batch and returns every party's
  /// gradients without touching any parameters.
  [[nodiscard]] StepGradients compute_gradients(const Batch& batch, const PresenceMask& mask) const {
    if (batch.labels.empty()) throw ProtocolError("role 3 has no labels for this batch");
    StepGradients out;
    const auto fwd = forward_pass(batch, mask, out.messages);
    const std::size_t role3 = label_party();

    // role 3: head, loss, and the error at the server output
    const Matrix& server_out = out.messages.back().payload;
    const auto head_fwd = forward(head(), server_out);
    auto loss = softmax_cross_entropy(head_fwd.output, batch.labels);
    auto head_bwd = backward(head(), head_fwd.cache, loss.grad_logits);
    out.loss = loss.loss;
    out.logits = head_fwd.output;
    out.head = std::move(head_bwd.grads);
    out.messages.push_back(message(role3, kServerId, MessageKind::gradient, std::move(head_bwd.grad_in)));

    // role 0: backward through its network, then split at the merge point
    const Matrix& server_grad = out.messages.back().payload;
    auto server_bwd = backward(server_.model, fwd.server_cache, server_grad);
    out.server = std::move(server_bwd.grads);
    const auto client_grads = merge_backward(fwd.merge_cache, server_bwd.grad_in);
    out.clients.resize(clients_.size());
    for (std::size_t c = 0; c < clients_.size(); ++c) {
      if (!mask[c]) continue;
      out.messages.push_back(message(kServerId, c + 1, MessageKind::gradient, client_grads[c]));
      const auto bwd = backward(clients_[c].model, fwd.client_caches[c]->cache, out.messages.back().payload);
      out.clients[c] = bwd.grads;
    }
    return out;
  }

  /// One optimizer step. Absent clients neither send, receive nor update.
  IterationResult train_iteration(const Batch& batch, const PresenceMask& mask, TrafficLog* log = nullptr) {
    auto grads = compute_gradients(batch, mask);
    IterationResult result;
    result.loss = grads.loss;
    for (std::size_t c = 0; c < clients_.size(); ++c) {
      if (!grads.clients[c]) continue;
      sgd_step(clients_[c].model, *grads.clients[c], cfg_.sgd, clients_[c].optimizer);
      result.updated_parties.push_back(c + 1);
    }
    sgd_step(server_.model, grads.server, cfg_.sgd, server_.optimizer);
    result.updated_parties.push_back(kServerId);
    auto& holder = clients_[cfg_.label_client];
    sgd_step(*holder.head, grads.head, cfg_.sgd, holder.head_optimizer);
    if (std::find(result.updated_parties.begin(), result.updated_parties.end(), holder.id) ==
        result.updated_parties.end()) {
      result.updated_parties.push_back(holder.id);
    }
    std::sort(result.updated_parties.begin(), result.updated_parties.end());
    if (log != nullptr) {
      for (const auto& m : grads.messages) log->record(m);
    }
    result.messages = std::move(grads.messages);
    return result;
  }

  /// Forward-only exchange (steps 1 and 2 plus the head). The loss is filled in
  /// when the batch carries labels.
  [[nodiscard]] InferenceResult infer(const Batch& batch, const PresenceMask& mask, TrafficLog* log = nullptr) const {
    InferenceResult out;
    (void)forward_pass(batch, mask, out.messages);
    out.logits = forward(head(), out.messages.back().payload).output;
    if (!batch.labels.empty()) out.loss = softmax_cross_entropy(out.logits, batch.labels).loss;
    if (log != nullptr) {
      for (const auto& m : out.messages) log->record(m);
    }
    return out;
  }

  [[nodiscard]] std::uint64_t payload_bytes(const Matrix& m) const noexcept {
    return static_cast<std::uint64_t>(m.rows()) * m.cols() * cfg_.wire_element_size;
  }

 private:
  struct ForwardState {
    std::vector<std::optional<ForwardResult>> client_caches;
    MergeCache merge_cache;
    ForwardCache server_cache;
  };

  static void check_spec(const NetSpec& spec, const std::string& who) {
    if (spec.dims.size() < 2) throw ConfigError(who + ": network needs an input width and at least one layer");
    if (spec.activations.size() != spec.dims.size() - 1) {
      throw ConfigError(who + ": " + std::to_string(spec.dims.size() - 1) + " layers but " +
                        std::to_string(spec.activations.size()) + " activations");
    }
    for (const auto d : spec.dims) {
      if (d == 0) throw ConfigError(who + ": layer sizes must be positive");
    }
  }

  WireMessage message(std::size_t from, std::size_t to, MessageKind kind, Matrix payload) const {
    WireMessage m;
    m.sender = from;
    m.receiver = to;
    m.kind = kind;
    m.byte_size = payload_bytes(payload);
    m.payload = std::move(payload);
    return m;
  }

  ForwardState forward_pass(const Batch& batch, const PresenceMask& mask, std::vector<WireMessage>& messages) const {
    const std::size_t k = clients_.size();
    if (batch.inputs.size() != k) {
      throw ProtocolError("batch carries " + std::to_string(batch.inputs.size()) + " client blocks for " +
                          std::to_string(k) + " clients");
    }
    if (mask.size() != k) throw ProtocolError("presence mask length does not match client count");
    if (mask.count_present() == 0) throw ProtocolError("no feature-holding client present");
    if (cfg_.merge == MergeKind::concat && !mask.all_present()) {
      for (std::size_t c = 0; c < k; ++c) {
        if (!mask[c]) throw StragglerError("concat merge cannot proceed: client " + std::to_string(c) + " is missing");
      }
    }

    ForwardState st;
    st.client_caches.resize(k);
    std::vector<std::optional<Matrix>> received(k);
    for (std::size_t c = 0; c < k; ++c) {
      if (!mask[c]) continue;
      st.client_caches[c] = forward(clients_[c].model, batch.inputs[c]);
      messages.push_back(message(c + 1, kServerId, MessageKind::activation, st.client_caches[c]->output));
      received[c] = messages.back().payload;
    }
    auto merged = merge_forward(cfg_.merge, received, mask);
    st.merge_cache = std::move(merged.cache);
    auto server_fwd = forward(server_.model, merged.merged);
    st.server_cache = std::move(server_fwd.cache);
    messages.push_back(message(kServerId, label_party(), MessageKind::activation, std::move(server_fwd.output)));
    return st;
  }

  SimulationConfig cfg_;
  Party server_;
  std::vector<Party> clients_;
};

inline Simulation build_simulation(const SimulationConfig& cfg) { return Simulation(cfg); }

// ---------------------------------------------------------------------------
// Training and evaluation loops

struct TrainOptions {
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  DropSchedule train_drop;
  DropSchedule test_drop{Phase::test};
  std::uint64_t shuffle_seed = 0;
  bool shuffle = true;
};

struct EpochRecord {
  std::size_t epoch = 0;
  MetricsReport train;
  MetricsReport test;
  TrafficLog train_traffic;
  TrafficLog eval_traffic;
};

struct TrainingResult {
  std::vector<EpochRecord> epochs;
  TrafficLog train_traffic;
  TrafficLog eval_traffic;
};

namespace detail {

inline std::optional<std::size_t> protected_index(const Simulation& sim, const DropSchedule& d) {
  if (d.protect_label_client) return sim.label_client();
  return std::nullopt;
}

inline std::vector<std::vector<std::size_t>> batch_rows(std::size_t n, std::size_t batch_size, bool shuffle,
                                                        std::uint64_t shuffle_seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (shuffle) {
    Rng rng(shuffle_seed);
    rng.shuffle(order);
  }
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace detail

/// Forward-only pass over `data` in order, one presence mask per batch.
/// Sends no gradient messages and updates nothing.
inline MetricsReport evaluate_with_drop(const Simulation& sim, const SplitDataset& data, const DropSchedule& drop,
                                        std::size_t batch_size = 256, TrafficLog* log = nullptr) {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (data.rows() == 0) throw DataError("evaluation set is empty");
  std::vector<std::size_t> predicted;
  predicted.reserve(data.rows());
  double loss_sum = 0.0;
  const auto batches = detail::batch_rows(data.rows(), batch_size, false, 0);
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const auto mask = apply_drop(drop, b, sim.clients(), detail::protected_index(sim, drop));
    const auto batch = make_batch(data, batches[b]);
    const auto res = sim.infer(batch, mask, log);
    loss_sum += *res.loss * static_cast<double>(batches[b].size());
    const auto p = argmax_rows(res.logits);
    predicted.insert(predicted.end(), p.begin(), p.end());
  }
  auto report = evaluate(predicted, data.labels, data.n_classes);
  report.loss = loss_sum / static_cast<double>(data.rows());
  return report;
}

/// Mini-batch training. The final short batch is kept. Per epoch: the
/// row-weighted mean training loss, train metrics from a full-presence pass
/// over the training set, and test metrics under `test_drop`. Evaluation
/// traffic is tallied apart from training traffic.
inline TrainingResult run_training(Simulation& sim, const SplitDataset& train, const SplitDataset& test,
                                   const TrainOptions& opt) {
  if (opt.epochs == 0) throw ConfigError("epochs must be at least 1");
  if (opt.batch_size == 0) throw ConfigError("batch_size must be at least 1");
  if (train.clients() != sim.clients() || test.clients() != sim.clients()) {
    throw ConfigError("dataset client count does not match the simulation");
  }
  TrainingResult result;
  result.train_traffic = TrafficLog(sim.parties());
  result.eval_traffic = TrafficLog(sim.parties());
  const DropSchedule no_drop{};
  std::uint64_t iteration = 0;
  for (std::size_t epoch = 1; epoch <= opt.epochs; ++epoch) {
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_traffic = TrafficLog(sim.parties());
    rec.eval_traffic = TrafficLog(sim.parties());
    const auto shuffle_seed = derive_seed(opt.shuffle_seed, 0x5EF, epoch);
    double loss_sum = 0.0;
    for (const auto& rows : detail::batch_rows(train.rows(), opt.batch_size, opt.shuffle, shuffle_seed)) {
      const auto mask = apply_drop(opt.train_drop, iteration++, sim.clients(),
                                   detail::protected_index(sim, opt.train_drop));
      const auto res = sim.train_iteration(make_batch(train, rows), mask, &rec.train_traffic);
      loss_sum += res.loss * static_cast<double>(rows.size());
    }
    rec.train = evaluate_with_drop(sim, train, no_drop, 256, &rec.eval_traffic);
    rec.train.loss = loss_sum / static_cast<double>(train.rows());
    rec.train.epoch = epoch;
    rec.test = evaluate_with_drop(sim, test, opt.test_drop, 256, &rec.eval_traffic);
    rec.test.epoch = epoch;
    result.train_traffic += rec.train_traffic;
    result.eval_traffic += rec.eval_traffic;
    result.epochs.push_back(std::move(rec));
  }
  return result;
}

}  // namespace vsplit
