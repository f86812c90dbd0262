#include <gtest/gtest.h>

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "vsplit/experiment.hpp"

namespace fs = std::filesystem;
using namespace vsplit;

namespace {

const std::string kCli = VSPLIT_CLI_PATH;
const fs::path kSource = VSPLIT_SOURCE_DIR;

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("vsplit_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

CliResult cli(const std::string& args) {
  const auto dir = scratch("cli_io");
  const std::string cmd = "cd '" + kSource.string() + "' && '" + kCli + "' " + args + " > '" +
                          (dir / "out").string() + "' 2> '" + (dir / "err").string() + "'";
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(dir / "out");
  r.err = slurp(dir / "err");
  return r;
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

ExperimentConfig small_synthetic(std::size_t epochs = 3) {
  json doc = {{"dataset", {{"source", "synthetic"}, {"n_samples", 300}, {"n_features", 8}, {"n_classes", 3},
                           {"informative_per_client", {2, 2}}, {"separation", 3.0}}},
              {"plan", {{"mode", "contiguous"}, {"clients", 2}}},
              {"clients", {{"layers", {6, 4}}, {"activations", "tanh"}}},
              {"server", {{"layers", {8}}, {"activations", "relu"}}},
              {"head", {{"layers", {3}}, {"activations", "identity"}}},
              {"merge", "max"},
              {"epochs", epochs}};
  return config_from_json(doc);
}

}  // namespace

// ---------------------------------------------------------------------------
// config

TEST(ConfigTest, ShippedConfigsRoundTrip) {
  for (const char* name : {"configs/synthetic_max.json", "configs/bank_marketing.json"}) {
    const auto cfg = config_from_json(read_json_file((kSource / name).string()));
    const auto again = config_from_json(config_to_json(cfg));
    EXPECT_EQ(cfg, again) << name;
    EXPECT_EQ(config_to_json(cfg).dump(), config_to_json(again).dump()) << name;
  }
}

TEST(ConfigTest, RoundTripPreservesEveryField) {
  ExperimentConfig cfg;
  cfg.dataset = CsvSource{"x.csv", "label", {{"a", "numeric"}, {"b", "categorical"}}, "s.json", ";"};
  cfg.test_fraction = 0.3;
  cfg.plan.mode = "by_list";
  cfg.plan.columns = {{ColumnRef{std::size_t{2}}, ColumnRef{std::string("a")}}, {ColumnRef{std::string("b")}}};
  cfg.plan.clients = 2;
  cfg.label_client = 1;
  cfg.client_layers = {LayerSpec{{5}, {Activation::tanh}}, LayerSpec{{5}, {Activation::identity}}};
  cfg.server = LayerSpec{{7, 6}, {Activation::relu, Activation::tanh}};
  cfg.head = LayerSpec{{2}, {Activation::identity}};
  cfg.merge = MergeKind::mul;
  cfg.optimizer = {0.125, 0.5};
  cfg.epochs = 3;
  cfg.batch_size = 17;
  cfg.seed = 0xFFFFFFFFFFFFFFFFULL;
  cfg.train_drop = {Phase::train, DropMode::probability, 0, 0.25, 0, false};
  cfg.test_drop = {Phase::test, DropMode::fixed_count, 1, 0.0, 0, true};
  cfg.wire_element_size = 8;
  cfg.output_dir = "elsewhere";
  EXPECT_EQ(config_from_json(config_to_json(cfg)), cfg);
}

TEST(ConfigTest, EmptyDocumentGivesDefaults) {
  const auto cfg = config_from_json(json::object());
  EXPECT_TRUE(std::holds_alternative<SyntheticSource>(cfg.dataset));
  EXPECT_EQ(cfg.seed, 42u);
  EXPECT_EQ(cfg.plan.clients, 4u);
  const auto report = run_experiment([] {
    auto c = config_from_json(json::object());
    c.epochs = 1;
    return c;
  }());
  EXPECT_EQ(report.epochs.size(), 1u);
}

TEST(ConfigTest, OverridesFollowDottedPaths) {
  json doc = read_json_file((kSource / "configs/synthetic_max.json").string());
  apply_override(doc, "merge=avg");
  apply_override(doc, "optimizer.learning_rate=0.05");
  apply_override(doc, "clients.layers.1=5");
  apply_override(doc, "output_dir=some/dir");
  apply_override(doc, "epochs=3");
  apply_override(doc, "epochs=4");
  const auto cfg = config_from_json(doc);
  EXPECT_EQ(cfg.merge, MergeKind::avg);
  EXPECT_DOUBLE_EQ(cfg.optimizer.learning_rate, 0.05);
  EXPECT_EQ(cfg.client_layer(0).units, (std::vector<std::size_t>{16, 5}));
  EXPECT_EQ(cfg.output_dir, "some/dir");
  EXPECT_EQ(cfg.epochs, 4u);
}

TEST(ConfigTest, BadInputsAreConfigErrors) {
  json doc = json::object();
  EXPECT_THROW(apply_override(doc, "novalue"), ConfigError);
  EXPECT_THROW(apply_override(doc, "=3"), ConfigError);
  EXPECT_THROW(apply_override(doc, "a..b=3"), ConfigError);
  json arr = {{"xs", {1, 2}}};
  EXPECT_THROW(apply_override(arr, "xs.5=1"), ConfigError);
  EXPECT_THROW(config_from_json({{"merge", "median"}}), ConfigError);
  EXPECT_THROW(config_from_json({{"epochs", 0}}), ConfigError);
  EXPECT_THROW(config_from_json({{"epochs", "many"}}), ConfigError);
  EXPECT_THROW(config_from_json({{"dataset", {{"source", "sql"}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"plan", {{"mode", "random"}}}}), ConfigError);
  EXPECT_THROW(config_from_json({{"optimizer", {{"learning_rate", -1.0}}}}), ConfigError);
  EXPECT_THROW(read_json_file("/nonexistent/config.json"), ConfigError);
}

TEST(ConfigTest, SimulationConfigChecks) {
  auto cfg = small_synthetic();
  cfg.head.units = {4};
  EXPECT_THROW(run_experiment(cfg), ConfigError);
  cfg = small_synthetic();
  cfg.client_layers = {LayerSpec{{4}, {Activation::tanh}}, LayerSpec{{5}, {Activation::tanh}}};
  EXPECT_THROW(run_experiment(cfg), ConfigError);  // max needs equal cut widths
  cfg.merge = MergeKind::concat;
  EXPECT_NO_THROW(run_experiment(cfg));
  cfg = small_synthetic();
  cfg.label_client = 2;
  EXPECT_THROW(run_experiment(cfg), ConfigError);
  cfg = small_synthetic();
  cfg.client_layers.assign(3, cfg.client_layers.front());
  EXPECT_THROW(run_experiment(cfg), ConfigError);
}

TEST(ConfigTest, DigestTracksContent) {
  auto a = small_synthetic();
  auto b = small_synthetic();
  EXPECT_EQ(config_digest(a), config_digest(b));
  b.output_dir = "elsewhere";
  EXPECT_EQ(config_digest(a), config_digest(b));
  b.seed = 43;
  EXPECT_NE(config_digest(a), config_digest(b));
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
}

// ---------------------------------------------------------------------------
// experiment API

TEST(ExperimentTest, ReportRecordsEveryEpoch) {
  const auto report = run_experiment(small_synthetic(4));
  ASSERT_EQ(report.epochs.size(), 4u);
  for (std::size_t e = 0; e < 4; ++e) EXPECT_EQ(report.epochs[e].epoch, e + 1);
  EXPECT_EQ(report.final_metrics.accuracy, report.epochs.back().test.accuracy);
  ASSERT_EQ(report.parties.size(), 3u);
  EXPECT_EQ(report.parties[0].role, Role::role0);
  EXPECT_EQ(report.parties[1].role, Role::role3);
  EXPECT_EQ(report.parties[2].role, Role::role1);
}

TEST(ExperimentTest, ReportJsonSchema) {
  const auto j = report_json(run_experiment(small_synthetic(2)));
  for (const char* key : {"config_digest", "epochs", "final", "traffic", "parties"}) EXPECT_TRUE(j.contains(key)) << key;
  for (const char* key : {"acc", "f1", "loss"}) EXPECT_TRUE(j["final"].contains(key)) << key;
  for (const char* role : {"role0", "role1", "role3"}) {
    EXPECT_TRUE(j["traffic"]["per_role"][role].contains("sent"));
    EXPECT_TRUE(j["traffic"]["per_role"][role].contains("received"));
  }
  for (const auto& p : j["parties"]) {
    for (const char* key : {"id", "role", "params", "flops_per_sample"}) EXPECT_TRUE(p.contains(key)) << key;
  }
  const auto& roles = j["traffic"]["per_role"];
  EXPECT_EQ(roles["role0"]["received"].get<std::uint64_t>(),
            roles["role1"]["sent"].get<std::uint64_t>() + roles["role3"]["sent"].get<std::uint64_t>());
}

TEST(ExperimentTest, PredictedBytesMatchMeasuredForEveryStrategy) {
  for (const auto kind : kAllMergeKinds) {
    auto cfg = small_synthetic(1);
    cfg.merge = kind;
    cfg.batch_size = 7;  // ragged final batch
    const auto cost = compute_cost(cfg, true);
    ASSERT_TRUE(cost.measured.has_value());
    EXPECT_TRUE(cost.matches()) << to_string(kind);
  }
}

TEST(ExperimentTest, CostConservationAndLinearity) {
  auto cfg = small_synthetic(1);
  const auto base = compute_cost(cfg, false);
  std::uint64_t client_sent = 0;
  for (std::size_t p = 1; p < base.predicted.size(); ++p) client_sent += base.predicted[p].sent;
  const std::uint64_t head_hop = base.train_rows * cfg.server.units.back() * cfg.wire_element_size;
  // role0 receives every cut activation plus the head's gradient
  EXPECT_EQ(base.predicted[kServerId].received, client_sent);
  EXPECT_EQ(base.predicted[kServerId].sent, client_sent);
  EXPECT_EQ(base.predicted[1].sent - head_hop, base.predicted[2].sent);

  auto wide = cfg;
  wide.client_layers.front().units.back() *= 2;
  const auto doubled = compute_cost(wide, false);
  for (std::size_t p = 2; p < base.predicted.size(); ++p) {
    EXPECT_EQ(doubled.predicted[p].sent, 2 * base.predicted[p].sent);
    EXPECT_EQ(doubled.predicted[p].received, 2 * base.predicted[p].received);
  }
  EXPECT_EQ(doubled.predicted[1].sent - head_hop, 2 * (base.predicted[1].sent - head_hop));
}

TEST(ExperimentTest, SingleLayerPartyHasFifteenParams) {
  auto cfg = small_synthetic(1);
  cfg.client_layers = {LayerSpec{{3}, {Activation::relu}}};  // 4 features per client -> 3
  const auto cost = compute_cost(cfg, false);
  EXPECT_EQ(cost.parties[2].params, 15u);
  EXPECT_EQ(cost.parties[2].flops_per_sample, 2u * 4 * 3 + 3 + 3);
}

TEST(ExperimentTest, DropsweepZeroMatchesRun) {
  auto cfg = small_synthetic(3);
  cfg.seed = 7;
  const auto run = run_experiment(cfg);
  const auto rows = run_dropsweep(cfg, Phase::test, {0}, 1);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].median_accuracy, run.final_metrics.accuracy);
  EXPECT_EQ(rows[0].median_f1, run.final_metrics.f1);
  const auto train_rows = run_dropsweep(cfg, Phase::train, {0}, 1);
  EXPECT_EQ(train_rows[0].median_accuracy, run.final_metrics.accuracy);
}

TEST(ExperimentTest, DropsweepShapeAndValidation) {
  auto cfg = config_from_json(read_json_file((kSource / "configs/synthetic_max.json").string()));
  cfg.epochs = 2;
  const auto rows = run_dropsweep(cfg, Phase::test, {0, 1, 2, 3}, 3);
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) EXPECT_EQ(r.accuracies.size(), 3u);
  EXPECT_EQ(rows[0].median_accuracy, median(rows[0].accuracies));
  EXPECT_THROW(run_dropsweep(cfg, Phase::test, {4}, 1), ConfigError);
  EXPECT_THROW(run_dropsweep(cfg, Phase::test, {1}, 0), ConfigError);
  cfg.merge = MergeKind::concat;
  EXPECT_THROW(run_dropsweep(cfg, Phase::test, {1}, 1), ConfigError);
  EXPECT_NO_THROW(run_dropsweep(cfg, Phase::test, {0}, 1));
  EXPECT_DOUBLE_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_DOUBLE_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
}

TEST(ExperimentTest, GradcheckPassesEverywhereAndCatchesCorruption) {
  for (const auto kind : kAllMergeKinds) {
    for (const std::size_t k : {2u, 3u}) {
      GradcheckOptions o;
      o.merge = kind;
      o.clients = k;
      const auto r = run_gradcheck(o);
      EXPECT_TRUE(r.passed()) << to_string(kind) << " K=" << k;
      EXPECT_EQ(r.rows.size(), k + 2);  // server, k clients, head
    }
  }
  GradcheckOptions o;
  o.tolerance = 0.0;
  EXPECT_FALSE(run_gradcheck(o).passed());
  o.client_dims = {11, 3};
  EXPECT_THROW(run_gradcheck(o), ConfigError);
}

TEST(ExperimentTest, CsvPipelineWithBankShapedFile) {
  const auto dir = scratch("bank");
  const auto csv = dir / "bank.csv";
  {
    std::ofstream out(csv);
    out << "\"age\";\"job\";\"marital\";\"education\";\"default\";\"balance\";\"housing\";\"loan\";\"contact\";"
           "\"day\";\"month\";\"duration\";\"campaign\";\"pdays\";\"previous\";\"poutcome\";\"y\"\n";
    Rng rng(5);
    const char* jobs[] = {"admin.", "technician", "blue-collar", "retired"};
    const char* months[] = {"jan", "may", "jun", "nov"};
    for (int i = 0; i < 400; ++i) {
      const int duration = static_cast<int>(rng.below(900));
      const bool yes = duration > 600 || rng.uniform() < 0.05;
      out << 20 + rng.below(50) << ";\"" << jobs[rng.below(4)] << "\";\"married\";\"secondary\";\"no\";"
          << static_cast<int>(rng.below(5000)) - 500 << ";\"yes\";\"no\";\"cellular\";" << 1 + rng.below(28) << ";\""
          << months[rng.below(4)] << "\";" << duration << ";" << 1 + rng.below(5) << ";-1;0;\"unknown\";\""
          << (yes ? "yes" : "no") << "\"\n";
    }
  }
  json doc = read_json_file((kSource / "configs/bank_marketing.json").string());
  apply_override(doc, "dataset.path=" + csv.string());
  apply_override(doc, "dataset.schema_path=" + (kSource / "configs/bank_schema.json").string());
  apply_override(doc, "epochs=3");
  const auto cfg = config_from_json(doc);
  const auto data = prepare_data(cfg);
  EXPECT_EQ(data.train.n_classes, 2u);
  EXPECT_EQ(data.train.class_names, (std::vector<std::string>{"no", "yes"}));
  EXPECT_EQ(data.plan.clients(), 2u);
  const auto report = run_experiment(cfg);
  EXPECT_EQ(report.epochs.size(), 3u);
  EXPECT_GE(report.final_metrics.accuracy, 0.0);
  EXPECT_LE(report.final_metrics.f1, 1.0);

  apply_override(doc, "plan.columns.1.0=nonexistent");
  EXPECT_THROW(prepare_data(config_from_json(doc)), PlanError);
}

// ---------------------------------------------------------------------------
// command line

TEST(CliTest, RunWritesOneRecordPerEpoch) {
  const auto out = scratch("run5");
  const auto r = cli("run --config configs/synthetic_max.json --set epochs=5 --out '" + out.string() + "'");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_lines(slurp(out / "metrics.jsonl")), 5u);
  std::istringstream lines(slurp(out / "metrics.jsonl"));
  std::string line;
  std::size_t expect = 1;
  while (std::getline(lines, line)) {
    const auto rec = json::parse(line);
    EXPECT_EQ(rec["epoch"].get<std::size_t>(), expect++);
    EXPECT_TRUE(rec["train"].contains("acc"));
    EXPECT_TRUE(rec["test"].contains("f1"));
    EXPECT_TRUE(rec["traffic"]["role0"].contains("received"));
  }
  const auto report = json::parse(slurp(out / "report.json"));
  EXPECT_EQ(report["epochs"].get<std::size_t>(), 5u);
  EXPECT_NE(r.out.find("final test"), std::string::npos);
}

TEST(CliTest, RunIsByteDeterministic) {
  const auto a = scratch("det_a");
  const auto b = scratch("det_b");
  const std::string args = "run --config configs/synthetic_max.json --set epochs=3 --seed 9 --out ";
  ASSERT_EQ(cli(args + "'" + a.string() + "'").code, 0);
  ASSERT_EQ(cli(args + "'" + b.string() + "'").code, 0);
  EXPECT_EQ(slurp(a / "report.json"), slurp(b / "report.json"));
  EXPECT_EQ(slurp(a / "metrics.jsonl"), slurp(b / "metrics.jsonl"));
  const auto c = scratch("det_c");
  ASSERT_EQ(cli("run --config configs/synthetic_max.json --set epochs=3 --seed 10 --out '" + c.string() + "'").code, 0);
  EXPECT_NE(slurp(a / "report.json"), slurp(c / "report.json"));
}

TEST(CliTest, GradcheckCommands) {
  EXPECT_EQ(cli("gradcheck --strategy max -K 2").code, 0);
  const auto mul = cli("gradcheck --strategy mul -K 3");
  EXPECT_EQ(mul.code, 0);
  EXPECT_NE(mul.out.find("gradcheck passed"), std::string::npos);
  const auto start = std::chrono::steady_clock::now();
  for (const char* s : {"concat", "max", "avg", "sum", "mul"}) {
    EXPECT_EQ(cli(std::string("gradcheck --strategy ") + s).code, 0) << s;
  }
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 60.0);
}

TEST(CliTest, CostCommand) {
  const auto r = cli("cost --config configs/synthetic_max.json --measure --json");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json::parse(r.out);
  EXPECT_TRUE(j["measured_matches"].get<bool>());
  std::uint64_t client_sent = 0;
  for (const auto& p : j["parties"]) {
    if (p["id"].get<std::size_t>() != 0) client_sent += p["predicted"]["sent"].get<std::uint64_t>();
  }
  EXPECT_EQ(j["per_role_predicted"]["role0"]["received"].get<std::uint64_t>(), client_sent);
  const auto table = cli("cost --config configs/synthetic_max.json --set clients.layers=[3] --set dataset.n_features=16");
  ASSERT_EQ(table.code, 0) << table.err;
  EXPECT_NE(table.out.find(" 15 "), std::string::npos) << table.out;
  EXPECT_EQ(cli("cost --config configs/synthetic_max.json --measure").out,
            cli("cost --config configs/synthetic_max.json --measure").out);
}

TEST(CliTest, DropsweepCommand) {
  const std::string args = "dropsweep --config configs/synthetic_max.json --set epochs=2 --seeds 2 --counts 0,1,2";
  const auto r = cli(args);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_lines(r.out), 4u);  // header + one row per count
  EXPECT_EQ(r.out, cli(args).out);
  EXPECT_EQ(cli(args + " --phase train").code, 0);
}

TEST(CliTest, ErrorsExitOneWithOneLine) {
  for (const char* args : {"run --config /nonexistent.json", "run --set merge=median", "run --set plan.clients=50",
                           "cost --set batch_size=0", "dropsweep --counts 9", "gradcheck --strategy nope",
                           "gradcheck --dims 4,20"}) {
    const auto r = cli(args);
    EXPECT_EQ(r.code, 1) << args;
    EXPECT_EQ(count_lines(r.err), 1u) << args << ": " << r.err;
    EXPECT_EQ(r.err.rfind("error: ", 0), 0u) << r.err;
  }
  EXPECT_EQ(cli("").code, 1);
  EXPECT_EQ(cli("frobnicate").code, 1);
  EXPECT_EQ(cli("--help").code, 0);
}
