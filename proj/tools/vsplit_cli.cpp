// vsplit: run, cost, dropsweep and gradcheck for vertically split training.
//
// Exit codes: 0 success, 1 configuration or data error, 2 verification failure.

#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vsplit/experiment.hpp"

namespace {

constexpr int kExitError = 1;
constexpr int kExitVerify = 2;

struct Common {
  std::string config_path;
  std::uint64_t seed = 42;
  bool seed_given = false;
  std::vector<std::string> overrides;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "experiment config (JSON)");
  cmd->add_option("--seed", c.seed, "master seed (default 42)");
  cmd->add_option("--set", c.overrides, "override a config key, e.g. --set merge=avg --set optimizer.learning_rate=0.05")
      ->take_all();
  cmd->add_option("--out", c.out, "output directory");
}

vsplit::ExperimentConfig load_config(const Common& c, const CLI::App* cmd) {
  vsplit::json doc = c.config_path.empty() ? vsplit::json::object() : vsplit::read_json_file(c.config_path);
  for (const auto& o : c.overrides) vsplit::apply_override(doc, o);
  auto cfg = vsplit::config_from_json(doc);
  if (cmd->count("--seed") > 0 || !doc.contains("seed")) cfg.seed = c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  return cfg;
}

std::vector<std::size_t> parse_list(const std::string& text, const std::string& what) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto v = vsplit::detail::parse_number(item);
    if (!v || *v < 0 || *v != static_cast<double>(static_cast<std::size_t>(*v))) {
      throw vsplit::ConfigError(what + ": '" + item + "' is not a non-negative integer");
    }
    out.push_back(static_cast<std::size_t>(*v));
  }
  if (out.empty()) throw vsplit::ConfigError(what + " is empty");
  return out;
}

int cmd_run(const Common& c, const CLI::App* cmd) {
  const auto cfg = load_config(c, cmd);
  const auto report = vsplit::run_experiment(cfg);
  vsplit::write_run_outputs(report, cfg.output_dir);
  vsplit::print_run_table(report, std::cout);
  std::cout << "wrote " << (std::filesystem::path(cfg.output_dir) / "report.json").string() << '\n';
  return 0;
}

int cmd_cost(const Common& c, const CLI::App* cmd, bool measure, bool as_json) {
  const auto cfg = load_config(c, cmd);
  const auto report = vsplit::compute_cost(cfg, measure);
  if (as_json) {
    std::cout << vsplit::cost_json(report).dump(2) << '\n';
  } else {
    std::cout << "training rows: " << report.train_rows << " (bytes for one epoch without drops)\n";
    vsplit::print_cost_table(report, std::cout);
  }
  return report.matches() ? 0 : kExitVerify;
}

int cmd_dropsweep(const Common& c, const CLI::App* cmd, const std::string& phase, const std::string& counts,
                  std::size_t seeds) {
  const auto cfg = load_config(c, cmd);
  const auto rows = vsplit::run_dropsweep(cfg, vsplit::parse_phase(phase), parse_list(counts, "--counts"), seeds);
  std::cout << "drop_count,median_accuracy,median_f1\n" << std::setprecision(6);
  for (const auto& r : rows) std::cout << r.drop_count << ',' << r.median_accuracy << ',' << r.median_f1 << '\n';
  return 0;
}

int cmd_gradcheck(const std::string& strategy, std::size_t k, const std::string& dims, std::size_t hidden,
                  std::size_t classes, std::uint64_t seed) {
  vsplit::GradcheckOptions o;
  o.merge = vsplit::parse_merge_kind(strategy);
  o.clients = k;
  o.client_dims = parse_list(dims, "--dims");
  o.server_hidden = hidden;
  o.classes = classes;
  o.seed = seed;
  const auto result = vsplit::run_gradcheck(o);
  vsplit::print_gradcheck_table(result, std::cout);
  std::cout << (result.passed() ? "gradcheck passed\n" : "gradcheck FAILED\n");
  return result.passed() ? 0 : kExitVerify;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vertically split neural network training"};
  app.require_subcommand(1);

  Common run_opts, cost_opts, sweep_opts;
  auto* run = app.add_subcommand("run", "train and write metrics.jsonl and report.json");
  add_common(run, run_opts);

  auto* cost = app.add_subcommand("cost", "per-party parameters, FLOPs and predicted traffic");
  add_common(cost, cost_opts);
  bool measure = false, cost_json = false;
  cost->add_flag("--measure", measure, "also train one epoch and compare measured traffic");
  cost->add_flag("--json", cost_json, "print JSON instead of a table");

  auto* sweep = app.add_subcommand("dropsweep", "accuracy against number of dropped clients");
  add_common(sweep, sweep_opts);
  std::string phase = "test", counts = "0,1,2,3";
  std::size_t seeds = 5;
  sweep->add_option("--phase", phase, "train or test")->check(CLI::IsMember({"train", "test"}));
  sweep->add_option("--counts", counts, "comma-separated drop counts");
  sweep->add_option("--seeds", seeds, "seeds per count (median reported)");

  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of protocol gradients");
  std::string strategy = "max", dims = "4,3";
  std::size_t k = 2, hidden = 4, classes = 3;
  std::uint64_t grad_seed = 42;
  grad->add_option("--strategy", strategy, "concat, max, avg, sum or mul");
  grad->add_option("--clients,-K", k, "number of clients");
  grad->add_option("--dims", dims, "client layer sizes from input to cut");
  grad->add_option("--hidden", hidden, "server width");
  grad->add_option("--classes", classes, "number of classes");
  grad->add_option("--seed", grad_seed, "seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitError;
  }

  try {
    if (*run) return cmd_run(run_opts, run);
    if (*cost) return cmd_cost(cost_opts, cost, measure, cost_json);
    if (*sweep) return cmd_dropsweep(sweep_opts, sweep, phase, counts, seeds);
    if (*grad) return cmd_gradcheck(strategy, k, dims, hidden, classes, grad_seed);
  } catch (const vsplit::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
