// Command-line front end: closed-loop experiments, observer-set tools, and a
// small-instance filter check against the exact oracle.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sisctl/sisctl.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitModel = 3;

int run_command(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out,
                const std::string& format, std::optional<std::size_t> threads) {
  sisctl::ExperimentConfig cfg = sisctl::load_config(config_path);
  if (seed) cfg.seed = *seed;
  if (threads) cfg.threads = *threads;
  const auto records = sisctl::run_closed_loop(cfg);
  sisctl::emit(records, format == "json" ? sisctl::OutputFormat::json : sisctl::OutputFormat::csv, out);

  std::size_t solved = 0;
  double worst_slack = 0.0;
  for (const auto& r : records)
    for (const auto& s : r.steps) {
      worst_slack = solved++ == 0 ? s.slack : std::min(worst_slack, s.slack);
    }
  std::printf("graph: n=%zu edges=%zu d_max=%zu observers=%zu\n", cfg.graph.node_count(), cfg.graph.edge_count(),
              cfg.graph.max_in_degree(), cfg.observers.count());
  std::printf("replications=%zu horizon=%zu seed=%llu\n", cfg.replications, cfg.horizon,
              static_cast<unsigned long long>(cfg.seed));
  std::printf("solved steps=%zu worst certified slack=%.3e\n", solved, worst_slack);
  std::printf("wrote %s\n", out.c_str());
  return kExitOk;
}

int cover_command(const std::string& graph_path, const std::vector<sisctl::NodeId>& explicit_observers) {
  const sisctl::SpreadingGraph g = sisctl::load_graph_file(graph_path);
  const sisctl::MoralGraph m = sisctl::moralize(g);
  std::printf("n=%zu edges=%zu d_max=%zu moral_edges=%zu\n", g.node_count(), g.edge_count(), g.max_in_degree(),
              m.edge_count());
  if (!explicit_observers.empty()) {
    sisctl::ObserverSet o = sisctl::ObserverSet::of(g.node_count(), explicit_observers);
    const bool ok = sisctl::is_vertex_cover(m, o);
    std::printf("observer set of size %zu %s\n", o.count(), ok ? "covers mor(G)" : "does NOT cover mor(G)");
    if (!ok) {
      for (auto [u, v] : m.edges())
        if (!o.contains(u) && !o.contains(v)) std::printf("uncovered: {%u,%u}\n", u, v);
      return kExitConfig;
    }
    return kExitOk;
  }
  const sisctl::ObserverSet cover = sisctl::approx_min_cover(m);
  std::printf("auto cover size=%zu\nmembers:", cover.count());
  for (auto i : cover.members()) std::printf(" %u", i);
  std::printf("\n");
  return kExitOk;
}

int oracle_check_command(std::size_t instances, std::size_t steps, std::uint64_t seed, std::size_t min_nodes,
                         std::size_t max_nodes, double tolerance) {
  if (min_nodes < 1 || min_nodes > max_nodes || max_nodes > 12)
    throw sisctl::ConfigError("node range must satisfy 1 <= min <= max <= 12");
  sisctl::RngStream rng(seed);
  double worst_inference = 0.0, worst_prediction = 0.0;
  for (std::size_t k = 0; k < instances; ++k) {
    const sisctl::RandomInstance inst = sisctl::random_instance(rng, min_nodes, max_nodes);
    std::vector<sisctl::SISParams> schedule;
    for (std::size_t t = 0; t < steps; ++t) schedule.push_back(sisctl::random_params(inst.graph, rng, 0.1, 0.9));
    const auto cmp =
        sisctl::compare_with_oracle(inst.graph, inst.observers, inst.initial, inst.prior, schedule, rng);
    worst_inference = std::max(worst_inference, cmp.max_inference_error);
    worst_prediction = std::max(worst_prediction, cmp.max_prediction_error);
    std::printf("instance %zu: n=%zu edges=%zu observers=%zu inference_err=%.3e prediction_err=%.3e\n", k,
                inst.graph.node_count(), inst.graph.edge_count(), inst.observers.count(), cmp.max_inference_error,
                cmp.max_prediction_error);
  }
  const bool ok = worst_inference <= tolerance && worst_prediction <= tolerance;
  std::printf("%s: worst inference error %.3e, worst prediction error %.3e (tolerance %.1e)\n",
              ok ? "PASS" : "FAIL", worst_inference, worst_prediction, tolerance);
  return ok ? kExitOk : kExitFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inference, prediction and feedback control of the networked SIS process"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a closed-loop experiment from a config file");
  std::string config_path, out = "run.csv", format = "csv";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  run->add_option("config", config_path, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--seed", seed, "Override the master seed");
  run->add_option("--out,-o", out, "Output path");
  run->add_option("--format", format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  run->add_option("--threads", threads, "Worker threads (0 = hardware concurrency)");

  auto* cover = app.add_subcommand("cover", "Compute or validate an observer set for a graph file");
  std::string graph_path;
  std::vector<sisctl::NodeId> observers;
  cover->add_option("graph", graph_path, "Graph file (JSON with n and edges)")->required()->check(CLI::ExistingFile);
  cover->add_option("--observers", observers, "Observer set to validate")->delimiter(',');

  auto* oracle = app.add_subcommand("oracle-check", "Compare the filter with the exact joint filter");
  std::size_t instances = 20, steps = 50, min_nodes = 4, max_nodes = 8;
  std::uint64_t check_seed = 1;
  double tolerance = 1e-9;
  oracle->add_option("--instances", instances, "Number of random instances");
  oracle->add_option("--steps", steps, "Steps per trajectory");
  oracle->add_option("--seed", check_seed, "Seed");
  oracle->add_option("--min-nodes", min_nodes, "Smallest graph");
  oracle->add_option("--max-nodes", max_nodes, "Largest graph (<= 12)");
  oracle->add_option("--tolerance", tolerance, "Allowed absolute error");

  app.add_subcommand("version", "Print the version");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (run->parsed()) return run_command(config_path, seed, out, format, threads);
    if (cover->parsed()) return cover_command(graph_path, observers);
    if (oracle->parsed())
      return oracle_check_command(instances, steps, check_seed, min_nodes, max_nodes, tolerance);
    std::printf("sisctl %s\n", sisctl::kVersion);
    return kExitOk;
  } catch (const sisctl::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return kExitConfig;
  } catch (const sisctl::ModelError& e) {
    std::fprintf(stderr, "model error: %s\n", e.what());
    return kExitModel;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
}
