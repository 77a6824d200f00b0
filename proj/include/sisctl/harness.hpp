#pragma once

// Experiment driver: configuration documents, random graphs, the closed loop
// (observe, infer, control, step), and plot-ready output tables.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "sisctl/control.hpp"
#include "sisctl/errors.hpp"
#include "sisctl/filter.hpp"
#include "sisctl/graph.hpp"
#include "sisctl/random_graph.hpp"
#include "sisctl/rng.hpp"
#include "sisctl/sis.hpp"

namespace sisctl {

using json = nlohmann::json;

namespace detail {

inline void require_keys(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : obj.items())
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <typename T>
T get_required(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError("missing key '" + std::string(key) + "' in " + where);
  return get_or<T>(obj, key, T{}, where);
}

}  // namespace detail

/// Graph document: {"n": <int>, "edges": [[source, target], ...]}.
inline SpreadingGraph graph_from_json(const json& doc, const std::string& where = "graph") {
  detail::require_keys(doc, {"n", "edges"}, where);
  const auto n = detail::get_required<std::size_t>(doc, "n", where);
  std::vector<Edge> edges;
  for (const auto& pair : detail::get_or<json>(doc, "edges", json::array(), where)) {
    if (!pair.is_array() || pair.size() != 2) throw ConfigError(where + ".edges entries must be [source, target]");
    edges.push_back({pair[0].get<NodeId>(), pair[1].get<NodeId>()});
  }
  try {
    return SpreadingGraph(n, std::move(edges));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

inline json graph_to_json(const SpreadingGraph& g) {
  json edges = json::array();
  for (const Edge& e : g.edges()) edges.push_back({e.source, e.target});
  return {{"n", g.node_count()}, {"edges", edges}};
}

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

inline SpreadingGraph load_graph_file(const std::filesystem::path& path) {
  return graph_from_json(read_json_file(path), path.string());
}

struct AllInfected {};
struct InfectionProbability {
  double p;
};
struct ExplicitState {
  std::vector<std::uint8_t> x;
};
using InitialCondition = std::variant<AllInfected, InfectionProbability, ExplicitState>;

struct ExperimentConfig {
  SpreadingGraph graph;
  ObserverSet observers;
  ControlSpec control;
  InitialCondition initial = AllInfected{};
  std::optional<std::vector<double>> prior;
  std::size_t horizon = 50;
  std::size_t replications = 200;
  std::uint64_t seed = 1;
  /// 0 means one thread per hardware core.
  std::size_t threads = 0;
};

namespace detail {

inline CostTerm parse_cost(const json& doc, const std::string& where, const SpreadingGraph& g, double w,
                           bool for_edges) {
  const auto type = get_required<std::string>(doc, "type", where);
  if (type == "affine") {
    require_keys(doc, {"type", "offset", "slope"}, where);
    return CostTerm::affine(get_or(doc, "offset", 0.0, where), get_required<double>(doc, "slope", where));
  }
  if (type == "power") {
    require_keys(doc, {"type", "coef", "exponent"}, where);
    return CostTerm::power(get_or(doc, "coef", 1.0, where), get_required<double>(doc, "exponent", where));
  }
  if (type == "piecewise_linear") {
    require_keys(doc, {"type", "points"}, where);
    return CostTerm::piecewise_linear(get_required<std::vector<std::pair<double, double>>>(doc, "points", where));
  }
  if (type == "healing_rate" && !for_edges) {
    require_keys(doc, {"type"}, where);
    return CostTerm::healing_rate();
  }
  if (type == "survival_power" && for_edges) {
    require_keys(doc, {"type", "coef", "k"}, where);
    const double default_k = g.max_in_degree() > 0 ? static_cast<double>(g.max_in_degree()) - 1.0 : 0.0;
    return CostTerm::survival_power(get_or(doc, "coef", 1.0, where), get_or(doc, "k", default_k, where), w);
  }
  throw ConfigError(where + ": unsupported cost type '" + type + "'");
}

inline Interval parse_interval(const json& doc, const char* key, Interval fallback, const std::string& where) {
  if (!doc.contains(key)) return fallback;
  const auto v = get_or<std::vector<double>>(doc, key, {}, where);
  if (v.size() != 2) throw ConfigError(where + "." + key + " must be [lo, hi]");
  return {v[0], v[1]};
}

inline SpreadingGraph parse_graph_section(const json& doc, const std::filesystem::path& base_dir) {
  if (doc.contains("generator")) {
    require_keys(doc, {"generator", "n", "p", "seed"}, "graph");
    if (get_required<std::string>(doc, "generator", "graph") != "erdos_renyi")
      throw ConfigError("graph.generator must be 'erdos_renyi'");
    try {
      return generate_er_graph(get_required<std::size_t>(doc, "n", "graph"),
                               get_required<double>(doc, "p", "graph"),
                               get_or<std::uint64_t>(doc, "seed", 0, "graph"));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("graph: ") + e.what());
    }
  }
  if (doc.contains("file")) {
    require_keys(doc, {"file"}, "graph");
    std::filesystem::path path = get_required<std::string>(doc, "file", "graph");
    if (path.is_relative()) path = base_dir / path;
    return load_graph_file(path);
  }
  return graph_from_json(doc);
}

}  // namespace detail

/// Parses a configuration document with sections graph, observers, control
/// and run. Relative graph file paths resolve against `base_dir`. Unknown
/// keys are rejected.
inline ExperimentConfig parse_config(const json& doc, const std::filesystem::path& base_dir = ".") {
  detail::require_keys(doc, {"graph", "observers", "control", "run"}, "config");
  if (!doc.contains("graph")) throw ConfigError("config needs a graph section");
  ExperimentConfig cfg{detail::parse_graph_section(doc.at("graph"), base_dir), ObserverSet(), ControlSpec(),
                       AllInfected{}, std::nullopt};
  const SpreadingGraph& g = cfg.graph;
  const std::size_t n = g.node_count();

  const json observers = doc.value("observers", json("auto"));
  if (observers.is_string()) {
    if (observers.get<std::string>() != "auto") throw ConfigError("observers must be \"auto\" or a list of nodes");
    cfg.observers = approx_min_cover(moralize(g));
  } else if (observers.is_array()) {
    const auto members = observers.get<std::vector<NodeId>>();
    try {
      cfg.observers = ObserverSet::of(n, members);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("observers: ") + e.what());
    }
    if (!is_vertex_cover(moralize(g), cfg.observers))
      throw ConfigError("observers do not form a vertex cover of the moralized graph");
  } else {
    throw ConfigError("observers must be \"auto\" or a list of nodes");
  }

  const json control = doc.value("control", json::object());
  detail::require_keys(control,
                       {"decay_rate", "exponent", "node_cost", "edge_cost", "delta_c_bounds", "gamma_bounds"},
                       "control");
  ControlSpec& spec = cfg.control;
  spec.decay_rate = detail::get_or(control, "decay_rate", 0.8, "control");
  spec.exponent = detail::get_or(control, "exponent", static_cast<double>(g.max_in_degree()) + 1.0, "control");
  const json node_cost = control.value("node_cost", json{{"type", "healing_rate"}});
  const json edge_cost = control.value("edge_cost", json{{"type", "survival_power"}});
  try {
    spec.node_cost.assign(n, detail::parse_cost(node_cost, "control.node_cost", g, spec.exponent, false));
    spec.edge_cost.assign(g.edge_count(),
                          detail::parse_cost(edge_cost, "control.edge_cost", g, spec.exponent, true));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("control: ") + e.what());
  }
  spec.delta_c_box = detail::parse_interval(control, "delta_c_bounds", spec.delta_c_box, "control");
  spec.gamma_box = detail::parse_interval(control, "gamma_bounds", spec.gamma_box, "control");
  try {
    spec.validate(g);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("control: ") + e.what());
  }

  const json run = doc.value("run", json::object());
  detail::require_keys(run, {"horizon", "replications", "seed", "initial", "prior", "threads"}, "run");
  cfg.horizon = detail::get_or<std::size_t>(run, "horizon", 50, "run");
  cfg.replications = detail::get_or<std::size_t>(run, "replications", 200, "run");
  cfg.seed = detail::get_or<std::uint64_t>(run, "seed", 1, "run");
  cfg.threads = detail::get_or<std::size_t>(run, "threads", 0, "run");
  if (cfg.replications == 0) throw ConfigError("run.replications must be positive");
  if (run.contains("initial")) {
    const json& init = run.at("initial");
    if (init.is_string()) {
      if (init.get<std::string>() != "all_infected") throw ConfigError("run.initial: unknown value");
      cfg.initial = AllInfected{};
    } else if (init.is_object() && init.contains("infection_probability")) {
      detail::require_keys(init, {"infection_probability"}, "run.initial");
      const auto p = detail::get_required<double>(init, "infection_probability", "run.initial");
      if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("run.initial.infection_probability outside [0,1]");
      cfg.initial = InfectionProbability{p};
    } else if (init.is_object() && init.contains("state")) {
      detail::require_keys(init, {"state"}, "run.initial");
      auto x = detail::get_required<std::vector<std::uint8_t>>(init, "state", "run.initial");
      if (x.size() != n || std::any_of(x.begin(), x.end(), [](auto v) { return v > 1; }))
        throw ConfigError("run.initial.state must hold n values in {0,1}");
      cfg.initial = ExplicitState{std::move(x)};
    } else {
      throw ConfigError("run.initial must be \"all_infected\", {\"infection_probability\": p} or {\"state\": [...]}");
    }
  }
  if (run.contains("prior")) {
    auto prior = detail::get_required<std::vector<double>>(run, "prior", "run");
    if (prior.size() != n || std::any_of(prior.begin(), prior.end(), [](double v) { return !(v >= 0 && v <= 1); }))
      throw ConfigError("run.prior must hold n probabilities");
    cfg.prior = std::move(prior);
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_json_file(path), path.parent_path());
}

struct PhaseTimings {
  double filter_seconds = 0.0;
  double control_seconds = 0.0;
  double simulate_seconds = 0.0;
};

struct StepRecord {
  std::size_t t = 0;
  std::size_t infected = 0;
  double belief_sum = 0.0;
  double objective = 0.0;
  double slack = 0.0;
  PhaseTimings wall;
};

/// One replication of the closed loop: rows for t = 0..horizon.
struct RunRecord {
  std::size_t replication = 0;
  std::vector<StepRecord> steps;
};

inline ProcessState initial_state(const ExperimentConfig& cfg, RngStream& rng) {
  const std::size_t n = cfg.graph.node_count();
  return std::visit(
      [&](const auto& init) -> ProcessState {
        using T = std::decay_t<decltype(init)>;
        if constexpr (std::is_same_v<T, AllInfected>) {
          return ProcessState::all_infected(n);
        } else if constexpr (std::is_same_v<T, InfectionProbability>) {
          ProcessState s = ProcessState::all_healthy(n);
          for (auto& v : s.x) v = rng.bernoulli(init.p) ? 1 : 0;
          return s;
        } else {
          return ProcessState{init.x, 0};
        }
      },
      cfg.initial);
}

/// Prior for unobserved nodes: the configured one, else the known initial
/// state, else the initial infection probability.
inline std::vector<double> initial_prior(const ExperimentConfig& cfg, const ProcessState& x0) {
  if (cfg.prior) return *cfg.prior;
  if (const auto* p = std::get_if<InfectionProbability>(&cfg.initial))
    return std::vector<double>(cfg.graph.node_count(), p->p);
  return std::vector<double>(x0.x.begin(), x0.x.end());
}

inline RunRecord run_replication(const ExperimentConfig& cfg, std::size_t replication) {
  using clock = std::chrono::steady_clock;
  auto seconds_since = [](clock::time_point start) {
    return std::chrono::duration<double>(clock::now() - start).count();
  };
  const SpreadingGraph& g = cfg.graph;
  RngStream rng(RngStream::derive(cfg.seed, replication));
  RunRecord record{replication, {}};
  record.steps.reserve(cfg.horizon + 1);

  ProcessState state = initial_state(cfg, rng);
  const std::vector<double> prior = initial_prior(cfg, state);
  BeliefState belief = initial_belief(cfg.observers, observe(state, cfg.observers), prior);
  std::optional<SISParams> applied;
  for (std::size_t t = 0; t <= cfg.horizon; ++t) {
    try {
      StepRecord row;
      row.t = t;
      auto t0 = clock::now();
      if (applied) belief = filter_step(belief, g, *applied, observe(state, cfg.observers));
      row.wall.filter_seconds = seconds_since(t0);

      t0 = clock::now();
      ControlDecision decision = solve(belief, cfg.control, g);
      row.wall.control_seconds = seconds_since(t0);

      row.infected = state.infected_count();
      row.belief_sum = belief.sum();
      row.objective = decision.objective_value;
      row.slack = decision.constraint_slack;
      if (t < cfg.horizon) {
        t0 = clock::now();
        state = step(g, decision.params, state, rng);
        row.wall.simulate_seconds = seconds_since(t0);
        applied = std::move(decision.params);
      }
      record.steps.push_back(row);
    } catch (ModelError& e) {
      e.add_context("replication " + std::to_string(replication) + ", step " + std::to_string(t));
      throw;
    }
  }
  return record;
}

/// Runs every replication; replications execute concurrently and each one's
/// randomness comes from its own derived seed, so results do not depend on
/// scheduling. The first failing replication (by index) is rethrown.
inline std::vector<RunRecord> run_closed_loop(const ExperimentConfig& cfg) {
  std::vector<RunRecord> records(cfg.replications);
  std::vector<std::exception_ptr> errors(cfg.replications);
  std::size_t workers = cfg.threads ? cfg.threads : std::max(1U, std::thread::hardware_concurrency());
  workers = std::min(workers, cfg.replications);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t rep = w; rep < cfg.replications; rep += workers) {
          try {
            records[rep] = run_replication(cfg, rep);
          } catch (...) {
            errors[rep] = std::current_exception();
          }
        }
      });
    }
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return records;
}

enum class OutputFormat { csv, json };

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline constexpr const char* kCsvHeader = "replication,t,infected,belief_sum,objective,slack";

/// Writes one row per (replication, step), numbers with 17 significant digits.
inline void emit(std::span<const RunRecord> records, OutputFormat format, const std::filesystem::path& path) {
  if (records.empty()) throw std::invalid_argument("no records to write");
  std::ostringstream out;
  if (format == OutputFormat::csv) {
    out << kCsvHeader << '\n';
    for (const RunRecord& r : records)
      for (const StepRecord& s : r.steps)
        out << r.replication << ',' << s.t << ',' << s.infected << ',' << format_double(s.belief_sum) << ','
            << format_double(s.objective) << ',' << format_double(s.slack) << '\n';
  } else {
    // Numbers are written as text with 17 digits; nlohmann would pick the
    // shortest round-trip form instead.
    out << "{\"records\":[";
    bool first = true;
    for (const RunRecord& r : records)
      for (const StepRecord& s : r.steps) {
        out << (first ? "" : ",") << "\n{\"replication\":" << r.replication << ",\"t\":" << s.t
            << ",\"infected\":" << s.infected << ",\"belief_sum\":" << format_double(s.belief_sum)
            << ",\"objective\":" << format_double(s.objective) << ",\"slack\":" << format_double(s.slack) << '}';
        first = false;
      }
    out << "\n]}\n";
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const std::string text = out.str();
  file.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!file) throw std::runtime_error("write failed for " + path.string());
}

/// Reads a CSV written by emit back into records.
inline std::vector<RunRecord> read_csv_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw std::runtime_error(path.string() + ": bad header");
  std::vector<RunRecord> records;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 6) throw std::runtime_error(path.string() + ": malformed row '" + line + "'");
    auto to_double = [&](const std::string& s) {
      double v = 0.0;
      std::from_chars(s.data(), s.data() + s.size(), v);
      return v;
    };
    const std::size_t rep = std::stoull(cells[0]);
    if (records.empty() || records.back().replication != rep) records.push_back({rep, {}});
    StepRecord row;
    row.t = std::stoull(cells[1]);
    row.infected = std::stoull(cells[2]);
    row.belief_sum = to_double(cells[3]);
    row.objective = to_double(cells[4]);
    row.slack = to_double(cells[5]);
    records.back().steps.push_back(row);
  }
  return records;
}

}  // namespace sisctl
