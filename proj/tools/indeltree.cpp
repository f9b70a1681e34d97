// Command-line front end: simulate trees, reconstruct roots from leaves,
// run the fixed-instance checks, and sweep parameter grids.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "indeltree/evolution.hpp"
#include "indeltree/harness.hpp"
#include "indeltree/lemmas.hpp"
#include "indeltree/recon.hpp"
#include "indeltree/report.hpp"
#include "indeltree/tree_io.hpp"

using nlohmann::json;
using namespace indeltree;

namespace {

json load_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io::IoError("cannot open '" + path + "' for reading");
  try {
    return json::parse(f);
  } catch (const json::parse_error& e) {
    throw io::IoError("'" + path + "' is not valid JSON: " + e.what());
  }
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw io::IoError("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw io::IoError("write to '" + path + "' failed");
}

/// Values present in the config file replace the flag values.
template <class T>
void override_from(const json& cfg, const char* key, T& value) {
  if (cfg.contains(key) && !cfg.at(key).is_null()) value = cfg.at(key).get<T>();
}

template <class T>
void override_from(const json& cfg, const char* key, std::optional<T>& value) {
  if (cfg.contains(key) && !cfg.at(key).is_null()) value = cfg.at(key).get<T>();
}

void warn_if_clamped(const ReconConfig& cfg) {
  if (cfg.anchor_clamped)
    std::cerr << "warning: anchor length ceil(C ln n) does not fit in an island of " << cfg.ell
              << " sites; clamped to a = " << cfg.a << "\n";
}

struct SimulateArgs {
  int d = 3, H = 2;
  std::size_t k = 1000;
  double ps = 0, pd = 0, pi = 0;
  std::uint64_t seed = 1;
  std::size_t node_budget = kDefaultNodeBudget;
  std::string config, out_nodes, out_maps, out_json, out_leaves;
};

int run_simulate(SimulateArgs a) {
  if (!a.config.empty()) {
    const json cfg = load_json(a.config);
    override_from(cfg, "d", a.d);
    override_from(cfg, "H", a.H);
    override_from(cfg, "k", a.k);
    override_from(cfg, "ps", a.ps);
    override_from(cfg, "pd", a.pd);
    override_from(cfg, "pi", a.pi);
    override_from(cfg, "seed", a.seed);
    override_from(cfg, "node_budget", a.node_budget);
  }
  ModelParams p{a.d, a.H, a.k, a.ps, a.pd, a.pi};
  const EvolvedTree tree = evolve_tree(p, a.seed, a.node_budget);
  if (!a.out_nodes.empty()) {
    std::ostringstream os;
    io::write_nodes(os, tree);
    write_text(a.out_nodes, os.str());
  }
  if (!a.out_maps.empty()) {
    std::ostringstream os;
    io::write_maps(os, tree);
    write_text(a.out_maps, os.str());
  }
  if (!a.out_leaves.empty()) {
    std::ostringstream os;
    io::write_leaves(os, tree);
    write_text(a.out_leaves, os.str());
  }
  if (!a.out_json.empty()) write_text(a.out_json, io::to_json(tree).dump() + "\n");
  if (a.out_nodes.empty() && a.out_maps.empty() && a.out_json.empty() && a.out_leaves.empty())
    io::write_nodes(std::cout, tree);
  return 0;
}

struct ReconstructArgs {
  std::string leaves, out, diagnostics, config;
  int d = 3, H = 2;
  std::size_t k = 1000;
  double ps = 0, C = 8.0;
  std::optional<double> beta;
  std::uint64_t seed = 1;
};

json diagnostics_json(const RootReconstruction& rec, const ReconConfig& cfg) {
  json nodes = json::array();
  for (std::size_t v = 0; v < rec.internal.size(); ++v) {
    const auto& r = rec.internal[v];
    json rounds = json::array();
    for (const auto& t : r.rounds) {
      json status = json::array();
      for (auto s : t.status) status.push_back(to_string(s));
      rounds.push_back({{"anchor_length", t.anchor_length},
                        {"aligned", t.aligned_count},
                        {"shifts", t.shifts},
                        {"status", status}});
    }
    json n = {{"node", v},
              {"radioactive", r.radioactive},
              {"length", r.sequence.size()},
              {"tail_length", r.tail_length},
              {"tail_children", r.tail_children},
              {"rounds", rounds}};
    if (r.radioactive) n["abort_reason"] = r.abort_reason;
    nodes.push_back(std::move(n));
  }
  return {{"schema_version", report::kSchemaVersion},
          {"config",
           {{"ell", cfg.ell}, {"a", cfg.a}, {"gamma", cfg.gamma}, {"delta", cfg.delta}, {"beta", cfg.beta},
            {"anchor_clamped", cfg.anchor_clamped}}},
          {"failed", rec.failed},
          {"raw_length", rec.raw_length},
          {"padded", rec.padded},
          {"truncated", rec.truncated},
          {"radioactive_nodes", rec.radioactive_count()},
          {"nodes", nodes}};
}

int run_reconstruct(ReconstructArgs a) {
  if (!a.config.empty()) {
    const json cfg = load_json(a.config);
    override_from(cfg, "leaves", a.leaves);
    override_from(cfg, "d", a.d);
    override_from(cfg, "H", a.H);
    override_from(cfg, "k", a.k);
    override_from(cfg, "ps", a.ps);
    override_from(cfg, "C", a.C);
    override_from(cfg, "beta", a.beta);
    override_from(cfg, "seed", a.seed);
    override_from(cfg, "out", a.out);
    override_from(cfg, "diagnostics", a.diagnostics);
  }
  if (a.leaves.empty()) throw io::IoError("--leaves is required");
  ModelParams p;
  p.d = a.d;
  p.H = a.H;
  p.k = a.k;
  p.p_s = a.ps;
  const ReconConfig cfg = derive_config(p, a.C, a.beta);
  warn_if_clamped(cfg);
  const TreeShape shape{a.d, a.H};
  std::ifstream in(a.leaves, std::ios::binary);
  if (!in) throw io::IoError("cannot open '" + a.leaves + "' for reading");
  const auto leaves = io::read_leaves(in, shape);
  const auto rec = reconstruct_root(leaves, shape, cfg, a.seed);
  const std::string bits = io::to_text(rec.sequence) + "\n";
  if (a.out.empty()) std::cout << bits;
  else write_text(a.out, bits);
  if (!a.diagnostics.empty()) write_text(a.diagnostics, report::dump(diagnostics_json(rec, cfg)));
  if (rec.failed) {
    std::cerr << "reconstruction failed: root is radioactive (" << rec.internal[0].abort_reason << ")\n";
    return 2;
  }
  return 0;
}

struct VerifyArgs {
  std::vector<std::string> lemmas{"all"};
  std::optional<std::size_t> trials;
  std::uint64_t seed = lemmas::Options{}.seed;
  unsigned threads = 1;
  std::string out, config;
};

int run_verify(VerifyArgs a) {
  lemmas::DeskInstance desk;
  if (!a.config.empty()) {
    const json cfg = load_json(a.config);
    if (cfg.contains("lemma")) {
      a.lemmas.clear();
      if (cfg["lemma"].is_array()) a.lemmas = cfg["lemma"].get<std::vector<std::string>>();
      else a.lemmas.push_back(cfg["lemma"].get<std::string>());
    }
    override_from(cfg, "trials", a.trials);
    override_from(cfg, "seed", a.seed);
    override_from(cfg, "threads", a.threads);
    override_from(cfg, "out", a.out);
    if (cfg.contains("desk")) {
      const json& dj = cfg["desk"];
      override_from(dj, "d", desk.d);
      override_from(dj, "H", desk.H);
      override_from(dj, "k", desk.k);
      override_from(dj, "p_s", desk.p_s);
      override_from(dj, "alpha", desk.alpha);
      override_from(dj, "beta", desk.beta);
      override_from(dj, "C", desk.C);
      override_from(dj, "zeta", desk.zeta);
      override_from(dj, "trials", desk.trials);
    }
  }
  lemmas::Options opt;
  opt.seed = a.seed;
  opt.threads = a.threads;
  opt.trials = a.trials;
  const json verdict = lemmas::run(a.lemmas, opt, desk);
  const std::string text = report::dump(verdict);
  if (a.out.empty()) std::cout << text;
  else write_text(a.out, text);
  for (const auto& v : verdict["verdicts"])
    std::cerr << (v["pass"].get<bool>() ? "PASS " : "FAIL ") << v["lemma"].get<std::string>() << "\n";
  return verdict["pass"].get<bool>() ? 0 : 1;
}

struct SweepArgs {
  std::string config, out = "sweep";
  std::optional<unsigned> threads;
  std::optional<std::uint64_t> seed;
};

int run_sweep(const SweepArgs& a) {
  json cfg = load_json(a.config);
  if (a.threads && !cfg.contains("threads")) cfg["threads"] = *a.threads;
  if (a.seed && !cfg.contains("seed")) cfg["seed"] = *a.seed;
  const auto spec = harness::parse_spec(cfg);
  const auto cells = harness::run_experiment(spec);
  for (const auto& c : cells) {
    if (c.resolved) warn_if_clamped(c.resolved->config);
    std::cerr << "cell " << c.index << ": " << c.status;
    if (!c.error.empty()) std::cerr << " (" << c.error << ")";
    std::cerr << ", " << c.records.size() << " trials\n";
  }
  harness::emit_report(spec, cells, a.out);
  std::cerr << "wrote " << a.out << ".csv and " << a.out << ".json\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trace reconstruction on d-ary trees with substitutions and indels"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Evolve a tree and write its sequences and site maps");
  simulate->add_option("--d", sim.d, "Arity (odd, >= 3)");
  simulate->add_option("--H", sim.H, "Height");
  simulate->add_option("--k", sim.k, "Root length");
  simulate->add_option("--ps", sim.ps, "Substitution probability");
  simulate->add_option("--pd", sim.pd, "Deletion probability");
  simulate->add_option("--pi", sim.pi, "Insertion probability");
  simulate->add_option("--seed", sim.seed, "Random seed");
  simulate->add_option("--node-budget", sim.node_budget, "Largest tree allowed, in nodes");
  simulate->add_option("--nodes", sim.out_nodes, "Node file (id, level, bits)");
  simulate->add_option("--maps", sim.out_maps, "Site-map sidecar file");
  simulate->add_option("--leaves", sim.out_leaves, "Leaves file");
  simulate->add_option("--json", sim.out_json, "Whole tree as one JSON document");
  simulate->add_option("--config", sim.config, "JSON file whose values override the flags");

  ReconstructArgs rec;
  auto* reconstruct = app.add_subcommand("reconstruct", "Reconstruct the root sequence from the leaves");
  reconstruct->add_option("--leaves", rec.leaves, "Leaves file, planar order");
  reconstruct->add_option("--d", rec.d, "Arity");
  reconstruct->add_option("--H", rec.H, "Height");
  reconstruct->add_option("--k", rec.k, "Root length");
  reconstruct->add_option("--ps", rec.ps, "Substitution probability");
  reconstruct->add_option("--C", rec.C, "Anchor-length constant");
  reconstruct->add_option("--beta", rec.beta, "Error budget entering the threshold (default 1/d)");
  reconstruct->add_option("--seed", rec.seed, "Seed for tie coins");
  reconstruct->add_option("--out", rec.out, "Output file (default stdout)");
  reconstruct->add_option("--diagnostics", rec.diagnostics, "Per-node diagnostics JSON");
  reconstruct->add_option("--config", rec.config, "JSON file whose values override the flags");

  VerifyArgs ver;
  auto* verify = app.add_subcommand("verify", "Run fixed-instance checks and emit JSON verdicts");
  verify->add_option("--lemma", ver.lemmas, "Check to run (repeatable)")
      ->check(CLI::IsMember([] {
        auto names = lemmas::lemma_names();
        names.push_back("all");
        return names;
      }()));
  verify->add_option("--trials", ver.trials, "Override the trial count of every check");
  verify->add_option("--seed", ver.seed, "Random seed");
  verify->add_option("--threads", ver.threads, "Worker threads")->check(CLI::PositiveNumber);
  verify->add_option("--out", ver.out, "Verdict file (default stdout)");
  verify->add_option("--config", ver.config, "JSON file whose values override the flags");

  SweepArgs sw;
  auto* sweep = app.add_subcommand("sweep", "Run a parameter grid and write CSV and JSON reports");
  sweep->add_option("--config", sw.config, "Experiment JSON")->required();
  sweep->add_option("--out", sw.out, "Output prefix");
  sweep->add_option("--threads", sw.threads, "Worker threads, unless the config sets them");
  sweep->add_option("--seed", sw.seed, "Seed, unless the config sets it");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) return run_simulate(sim);
    if (*reconstruct) return run_reconstruct(rec);
    if (*verify) return run_verify(ver);
    if (*sweep) return run_sweep(sw);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 64;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
