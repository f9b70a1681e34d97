#pragma once

// Monte-Carlo experiment driver: a JSON grid of parameter cells, each run
// for a number of independent trials (simulate, reconstruct, certify), with
// per-trial CSV records and a JSON summary.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "indeltree/evolution.hpp"
#include "indeltree/oracle.hpp"
#include "indeltree/recon.hpp"
#include "indeltree/report.hpp"
#include "indeltree/rng.hpp"
#include "indeltree/stats.hpp"

namespace indeltree::harness {

using nlohmann::json;

/// One point of the parameter grid.
struct CellSpec {
  int d = 5;
  int H = 2;
  std::size_t k = 3375;
  double p_s = 0.05;
  std::optional<double> p_id;  // nullopt: derive from alpha (see indel_rate_bound)
  double insertion_fraction = 0.5;
  double C = 8.0;
  std::optional<double> alpha;  // nullopt: epsilon / d
  std::optional<double> beta;   // nullopt: library default 1/d
  double delta_fraction = 0.5;
  std::optional<std::size_t> ell;  // overrides the island length ceil(k^(1/3))
  std::optional<std::size_t> a;    // overrides the anchor length
};

struct ExperimentSpec {
  std::string name = "experiment";
  std::uint64_t seed = 1;
  std::size_t trials = 10;
  unsigned threads = 1;
  std::size_t node_budget = kDefaultNodeBudget;
  double time_budget_seconds = 0;  // 0 disables; a cell that runs out is flagged partial
  bool oracle = true;
  bool include_timing = false;
  double zeta = 0.1;
  double epsilon = 0.5;
  std::vector<CellSpec> cells;
};

/// p_id = alpha / (4 d k^(2/3) a) with the effective (possibly clamped) a.
inline double indel_rate_bound(double alpha, int d, std::size_t k, std::size_t a) {
  const double k23 = std::pow(std::cbrt(static_cast<double>(k)), 2.0);
  return alpha / (4.0 * d * k23 * static_cast<double>(a));
}

namespace detail {

template <class T>
std::vector<T> as_list(const json& grid, const char* key, std::vector<T> fallback) {
  if (!grid.contains(key)) return fallback;
  const auto& v = grid.at(key);
  std::vector<T> out;
  if (v.is_array())
    for (const auto& x : v) out.push_back(x.get<T>());
  else
    out.push_back(v.get<T>());
  if (out.empty()) throw ConfigError("invalid-configuration", std::string("grid key '") + key + "' is empty");
  return out;
}

/// List entries that may be null (meaning "default") or a number; p_id also
/// accepts the string "bound".
inline std::vector<std::optional<double>> as_optional_list(const json& grid, const char* key) {
  if (!grid.contains(key)) return {std::nullopt};
  const auto& v = grid.at(key);
  std::vector<std::optional<double>> out;
  auto one = [&](const json& x) -> std::optional<double> {
    if (x.is_null() || (x.is_string() && x.get<std::string>() == "bound")) return std::nullopt;
    if (!x.is_number())
      throw ConfigError("invalid-configuration", std::string("grid key '") + key + "' has a non-numeric entry");
    return x.get<double>();
  };
  if (v.is_array())
    for (const auto& x : v) out.push_back(one(x));
  else
    out.push_back(one(v));
  if (out.empty()) throw ConfigError("invalid-configuration", std::string("grid key '") + key + "' is empty");
  return out;
}

}  // namespace detail

/// Cartesian product of the grid, outermost key first:
/// d, H, k, p_s, p_id, insertion_fraction, C, alpha, beta, delta_fraction, ell, a.
inline ExperimentSpec parse_spec(const json& j) {
  ExperimentSpec s;
  s.name = j.value("name", s.name);
  s.seed = j.value("seed", s.seed);
  s.trials = j.value("trials", s.trials);
  s.threads = j.value("threads", s.threads);
  s.node_budget = j.value("node_budget", s.node_budget);
  s.time_budget_seconds = j.value("time_budget_seconds", s.time_budget_seconds);
  s.oracle = j.value("oracle", s.oracle);
  s.include_timing = j.value("include_timing", s.include_timing);
  s.zeta = j.value("zeta", s.zeta);
  s.epsilon = j.value("epsilon", s.epsilon);
  if (s.trials == 0) throw ConfigError("invalid-configuration", "trials must be >= 1");
  if (s.threads == 0) throw ConfigError("invalid-configuration", "threads must be >= 1");

  const json grid = j.value("grid", json::object());
  const CellSpec def;
  const auto ds = detail::as_list<int>(grid, "d", {def.d});
  const auto Hs = detail::as_list<int>(grid, "H", {def.H});
  const auto ks = detail::as_list<std::size_t>(grid, "k", {def.k});
  const auto pss = detail::as_list<double>(grid, "p_s", {def.p_s});
  const auto pids = detail::as_optional_list(grid, "p_id");
  const auto fracs = detail::as_list<double>(grid, "insertion_fraction", {def.insertion_fraction});
  const auto Cs = detail::as_list<double>(grid, "C", {def.C});
  const auto alphas = detail::as_optional_list(grid, "alpha");
  const auto betas = detail::as_optional_list(grid, "beta");
  const auto dfs = detail::as_list<double>(grid, "delta_fraction", {def.delta_fraction});
  const auto ells = detail::as_optional_list(grid, "ell");
  const auto as = detail::as_optional_list(grid, "a");
  auto to_size = [](std::optional<double> x) -> std::optional<std::size_t> {
    if (!x) return std::nullopt;
    if (!(*x >= 1.0) || *x != std::floor(*x)) throw ConfigError("invalid-configuration", "ell and a must be positive integers");
    return static_cast<std::size_t>(*x);
  };
  for (int d : ds)
    for (int H : Hs)
      for (auto k : ks)
        for (double ps : pss)
          for (auto pid : pids)
            for (double fr : fracs)
              for (double C : Cs)
                for (auto al : alphas)
                  for (auto be : betas)
                    for (double df : dfs)
                      for (auto el : ells)
                        for (auto an : as)
                          s.cells.push_back({d, H, k, ps, pid, fr, C, al, be, df, to_size(el), to_size(an)});
  return s;
}

inline json spec_to_json(const ExperimentSpec& s) {
  json cells = json::array();
  for (const auto& c : s.cells) {
    cells.push_back({{"d", c.d},
                     {"H", c.H},
                     {"k", c.k},
                     {"p_s", c.p_s},
                     {"p_id", c.p_id ? json(*c.p_id) : json("bound")},
                     {"insertion_fraction", c.insertion_fraction},
                     {"C", c.C},
                     {"alpha", c.alpha ? json(*c.alpha) : json(nullptr)},
                     {"beta", c.beta ? json(*c.beta) : json(nullptr)},
                     {"delta_fraction", c.delta_fraction},
                     {"ell", c.ell ? json(*c.ell) : json(nullptr)},
                     {"a", c.a ? json(*c.a) : json(nullptr)}});
  }
  return {{"name", s.name},   {"seed", s.seed},
          {"trials", s.trials}, {"node_budget", s.node_budget},
          {"time_budget_seconds", s.time_budget_seconds}, {"oracle", s.oracle},
          {"include_timing", s.include_timing}, {"zeta", s.zeta},
          {"epsilon", s.epsilon}, {"cells", cells}};
}

/// Model and algorithm parameters of one cell.
struct ResolvedCell {
  ModelParams params;
  ReconConfig config;
  double alpha = 0;
};

inline ResolvedCell resolve_cell(const CellSpec& c, double epsilon) {
  if (!(c.insertion_fraction >= 0.0 && c.insertion_fraction <= 1.0))
    throw ConfigError("invalid-configuration", "insertion_fraction must lie in [0, 1]");
  ResolvedCell r;
  r.params.d = c.d;
  r.params.H = c.H;
  r.params.k = c.k;
  r.params.p_s = c.p_s;
  r.alpha = c.alpha.value_or(epsilon / c.d);
  // a does not depend on the indel rate, so the bound can use the derived value.
  r.config = derive_config(r.params, c.C, c.beta, c.delta_fraction);
  if (c.ell) r.config.ell = *c.ell;
  if (c.a) {
    r.config.a = *c.a;
    r.config.anchor_clamped = false;
  } else if (c.ell) {
    r.config.a = static_cast<std::size_t>(std::max(1.0, std::ceil(c.C * std::log(static_cast<double>(r.params.n())))));
    r.config.anchor_clamped = r.config.a >= r.config.ell;
    if (r.config.anchor_clamped) r.config.a = r.config.ell - 1;
  }
  r.config.validate();
  const double p_id = c.p_id.value_or(indel_rate_bound(r.alpha, c.d, c.k, r.config.a));
  if (!(p_id >= 0.0 && p_id < 1.0)) throw ConfigError("invalid-configuration", "p_id must lie in [0, 1)");
  r.params.p_i = c.insertion_fraction * p_id;
  r.params.p_d = p_id - r.params.p_i;
  r.params.validate();
  return r;
}

/// -1 marks "not evaluated".
struct TrialRecord {
  std::size_t cell = 0;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  int L = -1, S = -1, A = -1, B = -1, R = -1, E = -1, E_prime = -1;
  double agreement = 0;
  double adversarial_agreement = -1;
  long long shift_checked = -1;
  long long shift_violations = -1;
  long long domination_sites = -1;
  long long domination_violations = -1;
  long long oracle_radioactive = -1;
  long long internal_nodes = 0;
  long long algo_radioactive = 0;
  int root_failed = 0;
  long long output_length = 0;
  long long raw_length = 0;
  long long padded = 0;
  long long truncated = 0;
  long long min_length = 0;
  long long max_length = 0;
  double wall_ms = 0;

  bool operator==(const TrialRecord&) const = default;
};

inline std::uint64_t trial_seed(std::uint64_t seed, std::size_t cell, std::size_t trial) {
  return Stream(seed, StreamTag::kTrial, cell, trial)();
}

struct TrialOptions {
  bool oracle = true;
  bool include_timing = false;
  double zeta = 0.1;
  std::size_t node_budget = kDefaultNodeBudget;
};

/// Simulates one tree, reconstructs its root and, if requested, certifies
/// the good events and runs the pathwise alignment and domination checks.
/// Those checks are evaluated whenever a stable subtree exists; the flags
/// E and E_prime tell which trials they are binding on.
inline TrialRecord run_trial(const ModelParams& params, const ReconConfig& config, std::uint64_t seed,
                             const TrialOptions& opt = {}) {
  const auto start = std::chrono::steady_clock::now();
  TrialRecord rec;
  rec.seed = seed;
  const EvolvedTree tree = evolve_tree(params, seed, opt.node_budget);
  const auto leaves = leaf_bits(tree);
  const RootReconstruction recon = reconstruct_root(leaves, tree.shape, config, seed);

  rec.agreement = agreement_rate(recon.sequence, tree.root().bits);
  rec.internal_nodes = static_cast<long long>(tree.shape.first_leaf());
  rec.algo_radioactive = static_cast<long long>(recon.radioactive_count());
  rec.root_failed = recon.failed;
  rec.output_length = static_cast<long long>(recon.sequence.size());
  rec.raw_length = static_cast<long long>(recon.raw_length);
  rec.padded = static_cast<long long>(recon.padded);
  rec.truncated = static_cast<long long>(recon.truncated);
  const LengthStats ls = length_stats(tree, opt.zeta);
  rec.L = ls.holds;
  rec.min_length = static_cast<long long>(ls.min_length);
  rec.max_length = static_cast<long long>(ls.max_length);

  if (opt.oracle) {
    const EventCertificate cert = certify_event_E(tree, config, seed, opt.zeta);
    rec.oracle_radioactive = static_cast<long long>(cert.report.radioactive_count());
    rec.S = cert.S;
    rec.A = cert.A;
    rec.B = cert.B;
    rec.E = cert.E();
    if (cert.S) {
      const auto& stable = *cert.stable;
      const AdversarialResult adv = adversarial_reconstruct(tree, cert.report, stable, seed);
      rec.adversarial_agreement = adv.agreement_rate();
      const SeparationCertificate sep = certify_reconstructed_separation(tree, stable, config, recon);
      rec.R = sep.holds();
      rec.E_prime = rec.L && rec.R;
      const AlignmentCheck al = check_alignment(tree, stable, config, recon);
      rec.shift_checked = static_cast<long long>(al.checked);
      rec.shift_violations =
          static_cast<long long>(al.shift_violations + al.length_violations + al.aborted_nodes);
      // Root positions only line up when the root kept its true length.
      if (!recon.failed && recon.raw_length == tree.root().size()) {
        const DominationCheck dom = check_domination(tree.root().bits, recon.sequence, adv.agreement);
        rec.domination_sites = static_cast<long long>(dom.sites);
        rec.domination_violations = static_cast<long long>(dom.violations);
      } else {
        std::size_t sites = 0;
        for (auto x : adv.agreement) sites += x;
        rec.domination_sites = static_cast<long long>(sites);
        rec.domination_violations = static_cast<long long>(sites);
      }
    } else {
      rec.R = 0;
      rec.E_prime = 0;
    }
  }
  if (opt.include_timing)
    rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

struct CellResult {
  std::size_t index = 0;
  CellSpec spec;
  std::string status = "ok";  // ok | partial | infeasible-parameters | invalid-configuration | resource-limit
  std::string error;
  std::optional<ResolvedCell> resolved;
  std::vector<TrialRecord> records;
};

/// Runs `count` jobs on `threads` workers; job i writes only its own slot.
inline void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& job) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i; (i = next.fetch_add(1)) < count;) job(i);
      } catch (...) {
        errors[w] = std::current_exception();
        next.store(count);
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline CellResult run_cell(const ExperimentSpec& spec, std::size_t index) {
  CellResult out;
  out.index = index;
  out.spec = spec.cells.at(index);
  try {
    out.resolved = resolve_cell(out.spec, spec.epsilon);
  } catch (const ConfigError& e) {
    out.status = e.code();
    out.error = e.what();
    return out;
  }
  const TrialOptions opt{spec.oracle, spec.include_timing, spec.zeta, spec.node_budget};
  std::vector<TrialRecord> records(spec.trials);
  std::vector<std::uint8_t> done(spec.trials, 0);
  const auto start = std::chrono::steady_clock::now();
  auto expired = [&] {
    if (spec.time_budget_seconds <= 0) return false;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() > spec.time_budget_seconds;
  };
  try {
    parallel_for(spec.trials, spec.threads, [&](std::size_t t) {
      if (expired()) return;
      records[t] = run_trial(out.resolved->params, out.resolved->config, trial_seed(spec.seed, index, t), opt);
      records[t].cell = index;
      records[t].trial = t;
      done[t] = 1;
    });
  } catch (const ConfigError& e) {
    out.status = e.code();
    out.error = e.what();
    return out;
  }
  for (std::size_t t = 0; t < spec.trials; ++t)
    if (done[t]) out.records.push_back(records[t]);
  if (out.records.size() < spec.trials) {
    out.status = "partial";
    out.error = "time budget exhausted after " + std::to_string(out.records.size()) + " trials";
  }
  return out;
}

inline std::vector<CellResult> run_experiment(const ExperimentSpec& spec) {
  std::vector<CellResult> out;
  for (std::size_t i = 0; i < spec.cells.size(); ++i) out.push_back(run_cell(spec, i));
  return out;
}

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

inline json interval_json(std::size_t successes, std::size_t trials) {
  const auto ci = stats::wilson(successes, trials);
  return {{"successes", successes}, {"trials", trials}, {"estimate", ci.estimate}, {"lower", ci.lower},
          {"upper", ci.upper}};
}

inline json summarize(const CellResult& cell) {
  json j;
  const auto& c = cell.spec;
  j["index"] = cell.index;
  j["status"] = cell.status;
  if (!cell.error.empty()) j["error"] = cell.error;
  j["grid"] = {{"d", c.d},
               {"H", c.H},
               {"k", c.k},
               {"p_s", c.p_s},
               {"p_id", c.p_id ? json(*c.p_id) : json("bound")},
               {"insertion_fraction", c.insertion_fraction},
               {"C", c.C},
               {"alpha", c.alpha ? json(*c.alpha) : json(nullptr)},
               {"beta", c.beta ? json(*c.beta) : json(nullptr)},
               {"delta_fraction", c.delta_fraction},
               {"ell", c.ell ? json(*c.ell) : json(nullptr)},
               {"a", c.a ? json(*c.a) : json(nullptr)}};
  if (!cell.resolved) return j;
  const auto& p = cell.resolved->params;
  const auto& cf = cell.resolved->config;
  j["model"] = {{"p_s", p.p_s}, {"p_d", p.p_d}, {"p_i", p.p_i}, {"p_id", p.p_id()}, {"alpha", cell.resolved->alpha}};
  j["config"] = {{"ell", cf.ell},     {"a", cf.a},         {"gamma", cf.gamma},
                 {"delta", cf.delta}, {"beta", cf.beta},   {"theta_sq", cf.theta_sq},
                 {"C", cf.C},         {"anchor_clamped", cf.anchor_clamped}};

  const auto& rs = cell.records;
  const std::size_t n = rs.size();
  j["trials"] = n;
  if (n == 0) return j;

  double agree = 0, agree_S = 0, adv = 0;
  std::size_t nS = 0, nL = 0, nE = 0, nEp = 0, nA = 0, nB = 0, nR = 0, exact_len = 0, root_fail = 0;
  std::size_t oracle_nodes = 0, oracle_radio = 0, algo_radio = 0;
  long long shift_E = 0, dom_E = 0, shift_Ep = 0, dom_Ep = 0, shift_checked_E = 0, dom_sites_E = 0;
  bool oracle_on = false;
  for (const auto& r : rs) {
    agree += r.agreement;
    nL += r.L == 1;
    exact_len += r.output_length == static_cast<long long>(p.k);
    root_fail += r.root_failed;
    algo_radio += static_cast<std::size_t>(r.algo_radioactive);
    if (r.S < 0) continue;
    oracle_on = true;
    oracle_nodes += static_cast<std::size_t>(r.internal_nodes);
    oracle_radio += static_cast<std::size_t>(r.oracle_radioactive);
    if (r.S == 1) {
      ++nS;
      agree_S += r.agreement;
      adv += r.adversarial_agreement;
    }
    nA += r.A == 1;
    nB += r.B == 1;
    nR += r.R == 1;
    if (r.E == 1) {
      ++nE;
      shift_E += r.shift_violations;
      dom_E += r.domination_violations;
      shift_checked_E += r.shift_checked;
      dom_sites_E += r.domination_sites;
    }
    if (r.E_prime == 1) {
      ++nEp;
      shift_Ep += r.shift_violations;
      dom_Ep += r.domination_violations;
    }
  }
  const double dn = static_cast<double>(n);
  j["agreement_mean"] = agree / dn;
  j["output_length_exact"] = exact_len;
  j["root_failures"] = root_fail;
  const double internal_total = dn * static_cast<double>(rs.front().internal_nodes);
  j["algorithm_radioactive_per_node"] = internal_total > 0 ? static_cast<double>(algo_radio) / internal_total : 0.0;
  j["event_L"] = interval_json(nL, n);
  if (oracle_on) {
    j["event_S"] = interval_json(nS, n);
    j["chi_hat"] = 1.0 - static_cast<double>(nS) / dn;
    j["event_A"] = interval_json(nA, n);
    j["event_B"] = interval_json(nB, n);
    j["event_R"] = interval_json(nR, n);
    j["event_E"] = interval_json(nE, n);
    j["event_E_prime"] = interval_json(nEp, n);
    j["radioactivity"] = interval_json(oracle_radio, oracle_nodes);
    const double alpha_hat = oracle_nodes ? static_cast<double>(oracle_radio) / static_cast<double>(oracle_nodes) : 0.0;
    j["stable_subtree_bound_at_alpha_hat"] = stable_subtree_bound(alpha_hat, p.d, p.H);
    j["agreement_mean_given_S"] = nS ? json(agree_S / static_cast<double>(nS)) : json(nullptr);
    j["adversarial_agreement_mean_given_S"] = nS ? json(adv / static_cast<double>(nS)) : json(nullptr);
    j["given_E"] = {{"trials", nE},
                    {"shift_checks", shift_checked_E},
                    {"shift_violations", shift_E},
                    {"domination_sites", dom_sites_E},
                    {"domination_violations", dom_E}};
    j["given_E_prime"] = {{"trials", nEp}, {"shift_violations", shift_Ep}, {"domination_violations", dom_Ep}};
  }
  return j;
}

inline json summarize(const ExperimentSpec& spec, const std::vector<CellResult>& cells) {
  json j;
  j["schema_version"] = report::kSchemaVersion;
  j["spec"] = spec_to_json(spec);
  j["cells"] = json::array();
  for (const auto& c : cells) j["cells"].push_back(summarize(c));
  return j;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& csv_columns() {
  static const std::vector<std::string> cols{
      "cell",           "trial",           "seed",          "L",
      "S",              "A",               "B",             "R",
      "E",              "E_prime",         "agreement",     "adversarial_agreement",
      "shift_checked",  "shift_violations", "domination_sites", "domination_violations",
      "oracle_radioactive", "internal_nodes", "algo_radioactive", "root_failed",
      "output_length",  "raw_length",      "padded",        "truncated",
      "min_length",     "max_length",      "wall_ms"};
  return cols;
}

inline void write_csv(std::ostream& os, const std::vector<TrialRecord>& records) {
  const auto& cols = csv_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
  os << '\n';
  using report::format_double;
  for (const auto& r : records) {
    os << r.cell << ',' << r.trial << ',' << r.seed << ',' << r.L << ',' << r.S << ',' << r.A << ',' << r.B << ','
       << r.R << ',' << r.E << ',' << r.E_prime << ',' << format_double(r.agreement) << ','
       << format_double(r.adversarial_agreement) << ',' << r.shift_checked << ',' << r.shift_violations << ','
       << r.domination_sites << ',' << r.domination_violations << ',' << r.oracle_radioactive << ','
       << r.internal_nodes << ',' << r.algo_radioactive << ',' << r.root_failed << ',' << r.output_length << ','
       << r.raw_length << ',' << r.padded << ',' << r.truncated << ',' << r.min_length << ',' << r.max_length << ','
       << format_double(r.wall_ms) << '\n';
  }
}

inline std::vector<TrialRecord> parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("parse_csv: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::string expected;
  for (std::size_t i = 0; i < csv_columns().size(); ++i) expected += (i ? "," : "") + csv_columns()[i];
  if (line != expected) throw std::runtime_error("parse_csv: unexpected header");
  std::vector<TrialRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != csv_columns().size())
      throw std::runtime_error("parse_csv: line " + std::to_string(lineno) + " has " + std::to_string(f.size()) +
                               " fields");
    TrialRecord r;
    std::size_t i = 0;
    auto u = [&] { return static_cast<std::size_t>(std::stoull(f[i++])); };
    auto ll = [&] { return std::stoll(f[i++]); };
    auto in_ = [&] { return std::stoi(f[i++]); };
    auto dbl = [&] { return std::stod(f[i++]); };
    r.cell = u();
    r.trial = u();
    r.seed = std::stoull(f[i++]);
    r.L = in_();
    r.S = in_();
    r.A = in_();
    r.B = in_();
    r.R = in_();
    r.E = in_();
    r.E_prime = in_();
    r.agreement = dbl();
    r.adversarial_agreement = dbl();
    r.shift_checked = ll();
    r.shift_violations = ll();
    r.domination_sites = ll();
    r.domination_violations = ll();
    r.oracle_radioactive = ll();
    r.internal_nodes = ll();
    r.algo_radioactive = ll();
    r.root_failed = in_();
    r.output_length = ll();
    r.raw_length = ll();
    r.padded = ll();
    r.truncated = ll();
    r.min_length = ll();
    r.max_length = ll();
    r.wall_ms = dbl();
    out.push_back(r);
  }
  return out;
}

/// Writes `<prefix>.csv` and `<prefix>.json`. Returns the summary.
inline json emit_report(const ExperimentSpec& spec, const std::vector<CellResult>& cells, const std::string& prefix) {
  std::vector<TrialRecord> all;
  for (const auto& c : cells) all.insert(all.end(), c.records.begin(), c.records.end());
  const json summary = summarize(spec, cells);
  {
    std::ofstream f(prefix + ".csv", std::ios::binary);
    if (!f) throw std::runtime_error("emit_report: cannot open '" + prefix + ".csv' for writing");
    write_csv(f, all);
    if (!f) throw std::runtime_error("emit_report: write to '" + prefix + ".csv' failed");
  }
  {
    std::ofstream f(prefix + ".json", std::ios::binary);
    if (!f) throw std::runtime_error("emit_report: cannot open '" + prefix + ".json' for writing");
    f << report::dump(summary);
    if (!f) throw std::runtime_error("emit_report: write to '" + prefix + ".json' failed");
  }
  return summary;
}

}  // namespace indeltree::harness
