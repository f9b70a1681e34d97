#pragma once

// Fixed-instance checks of the statements behind the reconstruction
// guarantee. Each runner returns a JSON verdict with its sample size,
// estimate, interval or bound, target and a boolean "pass".

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "indeltree/evolution.hpp"
#include "indeltree/harness.hpp"
#include "indeltree/oracle.hpp"
#include "indeltree/recon.hpp"
#include "indeltree/rng.hpp"
#include "indeltree/stats.hpp"

namespace indeltree::lemmas {

using nlohmann::json;

struct Options {
  std::uint64_t seed = 20240611;
  unsigned threads = 1;
  std::optional<std::size_t> trials;  // overrides each runner's default
};

/// The small instance used by most checks: d=5, H=2, k=3375, p_s=0.05,
/// indel rate at the bound for alpha=0.2. beta must be overridden, since
/// 1/d leaves no feasible delta at this arity.
struct DeskInstance {
  int d = 5;
  int H = 2;
  std::size_t k = 3375;
  double p_s = 0.05;
  double alpha = 0.2;
  double beta = 0.02;
  double C = 8.0;
  double zeta = 0.1;
  std::size_t trials = 200;
};

inline harness::ExperimentSpec desk_spec(const DeskInstance& inst, const Options& opt) {
  harness::ExperimentSpec s;
  s.name = "desk";
  s.seed = opt.seed;
  s.trials = opt.trials.value_or(inst.trials);
  s.threads = opt.threads;
  s.zeta = inst.zeta;
  harness::CellSpec c;
  c.d = inst.d;
  c.H = inst.H;
  c.k = inst.k;
  c.p_s = inst.p_s;
  c.alpha = inst.alpha;
  c.beta = inst.beta;
  c.C = inst.C;
  s.cells.push_back(c);
  return s;
}

inline harness::CellResult run_desk(const DeskInstance& inst, const Options& opt) {
  return harness::run_cell(desk_spec(inst, opt), 0);
}

namespace detail {

inline json cell_header(const harness::CellResult& cell) {
  const auto& p = cell.resolved->params;
  const auto& c = cell.resolved->config;
  return {{"d", p.d},         {"H", p.H},         {"k", p.k},         {"p_s", p.p_s},
          {"p_id", p.p_id()}, {"ell", c.ell},     {"a", c.a},         {"gamma", c.gamma},
          {"delta", c.delta}, {"beta", c.beta},   {"anchor_clamped", c.anchor_clamped},
          {"trials", cell.records.size()}};
}

inline json interval(const stats::Interval& ci) {
  return {{"estimate", ci.estimate}, {"lower", ci.lower}, {"upper", ci.upper}};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Evaluators over a finished desk cell
// ---------------------------------------------------------------------------

inline json evaluate_length(const harness::CellResult& cell, double target = 0.99) {
  std::size_t held = 0;
  for (const auto& r : cell.records) held += r.L == 1;
  const std::size_t n = cell.records.size();
  const double freq = n ? static_cast<double>(held) / static_cast<double>(n) : 0.0;
  return {{"lemma", "length"},
          {"instance", detail::cell_header(cell)},
          {"samples", n},
          {"estimate", freq},
          {"ci", detail::interval(stats::wilson(held, n))},
          {"target", target},
          {"pass", n >= 200 && freq >= target}};
}

inline json evaluate_radioactivity(const harness::CellResult& cell) {
  std::size_t nodes = 0, radioactive = 0;
  for (const auto& r : cell.records) {
    nodes += static_cast<std::size_t>(r.internal_nodes);
    radioactive += static_cast<std::size_t>(r.oracle_radioactive);
  }
  const double alpha = cell.resolved->alpha;
  const auto ci = stats::wilson(radioactive, nodes);
  return {{"lemma", "radioactivity"},
          {"instance", detail::cell_header(cell)},
          {"samples", nodes},
          {"radioactive", radioactive},
          {"estimate", ci.estimate},
          {"ci", detail::interval(ci)},
          {"target", alpha},
          {"upper_limit", 1.1 * alpha},
          {"pass", nodes >= 500 && ci.estimate <= alpha && ci.upper < 1.1 * alpha}};
}

inline json evaluate_stable(const harness::CellResult& cell) {
  std::size_t nodes = 0, radioactive = 0, stable = 0;
  for (const auto& r : cell.records) {
    nodes += static_cast<std::size_t>(r.internal_nodes);
    radioactive += static_cast<std::size_t>(r.oracle_radioactive);
    stable += r.S == 1;
  }
  const std::size_t n = cell.records.size();
  const double alpha_hat = nodes ? static_cast<double>(radioactive) / static_cast<double>(nodes) : 0.0;
  const auto& p = cell.resolved->params;
  const double bound = stable_subtree_bound(alpha_hat, p.d, p.H);
  const double sigma = std::sqrt(bound * (1.0 - bound) / static_cast<double>(n ? n : 1));
  const double freq = n ? static_cast<double>(stable) / static_cast<double>(n) : 0.0;
  return {{"lemma", "stable"},
          {"instance", detail::cell_header(cell)},
          {"samples", n},
          {"estimate", freq},
          {"alpha_hat", alpha_hat},
          {"bound", bound},
          {"sigma", sigma},
          {"target", bound - 3.0 * sigma},
          {"pass", n >= 200 && freq >= bound - 3.0 * sigma}};
}

/// Shift exactness and domination on the good-event trials. Both the
/// certified event E and the event E' (separation of the reconstructed
/// anchors in place of bias concentration) are reported; violations on
/// either fail the check.
inline json evaluate_alignment_and_domination(const harness::CellResult& cell) {
  long long nE = 0, nEp = 0, shiftE = 0, shiftEp = 0, domE = 0, domEp = 0, checkedE = 0, checkedEp = 0,
            sitesE = 0, sitesEp = 0;
  for (const auto& r : cell.records) {
    if (r.E == 1) {
      ++nE;
      shiftE += r.shift_violations;
      domE += r.domination_violations;
      checkedE += r.shift_checked;
      sitesE += r.domination_sites;
    }
    if (r.E_prime == 1) {
      ++nEp;
      shiftEp += r.shift_violations;
      domEp += r.domination_violations;
      checkedEp += r.shift_checked;
      sitesEp += r.domination_sites;
    }
  }
  json alignment = {{"lemma", "alignment"},
                    {"instance", detail::cell_header(cell)},
                    {"given_E", {{"trials", nE}, {"shift_checks", checkedE}, {"violations", shiftE}}},
                    {"given_E_prime", {{"trials", nEp}, {"shift_checks", checkedEp}, {"violations", shiftEp}}},
                    {"vacuous", nE + nEp == 0},
                    {"pass", shiftE == 0 && shiftEp == 0}};
  json domination = {{"lemma", "domination"},
                     {"instance", detail::cell_header(cell)},
                     {"given_E", {{"trials", nE}, {"sites", sitesE}, {"violations", domE}}},
                     {"given_E_prime", {{"trials", nEp}, {"sites", sitesEp}, {"violations", domEp}}},
                     {"vacuous", nE + nEp == 0},
                     {"pass", domE == 0 && domEp == 0}};
  return {{"alignment", alignment}, {"domination", domination}};
}

inline json evaluate_theorem(const harness::CellResult& cell, double slack = 0.02, double floor = 0.85) {
  const auto& cfg = cell.resolved->config;
  double all = 0, given_S = 0;
  std::size_t nS = 0, exact = 0;
  for (const auto& r : cell.records) {
    all += r.agreement;
    exact += r.output_length == static_cast<long long>(cfg.k);
    if (r.S == 1) {
      given_S += r.agreement;
      ++nS;
    }
  }
  const std::size_t n = cell.records.size();
  const double mean_all = n ? all / static_cast<double>(n) : 0.0;
  const double mean_S = nS ? given_S / static_cast<double>(nS) : 0.0;
  const double target_S = 1.0 - cfg.beta - slack;
  return {{"lemma", "theorem"},
          {"instance", detail::cell_header(cell)},
          {"samples", n},
          {"length_exact", exact},
          {"agreement_mean", mean_all},
          {"agreement_mean_given_S", mean_S},
          {"trials_given_S", nS},
          {"target_given_S", target_S},
          {"target_unconditional", floor},
          {"pass", n >= 200 && exact == n && nS > 0 && mean_S > target_S && mean_all > floor}};
}

// ---------------------------------------------------------------------------
// Stand-alone runners
// ---------------------------------------------------------------------------

/// Zero-noise identity on d=3, H=3 for k in {64, 1000}.
inline json verify_identity(const Options& opt) {
  json cases = json::array();
  bool pass = true;
  for (std::size_t k : {std::size_t{64}, std::size_t{1000}}) {
    ModelParams p;
    p.d = 3;
    p.H = 3;
    p.k = k;
    const ReconConfig cfg = derive_config(p, 8.0, 0.0);
    const EvolvedTree tree = evolve_tree(p, opt.seed);
    const auto rec = reconstruct_root(leaf_bits(tree), tree.shape, cfg, opt.seed);
    bool shifts_zero = true;
    for (const auto& node : rec.internal)
      for (const auto& round : node.rounds)
        for (auto s : round.shifts) shifts_zero = shifts_zero && s == 0;
    const bool ok = rec.sequence == tree.root().bits && rec.radioactive_count() == 0 && shifts_zero && !rec.failed;
    pass = pass && ok;
    cases.push_back({{"k", k},
                     {"identical", rec.sequence == tree.root().bits},
                     {"radioactive", rec.radioactive_count()},
                     {"shifts_zero", shifts_zero},
                     {"pass", ok}});
  }
  return {{"lemma", "identity"}, {"cases", cases}, {"pass", pass}};
}

/// Recursive majority of the leaf columns with the shared tie coins and no
/// alignment at all. Meaningful only without indels.
inline Bits plain_recursive_majority(const EvolvedTree& tree, std::uint64_t seed) {
  const auto& shape = tree.shape;
  std::vector<Bits> est(shape.node_count());
  for (std::size_t v = shape.first_leaf(); v < shape.node_count(); ++v) est[v] = tree.nodes[v].bits;
  const auto d = static_cast<std::size_t>(shape.d);
  std::vector<std::uint8_t> votes(d);
  for (std::size_t v = shape.first_leaf(); v-- > 0;) {
    const std::size_t c0 = shape.first_child(v);
    const std::size_t len = est[c0].size();
    est[v].resize(len);
    for (std::size_t t = 0; t < len; ++t) {
      for (std::size_t i = 0; i < d; ++i) votes[i] = est[c0 + i][t];
      est[v][t] = majority_vote(votes, tie_coin(seed, v, t));
    }
  }
  return est[0];
}

/// Substitution-only instance with theta^2 = 1/2 at d=9, k=2000.
struct SubstitutionInstance {
  int d = 9;
  std::vector<int> heights{1, 2, 3};
  std::size_t k = 2000;
  double theta_sq = 0.5;
  double beta = 0.02;  // only enters gamma; the error target is 1/d
  double slack = 0.02;
  std::size_t trials = 50;
};

inline json verify_substitution(const SubstitutionInstance& inst, const Options& opt) {
  const double p_s = (1.0 - std::sqrt(inst.theta_sq)) / 2.0;
  const double target = 1.0 / inst.d + inst.slack;
  const std::size_t trials = opt.trials.value_or(inst.trials);
  json rows = json::array();
  bool within = true, monotone = true;
  double prev_err = -1, prev_sigma = 0;
  for (int H : inst.heights) {
    ModelParams p;
    p.d = inst.d;
    p.H = H;
    p.k = inst.k;
    p.p_s = p_s;
    const ReconConfig cfg = derive_config(p, 8.0, inst.beta);
    std::vector<double> err(trials), adv_err(trials), plain_err(trials);
    std::vector<std::uint8_t> failed(trials);
    harness::parallel_for(trials, opt.threads, [&](std::size_t t) {
      const std::uint64_t seed = harness::trial_seed(opt.seed, static_cast<std::size_t>(H), t);
      const EvolvedTree tree = evolve_tree(p, seed);
      const auto rec = reconstruct_root(leaf_bits(tree), tree.shape, cfg, seed);
      err[t] = 1.0 - agreement_rate(rec.sequence, tree.root().bits);
      failed[t] = rec.failed;
      plain_err[t] = 1.0 - agreement_rate(plain_recursive_majority(tree, seed), tree.root().bits);
      const auto report = classify_stability(tree, cfg);
      const auto stable = extract_stable_subtree(report, seed);
      adv_err[t] = stable ? 1.0 - adversarial_reconstruct(tree, report, *stable, seed).agreement_rate() : 1.0;
    });
    double e = 0, ae = 0, pe = 0;
    std::size_t nf = 0;
    for (std::size_t t = 0; t < trials; ++t) {
      e += err[t];
      ae += adv_err[t];
      pe += plain_err[t];
      nf += failed[t];
    }
    const double n = static_cast<double>(trials);
    e /= n;
    ae /= n;
    pe /= n;
    double var = 0;
    for (double x : err) var += (x - e) * (x - e);
    const double sigma = trials > 1 ? std::sqrt(var / (n - 1) / n) : 0.0;
    within = within && e <= target;
    if (prev_err >= 0 && e > prev_err + 3.0 * std::hypot(sigma, prev_sigma)) monotone = false;
    prev_err = e;
    prev_sigma = sigma;
    rows.push_back({{"H", H},
                    {"ell", cfg.ell},
                    {"a", cfg.a},
                    {"gamma", cfg.gamma},
                    {"error", e},
                    {"error_se", sigma},
                    {"root_failures", nf},
                    {"adversarial_error", ae},
                    {"plain_majority_error", pe}});
  }
  return {{"lemma", "substitution"},
          {"p_s", p_s},
          {"trials_per_height", trials},
          {"target", target},
          {"heights", rows},
          {"within_target", within},
          {"stable_across_heights", monotone},
          {"pass", within && monotone && trials >= 50}};
}

/// Recursive majority against two adversaries at height one, against the
/// exact binomial tail.
inline json verify_majority(const Options& opt) {
  const std::size_t draws = opt.trials.value_or(100000);
  json rows = json::array();
  bool pass = true;
  const std::vector<int> ds{5, 7, 9};
  const std::vector<double> ps{0.05, 0.1, 0.2};
  std::vector<std::size_t> wins(ds.size() * ps.size());
  harness::parallel_for(wins.size(), opt.threads, [&](std::size_t idx) {
    Stream rng(opt.seed, StreamTag::kAdversary, idx);
    std::size_t w = 0;
    for (std::size_t i = 0; i < draws; ++i)
      w += simulate_adversarial_majority(ds[idx / ps.size()], 1, ps[idx % ps.size()], rng);
    wins[idx] = w;
  });
  for (std::size_t idx = 0; idx < wins.size(); ++idx) {
    const int d = ds[idx / ps.size()];
    const double p_s = ps[idx % ps.size()];
    const double exact = adversarial_success_h1(d, p_s);
    const double freq = static_cast<double>(wins[idx]) / static_cast<double>(draws);
    const double sigma = std::sqrt(exact * (1.0 - exact) / static_cast<double>(draws));
    const bool ok = std::abs(freq - exact) <= 3.0 * sigma;
    pass = pass && ok;
    rows.push_back({{"d", d}, {"p_s", p_s}, {"draws", draws}, {"estimate", freq}, {"exact", exact},
                    {"sigma", sigma}, {"pass", ok}});
  }
  return {{"lemma", "majority"}, {"cases", rows}, {"pass", pass}};
}

/// Randomised fixtures for the pathwise correlation bound.
inline json verify_bias(const Options& opt, std::size_t m = 1000) {
  const std::size_t fixtures = opt.trials.value_or(1000);
  std::vector<std::uint8_t> holds(fixtures), dominated(fixtures);
  std::vector<double> slack(fixtures);
  harness::parallel_for(fixtures, opt.threads, [&](std::size_t f) {
    Stream rng(opt.seed, StreamTag::kFixture, f);
    const double bl = 0.3 * rng.uniform(), bt = 0.3 * rng.uniform();
    Bits x(m), y(m), xh(m), yh(m), lam(m), th(m);
    for (std::size_t i = 0; i < m; ++i) {
      x[i] = rng.bit();
      y[i] = rng.bernoulli(0.7) ? x[i] : rng.bit();
      lam[i] = !rng.bernoulli(bl);
      th[i] = !rng.bernoulli(bt);
      // Where the agreement bit is 0 the estimate may be anything.
      xh[i] = lam[i] ? x[i] : rng.bit();
      yh[i] = th[i] ? y[i] : rng.bit();
    }
    const auto b = verify_correlation_bound(x, y, xh, yh, lam, th);
    holds[f] = b.holds;
    dominated[f] = b.dominated;
    slack[f] = b.rhs - b.lhs;
  });
  std::size_t violations = 0, undominated = 0;
  double min_slack = 2.0;
  for (std::size_t f = 0; f < fixtures; ++f) {
    violations += !holds[f];
    undominated += !dominated[f];
    min_slack = std::min(min_slack, slack[f]);
  }
  return {{"lemma", "bias"},
          {"fixtures", fixtures},
          {"m", m},
          {"violations", violations},
          {"undominated_fixtures", undominated},
          {"min_slack", min_slack},
          {"pass", violations == 0 && undominated == 0 && fixtures >= 1000}};
}

/// Long anchors on a large sequence: aligned windows must clear gamma and
/// windows off by one site must stay below it, on true sequences of stable
/// parents and on reconstructed sequences one level up.
struct AnchorInstance {
  int d = 5;
  std::size_t k = 200000;
  double p_s = 0.05;
  double p_id = 1e-6;
  std::size_t ell = 500;
  std::size_t a = 400;
  double beta = 0.02;
  std::size_t min_triples = 10000;
  std::size_t min_reconstructed = 1000;
  std::size_t max_trees = 40;
  double target = 0.999;
};

namespace detail {

struct TripleCount {
  std::size_t total = 0, good = 0;
  void add(const AnchorSample& s, double gamma) {
    ++total;
    bool ok = s.aligned() > gamma;
    for (double c : {s.deletion(), s.insertion()})
      if (!std::isnan(c) && !(c < gamma)) ok = false;
    good += ok;
  }
};

}  // namespace detail

inline json verify_anchors(const AnchorInstance& inst, const Options& opt) {
  ModelParams p;
  p.d = inst.d;
  p.H = 1;
  p.k = inst.k;
  p.p_s = inst.p_s;
  p.p_i = inst.p_id / 2;
  p.p_d = inst.p_id / 2;
  ReconConfig cfg = derive_config(p, 8.0, inst.beta);
  cfg.ell = inst.ell;
  cfg.a = inst.a;
  cfg.anchor_clamped = false;
  cfg.validate();

  detail::TripleCount truth, recon;
  std::size_t trees = 0, stable_parents = 0;
  for (std::size_t t = 0; t < inst.max_trees && truth.total < inst.min_triples; ++t, ++trees) {
    const std::uint64_t seed = harness::trial_seed(opt.seed, 1, t);
    const EvolvedTree tree = evolve_tree(p, seed);
    const auto report = classify_stability(tree, cfg);
    const auto stable = extract_stable_subtree(report, seed);
    if (!stable) continue;
    ++stable_parents;
    for (const auto& s : anchor_correlation_stats(tree, *stable, cfg, 0).samples) truth.add(s, cfg.gamma);
  }

  ModelParams p2 = p;
  p2.H = 2;
  std::size_t trees2 = 0;
  for (std::size_t t = 0; t < inst.max_trees && recon.total < inst.min_reconstructed; ++t, ++trees2) {
    const std::uint64_t seed = harness::trial_seed(opt.seed, 2, t);
    const EvolvedTree tree = evolve_tree(p2, seed);
    // A stable root and its stable children; those children are rebuilt
    // from true leaves, so their reconstructions keep the true coordinates.
    const auto report = classify_stability(tree, cfg);
    if (!report.is_stable(0)) continue;
    std::vector<std::size_t> kids;
    for (std::size_t i = 0; i < static_cast<std::size_t>(p2.d); ++i)
      if (report.is_stable(tree.shape.first_child(0) + i)) kids.push_back(tree.shape.first_child(0) + i);
    if (kids.size() < 2) continue;
    const auto rec = reconstruct_root(leaf_bits(tree), tree.shape, cfg, seed);
    std::vector<const Bits*> seqs;
    for (auto c : kids) seqs.push_back(&rec.internal[c].sequence);
    for (const auto& s : anchor_samples(tree, cfg.ell, cfg.a, 0, kids, seqs)) recon.add(s, cfg.gamma);
  }

  auto frac = [](const detail::TripleCount& c) {
    return c.total ? static_cast<double>(c.good) / static_cast<double>(c.total) : 0.0;
  };
  const bool pass = truth.total >= inst.min_triples && frac(truth) >= inst.target &&
                    recon.total >= inst.min_reconstructed && frac(recon) >= inst.target;
  return {{"lemma", "anchors"},
          {"instance",
           {{"d", inst.d}, {"k", inst.k}, {"p_s", inst.p_s}, {"p_id", inst.p_id}, {"ell", cfg.ell}, {"a", cfg.a},
            {"gamma", cfg.gamma}, {"delta", cfg.delta}, {"beta", cfg.beta}}},
          {"true_windows",
           {{"trees", trees}, {"stable_parents", stable_parents}, {"triples", truth.total}, {"separated", truth.good},
            {"fraction", frac(truth)}}},
          {"reconstructed_windows",
           {{"trees", trees2}, {"triples", recon.total}, {"separated", recon.good}, {"fraction", frac(recon)}}},
          {"target", inst.target},
          {"pass", pass}};
}

// ---------------------------------------------------------------------------
// Dispatcher
// ---------------------------------------------------------------------------

inline const std::vector<std::string>& lemma_names() {
  static const std::vector<std::string> names{"identity",  "length",    "radioactivity", "stable",
                                              "anchors",   "majority",  "bias",          "alignment",
                                              "domination", "substitution", "theorem"};
  return names;
}

/// Runs the named checks ("all" expands to every check). The desk instance
/// is simulated once and shared by the checks that use it.
inline json run(const std::vector<std::string>& requested, const Options& opt, const DeskInstance& desk = {}) {
  std::vector<std::string> names;
  for (const auto& r : requested) {
    if (r == "all") {
      names = lemma_names();
      break;
    }
    if (std::find(lemma_names().begin(), lemma_names().end(), r) == lemma_names().end())
      throw ConfigError("invalid-configuration", "unknown lemma '" + r + "'");
    names.push_back(r);
  }
  std::optional<harness::CellResult> cell;
  auto desk_cell = [&]() -> const harness::CellResult& {
    if (!cell) cell = run_desk(desk, opt);
    if (cell->status != "ok") throw ConfigError(cell->status, cell->error);
    return *cell;
  };
  json verdicts = json::array();
  bool all_pass = true;
  for (const auto& name : names) {
    json v;
    if (name == "identity") v = verify_identity(opt);
    else if (name == "length") v = evaluate_length(desk_cell());
    else if (name == "radioactivity") v = evaluate_radioactivity(desk_cell());
    else if (name == "stable") v = evaluate_stable(desk_cell());
    else if (name == "anchors") v = verify_anchors({}, opt);
    else if (name == "majority") v = verify_majority(opt);
    else if (name == "bias") v = verify_bias(opt);
    else if (name == "alignment") v = evaluate_alignment_and_domination(desk_cell())["alignment"];
    else if (name == "domination") v = evaluate_alignment_and_domination(desk_cell())["domination"];
    else if (name == "substitution") v = verify_substitution({}, opt);
    else if (name == "theorem") v = evaluate_theorem(desk_cell());
    all_pass = all_pass && v.at("pass").get<bool>();
    verdicts.push_back(std::move(v));
  }
  return {{"schema_version", report::kSchemaVersion}, {"seed", opt.seed}, {"verdicts", verdicts}, {"pass", all_pass}};
}

}  // namespace indeltree::lemmas
