#pragma once

// Ground-truth analysis of an evolved tree: which parents have a benign
// indel structure, the dense stable subtree built from them, the gateway
// subtrees for each root site, the stylized adversarial estimator, and
// checkers for the probabilistic statements the reconstruction relies on.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "indeltree/evolution.hpp"
#include "indeltree/recon.hpp"
#include "indeltree/rng.hpp"
#include "indeltree/stats.hpp"

namespace indeltree {

// ---------------------------------------------------------------------------
// Stability
// ---------------------------------------------------------------------------

enum class Trigger : std::uint8_t { kNone, kB1, kB2, kB3 };

inline const char* to_string(Trigger t) {
  switch (t) {
    case Trigger::kNone: return "none";
    case Trigger::kB1: return "B1";
    case Trigger::kB2: return "B2";
    case Trigger::kB3: return "B3";
  }
  return "?";
}

/// Indels on one edge falling in one island of the parent.
struct IslandIndels {
  std::size_t island = 0;
  std::uint32_t count = 0;
  bool hits_anchor = false;
  bool operator==(const IslandIndels&) const = default;
};

struct StabilityReport {
  TreeShape shape;
  std::size_t ell = 0;
  std::size_t a = 0;
  std::vector<std::uint8_t> stable;               // by node id; leaves are stable
  std::vector<Trigger> trigger;                   // by node id
  std::vector<std::vector<IslandIndels>> edge_islands;  // by child node id, sorted by island

  bool is_stable(std::size_t v) const { return stable.at(v) != 0; }

  /// Whether the edge into `child` had an indel in parent island `island`.
  bool corrupted(std::size_t child, std::size_t island) const {
    const auto& list = edge_islands.at(child);
    auto it = std::lower_bound(list.begin(), list.end(), island,
                               [](const IslandIndels& e, std::size_t i) { return e.island < i; });
    return it != list.end() && it->island == island && it->count > 0;
  }

  std::size_t radioactive_count() const {
    std::size_t n = 0;
    for (std::size_t v = 0; v < shape.first_leaf(); ++v) n += !stable[v];
    return n;
  }

  bool operator==(const StabilityReport&) const = default;
};

/// Indels are attributed to parent positions: a deletion to the deleted
/// site, an insertion to the site it was created after.
inline StabilityReport classify_stability(const EvolvedTree& tree, std::size_t ell, std::size_t a) {
  if (ell == 0) throw std::invalid_argument("classify_stability: island length must be positive");
  StabilityReport rep;
  rep.shape = tree.shape;
  rep.ell = ell;
  rep.a = a;
  const std::size_t count = tree.nodes.size();
  rep.stable.assign(count, 1);
  rep.trigger.assign(count, Trigger::kNone);
  rep.edge_islands.resize(count);

  std::vector<std::size_t> positions;
  for (std::size_t c = 1; c < count; ++c) {
    const auto& edge = tree.edges[c];
    positions.clear();
    for (std::size_t t = 0; t < edge.map.size(); ++t)
      if (edge.map[t] == kDeleted) positions.push_back(t);
    for (auto p : edge.insert_after) positions.push_back(static_cast<std::size_t>(p));
    std::sort(positions.begin(), positions.end());
    auto& list = rep.edge_islands[c];
    for (auto p : positions) {
      const std::size_t island = p / ell;
      const bool anchor = (p % ell) < a;
      if (list.empty() || list.back().island != island) list.push_back({island, 0, false});
      list.back().count += 1;
      list.back().hits_anchor = list.back().hits_anchor || anchor;
    }
  }

  const auto d = static_cast<std::size_t>(tree.shape.d);
  for (std::size_t v = 0; v < tree.shape.first_leaf(); ++v) {
    const std::size_t c0 = tree.shape.first_child(v);
    bool b1 = false, b2 = false, b3 = false;
    std::vector<std::size_t> islands_hit;
    for (std::size_t i = 0; i < d; ++i) {
      for (const auto& e : rep.edge_islands[c0 + i]) {
        b1 = b1 || e.hits_anchor;
        b3 = b3 || e.count >= 2;
        islands_hit.push_back(e.island);
      }
    }
    std::sort(islands_hit.begin(), islands_hit.end());
    b2 = std::adjacent_find(islands_hit.begin(), islands_hit.end()) != islands_hit.end();
    rep.trigger[v] = b1 ? Trigger::kB1 : b2 ? Trigger::kB2 : b3 ? Trigger::kB3 : Trigger::kNone;
    rep.stable[v] = rep.trigger[v] == Trigger::kNone;
  }
  return rep;
}

inline StabilityReport classify_stability(const EvolvedTree& tree, const ReconConfig& config) {
  return classify_stability(tree, config.ell, config.a);
}

// ---------------------------------------------------------------------------
// Stable subtree
// ---------------------------------------------------------------------------

inline constexpr std::size_t kNoNode = std::numeric_limits<std::size_t>::max();

/// A (d-1)-ary subtree of stable nodes hanging from the root.
struct StableSubtree {
  std::vector<std::uint8_t> member;   // by node id
  std::vector<std::size_t> dropped;   // by internal node id: the child left out, or kNoNode

  bool contains(std::size_t v) const { return member.at(v) != 0; }

  std::vector<std::size_t> children(const TreeShape& shape, std::size_t v) const {
    std::vector<std::size_t> out;
    if (shape.is_leaf(v)) return out;
    const std::size_t c0 = shape.first_child(v);
    for (std::size_t i = 0; i < static_cast<std::size_t>(shape.d); ++i)
      if (member[c0 + i]) out.push_back(c0 + i);
    return out;
  }
};

/// Greedy bottom-up: a node qualifies when it is stable and at least d-1 of
/// its children qualify. Surplus children are dropped at random.
inline std::optional<StableSubtree> extract_stable_subtree(const StabilityReport& report, std::uint64_t seed) {
  const auto& shape = report.shape;
  const std::size_t count = shape.node_count();
  const auto d = static_cast<std::size_t>(shape.d);
  std::vector<std::uint8_t> qualifies(count, 0);
  for (std::size_t v = count; v-- > 0;) {
    if (shape.is_leaf(v)) {
      qualifies[v] = 1;
      continue;
    }
    if (!report.stable[v]) continue;
    std::size_t ok = 0;
    for (std::size_t i = 0; i < d; ++i) ok += qualifies[shape.first_child(v) + i];
    qualifies[v] = ok >= d - 1;
  }
  if (!qualifies[0]) return std::nullopt;

  StableSubtree sub;
  sub.member.assign(count, 0);
  sub.dropped.assign(shape.first_leaf(), kNoNode);
  sub.member[0] = 1;
  for (std::size_t v = 0; v < shape.first_leaf(); ++v) {
    if (!sub.member[v]) continue;
    const std::size_t c0 = shape.first_child(v);
    std::size_t drop = kNoNode;
    for (std::size_t i = 0; i < d; ++i)
      if (!qualifies[c0 + i]) drop = c0 + i;
    if (drop == kNoNode) {
      Stream rng(seed, StreamTag::kStableTrim, v);
      drop = c0 + static_cast<std::size_t>(rng.below(d));
    }
    sub.dropped[v] = drop;
    for (std::size_t i = 0; i < d; ++i)
      if (c0 + i != drop) sub.member[c0 + i] = 1;
  }
  return sub;
}

/// g(nu) = nu^d + d nu^(d-1) (1 - nu): probability that at least d-1 of d
/// independent children qualify.
inline double stable_recursion_g(double nu, int d) {
  return std::pow(nu, d) + d * std::pow(nu, d - 1) * (1.0 - nu);
}

/// nu_H from nu_0 = 1 and nu_r = (1 - alpha) g(nu_{r-1}).
inline double stable_subtree_bound(double alpha, int d, int H) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("stable_subtree_bound: alpha must lie in [0, 1]");
  double nu = 1.0;
  for (int r = 0; r < H; ++r) nu = (1.0 - alpha) * stable_recursion_g(nu, d);
  return nu;
}

// ---------------------------------------------------------------------------
// Gateways and the adversarial estimator
// ---------------------------------------------------------------------------

struct GatewaySubtree {
  std::size_t base = 0;
  std::size_t site = 0;
  std::vector<std::uint8_t> member;      // by node id
  std::vector<std::int64_t> position;    // F_u(site) for members, kDeleted otherwise

  std::size_t leaf_count(const TreeShape& shape) const {
    std::size_t n = 0;
    for (std::size_t v = shape.first_leaf(); v < member.size(); ++v) n += member[v];
    return n;
  }
};

namespace detail {

/// Gateway children of gateway node u whose copy of the site sits at `pos`,
/// trimmed at random to at most d-2.
inline std::size_t gateway_children(const EvolvedTree& tree, const StabilityReport& report,
                                    const StableSubtree& stable, std::size_t u, std::int64_t pos,
                                    std::size_t site, std::uint64_t seed,
                                    std::array<std::size_t, 64>& kids, std::array<std::int64_t, 64>& kid_pos) {
  const auto& shape = tree.shape;
  const auto d = static_cast<std::size_t>(shape.d);
  const std::size_t c0 = shape.first_child(u);
  const std::size_t island = static_cast<std::size_t>(pos) / report.ell;
  std::size_t n = 0;
  for (std::size_t i = 0; i < d; ++i) {
    const std::size_t c = c0 + i;
    if (!stable.member[c]) continue;
    const std::int64_t cp = tree.edges[c].map[static_cast<std::size_t>(pos)];
    if (cp == kDeleted || report.corrupted(c, island)) continue;
    kids[n] = c;
    kid_pos[n] = cp;
    ++n;
  }
  if (n > d - 2) {
    Stream rng(seed, StreamTag::kGatewayTrim, u, site);
    // Partial Fisher-Yates: keep a uniform (d-2)-subset, in node order.
    for (std::size_t i = 0; i < d - 2; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
      std::swap(kids[i], kids[j]);
      std::swap(kid_pos[i], kid_pos[j]);
    }
    n = d - 2;
    for (std::size_t i = 1; i < n; ++i)
      for (std::size_t j = i; j > 0 && kids[j - 1] > kids[j]; --j) {
        std::swap(kids[j - 1], kids[j]);
        std::swap(kid_pos[j - 1], kid_pos[j]);
      }
  }
  return n;
}

}  // namespace detail

/// Gateway subtree for site `site` of node `base` (the root by default).
inline GatewaySubtree compute_gateways(const EvolvedTree& tree, const StabilityReport& report,
                                       const StableSubtree& stable, std::size_t site, std::uint64_t seed,
                                       std::size_t base = 0) {
  if (site >= tree.nodes.at(base).size()) throw std::out_of_range("compute_gateways: site out of range");
  if (tree.shape.d > 64) throw std::invalid_argument("compute_gateways: arity above 64 is not supported");
  GatewaySubtree g;
  g.base = base;
  g.site = site;
  g.member.assign(tree.nodes.size(), 0);
  g.position.assign(tree.nodes.size(), kDeleted);
  g.member[base] = 1;
  g.position[base] = static_cast<std::int64_t>(site);
  std::array<std::size_t, 64> kids{};
  std::array<std::int64_t, 64> pos{};
  std::vector<std::size_t> stack{base};
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    if (tree.shape.is_leaf(u)) continue;
    const std::size_t n = detail::gateway_children(tree, report, stable, u, g.position[u], site, seed, kids, pos);
    for (std::size_t i = 0; i < n; ++i) {
      g.member[kids[i]] = 1;
      g.position[kids[i]] = pos[i];
      stack.push_back(kids[i]);
    }
  }
  return g;
}

struct AdversarialResult {
  Bits estimate;
  Bits agreement;  // Lambda
  double agreement_rate() const {
    if (agreement.empty()) return 1.0;
    std::size_t s = 0;
    for (auto x : agreement) s += x;
    return static_cast<double>(s) / static_cast<double>(agreement.size());
  }
};

/// Recursive majority where gateway leaves report their true descendant of
/// the site and every other leaf reports the complement of the base bit.
inline AdversarialResult adversarial_reconstruct(const EvolvedTree& tree, const StabilityReport& report,
                                                 const StableSubtree& stable, std::uint64_t seed,
                                                 std::size_t base = 0) {
  if (tree.shape.d > 64) throw std::invalid_argument("adversarial_reconstruct: arity above 64 is not supported");
  const auto& truth = tree.nodes.at(base).bits;
  const auto d = static_cast<std::size_t>(tree.shape.d);
  AdversarialResult out;
  out.estimate.resize(truth.size());
  out.agreement.resize(truth.size());

  // Iterative post-order would be faster; depth is at most H so recursion is fine.
  struct Eval {
    const EvolvedTree& tree;
    const StabilityReport& report;
    const StableSubtree& stable;
    std::uint64_t seed;
    std::size_t site;
    std::uint8_t wrong;
    std::size_t d;

    std::uint8_t operator()(std::size_t u, std::int64_t pos) const {
      if (tree.shape.is_leaf(u)) return tree.nodes[u].bits[static_cast<std::size_t>(pos)];
      std::array<std::size_t, 64> kids{};
      std::array<std::int64_t, 64> kid_pos{};
      const std::size_t n = detail::gateway_children(tree, report, stable, u, pos, site, seed, kids, kid_pos);
      std::array<std::uint8_t, 64> votes{};
      for (std::size_t i = 0; i < d; ++i) votes[i] = wrong;
      for (std::size_t i = 0; i < n; ++i) votes[i] = (*this)(kids[i], kid_pos[i]);
      return majority_vote(std::span<const std::uint8_t>(votes.data(), d), tie_coin(seed, u, static_cast<std::size_t>(pos)));
    }
  };

  for (std::size_t t = 0; t < truth.size(); ++t) {
    const auto wrong = static_cast<std::uint8_t>(1 - truth[t]);
    Eval eval{tree, report, stable, seed, t, wrong, d};
    out.estimate[t] = eval(base, static_cast<std::int64_t>(t));
    out.agreement[t] = out.estimate[t] == truth[t];
  }
  return out;
}

/// One draw of recursive majority on T(d, H0) where only a (d-2)-ary
/// subtree evolves from root state 0 (substitutions only) and every other
/// node holds state 1. Returns true when the root is recovered as 0.
inline bool simulate_adversarial_majority(int d, int H0, double p_s, Stream& rng) {
  if (d < 3 || d % 2 == 0) throw std::invalid_argument("simulate_adversarial_majority: d must be odd and >= 3");
  struct Rec {
    int d;
    double p_s;
    Stream& rng;
    std::uint8_t operator()(std::uint8_t state, int h) {
      if (h == 0) return state;
      int ones = 2;  // the two adversarial children
      for (int i = 0; i < d - 2; ++i) {
        const auto child = static_cast<std::uint8_t>(state ^ (rng.bernoulli(p_s) ? 1 : 0));
        ones += (*this)(child, h - 1);
      }
      return ones * 2 > d ? 1 : 0;
    }
  };
  Rec rec{d, p_s, rng};
  return rec(0, H0) == 0;
}

/// Closed form at H0 = 1: P[Bin(d-2, 1-p_s) >= (d+1)/2].
inline double adversarial_success_h1(int d, double p_s) {
  return stats::binomial_upper_tail(static_cast<std::size_t>(d - 2), 1.0 - p_s, static_cast<std::size_t>((d + 1) / 2));
}

// ---------------------------------------------------------------------------
// Agreement-vector statistics
// ---------------------------------------------------------------------------

struct BiasConcentration {
  double cross = 0;          // (1/m) sum <lambda_i><theta_i>
  double lambda_errors = 0;  // (1/m) sum 1{lambda_i = 0}
  double theta_errors = 0;
  bool cross_ok = false;
  bool lambda_ok = false;
  bool theta_ok = false;
  bool pass() const { return cross_ok && lambda_ok && theta_ok; }
};

/// The three empirical inequalities, with separate error rates for the
/// two vectors. The cross term is compared with (1-2b_l)(1-2b_t).
inline BiasConcentration verify_bias_concentration(std::span<const std::uint8_t> lambda,
                                                   std::span<const std::uint8_t> theta, double beta,
                                                   double beta_prime_lambda, double beta_prime_theta) {
  if (lambda.size() != theta.size()) throw std::invalid_argument("verify_bias_concentration: length mismatch");
  if (lambda.empty()) throw std::invalid_argument("verify_bias_concentration: empty vectors");
  const double m = static_cast<double>(lambda.size());
  double cross = 0, le = 0, te = 0;
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    cross += spin(lambda[i]) * spin(theta[i]);
    le += lambda[i] == 0;
    te += theta[i] == 0;
  }
  BiasConcentration b;
  b.cross = cross / m;
  b.lambda_errors = le / m;
  b.theta_errors = te / m;
  const double half = 0.5 * beta + 1e-12;
  b.cross_ok = std::abs(b.cross - (1 - 2 * beta_prime_lambda) * (1 - 2 * beta_prime_theta)) <= half;
  b.lambda_ok = std::abs(b.lambda_errors - beta_prime_lambda) <= half;
  b.theta_ok = std::abs(b.theta_errors - beta_prime_theta) <= half;
  return b;
}

inline BiasConcentration verify_bias_concentration(std::span<const std::uint8_t> lambda,
                                                   std::span<const std::uint8_t> theta, double beta,
                                                   double beta_prime) {
  return verify_bias_concentration(lambda, theta, beta, beta_prime, beta_prime);
}

struct CorrelationBound {
  double lhs = 0;          // |cor(X,Y) - cor(Xhat,Yhat)|
  double rhs = 0;          // 1 - (1/m) sum (<l><t> - 1{l=0} - 1{t=0})
  bool dominated = false;  // agreement of Xhat/Yhat dominates lambda/theta pointwise
  bool holds = false;      // lhs <= rhs
};

inline CorrelationBound verify_correlation_bound(std::span<const std::uint8_t> x, std::span<const std::uint8_t> y,
                                                 std::span<const std::uint8_t> x_hat,
                                                 std::span<const std::uint8_t> y_hat,
                                                 std::span<const std::uint8_t> lambda,
                                                 std::span<const std::uint8_t> theta) {
  const std::size_t m = x.size();
  if (y.size() != m || x_hat.size() != m || y_hat.size() != m || lambda.size() != m || theta.size() != m)
    throw std::invalid_argument("verify_correlation_bound: length mismatch");
  if (m == 0) throw std::invalid_argument("verify_correlation_bound: empty vectors");
  CorrelationBound b;
  b.lhs = std::abs(correlation(x, y) - correlation(x_hat, y_hat));
  double s = 0;
  b.dominated = true;
  for (std::size_t i = 0; i < m; ++i) {
    s += spin(lambda[i]) * spin(theta[i]) - (lambda[i] == 0) - (theta[i] == 0);
    const bool z = x_hat[i] == x[i], w = y_hat[i] == y[i];
    if ((lambda[i] && !z) || (theta[i] && !w)) b.dominated = false;
  }
  b.rhs = 1.0 - s / static_cast<double>(m);
  b.holds = b.lhs <= b.rhs + 1e-12;
  return b;
}

// ---------------------------------------------------------------------------
// Anchor windows at the true shifts
// ---------------------------------------------------------------------------

inline constexpr int kMaxOffset = 2;

/// Correlations between child i's anchor at round r and child j's window
/// shifted by -2..+2 (index 2 is the aligned window). NaN marks a window
/// that runs off the sequence.
struct AnchorSample {
  std::size_t node = 0;
  std::size_t i = 0, j = 0;  // child node ids
  std::size_t r = 0;
  std::array<double, 2 * kMaxOffset + 1> cor{};

  double aligned() const { return cor[kMaxOffset]; }
  double deletion() const { return cor[kMaxOffset - 1]; }
  double insertion() const { return cor[kMaxOffset + 1]; }
};

/// Anchor windows of parent `v` for the listed children, placed at the true
/// shifts taken from the edge maps, read from `seqs[idx]` (true or
/// reconstructed sequences of children[idx]). Rounds where the window of
/// child i does not fit are skipped.
inline std::vector<AnchorSample> anchor_samples(const EvolvedTree& tree, std::size_t ell, std::size_t a,
                                                std::size_t v, std::span<const std::size_t> children,
                                                std::span<const Bits* const> seqs) {
  std::vector<AnchorSample> out;
  const std::size_t kv = tree.nodes.at(v).size();
  for (std::size_t r = 1; ell * r < kv; ++r) {
    const std::size_t p = ell * r;
    for (std::size_t ii = 0; ii < children.size(); ++ii) {
      const std::int64_t si = tree.edges[children[ii]].map[p];
      if (si == kDeleted) continue;
      auto wi = detail::window(*seqs[ii], si, a);
      if (!wi) continue;
      for (std::size_t jj = 0; jj < children.size(); ++jj) {
        if (jj == ii) continue;
        const std::int64_t sj = tree.edges[children[jj]].map[p];
        if (sj == kDeleted) continue;
        if (!detail::window(*seqs[jj], sj, a)) continue;
        AnchorSample s;
        s.node = v;
        s.i = children[ii];
        s.j = children[jj];
        s.r = r;
        for (int o = -kMaxOffset; o <= kMaxOffset; ++o) {
          auto wj = detail::window(*seqs[jj], sj + o, a);
          s.cor[static_cast<std::size_t>(o + kMaxOffset)] =
              wj ? correlation(*wi, *wj) : std::numeric_limits<double>::quiet_NaN();
        }
        out.push_back(s);
      }
    }
  }
  return out;
}

struct AnchorStats {
  std::vector<AnchorSample> samples;
  std::size_t aligned_failures = 0;     // aligned correlation <= (1-delta) theta^2
  std::size_t misaligned_failures = 0;  // one-site shift correlation >= delta
  bool event_holds() const { return aligned_failures == 0 && misaligned_failures == 0; }
};

/// Anchor-correlation event on the true sequences of parent v's children in
/// the stable subtree.
inline AnchorStats anchor_correlation_stats(const EvolvedTree& tree, const StableSubtree& stable,
                                            const ReconConfig& config, std::size_t v) {
  AnchorStats st;
  const auto kids = stable.children(tree.shape, v);
  std::vector<const Bits*> seqs;
  for (auto c : kids) seqs.push_back(&tree.nodes[c].bits);
  st.samples = anchor_samples(tree, config.ell, config.a, v, kids, seqs);
  const double aligned_bar = (1 - config.delta) * config.theta_sq;
  for (const auto& s : st.samples) {
    if (!(s.aligned() > aligned_bar)) ++st.aligned_failures;
    for (double c : {s.deletion(), s.insertion()})
      if (!std::isnan(c) && !(c < config.delta)) ++st.misaligned_failures;
  }
  return st;
}

// ---------------------------------------------------------------------------
// The good event and the pathwise checks
// ---------------------------------------------------------------------------

struct EventCertificate {
  LengthStats length;
  StabilityReport report;
  std::optional<StableSubtree> stable;
  bool L = false, S = false, A = false, B = false;
  std::size_t anchor_samples = 0;
  std::size_t anchor_failures = 0;
  std::size_t bias_checks = 0;
  std::size_t bias_failures = 0;
  std::string first_failure;  // "L", "S", "A", "B" or empty

  bool E() const { return L && S && A && B; }
};

/// Adversarial reconstructions of every internal stable-subtree node,
/// indexed by node id (empty for nodes outside the subtree and for leaves).
inline std::vector<AdversarialResult> adversarial_all(const EvolvedTree& tree, const StabilityReport& report,
                                                      const StableSubtree& stable, std::uint64_t seed) {
  std::vector<AdversarialResult> out(tree.nodes.size());
  for (std::size_t v = 0; v < tree.shape.first_leaf(); ++v)
    if (stable.member[v]) out[v] = adversarial_reconstruct(tree, report, stable, seed, v);
  return out;
}

namespace detail {

inline std::span<const std::uint8_t> agreement_or_ones(const EvolvedTree& tree, const std::vector<AdversarialResult>& adv,
                                                       std::size_t c, std::vector<std::uint8_t>& ones) {
  if (!tree.shape.is_leaf(c)) return adv[c].agreement;
  ones.assign(tree.nodes[c].size(), 1);
  return ones;
}

}  // namespace detail

/// Bias-concentration events on the adversarial reconstructions of each
/// pair of stable-subtree siblings, over the anchor window and its two
/// one-site shifts. Returns (checks, failures).
inline std::pair<std::size_t, std::size_t> bias_events(const EvolvedTree& tree, const StableSubtree& stable,
                                                       const ReconConfig& config,
                                                       const std::vector<AdversarialResult>& adv) {
  std::size_t checks = 0, failures = 0;
  std::vector<std::uint8_t> ones_i, ones_j;
  const std::size_t ell = config.ell, a = config.a;
  for (std::size_t v = 0; v < tree.shape.first_leaf(); ++v) {
    if (!stable.member[v]) continue;
    const auto kids = stable.children(tree.shape, v);
    const std::size_t kv = tree.nodes[v].size();
    for (std::size_t ii = 0; ii < kids.size(); ++ii) {
      for (std::size_t jj = ii + 1; jj < kids.size(); ++jj) {
        const std::size_t ci = kids[ii], cj = kids[jj];
        auto li = detail::agreement_or_ones(tree, adv, ci, ones_i);
        auto lj = detail::agreement_or_ones(tree, adv, cj, ones_j);
        const double bi = tree.shape.is_leaf(ci) ? 0.0 : 1.0 - adv[ci].agreement_rate();
        const double bj = tree.shape.is_leaf(cj) ? 0.0 : 1.0 - adv[cj].agreement_rate();
        for (std::size_t r = 1; ell * r < kv; ++r) {
          const std::int64_t si = tree.edges[ci].map[ell * r];
          const std::int64_t sj = tree.edges[cj].map[ell * r];
          if (si == kDeleted || sj == kDeleted) continue;
          // (A_i,A_j) (A_i,D_j) (A_i,I_j) (D_i,A_j) (I_i,A_j)
          const std::array<std::pair<int, int>, 5> pairs{{{0, 0}, {0, -1}, {0, 1}, {-1, 0}, {1, 0}}};
          for (auto [oi, oj] : pairs) {
            const std::int64_t s0 = si + oi, s1 = sj + oj;
            if (s0 < 0 || s1 < 0 || static_cast<std::size_t>(s0) + a > li.size() ||
                static_cast<std::size_t>(s1) + a > lj.size())
              continue;
            ++checks;
            auto bc = verify_bias_concentration(li.subspan(static_cast<std::size_t>(s0), a),
                                                lj.subspan(static_cast<std::size_t>(s1), a), config.beta, bi, bj);
            if (!bc.pass()) ++failures;
          }
        }
      }
    }
  }
  return {checks, failures};
}

/// Evaluates L, S, every anchor event and every bias-concentration event.
inline EventCertificate certify_event_E(const EvolvedTree& tree, const ReconConfig& config, std::uint64_t seed,
                                        double zeta = 0.1) {
  EventCertificate cert;
  cert.length = length_stats(tree, zeta);
  cert.L = cert.length.holds;
  cert.report = classify_stability(tree, config);
  cert.stable = extract_stable_subtree(cert.report, seed);
  cert.S = cert.stable.has_value();
  if (cert.S) {
    for (std::size_t v = 0; v < tree.shape.first_leaf(); ++v) {
      if (!cert.stable->member[v]) continue;
      auto st = anchor_correlation_stats(tree, *cert.stable, config, v);
      cert.anchor_samples += st.samples.size();
      cert.anchor_failures += st.aligned_failures + st.misaligned_failures;
    }
    cert.A = cert.anchor_failures == 0;
    auto adv = adversarial_all(tree, cert.report, *cert.stable, seed);
    auto [checks, failures] = bias_events(tree, *cert.stable, config, adv);
    cert.bias_checks = checks;
    cert.bias_failures = failures;
    cert.B = failures == 0;
  }
  cert.first_failure = !cert.L ? "L" : !cert.S ? "S" : !cert.A ? "A" : !cert.B ? "B" : "";
  return cert;
}

struct SeparationCertificate {
  std::size_t samples = 0;
  std::size_t failures = 0;
  bool holds() const { return failures == 0; }
};

/// Separation of the algorithm's own correlation tests among stable-subtree
/// siblings: at the true shifts, reconstructed aligned anchors reach gamma
/// and windows shifted by one or two sites stay below it.
inline SeparationCertificate certify_reconstructed_separation(const EvolvedTree& tree, const StableSubtree& stable,
                                                              const ReconConfig& config,
                                                              const RootReconstruction& recon) {
  SeparationCertificate cert;
  for (std::size_t v = 0; v < tree.shape.first_leaf(); ++v) {
    if (!stable.member[v]) continue;
    const auto kids = stable.children(tree.shape, v);
    std::vector<const Bits*> seqs;
    for (auto c : kids)
      seqs.push_back(tree.shape.is_leaf(c) ? &tree.nodes[c].bits : &recon.internal[c].sequence);
    for (const auto& s : anchor_samples(tree, config.ell, config.a, v, kids, seqs)) {
      ++cert.samples;
      bool ok = s.aligned() >= config.gamma;
      for (std::size_t o = 0; o < s.cor.size(); ++o)
        if (o != static_cast<std::size_t>(kMaxOffset) && !std::isnan(s.cor[o]) && !(s.cor[o] < config.gamma))
          ok = false;
      cert.failures += !ok;
    }
  }
  return cert;
}

struct AlignmentCheck {
  std::size_t checked = 0;
  std::size_t shift_violations = 0;
  std::size_t length_violations = 0;
  std::size_t aborted_nodes = 0;
  bool exact() const { return shift_violations == 0 && length_violations == 0 && aborted_nodes == 0; }
};

/// Compares the algorithm's shift estimates with the true displacements
/// s_i(r) = f_i(ell r) - ell r for every stable-subtree child.
inline AlignmentCheck check_alignment(const EvolvedTree& tree, const StableSubtree& stable, const ReconConfig& config,
                                      const RootReconstruction& recon) {
  AlignmentCheck chk;
  const auto& shape = tree.shape;
  for (std::size_t v = 0; v < shape.first_leaf(); ++v) {
    if (!stable.member[v]) continue;
    const auto& res = recon.internal.at(v);
    if (res.radioactive) {
      ++chk.aborted_nodes;
      continue;
    }
    if (res.sequence.size() != tree.nodes[v].size()) ++chk.length_violations;
    const std::size_t kv = tree.nodes[v].size();
    for (auto c : stable.children(shape, v)) {
      const std::size_t idx = shape.child_index(c);
      // Rounds whose anchor fits in the parent; later sites form the tail.
      for (std::size_t r = 1; config.ell * r + config.a <= kv; ++r) {
        const std::size_t p = config.ell * r;
        const std::int64_t f = tree.edges[c].map[p];
        if (f == kDeleted) continue;
        ++chk.checked;
        const std::int64_t truth = f - static_cast<std::int64_t>(p);
        if (r > res.rounds.size() || res.shift(idx, r) != truth) ++chk.shift_violations;
      }
    }
  }
  return chk;
}

struct DominationCheck {
  std::size_t sites = 0;       // sites where the adversarial estimate is right
  std::size_t violations = 0;  // ... and the algorithm is wrong
};

inline DominationCheck check_domination(std::span<const std::uint8_t> truth, std::span<const std::uint8_t> estimate,
                                        std::span<const std::uint8_t> adversarial_agreement) {
  if (truth.size() != estimate.size() || truth.size() != adversarial_agreement.size())
    throw std::invalid_argument("check_domination: length mismatch");
  DominationCheck c;
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (!adversarial_agreement[t]) continue;
    ++c.sites;
    c.violations += estimate[t] != truth[t];
  }
  return c;
}

}  // namespace indeltree
