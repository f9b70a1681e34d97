#pragma once

// Bottom-up reconstruction of the root sequence from the leaves.
//
// Each parent is rebuilt from its d children island by island. Islands have
// length ell; the first `a` sites of each island form its anchor. Children
// anchors are compared by spin correlation against a threshold gamma to
// decide which children are still aligned, and children that drifted by one
// site are re-synchronised by testing the one-site-shifted windows. Each
// island is then filled by a sitewise majority over the aligned children.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "indeltree/evolution.hpp"
#include "indeltree/rng.hpp"

namespace indeltree {

struct ReconConfig {
  std::size_t ell = 0;     // island length
  std::size_t a = 0;       // anchor length
  double gamma = 0;        // alignment threshold on spin correlation
  double delta = 0;        // separation parameter
  double beta = 0;         // error budget entering gamma
  double C = 8.0;          // anchor-length constant, a = ceil(C ln n)
  double theta_sq = 1.0;   // (1 - 2 p_s)^2
  std::size_t k = 0;       // root length
  int d = 3;
  std::size_t n = 1;       // leaves
  bool anchor_clamped = false;

  void validate() const {
    if (d < 3 || d % 2 == 0) throw ConfigError("invalid-configuration", "arity d must be odd and >= 3");
    if (ell < 2) throw ConfigError("invalid-configuration", "island length must be >= 2");
    if (a < 1 || a >= ell) throw ConfigError("invalid-configuration", "anchor length must satisfy 1 <= a < ell");
    if (!std::isfinite(gamma)) throw ConfigError("invalid-configuration", "gamma is not finite");
  }
};

/// Smallest integer l with l^3 >= k.
inline std::size_t ceil_cbrt(std::size_t k) {
  auto l = static_cast<std::size_t>(std::llround(std::cbrt(static_cast<double>(k))));
  while (l * l * l < k) ++l;
  while (l > 0 && (l - 1) * (l - 1) * (l - 1) >= k) --l;
  return l;
}

/// Largest delta allowed by (1-delta) theta^2 - 8 beta > delta + 8 beta.
inline double max_feasible_delta(double theta_sq, double beta) {
  return (theta_sq - 16.0 * beta) / (1.0 + theta_sq);
}

/// `delta_fraction` places delta inside its feasible interval (0, delta_max);
/// the default is the midpoint.
inline ReconConfig derive_config(const ModelParams& params, double C = 8.0,
                                 std::optional<double> beta_override = std::nullopt,
                                 double delta_fraction = 0.5) {
  if (params.p_s >= 0.5 && params.p_s <= 1.0)
    throw ConfigError("infeasible-parameters", "p_s >= 1/2 leaves no correlation between parent and child");
  params.validate();
  if (!(delta_fraction > 0.0 && delta_fraction < 1.0))
    throw ConfigError("invalid-configuration", "delta fraction must lie in (0, 1)");
  ReconConfig c;
  c.d = params.d;
  c.k = params.k;
  c.n = params.n();
  c.C = C;
  c.theta_sq = params.theta_s() * params.theta_s();
  c.beta = beta_override.value_or(1.0 / params.d);
  if (c.beta < 0) throw ConfigError("invalid-configuration", "beta must be non-negative");

  c.ell = ceil_cbrt(params.k);
  if (c.ell <= 2)
    throw ConfigError("invalid-configuration",
                      "island length " + std::to_string(c.ell) + " leaves no room for an anchor (k too small)");
  const double raw_a = std::ceil(C * std::log(static_cast<double>(c.n)));
  c.a = raw_a < 1.0 ? 1 : static_cast<std::size_t>(raw_a);
  if (c.a >= c.ell) {
    c.a = c.ell - 1;
    c.anchor_clamped = true;
  }

  const double delta_max = max_feasible_delta(c.theta_sq, c.beta);
  if (!(delta_max > 0.0))
    throw ConfigError("infeasible-parameters",
                      "no delta > 0 satisfies the separation inequality for (1-2p_s)^2 = " +
                          std::to_string(c.theta_sq) + " and beta = " + std::to_string(c.beta));
  c.delta = delta_fraction * delta_max;
  c.gamma = (1.0 - c.delta) * c.theta_sq - 4.0 * c.beta;
  return c;
}

inline double spin(std::uint8_t x) noexcept { return x ? 1.0 : -1.0; }

/// (matches - mismatches) / m.
inline double correlation(std::span<const std::uint8_t> y, std::span<const std::uint8_t> z) {
  if (y.size() != z.size()) throw std::invalid_argument("correlation: window lengths differ");
  if (y.empty()) throw std::invalid_argument("correlation: empty window");
  std::ptrdiff_t agree = 0;
  for (std::size_t j = 0; j < y.size(); ++j) agree += (y[j] == z[j]) ? 1 : -1;
  return static_cast<double>(agree) / static_cast<double>(y.size());
}

inline constexpr std::uint8_t kBlank = 2;  // the "no vote" symbol

/// Shared tie coin for (node, site). The adversarial estimator draws from
/// the same substream, which keeps the two estimators coupled.
inline bool tie_coin(std::uint64_t seed, std::size_t node, std::size_t site) {
  return Stream(seed, StreamTag::kTie, node, site).bit() != 0;
}

/// Majority over non-blank votes; ties (including all blank) go to the coin.
inline std::uint8_t majority_vote(std::span<const std::uint8_t> votes, bool tie_heads) {
  int balance = 0;
  for (auto v : votes) {
    if (v == kBlank) continue;
    balance += v ? 1 : -1;
  }
  if (balance > 0) return 1;
  if (balance < 0) return 0;
  return tie_heads ? 1 : 0;
}

enum class ChildStatus : std::uint8_t {
  kAligned,    // in G_r, shift kept
  kDeletion,   // shifted window matched, shift decreased by one
  kInsertion,  // shifted window matched, shift increased by one
  kLost,       // matched nothing this round; excluded, shift kept
};

inline const char* to_string(ChildStatus s) {
  switch (s) {
    case ChildStatus::kAligned: return "aligned";
    case ChildStatus::kDeletion: return "deletion";
    case ChildStatus::kInsertion: return "insertion";
    case ChildStatus::kLost: return "lost";
  }
  return "?";
}

struct RoundTrace {
  std::size_t anchor_length = 0;
  std::size_t aligned_count = 0;            // |G_r|
  std::vector<std::int64_t> shifts;         // shift of each child after the round
  std::vector<ChildStatus> status;
};

struct NodeResult {
  Bits sequence;
  bool radioactive = false;
  std::string abort_reason;
  std::vector<RoundTrace> rounds;  // rounds[r-1] describes round r
  std::size_t tail_length = 0;
  std::size_t tail_children = 0;

  /// Estimated shift of `child` after round r (r = 0 gives 0).
  std::int64_t shift(std::size_t child, std::size_t r) const {
    return r == 0 ? 0 : rounds.at(r - 1).shifts.at(child);
  }
};

namespace detail {

inline std::optional<std::span<const std::uint8_t>> window(const Bits& seq, std::int64_t start, std::size_t m) {
  if (start < 0 || static_cast<std::size_t>(start) + m > seq.size()) return std::nullopt;
  return std::span<const std::uint8_t>(seq).subspan(static_cast<std::size_t>(start), m);
}

}  // namespace detail

/// One parent from its d children. Never throws on data: an alignment
/// failure yields a result with `radioactive` set and `abort_reason` filled.
inline NodeResult recursive_step(std::span<const Bits> children, const ReconConfig& config,
                                 std::uint64_t seed, std::size_t node_id) {
  const auto d = static_cast<std::size_t>(config.d);
  if (children.size() != d) throw std::invalid_argument("recursive_step: expected exactly d children");
  const std::size_t need = d - 2;
  const auto ell = static_cast<std::int64_t>(config.ell);

  NodeResult out;
  std::vector<std::int64_t> shift(d, 0);
  std::vector<std::uint8_t> valid(d, 1);  // usable for the island after the last round
  std::vector<std::uint8_t> votes(d);

  auto fill_island = [&](std::int64_t from, std::int64_t count, const std::vector<std::uint8_t>& members) {
    for (std::int64_t p = from; p < from + count; ++p) {
      for (std::size_t i = 0; i < d; ++i) {
        const std::int64_t idx = p + shift[i];
        votes[i] = (members[i] && idx >= 0 && static_cast<std::size_t>(idx) < children[i].size())
                       ? children[i][static_cast<std::size_t>(idx)]
                       : kBlank;
      }
      int balance = 0;
      for (auto v : votes)
        if (v != kBlank) balance += v ? 1 : -1;
      out.sequence.push_back(balance > 0   ? 1
                             : balance < 0 ? 0
                                           : tie_coin(seed, node_id, static_cast<std::size_t>(p)));
    }
  };

  std::vector<std::int64_t> remaining(d), sorted(d);
  std::vector<std::uint8_t> participating(d), aligned(d);
  std::vector<std::span<const std::uint8_t>> anchors(d);

  for (std::int64_t r = 1;; ++r) {
    const std::int64_t t = ell * r;
    for (std::size_t i = 0; i < d; ++i)
      remaining[i] = static_cast<std::int64_t>(children[i].size()) - (t + shift[i]);
    sorted = remaining;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    const std::int64_t kth = sorted[need - 1];

    if (kth < static_cast<std::int64_t>(config.a)) {
      // Fewer than d-2 children have a full anchor left: everything from the
      // previous anchor on is the last island. Use the children that were
      // usable after the previous round, with their most common tail length.
      const std::int64_t from = ell * (r - 1);
      std::vector<std::int64_t> tails;
      for (std::size_t i = 0; i < d; ++i) {
        const std::int64_t len = static_cast<std::int64_t>(children[i].size()) - (from + shift[i]);
        if (valid[i] && len >= 1) tails.push_back(len);
      }
      if (tails.empty()) break;
      std::sort(tails.begin(), tails.end());
      std::int64_t best = tails.front();
      std::size_t best_count = 0;
      for (std::size_t s = 0; s < tails.size();) {
        std::size_t e = s;
        while (e < tails.size() && tails[e] == tails[s]) ++e;
        if (e - s > best_count) {
          best_count = e - s;
          best = tails[s];
        }
        s = e;
      }
      std::vector<std::uint8_t> members(d, 0);
      if (best_count < need) best = tails.front();  // fall back to the shortest tail
      for (std::size_t i = 0; i < d; ++i) {
        const std::int64_t len = static_cast<std::int64_t>(children[i].size()) - (from + shift[i]);
        members[i] = valid[i] && (best_count >= need ? len == best : len >= 1);
      }
      out.tail_length = static_cast<std::size_t>(best);
      out.tail_children = static_cast<std::size_t>(std::count(members.begin(), members.end(), 1));
      fill_island(from, best, members);
      break;
    }

    const std::size_t m = config.a;
    for (std::size_t i = 0; i < d; ++i) {
      participating[i] = remaining[i] >= static_cast<std::int64_t>(m);
      if (participating[i]) anchors[i] = *detail::window(children[i], t + shift[i], m);
    }

    std::size_t aligned_count = 0;
    for (std::size_t i = 0; i < d; ++i) {
      aligned[i] = 0;
      if (!participating[i]) continue;
      std::size_t agree = 0;
      for (std::size_t j = 0; j < d; ++j)
        if (participating[j] && correlation(anchors[i], anchors[j]) >= config.gamma) ++agree;
      aligned[i] = agree >= need;
      aligned_count += aligned[i];
    }

    RoundTrace trace;
    trace.anchor_length = m;
    trace.aligned_count = aligned_count;
    trace.status.assign(d, ChildStatus::kAligned);

    if (aligned_count < need) {
      out.radioactive = true;
      out.abort_reason = "round " + std::to_string(r) + ": only " + std::to_string(aligned_count) +
                         " aligned children";
      trace.shifts = shift;
      out.rounds.push_back(std::move(trace));
      return out;
    }

    fill_island(ell * (r - 1), ell, aligned);

    std::vector<std::int64_t> next = shift;
    for (std::size_t i = 0; i < d; ++i) {
      valid[i] = aligned[i];
      if (aligned[i]) continue;
      auto votes_for = [&](std::int64_t start) {
        auto w = detail::window(children[i], start, m);
        if (!w) return std::size_t{0};
        std::size_t c = 0;
        for (std::size_t j = 0; j < d; ++j)
          if (j != i && participating[j] && correlation(*w, anchors[j]) >= config.gamma) ++c;
        return c;
      };
      const bool del = votes_for(t + shift[i] - 1) >= need;
      const bool ins = votes_for(t + shift[i] + 1) >= need;
      if (del && ins) {
        out.radioactive = true;
        out.abort_reason = "round " + std::to_string(r) + ": child " + std::to_string(i) +
                           " matches both shifted windows";
        trace.shifts = shift;
        out.rounds.push_back(std::move(trace));
        return out;
      }
      if (del) {
        next[i] = shift[i] - 1;
        trace.status[i] = ChildStatus::kDeletion;
        valid[i] = 1;
      } else if (ins) {
        next[i] = shift[i] + 1;
        trace.status[i] = ChildStatus::kInsertion;
        valid[i] = 1;
      } else {
        trace.status[i] = ChildStatus::kLost;
      }
    }
    shift = std::move(next);
    trace.shifts = shift;
    out.rounds.push_back(std::move(trace));
  }
  return out;
}

struct RootReconstruction {
  Bits sequence;              // always exactly k sites
  bool failed = false;        // root aborted
  std::size_t raw_length = 0; // length before pad/truncate
  std::size_t padded = 0;
  std::size_t truncated = 0;
  std::vector<NodeResult> internal;  // by node id, internal nodes only

  std::size_t radioactive_count() const {
    std::size_t n = 0;
    for (const auto& r : internal) n += r.radioactive;
    return n;
  }
};

/// Runs recursive_step level by level. `leaves` must be in planar order.
/// An aborted internal node passes its first child's sequence upward.
inline RootReconstruction reconstruct_root(std::span<const Bits> leaves, const TreeShape& shape,
                                           const ReconConfig& config, std::uint64_t seed) {
  config.validate();
  if (config.d != shape.d) throw std::invalid_argument("reconstruct_root: config arity differs from tree arity");
  if (leaves.size() != shape.leaf_count())
    throw std::invalid_argument("reconstruct_root: expected " + std::to_string(shape.leaf_count()) + " leaves");

  RootReconstruction out;
  const std::size_t first_leaf = shape.first_leaf();
  out.internal.resize(first_leaf);
  const auto d = static_cast<std::size_t>(shape.d);

  auto bits_of = [&](std::size_t v) -> const Bits& {
    return v >= first_leaf ? leaves[v - first_leaf] : out.internal[v].sequence;
  };

  Bits raw;
  if (shape.H == 0) {
    raw = leaves.front();
  } else {
    std::vector<Bits> children(d);
    for (int level = shape.H - 1; level >= 0; --level) {
      for (std::size_t v = shape.level_start(level); v < shape.level_start(level + 1); ++v) {
        const std::size_t c0 = shape.first_child(v);
        for (std::size_t i = 0; i < d; ++i) children[i] = bits_of(c0 + i);
        NodeResult res = recursive_step(children, config, seed, v);
        if (res.radioactive) res.sequence = children.front();
        out.internal[v] = std::move(res);
      }
    }
    raw = out.internal[0].sequence;
    out.failed = out.internal[0].radioactive;
  }

  out.raw_length = raw.size();
  if (out.failed) {
    out.sequence.assign(config.k, 0);
    return out;
  }
  out.sequence = std::move(raw);
  if (out.sequence.size() > config.k) {
    out.truncated = out.sequence.size() - config.k;
    out.sequence.resize(config.k);
  } else if (out.sequence.size() < config.k) {
    out.padded = config.k - out.sequence.size();
    out.sequence.resize(config.k, 0);
  }
  return out;
}

/// Fraction of positions where two equal-length sequences agree.
inline double agreement_rate(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw std::invalid_argument("agreement_rate: lengths differ");
  if (a.empty()) return 1.0;
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i];
  return static_cast<double>(same) / static_cast<double>(a.size());
}

}  // namespace indeltree
