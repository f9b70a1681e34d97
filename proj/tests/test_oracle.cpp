#include <gtest/gtest.h>

#include <cmath>

#include "indeltree/oracle.hpp"

using namespace indeltree;

namespace {

ModelParams params(int d, int H, std::size_t k, double ps, double pd = 0, double pi = 0) {
  ModelParams p;
  p.d = d;
  p.H = H;
  p.k = k;
  p.p_s = ps;
  p.p_d = pd;
  p.p_i = pi;
  return p;
}

// Marks parent site t of the edge into `child` as deleted. Only the edge
// record changes; classification reads nothing else.
void delete_site(EvolvedTree& tree, std::size_t child, std::size_t t) {
  auto& map = tree.edges[child].map.to_child;
  map[t] = kDeleted;
  std::int64_t next = 0;
  for (auto& c : map)
    if (c != kDeleted) c = next++;
}

void insert_after(EvolvedTree& tree, std::size_t child, std::size_t t) {
  auto& ins = tree.edges[child].insert_after;
  ins.push_back(static_cast<std::int64_t>(t));
  std::sort(ins.begin(), ins.end());
}

double choose(int n, int k) {
  double c = 1;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

// Success probability of the adversarial majority after h levels. Each
// gateway node has d-2 honest children and 2 votes for the complement of the
// base bit, so the recursion tracks whether a node's own state matches the
// base bit (ok[1]) or not (ok[0]).
double adversarial_exact(int d, int h, double ps) {
  double ok_same = 1.0, ok_flipped = 0.0;
  for (int level = 0; level < h; ++level) {
    auto tail = [&](double q) {
      double s = 0;
      for (int j = (d + 1) / 2; j <= d - 2; ++j) s += choose(d - 2, j) * std::pow(q, j) * std::pow(1 - q, d - 2 - j);
      return s;
    };
    const double q_same = (1 - ps) * ok_same + ps * ok_flipped;
    const double q_flipped = (1 - ps) * ok_flipped + ps * ok_same;
    ok_same = tail(q_same);
    ok_flipped = tail(q_flipped);
  }
  return ok_same;
}

Bits random_bits(std::size_t n, Stream& s) {
  Bits b(n);
  for (auto& x : b) x = s.bit();
  return b;
}

}  // namespace

TEST(Stability, NoIndelsEverythingStable) {
  const auto tree = evolve_tree(params(3, 3, 1000, 0.1), 1);
  const auto rep = classify_stability(tree, 10, 5);
  EXPECT_EQ(rep.radioactive_count(), 0u);
  for (auto t : rep.trigger) EXPECT_EQ(t, Trigger::kNone);
}

TEST(Stability, HandBuiltTriggers) {
  // d = 3, H = 1, islands of 10 with anchors of 5 (offsets 0..4).
  const auto base = evolve_tree(params(3, 1, 100, 0), 1);
  auto classify = [](const EvolvedTree& t) { return classify_stability(t, 10, 5); };

  auto t1 = base;
  delete_site(t1, 1, 2);
  EXPECT_EQ(classify(t1).trigger[0], Trigger::kB1);

  auto t2 = base;
  delete_site(t2, 1, 7);
  EXPECT_TRUE(classify(t2).is_stable(0));
  EXPECT_TRUE(classify(t2).corrupted(1, 0));
  EXPECT_FALSE(classify(t2).corrupted(1, 1));

  auto t3 = base;
  delete_site(t3, 1, 7);
  delete_site(t3, 2, 8);
  EXPECT_EQ(classify(t3).trigger[0], Trigger::kB2);

  auto t4 = base;
  delete_site(t4, 1, 7);
  delete_site(t4, 1, 8);
  EXPECT_EQ(classify(t4).trigger[0], Trigger::kB3);

  // An insertion belongs to the island of the site it follows.
  auto t5 = base;
  insert_after(t5, 3, 9);
  EXPECT_TRUE(classify(t5).is_stable(0));
  EXPECT_TRUE(classify(t5).corrupted(3, 0));
  auto t6 = t5;
  delete_site(t6, 2, 8);
  EXPECT_EQ(classify(t6).trigger[0], Trigger::kB2);
  auto t7 = base;
  insert_after(t7, 3, 10);
  EXPECT_EQ(classify(t7).trigger[0], Trigger::kB1);

  EXPECT_EQ(classify(t6), classify(t6));
  EXPECT_THROW(classify_stability(base, 0, 0), std::invalid_argument);
}

TEST(StableSubtree, FullTreeDropsOneChildPerNode) {
  const auto tree = evolve_tree(params(5, 2, 500, 0.1), 2);
  const auto rep = classify_stability(tree, 10, 5);
  const auto sub = extract_stable_subtree(rep, 2);
  ASSERT_TRUE(sub.has_value());
  std::size_t leaves = 0;
  for (std::size_t v = 0; v < tree.nodes.size(); ++v) {
    if (!sub->contains(v)) continue;
    if (tree.shape.is_leaf(v)) {
      ++leaves;
      continue;
    }
    EXPECT_EQ(sub->children(tree.shape, v).size(), 4u);
    EXPECT_NE(sub->dropped[v], kNoNode);
    EXPECT_FALSE(sub->contains(sub->dropped[v]));
  }
  EXPECT_EQ(leaves, 16u);
  EXPECT_EQ(extract_stable_subtree(rep, 2)->member, sub->member);
}

TEST(StableSubtree, RadioactiveChildIsTheDroppedOne) {
  auto tree = evolve_tree(params(3, 2, 100, 0), 3);
  delete_site(tree, 4, 1);  // anchor hit below node 1
  const auto rep = classify_stability(tree, 10, 5);
  EXPECT_FALSE(rep.is_stable(1));
  const auto sub = extract_stable_subtree(rep, 3);
  ASSERT_TRUE(sub.has_value());
  EXPECT_EQ(sub->dropped[0], 1u);
  EXPECT_TRUE(sub->contains(2));
  EXPECT_TRUE(sub->contains(3));

  delete_site(tree, 7, 1);  // node 2 as well: the root no longer qualifies
  EXPECT_FALSE(extract_stable_subtree(classify_stability(tree, 10, 5), 3).has_value());

  auto root_hit = evolve_tree(params(3, 1, 100, 0), 3);
  delete_site(root_hit, 1, 0);
  EXPECT_FALSE(extract_stable_subtree(classify_stability(root_hit, 10, 5), 3).has_value());
}

TEST(StableSubtreeBound, RecursionMatchesExpandedPolynomial) {
  for (double nu : {0.0, 0.3, 0.9, 1.0}) EXPECT_NEAR(stable_recursion_g(nu, 5), 5 * std::pow(nu, 4) - 4 * std::pow(nu, 5), 1e-15);
  EXPECT_DOUBLE_EQ(stable_subtree_bound(0.0, 5, 4), 1.0);
  EXPECT_DOUBLE_EQ(stable_subtree_bound(1.0, 5, 4), 0.0);
  double nu = 1;
  for (int h = 0; h < 3; ++h) nu = 0.99 * (5 * std::pow(nu, 4) - 4 * std::pow(nu, 5));
  EXPECT_NEAR(stable_subtree_bound(0.01, 5, 3), nu, 1e-15);
  EXPECT_THROW(stable_subtree_bound(1.5, 5, 1), std::invalid_argument);
}

TEST(Gateways, NoIndelsGiveFullTrimmedTree) {
  const auto tree = evolve_tree(params(5, 2, 300, 0.1), 4);
  const auto rep = classify_stability(tree, 10, 5);
  const auto sub = *extract_stable_subtree(rep, 4);
  for (std::size_t t : {0u, 17u, 299u}) {
    const auto g = compute_gateways(tree, rep, sub, t, 4);
    EXPECT_EQ(g.leaf_count(tree.shape), 9u);
    for (std::size_t v = 0; v < tree.nodes.size(); ++v) {
      if (g.member[v]) {
        EXPECT_EQ(g.position[v], static_cast<std::int64_t>(t));
      }
    }
  }
  EXPECT_THROW(compute_gateways(tree, rep, sub, 300, 4), std::out_of_range);
}

TEST(Gateways, CorruptedChildIsExcluded) {
  auto tree = evolve_tree(params(5, 2, 300, 0), 5);
  delete_site(tree, 2, 27);  // island 2 of root child 2, past the anchor
  const auto rep = classify_stability(tree, 10, 5);
  const auto sub = *extract_stable_subtree(rep, 5);
  for (std::size_t t = 20; t < 30; ++t) {
    const auto g = compute_gateways(tree, rep, sub, t, 5);
    EXPECT_FALSE(g.member[2]);
    EXPECT_EQ(g.leaf_count(tree.shape), 9u);
  }
  EXPECT_EQ(compute_gateways(tree, rep, sub, 35, 5).leaf_count(tree.shape), 9u);
}

TEST(Gateways, MembersCarryTheSiteThroughUncorruptedEdges) {
  const auto p = params(5, 2, 1000, 0.05, 3e-4, 3e-4);
  std::size_t evaluated = 0;
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const auto tree = evolve_tree(p, seed);
    const auto rep = classify_stability(tree, 20, 2);
    const auto sub = extract_stable_subtree(rep, seed);
    if (!sub) continue;
    ++evaluated;
    for (std::size_t t = 0; t < tree.root().size(); t += 3) {
      const auto g = compute_gateways(tree, rep, *sub, t, seed);
      for (std::size_t u = 1; u < tree.nodes.size(); ++u) {
        if (!g.member[u]) continue;
        EXPECT_TRUE(sub->contains(u));
        EXPECT_EQ(g.position[u], compose_maps(tree, u)[t]);
        ASSERT_NE(g.position[u], kDeleted);
        const std::size_t parent = tree.shape.parent(u);
        ASSERT_TRUE(g.member[parent]);
        EXPECT_FALSE(rep.corrupted(u, static_cast<std::size_t>(g.position[parent]) / rep.ell));
      }
      for (std::size_t u = 0; u < tree.shape.first_leaf(); ++u) {
        if (!g.member[u]) continue;
        std::size_t kids = 0;
        for (std::size_t i = 0; i < 5; ++i) kids += g.member[tree.shape.first_child(u) + i];
        EXPECT_LE(kids, 3u);
      }
    }
  }
  EXPECT_GE(evaluated, 10u);
}

TEST(Adversarial, NoMutationsAgreeEverywhere) {
  const auto tree = evolve_tree(params(5, 2, 500, 0), 6);
  const auto rep = classify_stability(tree, 10, 5);
  const auto sub = *extract_stable_subtree(rep, 6);
  const auto adv = adversarial_reconstruct(tree, rep, sub, 6);
  EXPECT_DOUBLE_EQ(adv.agreement_rate(), 1.0);
  EXPECT_EQ(adv.estimate, tree.root().bits);
}

TEST(Adversarial, EmptyGatewaySetIsAlwaysWrong) {
  const auto tree = evolve_tree(params(5, 2, 500, 0), 7);
  const auto rep = classify_stability(tree, 10, 5);
  StableSubtree only_root;
  only_root.member.assign(tree.nodes.size(), 0);
  only_root.member[0] = 1;
  only_root.dropped.assign(tree.shape.first_leaf(), kNoNode);
  const auto adv = adversarial_reconstruct(tree, rep, only_root, 7);
  EXPECT_DOUBLE_EQ(adv.agreement_rate(), 0.0);
}

TEST(Adversarial, TreeEstimatorMatchesExactRecursion) {
  // Without indels every gateway node has exactly d-2 honest children, and
  // sites are independent, so the site-level success rate is Binomial.
  const int d = 5, H = 2;
  const double ps = 0.05;
  const std::size_t k = 3375;
  std::size_t hits = 0, total = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto tree = evolve_tree(params(d, H, k, ps), seed);
    const auto rep = classify_stability(tree, 15, 14);
    const auto sub = *extract_stable_subtree(rep, seed);
    for (auto x : adversarial_reconstruct(tree, rep, sub, seed).agreement) hits += x;
    total += k;
  }
  const double f = adversarial_exact(d, H, ps);
  const double rate = static_cast<double>(hits) / static_cast<double>(total);
  EXPECT_NEAR(rate, f, 4 * std::sqrt(f * (1 - f) / static_cast<double>(total)));
}

TEST(AdversarialMajority, DegenerateCases) {
  Stream s(1, StreamTag::kFixture);
  for (int i = 0; i < 100; ++i) {
    EXPECT_TRUE(simulate_adversarial_majority(5, 2, 0.0, s));
    EXPECT_FALSE(simulate_adversarial_majority(3, 1, 0.0, s));
  }
  EXPECT_THROW(simulate_adversarial_majority(4, 1, 0.1, s), std::invalid_argument);
}

TEST(AdversarialMajority, ClosedFormAtHeightOne) {
  // d = 9: P[Bin(7, 0.9) >= 5] summed by hand.
  const double expected = choose(7, 5) * std::pow(0.9, 5) * 0.01 + choose(7, 6) * std::pow(0.9, 6) * 0.1 + std::pow(0.9, 7);
  EXPECT_NEAR(adversarial_success_h1(9, 0.1), expected, 1e-12);
  EXPECT_NEAR(adversarial_success_h1(5, 0.1), std::pow(0.9, 3), 1e-12);
}

TEST(AdversarialMajority, MonteCarloMatchesExactRecursion) {
  const int draws = 100000;
  for (auto [d, h] : {std::pair{5, 1}, {5, 2}, {9, 2}, {9, 3}}) {
    Stream s(static_cast<std::uint64_t>(d * 10 + h), StreamTag::kFixture);
    int ok = 0;
    for (int i = 0; i < draws; ++i) ok += simulate_adversarial_majority(d, h, 0.1, s);
    const double f = adversarial_exact(d, h, 0.1);
    EXPECT_NEAR(static_cast<double>(ok) / draws, f, 4 * std::sqrt(f * (1 - f) / draws)) << "d=" << d << " h=" << h;
  }
}

TEST(BiasConcentration, Examples) {
  const Bits ones(100, 1), zeros(100, 0);
  EXPECT_TRUE(verify_bias_concentration(ones, ones, 0.1, 0.0).pass());
  const auto bad = verify_bias_concentration(ones, zeros, 0.1, 0.0);
  EXPECT_FALSE(bad.pass());
  EXPECT_DOUBLE_EQ(bad.cross, -1.0);
  EXPECT_DOUBLE_EQ(bad.theta_errors, 1.0);
  EXPECT_THROW(verify_bias_concentration(ones, Bits(99, 1), 0.1, 0.0), std::invalid_argument);
  EXPECT_THROW(verify_bias_concentration(Bits{}, Bits{}, 0.1, 0.0), std::invalid_argument);
}

TEST(BiasConcentration, BernoulliVectorsConcentrate) {
  // m = 1e4, error rate 0.05, beta = 0.2: half-width 0.1 is about 45 sigma.
  Stream s(2, StreamTag::kFixture);
  int pass = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Bits l(10000), t(10000);
    for (std::size_t i = 0; i < l.size(); ++i) {
      l[i] = !s.bernoulli(0.05);
      t[i] = !s.bernoulli(0.05);
    }
    pass += verify_bias_concentration(l, t, 0.2, 0.05).pass();
  }
  EXPECT_EQ(pass, 200);
}

TEST(CorrelationBound, HandFixture) {
  // One flip in Xhat at position 0. cor(X,Y) = 1, cor(Xhat,Yhat) = 1/2,
  // rhs = 1 - (1/4)((-1 - 1) + 1 + 1 + 1) = 3/4.
  const Bits x{1, 0, 1, 0}, y{1, 0, 1, 0}, xh{0, 0, 1, 0}, yh{1, 0, 1, 0};
  const Bits lam{0, 1, 1, 1}, th{1, 1, 1, 1};
  const auto b = verify_correlation_bound(x, y, xh, yh, lam, th);
  EXPECT_DOUBLE_EQ(b.lhs, 0.5);
  EXPECT_DOUBLE_EQ(b.rhs, 0.75);
  EXPECT_TRUE(b.holds);
  EXPECT_TRUE(b.dominated);
  EXPECT_THROW(verify_correlation_bound(x, y, xh, yh, lam, Bits{1}), std::invalid_argument);
}

TEST(CorrelationBound, HoldsWheneverAgreementIsDominated) {
  Stream s(3, StreamTag::kFixture);
  std::size_t violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = 1 + s.below(64);
    Bits x = random_bits(m, s), y = random_bits(m, s), lam(m), th(m), xh(m), yh(m);
    const double pl = s.uniform(), pt = s.uniform();
    for (std::size_t i = 0; i < m; ++i) {
      lam[i] = s.bernoulli(pl);
      th[i] = s.bernoulli(pt);
      xh[i] = lam[i] ? x[i] : s.bit();
      yh[i] = th[i] ? y[i] : s.bit();
    }
    const auto b = verify_correlation_bound(x, y, xh, yh, lam, th);
    EXPECT_TRUE(b.dominated);
    violations += !b.holds;
  }
  EXPECT_EQ(violations, 0u);
}

TEST(Anchors, NoiselessAlignedWindowsCorrelatePerfectly) {
  const auto tree = evolve_tree(params(3, 1, 8000, 0), 8);
  const std::vector<std::size_t> kids{1, 2, 3};
  std::vector<const Bits*> seqs;
  for (auto c : kids) seqs.push_back(&tree.nodes[c].bits);
  const auto samples = anchor_samples(tree, 20, 12, 0, kids, seqs);
  ASSERT_FALSE(samples.empty());
  for (const auto& s : samples) EXPECT_DOUBLE_EQ(s.aligned(), 1.0);
  // Windows that would run off the end are NaN.
  EXPECT_TRUE(std::isnan(samples.back().cor[2 * kMaxOffset]) || samples.back().r * 20 + 12 + 2 <= 8000);
}

TEST(Anchors, SiblingCorrelationConcentratesAtThetaSquared) {
  // Siblings share the parent, so E[cor] = (1 - 2 p_s)^2 = 0.64 at p_s = 0.1.
  const auto tree = evolve_tree(params(3, 1, 200000, 0.1), 9);
  const std::vector<std::size_t> kids{1, 2, 3};
  std::vector<const Bits*> seqs;
  for (auto c : kids) seqs.push_back(&tree.nodes[c].bits);
  const auto samples = anchor_samples(tree, 1000, 500, 0, kids, seqs);
  double sum = 0;
  std::size_t n = 0, misaligned_small = 0, misaligned = 0;
  for (const auto& s : samples) {
    sum += s.aligned();
    ++n;
    for (double c : {s.deletion(), s.insertion()}) {
      if (std::isnan(c)) continue;
      ++misaligned;
      misaligned_small += std::abs(c) < 0.3;
    }
  }
  // Samples within a round share windows; 6 ordered pairs per round, 199 rounds.
  const double sigma = std::sqrt((1 - 0.64 * 0.64) / 500.0 / (static_cast<double>(n) / 6));
  EXPECT_NEAR(sum / static_cast<double>(n), 0.64, 4 * sigma);
  EXPECT_GE(static_cast<double>(misaligned_small) / static_cast<double>(misaligned), 0.999);
}

TEST(EventE, NoiselessTreeWithLongAnchorsHolds) {
  const auto p = params(5, 1, 20000, 0);
  const auto tree = evolve_tree(p, 10);
  auto cfg = derive_config(p, 8.0, 0.0);
  cfg.ell = 500;
  cfg.a = 400;
  const auto cert = certify_event_E(tree, cfg, 10);
  EXPECT_TRUE(cert.E()) << cert.first_failure;
  EXPECT_GT(cert.anchor_samples, 0u);
  EXPECT_EQ(cert.first_failure, "");
}

TEST(EventE, CertainDeletionFailsLength) {
  const auto p = params(5, 1, 1000, 0, 1.0);
  const auto tree = evolve_tree(p, 11);
  auto cfg = derive_config(params(5, 1, 1000, 0), 8.0, 0.0);
  const auto cert = certify_event_E(tree, cfg, 11);
  EXPECT_FALSE(cert.L);
  EXPECT_FALSE(cert.E());
  EXPECT_EQ(cert.first_failure, "L");
}

TEST(Domination, CountsOnlyAdversariallyCorrectSites) {
  const Bits truth{1, 0, 1, 0}, est{1, 1, 0, 0}, agree{1, 1, 0, 1};
  const auto c = check_domination(truth, est, agree);
  EXPECT_EQ(c.sites, 3u);
  EXPECT_EQ(c.violations, 1u);
  EXPECT_THROW(check_domination(truth, est, Bits{1}), std::invalid_argument);
}

TEST(Alignment, NoIndelsNoViolations) {
  const auto p = params(5, 2, 20000, 0.02);
  const auto tree = evolve_tree(p, 12);
  auto cfg = derive_config(p, 8.0, 0.02);
  cfg.ell = 200;
  cfg.a = 150;
  const auto rep = classify_stability(tree, cfg);
  const auto sub = *extract_stable_subtree(rep, 12);
  const auto leaves = leaf_bits(tree);
  const auto rec = reconstruct_root(leaves, tree.shape, cfg, 12);
  const auto chk = check_alignment(tree, sub, cfg, rec);
  EXPECT_GT(chk.checked, 0u);
  EXPECT_TRUE(chk.exact());
}
