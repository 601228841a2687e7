#include <gtest/gtest.h>

#include <cmath>

#include "bnfit/decomposed_solver.hpp"
#include "bnfit/elimination.hpp"
#include "bnfit/generator.hpp"
#include "fixtures.hpp"
#include "oracle.hpp"

using namespace bnfit;
using fixtures::chain;
using fixtures::diamond;
using fixtures::make_net;

namespace {

StopPolicy tight(double eps = 1e-10) {
  StopPolicy s;
  s.epsilon = eps;
  return s;
}

std::vector<VarId> changed_cpts(const NetworkSpec& a, const NetworkSpec& b) {
  std::vector<VarId> out;
  for (VarId v = 0; v < a.size(); ++v) {
    if (a.cpt(v).table() != b.cpt(v).table()) out.push_back(v);
  }
  return out;
}

}  // namespace

TEST(LocalUpdate, SatisfiedConstraintLeavesCpt) {
  auto net = diamond();
  auto r = fixtures::marginal_constraint(net, {3, 1});
  auto out = local_update(net.cpt(3), r, net);
  for (std::size_t i = 0; i < out.table().size(); ++i) EXPECT_NEAR(out.table()[i], net.cpt(3).table()[i], 1e-15);
}

TEST(LocalUpdate, ChainHandValues) {
  auto net = chain();
  auto out = local_update(net.cpt(1), make_constraint(net, {1}, {0.3, 0.7}), net);
  const double b1a1 = 0.8 * 1.4 / (0.8 * 1.4 + 0.2 * 0.6);
  const double b1a0 = 0.2 * 1.4 / (0.2 * 1.4 + 0.8 * 0.6);
  EXPECT_NEAR(out.table()[3], b1a1, 1e-15);
  EXPECT_NEAR(out.table()[1], b1a0, 1e-15);
  EXPECT_NEAR(b1a1, 0.9032258, 1e-7);
  EXPECT_NEAR(b1a0, 0.3684211, 1e-7);
}

TEST(LocalUpdate, RejectsNonLocalAndWrongTarget) {
  auto net = diamond();
  EXPECT_THROW(local_update(net.cpt(3), fixtures::diamond_ad(net), net), Error);
  EXPECT_THROW(local_update(net.cpt(2), fixtures::marginal_constraint(net, {1}), net), Error);
}

TEST(LocalUpdate, DominanceFailure) {
  auto net = make_net({"A", "B"}, {{}, {0}}, {{1.0, 0.0}, {0.5, 0.5, 0.5, 0.5}});
  try {
    local_update(net.cpt(0), make_constraint(net, {0}, {0.5, 0.5}), net);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Dominance);
  }
}

TEST(BuildLocalSubnet, DiamondMicroExample) {
  auto net = diamond();
  auto sub = build_local_subnet(net, {0, 3});
  ASSERT_EQ(sub.s, (std::vector<VarId>{1, 2}));
  // Row (B=1, C=1), cell (A=1, D=0).
  const double v = sub.cond[3 * 4 + 1 * 2 + 0];
  // Bit-identical to the two-factor product, which in binary floating point
  // sits one ulp above the literal 0.36.
  EXPECT_EQ(v, 0.4 * 0.9);
  EXPECT_LE(std::abs(v - 0.36), std::nextafter(0.36, 1.0) - 0.36);
}

TEST(BuildLocalSubnet, SingleVariableIsItsCpt) {
  auto net = diamond();
  auto sub = build_local_subnet(net, {3});
  EXPECT_EQ(sub.s, (std::vector<VarId>{1, 2}));
  EXPECT_EQ(sub.cond, net.cpt(3).table());
}

TEST(BuildLocalSubnet, RowsAreNormalized) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto net = fixtures::random_net(seed, 6, 3);
    std::mt19937_64 rng(seed);
    VarId a = rng() % 6, b = rng() % 6;
    if (a == b) b = (a + 1) % 6;
    auto sub = build_local_subnet(net, {std::min(a, b), std::max(a, b)});
    const std::size_t ny = sub.y_size();
    for (std::size_t row = 0; row < sub.s_size(); ++row) {
      double s = 0.0;
      for (std::size_t j = 0; j < ny; ++j) s += sub.cond[row * ny + j];
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(NonLocalUpdate, SatisfiedConstraintIsFixedPoint) {
  auto net = diamond();
  auto r = fixtures::marginal_constraint(net, {0, 3});
  auto sub = build_local_subnet(net, {0, 3});
  auto out = nonlocal_update(sub, r, marginal_by_elimination(net, {0, 3}));
  for (std::size_t i = 0; i < sub.cond.size(); ++i) EXPECT_NEAR(out.cond[i], sub.cond[i], 1e-15);
}

TEST(NonLocalUpdate, EmptySIsOneIpfpStep) {
  auto net = chain();
  auto r = make_constraint(net, {0, 1}, {0.1, 0.2, 0.3, 0.4});
  auto sub = build_local_subnet(net, {0, 1});
  ASSERT_TRUE(sub.s.empty());
  auto out = nonlocal_update(sub, r, joint_from_network(net));
  auto step = ipfp_step(joint_from_network(net), r);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(out.cond[i], step.probs[i], 1e-15);
}

TEST(NonLocalUpdate, ScopeOrderMustMatch) {
  auto net = diamond();
  auto sub = build_local_subnet(net, {0, 3});
  auto r = fixtures::marginal_constraint(net, {3, 0});
  EXPECT_THROW(nonlocal_update(sub, r, marginal_by_elimination(net, {3, 0})), Error);
}

TEST(ExtractSubnetCpts, SingleVariableRoundTrip) {
  auto net = diamond();
  auto sub = build_local_subnet(net, {3});
  auto cpts = extract_subnet_cpts(sub, net, marginal_by_elimination(net, sub.s));
  ASSERT_EQ(cpts.size(), 1u);
  for (std::size_t i = 0; i < sub.cond.size(); ++i) EXPECT_NEAR(cpts[0].table()[i], sub.cond[i], 1e-15);
}

TEST(ExtractSubnetCpts, BuildThenExtractRecoversCpts) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto net = fixtures::random_net(seed + 20, 7, 3);
    const std::vector<VarId> y{2, 5, 6};
    auto sub = build_local_subnet(net, y);
    auto cpts = extract_subnet_cpts(sub, net, marginal_by_elimination(net, sub.s));
    for (std::size_t k = 0; k < y.size(); ++k) {
      const auto& want = net.cpt(y[k]).table();
      for (std::size_t i = 0; i < want.size(); ++i) ASSERT_NEAR(cpts[k].table()[i], want[i], 1e-12);
    }
  }
}

TEST(ConditionSubnet, ProductFormWhenSHasNoDescendantInY) {
  // S = {B, C} for Y = {D}: nothing in S descends from D.
  auto net = diamond();
  auto sub = build_local_subnet(net, {3});
  auto sy = sub.scope();
  auto cond = condition_subnet(sub, marginal_by_elimination(net, sy), marginal_by_elimination(net, sub.s));
  for (std::size_t i = 0; i < sub.cond.size(); ++i) EXPECT_NEAR(cond.cond[i], sub.cond[i], 1e-15);
}

TEST(RunDIpfp, AllLocalTouchesOnlyTargets) {
  auto net = fixtures::random_net(5, 8);
  auto other = fixtures::random_net(6, 8);
  std::vector<Constraint> rs;
  std::vector<VarId> targets;
  for (VarId v : {3, 7}) {
    std::vector<VarId> scope{v};
    if (!net.parents(v).empty()) scope.push_back(net.parents(v)[0]);
    auto m = marginalize(joint_from_network(other), scope);
    rs.push_back(make_constraint(net, scope, m.probs));
    targets.push_back(v);
  }
  auto [out, rep] = run_d_ipfp(net, rs, tight(), Schedule::document_order(rs.size()));
  ASSERT_EQ(rep.termination, Termination::Converged);
  EXPECT_EQ(changed_cpts(net, out), targets);
}

TEST(RunDIpfp, Diamond) {
  auto net = diamond();
  auto r = fixtures::diamond_ad(net);
  auto [q, ipfp] = run_ipfp(net, {r}, tight(), Schedule::document_order(1));
  auto [e, erep] = run_e_ipfp(net, {r}, tight(), Schedule::document_order(1, true));
  auto [d, drep] = run_d_ipfp(net, {r}, tight(), Schedule::document_order(1));
  ASSERT_EQ(drep.termination, Termination::Converged);
  const auto joint = joint_from_network(d);
  EXPECT_LE(constraint_residual(joint, r), 1e-10);
  EXPECT_TRUE(is_structurally_consistent(joint, net, 1e-9));
  EXPECT_GE(*drep.final_divergence, *erep.final_divergence);
  EXPECT_GT(*drep.final_divergence - *ipfp.final_divergence, 1e-6);
  // Only the CPTs of Y = {A, D} change.
  EXPECT_EQ(changed_cpts(net, d), (std::vector<VarId>{0, 3}));
}

TEST(RunDIpfp, ConvergedSubnetRoundTrips) {
  auto net = diamond();
  auto [d, rep] = run_d_ipfp(net, {fixtures::diamond_ad(net)}, tight(), Schedule::document_order(1));
  const std::vector<VarId> y{0, 3};
  auto sub0 = build_local_subnet(d, y);
  const auto q_s = marginal_by_elimination(d, sub0.s);
  auto sub = condition_subnet(sub0, marginal_by_elimination(d, sub0.scope()), q_s);
  auto cpts = extract_subnet_cpts(sub, d, q_s);
  auto rebuilt = build_local_subnet(d.with_cpts([&] {
    auto all = d.cpts();
    all[0] = cpts[0];
    all[3] = cpts[1];
    return all;
  }()), y);
  EXPECT_LE(max_abs_diff(rebuilt.cond, sub0.cond), 1e-10);
}

TEST(RunDIpfp, SubnetBudget) {
  // D has 21 parents, constraint on {A0, D} with A0 not a parent of D's parents.
  std::vector<std::string> names;
  std::vector<std::vector<VarId>> parents;
  std::vector<std::vector<double>> tables;
  names.push_back("R");
  parents.push_back({});
  tables.push_back({0.5, 0.5});
  for (int i = 0; i < 21; ++i) {
    names.push_back("P" + std::to_string(i));
    parents.push_back({0});
    tables.push_back({0.6, 0.4, 0.3, 0.7});
  }
  std::vector<VarId> dp;
  for (VarId v = 1; v <= 21; ++v) dp.push_back(v);
  names.push_back("D");
  parents.push_back(dp);
  std::vector<double> dt;
  for (std::size_t i = 0; i < (std::size_t{1} << 21); ++i) {
    dt.push_back(0.5);
    dt.push_back(0.5);
  }
  tables.push_back(dt);
  auto net = make_net(names, parents, tables);
  auto r = make_constraint(net, {0, 22}, {0.25, 0.25, 0.25, 0.25});
  try {
    run_d_ipfp(net, {r}, tight(), Schedule::document_order(1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SubnetBudget);
  }
}

// Properties.

class DecomposedProperty : public ::testing::TestWithParam<int> {};

TEST_P(DecomposedProperty, LocalUpdateCommutesWithDenseScaling) {
  const auto seed = static_cast<std::uint64_t>(GetParam());
  auto net = fixtures::random_net(seed + 30, 10);
  std::mt19937_64 rng(seed);
  VarId v = 9;
  while (v > 0 && net.parents(v).empty()) --v;
  std::vector<VarId> scope{v};
  for (VarId p : net.parents(v)) {
    if (rng() % 2) scope.push_back(p);
  }
  auto r = make_constraint(net, scope, fixtures::random_rows(rng, 1, table_size(net.cards_of(scope))));
  auto updated = net.with_cpts([&] {
    auto all = net.cpts();
    all[v] = local_update(net.cpt(v), r, net);
    return all;
  }());

  // Dense side by enumeration: q(x) r(y) / Q(y) / alpha(pi_v).
  const auto e = oracle::oracle_joint(net);
  const auto my = oracle::oracle_marginal(e, scope);
  auto ratio = [&](const oracle::Assignment& x) {
    oracle::Assignment y;
    for (VarId u : scope) y.push_back(x[u]);
    std::size_t idx = 0;
    for (std::size_t d = 0; d < scope.size(); ++d) idx = idx * net.card(scope[d]) + y[d];
    return r.dist.probs[idx] / my.at(y);
  };
  const auto dense = joint_from_network(updated);
  for (const auto& [x, p] : e.assignments) {
    double alpha = 0.0;
    auto xv = x;
    std::size_t row = 0;
    for (VarId u : net.parents(v)) row = row * net.card(u) + x[u];
    for (std::size_t s = 0; s < net.card(v); ++s) {
      xv[v] = s;
      alpha += net.cpt(v).table()[row * net.card(v) + s] * ratio(xv);
    }
    ASSERT_NEAR(oracle::lookup(dense, x), p * ratio(x) / alpha, 1e-12);
  }
}

TEST_P(DecomposedProperty, GeneratedInstanceInvariants) {
  const auto seed = static_cast<std::uint64_t>(GetParam());
  GeneratorOptions opts;
  opts.nodes = 10;
  const auto inst = generate_instance(seed, opts);
  const auto& net = inst.network;
  const auto stop = tight(1e-9);
  auto [out, rep] = run_d_ipfp(net, inst.constraints, stop, Schedule::document_order(inst.constraints.size()));
  ASSERT_EQ(rep.termination, Termination::Converged);

  const auto joint = joint_from_network(out);
  for (const auto& r : inst.constraints) EXPECT_LE(constraint_residual(joint, r), stop.epsilon);
  EXPECT_TRUE(is_structurally_consistent(joint, net, 1e-9));

  std::vector<bool> allowed(net.size(), false);
  std::size_t bound = 0;
  for (const auto& r : inst.constraints) {
    const auto cls = classify_constraint(net, r);
    std::vector<VarId> sy;
    if (const auto* loc = std::get_if<LocalClass>(&cls)) {
      allowed[loc->target] = true;
      sy = net.parents(loc->target);
      sy.push_back(loc->target);
    } else {
      const auto& nl = std::get<NonLocalClass>(cls);
      for (VarId v : nl.y) allowed[v] = true;
      sy = nl.s;
      sy.insert(sy.end(), nl.y.begin(), nl.y.end());
    }
    bound = std::max(bound, std::size_t{1} << sy.size());
  }
  for (VarId v : changed_cpts(net, out)) EXPECT_TRUE(allowed[v]) << net.name(v);
  EXPECT_LE(rep.max_table_entries, bound);

  for (VarId v = 0; v < net.size(); ++v) {
    const auto& c = out.cpt(v);
    for (std::size_t row = 0; row < c.rows(); ++row) {
      double s = 0.0;
      for (double p : c.row(row)) s += p;
      ASSERT_NEAR(s, 1.0, 1e-12);
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, DecomposedProperty, ::testing::Range(1, 11));
