#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <set>

#include "test_support.hpp"

using namespace mfpc;
using namespace mfpc::testing;

namespace {

constexpr std::size_t kProto = static_cast<std::size_t>(Field::IpProto);
constexpr std::size_t kTos = 11;

Rule wildcard_rule(RuleId id) {
  Rule r;
  r.id = id;
  r.priority = id;
  r.action = "act" + std::to_string(id % 4);
  for (std::size_t f = 0; f < kNumFields; ++f) r.matchers.push_back(FieldMatcher::wildcard(field_spec(f).width));
  return r;
}

/// Subset A is {ip_proto, ip_tos}; vlan_priority stays residual.
DecompositionPlan toy_plan() {
  FieldList b;
  for (std::size_t f = 0; f < kNumFields; ++f)
    if (f != kProto && f != kTos && f != 10) b.push_back(f);
  return custom_plan({kProto, kTos}, b);
}

std::set<RuleId> leaf_ids(const DecisionTree& t) {
  std::set<RuleId> out;
  for (const auto& n : t.nodes())
    if (n.is_leaf())
      for (auto r : n.rules) out.insert(t.ruleset()[r].id);
  return out;
}

}  // namespace

TEST_CASE("parse_builder") {
  CHECK(parse_builder("baseline")->kind == BuilderSpec::Kind::Baseline);
  const auto p = parse_builder("policy:ck.bin");
  REQUIRE(p);
  CHECK(p->kind == BuilderSpec::Kind::Policy);
  CHECK(p->checkpoint == "ck.bin");
  CHECK(p->to_string() == "policy:ck.bin");
  CHECK_FALSE(parse_builder("policy:"));
  CHECK_FALSE(parse_builder("neural"));
}

TEST_CASE("random1 engine puts the 5-tuple in tree A") {
  auto rs = std::make_shared<const Ruleset>(generate_synthetic(1, 100));
  const auto e = build_engine(rs, fixed_decomposition(Scheme::Random1));
  CHECK(e.tree_a.subset() == FieldList{0, 1, 2, 3, 4});
  CHECK(e.tree_b.subset() == e.plan.subset_b);
  std::set<RuleId> all;
  for (const auto& r : rs->rules()) all.insert(r.id);
  CHECK(leaf_ids(e.tree_a) == all);
  CHECK(leaf_ids(e.tree_b) == all);
}

TEST_CASE("empty ruleset") {
  auto rs = std::make_shared<const Ruleset>();
  const auto e = build_engine(rs, fixed_decomposition(Scheme::Random2));
  CHECK(e.tree_a.size() == 1);
  CHECK(e.tree_b.size() == 1);
  CHECK(worst_case_accesses(e) == 1);
  std::mt19937_64 rng(1);
  const auto r = classify(e, random_packet(rng));
  CHECK_FALSE(r.rule);
  CHECK_FALSE(r.action);
  CHECK(engine_memory(e).bytes_total == 2 * kNodeHeaderBytes);
  CHECK(engine_memory(e).bytes_per_rule == 0.0);
}

TEST_CASE("build_engine rejects bad input") {
  auto rs = std::make_shared<const Ruleset>(generate_synthetic(2, 20));
  CHECK_THROWS_AS(build_engine(nullptr, fixed_decomposition(Scheme::Random1)), std::invalid_argument);
  auto proj = std::make_shared<const Ruleset>(project(*rs, {0, 1}));
  CHECK_THROWS_AS(build_engine(proj, fixed_decomposition(Scheme::Random1)), std::invalid_argument);
  auto bad = fixed_decomposition(Scheme::Random1);
  bad.subset_b.push_back(bad.subset_a[0]);
  CHECK_THROWS_AS(build_engine(rs, bad), std::invalid_argument);
  PolicyBundle empty;
  CHECK_THROWS_AS(build_engine(rs, fixed_decomposition(Scheme::Random1), {}, &empty), std::runtime_error);
}

TEST_CASE("sample ruleset packets") {
  auto rs = std::make_shared<const Ruleset>(load_ruleset(data_path("sample_openflow.rules")));
  for (auto scheme : {Scheme::SD, Scheme::DI, Scheme::Random1, Scheme::Random2}) {
    CAPTURE(to_string(scheme));
    EngineConfig cfg;
    cfg.leaf_threshold = 2;
    const auto e = build_engine(rs, plan_for(*rs, scheme), cfg);
    Packet p;
    p.values[1] = (191ULL << 24) | (28ULL << 16) | (225ULL << 8) | 110ULL;
    p.values[3] = 22;
    p.values[4] = 6;
    p.values[8] = 56;
    p.values[9] = 0x0800;
    p.values[0] = 12345;
    p.values[7] = 77;
    const auto r = classify(e, p);
    REQUIRE(r.rule);
    CHECK(*r.rule == 1);
    CHECK(*r.action == "act1");
    p.values[3] = 443;
    CHECK(classify(e, p).rule == std::optional<RuleId>(2));
    p.values[3] = 9;
    CHECK_FALSE(classify(e, p).rule);
  }
}

TEST_CASE("oracle equivalence on synthetic rulesets") {
  std::mt19937_64 rng(7);
  for (std::uint64_t seed : {11, 12}) {
    auto rs = std::make_shared<const Ruleset>(generate_synthetic(seed, 300));
    const auto trace = generate_trace(*rs, seed + 100, 2000);
    for (auto scheme : {Scheme::SD, Scheme::DI, Scheme::Random1, Scheme::Random2}) {
      CAPTURE(seed);
      CAPTURE(to_string(scheme));
      const auto e = build_engine(rs, plan_for(*rs, scheme));
      const auto da = e.tree_a.stats().depth;
      const auto db = e.tree_b.stats().depth;
      std::size_t mismatches = 0;
      std::size_t unsound = 0;
      std::size_t too_deep = 0;
      for (const auto& lp : trace) {
        const auto r = classify(e, lp.packet);
        if (r.rule != oracle_classify(*rs, lp.packet)) ++mismatches;
        if (r.rule != lp.expected) ++mismatches;
        if (r.rule && !rule_matches((*rs)[*rs->find(*r.rule)], lp.packet)) ++unsound;
        if (r.accesses_a > da || r.accesses_b > db) ++too_deep;
        if (r.rule) CHECK(r.action == (*rs)[*rs->find(*r.rule)].action);
      }
      CHECK(mismatches == 0);
      CHECK(unsound == 0);
      CHECK(too_deep == 0);
    }
  }
}

TEST_CASE("residual fields are verified") {
  // Two rules identical except on vlan_priority, which never reaches a tree
  // under SD/DI plans.
  auto r0 = wildcard_rule(0);
  r0.matchers[10] = FieldMatcher::exact(5);
  auto r1 = wildcard_rule(1);
  auto rs = std::make_shared<const Ruleset>(Ruleset({r0, r1}));
  const auto e = build_engine(rs, plan_for(*rs, Scheme::SD));
  REQUIRE(e.plan.residual == FieldList{10, 11});
  Packet p;
  p.values[10] = 5;
  CHECK(classify(e, p).rule == std::optional<RuleId>(0));
  p.values[10] = 4;
  const auto r = classify(e, p);
  CHECK(r.rule == std::optional<RuleId>(1));
  CHECK(r.candidates_a == 2);
  CHECK(r.candidates_b == 2);
}

TEST_CASE("worst case equals the deepest packet walk on a small domain") {
  std::mt19937_64 rng(3);
  std::vector<Rule> rules;
  for (RuleId i = 0; i < 24; ++i) {
    auto r = wildcard_rule(i);
    auto a = uniform_in(0, 255, rng), b = uniform_in(0, 255, rng);
    if (i % 3 != 0) b = a;
    r.matchers[kProto] = FieldMatcher::range(std::min(a, b), std::max(a, b), 8);
    auto c = uniform_in(0, 63, rng), d = uniform_in(0, 63, rng);
    r.matchers[kTos] = FieldMatcher::range(std::min(c, d), std::max(c, d), 6);
    rules.push_back(r);
  }
  auto rs = std::make_shared<const Ruleset>(Ruleset(std::move(rules)));
  EngineConfig cfg;
  cfg.leaf_threshold = 2;
  const auto e = build_engine(rs, toy_plan(), cfg);
  REQUIRE(e.tree_a.size() > 3);
  unsigned deepest = 0;
  std::size_t mismatches = 0;
  Packet p;
  for (std::uint64_t x = 0; x < 256; ++x)
    for (std::uint64_t y = 0; y < 64; ++y) {
      p.values[kProto] = x;
      p.values[kTos] = y;
      const auto r = classify(e, p);
      deepest = std::max({deepest, r.accesses_a, r.accesses_b});
      if (r.rule != oracle_classify(*rs, p)) ++mismatches;
    }
  CHECK(mismatches == 0);
  CHECK(worst_case_accesses(e) == deepest);
}

TEST_CASE("engine memory") {
  auto r0 = wildcard_rule(0);
  r0.matchers[kProto] = FieldMatcher::exact(0);
  auto r1 = wildcard_rule(1);
  r1.matchers[kProto] = FieldMatcher::exact(255);
  auto rs = std::make_shared<const Ruleset>(Ruleset({r0, r1}));
  EngineConfig cfg;
  cfg.leaf_threshold = 1;
  const auto e = build_engine(rs, toy_plan(), cfg);
  // Tree A: root cut in two (16 + 2*4) over two one-rule leaves (16 + 4 each).
  // Tree B cannot separate the rules: one overflow leaf (16 + 2*4).
  CHECK(e.tree_a.stats().bytes_total == 64);
  CHECK(e.tree_b.stats().bytes_total == 24);
  const auto m = engine_memory(e);
  CHECK(m.bytes_total == 88);
  CHECK(m.bytes_per_rule == 44.0);

  auto big = std::make_shared<const Ruleset>(generate_synthetic(5, 200));
  const auto eb = build_engine(big, plan_for(*big, Scheme::DI));
  const auto mb = engine_memory(eb);
  CHECK(mb.bytes_total == eb.tree_a.stats().bytes_total + eb.tree_b.stats().bytes_total);
  CHECK(mb.bytes_per_rule * 200.0 == doctest::Approx(static_cast<double>(mb.bytes_total)));
  CHECK(worst_case_accesses(eb) == std::max(eb.tree_a.stats().depth, eb.tree_b.stats().depth));
}

TEST_CASE("classify_all keeps order across workers") {
  auto rs = std::make_shared<const Ruleset>(generate_synthetic(6, 200));
  const auto e = build_engine(rs, plan_for(*rs, Scheme::SD));
  std::mt19937_64 rng(6);
  const auto packets = probe_packets(*rs, 999, rng);
  const auto one = classify_all(e, packets, 1);
  const auto three = classify_all(e, packets, 3);
  REQUIRE(one.size() == packets.size());
  REQUIRE(three.size() == packets.size());
  for (std::size_t i = 0; i < packets.size(); ++i) {
    CHECK(one[i].rule == three[i].rule);
    CHECK(one[i].accesses_a == three[i].accesses_a);
    CHECK(one[i].rule == classify(e, packets[i]).rule);
  }
  CHECK(classify_all(e, {}, 4).empty());
}

TEST_CASE("engine dump round trip") {
  auto rs = std::make_shared<const Ruleset>(generate_synthetic(8, 150));
  const auto e = build_engine(rs, plan_for(*rs, Scheme::DI));
  const auto text = serialize_engine(e);
  const auto back = deserialize_engine(text);
  CHECK(back.plan == e.plan);
  CHECK(back.ruleset->rules() == rs->rules());
  CHECK(back.tree_a == e.tree_a);
  CHECK(back.tree_b == e.tree_b);
  CHECK(serialize_engine(back) == text);
  std::mt19937_64 rng(8);
  for (const auto& p : probe_packets(*rs, 500, rng)) CHECK(classify(back, p).rule == classify(e, p).rule);

  const std::string path = "test_engine.txt";
  save_engine(path, e);
  CHECK(serialize_engine(load_engine(path)) == text);
  std::remove(path.c_str());

  CHECK_THROWS(deserialize_engine("mfpc-engine 2\n"));
  CHECK_THROWS(deserialize_engine(text.substr(0, text.size() / 2)));
  CHECK_THROWS(load_engine("/nonexistent/engine.txt"));
}

TEST_CASE("policy builder") {
  auto rs = std::make_shared<const Ruleset>(generate_synthetic(9, 80));
  const auto plan = plan_for(*rs, Scheme::SD);
  PolicyBundle bundle;
  std::uint64_t seed = 1;
  for (const auto& subset : {plan.subset_a, plan.subset_b}) {
    PolicyEntry entry{PolicyNet(observation_size(subset), {16}, subset.size()), {}, 0};
    entry.net.initialize(seed++);
    entry.env.leaf_threshold = 8;
    bundle.entries[subset] = entry;
  }
  const auto e = build_engine(rs, plan, {}, &bundle);
  CHECK(e.tree_a.complete());
  CHECK(e.tree_b.complete());
  CHECK(e.tree_a.leaf_threshold() == 8);
  std::mt19937_64 rng(9);
  std::size_t mismatches = 0;
  for (const auto& p : probe_packets(*rs, 3000, rng))
    if (classify(e, p).rule != oracle_classify(*rs, p)) ++mismatches;
  CHECK(mismatches == 0);
  const auto again = build_engine(rs, plan, {}, &bundle);
  CHECK(again.tree_a == e.tree_a);
}
