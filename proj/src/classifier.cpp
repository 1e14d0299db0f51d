#include "mfpc/classifier.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <thread>

namespace mfpc {

namespace {

std::shared_ptr<const Ruleset> projected(const Ruleset& full, const FieldList& fields) {
  return std::make_shared<const Ruleset>(project(full, fields));
}

DecisionTree build_tree(const Ruleset& full, const FieldList& subset, const EngineConfig& config,
                        const PolicyBundle* policies) {
  auto proj = projected(full, subset);
  if (!policies) return baseline_build(DecisionTree(proj, config.leaf_threshold, config.depth_mode), config.baseline);
  const auto* entry = policies->find(subset);
  if (!entry) throw std::runtime_error("policy bundle has no entry for subset " + format_fields(subset));
  TreeEnv env(proj, entry->env);
  return greedy_build(entry->net, env);
}

std::size_t count_lines(std::string_view s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace

std::string BuilderSpec::to_string() const {
  return kind == Kind::Baseline ? std::string("baseline") : "policy:" + checkpoint;
}

std::optional<BuilderSpec> parse_builder(std::string_view s) {
  if (s == "baseline") return BuilderSpec{};
  constexpr std::string_view prefix = "policy:";
  if (s.starts_with(prefix) && s.size() > prefix.size())
    return BuilderSpec{BuilderSpec::Kind::Policy, std::string(s.substr(prefix.size()))};
  return std::nullopt;
}

Engine build_engine(std::shared_ptr<const Ruleset> ruleset, const DecompositionPlan& plan, const EngineConfig& config,
                    const PolicyBundle* policies) {
  if (!ruleset) throw std::invalid_argument("engine needs a ruleset");
  if (ruleset->fields() != all_fields()) throw std::invalid_argument("engine needs a full 12-field ruleset");
  validate_plan(plan);
  auto a = build_tree(*ruleset, plan.subset_a, config, policies);
  auto b = build_tree(*ruleset, plan.subset_b, config, policies);
  return Engine{plan, std::move(ruleset), std::move(a), std::move(b)};
}

MatchResult classify(const Engine& engine, const Packet& packet) {
  MatchResult r;
  const auto ca = engine.tree_a.classify_indices(packet, &r.accesses_a);
  const auto cb = engine.tree_b.classify_indices(packet, &r.accesses_b);
  r.candidates_a = ca.size();
  r.candidates_b = cb.size();
  // Projection keeps rule order, so indices agree across trees and both lists
  // are sorted by priority.
  const auto& rules = engine.ruleset->rules();
  auto before = [&](std::uint32_t x, std::uint32_t y) { return rules[x].priority < rules[y].priority; };
  auto ia = ca.begin();
  auto ib = cb.begin();
  while (ia != ca.end() && ib != cb.end()) {
    if (*ia == *ib) {
      const auto& rule = rules[*ia];
      const bool residual_ok = std::all_of(engine.plan.residual.begin(), engine.plan.residual.end(),
                                           [&](std::size_t f) { return rule.matchers[f].contains(packet[f]); });
      if (residual_ok) {
        r.rule = rule.id;
        r.action = rule.action;
        break;
      }
      ++ia;
      ++ib;
    } else if (before(*ia, *ib)) {
      ++ia;
    } else {
      ++ib;
    }
  }
  return r;
}

std::vector<MatchResult> classify_all(const Engine& engine, std::span<const Packet> packets, unsigned workers) {
  std::vector<MatchResult> out(packets.size());
  workers = std::max(1U, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(1, packets.size()))));
  if (workers == 1) {
    for (std::size_t i = 0; i < packets.size(); ++i) out[i] = classify(engine, packets[i]);
    return out;
  }
  std::vector<std::thread> threads;
  for (unsigned w = 0; w < workers; ++w)
    threads.emplace_back([&, w] {
      for (std::size_t i = w; i < packets.size(); i += workers) out[i] = classify(engine, packets[i]);
    });
  for (auto& t : threads) t.join();
  return out;
}

unsigned worst_case_accesses(const Engine& engine) {
  return std::max(engine.tree_a.stats().depth, engine.tree_b.stats().depth);
}

EngineMemory engine_memory(const Engine& engine) {
  EngineMemory m;
  m.bytes_total = engine.tree_a.stats().bytes_total + engine.tree_b.stats().bytes_total;
  if (!engine.ruleset->empty())
    m.bytes_per_rule = static_cast<double>(m.bytes_total) / static_cast<double>(engine.ruleset->size());
  return m;
}

std::string serialize_engine(const Engine& engine) {
  std::ostringstream os;
  os << "mfpc-engine 1\n";
  os << "scheme " << to_string(engine.plan.scheme) << '\n';
  os << "ranking";
  for (const auto& e : engine.plan.ranking)
    os << ' ' << field_spec(e.field_index).name << ':' << e.rank << ':' << format_double(e.value);
  os << '\n';
  os << "subset_a " << format_fields(engine.plan.subset_a) << '\n';
  os << "subset_b " << format_fields(engine.plan.subset_b) << '\n';
  os << "residual " << format_fields(engine.plan.residual) << '\n';
  const auto rules = serialize_native(*engine.ruleset);
  os << "ruleset " << count_lines(rules) << '\n' << rules;
  const auto a = engine.tree_a.serialize();
  os << "tree_a " << count_lines(a) << '\n' << a;
  const auto b = engine.tree_b.serialize();
  os << "tree_b " << count_lines(b) << '\n' << b;
  os << "end\n";
  return os.str();
}

Engine deserialize_engine(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(pos, end - pos));
    pos = end + 1;
  }
  std::size_t at = 0;
  auto next = [&]() -> std::string_view {
    if (at >= lines.size()) throw ParseError(at, "engine dump: truncated");
    return lines[at++];
  };
  auto tagged = [&](std::string_view tag) -> std::string_view {
    const auto line = next();
    if (line == tag) return {};
    if (!line.starts_with(tag) || line.size() <= tag.size() || line[tag.size()] != ' ')
      throw ParseError(at, "engine dump: expected '" + std::string(tag) + "'");
    return line.substr(tag.size() + 1);
  };
  auto block = [&](std::string_view tag) {
    const auto count_text = tagged(tag);
    std::size_t count = 0;
    auto [p, ec] = std::from_chars(count_text.data(), count_text.data() + count_text.size(), count);
    if (ec != std::errc() || at + count > lines.size()) throw ParseError(at, "engine dump: bad block length");
    std::string out;
    for (std::size_t i = 0; i < count; ++i) {
      out += lines[at++];
      out += '\n';
    }
    return out;
  };

  if (next() != "mfpc-engine 1") throw ParseError(1, "engine dump: unsupported header");
  DecompositionPlan plan;
  const auto scheme = parse_scheme(tagged("scheme"));
  if (!scheme) throw ParseError(at, "engine dump: unknown scheme");
  plan.scheme = *scheme;
  std::istringstream ranking{std::string(tagged("ranking"))};
  for (std::string item; ranking >> item;) {
    const auto c1 = item.find(':');
    const auto c2 = item.find(':', c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) throw ParseError(at, "engine dump: bad ranking entry");
    const auto f = field_index(std::string_view(item).substr(0, c1));
    if (!f) throw ParseError(at, "engine dump: unknown field in ranking");
    RankEntry e;
    e.field_index = *f;
    e.rank = static_cast<unsigned>(std::stoul(item.substr(c1 + 1, c2 - c1 - 1)));
    const auto vs = std::string_view(item).substr(c2 + 1);
    std::from_chars(vs.data(), vs.data() + vs.size(), e.value);
    plan.ranking.push_back(e);
  }
  plan.subset_a = parse_fields(tagged("subset_a"));
  plan.subset_b = parse_fields(tagged("subset_b"));
  plan.residual = parse_fields(tagged("residual"));
  validate_plan(plan);
  auto ruleset = std::make_shared<const Ruleset>(parse_ruleset(block("ruleset")));
  auto a = DecisionTree::deserialize(block("tree_a"), projected(*ruleset, plan.subset_a));
  auto b = DecisionTree::deserialize(block("tree_b"), projected(*ruleset, plan.subset_b));
  if (next() != "end") throw ParseError(at, "engine dump: missing end marker");
  return Engine{std::move(plan), std::move(ruleset), std::move(a), std::move(b)};
}

void save_engine(const std::string& path, const Engine& engine) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << serialize_engine(engine);
}

Engine load_engine(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return deserialize_engine(os.str());
}

}  // namespace mfpc
