#ifndef MFPC_CLASSIFIER_HPP
#define MFPC_CLASSIFIER_HPP

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mfpc/learner.hpp"
#include "mfpc/metrics.hpp"
#include "mfpc/tree.hpp"

namespace mfpc {

/// "baseline" or "policy:<checkpoint>".
struct BuilderSpec {
  enum class Kind { Baseline, Policy } kind = Kind::Baseline;
  std::string checkpoint;

  std::string to_string() const;
};

std::optional<BuilderSpec> parse_builder(std::string_view s);

struct EngineConfig {
  std::size_t leaf_threshold = 16;
  DepthMode depth_mode = DepthMode::Max;
  BaselineConfig baseline;
};

struct Engine {
  DecompositionPlan plan;
  std::shared_ptr<const Ruleset> ruleset;
  DecisionTree tree_a;
  DecisionTree tree_b;
};

struct MatchResult {
  std::optional<RuleId> rule;
  std::optional<std::string> action;
  std::size_t candidates_a = 0;
  std::size_t candidates_b = 0;
  unsigned accesses_a = 0;
  unsigned accesses_b = 0;
};

/// Builds both subset trees. With a policy bundle, each tree is grown by the
/// greedy policy stored for its subset; a missing subset is an error.
Engine build_engine(std::shared_ptr<const Ruleset> ruleset, const DecompositionPlan& plan,
                    const EngineConfig& config = {}, const PolicyBundle* policies = nullptr);

MatchResult classify(const Engine& engine, const Packet& packet);

/// Classifies a batch on `workers` threads; results keep input order.
std::vector<MatchResult> classify_all(const Engine& engine, std::span<const Packet> packets, unsigned workers = 1);

unsigned worst_case_accesses(const Engine& engine);

struct EngineMemory {
  std::size_t bytes_total = 0;
  double bytes_per_rule = 0.0;
};

EngineMemory engine_memory(const Engine& engine);

std::string serialize_engine(const Engine& engine);
Engine deserialize_engine(std::string_view text);
void save_engine(const std::string& path, const Engine& engine);
Engine load_engine(const std::string& path);

}  // namespace mfpc

#endif  // MFPC_CLASSIFIER_HPP
