#ifndef MFPC_RL_ENV_HPP
#define MFPC_RL_ENV_HPP

#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mfpc/tree.hpp"

namespace mfpc {

/// Operations 0..4 are cut x2..x32, 5 is partition.
inline constexpr std::size_t kNumOps = 6;
inline constexpr unsigned kPartitionOp = 5;

struct EnvConfig {
  std::size_t leaf_threshold = 16;
  std::size_t max_tree_depth = 100;
  std::size_t max_steps = 1000;
  double theta = 0.5;
  unsigned partition_depth_limit = 1;
  DepthMode depth_mode = DepthMode::Max;
};

struct Action {
  std::size_t dim = 0;
  unsigned op = 0;

  bool operator==(const Action&) const = default;
};

/// Row-major |dims| x 6, 1 = allowed.
using ActionMask = std::vector<std::uint8_t>;

bool any_allowed(const ActionMask& mask);
/// True if some op is allowed on `dim`.
bool dim_allowed(const ActionMask& mask, std::size_t dim);

/// Σ 2·width + 2 + 6·|dims|.
std::size_t observation_size(const FieldList& subset);

struct Transition {
  NodeId node = 0;
  std::vector<double> observation;
  ActionMask mask;
  Action action;
  bool invalid = false;
  std::optional<double> reward;
};

struct StepResult {
  /// Observations of the children that still need a decision.
  std::vector<std::pair<NodeId, std::vector<double>>> pending;
  bool done = false;
};

/// Builds one tree node by node. Open nodes are served first-in first-out.
class TreeEnv {
 public:
  TreeEnv(std::shared_ptr<const Ruleset> projected, EnvConfig config = {});

  /// Starts a fresh episode and returns the observation of the first pending
  /// node (empty when the root is already a leaf).
  std::vector<double> reset();
  bool done() const { return queue_.empty(); }
  NodeId current_node() const;

  std::vector<double> observation(NodeId id) const;
  ActionMask action_mask(NodeId id) const;

  /// Applies `action` to current_node(). A masked action costs -1 and closes
  /// the node as a leaf.
  StepResult step(Action action);

  const DecisionTree& tree() const { return *tree_; }
  const EnvConfig& config() const { return config_; }
  const std::vector<Transition>& transitions() const { return transitions_; }
  std::vector<Transition>& transitions() { return transitions_; }
  std::size_t steps() const { return steps_; }
  std::size_t observation_size() const { return obs_size_; }

 private:
  /// Closes nodes nothing useful can be done with until the front is actionable.
  void settle();
  void enqueue(NodeId id);

  std::shared_ptr<const Ruleset> ruleset_;
  EnvConfig config_;
  std::size_t obs_size_ = 0;
  std::optional<DecisionTree> tree_;
  std::deque<NodeId> queue_;
  std::vector<Transition> transitions_;
  std::size_t steps_ = 0;
};

/// Uniform choice among allowed (dim, op) pairs.
Action sample_legal_action(const ActionMask& mask, std::size_t dims, std::mt19937_64& rng);

enum class RewardMode { PerChild, ObjectiveBackprop };

std::string_view to_string(RewardMode m);
std::optional<RewardMode> parse_reward_mode(std::string_view s);

/// -(c·depth + (1-c)·node_count)
double objective(const DecisionTree& tree, double c);

/// Rewards for a finished episode, one per transition (invalid actions: -1).
/// per_child: minus the children the action created (pruned ones too when
/// `count_pruned`). objective_backprop: -(c·T_n + (1-c)·S_n) of the subtree.
std::vector<double> compute_rewards(const DecisionTree& tree, const std::vector<Transition>& transitions, double c,
                                    RewardMode mode = RewardMode::PerChild, bool count_pruned = false);

/// Fills Transition::reward; throws if the tree is not complete.
void assign_rewards(const DecisionTree& tree, std::vector<Transition>& transitions, double c, RewardMode mode,
                    bool count_pruned = false);

/// node,dim,op,invalid,reward
std::string episode_csv(const std::vector<Transition>& transitions);

}  // namespace mfpc

#endif  // MFPC_RL_ENV_HPP
