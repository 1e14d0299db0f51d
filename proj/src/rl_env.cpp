#include "mfpc/rl_env.hpp"

#include <algorithm>
#include <sstream>

namespace mfpc {

bool any_allowed(const ActionMask& mask) {
  return std::any_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; });
}

bool dim_allowed(const ActionMask& mask, std::size_t dim) {
  for (std::size_t o = 0; o < kNumOps; ++o)
    if (mask[dim * kNumOps + o]) return true;
  return false;
}

std::size_t observation_size(const FieldList& subset) {
  std::size_t n = 2 + kNumOps * subset.size();
  for (auto f : subset) n += 2 * field_spec(f).width;
  return n;
}

TreeEnv::TreeEnv(std::shared_ptr<const Ruleset> projected, EnvConfig config)
    : ruleset_(std::move(projected)), config_(config) {
  if (!ruleset_) throw std::invalid_argument("environment needs a ruleset");
  obs_size_ = mfpc::observation_size(ruleset_->fields());
}

std::vector<double> TreeEnv::reset() {
  tree_.emplace(ruleset_, config_.leaf_threshold, config_.depth_mode);
  queue_.clear();
  transitions_.clear();
  steps_ = 0;
  enqueue(tree_->root());
  settle();
  if (done()) return {};
  return observation(current_node());
}

NodeId TreeEnv::current_node() const {
  if (queue_.empty()) throw std::logic_error("episode is done");
  return queue_.front();
}

void TreeEnv::enqueue(NodeId id) {
  if (tree_->is_open(id)) queue_.push_back(id);
}

void TreeEnv::settle() {
  if (steps_ >= config_.max_steps) {
    for (auto id : queue_) tree_->force_leaf(id);
    queue_.clear();
    return;
  }
  while (!queue_.empty()) {
    const auto id = queue_.front();
    const auto& n = tree_->node(id);
    bool close = !tree_->is_open(id) || n.depth >= config_.max_tree_depth || !tree_->separable(id);
    if (!close && n.depth > config_.partition_depth_limit && tree_->covering_rules(id) > tree_->leaf_threshold())
      close = true;
    if (!close && !any_allowed(action_mask(id))) close = true;
    if (!close) return;
    tree_->force_leaf(id);
    queue_.pop_front();
  }
}

std::vector<double> TreeEnv::observation(NodeId id) const {
  const auto& n = tree_->node(id);
  std::vector<double> obs;
  obs.reserve(obs_size_);
  const auto& subset = ruleset_->fields();
  for (std::size_t d = 0; d < subset.size(); ++d) {
    const auto w = field_spec(subset[d]).width;
    for (auto v : {n.range[d].lo, n.range[d].hi})
      for (unsigned b = w; b-- > 0;) obs.push_back(static_cast<double>((v >> b) & 1U));
  }
  obs.push_back(n.side != PartitionSide::None ? 1.0 : 0.0);
  obs.push_back(n.side == PartitionSide::Small ? 1.0 : 0.0);
  for (auto m : action_mask(id)) obs.push_back(m ? 1.0 : 0.0);
  return obs;
}

ActionMask TreeEnv::action_mask(NodeId id) const {
  const auto& n = tree_->node(id);
  const auto dims = tree_->dims();
  ActionMask mask(dims * kNumOps, 0);
  if (!tree_->is_open(id)) return mask;
  for (std::size_t d = 0; d < dims; ++d) {
    const auto card = n.range[d].cardinality();
    for (std::size_t o = 0; o < kCutCounts.size(); ++o) mask[d * kNumOps + o] = kCutCounts[o] <= card ? 1 : 0;
    mask[d * kNumOps + kPartitionOp] =
        n.depth <= config_.partition_depth_limit && tree_->partition_valid(id, d, config_.theta) ? 1 : 0;
  }
  return mask;
}

StepResult TreeEnv::step(Action action) {
  const auto id = current_node();
  queue_.pop_front();
  Transition t;
  t.node = id;
  t.observation = observation(id);
  t.mask = action_mask(id);
  t.action = action;
  ++steps_;

  StepResult result;
  const bool legal = action.dim < tree_->dims() && action.op < kNumOps && t.mask[action.dim * kNumOps + action.op];
  std::vector<NodeId> kids;
  if (!legal) {
    t.invalid = true;
    tree_->force_leaf(id);
  } else if (action.op == kPartitionOp) {
    const auto [b, s] = tree_->partition_node(id, action.dim, config_.theta);
    kids = {b, s};
  } else {
    kids = tree_->cut_node(id, action.dim, kCutCounts[action.op]);
  }
  for (auto c : kids) enqueue(c);
  transitions_.push_back(std::move(t));

  settle();
  for (auto c : kids)
    if (std::find(queue_.begin(), queue_.end(), c) != queue_.end()) result.pending.emplace_back(c, observation(c));
  result.done = done();
  return result;
}

Action sample_legal_action(const ActionMask& mask, std::size_t dims, std::mt19937_64& rng) {
  std::vector<Action> legal;
  for (std::size_t d = 0; d < dims; ++d)
    for (unsigned o = 0; o < kNumOps; ++o)
      if (mask[d * kNumOps + o]) legal.push_back({d, o});
  if (legal.empty()) throw std::logic_error("no legal action");
  std::uniform_int_distribution<std::size_t> pick(0, legal.size() - 1);
  return legal[pick(rng)];
}

std::string_view to_string(RewardMode m) { return m == RewardMode::PerChild ? "per_child" : "objective_backprop"; }

std::optional<RewardMode> parse_reward_mode(std::string_view s) {
  if (s == "per_child") return RewardMode::PerChild;
  if (s == "objective_backprop") return RewardMode::ObjectiveBackprop;
  return std::nullopt;
}

double objective(const DecisionTree& tree, double c) {
  const auto s = tree.stats();
  return -(c * static_cast<double>(s.depth) + (1.0 - c) * static_cast<double>(s.node_count));
}

std::vector<double> compute_rewards(const DecisionTree& tree, const std::vector<Transition>& transitions, double c,
                                    RewardMode mode, bool count_pruned) {
  if (!tree.complete()) throw std::logic_error("rewards need a complete tree");
  std::vector<double> out;
  out.reserve(transitions.size());
  for (const auto& t : transitions) {
    if (t.invalid) {
      out.push_back(-1.0);
      continue;
    }
    const auto& n = tree.node(t.node);
    if (mode == RewardMode::PerChild) {
      auto created = n.child_count() + (count_pruned ? n.pruned : 0U);
      out.push_back(-static_cast<double>(created));
    } else {
      const auto depth = static_cast<double>(tree.subtree_depth(t.node));
      const auto nodes = static_cast<double>(tree.subtree_nodes(t.node));
      out.push_back(-(c * depth + (1.0 - c) * nodes));
    }
  }
  return out;
}

void assign_rewards(const DecisionTree& tree, std::vector<Transition>& transitions, double c, RewardMode mode,
                    bool count_pruned) {
  const auto r = compute_rewards(tree, transitions, c, mode, count_pruned);
  for (std::size_t i = 0; i < r.size(); ++i) transitions[i].reward = r[i];
}

std::string episode_csv(const std::vector<Transition>& transitions) {
  std::ostringstream os;
  os << "node,dim,op,invalid,reward\n";
  for (const auto& t : transitions) {
    os << t.node << ',' << t.action.dim << ',' << t.action.op << ',' << (t.invalid ? 1 : 0) << ',';
    if (t.reward) os << *t.reward;
    os << '\n';
  }
  return os.str();
}

}  // namespace mfpc
