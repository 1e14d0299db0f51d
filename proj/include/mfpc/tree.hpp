#ifndef MFPC_TREE_HPP
#define MFPC_TREE_HPP

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "mfpc/ruleset.hpp"

namespace mfpc {

struct Interval {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;

  std::uint64_t cardinality() const { return hi - lo + 1; }
  bool contains(std::uint64_t v) const { return lo <= v && v <= hi; }
  bool operator==(const Interval&) const = default;
};

/// One interval per dimension of the tree's field subset.
using NodeRange = std::vector<Interval>;

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

enum class NodeKind : std::uint8_t { Leaf, Cut, Partition };

/// How a partition node's two children add up along a root-to-leaf walk.
/// `Max` models the two sides being searched in parallel, `Sum` sequentially.
enum class DepthMode : std::uint8_t { Max, Sum };

std::string_view to_string(DepthMode m);
std::optional<DepthMode> parse_depth_mode(std::string_view s);

/// Allowed cut counts, indexed by cut operation 0..4.
inline constexpr std::array<unsigned, 5> kCutCounts{2, 4, 8, 16, 32};

/// Where a node sits relative to its nearest partition ancestor.
enum class PartitionSide : std::uint8_t { None, Big, Small };

struct TreeNode {
  NodeId id = 0;
  NodeId parent = kNoNode;
  unsigned depth = 1;
  NodeKind kind = NodeKind::Leaf;
  std::size_t dim = 0;
  unsigned cuts = 0;     // k of a cut node
  double theta = 0.0;    // coverage threshold of a partition node
  NodeRange range;
  /// Cut nodes keep k slots (kNoNode where an empty child was pruned);
  /// partition nodes hold {big, small}.
  std::vector<NodeId> children;
  /// Indices into the projected ruleset. Emptied once the node is split.
  std::vector<std::uint32_t> rules;
  bool overflow = false;
  PartitionSide side = PartitionSide::None;
  unsigned pruned = 0;

  bool is_leaf() const { return kind == NodeKind::Leaf; }
  std::size_t child_count() const;
};

struct TreeStats {
  unsigned depth = 0;
  std::size_t node_count = 0;
  std::size_t bytes_total = 0;
  double bytes_per_rule = 0.0;
  std::size_t max_leaf_size = 0;
  double replication_factor = 0.0;
};

/// Memory model: every node costs a 16-byte header plus 4 bytes per child
/// pointer (interior) or per rule reference (leaf).
inline constexpr std::size_t kNodeHeaderBytes = 16;
inline constexpr std::size_t kRefBytes = 4;

/// Raised for structurally invalid actions; the tree is left unchanged.
class InvalidAction : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Decision tree over the fields of a projected ruleset.
class DecisionTree {
 public:
  /// Creates the root holding every rule.
  DecisionTree(std::shared_ptr<const Ruleset> projected, std::size_t leaf_threshold,
               DepthMode depth_mode = DepthMode::Max);

  const Ruleset& ruleset() const { return *ruleset_; }
  std::shared_ptr<const Ruleset> ruleset_ptr() const { return ruleset_; }
  const FieldList& subset() const { return ruleset_->fields(); }
  std::size_t dims() const { return ruleset_->fields().size(); }
  std::size_t leaf_threshold() const { return leaf_threshold_; }
  DepthMode depth_mode() const { return depth_mode_; }
  void set_depth_mode(DepthMode m) { depth_mode_ = m; }

  NodeId root() const { return 0; }
  const TreeNode& node(NodeId id) const { return nodes_.at(id); }
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }

  /// A leaf still holding more rules than the threshold and not yet closed.
  bool is_open(NodeId id) const;
  bool complete() const;

  /// Splits `dim` into k near-equal contiguous sub-ranges; the first
  /// (width mod k) children take one extra value. Rules are copied into every
  /// child they intersect and empty children are pruned.
  /// Returns the ids of the children that were kept.
  std::vector<NodeId> cut_node(NodeId id, std::size_t dim, unsigned k);

  /// Rules covering at least `theta` of the node's `dim` range go to the big
  /// child, the rest to the small one. Both children keep the parent range.
  std::pair<NodeId, NodeId> partition_node(NodeId id, std::size_t dim, double theta);

  /// Closes an open node as an overflow leaf.
  void force_leaf(NodeId id);

  /// Coverage of rule `rule` over the node's `dim` range, in [0, 1].
  double coverage(NodeId id, std::uint32_t rule, std::size_t dim) const;
  /// Whether partition_node(id, dim, theta) would leave both sides nonempty.
  bool partition_valid(NodeId id, std::size_t dim, double theta) const;
  /// False when every rule clips to the same box: no action can separate them.
  bool separable(NodeId id) const;
  /// Rules that cover the whole node box; they follow every cut.
  std::size_t covering_rules(NodeId id) const;
  /// Distinct clipped interval endpoints on `dim`.
  std::size_t distinct_endpoints(NodeId id, std::size_t dim) const;

  /// Matching rule ids on the subset fields, highest priority first.
  std::vector<RuleId> classify(const Packet& packet) const;
  /// As classify(), but yields ruleset indices and the number of nodes visited.
  std::vector<std::uint32_t> classify_indices(const Packet& packet, unsigned* accesses = nullptr) const;

  /// Depth of the subtree at `id` (a leaf counts 1).
  unsigned subtree_depth(NodeId id) const;
  std::size_t subtree_nodes(NodeId id) const;
  TreeStats stats() const;

  std::string serialize() const;
  static DecisionTree deserialize(std::string_view text, std::shared_ptr<const Ruleset> projected);

  bool operator==(const DecisionTree& other) const;

 private:
  DecisionTree() = default;
  NodeId add_child(const TreeNode& parent, NodeRange range, std::vector<std::uint32_t> rules,
                   PartitionSide side);
  Interval clip(std::uint32_t rule, const TreeNode& n, std::size_t dim) const;
  void check_splittable(NodeId id, std::size_t dim) const;
  unsigned walk(NodeId id, const Packet& packet, std::vector<std::uint32_t>& out) const;

  std::shared_ptr<const Ruleset> ruleset_;
  std::size_t leaf_threshold_ = 16;
  DepthMode depth_mode_ = DepthMode::Max;
  std::vector<TreeNode> nodes_;
};

/// Range of child `j` when [lo, hi] is split k ways.
Interval cut_child_range(Interval parent, unsigned k, unsigned j);
/// Index of the cut child containing `value`.
unsigned cut_child_index(Interval parent, unsigned k, std::uint64_t value);

struct BaselineConfig {
  std::size_t max_depth = 100;
  unsigned max_cuts = 32;
  /// Space factor: k halves while child rule references + k exceed
  /// space_factor * node rules (k never drops below 2).
  double space_factor = 4.0;
  /// Node budget; once reached, every queued node closes as overflow.
  std::size_t max_nodes = 50000;
};

/// Breadth-first cut-only builder. Each open node is cut on the separable
/// dimension with the most distinct clipped endpoints (ties to the lowest
/// dimension) into min(max_cuts, largest power of two <= cardinality) parts,
/// reduced by the space factor. Nodes that cannot be separated, that hold
/// more covering rules than the threshold, or that reach max_depth or the
/// node budget close as overflow leaves.
DecisionTree baseline_build(DecisionTree tree, const BaselineConfig& config = {});

}  // namespace mfpc

#endif  // MFPC_TREE_HPP
