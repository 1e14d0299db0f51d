#include "mfpc/tree.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <deque>
#include <sstream>
#include <unordered_set>

namespace mfpc {

namespace {

const char* kind_tag(NodeKind k) {
  switch (k) {
    case NodeKind::Leaf: return "L";
    case NodeKind::Cut: return "C";
    case NodeKind::Partition: return "P";
  }
  return "?";
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

template <typename T>
T parse_num(std::string_view s) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw ParseError(0, "tree dump: bad number '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view s, char c) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i)
    if (i == s.size() || s[i] == c) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  return out;
}

}  // namespace

std::string_view to_string(DepthMode m) { return m == DepthMode::Max ? "max" : "sum"; }

std::optional<DepthMode> parse_depth_mode(std::string_view s) {
  if (s == "max") return DepthMode::Max;
  if (s == "sum") return DepthMode::Sum;
  return std::nullopt;
}

std::size_t TreeNode::child_count() const {
  return static_cast<std::size_t>(std::count_if(children.begin(), children.end(),
                                                [](NodeId c) { return c != kNoNode; }));
}

Interval cut_child_range(Interval parent, unsigned k, unsigned j) {
  const auto w = parent.cardinality();
  const auto q = w / k;
  const auto r = w % k;
  const auto lo = parent.lo + j * q + std::min<std::uint64_t>(j, r);
  const auto size = q + (j < r ? 1 : 0);
  return {lo, lo + size - 1};
}

unsigned cut_child_index(Interval parent, unsigned k, std::uint64_t value) {
  const auto w = parent.cardinality();
  const auto q = w / k;
  const auto r = w % k;
  const auto off = value - parent.lo;
  const auto head = r * (q + 1);
  if (off < head) return static_cast<unsigned>(off / (q + 1));
  return static_cast<unsigned>(r + (off - head) / q);
}

DecisionTree::DecisionTree(std::shared_ptr<const Ruleset> projected, std::size_t leaf_threshold,
                           DepthMode depth_mode)
    : ruleset_(std::move(projected)), leaf_threshold_(leaf_threshold), depth_mode_(depth_mode) {
  if (!ruleset_) throw std::invalid_argument("tree needs a ruleset");
  if (ruleset_->fields().empty()) throw std::invalid_argument("tree subset must be nonempty");
  TreeNode root;
  root.id = 0;
  for (auto f : ruleset_->fields()) root.range.push_back({0, field_spec(f).max_value()});
  root.rules.resize(ruleset_->size());
  for (std::uint32_t i = 0; i < root.rules.size(); ++i) root.rules[i] = i;
  nodes_.push_back(std::move(root));
}

bool DecisionTree::is_open(NodeId id) const {
  const auto& n = nodes_.at(id);
  return n.is_leaf() && !n.overflow && n.rules.size() > leaf_threshold_;
}

bool DecisionTree::complete() const {
  for (NodeId i = 0; i < nodes_.size(); ++i)
    if (is_open(i)) return false;
  return true;
}

Interval DecisionTree::clip(std::uint32_t rule, const TreeNode& n, std::size_t dim) const {
  const auto& m = (*ruleset_)[rule].matchers[dim];
  return {std::max(m.lo, n.range[dim].lo), std::min(m.hi, n.range[dim].hi)};
}

void DecisionTree::check_splittable(NodeId id, std::size_t dim) const {
  if (id >= nodes_.size()) throw InvalidAction("no such node");
  if (!is_open(id)) throw InvalidAction("node " + std::to_string(id) + " is not an open leaf");
  if (dim >= dims()) throw InvalidAction("dimension out of range");
}

NodeId DecisionTree::add_child(const TreeNode& parent, NodeRange range, std::vector<std::uint32_t> rules,
                               PartitionSide side) {
  TreeNode c;
  c.id = static_cast<NodeId>(nodes_.size());
  c.parent = parent.id;
  c.depth = parent.depth + 1;
  c.range = std::move(range);
  c.rules = std::move(rules);
  c.side = side;
  nodes_.push_back(std::move(c));
  return nodes_.back().id;
}

std::vector<NodeId> DecisionTree::cut_node(NodeId id, std::size_t dim, unsigned k) {
  check_splittable(id, dim);
  if (std::find(kCutCounts.begin(), kCutCounts.end(), k) == kCutCounts.end())
    throw InvalidAction("cut count must be 2, 4, 8, 16 or 32");
  const auto parent_range = nodes_[id].range[dim];
  if (k > parent_range.cardinality())
    throw InvalidAction("cut count " + std::to_string(k) + " exceeds range cardinality");

  std::vector<std::vector<std::uint32_t>> buckets(k);
  for (auto r : nodes_[id].rules) {
    const auto c = clip(r, nodes_[id], dim);
    const auto first = cut_child_index(parent_range, k, c.lo);
    const auto last = cut_child_index(parent_range, k, c.hi);
    for (auto j = first; j <= last; ++j) buckets[j].push_back(r);
  }

  const TreeNode parent = nodes_[id];
  std::vector<NodeId> slots(k, kNoNode);
  std::vector<NodeId> kept;
  unsigned pruned = 0;
  for (unsigned j = 0; j < k; ++j) {
    if (buckets[j].empty()) {
      ++pruned;
      continue;
    }
    auto range = parent.range;
    range[dim] = cut_child_range(parent_range, k, j);
    slots[j] = add_child(parent, std::move(range), std::move(buckets[j]), parent.side);
    kept.push_back(slots[j]);
  }
  auto& n = nodes_[id];
  n.kind = NodeKind::Cut;
  n.dim = dim;
  n.cuts = k;
  n.children = std::move(slots);
  n.pruned = pruned;
  n.rules.clear();
  n.rules.shrink_to_fit();
  return kept;
}

double DecisionTree::coverage(NodeId id, std::uint32_t rule, std::size_t dim) const {
  const auto& n = nodes_.at(id);
  const auto c = clip(rule, n, dim);
  if (c.lo > c.hi) return 0.0;
  return static_cast<double>(c.cardinality()) / static_cast<double>(n.range[dim].cardinality());
}

bool DecisionTree::partition_valid(NodeId id, std::size_t dim, double theta) const {
  const auto& n = nodes_.at(id);
  if (dim >= dims()) return false;
  bool big = false;
  bool small = false;
  for (auto r : n.rules) {
    (coverage(id, r, dim) >= theta ? big : small) = true;
    if (big && small) return true;
  }
  return false;
}

std::pair<NodeId, NodeId> DecisionTree::partition_node(NodeId id, std::size_t dim, double theta) {
  check_splittable(id, dim);
  std::vector<std::uint32_t> big;
  std::vector<std::uint32_t> small;
  for (auto r : nodes_[id].rules) (coverage(id, r, dim) >= theta ? big : small).push_back(r);
  if (big.empty() || small.empty()) throw InvalidAction("degenerate partition: one side is empty");

  const TreeNode parent = nodes_[id];
  const auto b = add_child(parent, parent.range, std::move(big), PartitionSide::Big);
  const auto s = add_child(parent, parent.range, std::move(small), PartitionSide::Small);
  auto& n = nodes_[id];
  n.kind = NodeKind::Partition;
  n.dim = dim;
  n.theta = theta;
  n.children = {b, s};
  n.rules.clear();
  n.rules.shrink_to_fit();
  return {b, s};
}

void DecisionTree::force_leaf(NodeId id) {
  if (!is_open(id)) return;
  nodes_[id].overflow = true;
}

bool DecisionTree::separable(NodeId id) const {
  const auto& n = nodes_.at(id);
  if (n.rules.size() < 2) return false;
  for (std::size_t d = 0; d < dims(); ++d) {
    const auto first = clip(n.rules.front(), n, d);
    for (auto r : n.rules)
      if (!(clip(r, n, d) == first)) return true;
  }
  return false;
}

std::size_t DecisionTree::covering_rules(NodeId id) const {
  const auto& n = nodes_.at(id);
  std::size_t count = 0;
  for (auto r : n.rules) {
    bool full = true;
    for (std::size_t d = 0; d < dims() && full; ++d) full = clip(r, n, d) == n.range[d];
    if (full) ++count;
  }
  return count;
}

std::size_t DecisionTree::distinct_endpoints(NodeId id, std::size_t dim) const {
  const auto& n = nodes_.at(id);
  std::vector<std::uint64_t> ends;
  ends.reserve(2 * n.rules.size());
  for (auto r : n.rules) {
    const auto c = clip(r, n, dim);
    ends.push_back(c.lo);
    ends.push_back(c.hi);
  }
  std::sort(ends.begin(), ends.end());
  return static_cast<std::size_t>(std::unique(ends.begin(), ends.end()) - ends.begin());
}

unsigned DecisionTree::walk(NodeId id, const Packet& packet, std::vector<std::uint32_t>& out) const {
  const auto& n = nodes_[id];
  switch (n.kind) {
    case NodeKind::Leaf:
      for (auto r : n.rules)
        if (rule_matches((*ruleset_)[r], packet, ruleset_->fields())) out.push_back(r);
      return 1;
    case NodeKind::Cut: {
      const auto v = packet[ruleset_->fields()[n.dim]];
      const auto child = n.children[cut_child_index(n.range[n.dim], n.cuts, v)];
      return 1 + (child == kNoNode ? 0 : walk(child, packet, out));
    }
    case NodeKind::Partition: {
      const auto a = walk(n.children[0], packet, out);
      const auto b = walk(n.children[1], packet, out);
      return 1 + (depth_mode_ == DepthMode::Max ? std::max(a, b) : a + b);
    }
  }
  return 0;
}

std::vector<std::uint32_t> DecisionTree::classify_indices(const Packet& packet, unsigned* accesses) const {
  std::vector<std::uint32_t> out;
  const auto visited = walk(root(), packet, out);
  if (accesses) *accesses = visited;
  const auto& rules = ruleset_->rules();
  std::sort(out.begin(), out.end(),
            [&](std::uint32_t a, std::uint32_t b) { return rules[a].priority < rules[b].priority; });
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<RuleId> DecisionTree::classify(const Packet& packet) const {
  const auto idx = classify_indices(packet);
  std::vector<RuleId> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back((*ruleset_)[i].id);
  return out;
}

unsigned DecisionTree::subtree_depth(NodeId id) const {
  const auto& n = nodes_.at(id);
  if (n.is_leaf()) return 1;
  if (n.kind == NodeKind::Partition) {
    const auto a = subtree_depth(n.children[0]);
    const auto b = subtree_depth(n.children[1]);
    return 1 + (depth_mode_ == DepthMode::Max ? std::max(a, b) : a + b);
  }
  unsigned deepest = 0;
  for (auto c : n.children)
    if (c != kNoNode) deepest = std::max(deepest, subtree_depth(c));
  return 1 + deepest;
}

std::size_t DecisionTree::subtree_nodes(NodeId id) const {
  const auto& n = nodes_.at(id);
  std::size_t count = 1;
  for (auto c : n.children)
    if (c != kNoNode) count += subtree_nodes(c);
  return count;
}

TreeStats DecisionTree::stats() const {
  TreeStats s;
  s.depth = subtree_depth(root());
  s.node_count = nodes_.size();
  std::size_t refs = 0;
  std::unordered_set<std::uint32_t> distinct;
  for (const auto& n : nodes_) {
    if (n.is_leaf()) {
      s.bytes_total += kNodeHeaderBytes + kRefBytes * n.rules.size();
      s.max_leaf_size = std::max(s.max_leaf_size, n.rules.size());
      refs += n.rules.size();
      distinct.insert(n.rules.begin(), n.rules.end());
    } else {
      s.bytes_total += kNodeHeaderBytes + kRefBytes * n.child_count();
    }
  }
  if (!distinct.empty()) {
    s.bytes_per_rule = static_cast<double>(s.bytes_total) / static_cast<double>(distinct.size());
    s.replication_factor = static_cast<double>(refs) / static_cast<double>(distinct.size());
  }
  return s;
}

bool DecisionTree::operator==(const DecisionTree& other) const {
  if (subset() != other.subset() || leaf_threshold_ != other.leaf_threshold_ ||
      depth_mode_ != other.depth_mode_ || nodes_.size() != other.nodes_.size())
    return false;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& a = nodes_[i];
    const auto& b = other.nodes_[i];
    if (a.id != b.id || a.parent != b.parent || a.depth != b.depth || a.kind != b.kind || a.dim != b.dim ||
        a.cuts != b.cuts || a.theta != b.theta || a.range != b.range || a.children != b.children ||
        a.rules != b.rules || a.overflow != b.overflow || a.side != b.side || a.pruned != b.pruned)
      return false;
  }
  return true;
}

// Text dump, one node per line:
//   id kind parent depth dim cuts theta overflow side pruned ranges children rules
// ranges are lo:hi joined by ',', lists use '-' when empty.
std::string DecisionTree::serialize() const {
  std::ostringstream os;
  os << "mfpc-tree 1\n";
  os << "subset";
  for (auto f : subset()) os << ' ' << f;
  os << "\nleaf_threshold " << leaf_threshold_ << "\ndepth_mode " << to_string(depth_mode_)
     << "\nnodes " << nodes_.size() << '\n';
  auto list = [&](const auto& v) {
    if (v.empty()) {
      os << '-';
      return;
    }
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) os << ',';
      if constexpr (std::is_same_v<std::decay_t<decltype(v[i])>, NodeId>) {
        if (v[i] == kNoNode) {
          os << 'x';
          continue;
        }
      }
      os << v[i];
    }
  };
  for (const auto& n : nodes_) {
    os << n.id << ' ' << kind_tag(n.kind) << ' ';
    if (n.parent == kNoNode)
      os << '-';
    else
      os << n.parent;
    os << ' ' << n.depth << ' ' << n.dim << ' ' << n.cuts << ' ' << format_double(n.theta) << ' '
       << (n.overflow ? 1 : 0) << ' ' << static_cast<int>(n.side) << ' ' << n.pruned << ' ';
    for (std::size_t d = 0; d < n.range.size(); ++d) os << (d ? "," : "") << n.range[d].lo << ':' << n.range[d].hi;
    os << ' ';
    list(n.children);
    os << ' ';
    list(n.rules);
    os << '\n';
  }
  os << "end\n";
  return os.str();
}

DecisionTree DecisionTree::deserialize(std::string_view text, std::shared_ptr<const Ruleset> projected) {
  std::istringstream is{std::string(text)};
  std::string line;
  auto next = [&]() -> std::string {
    if (!std::getline(is, line)) throw ParseError(0, "tree dump: truncated");
    return line;
  };
  if (next() != "mfpc-tree 1") throw ParseError(0, "tree dump: unsupported header '" + line + "'");
  DecisionTree t;
  t.ruleset_ = std::move(projected);
  if (!t.ruleset_) throw std::invalid_argument("tree needs a ruleset");

  std::istringstream subset_line(next());
  std::string tag;
  subset_line >> tag;
  if (tag != "subset") throw ParseError(0, "tree dump: expected subset");
  FieldList subset;
  for (std::size_t f; subset_line >> f;) subset.push_back(f);
  if (subset != t.ruleset_->fields()) throw ParseError(0, "tree dump: subset does not match ruleset");

  std::istringstream thr(next());
  thr >> tag >> t.leaf_threshold_;
  if (tag != "leaf_threshold") throw ParseError(0, "tree dump: expected leaf_threshold");
  std::istringstream dm(next());
  std::string mode;
  dm >> tag >> mode;
  const auto parsed_mode = parse_depth_mode(mode);
  if (tag != "depth_mode" || !parsed_mode) throw ParseError(0, "tree dump: bad depth_mode");
  t.depth_mode_ = *parsed_mode;
  std::istringstream cnt(next());
  std::size_t count = 0;
  cnt >> tag >> count;
  if (tag != "nodes") throw ParseError(0, "tree dump: expected node count");

  t.nodes_.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream ls(next());
    std::string id, kind, parent, depth, dim, cuts, theta, overflow, side, pruned, ranges, children, rules;
    if (!(ls >> id >> kind >> parent >> depth >> dim >> cuts >> theta >> overflow >> side >> pruned >> ranges >>
          children >> rules))
      throw ParseError(0, "tree dump: malformed node line");
    TreeNode n;
    n.id = parse_num<NodeId>(id);
    if (n.id != i) throw ParseError(0, "tree dump: node ids out of order");
    n.kind = kind == "L" ? NodeKind::Leaf : kind == "C" ? NodeKind::Cut : NodeKind::Partition;
    if (kind != "L" && kind != "C" && kind != "P") throw ParseError(0, "tree dump: bad node kind");
    n.parent = parent == "-" ? kNoNode : parse_num<NodeId>(parent);
    n.depth = parse_num<unsigned>(depth);
    n.dim = parse_num<std::size_t>(dim);
    n.cuts = parse_num<unsigned>(cuts);
    n.theta = parse_num<double>(theta);
    n.overflow = overflow == "1";
    n.side = static_cast<PartitionSide>(parse_num<int>(side));
    n.pruned = parse_num<unsigned>(pruned);
    for (auto r : split(ranges, ',')) {
      const auto colon = r.find(':');
      if (colon == std::string_view::npos) throw ParseError(0, "tree dump: bad range");
      n.range.push_back({parse_num<std::uint64_t>(r.substr(0, colon)), parse_num<std::uint64_t>(r.substr(colon + 1))});
    }
    if (n.range.size() != subset.size()) throw ParseError(0, "tree dump: range arity mismatch");
    if (children != "-")
      for (auto c : split(children, ',')) n.children.push_back(c == "x" ? kNoNode : parse_num<NodeId>(c));
    if (rules != "-")
      for (auto r : split(rules, ',')) {
        const auto idx = parse_num<std::uint32_t>(r);
        if (idx >= t.ruleset_->size()) throw ParseError(0, "tree dump: rule index out of range");
        n.rules.push_back(idx);
      }
    t.nodes_.push_back(std::move(n));
  }
  for (const auto& n : t.nodes_) {
    for (auto c : n.children)
      if (c != kNoNode && c >= count) throw ParseError(0, "tree dump: child id out of range");
    if (n.kind == NodeKind::Cut && (n.children.size() != n.cuts || n.dim >= subset.size()))
      throw ParseError(0, "tree dump: inconsistent cut node");
    if (n.kind == NodeKind::Partition && n.children.size() != 2)
      throw ParseError(0, "tree dump: inconsistent partition node");
  }
  if (count == 0) throw ParseError(0, "tree dump: no nodes");
  if (next() != "end") throw ParseError(0, "tree dump: missing end marker");
  return t;
}

DecisionTree baseline_build(DecisionTree tree, const BaselineConfig& config) {
  std::deque<NodeId> queue;
  if (tree.is_open(tree.root())) queue.push_back(tree.root());
  while (!queue.empty()) {
    const auto id = queue.front();
    queue.pop_front();
    if (!tree.is_open(id)) continue;
    const auto& n = tree.node(id);
    if (n.depth >= config.max_depth || tree.size() >= config.max_nodes || !tree.separable(id) ||
        tree.covering_rules(id) > tree.leaf_threshold()) {
      tree.force_leaf(id);
      continue;
    }
    std::optional<std::size_t> best;
    std::size_t best_ends = 0;
    for (std::size_t d = 0; d < tree.dims(); ++d) {
      if (n.range[d].cardinality() < 2) continue;
      // Skip dimensions on which every rule clips identically.
      const auto ends = tree.distinct_endpoints(id, d);
      bool identical = true;
      {
        const auto& rs = n.rules;
        const auto& m0 = tree.ruleset()[rs.front()].matchers[d];
        const Interval c0{std::max(m0.lo, n.range[d].lo), std::min(m0.hi, n.range[d].hi)};
        for (auto r : rs) {
          const auto& m = tree.ruleset()[r].matchers[d];
          if (!(Interval{std::max(m.lo, n.range[d].lo), std::min(m.hi, n.range[d].hi)} == c0)) {
            identical = false;
            break;
          }
        }
      }
      if (identical) continue;
      if (!best || ends > best_ends) {
        best = d;
        best_ends = ends;
      }
    }
    if (!best) {
      tree.force_leaf(id);
      continue;
    }
    const auto range = n.range[*best];
    auto k = static_cast<unsigned>(std::min<std::uint64_t>(config.max_cuts, std::bit_floor(range.cardinality())));
    k = std::max(2U, k);
    const double budget = config.space_factor * static_cast<double>(n.rules.size());
    while (k > 2) {
      std::size_t refs = k;
      for (auto r : n.rules) {
        const auto& m = tree.ruleset()[r].matchers[*best];
        refs += cut_child_index(range, k, std::min(m.hi, range.hi)) -
                cut_child_index(range, k, std::max(m.lo, range.lo)) + 1;
      }
      if (static_cast<double>(refs) <= budget) break;
      k /= 2;
    }
    for (auto c : tree.cut_node(id, *best, k))
      if (tree.is_open(c)) queue.push_back(c);
  }
  return tree;
}

}  // namespace mfpc
