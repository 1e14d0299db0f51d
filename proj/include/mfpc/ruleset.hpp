#ifndef MFPC_RULESET_HPP
#define MFPC_RULESET_HPP

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mfpc {

inline constexpr std::size_t kNumFields = 12;

enum class MatchKind : std::uint8_t { Prefix, Range, Exact };

/// Position of a header field in the 12-field OpenFlow layout.
enum class Field : std::uint8_t {
  NwSrc = 0,
  NwDst,
  TpSrc,
  TpDst,
  IpProto,
  DlSrc,
  DlDst,
  InPort,
  VlanId,
  EthType,
  VlanPriority,
  IpTos,
};

struct FieldSpec {
  std::string_view name;
  unsigned width;
  MatchKind match_kind;
  std::size_t index;

  std::uint64_t max_value() const { return width >= 64 ? ~0ULL : (1ULL << width) - 1; }
};

const std::array<FieldSpec, kNumFields>& field_specs();
const FieldSpec& field_spec(std::size_t index);
inline const FieldSpec& field_spec(Field f) { return field_spec(static_cast<std::size_t>(f)); }

/// Looks a field up by its name; nullopt when unknown.
std::optional<std::size_t> field_index(std::string_view name);

using FieldList = std::vector<std::size_t>;

/// All twelve field indices in declaration order.
FieldList all_fields();

/// Error raised by the parsers. Carries the 1-based source line (0 when unknown).
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Closed integer interval [lo, hi] in field units.
struct FieldMatcher {
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;
  bool is_wildcard = false;

  static FieldMatcher exact(std::uint64_t v) { return {v, v, false}; }
  static FieldMatcher range(std::uint64_t lo, std::uint64_t hi, unsigned width);
  static FieldMatcher wildcard(unsigned width);

  bool contains(std::uint64_t v) const { return lo <= v && v <= hi; }
  bool operator==(const FieldMatcher&) const = default;
};

/// Canonical interval of a prefix. Rejects host bits set below the prefix.
FieldMatcher prefix_to_range(std::uint64_t address, unsigned prefix_len, unsigned width);

using RuleId = std::uint32_t;

struct Rule {
  RuleId id = 0;
  std::uint64_t priority = 0;  // smaller value wins
  std::vector<FieldMatcher> matchers;
  std::string action;

  bool operator==(const Rule&) const = default;
};

struct Packet {
  std::array<std::uint64_t, kNumFields> values{};

  std::uint64_t operator[](std::size_t field) const { return values[field]; }
  bool operator==(const Packet&) const = default;
};

/// Priority-ordered list of rules. `fields()` names the field behind each
/// matcher slot: all twelve for a full ruleset, a subset after project().
class Ruleset {
 public:
  Ruleset() : fields_(all_fields()) {}
  Ruleset(std::vector<Rule> rules, FieldList fields, std::string source = {});
  explicit Ruleset(std::vector<Rule> rules, std::string source = {})
      : Ruleset(std::move(rules), all_fields(), std::move(source)) {}

  const std::vector<Rule>& rules() const { return rules_; }
  const FieldList& fields() const { return fields_; }
  const std::string& source() const { return source_; }
  std::size_t size() const { return rules_.size(); }
  bool empty() const { return rules_.empty(); }
  const Rule& operator[](std::size_t i) const { return rules_[i]; }

  /// Index of the rule carrying `id`, if any.
  std::optional<std::size_t> find(RuleId id) const;

 private:
  std::vector<Rule> rules_;
  FieldList fields_;
  std::string source_;
  std::vector<std::pair<RuleId, std::size_t>> by_id_;
};

enum class RulesetFormat { Native, ClassBench5 };

Ruleset parse_ruleset(std::string_view text, RulesetFormat format = RulesetFormat::Native,
                      std::string source = {});
Ruleset load_ruleset(const std::string& path, RulesetFormat format = RulesetFormat::Native);
std::optional<RulesetFormat> parse_format_name(std::string_view name);

/// Native text for a full 12-field ruleset; parse_ruleset() reads it back losslessly.
std::string serialize_native(const Ruleset& ruleset);
std::string format_rule(const Rule& rule);

/// True iff every matcher slot k of `rule` contains packet[fields[k]] (a
/// projected rule with its ruleset's field list).
bool rule_matches(const Rule& rule, const Packet& packet, std::span<const std::size_t> fields);
bool rule_matches(const Rule& rule, const Packet& packet);

/// Linear scan: id of the highest-priority matching rule.
std::optional<RuleId> oracle_classify(const Ruleset& ruleset, const Packet& packet);

/// Keeps only the listed fields' matchers, in the listed order.
Ruleset project(const Ruleset& ruleset, const FieldList& fields);

struct GeneratorProfile {
  /// Per-field probability that a rule wildcards the field.
  std::array<double, kNumFields> wildcard_prob{0.20, 0.20, 0.50, 0.25, 0.30, 0.25,
                                               0.25, 0.30, 0.30, 0.20, 1.00, 1.00};
  double port_range_prob = 0.25;  // non-wildcard port matchers drawn as ranges
  unsigned min_prefix_len = 8;
  std::size_t address_pool = 256;  // distinct base addresses per IP/MAC field
};

Ruleset generate_synthetic(std::uint64_t seed, std::size_t n, const GeneratorProfile& profile = {});

struct LabeledPacket {
  Packet packet;
  std::optional<RuleId> expected;
  bool labeled = false;  // row carried an expected column
};

/// Packets drawn inside sampled rules (plus `uniform_fraction` uniform points),
/// each labeled by oracle_classify.
std::vector<LabeledPacket> generate_trace(const Ruleset& ruleset, std::uint64_t seed, std::size_t n,
                                          double uniform_fraction = 0.1);

std::vector<LabeledPacket> parse_trace(std::string_view text);
std::vector<LabeledPacket> load_trace(const std::string& path);
std::string serialize_trace(std::span<const LabeledPacket> trace, bool with_expected = true);

}  // namespace mfpc

#endif  // MFPC_RULESET_HPP
