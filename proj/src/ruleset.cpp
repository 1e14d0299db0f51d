#include "mfpc/ruleset.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <fstream>
#include <random>
#include <sstream>

namespace mfpc {

namespace {

constexpr std::array<FieldSpec, kNumFields> kSpecs{{
    {"nw_src", 32, MatchKind::Prefix, 0},
    {"nw_dst", 32, MatchKind::Prefix, 1},
    {"tp_src", 16, MatchKind::Range, 2},
    {"tp_dst", 16, MatchKind::Range, 3},
    {"ip_proto", 8, MatchKind::Exact, 4},
    {"dl_src", 48, MatchKind::Exact, 5},
    {"dl_dst", 48, MatchKind::Exact, 6},
    {"in_port", 32, MatchKind::Exact, 7},
    {"vlan_id", 12, MatchKind::Exact, 8},
    {"eth_type", 16, MatchKind::Exact, 9},
    {"vlan_priority", 3, MatchKind::Exact, 10},
    {"ip_tos", 6, MatchKind::Exact, 11},
}};

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string_view> split_char(std::string_view s, char c) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == c) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

bool parse_uint(std::string_view s, std::uint64_t& out, int base = 10) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out, base);
  return ec == std::errc() && p == s.data() + s.size();
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return out;
}

// Scalar value syntaxes: decimal, 0x-hex, dotted quad, colon-hex MAC, TCP/UDP.
std::uint64_t parse_scalar(std::string_view tok, const FieldSpec& spec, std::size_t line) {
  std::uint64_t v = 0;
  if (spec.index == static_cast<std::size_t>(Field::IpProto)) {
    const auto name = lower(tok);
    if (name == "tcp") return 6;
    if (name == "udp") return 17;
  }
  if (tok.size() > 2 && tok[0] == '0' && (tok[1] == 'x' || tok[1] == 'X')) {
    if (!parse_uint(tok.substr(2), v, 16))
      throw ParseError(line, "bad hex value '" + std::string(tok) + "'");
  } else if (tok.find('.') != std::string_view::npos) {
    const auto parts = split_char(tok, '.');
    if (parts.size() != 4) throw ParseError(line, "bad dotted quad '" + std::string(tok) + "'");
    for (auto part : parts) {
      std::uint64_t octet = 0;
      if (!parse_uint(part, octet) || octet > 255)
        throw ParseError(line, "bad dotted quad '" + std::string(tok) + "'");
      v = (v << 8) | octet;
    }
  } else if (tok.find(':') != std::string_view::npos) {
    const auto parts = split_char(tok, ':');
    if (parts.size() != 6) throw ParseError(line, "bad MAC address '" + std::string(tok) + "'");
    for (auto part : parts) {
      std::uint64_t octet = 0;
      if (part.size() > 2 || !parse_uint(part, octet, 16))
        throw ParseError(line, "bad MAC address '" + std::string(tok) + "'");
      v = (v << 8) | octet;
    }
  } else if (!parse_uint(tok, v)) {
    throw ParseError(line, "bad value '" + std::string(tok) + "' for " + std::string(spec.name));
  }
  if (v > spec.max_value())
    throw ParseError(line, "value '" + std::string(tok) + "' out of range for " +
                               std::string(spec.name) + " (" + std::to_string(spec.width) +
                               " bits)");
  return v;
}

FieldMatcher parse_matcher(std::string_view tok, const FieldSpec& spec, std::size_t line) {
  if (tok == "*") return FieldMatcher::wildcard(spec.width);
  if (auto slash = tok.find('/'); slash != std::string_view::npos) {
    const auto addr = parse_scalar(tok.substr(0, slash), spec, line);
    std::uint64_t len = 0;
    if (!parse_uint(tok.substr(slash + 1), len) || len > spec.width)
      throw ParseError(line, "bad prefix length in '" + std::string(tok) + "'");
    try {
      return prefix_to_range(addr, static_cast<unsigned>(len), spec.width);
    } catch (const std::invalid_argument& e) {
      throw ParseError(line, e.what());
    }
  }
  if (auto dash = tok.find('-'); dash != std::string_view::npos) {
    const auto lo = parse_scalar(tok.substr(0, dash), spec, line);
    const auto hi = parse_scalar(tok.substr(dash + 1), spec, line);
    if (lo > hi) throw ParseError(line, "empty range '" + std::string(tok) + "'");
    return FieldMatcher::range(lo, hi, spec.width);
  }
  const auto v = parse_scalar(tok, spec, line);
  return FieldMatcher::range(v, v, spec.width);
}

std::string_view strip_comment(std::string_view line) {
  if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
  return line;
}

Rule parse_native_line(std::string_view line, std::size_t line_no, RuleId ordinal) {
  Rule rule;
  rule.id = ordinal;
  rule.priority = ordinal;
  rule.matchers.resize(kNumFields);
  std::array<bool, kNumFields> seen{};
  bool seen_action = false;
  for (auto tok : split_ws(line)) {
    const auto eq = tok.find('=');
    if (eq == std::string_view::npos)
      throw ParseError(line_no, "expected key=value, got '" + std::string(tok) + "'");
    const auto key = tok.substr(0, eq);
    const auto value = tok.substr(eq + 1);
    if (key == "action") {
      if (seen_action) throw ParseError(line_no, "duplicate key 'action'");
      seen_action = true;
      rule.action = std::string(value);
      continue;
    }
    const auto idx = field_index(key);
    if (!idx) throw ParseError(line_no, "unknown field '" + std::string(key) + "'");
    if (seen[*idx]) throw ParseError(line_no, "duplicate key '" + std::string(key) + "'");
    seen[*idx] = true;
    rule.matchers[*idx] = parse_matcher(value, kSpecs[*idx], line_no);
  }
  // Keys left out of a line are don't-care.
  for (std::size_t f = 0; f < kNumFields; ++f)
    if (!seen[f]) rule.matchers[f] = FieldMatcher::wildcard(kSpecs[f].width);
  return rule;
}

Rule parse_classbench_line(std::string_view line, std::size_t line_no, RuleId ordinal) {
  if (line.empty() || line.front() != '@') throw ParseError(line_no, "classbench rule must start with '@'");
  const auto toks = split_ws(line.substr(1));
  if (toks.size() < 9 || toks[3] != ":" || toks[6] != ":")
    throw ParseError(line_no, "expected '@src/len dst/len lo : hi lo : hi proto/mask'");
  Rule rule;
  rule.id = ordinal;
  rule.priority = ordinal;
  rule.matchers.resize(kNumFields);
  for (std::size_t f = 0; f < kNumFields; ++f) rule.matchers[f] = FieldMatcher::wildcard(kSpecs[f].width);

  rule.matchers[0] = parse_matcher(toks[0], kSpecs[0], line_no);
  rule.matchers[1] = parse_matcher(toks[1], kSpecs[1], line_no);
  auto port = [&](std::string_view lo, std::string_view hi, std::size_t f) {
    const auto a = parse_scalar(lo, kSpecs[f], line_no);
    const auto b = parse_scalar(hi, kSpecs[f], line_no);
    if (a > b) throw ParseError(line_no, "empty port range");
    rule.matchers[f] = FieldMatcher::range(a, b, kSpecs[f].width);
  };
  port(toks[2], toks[4], 2);
  port(toks[5], toks[7], 3);

  const auto proto = toks[8];
  const auto slash = proto.find('/');
  if (slash == std::string_view::npos) throw ParseError(line_no, "protocol needs value/mask");
  const auto& pspec = kSpecs[static_cast<std::size_t>(Field::IpProto)];
  const auto value = parse_scalar(proto.substr(0, slash), pspec, line_no);
  const auto mask = parse_scalar(proto.substr(slash + 1), pspec, line_no);
  if (mask == 0xFF) {
    rule.matchers[4] = FieldMatcher::range(value, value, 8);
  } else if (mask != 0) {
    throw ParseError(line_no, "unsupported protocol mask '" + std::string(proto) + "'");
  }
  return rule;
}

std::string dotted(std::uint64_t v) {
  return std::to_string((v >> 24) & 0xFF) + "." + std::to_string((v >> 16) & 0xFF) + "." +
         std::to_string((v >> 8) & 0xFF) + "." + std::to_string(v & 0xFF);
}

std::string mac(std::uint64_t v) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (int shift = 40; shift >= 0; shift -= 8) {
    if (!out.empty()) out += ':';
    const auto octet = (v >> shift) & 0xFF;
    out += kHex[octet >> 4];
    out += kHex[octet & 0xF];
  }
  return out;
}

std::string hex16(std::uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex;
  os.width(4);
  os.fill('0');
  os << v;
  return os.str();
}

std::string format_scalar(std::uint64_t v, std::size_t field) {
  switch (static_cast<Field>(field)) {
    case Field::NwSrc:
    case Field::NwDst:
      return dotted(v);
    case Field::DlSrc:
    case Field::DlDst:
      return mac(v);
    case Field::EthType:
      return hex16(v);
    default:
      return std::to_string(v);
  }
}

std::string format_matcher(const FieldMatcher& m, std::size_t field) {
  const auto& spec = kSpecs[field];
  if (m.is_wildcard) return "*";
  if (spec.match_kind == MatchKind::Prefix) {
    const auto span = m.hi - m.lo + 1;
    if (std::has_single_bit(span) && (m.lo & (span - 1)) == 0) {
      const auto len = spec.width - static_cast<unsigned>(std::countr_zero(span));
      return format_scalar(m.lo, field) + "/" + std::to_string(len);
    }
  }
  if (m.lo == m.hi) return format_scalar(m.lo, field);
  return format_scalar(m.lo, field) + "-" + format_scalar(m.hi, field);
}

}  // namespace

const std::array<FieldSpec, kNumFields>& field_specs() { return kSpecs; }

const FieldSpec& field_spec(std::size_t index) { return kSpecs.at(index); }

std::optional<std::size_t> field_index(std::string_view name) {
  for (const auto& s : kSpecs)
    if (s.name == name) return s.index;
  // Spelling used by some OpenFlow tables.
  if (name == "eth_tpe") return static_cast<std::size_t>(Field::EthType);
  return std::nullopt;
}

FieldList all_fields() {
  FieldList out(kNumFields);
  for (std::size_t i = 0; i < kNumFields; ++i) out[i] = i;
  return out;
}

FieldMatcher FieldMatcher::range(std::uint64_t lo, std::uint64_t hi, unsigned width) {
  const auto max = width >= 64 ? ~0ULL : (1ULL << width) - 1;
  return {lo, hi, lo == 0 && hi == max};
}

FieldMatcher FieldMatcher::wildcard(unsigned width) {
  return {0, width >= 64 ? ~0ULL : (1ULL << width) - 1, true};
}

FieldMatcher prefix_to_range(std::uint64_t address, unsigned prefix_len, unsigned width) {
  if (width == 0 || width > 48) throw std::invalid_argument("field width must be in 1..48");
  if (prefix_len > width) throw std::invalid_argument("prefix length exceeds field width");
  const auto max = (1ULL << width) - 1;
  if (address > max) throw std::invalid_argument("address exceeds field width");
  const auto host_mask = (1ULL << (width - prefix_len)) - 1;
  if (address & host_mask) throw std::invalid_argument("address has host bits set below the prefix");
  return FieldMatcher::range(address, address | host_mask, width);
}

Ruleset::Ruleset(std::vector<Rule> rules, FieldList fields, std::string source)
    : rules_(std::move(rules)), fields_(std::move(fields)), source_(std::move(source)) {
  for (auto f : fields_)
    if (f >= kNumFields) throw std::invalid_argument("field index out of range");
  std::vector<std::uint64_t> prios;
  prios.reserve(rules_.size());
  by_id_.reserve(rules_.size());
  for (std::size_t i = 0; i < rules_.size(); ++i) {
    const auto& r = rules_[i];
    if (r.matchers.size() != fields_.size())
      throw std::invalid_argument("rule " + std::to_string(r.id) + " has " +
                                  std::to_string(r.matchers.size()) + " matchers, expected " +
                                  std::to_string(fields_.size()));
    for (std::size_t k = 0; k < fields_.size(); ++k) {
      const auto& m = r.matchers[k];
      if (m.lo > m.hi || m.hi > kSpecs[fields_[k]].max_value())
        throw std::invalid_argument("rule " + std::to_string(r.id) + ": matcher out of range for " +
                                    std::string(kSpecs[fields_[k]].name));
    }
    by_id_.emplace_back(r.id, i);
    prios.push_back(r.priority);
  }
  std::sort(by_id_.begin(), by_id_.end());
  if (std::adjacent_find(by_id_.begin(), by_id_.end(), [](auto& a, auto& b) {
        return a.first == b.first;
      }) != by_id_.end())
    throw std::invalid_argument("duplicate rule id");
  std::sort(prios.begin(), prios.end());
  if (std::adjacent_find(prios.begin(), prios.end()) != prios.end())
    throw std::invalid_argument("duplicate rule priority");
}

std::optional<std::size_t> Ruleset::find(RuleId id) const {
  auto it = std::lower_bound(by_id_.begin(), by_id_.end(), std::pair<RuleId, std::size_t>{id, 0});
  if (it == by_id_.end() || it->first != id) return std::nullopt;
  return it->second;
}

Ruleset parse_ruleset(std::string_view text, RulesetFormat format, std::string source) {
  std::vector<Rule> rules;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (format == RulesetFormat::Native) line = strip_comment(line);
    if (split_ws(line).empty()) continue;
    if (format == RulesetFormat::ClassBench5) {
      const auto first = line.find_first_not_of(" \t");
      if (line[first] == '#') continue;
      rules.push_back(parse_classbench_line(line.substr(first), line_no,
                                            static_cast<RuleId>(rules.size())));
    } else {
      rules.push_back(parse_native_line(line, line_no, static_cast<RuleId>(rules.size())));
    }
    if (end == text.size()) break;
  }
  return Ruleset(std::move(rules), std::move(source));
}

Ruleset load_ruleset(const std::string& path, RulesetFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(0, "cannot open ruleset '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_ruleset(ss.str(), format, path);
}

std::optional<RulesetFormat> parse_format_name(std::string_view name) {
  if (name == "native") return RulesetFormat::Native;
  if (name == "classbench5" || name == "classbench") return RulesetFormat::ClassBench5;
  return std::nullopt;
}

std::string format_rule(const Rule& rule) {
  std::string out;
  for (std::size_t f = 0; f < kNumFields; ++f) {
    if (f) out += ' ';
    out += kSpecs[f].name;
    out += '=';
    out += format_matcher(rule.matchers.at(f), f);
  }
  if (!rule.action.empty()) out += " action=" + rule.action;
  return out;
}

std::string serialize_native(const Ruleset& ruleset) {
  if (ruleset.fields() != all_fields())
    throw std::invalid_argument("native serialization needs all 12 fields");
  std::string out;
  for (const auto& r : ruleset.rules()) {
    out += format_rule(r);
    out += '\n';
  }
  return out;
}

bool rule_matches(const Rule& rule, const Packet& packet, std::span<const std::size_t> fields) {
  for (std::size_t k = 0; k < fields.size(); ++k)
    if (!rule.matchers[k].contains(packet[fields[k]])) return false;
  return true;
}

bool rule_matches(const Rule& rule, const Packet& packet) {
  for (std::size_t f = 0; f < kNumFields; ++f)
    if (!rule.matchers[f].contains(packet[f])) return false;
  return true;
}

std::optional<RuleId> oracle_classify(const Ruleset& ruleset, const Packet& packet) {
  const Rule* best = nullptr;
  for (const auto& r : ruleset.rules()) {
    if (best && r.priority >= best->priority) continue;
    if (rule_matches(r, packet, ruleset.fields())) best = &r;
  }
  if (!best) return std::nullopt;
  return best->id;
}

Ruleset project(const Ruleset& ruleset, const FieldList& fields) {
  std::vector<std::size_t> slots;
  slots.reserve(fields.size());
  for (auto f : fields) {
    const auto& src = ruleset.fields();
    auto it = std::find(src.begin(), src.end(), f);
    if (it == src.end()) throw std::invalid_argument("projected field not present in ruleset");
    slots.push_back(static_cast<std::size_t>(it - src.begin()));
  }
  std::vector<Rule> out;
  out.reserve(ruleset.size());
  for (const auto& r : ruleset.rules()) {
    Rule p{r.id, r.priority, {}, r.action};
    p.matchers.reserve(slots.size());
    for (auto s : slots) p.matchers.push_back(r.matchers[s]);
    out.push_back(std::move(p));
  }
  return Ruleset(std::move(out), fields, ruleset.source());
}

Ruleset generate_synthetic(std::uint64_t seed, std::size_t n, const GeneratorProfile& profile) {
  std::mt19937_64 rng(seed);
  auto uniform = [&](std::uint64_t lo, std::uint64_t hi) {
    return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng);
  };
  auto chance = [&](double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
  };

  const auto pool_size = std::max<std::size_t>(1, profile.address_pool);
  auto make_pool = [&](unsigned width, std::uint64_t base) {
    std::vector<std::uint64_t> pool(pool_size);
    for (auto& v : pool) v = base | uniform(0, (1ULL << width) - 1);
    return pool;
  };
  const auto src_pool = make_pool(32, 0);
  const auto dst_pool = make_pool(32, 0);
  // MACs share the fa:16:3e OUI, as in virtualized deployments.
  const auto oui = 0xfa163eULL << 24;
  const auto dl_src_pool = make_pool(24, oui);
  const auto dl_dst_pool = make_pool(24, oui);
  static constexpr std::array<std::uint64_t, 12> kPorts{20, 21, 22, 23, 25, 53, 67, 80, 123, 443, 512, 8080};
  static constexpr std::array<std::uint64_t, 4> kEthTypes{0x0800, 0x0800, 0x86dd, 0x8100};

  std::vector<Rule> rules;
  rules.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rule r;
    r.id = static_cast<RuleId>(i);
    r.priority = i;
    r.action = "act" + std::to_string(uniform(0, 3));
    r.matchers.resize(kNumFields);
    for (std::size_t f = 0; f < kNumFields; ++f) {
      const auto& spec = kSpecs[f];
      if (chance(profile.wildcard_prob[f])) {
        r.matchers[f] = FieldMatcher::wildcard(spec.width);
        continue;
      }
      switch (static_cast<Field>(f)) {
        case Field::NwSrc:
        case Field::NwDst: {
          const auto& pool = f == 0 ? src_pool : dst_pool;
          static constexpr std::array<unsigned, 5> kLens{16, 24, 32, 32, 0};
          auto len = kLens[uniform(0, kLens.size() - 1)];
          if (len == 0) len = static_cast<unsigned>(uniform(profile.min_prefix_len, 32));
          const auto host = len == 32 ? 0ULL : (1ULL << (32 - len)) - 1;
          r.matchers[f] = prefix_to_range(pool[uniform(0, pool.size() - 1)] & ~host, len, 32);
          break;
        }
        case Field::TpSrc:
        case Field::TpDst: {
          if (chance(profile.port_range_prob)) {
            const auto lo = chance(0.5) ? 0 : uniform(0, 60000);
            const auto hi = std::min<std::uint64_t>(65535, lo + uniform(1, 1ULL << uniform(2, 14)));
            r.matchers[f] = FieldMatcher::range(lo, hi, 16);
          } else {
            const auto v = chance(0.7) ? kPorts[uniform(0, kPorts.size() - 1)] : uniform(1024, 65535);
            r.matchers[f] = FieldMatcher::exact(v);
          }
          break;
        }
        case Field::IpProto:
          r.matchers[f] = FieldMatcher::exact(chance(0.6) ? 6 : (chance(0.8) ? 17 : 1));
          break;
        case Field::DlSrc:
        case Field::DlDst: {
          const auto& pool = f == 5 ? dl_src_pool : dl_dst_pool;
          r.matchers[f] = FieldMatcher::exact(pool[uniform(0, pool.size() - 1)]);
          break;
        }
        case Field::InPort:
          r.matchers[f] = FieldMatcher::exact(uniform(1, 64));
          break;
        case Field::VlanId:
          r.matchers[f] = FieldMatcher::exact(uniform(1, 4094));
          break;
        case Field::EthType:
          r.matchers[f] = FieldMatcher::exact(kEthTypes[uniform(0, kEthTypes.size() - 1)]);
          break;
        default: {
          const auto v = uniform(0, spec.max_value());
          r.matchers[f] = FieldMatcher::range(v, v, spec.width);
          break;
        }
      }
    }
    rules.push_back(std::move(r));
  }
  return Ruleset(std::move(rules), "synthetic:seed=" + std::to_string(seed) + ",n=" + std::to_string(n));
}

std::vector<LabeledPacket> generate_trace(const Ruleset& ruleset, std::uint64_t seed, std::size_t n,
                                          double uniform_fraction) {
  if (ruleset.fields() != all_fields()) throw std::invalid_argument("trace generation needs a full ruleset");
  std::mt19937_64 rng(seed);
  auto uniform = [&](std::uint64_t lo, std::uint64_t hi) {
    return std::uniform_int_distribution<std::uint64_t>(lo, hi)(rng);
  };
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<LabeledPacket> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Packet p;
    if (ruleset.empty() || unit(rng) < uniform_fraction) {
      for (std::size_t f = 0; f < kNumFields; ++f) p.values[f] = uniform(0, kSpecs[f].max_value());
    } else {
      const auto& r = ruleset[uniform(0, ruleset.size() - 1)];
      for (std::size_t f = 0; f < kNumFields; ++f) p.values[f] = uniform(r.matchers[f].lo, r.matchers[f].hi);
    }
    out.push_back({p, oracle_classify(ruleset, p), true});
  }
  return out;
}

std::vector<LabeledPacket> parse_trace(std::string_view text) {
  std::vector<LabeledPacket> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    auto cols = split_char(line, ',');
    if (!cols.empty() && cols.front() == kSpecs[0].name) {
      const bool with_expected = cols.size() == kNumFields + 1 && cols.back() == "expected";
      if (cols.size() != kNumFields + (with_expected ? 1 : 0))
        throw ParseError(line_no, "unexpected trace header");
      continue;
    }
    if (cols.size() != kNumFields && cols.size() != kNumFields + 1)
      throw ParseError(line_no, "trace row needs 12 values (+ optional expected)");
    LabeledPacket lp;
    for (std::size_t f = 0; f < kNumFields; ++f) {
      std::uint64_t v = 0;
      if (!parse_uint(cols[f], v) || v > kSpecs[f].max_value())
        throw ParseError(line_no, "bad value for " + std::string(kSpecs[f].name));
      lp.packet.values[f] = v;
    }
    lp.labeled = cols.size() == kNumFields + 1;
    if (lp.labeled && cols.back() != "-" && !cols.back().empty()) {
      std::uint64_t id = 0;
      if (!parse_uint(cols.back(), id)) throw ParseError(line_no, "bad expected rule id");
      lp.expected = static_cast<RuleId>(id);
    }
    out.push_back(lp);
  }
  return out;
}

std::vector<LabeledPacket> load_trace(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(0, "cannot open trace '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_trace(ss.str());
}

std::string serialize_trace(std::span<const LabeledPacket> trace, bool with_expected) {
  std::string out;
  for (std::size_t f = 0; f < kNumFields; ++f) {
    if (f) out += ',';
    out += kSpecs[f].name;
  }
  if (with_expected) out += ",expected";
  out += '\n';
  for (const auto& lp : trace) {
    for (std::size_t f = 0; f < kNumFields; ++f) {
      if (f) out += ',';
      out += std::to_string(lp.packet.values[f]);
    }
    if (with_expected) out += ',' + (lp.expected ? std::to_string(*lp.expected) : std::string("-"));
    out += '\n';
  }
  return out;
}

}  // namespace mfpc
