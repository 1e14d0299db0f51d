#include "mfpc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>

namespace mfpc {

std::string_view to_string(WildcardPolicy p) {
  switch (p) {
    case WildcardPolicy::Exclude: return "exclude";
    case WildcardPolicy::Zero: return "zero";
    case WildcardPolicy::Lo: return "lo";
  }
  return "?";
}

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::SD: return "sd";
    case Metric::DI: return "di";
    case Metric::Variance: return "variance";
  }
  return "?";
}

std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::SD: return "sd";
    case Scheme::DI: return "di";
    case Scheme::Variance: return "variance";
    case Scheme::Random1: return "random1";
    case Scheme::Random2: return "random2";
    case Scheme::Custom: return "custom";
  }
  return "?";
}

std::optional<WildcardPolicy> parse_wildcard_policy(std::string_view s) {
  if (s == "exclude") return WildcardPolicy::Exclude;
  if (s == "zero") return WildcardPolicy::Zero;
  if (s == "lo") return WildcardPolicy::Lo;
  return std::nullopt;
}

std::optional<Scheme> parse_scheme(std::string_view s) {
  for (auto sc : {Scheme::SD, Scheme::DI, Scheme::Variance, Scheme::Random1, Scheme::Random2, Scheme::Custom})
    if (to_string(sc) == s) return sc;
  return std::nullopt;
}

FieldValueSeries field_series(const Ruleset& ruleset, std::size_t field, WildcardPolicy policy) {
  const auto& fields = ruleset.fields();
  auto it = std::find(fields.begin(), fields.end(), field);
  if (it == fields.end()) throw std::invalid_argument("field not present in ruleset");
  const auto slot = static_cast<std::size_t>(it - fields.begin());
  FieldValueSeries series{field, {}, field_spec(field).width};
  series.values.reserve(ruleset.size());
  for (const auto& r : ruleset.rules()) {
    const auto& m = r.matchers[slot];
    if (m.is_wildcard) {
      if (policy == WildcardPolicy::Exclude) continue;
      series.values.push_back(policy == WildcardPolicy::Zero ? 0 : m.lo);
    } else {
      series.values.push_back(m.lo);
    }
  }
  return series;
}

std::vector<double> normalize(const FieldValueSeries& series) {
  std::vector<double> out(series.values.size(), 0.0);
  if (series.values.empty()) return out;
  const auto max = *std::max_element(series.values.begin(), series.values.end());
  if (max == 0) return out;
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<double>(series.values[i]) / static_cast<double>(max);
  return out;
}

double variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  if (std::adjacent_find(xs.begin(), xs.end(), std::not_equal_to<>()) == xs.end()) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(xs.size() - 1);
}

double standard_deviation(std::span<const double> xs) { return std::sqrt(variance(xs)); }

double diversity_index(const FieldValueSeries& series) {
  const auto& v = series.values;
  if (v.size() < 2) return 0.0;
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  if (*mx == 0) return 0.0;
  std::map<std::uint64_t, std::size_t> counts;
  for (auto x : v) ++counts[x];
  double coefficient = 0.0;
  for (const auto& [value, count] : counts) coefficient += 1.0 / static_cast<double>(count);
  // (max/max - min/max) * S, with the division done last.
  return static_cast<double>(*mx - *mn) * coefficient / static_cast<double>(*mx);
}

double FieldStats::value(Metric m) const {
  switch (m) {
    case Metric::SD: return sd;
    case Metric::DI: return di;
    case Metric::Variance: return variance;
  }
  return 0.0;
}

FieldStats field_stats(const FieldValueSeries& series) {
  const auto norm = normalize(series);
  const auto var = variance(norm);
  return {series.field_index, std::sqrt(var), var, diversity_index(series)};
}

std::vector<FieldStats> compute_stats(const Ruleset& ruleset, WildcardPolicy policy) {
  std::vector<FieldStats> out;
  out.reserve(ruleset.fields().size());
  for (auto f : ruleset.fields()) out.push_back(field_stats(field_series(ruleset, f, policy)));
  return out;
}

const FieldList& rankable_fields() {
  static const FieldList fields{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  return fields;
}

const FieldList& residual_fields() {
  static const FieldList fields{static_cast<std::size_t>(Field::VlanPriority),
                                static_cast<std::size_t>(Field::IpTos)};
  return fields;
}

Ranking rank_fields(std::span<const FieldStats> stats, Metric metric) {
  const auto& rankable = rankable_fields();
  Ranking ranking;
  for (const auto& s : stats)
    if (std::find(rankable.begin(), rankable.end(), s.field_index) != rankable.end())
      ranking.push_back({s.field_index, 0, s.value(metric)});
  std::sort(ranking.begin(), ranking.end(), [](const RankEntry& a, const RankEntry& b) {
    if (a.value != b.value) return a.value > b.value;
    return a.field_index < b.field_index;
  });
  for (std::size_t i = 0; i < ranking.size(); ++i) ranking[i].rank = static_cast<unsigned>(i + 1);
  return ranking;
}

DecompositionPlan decompose(const Ranking& ranking, Scheme scheme) {
  DecompositionPlan plan;
  plan.scheme = scheme;
  plan.ranking = ranking;
  for (const auto& e : ranking) (e.rank % 2 == 1 ? plan.subset_a : plan.subset_b).push_back(e.field_index);
  for (std::size_t f = 0; f < kNumFields; ++f) {
    auto in = [f](const FieldList& l) { return std::find(l.begin(), l.end(), f) != l.end(); };
    if (!in(plan.subset_a) && !in(plan.subset_b)) plan.residual.push_back(f);
  }
  validate_plan(plan);
  return plan;
}

DecompositionPlan fixed_decomposition(Scheme scheme) {
  using F = Field;
  auto idx = [](std::initializer_list<F> fs) {
    FieldList out;
    for (auto f : fs) out.push_back(static_cast<std::size_t>(f));
    return out;
  };
  DecompositionPlan plan;
  plan.scheme = scheme;
  plan.residual = residual_fields();
  switch (scheme) {
    case Scheme::Random1:
      plan.subset_a = idx({F::NwSrc, F::NwDst, F::TpSrc, F::TpDst, F::IpProto});
      plan.subset_b = idx({F::DlSrc, F::DlDst, F::InPort, F::VlanId, F::EthType});
      break;
    case Scheme::Random2:
      plan.subset_a = idx({F::NwSrc, F::DlDst, F::TpDst, F::InPort, F::IpProto});
      plan.subset_b = idx({F::DlSrc, F::NwDst, F::TpSrc, F::VlanId, F::EthType});
      break;
    default:
      throw std::invalid_argument("fixed_decomposition takes random1 or random2");
  }
  validate_plan(plan);
  return plan;
}

DecompositionPlan custom_plan(FieldList subset_a, FieldList subset_b) {
  DecompositionPlan plan;
  plan.scheme = Scheme::Custom;
  plan.subset_a = std::move(subset_a);
  plan.subset_b = std::move(subset_b);
  for (std::size_t f = 0; f < kNumFields; ++f) {
    auto in = [f](const FieldList& l) { return std::find(l.begin(), l.end(), f) != l.end(); };
    if (!in(plan.subset_a) && !in(plan.subset_b)) plan.residual.push_back(f);
  }
  validate_plan(plan);
  return plan;
}

DecompositionPlan plan_for(const Ruleset& ruleset, Scheme scheme, WildcardPolicy policy) {
  switch (scheme) {
    case Scheme::SD:
    case Scheme::DI:
    case Scheme::Variance: {
      const auto stats = compute_stats(ruleset, policy);
      const auto metric = scheme == Scheme::SD ? Metric::SD : scheme == Scheme::DI ? Metric::DI : Metric::Variance;
      return decompose(rank_fields(stats, metric), scheme);
    }
    case Scheme::Random1:
    case Scheme::Random2:
      return fixed_decomposition(scheme);
    case Scheme::Custom:
      break;
  }
  throw std::invalid_argument("custom plans need explicit subsets");
}

void validate_plan(const DecompositionPlan& plan) {
  std::array<int, kNumFields> seen{};
  for (const auto* list : {&plan.subset_a, &plan.subset_b, &plan.residual})
    for (auto f : *list) {
      if (f >= kNumFields) throw std::invalid_argument("plan names an unknown field");
      ++seen[f];
    }
  for (std::size_t f = 0; f < kNumFields; ++f)
    if (seen[f] != 1)
      throw std::invalid_argument("plan does not partition the fields (" + std::string(field_spec(f).name) + ")");
  if (plan.subset_a.empty() || plan.subset_b.empty()) throw std::invalid_argument("plan has an empty subset");
}

std::string format_fields(const FieldList& fields) {
  std::string out;
  for (auto f : fields) {
    if (!out.empty()) out += ',';
    out += field_spec(f).name;
  }
  return out;
}

FieldList parse_fields(std::string_view names) {
  FieldList out;
  std::size_t start = 0;
  while (start <= names.size()) {
    auto end = names.find(',', start);
    if (end == std::string_view::npos) end = names.size();
    const auto name = names.substr(start, end - start);
    if (!name.empty()) {
      const auto idx = field_index(name);
      if (!idx) throw std::invalid_argument("unknown field '" + std::string(name) + "'");
      out.push_back(*idx);
    }
    start = end + 1;
  }
  return out;
}

}  // namespace mfpc
