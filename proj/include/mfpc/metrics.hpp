#ifndef MFPC_METRICS_HPP
#define MFPC_METRICS_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mfpc/ruleset.hpp"

namespace mfpc {

/// How a wildcard matcher contributes to a field's value series.
enum class WildcardPolicy { Exclude, Zero, Lo };

enum class Metric { SD, DI, Variance };

enum class Scheme { SD, DI, Variance, Random1, Random2, Custom };

std::string_view to_string(WildcardPolicy p);
std::string_view to_string(Metric m);
std::string_view to_string(Scheme s);
std::optional<WildcardPolicy> parse_wildcard_policy(std::string_view s);
std::optional<Scheme> parse_scheme(std::string_view s);

struct FieldValueSeries {
  std::size_t field_index = 0;
  std::vector<std::uint64_t> values;
  unsigned width = 0;
};

/// One representative value per rule (the matcher's low end), per `policy`.
FieldValueSeries field_series(const Ruleset& ruleset, std::size_t field, WildcardPolicy policy);

/// x / max(x); all zeros when the maximum is zero.
std::vector<double> normalize(const FieldValueSeries& series);

/// Sample standard deviation (N - 1 denominator); 0 for fewer than two values.
double standard_deviation(std::span<const double> normalized);
double variance(std::span<const double> normalized);

/// Normalized value range times the sum of inverse occurrence counts of the
/// distinct values. Duplicates are found on the raw integers.
double diversity_index(const FieldValueSeries& series);

struct FieldStats {
  std::size_t field_index = 0;
  double sd = 0.0;
  double variance = 0.0;
  double di = 0.0;

  double value(Metric m) const;
};

FieldStats field_stats(const FieldValueSeries& series);
std::vector<FieldStats> compute_stats(const Ruleset& ruleset, WildcardPolicy policy = WildcardPolicy::Exclude);

/// The ten fields that take part in ranking; vlan_priority and ip_tos never do.
const FieldList& rankable_fields();
const FieldList& residual_fields();

struct RankEntry {
  std::size_t field_index = 0;
  unsigned rank = 0;  // 1 = largest metric value
  double value = 0.0;

  bool operator==(const RankEntry&) const = default;
};

using Ranking = std::vector<RankEntry>;

/// Descending by metric value; ties keep field declaration order.
Ranking rank_fields(std::span<const FieldStats> stats, Metric metric);

struct DecompositionPlan {
  Scheme scheme = Scheme::Custom;
  Ranking ranking;
  FieldList subset_a;
  FieldList subset_b;
  FieldList residual;

  bool operator==(const DecompositionPlan&) const = default;
};

/// Odd ranks go to subset A, even ranks to subset B.
DecompositionPlan decompose(const Ranking& ranking, Scheme scheme);
DecompositionPlan fixed_decomposition(Scheme scheme);
DecompositionPlan custom_plan(FieldList subset_a, FieldList subset_b);

/// Computes stats (for metric schemes) and returns the plan for `scheme`.
DecompositionPlan plan_for(const Ruleset& ruleset, Scheme scheme,
                           WildcardPolicy policy = WildcardPolicy::Exclude);

/// Throws std::invalid_argument unless the three lists partition all 12 fields.
void validate_plan(const DecompositionPlan& plan);

std::string format_fields(const FieldList& fields);
FieldList parse_fields(std::string_view names);

}  // namespace mfpc

#endif  // MFPC_METRICS_HPP
