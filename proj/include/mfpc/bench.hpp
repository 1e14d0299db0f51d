#ifndef MFPC_BENCH_HPP
#define MFPC_BENCH_HPP

#include <memory>
#include <string>
#include <vector>

#include "mfpc/classifier.hpp"

namespace mfpc {

struct NamedRuleset {
  std::string name;
  std::shared_ptr<const Ruleset> ruleset;  // null when loading failed
  std::string error;
};

struct BenchConfig {
  std::vector<Scheme> schemes{Scheme::SD, Scheme::DI, Scheme::Random1, Scheme::Random2};
  BuilderSpec builder;
  EngineConfig engine;
  WildcardPolicy wildcard_policy = WildcardPolicy::Exclude;
  std::uint64_t seed = 1;
  unsigned workers = 1;
};

struct BenchRow {
  std::string ruleset;
  Scheme scheme = Scheme::SD;
  unsigned depth_a = 0;
  unsigned depth_b = 0;
  unsigned worst_case = 0;
  std::size_t bytes_a = 0;
  std::size_t bytes_b = 0;
  std::string build_mode;
  std::uint64_t seed = 0;
  std::string error;  // empty on success
  double wall_ms = 0.0;

  bool ok() const { return error.empty(); }
};

/// One row per (ruleset, scheme), in input order. Failures become error rows.
std::vector<BenchRow> run_bench(const std::vector<NamedRuleset>& rulesets, const BenchConfig& config);

/// Deterministic stand-ins used when no ruleset files are given.
std::vector<NamedRuleset> synthetic_standins(std::uint64_t seed);

/// Loads every file matching `pattern`, sorted by path.
std::vector<NamedRuleset> load_rulesets(const std::string& pattern, RulesetFormat format = RulesetFormat::Native);

/// ruleset,scheme,depth_a,depth_b,worst_case,bytes_a,bytes_b,build_mode,seed,status
std::string rows_csv(const std::vector<BenchRow>& rows);
/// ruleset,scheme,depth_a,depth_b,worst_case,bytes_a,bytes_b (successful rows only)
std::string table_csv(const std::vector<BenchRow>& rows);
/// ruleset,scheme,wall_ms
std::string timings_csv(const std::vector<BenchRow>& rows);

/// Stacked depth table, bytes table and the per-scheme deltas against SD.
std::string report(const std::vector<BenchRow>& rows);

struct SchemeSummary {
  Scheme scheme = Scheme::SD;
  double mean_worst_case = 0.0;
  double mean_bytes = 0.0;
  std::size_t rows = 0;
};

std::vector<SchemeSummary> summarize(const std::vector<BenchRow>& rows);
/// Percent by which `reference` needs fewer accesses than `other`.
double percent_faster(double reference, double other);

}  // namespace mfpc

#endif  // MFPC_BENCH_HPP
