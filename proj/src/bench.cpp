#include "mfpc/bench.hpp"

#include <glob.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <thread>

namespace mfpc {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

BenchRow run_cell(const NamedRuleset& rs, Scheme scheme, const BenchConfig& config, const PolicyBundle* policies) {
  BenchRow row;
  row.ruleset = rs.name;
  row.scheme = scheme;
  row.build_mode = config.builder.to_string();
  row.seed = config.seed;
  const auto started = std::chrono::steady_clock::now();
  try {
    if (!rs.ruleset) throw std::runtime_error(rs.error.empty() ? "ruleset unavailable" : rs.error);
    const auto plan = plan_for(*rs.ruleset, scheme, config.wildcard_policy);
    const auto engine = build_engine(rs.ruleset, plan, config.engine, policies);
    const auto sa = engine.tree_a.stats();
    const auto sb = engine.tree_b.stats();
    row.depth_a = sa.depth;
    row.depth_b = sb.depth;
    row.worst_case = std::max(sa.depth, sb.depth);
    row.bytes_a = sa.bytes_total;
    row.bytes_b = sb.bytes_total;
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  return row;
}

std::string csv_field(std::string s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + '"';
}

}  // namespace

std::vector<BenchRow> run_bench(const std::vector<NamedRuleset>& rulesets, const BenchConfig& config) {
  std::optional<PolicyBundle> bundle;
  if (config.builder.kind == BuilderSpec::Kind::Policy) bundle = load_bundle(config.builder.checkpoint);
  const PolicyBundle* policies = bundle ? &*bundle : nullptr;

  std::vector<std::pair<std::size_t, Scheme>> cells;
  for (std::size_t i = 0; i < rulesets.size(); ++i)
    for (auto s : config.schemes) cells.emplace_back(i, s);
  std::vector<BenchRow> rows(cells.size());
  const auto workers = std::max(1U, std::min<unsigned>(config.workers, static_cast<unsigned>(std::max<std::size_t>(1, cells.size()))));
  std::vector<std::thread> threads;
  for (unsigned w = 0; w < workers; ++w)
    threads.emplace_back([&, w] {
      for (std::size_t c = w; c < cells.size(); c += workers)
        rows[c] = run_cell(rulesets[cells[c].first], cells[c].second, config, policies);
    });
  for (auto& t : threads) t.join();
  return rows;
}

std::vector<NamedRuleset> synthetic_standins(std::uint64_t seed) {
  struct Shape {
    const char* name;
    std::size_t n;
    double wildcard_scale;
  };
  const Shape shapes[] = {{"synth1_1000", 1000, 1.0}, {"synth1_2000", 2000, 1.0},
                          {"synth2_1000", 1000, 0.6}, {"synth2_2000", 2000, 0.6}};
  std::vector<NamedRuleset> out;
  std::uint64_t k = 0;
  for (const auto& s : shapes) {
    GeneratorProfile profile;
    for (std::size_t f = 0; f < kNumFields - 2; ++f) profile.wildcard_prob[f] *= s.wildcard_scale;
    auto rs = generate_synthetic(seed * 1000 + k++, s.n, profile);
    out.push_back({s.name, std::make_shared<const Ruleset>(std::move(rs)), {}});
  }
  return out;
}

std::vector<NamedRuleset> load_rulesets(const std::string& pattern, RulesetFormat format) {
  glob_t g{};
  const int rc = ::glob(pattern.c_str(), 0, nullptr, &g);
  std::vector<std::string> paths;
  if (rc == 0)
    for (std::size_t i = 0; i < g.gl_pathc; ++i) paths.emplace_back(g.gl_pathv[i]);
  globfree(&g);
  if (rc != 0 && rc != GLOB_NOMATCH) throw std::runtime_error("cannot expand '" + pattern + "'");
  std::sort(paths.begin(), paths.end());
  std::vector<NamedRuleset> out;
  for (const auto& p : paths) {
    NamedRuleset rs;
    rs.name = std::filesystem::path(p).stem().string();
    try {
      rs.ruleset = std::make_shared<const Ruleset>(load_ruleset(p, format));
    } catch (const std::exception& e) {
      rs.error = e.what();
    }
    out.push_back(std::move(rs));
  }
  return out;
}

std::string rows_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "ruleset,scheme,depth_a,depth_b,worst_case,bytes_a,bytes_b,build_mode,seed,status\n";
  for (const auto& r : rows) {
    os << csv_field(r.ruleset) << ',' << to_string(r.scheme) << ',';
    if (r.ok())
      os << r.depth_a << ',' << r.depth_b << ',' << r.worst_case << ',' << r.bytes_a << ',' << r.bytes_b;
    else
      os << ",,,,";
    os << ',' << csv_field(r.build_mode) << ',' << r.seed << ',' << (r.ok() ? "ok" : csv_field("error: " + r.error))
       << '\n';
  }
  return os.str();
}

std::string table_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "ruleset,scheme,depth_a,depth_b,worst_case,bytes_a,bytes_b\n";
  for (const auto& r : rows)
    if (r.ok())
      os << csv_field(r.ruleset) << ',' << to_string(r.scheme) << ',' << r.depth_a << ',' << r.depth_b << ','
         << r.worst_case << ',' << r.bytes_a << ',' << r.bytes_b << '\n';
  return os.str();
}

std::string timings_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "ruleset,scheme,wall_ms\n";
  for (const auto& r : rows) os << csv_field(r.ruleset) << ',' << to_string(r.scheme) << ',' << fixed(r.wall_ms, 3) << '\n';
  return os.str();
}

std::vector<SchemeSummary> summarize(const std::vector<BenchRow>& rows) {
  std::vector<SchemeSummary> out;
  for (const auto& r : rows) {
    if (!r.ok()) continue;
    auto it = std::find_if(out.begin(), out.end(), [&](const SchemeSummary& s) { return s.scheme == r.scheme; });
    if (it == out.end()) {
      out.push_back({r.scheme, 0.0, 0.0, 0});
      it = out.end() - 1;
    }
    it->mean_worst_case += r.worst_case;
    it->mean_bytes += static_cast<double>(r.bytes_a + r.bytes_b);
    ++it->rows;
  }
  for (auto& s : out) {
    s.mean_worst_case /= static_cast<double>(s.rows);
    s.mean_bytes /= static_cast<double>(s.rows);
  }
  return out;
}

double percent_faster(double reference, double other) {
  if (other == 0.0) return 0.0;
  return (other - reference) / other * 100.0;
}

std::string report(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "depth (worst-case accesses)\n";
  os << "ruleset        scheme     tree_a  tree_b  worst\n";
  for (const auto& r : rows) {
    char line[160];
    if (r.ok())
      std::snprintf(line, sizeof line, "%-14s %-10s %6u  %6u  %5u\n", r.ruleset.c_str(),
                    std::string(to_string(r.scheme)).c_str(), r.depth_a, r.depth_b, r.worst_case);
    else
      std::snprintf(line, sizeof line, "%-14s %-10s  error: %s\n", r.ruleset.c_str(),
                    std::string(to_string(r.scheme)).c_str(), r.error.c_str());
    os << line;
  }
  os << "\nmemory (bytes)\n";
  os << "ruleset        scheme        bytes_a     bytes_b    log10_total\n";
  for (const auto& r : rows) {
    if (!r.ok()) continue;
    char line[160];
    const auto total = static_cast<double>(r.bytes_a + r.bytes_b);
    std::snprintf(line, sizeof line, "%-14s %-10s %10zu  %10zu  %10.4f\n", r.ruleset.c_str(),
                  std::string(to_string(r.scheme)).c_str(), r.bytes_a, r.bytes_b, total > 0 ? std::log10(total) : 0.0);
    os << line;
  }
  const auto sums = summarize(rows);
  os << "\nmean worst-case accesses per scheme\n";
  for (const auto& s : sums) os << "  " << to_string(s.scheme) << ": " << fixed(s.mean_worst_case, 3) << '\n';
  auto sd = std::find_if(sums.begin(), sums.end(), [](const SchemeSummary& s) { return s.scheme == Scheme::SD; });
  if (sd != sums.end()) {
    os << "\nsd vs others\n";
    for (const auto& s : sums) {
      const auto pct = percent_faster(sd->mean_worst_case, s.mean_worst_case);
      os << "  sd is " << fixed(pct, 1) << "% faster than " << to_string(s.scheme) << '\n';
    }
  }
  return os.str();
}

}  // namespace mfpc
