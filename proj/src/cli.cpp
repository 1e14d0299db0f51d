#include "mfpc/cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <thread>

namespace mfpc {

namespace {

template <typename T>
T parse_number(const std::string& value) {
  T v{};
  const auto* end = value.data() + value.size();
  auto [p, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || p != end) throw UsageError("bad number '" + value + "'");
  return v;
}

bool parse_bool(const std::string& value) {
  if (value == "1" || value == "true") return true;
  if (value == "0" || value == "false") return false;
  throw UsageError("expected true or false, got '" + value + "'");
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (auto x : v) out += (out.empty() ? "" : ",") + std::to_string(x);
  return out;
}

std::string num(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

struct Key {
  std::function<void(AppConfig&, const std::string&)> set;
  std::function<std::string(const AppConfig&)> get;
};

template <typename T>
Key number_key(T AppConfig::*member) {
  return {[member](AppConfig& c, const std::string& v) { c.*member = parse_number<T>(v); },
          [member](const AppConfig& c) {
            if constexpr (std::is_floating_point_v<T>)
              return num(c.*member);
            else
              return std::to_string(c.*member);
          }};
}

template <typename T>
Key train_key(T TrainConfig::*member) {
  return {[member](AppConfig& c, const std::string& v) { c.train.*member = parse_number<T>(v); },
          [member](const AppConfig& c) {
            if constexpr (std::is_floating_point_v<T>)
              return num(c.train.*member);
            else
              return std::to_string(c.train.*member);
          }};
}

template <typename T>
Key env_key(T EnvConfig::*member) {
  return {[member](AppConfig& c, const std::string& v) { c.train.env.*member = parse_number<T>(v); },
          [member](const AppConfig& c) {
            if constexpr (std::is_floating_point_v<T>)
              return num(c.train.env.*member);
            else
              return std::to_string(c.train.env.*member);
          }};
}

const std::vector<std::pair<std::string, Key>>& keys() {
  static const std::vector<std::pair<std::string, Key>> table = {
      {"seed", number_key(&AppConfig::seed)},
      {"workers", number_key(&AppConfig::workers)},
      {"leaf_threshold", number_key(&AppConfig::leaf_threshold)},
      {"c", number_key(&AppConfig::c)},
      {"wildcard_policy",
       {[](AppConfig& c, const std::string& v) {
          const auto p = parse_wildcard_policy(v);
          if (!p) throw UsageError("wildcard_policy must be exclude, zero or lo");
          c.wildcard_policy = *p;
        },
        [](const AppConfig& c) { return std::string(to_string(c.wildcard_policy)); }}},
      {"depth_mode",
       {[](AppConfig& c, const std::string& v) {
          const auto m = parse_depth_mode(v);
          if (!m) throw UsageError("depth_mode must be max or sum");
          c.depth_mode = *m;
        },
        [](const AppConfig& c) { return std::string(to_string(c.depth_mode)); }}},
      {"format",
       {[](AppConfig& c, const std::string& v) {
          const auto f = parse_format_name(v);
          if (!f) throw UsageError("format must be native or classbench5");
          c.format = *f;
        },
        [](const AppConfig& c) { return std::string(c.format == RulesetFormat::Native ? "native" : "classbench5"); }}},
      {"baseline_max_depth", number_key(&AppConfig::baseline_max_depth)},
      {"baseline_space_factor", number_key(&AppConfig::baseline_space_factor)},
      {"baseline_max_nodes", number_key(&AppConfig::baseline_max_nodes)},
      {"theta", env_key(&EnvConfig::theta)},
      {"partition_depth_limit", env_key(&EnvConfig::partition_depth_limit)},
      {"max_tree_depth", env_key(&EnvConfig::max_tree_depth)},
      {"rollout_steps", env_key(&EnvConfig::max_steps)},
      {"reward_mode",
       {[](AppConfig& c, const std::string& v) {
          const auto m = parse_reward_mode(v);
          if (!m) throw UsageError("reward_mode must be per_child or objective_backprop");
          c.train.reward_mode = *m;
        },
        [](const AppConfig& c) { return std::string(to_string(c.train.reward_mode)); }}},
      {"count_pruned",
       {[](AppConfig& c, const std::string& v) { c.train.count_pruned = parse_bool(v); },
        [](const AppConfig& c) { return std::string(c.train.count_pruned ? "true" : "false"); }}},
      {"learning_rate", train_key(&TrainConfig::learning_rate)},
      {"discount", train_key(&TrainConfig::discount)},
      {"entropy_coeff", train_key(&TrainConfig::entropy_coeff)},
      {"clip_param", train_key(&TrainConfig::clip_param)},
      {"vf_clip", train_key(&TrainConfig::vf_clip)},
      {"vf_coeff", train_key(&TrainConfig::vf_coeff)},
      {"kl_target", train_key(&TrainConfig::kl_target)},
      {"sgd_iters", train_key(&TrainConfig::sgd_iters)},
      {"minibatch", train_key(&TrainConfig::minibatch)},
      {"batch_steps", train_key(&TrainConfig::batch_steps)},
      {"total_steps", train_key(&TrainConfig::total_steps)},
      {"patience", train_key(&TrainConfig::patience)},
      {"hidden",
       {[](AppConfig& c, const std::string& v) {
          std::vector<std::size_t> sizes;
          std::stringstream ss(v);
          for (std::string part; std::getline(ss, part, ',');) sizes.push_back(parse_number<std::size_t>(part));
          if (sizes.empty()) throw UsageError("hidden needs at least one layer size");
          c.train.hidden = sizes;
        },
        [](const AppConfig& c) { return join_sizes(c.train.hidden); }}},
  };
  return table;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << text;
}

std::string header(const AppConfig& config, const std::string& command) {
  std::string out = "# mfpc " + std::string(kVersion) + "\n# command=" + command + '\n';
  for (const auto& line : config.echo()) out += "# " + line + '\n';
  return out;
}

std::vector<FieldStats> load_stats_fixture(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> columns;
  std::vector<FieldStats> out;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(trim(cell));
    if (columns.empty()) {
      columns = cells;
      if (std::find(columns.begin(), columns.end(), "field") == columns.end())
        throw ParseError(line_no, "stats fixture needs a 'field' column");
      continue;
    }
    if (cells.size() != columns.size()) throw ParseError(line_no, "stats fixture row has the wrong column count");
    FieldStats s;
    bool have_field = false;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const auto& col = columns[i];
      if (col == "field") {
        const auto f = field_index(cells[i]);
        if (!f) throw ParseError(line_no, "unknown field '" + cells[i] + "'");
        s.field_index = *f;
        have_field = true;
      } else if (col == "sd" || col == "variance" || col == "di") {
        double v = 0.0;
        auto [p, ec] = std::from_chars(cells[i].data(), cells[i].data() + cells[i].size(), v);
        if (ec != std::errc() || p != cells[i].data() + cells[i].size())
          throw ParseError(line_no, "bad number '" + cells[i] + "'");
        (col == "sd" ? s.sd : col == "variance" ? s.variance : s.di) = v;
      }
    }
    if (!have_field) throw ParseError(line_no, "row without a field");
    out.push_back(s);
  }
  return out;
}

int cmd_inspect(const AppConfig& config, const std::string& ruleset_path, const std::string& out_path,
                std::ostream& out) {
  const auto rs = load_ruleset(ruleset_path, config.format);
  const auto stats = compute_stats(rs, config.wildcard_policy);
  const auto rank_sd = rank_fields(stats, Metric::SD);
  const auto rank_di = rank_fields(stats, Metric::DI);
  auto rank_of = [](const Ranking& r, std::size_t f) -> std::string {
    for (const auto& e : r)
      if (e.field_index == f) return std::to_string(e.rank);
    return "";
  };
  std::ostringstream os;
  os << header(config, "inspect") << "field,sd,variance,di,rank_sd,rank_di\n";
  os.precision(10);
  for (const auto& s : stats)
    os << field_spec(s.field_index).name << ',' << s.sd << ',' << s.variance << ',' << s.di << ','
       << rank_of(rank_sd, s.field_index) << ',' << rank_of(rank_di, s.field_index) << '\n';
  if (out_path.empty())
    out << os.str();
  else
    write_file(out_path, os.str());
  return 0;
}

DecompositionPlan plan_from_stats(const std::vector<FieldStats>& stats, Scheme scheme) {
  switch (scheme) {
    case Scheme::SD: return decompose(rank_fields(stats, Metric::SD), scheme);
    case Scheme::DI: return decompose(rank_fields(stats, Metric::DI), scheme);
    case Scheme::Variance: return decompose(rank_fields(stats, Metric::Variance), scheme);
    case Scheme::Random1:
    case Scheme::Random2: return fixed_decomposition(scheme);
    case Scheme::Custom: break;
  }
  throw UsageError("custom plans are not produced by decompose");
}

Scheme scheme_arg(const std::string& s) {
  const auto scheme = parse_scheme(s);
  if (!scheme || *scheme == Scheme::Custom) throw UsageError("scheme must be sd, di, variance, random1 or random2");
  return *scheme;
}

int cmd_decompose(const AppConfig& config, const std::string& ruleset_path, const std::string& stats_path,
                  const std::string& metric, const std::string& out_path, std::ostream& out) {
  if (ruleset_path.empty() == stats_path.empty()) throw UsageError("decompose needs exactly one of --ruleset or --stats");
  const auto scheme = scheme_arg(metric);
  DecompositionPlan plan;
  if (!stats_path.empty())
    plan = plan_from_stats(load_stats_fixture(stats_path), scheme);
  else
    plan = plan_for(load_ruleset(ruleset_path, config.format), scheme, config.wildcard_policy);

  std::ostringstream os;
  os << header(config, "decompose") << "field,rank,value,subset\n";
  os.precision(10);
  auto subset_of = [&](std::size_t f) {
    if (std::find(plan.subset_a.begin(), plan.subset_a.end(), f) != plan.subset_a.end()) return "a";
    if (std::find(plan.subset_b.begin(), plan.subset_b.end(), f) != plan.subset_b.end()) return "b";
    return "residual";
  };
  if (!plan.ranking.empty()) {
    for (const auto& e : plan.ranking)
      os << field_spec(e.field_index).name << ',' << e.rank << ',' << e.value << ',' << subset_of(e.field_index) << '\n';
  } else {
    for (auto f : plan.subset_a) os << field_spec(f).name << ",,," << "a\n";
    for (auto f : plan.subset_b) os << field_spec(f).name << ",,," << "b\n";
  }
  for (auto f : plan.residual) os << field_spec(f).name << ",,,residual\n";
  if (out_path.empty())
    out << os.str();
  else
    write_file(out_path, os.str());
  return 0;
}

std::string tree_row(const char* name, const DecisionTree& t) {
  const auto s = t.stats();
  std::ostringstream os;
  os << name << ',' << format_fields(t.subset()) << ',' << s.depth << ',' << s.node_count << ',' << s.bytes_total << ','
     << num(s.bytes_per_rule) << ',' << s.max_leaf_size << ',' << num(s.replication_factor) << '\n';
  return os.str();
}

std::optional<PolicyBundle> bundle_for(const BuilderSpec& b) {
  if (b.kind == BuilderSpec::Kind::Policy) return load_bundle(b.checkpoint);
  return std::nullopt;
}

BuilderSpec builder_arg(const std::string& s) {
  const auto b = parse_builder(s);
  if (!b) throw UsageError("builder must be baseline or policy:<checkpoint>");
  return *b;
}

int cmd_build(const AppConfig& config, const std::string& ruleset_path, const std::string& scheme_name,
              const std::string& builder, const std::string& engine_out, std::ostream& out) {
  const auto scheme = scheme_arg(scheme_name);
  const auto spec = builder_arg(builder);
  auto rs = std::make_shared<const Ruleset>(load_ruleset(ruleset_path, config.format));
  const auto plan = plan_for(*rs, scheme, config.wildcard_policy);
  const auto bundle = bundle_for(spec);
  const auto engine = build_engine(rs, plan, config.engine_config(), bundle ? &*bundle : nullptr);
  if (!engine_out.empty()) save_engine(engine_out, engine);
  out << header(config, "build") << "tree,fields,depth,nodes,bytes_total,bytes_per_rule,max_leaf_size,replication\n"
      << tree_row("a", engine.tree_a) << tree_row("b", engine.tree_b);
  return 0;
}

int cmd_train(const AppConfig& config, const std::string& ruleset_path, const std::string& scheme_name,
              const std::string& which, const std::string& checkpoint, const std::string& curve_path,
              const std::string& episode_path, std::ostream& out, std::ostream& err) {
  const auto scheme = scheme_arg(scheme_name);
  if (which != "a" && which != "b" && which != "both") throw UsageError("--subset must be a, b or both");
  auto rs = std::make_shared<const Ruleset>(load_ruleset(ruleset_path, config.format));
  const auto plan = plan_for(*rs, scheme, config.wildcard_policy);
  const auto tc = config.train_config();

  PolicyBundle bundle;
  if (!checkpoint.empty() && std::filesystem::exists(checkpoint)) bundle = load_bundle(checkpoint);
  std::ostringstream curve;
  curve << header(config, "train") << "subset,iteration,timesteps,mean_objective,greedy_objective,best_objective,kl,entropy\n";
  std::ostringstream summary;
  summary << header(config, "train")
          << "subset,fields,iterations,timesteps,best_objective,best_depth,best_nodes,baseline_depth,baseline_nodes\n";
  std::string episodes;

  std::vector<std::pair<std::string, FieldList>> targets;
  if (which != "b") targets.emplace_back("a", plan.subset_a);
  if (which != "a") targets.emplace_back("b", plan.subset_b);
  const auto config_hash = fnv1a(header(config, "train"));
  for (const auto& [name, subset] : targets) {
    auto proj = std::make_shared<const Ruleset>(project(*rs, subset));
    const auto report = train(proj, tc, [&, n = name](const IterationStats& s) {
      err << "train " << n << " iter " << s.iteration << " steps " << s.timesteps << " mean " << s.mean_objective
          << " best " << s.best_objective << " kl " << s.kl << '\n';
    });
    for (const auto& s : report.iterations)
      curve << name << ',' << s.iteration << ',' << s.timesteps << ',' << num(s.mean_objective) << ','
            << num(s.greedy_objective) << ',' << num(s.best_objective) << ',' << num(s.kl) << ',' << num(s.entropy)
            << '\n';
    const auto base =
        baseline_build(DecisionTree(proj, tc.env.leaf_threshold, tc.env.depth_mode), config.engine_config().baseline);
    const auto bs = report.best_tree->stats();
    const auto ss = base.stats();
    summary << name << ",\"" << format_fields(subset) << "\"," << report.iterations.size() << ','
            << (report.iterations.empty() ? 0 : report.iterations.back().timesteps) << ',' << num(report.best_objective)
            << ',' << bs.depth << ',' << bs.node_count << ',' << ss.depth << ',' << ss.node_count << '\n';
    bundle.entries[subset] = PolicyEntry{report.policy, tc.env, config_hash};
    if (!episode_path.empty()) {
      TreeEnv env(proj, tc.env);
      greedy_build(report.policy, env);
      auto transitions = env.transitions();
      assign_rewards(env.tree(), transitions, tc.c, tc.reward_mode, tc.count_pruned);
      episodes += "# subset " + name + '\n' + episode_csv(transitions);
    }
  }
  if (!checkpoint.empty()) save_bundle(checkpoint, bundle);
  if (!curve_path.empty()) write_file(curve_path, curve.str());
  if (!episode_path.empty()) write_file(episode_path, header(config, "train") + episodes);
  out << summary.str();
  return 0;
}

int cmd_classify(const AppConfig& config, const std::string& engine_path, const std::string& trace_path,
                 const std::string& out_path, std::ostream& out) {
  const auto engine = load_engine(engine_path);
  const auto trace = load_trace(trace_path);
  std::vector<Packet> packets;
  packets.reserve(trace.size());
  for (const auto& lp : trace) packets.push_back(lp.packet);
  const auto results = classify_all(engine, packets, config.workers);
  std::ostringstream os;
  os << header(config, "classify") << "packet,rule,action,accesses_a,accesses_b\n";
  std::size_t labeled = 0;
  std::size_t agree = 0;
  std::size_t matched = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& r = results[i];
    os << i << ',';
    if (r.rule) os << *r.rule;
    os << ',' << r.action.value_or("") << ',' << r.accesses_a << ',' << r.accesses_b << '\n';
    if (r.rule) ++matched;
  }
  bool has_labels = false;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    if (!trace[i].labeled) continue;
    has_labels = true;
    ++labeled;
    if (trace[i].expected == results[i].rule) ++agree;
  }
  if (!out_path.empty())
    write_file(out_path, os.str());
  else
    out << os.str();
  out << "summary: packets=" << results.size() << " matched=" << matched;
  if (has_labels) {
    char pct[32];
    std::snprintf(pct, sizeof pct, "%.2f", labeled ? 100.0 * static_cast<double>(agree) / static_cast<double>(labeled) : 100.0);
    out << " agreement=" << agree << '/' << labeled << " (" << pct << "%)";
  }
  out << '\n';
  return 0;
}

int cmd_bench(const AppConfig& config, const std::string& pattern, const std::string& schemes,
              const std::string& builder, const std::string& out_dir, std::ostream& out) {
  BenchConfig bc;
  bc.schemes.clear();
  std::stringstream ss(schemes);
  for (std::string s; std::getline(ss, s, ',');) bc.schemes.push_back(scheme_arg(trim(s)));
  if (bc.schemes.empty()) throw UsageError("--schemes is empty");
  bc.builder = builder_arg(builder);
  bc.engine = config.engine_config();
  bc.wildcard_policy = config.wildcard_policy;
  bc.seed = config.seed;
  bc.workers = config.workers;
  const auto rulesets = pattern.empty() ? synthetic_standins(config.seed) : load_rulesets(pattern, config.format);
  if (rulesets.empty()) throw std::runtime_error("no rulesets match '" + pattern + "'");
  const auto rows = run_bench(rulesets, bc);
  const auto head = header(config, "bench") + "# rulesets=" + (pattern.empty() ? "synthetic" : pattern) +
                    "\n# schemes=" + schemes + "\n# builder=" + builder + '\n';
  const auto text = report(rows);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_file(out_dir + "/rows.csv", head + rows_csv(rows));
    write_file(out_dir + "/table.csv", head + table_csv(rows));
    write_file(out_dir + "/timings.csv", head + timings_csv(rows));
    write_file(out_dir + "/summary.txt", text);
  }
  out << text;
  return 0;
}

int cmd_generate(const AppConfig& config, std::size_t n, std::size_t trace_n, const std::string& out_path,
                 const std::string& trace_path, std::ostream& out) {
  const auto rs = generate_synthetic(config.seed, n);
  const auto text = "# synthetic ruleset seed=" + std::to_string(config.seed) + " rules=" + std::to_string(n) + '\n' +
                    serialize_native(rs);
  if (out_path.empty())
    out << text;
  else
    write_file(out_path, text);
  if (!trace_path.empty()) {
    const auto trace = generate_trace(rs, config.seed + 1, trace_n);
    write_file(trace_path, serialize_trace(trace));
  }
  return 0;
}

}  // namespace

void AppConfig::set(const std::string& key, const std::string& value) {
  for (const auto& [name, k] : keys())
    if (name == key) {
      try {
        k.set(*this, trim(value));
      } catch (const UsageError& e) {
        throw UsageError(key + ": " + e.what());
      }
      return;
    }
  throw UsageError("unknown config key '" + key + "'");
}

void AppConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config file " + path);
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(path + ":" + std::to_string(line_no) + ": expected key=value");
    set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

std::vector<std::string> AppConfig::echo() const {
  std::vector<std::string> out;
  for (const auto& [name, k] : keys()) out.push_back(name + "=" + k.get(*this));
  return out;
}

TrainConfig AppConfig::train_config() const {
  auto t = train;
  t.c = c;
  t.seed = seed;
  t.workers = workers;
  t.env.leaf_threshold = leaf_threshold;
  t.env.depth_mode = depth_mode;
  return t;
}

EngineConfig AppConfig::engine_config() const {
  EngineConfig e;
  e.leaf_threshold = leaf_threshold;
  e.depth_mode = depth_mode;
  e.baseline.max_depth = baseline_max_depth;
  e.baseline.space_factor = baseline_space_factor;
  e.baseline.max_nodes = baseline_max_nodes;
  return e;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Many-field packet classification with decomposed decision trees", "mfpc"};
  app.set_version_flag("--version", std::string("mfpc ") + kVersion);
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> workers;
  std::optional<std::size_t> leaf_threshold;
  std::optional<double> c;
  app.add_option("--config", config_path, "key=value config file");
  app.add_option("--set", overrides, "override one config key (key=value), repeatable");
  app.add_option("--seed", seed, "random seed");
  app.add_option("--workers", workers, "worker threads");
  app.add_option("--leaf-threshold", leaf_threshold, "max rules per leaf");
  app.add_option("--c", c, "time-space coefficient");

  std::string ruleset, stats, metric = "sd", scheme = "sd", builder = "baseline", out_path, engine_path, trace_path,
                             checkpoint, curve_path, episode_path, subset = "both", rulesets_glob,
                             schemes = "sd,di,random1,random2", out_dir;
  std::size_t rules = 1000;
  std::size_t packets = 0;

  auto* inspect = app.add_subcommand("inspect", "per-field SD, variance and diversity index");
  inspect->add_option("--ruleset", ruleset, "ruleset file")->required();
  inspect->add_option("--out", out_path, "output CSV (default stdout)");

  auto* decomp = app.add_subcommand("decompose", "rank fields and split them into two subsets");
  decomp->add_option("--ruleset", ruleset, "ruleset file");
  decomp->add_option("--stats", stats, "stats fixture CSV (field,sd,variance,di)");
  decomp->add_option("--metric", metric, "sd, di, variance, random1 or random2");
  decomp->add_option("--out", out_path, "output CSV (default stdout)");

  auto* build = app.add_subcommand("build", "build both subset trees and dump the engine");
  build->add_option("--ruleset", ruleset, "ruleset file")->required();
  build->add_option("--scheme", scheme, "decomposition scheme");
  build->add_option("--builder", builder, "baseline or policy:<checkpoint>");
  build->add_option("--out", engine_path, "engine dump path");

  auto* tr = app.add_subcommand("train", "train tree-building policies");
  tr->add_option("--ruleset", ruleset, "ruleset file")->required();
  tr->add_option("--scheme", scheme, "decomposition scheme");
  tr->add_option("--subset", subset, "a, b or both");
  tr->add_option("--checkpoint", checkpoint, "policy bundle to write (entries are merged)");
  tr->add_option("--curve", curve_path, "training curve CSV");
  tr->add_option("--episodes", episode_path, "greedy episode trace CSV");

  auto* cls = app.add_subcommand("classify", "classify a packet trace with an engine dump");
  cls->add_option("--engine", engine_path, "engine dump")->required();
  cls->add_option("--trace", trace_path, "trace CSV")->required();
  cls->add_option("--out", out_path, "per-packet results CSV (default stdout)");

  auto* bench = app.add_subcommand("bench", "depth and memory across decomposition schemes");
  bench->add_option("--rulesets", rulesets_glob, "ruleset glob (default: synthetic stand-ins)");
  bench->add_option("--schemes", schemes, "comma-separated schemes");
  bench->add_option("--builder", builder, "baseline or policy:<checkpoint>");
  bench->add_option("--out", out_dir, "output directory");

  auto* gen = app.add_subcommand("generate", "write a synthetic ruleset and optional trace");
  gen->add_option("--rules", rules, "rule count")->check(CLI::PositiveNumber);
  gen->add_option("--out", out_path, "ruleset path (default stdout)");
  gen->add_option("--packets", packets, "trace packet count");
  gen->add_option("--trace-out", trace_path, "trace CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return 0;
    }
    app.exit(e, err, err);
    err << app.help();
    return 1;
  }

  try {
    AppConfig config;
    config.workers = std::max(1U, std::thread::hardware_concurrency());
    if (!config_path.empty()) config.load_file(config_path);
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value");
      config.set(o.substr(0, eq), o.substr(eq + 1));
    }
    if (seed) config.seed = *seed;
    if (workers) config.workers = std::max(1U, *workers);
    if (leaf_threshold) config.leaf_threshold = *leaf_threshold;
    if (c) config.c = *c;

    if (*inspect) return cmd_inspect(config, ruleset, out_path, out);
    if (*decomp) return cmd_decompose(config, ruleset, stats, metric, out_path, out);
    if (*build) return cmd_build(config, ruleset, scheme, builder, engine_path, out);
    if (*tr) return cmd_train(config, ruleset, scheme, subset, checkpoint, curve_path, episode_path, out, err);
    if (*cls) return cmd_classify(config, engine_path, trace_path, out_path, out);
    if (*bench) return cmd_bench(config, rulesets_glob, schemes, builder, out_dir, out);
    if (*gen) {
      if (!trace_path.empty() && packets == 0) packets = 10000;
      return cmd_generate(config, rules, packets, out_path, trace_path, out);
    }
  } catch (const UsageError& e) {
    err << "mfpc: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "mfpc: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace mfpc
