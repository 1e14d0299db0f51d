#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "mfpc/cli.hpp"
#include "test_support.hpp"

using namespace mfpc;
using namespace mfpc::testing;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "mfpc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("mfpc_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

/// Lines that are not part of the '#' header block.
std::vector<std::string> body(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);)
    if (!l.starts_with("#")) out.push_back(l);
  return out;
}

std::string echo_block(const AppConfig& c) {
  std::string out;
  for (const auto& l : c.echo()) out += "# " + l + '\n';
  return out;
}

}  // namespace

TEST_CASE("usage errors exit 1") {
  auto r = run({"inspect", "--bogus"});
  CHECK(r.code == 1);
  CHECK(r.err.find("Usage") != std::string::npos);
  CHECK(run({}).code == 1);
  CHECK(run({"frobnicate"}).code == 1);
  CHECK(run({"inspect"}).code == 1);
  CHECK(run({"inspect", "--ruleset", data_path("sample_openflow.rules"), "--set", "nope=1"}).code == 1);
  CHECK(run({"inspect", "--ruleset", data_path("sample_openflow.rules"), "--set", "c=abc"}).code == 1);
  CHECK(run({"inspect", "--ruleset", data_path("sample_openflow.rules"), "--set", "c"}).code == 1);
  CHECK(run({"decompose", "--stats", data_path("of1_1000_sd.csv"), "--metric", "median"}).code == 1);
  CHECK(run({"decompose"}).code == 1);
  CHECK(run({"build", "--ruleset", data_path("sample_openflow.rules"), "--builder", "magic"}).code == 1);
  CHECK(run({"generate", "--rules", "0"}).code == 1);
  CHECK(run({"inspect", "--ruleset", data_path("sample_openflow.rules"), "--config", "/nonexistent.cfg"}).code == 1);
}

TEST_CASE("data errors exit 2") {
  auto r = run({"inspect", "--ruleset", "/nonexistent/rules.txt"});
  CHECK(r.code == 2);
  CHECK(r.err.starts_with("mfpc: "));
  const auto dir = scratch("bad");
  std::ofstream(dir / "bad.rules") << "nw_src=300.1.1.1 action=x\n";
  CHECK(run({"inspect", "--ruleset", (dir / "bad.rules").string()}).code == 2);
  CHECK(run({"classify", "--engine", (dir / "bad.rules").string(), "--trace", "x.csv"}).code == 2);
  fs::remove_all(dir);
}

TEST_CASE("version") {
  const auto r = run({"--version"});
  CHECK(r.code == 0);
  CHECK(r.out.find(kVersion) != std::string::npos);
}

TEST_CASE("config keys") {
  AppConfig c;
  const auto keys = c.echo();
  CHECK(keys[0] == "seed=1");
  for (const char* k : {"theta=", "reward_mode=", "baseline_max_nodes=", "hidden=", "wildcard_policy="})
    CHECK(std::any_of(keys.begin(), keys.end(), [&](const std::string& l) { return l.starts_with(k); }));
  c.set("hidden", "32,8");
  c.set("theta", "0.25");
  c.set("count_pruned", "true");
  c.set("reward_mode", "per_child");
  c.set("baseline_max_nodes", "1000");
  c.set("baseline_space_factor", "2.5");
  CHECK(c.train.hidden == std::vector<std::size_t>{32, 8});
  CHECK(c.train.env.theta == 0.25);
  CHECK(c.train.count_pruned);
  CHECK(c.train.reward_mode == RewardMode::PerChild);
  CHECK(c.engine_config().baseline.max_nodes == 1000);
  CHECK(c.engine_config().baseline.space_factor == 2.5);
  CHECK_THROWS_AS(c.set("hidden", ""), UsageError);
  CHECK_THROWS_AS(c.set("count_pruned", "maybe"), UsageError);
  CHECK_THROWS_AS(c.set("depth_mode", "min"), UsageError);
  CHECK_THROWS_AS(c.set("leaf_threshold", "-1"), UsageError);
  c.set("leaf_threshold", "5");
  c.set("depth_mode", "sum");
  c.set("seed", "9");
  const auto t = c.train_config();
  CHECK(t.env.leaf_threshold == 5);
  CHECK(t.env.depth_mode == DepthMode::Sum);
  CHECK(t.seed == 9);

  // Every echoed line can be fed back in.
  AppConfig d;
  for (const auto& l : c.echo()) {
    const auto eq = l.find('=');
    d.set(l.substr(0, eq), l.substr(eq + 1));
  }
  CHECK(d.echo() == c.echo());
}

TEST_CASE("inspect") {
  const auto dir = scratch("inspect");
  std::ofstream(dir / "run.cfg") << "# comment\n\nleaf_threshold = 4  # trailing\nseed=3\n";
  const auto r = run({"inspect", "--ruleset", data_path("sample_openflow.rules"), "--config", (dir / "run.cfg").string(),
                      "--seed", "5", "--workers", "1"});
  REQUIRE(r.code == 0);
  CHECK(r.out.starts_with("# mfpc "));
  CHECK(r.out.find("# command=inspect\n") != std::string::npos);
  CHECK(r.out.find("# seed=5\n") != std::string::npos);  // flag wins over the file
  CHECK(r.out.find("# leaf_threshold=4\n") != std::string::npos);
  const auto rows = body(r.out);
  REQUIRE(rows.size() == 13);
  CHECK(rows[0] == "field,sd,variance,di,rank_sd,rank_di");
  CHECK(rows[11].starts_with("vlan_priority,"));
  CHECK(rows[11].ends_with(",,"));  // never ranked

  const auto out = dir / "inspect.csv";
  REQUIRE(run({"inspect", "--ruleset", data_path("sample_openflow.rules"), "--out", out.string(), "--workers", "1"}).code == 0);
  CHECK(body(slurp(out.string())) == body(run({"inspect", "--ruleset", data_path("sample_openflow.rules")}).out));
  fs::remove_all(dir);
}

TEST_CASE("decompose from a stats fixture") {
  const auto r = run({"decompose", "--stats", data_path("of1_1000_sd.csv"), "--metric", "sd"});
  REQUIRE(r.code == 0);
  const auto rows = body(r.out);
  REQUIRE(rows.size() == 13);
  CHECK(rows[0] == "field,rank,value,subset");
  FieldList a, b, res;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto name = rows[i].substr(0, rows[i].find(','));
    const auto f = *field_index(name);
    const auto tag = rows[i].substr(rows[i].rfind(',') + 1);
    (tag == "a" ? a : tag == "b" ? b : res).push_back(f);
  }
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  CHECK(format_fields(a) == format_fields(parse_fields("nw_src,tp_dst,ip_proto,dl_src,in_port")));
  CHECK(format_fields(b) == format_fields(parse_fields("nw_dst,tp_src,dl_dst,vlan_id,eth_type")));
  CHECK(res == FieldList{10, 11});

  const auto fixed = run({"decompose", "--stats", data_path("of1_1000_sd.csv"), "--metric", "random1"});
  REQUIRE(fixed.code == 0);
  CHECK(body(fixed.out)[1] == "nw_src,,,a");

  const auto live = run({"decompose", "--ruleset", data_path("sample_openflow.rules"), "--metric", "di"});
  CHECK(live.code == 0);
  CHECK(body(live.out).size() == 13);
  CHECK(run({"decompose", "--ruleset", data_path("sample_openflow.rules"), "--stats", data_path("of1_1000_sd.csv")}).code == 1);
}

TEST_CASE("generate, build, classify") {
  const auto dir = scratch("pipeline");
  const auto rules = (dir / "r.rules").string();
  const auto trace = (dir / "t.csv").string();
  const auto engine = (dir / "e.txt").string();
  REQUIRE(run({"generate", "--rules", "150", "--out", rules, "--packets", "800", "--trace-out", trace, "--seed", "4"})
              .code == 0);
  CHECK(load_ruleset(rules).size() == 150);
  CHECK(load_trace(trace).size() == 800);

  const auto b = run({"build", "--ruleset", rules, "--scheme", "di", "--out", engine});
  REQUIRE(b.code == 0);
  const auto brows = body(b.out);
  REQUIRE(brows.size() == 3);
  CHECK(brows[0] == "tree,fields,depth,nodes,bytes_total,bytes_per_rule,max_leaf_size,replication");
  CHECK(brows[1].starts_with("a,"));

  const auto c = run({"classify", "--engine", engine, "--trace", trace, "--workers", "2"});
  REQUIRE(c.code == 0);
  CHECK(c.out.find("packet,rule,action,accesses_a,accesses_b\n") != std::string::npos);
  CHECK(c.out.find("summary: packets=800 ") != std::string::npos);
  CHECK(c.out.find("agreement=800/800 (100.00%)") != std::string::npos);

  const auto out = (dir / "results.csv").string();
  const auto c2 = run({"classify", "--engine", engine, "--trace", trace, "--out", out});
  REQUIRE(c2.code == 0);
  CHECK(c2.out.starts_with("summary: "));
  CHECK(body(slurp(out)).size() == 801);

  // Unlabeled traces classify without an agreement figure.
  const auto plain = (dir / "plain.csv").string();
  const auto lt = load_trace(trace);
  std::ofstream(plain) << serialize_trace(lt, false);
  const auto c3 = run({"classify", "--engine", engine, "--trace", plain});
  CHECK(c3.code == 0);
  CHECK(c3.out.find("agreement") == std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("bench writes reproducible files") {
  const auto dir = scratch("bench");
  for (int i = 0; i < 2; ++i) {
    const auto name = "r" + std::to_string(i) + ".rules";
    std::ofstream(dir / name) << serialize_native(generate_synthetic(20 + static_cast<std::uint64_t>(i), 120));
  }
  const auto glob = (dir / "*.rules").string();
  const auto o1 = (dir / "o1").string();
  const auto o2 = (dir / "o2").string();
  const auto r1 = run({"bench", "--rulesets", glob, "--seed", "7", "--out", o1});
  const auto r2 = run({"bench", "--rulesets", glob, "--seed", "7", "--out", o2, "--workers", "3"});
  REQUIRE(r1.code == 0);
  REQUIRE(r2.code == 0);
  CHECK(body(slurp(o1 + "/table.csv")) == body(slurp(o2 + "/table.csv")));
  CHECK(body(slurp(o1 + "/rows.csv")) == body(slurp(o2 + "/rows.csv")));
  const auto r3 = run({"bench", "--rulesets", glob, "--seed", "7", "--out", o2});
  CHECK(slurp(o1 + "/rows.csv") == slurp(o2 + "/rows.csv"));
  CHECK(slurp(o1 + "/table.csv") == slurp(o2 + "/table.csv"));
  CHECK(r1.out == r3.out);
  CHECK(r1.out.find("sd vs others") != std::string::npos);
  CHECK(body(slurp(o1 + "/table.csv")).size() == 9);
  CHECK(slurp(o1 + "/rows.csv").find("# seed=7\n") != std::string::npos);
  CHECK(slurp(o1 + "/rows.csv").find("# rulesets=" + glob) != std::string::npos);
  CHECK(fs::exists(o1 + "/timings.csv"));
  CHECK(fs::exists(o1 + "/summary.txt"));

  CHECK(run({"bench", "--rulesets", (dir / "*.none").string()}).code == 2);
  CHECK(run({"bench", "--rulesets", glob, "--schemes", "sd,custom"}).code == 1);
  fs::remove_all(dir);
}

TEST_CASE("train then build with the policy") {
  const auto dir = scratch("train");
  const auto rules = (dir / "r.rules").string();
  const auto ck = (dir / "ck.bin").string();
  const auto curve = (dir / "curve.csv").string();
  const auto episodes = (dir / "ep.csv").string();
  std::ofstream(rules) << serialize_native(generate_synthetic(30, 60));
  const std::vector<std::string> common{"--ruleset", rules,          "--set",        "total_steps=300",
                                        "--set",     "batch_steps=150", "--set",     "hidden=16",
                                        "--set",     "minibatch=50", "--leaf-threshold", "8"};
  auto args = common;
  args.insert(args.begin(), "train");
  for (const auto& extra : {"--checkpoint", ck.c_str(), "--curve", curve.c_str(), "--episodes", episodes.c_str()})
    args.emplace_back(extra);
  const auto t = run(args);
  REQUIRE(t.code == 0);
  const auto summary = body(t.out);
  REQUIRE(summary.size() == 3);
  CHECK(summary[0] ==
        "subset,fields,iterations,timesteps,best_objective,best_depth,best_nodes,baseline_depth,baseline_nodes");
  CHECK(t.err.find("train a iter 1") != std::string::npos);
  const auto bundle = load_bundle(ck);
  CHECK(bundle.entries.size() == 2);
  CHECK(body(slurp(curve))[0] == "subset,iteration,timesteps,mean_objective,greedy_objective,best_objective,kl,entropy");
  CHECK(slurp(episodes).find("# subset b") != std::string::npos);
  CHECK(slurp(curve).find("# total_steps=300\n") != std::string::npos);

  const auto b = run({"build", "--ruleset", rules, "--builder", "policy:" + ck, "--leaf-threshold", "8"});
  REQUIRE(b.code == 0);
  CHECK(body(b.out).size() == 3);
  // A different scheme needs subsets the bundle does not hold.
  CHECK(run({"build", "--ruleset", rules, "--scheme", "random1", "--builder", "policy:" + ck}).code == 2);
  CHECK(run({"train", "--ruleset", rules, "--subset", "c"}).code == 1);
  fs::remove_all(dir);
}

TEST_CASE("echo block is identical across artifacts") {
  AppConfig c;
  c.workers = 1;
  const auto block = echo_block(c);
  const auto r = run({"inspect", "--ruleset", data_path("sample_openflow.rules"), "--workers", "1"});
  CHECK(r.out.find(block) != std::string::npos);
  const auto d = run({"decompose", "--ruleset", data_path("sample_openflow.rules"), "--workers", "1"});
  CHECK(d.out.find(block) != std::string::npos);
}
