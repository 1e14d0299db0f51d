#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>

#include "test_support.hpp"

using namespace mfpc;
using namespace mfpc::testing;

namespace {

std::shared_ptr<const Ruleset> projected(std::uint64_t seed, std::size_t n, const FieldList& f) {
  return std::make_shared<const Ruleset>(project(generate_synthetic(seed, n), f));
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.hidden = {16, 16};
  cfg.learning_rate = 1e-3;
  cfg.batch_steps = 200;
  cfg.minibatch = 64;
  cfg.sgd_iters = 3;
  cfg.total_steps = 1000;
  cfg.patience = 100;
  cfg.env.leaf_threshold = 8;
  return cfg;
}

}  // namespace

TEST_CASE("network layout and init") {
  PolicyNet net(10, {7, 5}, 3);
  const std::size_t want = (10 * 7 + 7) + (7 * 5 + 5) + (5 * 3 + 3) + (5 * 18 + 18) + (5 * 1 + 1);
  CHECK(net.parameter_count() == want);
  REQUIRE(net.layers().size() == 5);
  CHECK(net.layers()[2].rows == 3);
  CHECK(net.layers()[3].rows == 18);
  CHECK(net.layers()[4].rows == 1);
  net.initialize(3);
  PolicyNet again(10, {7, 5}, 3);
  again.initialize(3);
  CHECK(net == again);
  PolicyNet other(10, {7, 5}, 3);
  other.initialize(4);
  CHECK_FALSE(net == other);
  for (const auto& l : net.layers())
    for (std::size_t b = 0; b < l.rows; ++b) CHECK(net.params()[static_cast<Eigen::Index>(l.bias_offset + b)] == 0.0);
  // Trunk rows are orthonormal (7 rows of a 10-wide layer).
  const auto& l0 = net.layers()[0];
  Eigen::Map<const Eigen::MatrixXd> w(net.params().data() + l0.weight_offset, static_cast<Eigen::Index>(l0.rows),
                                      static_cast<Eigen::Index>(l0.cols));
  Eigen::MatrixXd wwt = w * w.transpose();
  CHECK((wwt - Eigen::MatrixXd::Identity(7, 7) * wwt(0, 0)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("masked distributions") {
  PolicyNet net(12, {8}, 2);
  net.initialize(1);
  std::vector<double> obs(12, 1.0);
  ActionMask mask{1, 1, 0, 0, 0, 1, /**/ 0, 0, 0, 0, 0, 0};
  const auto out = policy_forward(net, obs, mask);
  CHECK(out.dim_probs[0] == doctest::Approx(1.0));
  CHECK(out.dim_probs[1] == 0.0);
  CHECK(out.op_probs.row(0).sum() == doctest::Approx(1.0));
  CHECK(out.op_probs(0, 2) == 0.0);
  CHECK(out.op_probs(0, 4) == 0.0);
  const auto g = greedy_action(out, mask);
  CHECK(g.dim == 0);
  CHECK(mask[g.op] == 1);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    const auto a = sample_action(out, rng);
    CHECK(mask[a.dim * kNumOps + a.op] == 1);
  }
  const double lp = action_log_prob(out, {0, 5});
  CHECK(lp == doctest::Approx(std::log(out.op_probs(0, 5))));
  // Freshly initialized heads are close to uniform over allowed entries.
  CHECK(out.op_probs(0, 0) == doctest::Approx(1.0 / 3.0).epsilon(0.05));
}

TEST_CASE("greedy ties go to the lowest index") {
  PolicyOutput out;
  out.dim_probs = Eigen::VectorXd::Constant(3, 1.0 / 3.0);
  out.op_probs = Eigen::MatrixXd::Constant(3, 6, 1.0 / 6.0);
  const auto a = greedy_action(out, ActionMask(18, 1));
  CHECK(a == Action{0, 0});
}

TEST_CASE("analytic gradient matches finite differences") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto gc = gradient_check(seed);
    CAPTURE(seed);
    CHECK(gc.max_rel_error <= 1e-4);
    CHECK(gc.clipped_ratios > 0);
    CHECK(gc.clipped_values > 0);
  }
}

TEST_CASE("loss parts") {
  std::mt19937_64 rng(4);
  PolicyNet net(9, {6}, 3);
  net.initialize(4);
  TrainConfig cfg;
  auto batch = grad_batch(net, cfg, rng, 12);
  // At the sampling policy the KL estimate is zero.
  for (auto& s : batch) s.old_log_prob = action_log_prob(policy_forward(net, s.observation, s.mask), s.action);
  const auto parts = ppo_loss(net, batch, cfg, nullptr);
  CHECK(parts.kl == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(parts.entropy > 0.0);
  CHECK(parts.total == doctest::Approx(parts.policy + cfg.vf_coeff * parts.value - cfg.entropy_coeff * parts.entropy));
}

TEST_CASE("adam") {
  Eigen::VectorXd p = Eigen::VectorXd::Constant(3, 1.0);
  Adam opt(3, 0.1);
  Eigen::VectorXd g(3);
  g << 1.0, -2.0, 0.0;
  opt.step(p, g);
  CHECK(p[0] == doctest::Approx(0.9));
  CHECK(p[1] == doctest::Approx(1.1));
  CHECK(p[2] == 1.0);
}

TEST_CASE("update lowers the loss on a fixed batch") {
  std::mt19937_64 rng(5);
  PolicyNet net(9, {8}, 3);
  net.initialize(5);
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.sgd_iters = 20;
  cfg.minibatch = 16;
  cfg.kl_target = 1e9;
  auto batch = grad_batch(net, cfg, rng, 48);
  for (auto& s : batch) {
    const auto out = policy_forward(net, s.observation, s.mask);
    s.old_log_prob = action_log_prob(out, s.action);
    s.old_value = out.value;
  }
  Adam opt(net.parameter_count(), cfg.learning_rate);
  const double before = ppo_loss(net, batch, cfg, nullptr).value;
  const auto st = update(net, opt, batch, cfg, rng);
  CHECK(st.sgd_iters_run == 20);
  CHECK_FALSE(st.early_stopped);
  CHECK(ppo_loss(net, batch, cfg, nullptr).value < before);

  cfg.kl_target = 1e-12;
  PolicyNet net2(9, {8}, 3);
  net2.initialize(5);
  Adam opt2(net2.parameter_count(), cfg.learning_rate);
  const auto st2 = update(net2, opt2, batch, cfg, rng);
  CHECK(st2.early_stopped);
  CHECK(st2.sgd_iters_run < 20);

  auto bad = batch;
  bad[0].advantage = std::nan("");
  PolicyNet net3(9, {8}, 3);
  net3.initialize(5);
  Adam opt3(net3.parameter_count(), cfg.learning_rate);
  CHECK_THROWS_AS(update(net3, opt3, bad, cfg, rng), std::runtime_error);
}

TEST_CASE("greedy build completes the tree") {
  const auto rs = projected(3, 100, {0, 1, 3});
  PolicyNet net(observation_size(rs->fields()), {16}, 3);
  net.initialize(1);
  TreeEnv env(rs);
  const auto t = greedy_build(net, env);
  CHECK(t.complete());
  const auto v = structural_invariants(t);
  CHECK_MESSAGE(v.ok, v.what);
  TreeEnv env2(rs);
  CHECK(greedy_build(net, env2) == t);
}

TEST_CASE("training smoke run") {
  const auto rs = projected(4, 100, {0, 1, 3, 4, 7});
  const auto cfg = tiny_config();
  std::size_t calls = 0;
  const auto rep = train(rs, cfg, [&](const IterationStats&) { ++calls; });
  REQUIRE_FALSE(rep.iterations.empty());
  CHECK(calls == rep.iterations.size());
  REQUIRE(rep.best_tree);
  CHECK(rep.best_tree->complete());
  CHECK(objective(*rep.best_tree, cfg.c) == rep.best_objective);
  for (std::size_t i = 1; i < rep.iterations.size(); ++i)
    CHECK(rep.iterations[i].best_objective >= rep.iterations[i - 1].best_objective);
  CHECK(rep.iterations.back().timesteps >= cfg.total_steps);
  const auto csv = curve_csv(rep.iterations);
  CHECK(csv.rfind("iteration,timesteps,mean_objective,greedy_objective,best_objective,kl,entropy\n", 0) == 0);

  const auto again = train(rs, cfg);
  CHECK(again.policy == rep.policy);
  CHECK(again.best_objective == rep.best_objective);

  auto two = cfg;
  two.workers = 2;
  const auto par = train(rs, two);
  CHECK(par.policy == train(rs, two).policy);
}

TEST_CASE("training stops on a trivial ruleset") {
  const auto rs = projected(4, 5, {0, 1});
  const auto rep = train(rs, tiny_config());
  REQUIRE(rep.best_tree);
  CHECK(rep.best_tree->size() == 1);
  CHECK(rep.best_objective == -1.0);
}

TEST_CASE("policy bundle round trip") {
  PolicyBundle b;
  const FieldList a{0, 3, 4}, c{1, 2};
  PolicyEntry ea{PolicyNet(observation_size(a), {8, 4}, 3), {}, 11};
  ea.net.initialize(1);
  ea.env.leaf_threshold = 7;
  ea.env.theta = 0.25;
  PolicyEntry ec{PolicyNet(observation_size(c), {5}, 2), {}, 22};
  ec.net.initialize(2);
  ec.env.depth_mode = DepthMode::Sum;
  b.entries[a] = ea;
  b.entries[c] = ec;
  const auto bytes = encode_bundle(b);
  CHECK(bytes.rfind(std::string("MFPCPOL\0", 8), 0) == 0);
  const auto back = decode_bundle(bytes);
  REQUIRE(back.entries.size() == 2);
  const auto* pa = back.find(a);
  REQUIRE(pa);
  CHECK(pa->net == ea.net);
  CHECK(pa->env.leaf_threshold == 7);
  CHECK(pa->env.theta == 0.25);
  CHECK(pa->config_hash == 11);
  CHECK(back.find(c)->env.depth_mode == DepthMode::Sum);
  CHECK(back.find({5}) == nullptr);
  CHECK(encode_bundle(back) == bytes);

  // Reloaded policies produce bit-identical forward passes.
  std::vector<double> obs(observation_size(a), 1.0);
  ActionMask mask(a.size() * kNumOps, 1);
  const auto o1 = policy_forward(ea.net, obs, mask);
  const auto o2 = policy_forward(pa->net, obs, mask);
  CHECK(o1.dim_probs == o2.dim_probs);
  CHECK(o1.op_probs == o2.op_probs);
  CHECK(o1.value == o2.value);

  CHECK_THROWS(decode_bundle("garbage"));
  CHECK_THROWS(decode_bundle(bytes.substr(0, bytes.size() - 3)));
  const std::string path = "test_bundle.bin";
  save_bundle(path, b);
  CHECK(encode_bundle(load_bundle(path)) == bytes);
  std::remove(path.c_str());
}

TEST_CASE("fnv1a") {
  CHECK(fnv1a("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cULL);
}
