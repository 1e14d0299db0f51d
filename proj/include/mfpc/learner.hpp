#ifndef MFPC_LEARNER_HPP
#define MFPC_LEARNER_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mfpc/rl_env.hpp"

namespace mfpc {

/// Fully connected tanh trunk with three heads (dimension logits, operation
/// logits, six per dimension, and value). All weights live in one flat vector.
class PolicyNet {
 public:
  PolicyNet() = default;
  PolicyNet(std::size_t inputs, std::vector<std::size_t> hidden, std::size_t dims);

  /// Orthogonal trunk, heads scaled down to 0.01 (value head 1.0).
  void initialize(std::uint64_t seed);

  std::size_t inputs() const { return inputs_; }
  std::size_t dims() const { return dims_; }
  const std::vector<std::size_t>& hidden() const { return hidden_; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }
  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  struct Layer {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
  };
  /// Trunk layers followed by the dim, op and value heads.
  const std::vector<Layer>& layers() const { return layers_; }

  bool operator==(const PolicyNet& o) const {
    return inputs_ == o.inputs_ && hidden_ == o.hidden_ && dims_ == o.dims_ && params_ == o.params_;
  }

 private:
  std::size_t inputs_ = 0;
  std::vector<std::size_t> hidden_;
  std::size_t dims_ = 0;
  std::vector<Layer> layers_;
  Eigen::VectorXd params_;
};

struct PolicyOutput {
  Eigen::VectorXd dim_probs;  // |dims|, zero where the whole row is masked
  Eigen::MatrixXd op_probs;   // |dims| x 6, each allowed row conditional on that dim
  double value = 0.0;
};

PolicyOutput policy_forward(const PolicyNet& net, const std::vector<double>& observation, const ActionMask& mask);

/// Argmax of each head; ties go to the lowest index.
Action greedy_action(const PolicyOutput& out, const ActionMask& mask);
Action sample_action(const PolicyOutput& out, std::mt19937_64& rng);
/// log p(dim) + log p(op | dim)
double action_log_prob(const PolicyOutput& out, Action a);

struct TrainConfig {
  double learning_rate = 5e-5;
  double discount = 1.0;
  double entropy_coeff = 0.01;
  double clip_param = 0.3;
  double vf_clip = 10.0;
  double vf_coeff = 1.0;
  double kl_target = 0.01;
  std::size_t sgd_iters = 30;
  std::size_t minibatch = 1000;
  std::size_t batch_steps = 60000;
  std::size_t total_steps = 10000000;
  std::size_t patience = 50;
  std::vector<std::size_t> hidden{512, 512};
  double c = 1.0;
  RewardMode reward_mode = RewardMode::ObjectiveBackprop;
  bool count_pruned = false;
  EnvConfig env{.leaf_threshold = 16, .max_tree_depth = 100, .max_steps = 1000};
  std::uint64_t seed = 1;
  unsigned workers = 1;
};

/// One sample of a PPO batch.
struct Sample {
  std::vector<double> observation;
  ActionMask mask;
  Action action;
  double old_log_prob = 0.0;
  double old_value = 0.0;
  double advantage = 0.0;
  double value_target = 0.0;
};

struct LossParts {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double kl = 0.0;
};

/// Clipped surrogate + vf_coeff · clipped value loss - entropy_coeff · entropy,
/// averaged over `batch`. Writes d(total)/d(params) into `grad` when non-null.
LossParts ppo_loss(const PolicyNet& net, const std::vector<Sample>& batch, const TrainConfig& config,
                   Eigen::VectorXd* grad);

class Adam {
 public:
  explicit Adam(std::size_t n, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

 private:
  double lr_, beta1_, beta2_, eps_;
  Eigen::VectorXd m_, v_;
  std::uint64_t t_ = 0;
};

struct UpdateStats {
  LossParts loss;
  std::size_t sgd_iters_run = 0;
  bool early_stopped = false;
};

/// Standardizes advantages, then runs minibatch SGD passes with KL early stop.
/// Throws std::runtime_error on a non-finite loss.
UpdateStats update(PolicyNet& net, Adam& opt, std::vector<Sample> batch, const TrainConfig& config,
                   std::mt19937_64& rng);

DecisionTree greedy_build(const PolicyNet& net, TreeEnv& env);

struct IterationStats {
  std::size_t iteration = 0;
  std::size_t timesteps = 0;
  double mean_objective = 0.0;
  double greedy_objective = 0.0;
  double best_objective = 0.0;
  double kl = 0.0;
  double entropy = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
};

struct TrainReport {
  std::vector<IterationStats> iterations;
  std::optional<DecisionTree> best_tree;
  double best_objective = 0.0;
  PolicyNet policy;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

/// Rollouts, update, greedy evaluation; stops at total_steps or when the best
/// greedy objective has not improved for `patience` iterations.
TrainReport train(std::shared_ptr<const Ruleset> projected, const TrainConfig& config,
                  const std::function<void(const IterationStats&)>& on_iteration = {});

/// iteration,timesteps,mean_objective,greedy_objective,best_objective,kl,entropy
std::string curve_csv(const std::vector<IterationStats>& rows);

/// Trained policies keyed by the field subset they were trained on.
struct PolicyEntry {
  PolicyNet net;
  EnvConfig env;
  std::uint64_t config_hash = 0;
};

struct PolicyBundle {
  std::map<FieldList, PolicyEntry> entries;

  const PolicyEntry* find(const FieldList& subset) const;
};

/// Little-endian, versioned.
std::string encode_bundle(const PolicyBundle& bundle);
PolicyBundle decode_bundle(const std::string& bytes);
void save_bundle(const std::string& path, const PolicyBundle& bundle);
PolicyBundle load_bundle(const std::string& path);

/// FNV-1a 64 of the text.
std::uint64_t fnv1a(std::string_view text);

}  // namespace mfpc

#endif  // MFPC_LEARNER_HPP
