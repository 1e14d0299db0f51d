#include "mfpc/learner.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace mfpc {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using ConstMap = Eigen::Map<const MatrixXd>;
using Map = Eigen::Map<MatrixXd>;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
  return splitmix64(splitmix64(splitmix64(a) ^ b) ^ c);
}

ConstMap weight(const PolicyNet& net, const VectorXd& p, std::size_t layer) {
  const auto& l = net.layers()[layer];
  return ConstMap(p.data() + l.weight_offset, static_cast<Eigen::Index>(l.rows), static_cast<Eigen::Index>(l.cols));
}

Eigen::Map<const VectorXd> bias(const PolicyNet& net, const VectorXd& p, std::size_t layer) {
  const auto& l = net.layers()[layer];
  return Eigen::Map<const VectorXd>(p.data() + l.bias_offset, static_cast<Eigen::Index>(l.rows));
}

MatrixXd orthogonal(std::size_t rows, std::size_t cols, double gain, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto big = std::max(rows, cols);
  const auto small = std::min(rows, cols);
  MatrixXd a(static_cast<Eigen::Index>(big), static_cast<Eigen::Index>(small));
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, j) = normal(rng);
  Eigen::HouseholderQR<MatrixXd> qr(a);
  MatrixXd q = qr.householderQ() * MatrixXd::Identity(a.rows(), a.cols());
  const MatrixXd r = qr.matrixQR().topRows(a.cols()).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < q.cols(); ++j)
    if (r(j, j) < 0) q.col(j) *= -1.0;
  if (rows < cols) q.transposeInPlace();
  return gain * q;
}

/// Softmax over allowed entries; disallowed entries get probability 0 and
/// log-probability 0.
void masked_softmax(const double* z, const std::uint8_t* allowed, std::size_t n, double* p, double* logp) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i)
    if (allowed[i]) mx = std::max(mx, z[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (allowed[i]) sum += std::exp(z[i] - mx);
  const double lse = std::log(sum);
  for (std::size_t i = 0; i < n; ++i) {
    if (allowed[i]) {
      logp[i] = z[i] - mx - lse;
      p[i] = std::exp(logp[i]);
    } else {
      logp[i] = 0.0;
      p[i] = 0.0;
    }
  }
}

std::vector<std::uint8_t> dim_mask(const ActionMask& mask, std::size_t dims) {
  std::vector<std::uint8_t> out(dims);
  for (std::size_t d = 0; d < dims; ++d) out[d] = dim_allowed(mask, d) ? 1 : 0;
  return out;
}

std::size_t pick(const double* p, std::size_t n, double u) {
  double acc = 0.0;
  std::size_t last = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (p[i] <= 0.0) continue;
    last = i;
    acc += p[i];
    if (u < acc) return i;
  }
  return last;
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

struct Reader {
  const std::string& s;
  std::size_t pos = 0;

  std::uint64_t take(int bytes) {
    if (pos + static_cast<std::size_t>(bytes) > s.size()) throw std::runtime_error("policy bundle truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[pos++])) << (8 * i);
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
  std::uint64_t u64() { return take(8); }
  double f64() { return std::bit_cast<double>(take(8)); }
};

constexpr char kBundleMagic[8] = {'M', 'F', 'P', 'C', 'P', 'O', 'L', '\0'};
constexpr std::uint32_t kBundleVersion = 1;

}  // namespace

PolicyNet::PolicyNet(std::size_t inputs, std::vector<std::size_t> hidden, std::size_t dims)
    : inputs_(inputs), hidden_(std::move(hidden)), dims_(dims) {
  if (inputs == 0 || dims == 0) throw std::invalid_argument("policy net needs inputs and dims");
  std::size_t offset = 0;
  std::size_t prev = inputs;
  auto add = [&](std::size_t rows) {
    Layer l{rows, prev, offset, offset + rows * prev};
    offset += rows * prev + rows;
    layers_.push_back(l);
  };
  for (auto h : hidden_) {
    if (h == 0) throw std::invalid_argument("hidden layer of size 0");
    add(h);
    prev = h;
  }
  add(dims);
  add(dims * kNumOps);
  add(1);
  params_ = VectorXd::Zero(static_cast<Eigen::Index>(offset));
}

void PolicyNet::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  params_.setZero();
  const auto trunk = hidden_.size();
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    double gain = 1.0;
    if (i == trunk || i == trunk + 1) gain = 0.01;
    const auto w = orthogonal(l.rows, l.cols, gain, rng);
    Map(params_.data() + l.weight_offset, static_cast<Eigen::Index>(l.rows), static_cast<Eigen::Index>(l.cols)) = w;
  }
}

PolicyOutput policy_forward(const PolicyNet& net, const std::vector<double>& observation, const ActionMask& mask) {
  if (observation.size() != net.inputs()) throw std::invalid_argument("observation length does not match the network");
  if (mask.size() != net.dims() * kNumOps) throw std::invalid_argument("mask shape does not match the network");
  const auto& p = net.params();
  VectorXd h = Eigen::Map<const VectorXd>(observation.data(), static_cast<Eigen::Index>(observation.size()));
  const auto trunk = net.hidden().size();
  for (std::size_t l = 0; l < trunk; ++l) h = (weight(net, p, l) * h + bias(net, p, l)).array().tanh().matrix();
  const VectorXd zd = weight(net, p, trunk) * h + bias(net, p, trunk);
  const VectorXd zo = weight(net, p, trunk + 1) * h + bias(net, p, trunk + 1);
  const double v = (weight(net, p, trunk + 2) * h + bias(net, p, trunk + 2))(0);

  const auto dims = net.dims();
  PolicyOutput out;
  out.value = v;
  out.dim_probs = VectorXd::Zero(static_cast<Eigen::Index>(dims));
  out.op_probs = MatrixXd::Zero(static_cast<Eigen::Index>(dims), kNumOps);
  const auto dm = dim_mask(mask, dims);
  if (!std::any_of(dm.begin(), dm.end(), [](auto m) { return m != 0; })) return out;
  std::vector<double> logs(std::max(dims, kNumOps));
  masked_softmax(zd.data(), dm.data(), dims, out.dim_probs.data(), logs.data());
  std::array<double, kNumOps> row{};
  for (std::size_t d = 0; d < dims; ++d) {
    if (!dm[d]) continue;
    masked_softmax(zo.data() + d * kNumOps, mask.data() + d * kNumOps, kNumOps, row.data(), logs.data());
    for (std::size_t o = 0; o < kNumOps; ++o) out.op_probs(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(o)) = row[o];
  }
  return out;
}

Action greedy_action(const PolicyOutput& out, const ActionMask& mask) {
  const auto dims = static_cast<std::size_t>(out.dim_probs.size());
  std::optional<std::size_t> best_dim;
  for (std::size_t d = 0; d < dims; ++d) {
    if (!dim_allowed(mask, d)) continue;
    if (!best_dim || out.dim_probs(static_cast<Eigen::Index>(d)) > out.dim_probs(static_cast<Eigen::Index>(*best_dim)))
      best_dim = d;
  }
  if (!best_dim) throw std::logic_error("no legal action");
  std::optional<unsigned> best_op;
  const auto d = static_cast<Eigen::Index>(*best_dim);
  for (unsigned o = 0; o < kNumOps; ++o) {
    if (!mask[*best_dim * kNumOps + o]) continue;
    if (!best_op || out.op_probs(d, o) > out.op_probs(d, *best_op)) best_op = o;
  }
  return {*best_dim, *best_op};
}

Action sample_action(const PolicyOutput& out, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto dims = static_cast<std::size_t>(out.dim_probs.size());
  const auto d = pick(out.dim_probs.data(), dims, u(rng));
  if (d >= dims) throw std::logic_error("no legal action");
  std::array<double, kNumOps> row{};
  for (std::size_t o = 0; o < kNumOps; ++o)
    row[o] = out.op_probs(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(o));
  const auto o = pick(row.data(), kNumOps, u(rng));
  return {d, static_cast<unsigned>(o)};
}

double action_log_prob(const PolicyOutput& out, Action a) {
  return std::log(out.dim_probs(static_cast<Eigen::Index>(a.dim))) +
         std::log(out.op_probs(static_cast<Eigen::Index>(a.dim), a.op));
}

LossParts ppo_loss(const PolicyNet& net, const std::vector<Sample>& batch, const TrainConfig& config,
                   VectorXd* grad) {
  LossParts parts;
  if (batch.empty()) {
    if (grad) *grad = VectorXd::Zero(net.params().size());
    return parts;
  }
  const auto& p = net.params();
  const auto n = static_cast<Eigen::Index>(batch.size());
  const auto trunk = net.hidden().size();
  const auto dims = net.dims();

  std::vector<MatrixXd> acts;
  acts.reserve(trunk + 1);
  acts.emplace_back(static_cast<Eigen::Index>(net.inputs()), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& obs = batch[static_cast<std::size_t>(i)].observation;
    if (obs.size() != net.inputs()) throw std::invalid_argument("observation length does not match the network");
    acts[0].col(i) = Eigen::Map<const VectorXd>(obs.data(), static_cast<Eigen::Index>(obs.size()));
  }
  for (std::size_t l = 0; l < trunk; ++l) {
    MatrixXd a = weight(net, p, l) * acts.back();
    a.colwise() += bias(net, p, l);
    acts.push_back(a.array().tanh().matrix());
  }
  const auto& h = acts.back();
  MatrixXd zd = weight(net, p, trunk) * h;
  zd.colwise() += bias(net, p, trunk);
  MatrixXd zo = weight(net, p, trunk + 1) * h;
  zo.colwise() += bias(net, p, trunk + 1);
  MatrixXd zv = weight(net, p, trunk + 2) * h;
  zv.colwise() += bias(net, p, trunk + 2);

  MatrixXd dzd = MatrixXd::Zero(zd.rows(), n);
  MatrixXd dzo = MatrixXd::Zero(zo.rows(), n);
  MatrixXd dzv = MatrixXd::Zero(1, n);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double lo = 1.0 - config.clip_param;
  const double hi = 1.0 + config.clip_param;

  std::vector<double> pd(dims), lpd(dims);
  std::array<double, kNumOps> q{}, lq{};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = batch[static_cast<std::size_t>(i)];
    const auto dm = dim_mask(s.mask, dims);
    masked_softmax(zd.col(i).data(), dm.data(), dims, pd.data(), lpd.data());
    masked_softmax(zo.col(i).data() + s.action.dim * kNumOps, s.mask.data() + s.action.dim * kNumOps, kNumOps, q.data(), lq.data());
    const double logp = lpd[s.action.dim] + lq[s.action.op];
    const double log_ratio = logp - s.old_log_prob;
    const double ratio = std::exp(log_ratio);
    const double s1 = ratio * s.advantage;
    const double s2 = std::clamp(ratio, lo, hi) * s.advantage;
    parts.policy -= std::min(s1, s2) * inv_n;
    parts.kl += (ratio - 1.0 - log_ratio) * inv_n;
    const double g_logp = s1 <= s2 ? -s1 * inv_n : 0.0;

    double hd = 0.0;
    for (std::size_t d = 0; d < dims; ++d) hd -= pd[d] * lpd[d];
    double hq = 0.0;
    for (std::size_t o = 0; o < kNumOps; ++o) hq -= q[o] * lq[o];
    parts.entropy += (hd + hq) * inv_n;
    const double g_ent = -config.entropy_coeff * inv_n;
    for (std::size_t d = 0; d < dims; ++d) {
      const double onehot = d == s.action.dim ? 1.0 : 0.0;
      dzd(static_cast<Eigen::Index>(d), i) = g_logp * (onehot - pd[d]) + g_ent * (-pd[d] * (lpd[d] + hd));
    }
    for (std::size_t o = 0; o < kNumOps; ++o) {
      const double onehot = o == s.action.op ? 1.0 : 0.0;
      dzo(static_cast<Eigen::Index>(s.action.dim * kNumOps + o), i) = g_logp * (onehot - q[o]) + g_ent * (-q[o] * (lq[o] + hq));
    }

    const double v = zv(0, i);
    const double delta = v - s.old_value;
    const double vc = s.old_value + std::clamp(delta, -config.vf_clip, config.vf_clip);
    const double l1 = (v - s.value_target) * (v - s.value_target);
    const double l2 = (vc - s.value_target) * (vc - s.value_target);
    parts.value += std::max(l1, l2) * inv_n;
    double dv = 0.0;
    if (l1 >= l2)
      dv = 2.0 * (v - s.value_target);
    else if (std::abs(delta) < config.vf_clip)
      dv = 2.0 * (vc - s.value_target);
    dzv(0, i) = config.vf_coeff * inv_n * dv;
  }
  parts.total = parts.policy + config.vf_coeff * parts.value - config.entropy_coeff * parts.entropy;
  if (!grad) return parts;

  grad->setZero(p.size());
  auto store = [&](std::size_t layer, const MatrixXd& delta, const MatrixXd& input) {
    const auto& l = net.layers()[layer];
    Map(grad->data() + l.weight_offset, static_cast<Eigen::Index>(l.rows), static_cast<Eigen::Index>(l.cols)) =
        delta * input.transpose();
    Eigen::Map<VectorXd>(grad->data() + l.bias_offset, static_cast<Eigen::Index>(l.rows)) = delta.rowwise().sum();
  };
  store(trunk, dzd, h);
  store(trunk + 1, dzo, h);
  store(trunk + 2, dzv, h);
  MatrixXd dh = weight(net, p, trunk).transpose() * dzd + weight(net, p, trunk + 1).transpose() * dzo +
                weight(net, p, trunk + 2).transpose() * dzv;
  for (std::size_t l = trunk; l-- > 0;) {
    const MatrixXd da = (dh.array() * (1.0 - acts[l + 1].array().square())).matrix();
    store(l, da, acts[l]);
    if (l > 0) dh = weight(net, p, l).transpose() * da;
  }
  return parts;
}

Adam::Adam(std::size_t n, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps),
      m_(VectorXd::Zero(static_cast<Eigen::Index>(n))), v_(VectorXd::Zero(static_cast<Eigen::Index>(n))) {}

void Adam::step(VectorXd& params, const VectorXd& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

UpdateStats update(PolicyNet& net, Adam& opt, std::vector<Sample> batch, const TrainConfig& config,
                   std::mt19937_64& rng) {
  UpdateStats stats;
  if (batch.empty()) return stats;
  double mean = 0.0;
  for (const auto& s : batch) mean += s.advantage;
  mean /= static_cast<double>(batch.size());
  double var = 0.0;
  for (const auto& s : batch) var += (s.advantage - mean) * (s.advantage - mean);
  const double sd = std::sqrt(var / static_cast<double>(batch.size()));
  for (auto& s : batch) s.advantage = (s.advantage - mean) / (sd + 1e-8);

  std::vector<std::size_t> order(batch.size());
  std::iota(order.begin(), order.end(), 0);
  const auto mb = std::max<std::size_t>(1, std::min(config.minibatch, batch.size()));
  VectorXd grad;
  std::vector<Sample> chunk;
  for (std::size_t it = 0; it < config.sgd_iters; ++it) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += mb) {
      chunk.clear();
      for (std::size_t k = start; k < std::min(order.size(), start + mb); ++k) chunk.push_back(batch[order[k]]);
      const auto loss = ppo_loss(net, chunk, config, &grad);
      if (!std::isfinite(loss.total) || !grad.allFinite()) {
        std::ostringstream os;
        os << "non-finite loss (policy " << loss.policy << ", value " << loss.value << ", entropy " << loss.entropy
           << ") at sgd iteration " << it;
        throw std::runtime_error(os.str());
      }
      opt.step(net.params(), grad);
    }
    ++stats.sgd_iters_run;
    stats.loss = ppo_loss(net, batch, config, nullptr);
    if (stats.loss.kl > config.kl_target) {
      stats.early_stopped = true;
      break;
    }
  }
  if (!net.params().allFinite()) throw std::runtime_error("non-finite parameters after update");
  return stats;
}

DecisionTree greedy_build(const PolicyNet& net, TreeEnv& env) {
  env.reset();
  while (!env.done()) {
    const auto id = env.current_node();
    const auto mask = env.action_mask(id);
    const auto out = policy_forward(net, env.observation(id), mask);
    env.step(greedy_action(out, mask));
  }
  return env.tree();
}

namespace {

struct WorkerResult {
  std::vector<Sample> samples;
  std::vector<double> objectives;
};

WorkerResult collect(const PolicyNet& net, const std::shared_ptr<const Ruleset>& ruleset, const TrainConfig& config,
                     std::uint64_t seed, std::size_t quota) {
  WorkerResult out;
  std::mt19937_64 rng(seed);
  TreeEnv env(ruleset, config.env);
  while (out.samples.size() < quota) {
    env.reset();
    std::vector<double> logps, values;
    while (!env.done()) {
      const auto id = env.current_node();
      const auto mask = env.action_mask(id);
      const auto po = policy_forward(net, env.observation(id), mask);
      const auto a = sample_action(po, rng);
      logps.push_back(action_log_prob(po, a));
      values.push_back(po.value);
      env.step(a);
    }
    if (env.transitions().empty()) break;
    const auto rewards = compute_rewards(env.tree(), env.transitions(), config.c, config.reward_mode, config.count_pruned);
    for (std::size_t i = 0; i < rewards.size(); ++i) {
      const auto& t = env.transitions()[i];
      Sample s;
      s.observation = t.observation;
      s.mask = t.mask;
      s.action = t.action;
      s.old_log_prob = logps[i];
      s.old_value = values[i];
      s.value_target = rewards[i];
      s.advantage = rewards[i] - values[i];
      out.samples.push_back(std::move(s));
    }
    out.objectives.push_back(objective(env.tree(), config.c));
  }
  return out;
}

}  // namespace

TrainReport train(std::shared_ptr<const Ruleset> projected, const TrainConfig& config,
                  const std::function<void(const IterationStats&)>& on_iteration) {
  const auto started = std::chrono::steady_clock::now();
  TrainReport report;
  report.seed = config.seed;
  TreeEnv env(projected, config.env);
  report.policy = PolicyNet(env.observation_size(), config.hidden, projected->fields().size());
  report.policy.initialize(mix_seed(config.seed, 0x1417));
  auto& net = report.policy;

  auto finish = [&]() {
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
  };

  report.best_tree = greedy_build(net, env);
  report.best_objective = objective(*report.best_tree, config.c);
  if (report.best_tree->size() == 1) return finish();

  Adam opt(net.parameter_count(), config.learning_rate);
  std::mt19937_64 sgd_rng(mix_seed(config.seed, 0x5eed));
  const unsigned workers = std::max(1U, config.workers);
  std::size_t timesteps = 0;
  std::size_t stale = 0;
  for (std::size_t iter = 1; timesteps < config.total_steps; ++iter) {
    const auto quota = (config.batch_steps + workers - 1) / workers;
    std::vector<WorkerResult> results(workers);
    if (workers == 1) {
      results[0] = collect(net, projected, config, mix_seed(config.seed, iter, 0), quota);
    } else {
      std::vector<std::thread> threads;
      for (unsigned w = 0; w < workers; ++w)
        threads.emplace_back([&, w] { results[w] = collect(net, projected, config, mix_seed(config.seed, iter, w), quota); });
      for (auto& t : threads) t.join();
    }
    std::vector<Sample> batch;
    double objective_sum = 0.0;
    std::size_t episodes = 0;
    for (auto& r : results) {
      for (auto& s : r.samples) batch.push_back(std::move(s));
      for (auto o : r.objectives) objective_sum += o;
      episodes += r.objectives.size();
    }
    timesteps += batch.size();

    const auto upd = update(net, opt, std::move(batch), config, sgd_rng);
    auto greedy = greedy_build(net, env);
    const auto g = objective(greedy, config.c);
    if (g > report.best_objective) {
      report.best_objective = g;
      report.best_tree = std::move(greedy);
      stale = 0;
    } else {
      ++stale;
    }

    IterationStats st;
    st.iteration = iter;
    st.timesteps = timesteps;
    st.mean_objective = episodes ? objective_sum / static_cast<double>(episodes) : 0.0;
    st.greedy_objective = g;
    st.best_objective = report.best_objective;
    st.kl = upd.loss.kl;
    st.entropy = upd.loss.entropy;
    st.policy_loss = upd.loss.policy;
    st.value_loss = upd.loss.value;
    report.iterations.push_back(st);
    if (on_iteration) on_iteration(st);
    if (stale >= config.patience) break;
  }
  return finish();
}

std::string curve_csv(const std::vector<IterationStats>& rows) {
  std::ostringstream os;
  os.precision(10);
  os << "iteration,timesteps,mean_objective,greedy_objective,best_objective,kl,entropy\n";
  for (const auto& r : rows)
    os << r.iteration << ',' << r.timesteps << ',' << r.mean_objective << ',' << r.greedy_objective << ','
       << r.best_objective << ',' << r.kl << ',' << r.entropy << '\n';
  return os.str();
}

const PolicyEntry* PolicyBundle::find(const FieldList& subset) const {
  auto it = entries.find(subset);
  return it == entries.end() ? nullptr : &it->second;
}

std::string encode_bundle(const PolicyBundle& bundle) {
  std::string out(kBundleMagic, sizeof kBundleMagic);
  put_u32(out, kBundleVersion);
  put_u32(out, static_cast<std::uint32_t>(bundle.entries.size()));
  for (const auto& [subset, e] : bundle.entries) {
    put_u32(out, static_cast<std::uint32_t>(subset.size()));
    for (auto f : subset) put_u32(out, static_cast<std::uint32_t>(f));
    put_u64(out, e.env.leaf_threshold);
    put_u64(out, e.env.max_tree_depth);
    put_u64(out, e.env.max_steps);
    put_f64(out, e.env.theta);
    put_u32(out, e.env.partition_depth_limit);
    put_u32(out, static_cast<std::uint32_t>(e.env.depth_mode));
    put_u64(out, e.config_hash);
    put_u32(out, static_cast<std::uint32_t>(e.net.inputs()));
    put_u32(out, static_cast<std::uint32_t>(e.net.hidden().size()));
    for (auto h : e.net.hidden()) put_u32(out, static_cast<std::uint32_t>(h));
    put_u32(out, static_cast<std::uint32_t>(e.net.dims()));
    put_u64(out, e.net.parameter_count());
    for (Eigen::Index i = 0; i < e.net.params().size(); ++i) put_f64(out, e.net.params()(i));
  }
  return out;
}

PolicyBundle decode_bundle(const std::string& bytes) {
  if (bytes.size() < sizeof kBundleMagic || bytes.compare(0, sizeof kBundleMagic, kBundleMagic, sizeof kBundleMagic) != 0)
    throw std::runtime_error("not a policy bundle");
  Reader r{bytes, sizeof kBundleMagic};
  if (const auto v = r.u32(); v != kBundleVersion)
    throw std::runtime_error("unsupported policy bundle version " + std::to_string(v));
  PolicyBundle bundle;
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    FieldList subset(r.u32());
    for (auto& f : subset) {
      f = r.u32();
      if (f >= kNumFields) throw std::runtime_error("policy bundle names an unknown field");
    }
    PolicyEntry e;
    e.env.leaf_threshold = r.u64();
    e.env.max_tree_depth = r.u64();
    e.env.max_steps = r.u64();
    e.env.theta = r.f64();
    e.env.partition_depth_limit = r.u32();
    const auto dm = r.u32();
    if (dm > 1) throw std::runtime_error("policy bundle has a bad depth mode");
    e.env.depth_mode = static_cast<DepthMode>(dm);
    e.config_hash = r.u64();
    const auto inputs = r.u32();
    std::vector<std::size_t> hidden(r.u32());
    for (auto& h : hidden) h = r.u32();
    const auto dims = r.u32();
    if (dims != subset.size() || inputs != observation_size(subset))
      throw std::runtime_error("policy bundle entry does not fit its subset");
    e.net = PolicyNet(inputs, hidden, dims);
    const auto n = r.u64();
    if (n != e.net.parameter_count()) throw std::runtime_error("policy bundle parameter count mismatch");
    for (Eigen::Index k = 0; k < e.net.params().size(); ++k) e.net.params()(k) = r.f64();
    bundle.entries.emplace(std::move(subset), std::move(e));
  }
  if (r.pos != bytes.size()) throw std::runtime_error("trailing bytes in policy bundle");
  return bundle;
}

void save_bundle(const std::string& path, const PolicyBundle& bundle) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  const auto bytes = encode_bundle(bundle);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

PolicyBundle load_bundle(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return decode_bundle(os.str());
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace mfpc
