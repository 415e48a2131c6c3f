#include "edgetimer/hdrl.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>

#include "edgetimer/rng.hpp"

namespace edgetimer {

void validate_hdrl(const HdrlConfig& c) {
  auto bad = [](const std::string& m) { throw std::invalid_argument("hdrl: " + m); };
  if (c.hidden <= 0) bad("hidden must be positive");
  if (!(c.lr > 0.0)) bad("lr must be positive");
  if (c.gamma < 0.0 || c.gamma > 1.0) bad("gamma must be in [0,1]");
  if (c.lambda < 0.0 || c.lambda > 1.0) bad("lambda must be in [0,1]");
  if (!(c.clip > 0.0)) bad("clip must be positive");
  if (c.entropy_coef < 0.0) bad("entropy_coef must be non-negative");
  if (!(c.max_grad_norm > 0.0)) bad("max_grad_norm must be positive");
  if (c.ppo_epochs < 1) bad("ppo_epochs must be at least 1");
  if (c.num_minibatches < 1) bad("num_minibatches must be at least 1");
  if (c.chunk_length < 1) bad("chunk_length must be at least 1");
  if (c.episode_length < 1) bad("episode_length must be at least 1");
  if (c.epochs < 0) bad("epochs must be non-negative");
  if (!(c.mask_value < 0.0)) bad("mask_value must be negative");
}

// ---------------------------------------------------------------- observations

namespace {

double work_norm(const ClusterConfig& cfg) { return cfg.edge_cpu * 10.0; }

double clip01(double v) { return std::clamp(v, 0.0, 1.0); }

double violation_ratio(const SlotContext& ctx, int edge) {
  const auto& q = ctx.state.queues[edge];
  if (q.empty()) return 0.0;
  int late = 0;
  for (const auto& a : q)
    if (a.elapsed + 1 > a.task.delay_budget) ++late;
  return static_cast<double>(late) / static_cast<double>(q.size());
}

double available_cpu(const SlotContext& ctx, int edge) {
  return clip01(1.0 - ctx.state.cpu_used[edge] / ctx.cfg.edge_cpu);
}

}  // namespace

int observation_size(Layer layer, const ClusterConfig& cfg) {
  switch (layer) {
    case Layer::Placement:
      return 2 + 2 * cfg.num_services;
    case Layer::Offloading:
      return 3;
    case Layer::Allocation:
      return 4;
  }
  return 0;
}

int joint_observation_size(const ClusterConfig& cfg) {
  int n = 0;
  for (Layer l : kLayers) n += observation_size(l, cfg);
  return n;
}

std::vector<double> observe(Layer layer, int edge, const SlotContext& ctx) {
  const auto& cfg = ctx.cfg;
  const int ns = cfg.num_services;
  const auto& x = ctx.executed.placement;
  std::vector<double> o;
  o.reserve(static_cast<std::size_t>(observation_size(layer, cfg)));
  switch (layer) {
    case Layer::Placement: {
      const double total = ctx.demand.edge_total(edge);
      double covered = 0.0;
      double mem = 0.0;
      for (int s = 0; s < ns; ++s) {
        bool anywhere = false;
        for (int j = 0; j < cfg.num_edges && !anywhere; ++j) anywhere = x(j, s) != 0;
        if (anywhere) covered += ctx.demand.demand(edge, s);
        if (x(edge, s)) mem += cfg.service_mem_footprint[s];
      }
      o.push_back(total > 0.0 ? clip01(covered / total) : 0.0);
      o.push_back(clip01(1.0 - mem / cfg.edge_mem));
      for (int s = 0; s < ns; ++s) o.push_back(x(edge, s) ? 1.0 : 0.0);
      for (int s = 0; s < ns; ++s) o.push_back(total > 0.0 ? clip01(ctx.demand.demand(edge, s) / total) : 0.0);
      break;
    }
    case Layer::Offloading: {
      double waiting = 0.0;
      for (const auto& a : ctx.state.queues[edge])
        if (a.awaiting_dispatch) waiting += a.remaining;
      for (const auto& t : ctx.arrivals)
        if (t.origin_edge == edge) waiting += t.workload;
      o.push_back(violation_ratio(ctx, edge));
      o.push_back(available_cpu(ctx, edge));
      o.push_back(clip01(waiting / work_norm(cfg)));
      break;
    }
    case Layer::Allocation: {
      Grid<double> local;
      const Grid<double>* demand = ctx.local_demand;
      if (demand == nullptr) {
        local = projected_local_demand(cfg, ctx.state, x, ctx.executed.route, ctx.arrivals);
        demand = &local;
      }
      std::vector<double> rates;
      double waiting = 0.0;
      for (int s = 0; s < ns; ++s) {
        const double d = (*demand)(edge, s);
        if (d <= 0.0) continue;
        waiting += d;
        rates.push_back(std::min(1.0, ctx.executed.allocation(edge, s) / d));
      }
      o.push_back(violation_ratio(ctx, edge));
      o.push_back(clip01(4.0 * population_variance(rates)));
      o.push_back(available_cpu(ctx, edge));
      o.push_back(clip01(waiting / work_norm(cfg)));
      break;
    }
  }
  return o;
}

// ---------------------------------------------------------------- action heads

std::vector<double> mask_unsafe(std::span<const double> logits, bool hold_allowed, double mask_value) {
  std::vector<double> out(logits.begin(), logits.end());
  if (!hold_allowed && !out.empty()) out[0] = mask_value;
  return out;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - m);
    sum += p[k];
  }
  for (double& v : p) v /= sum;
  return p;
}

int sample_action(std::span<const double> logits, double uniform01) {
  const auto p = softmax(logits);
  double acc = 0.0;
  int last = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (p[k] <= 0.0) continue;
    last = static_cast<int>(k);
    acc += p[k];
    if (uniform01 < acc) return last;
  }
  return last;
}

int argmax_action(std::span<const double> logits) {
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

std::optional<UpdateAction> skip_if_idle(int edge, const SlotContext& ctx) {
  if (ctx.edge_idle(edge)) return UpdateAction::all(false);
  return std::nullopt;
}

// ---------------------------------------------------------------- advantages

std::vector<double> gae(std::span<const double> rewards, std::span<const double> values, double bootstrap,
                        double gamma, double lambda) {
  if (rewards.size() != values.size()) throw std::invalid_argument("gae: rewards and values differ in length");
  std::vector<double> adv(rewards.size());
  double carry = 0.0;
  for (std::size_t k = rewards.size(); k-- > 0;) {
    const double next = k + 1 == rewards.size() ? bootstrap : values[k + 1];
    const double delta = rewards[k] + gamma * next - values[k];
    carry = delta + gamma * lambda * carry;
    adv[k] = carry;
  }
  return adv;
}

// ---------------------------------------------------------------- losses

ActorLoss actor_loss(const nn::RecurrentNet& net, const ActorBatch& batch, double clip, double entropy_coef,
                     double mask_value, std::span<double> grad) {
  const bool want_grad = !grad.empty();
  nn::RecurrentNet::Cache cache;
  const auto out = net.forward(batch.seq, want_grad ? &cache : nullptr);
  const int K = net.output_size();
  const int B = batch.seq.batch();
  double total_w = 0.0;
  for (const auto& st : batch.steps) total_w += st.weight.sum();
  ActorLoss res;
  if (total_w <= 0.0) return res;

  std::vector<nn::Matrix> d_out;
  if (want_grad) d_out.assign(out.size(), nn::Matrix::Zero(K, B));
  std::vector<double> l(static_cast<std::size_t>(K)), logp(static_cast<std::size_t>(K));
  double clipped = 0.0;
  for (std::size_t t = 0; t < out.size(); ++t) {
    const auto& st = batch.steps[t];
    for (int b = 0; b < B; ++b) {
      const double w = st.weight(b);
      if (w <= 0.0) continue;
      double m = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < K; ++j) {
        l[j] = st.legal(j, b) > 0.0 ? out[t](j, b) : mask_value;
        m = std::max(m, l[j]);
      }
      double sum = 0.0;
      for (int j = 0; j < K; ++j) sum += std::exp(l[j] - m);
      const double lse = m + std::log(sum);
      double entropy = 0.0;
      for (int j = 0; j < K; ++j) {
        logp[j] = l[j] - lse;
        if (st.legal(j, b) > 0.0) entropy -= std::exp(logp[j]) * logp[j];
      }
      const int a = st.action(b);
      const double A = st.advantage(b);
      const double ratio = std::exp(logp[a] - st.old_logp(b));
      const double s1 = ratio * A;
      const double s2 = std::clamp(ratio, 1.0 - clip, 1.0 + clip) * A;
      const double scale = w / total_w;
      res.loss += scale * (-std::min(s1, s2) - entropy_coef * entropy);
      res.entropy += scale * entropy;
      if (std::abs(ratio - 1.0) > clip) clipped += scale;
      if (!want_grad) continue;
      const double g_logp = s1 <= s2 ? -ratio * A * scale : 0.0;
      for (int j = 0; j < K; ++j) {
        if (st.legal(j, b) <= 0.0) continue;
        const double p = std::exp(logp[j]);
        double g = g_logp * ((j == a ? 1.0 : 0.0) - p);
        g += entropy_coef * scale * p * (logp[j] + entropy);
        d_out[t](j, b) = g;
      }
    }
  }
  res.clip_fraction = clipped;
  if (want_grad) net.backward(batch.seq, cache, d_out, grad);
  return res;
}

double critic_loss(const nn::RecurrentNet& net, const CriticBatch& batch, std::span<double> grad) {
  const bool want_grad = !grad.empty();
  nn::RecurrentNet::Cache cache;
  const auto out = net.forward(batch.seq, want_grad ? &cache : nullptr);
  const int B = batch.seq.batch();
  double total_w = 0.0;
  for (const auto& w : batch.weight) total_w += w.sum();
  if (total_w <= 0.0) return 0.0;
  std::vector<nn::Matrix> d_out;
  if (want_grad) d_out.assign(out.size(), nn::Matrix::Zero(1, B));
  double loss = 0.0;
  for (std::size_t t = 0; t < out.size(); ++t) {
    for (int b = 0; b < B; ++b) {
      const double w = batch.weight[t](b);
      if (w <= 0.0) continue;
      const double err = out[t](0, b) - batch.target[t](b);
      loss += w * 0.5 * err * err / total_w;
      if (want_grad) d_out[t](0, b) = w * err / total_w;
    }
  }
  if (want_grad) net.backward(batch.seq, cache, d_out, grad);
  return loss;
}

// ---------------------------------------------------------------- controllers

LayerController::LayerController(std::string name, int num_agents, int obs_dim, int critic_dim, int num_actions,
                                 const HdrlConfig& cfg, std::mt19937_64& init_rng)
    : name_(std::move(name)),
      num_agents_(num_agents),
      obs_dim_(obs_dim),
      critic_dim_(critic_dim),
      num_actions_(num_actions),
      shared_(cfg.shared_parameters),
      cfg_(cfg) {
  const int sets = shared_ ? 1 : num_agents_;
  for (int k = 0; k < sets; ++k) {
    AgentNets n;
    n.actor = nn::RecurrentNet(obs_dim_, cfg.hidden, num_actions_);
    n.critic = nn::RecurrentNet(critic_dim_, cfg.hidden, 1);
    // Small policy head: near-uniform initial action distribution.
    n.actor.init(init_rng, 0.01);
    n.critic.init(init_rng, 1.0);
    n.actor_opt = nn::Adam(n.actor.num_params(), cfg.lr);
    n.critic_opt = nn::Adam(n.critic.num_params(), cfg.lr);
    nets_.push_back(std::move(n));
  }
  buffers_.resize(static_cast<std::size_t>(num_agents_));
  reset_hidden();
}

void LayerController::reset_hidden() {
  actor_h_.assign(static_cast<std::size_t>(num_agents_), nn::Vector::Zero(cfg_.hidden));
  critic_h_.assign(static_cast<std::size_t>(num_agents_), nn::Vector::Zero(cfg_.hidden));
  segment_start_.assign(static_cast<std::size_t>(num_agents_), 1);
}

LayerController::Decision LayerController::act(int agent, std::span<const double> obs,
                                               std::span<const std::uint8_t> legal, bool explore,
                                               std::mt19937_64& rng) {
  const nn::Vector x = Eigen::Map<const nn::Vector>(obs.data(), static_cast<Eigen::Index>(obs.size()));
  last_actor_h_ = actor_h_[agent];
  const nn::Vector raw = nets(agent).actor.step(x, actor_h_[agent]);
  Decision d;
  d.logits.resize(static_cast<std::size_t>(num_actions_));
  for (int j = 0; j < num_actions_; ++j) {
    if (!std::isfinite(raw(j))) throw TrainingDiverged("non-finite logits from controller " + name_);
    d.logits[j] = legal[j] ? raw(j) : cfg_.mask_value;
  }
  if (explore) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    d.action = sample_action(d.logits, u(rng));
  } else {
    d.action = argmax_action(d.logits);
  }
  return d;
}

void LayerController::record(int agent, std::span<const double> obs, std::span<const double> global_obs,
                             const Decision& d, std::span<const std::uint8_t> legal) {
  Transition tr;
  tr.obs.assign(obs.begin(), obs.end());
  tr.global_obs.assign(global_obs.begin(), global_obs.end());
  tr.action = d.action;
  tr.legal.assign(legal.begin(), legal.end());
  const double lse = [&] {
    const double m = *std::max_element(d.logits.begin(), d.logits.end());
    double s = 0.0;
    for (double v : d.logits) s += std::exp(v - m);
    return m + std::log(s);
  }();
  tr.logp = d.logits[d.action] - lse;
  tr.actor_h = last_actor_h_;
  tr.critic_h = critic_h_[agent];
  const nn::Vector g = Eigen::Map<const nn::Vector>(global_obs.data(), static_cast<Eigen::Index>(global_obs.size()));
  tr.value = nets(agent).critic.step(g, critic_h_[agent])(0);
  tr.starts_segment = segment_start_[agent] != 0;
  segment_start_[agent] = 0;
  buffers_[agent].push_back(std::move(tr));
  pending_.push_back(agent);
}

void LayerController::reward_pending(double reward) {
  for (int a : pending_) buffers_[a].back().reward = reward;
  pending_.clear();
}

void LayerController::clear_buffers() {
  for (auto& b : buffers_) b.clear();
  pending_.clear();
}

namespace {

struct Sample {
  int agent;
  std::size_t index;
  double advantage;
  double target;   // normalized return
};

// A run of consecutive transitions replayed from a stored hidden state.
struct Chunk {
  int agent;
  std::size_t begin, end;
};

}  // namespace

LayerController::UpdateStats LayerController::update(std::mt19937_64& rng) {
  UpdateStats stats;
  std::vector<std::vector<double>> adv(static_cast<std::size_t>(num_agents_));
  std::vector<std::vector<double>> ret(static_cast<std::size_t>(num_agents_));
  for (int a = 0; a < num_agents_; ++a) {
    const auto& buf = buffers_[a];
    if (buf.empty()) continue;
    const auto& vn = nets(a).value_norm;
    std::vector<double> r, v;
    for (const auto& tr : buf) {
      r.push_back(tr.reward);
      v.push_back(vn.denormalize(tr.value));
    }
    adv[a] = gae(r, v, v.back(), cfg_.gamma, cfg_.lambda);
    ret[a].resize(buf.size());
    for (std::size_t k = 0; k < buf.size(); ++k) ret[a][k] = adv[a][k] + v[k];
    stats.samples += buf.size();
  }
  if (stats.samples == 0) return stats;

  // Advantage normalization over the whole controller batch.
  {
    double mean = 0.0, sq = 0.0;
    for (const auto& v : adv)
      for (double x : v) mean += x;
    mean /= static_cast<double>(stats.samples);
    for (const auto& v : adv)
      for (double x : v) sq += (x - mean) * (x - mean);
    const double sd = std::sqrt(sq / static_cast<double>(stats.samples)) + 1e-5;
    for (auto& v : adv)
      for (double& x : v) x = (x - mean) / sd;
  }

  const int sets = static_cast<int>(nets_.size());
  for (int k = 0; k < sets; ++k) {
    std::vector<int> agents;
    for (int a = 0; a < num_agents_; ++a)
      if ((shared_ || a == k) && !buffers_[a].empty()) agents.push_back(a);
    if (agents.empty()) continue;
    AgentNets& net = nets_[k];

    std::vector<double> all_returns;
    for (int a : agents) all_returns.insert(all_returns.end(), ret[a].begin(), ret[a].end());
    net.value_norm.update(all_returns);

    std::vector<Chunk> chunks;
    for (int a : agents) {
      const auto& buf = buffers_[a];
      std::size_t begin = 0;
      for (std::size_t i = 1; i <= buf.size(); ++i) {
        if (i == buf.size() || buf[i].starts_segment || i - begin == static_cast<std::size_t>(cfg_.chunk_length)) {
          chunks.push_back({a, begin, i});
          begin = i;
        }
      }
    }

    const int L = cfg_.chunk_length;
    auto build = [&](const std::vector<std::size_t>& ids, ActorBatch& ab, CriticBatch& cb) {
      const int B = static_cast<int>(ids.size());
      ab.seq.inputs.assign(static_cast<std::size_t>(L), nn::Matrix::Zero(obs_dim_, B));
      ab.seq.h0 = nn::Matrix::Zero(cfg_.hidden, B);
      cb.seq.inputs.assign(static_cast<std::size_t>(L), nn::Matrix::Zero(critic_dim_, B));
      cb.seq.h0 = nn::Matrix::Zero(cfg_.hidden, B);
      ab.steps.assign(static_cast<std::size_t>(L), PolicyStep{});
      cb.target.assign(static_cast<std::size_t>(L), nn::Vector::Zero(B));
      cb.weight.assign(static_cast<std::size_t>(L), nn::Vector::Zero(B));
      for (auto& st : ab.steps) {
        st.action = Eigen::VectorXi::Zero(B);
        st.legal = nn::Matrix::Ones(num_actions_, B);
        st.old_logp = nn::Vector::Zero(B);
        st.advantage = nn::Vector::Zero(B);
        st.weight = nn::Vector::Zero(B);
      }
      for (int b = 0; b < B; ++b) {
        const Chunk& c = chunks[ids[b]];
        const auto& buf = buffers_[c.agent];
        ab.seq.h0.col(b) = buf[c.begin].actor_h;
        cb.seq.h0.col(b) = buf[c.begin].critic_h;
        for (std::size_t i = c.begin; i < c.end; ++i) {
          const int t = static_cast<int>(i - c.begin);
          const auto& tr = buf[i];
          for (int f = 0; f < obs_dim_; ++f) ab.seq.inputs[t](f, b) = tr.obs[f];
          for (int f = 0; f < critic_dim_; ++f) cb.seq.inputs[t](f, b) = tr.global_obs[f];
          auto& st = ab.steps[t];
          st.action(b) = tr.action;
          for (int j = 0; j < num_actions_; ++j) st.legal(j, b) = tr.legal[j] ? 1.0 : 0.0;
          st.old_logp(b) = tr.logp;
          st.advantage(b) = adv[c.agent][i];
          st.weight(b) = 1.0;
          cb.target[t](b) = net.value_norm.normalize(ret[c.agent][i]);
          cb.weight[t](b) = 1.0;
        }
      }
    };

    std::vector<std::size_t> order(chunks.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t mb = std::min<std::size_t>(static_cast<std::size_t>(cfg_.num_minibatches), chunks.size());
    std::vector<double> ga(net.actor.num_params()), gc(net.critic.num_params());
    int steps = 0;
    for (int epoch = 0; epoch < cfg_.ppo_epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t m = 0; m < mb; ++m) {
        const std::size_t lo = m * order.size() / mb;
        const std::size_t hi = (m + 1) * order.size() / mb;
        std::vector<std::size_t> ids(order.begin() + static_cast<std::ptrdiff_t>(lo),
                                     order.begin() + static_cast<std::ptrdiff_t>(hi));
        ActorBatch ab;
        CriticBatch cb;
        build(ids, ab, cb);

        std::fill(ga.begin(), ga.end(), 0.0);
        const auto al = actor_loss(net.actor, ab, cfg_.clip, cfg_.entropy_coef, cfg_.mask_value, ga);
        std::fill(gc.begin(), gc.end(), 0.0);
        const double cl = critic_loss(net.critic, cb, gc);
        const double na = nn::clip_grad_norm(ga, cfg_.max_grad_norm);
        const double nc = nn::clip_grad_norm(gc, cfg_.max_grad_norm);
        if (!std::isfinite(na) || !std::isfinite(nc) || !std::isfinite(al.loss) || !std::isfinite(cl)) {
          throw TrainingDiverged("non-finite gradient in controller " + name_);
        }
        net.actor_opt.step(net.actor.params(), ga);
        net.critic_opt.step(net.critic.params(), gc);
        stats.actor_loss += al.loss;
        stats.critic_loss += cl;
        stats.entropy += al.entropy;
        ++steps;
      }
    }
    if (steps > 0) {
      stats.actor_loss /= steps;
      stats.critic_loss /= steps;
      stats.entropy /= steps;
    }
  }
  return stats;
}

// ---------------------------------------------------------------- EdgeTimer policy

EdgeTimerPolicy::EdgeTimerPolicy(const ClusterConfig& cluster, const HdrlConfig& cfg,
                                 const RewardCoefficients& rewards, std::uint64_t seed)
    : cluster_(cluster),
      cfg_(cfg),
      rewards_(rewards),
      seed_(seed),
      sampling_(make_stream(seed, "sampling")),
      eval_sampling_(make_stream(seed, "eval-sampling")),
      minibatch_(make_stream(seed, "minibatch")) {
  validate_hdrl(cfg_);
  const int n = cluster_.num_edges;
  auto init = make_stream(seed, "init");
  if (cfg_.decomposed) {
    for (Layer l : kLayers) {
      if (!cfg_.layer_learned[index_of(l)]) {
        layers_.push_back(nullptr);
        continue;
      }
      const int obs = observation_size(l, cluster_);
      layers_.push_back(std::make_unique<LayerController>(std::string(layer_name(l)), n, obs,
                                                          cfg_.centralized_critic ? n * obs : obs, 2, cfg_, init));
    }
  } else {
    const int obs = joint_observation_size(cluster_);
    joint_ = std::make_unique<LayerController>("joint", n, obs, cfg_.centralized_critic ? n * obs : obs,
                                               1 << kNumLayers, cfg_, init);
  }
  idle_.assign(static_cast<std::size_t>(n), 0);
  joint_bits_.assign(static_cast<std::size_t>(n), UpdateAction{});
}

std::vector<LayerController*> EdgeTimerPolicy::controllers() {
  std::vector<LayerController*> out;
  for (auto& l : layers_)
    if (l) out.push_back(l.get());
  if (joint_) out.push_back(joint_.get());
  return out;
}

void EdgeTimerPolicy::reset() {
  for (auto* c : controllers()) {
    c->reset_hidden();
    c->clear_buffers();
  }
  reward_sum_.fill(0.0);
  slots_ = 0;
  eval_sampling_ = make_stream(seed_, "eval-sampling");
}

void EdgeTimerPolicy::begin_slot(const SlotContext& ctx) {
  const int n = cluster_.num_edges;
  if (ctx.slot % cfg_.episode_length == 0) {
    for (auto* c : controllers()) c->reset_hidden();
  }
  for (int i = 0; i < n; ++i) idle_[i] = cfg_.skip_idle && skip_if_idle(i, ctx).has_value();
  if (!joint_) return;

  std::vector<std::vector<double>> obs(static_cast<std::size_t>(n));
  std::vector<double> global;
  for (int i = 0; i < n; ++i) {
    for (Layer l : kLayers) {
      const auto o = observe(l, i, ctx);
      obs[i].insert(obs[i].end(), o.begin(), o.end());
    }
    global.insert(global.end(), obs[i].begin(), obs[i].end());
  }
  const int k = joint_->num_actions();
  std::vector<std::uint8_t> legal(static_cast<std::size_t>(k), 1);
  if (!ctx.has_previous()) {
    // Only the all-update action is available before any decision exists.
    std::fill(legal.begin(), legal.end() - 1, 0);
  }
  for (int i = 0; i < n; ++i) {
    if (idle_[i]) {
      joint_bits_[i] = UpdateAction::all(false);
      continue;
    }
    const auto d = joint_->act(i, obs[i], legal, explore(), rng());
    if (training_) joint_->record(i, obs[i], cfg_.centralized_critic ? std::span<const double>(global) : obs[i], d,
                                  legal);
    for (Layer l : kLayers) joint_bits_[i].set(l, (d.action >> index_of(l)) & 1);
  }
}

void EdgeTimerPolicy::decide(Layer layer, const SlotContext& ctx, std::span<std::uint8_t> bits) {
  const int n = cluster_.num_edges;
  if (joint_) {
    for (int i = 0; i < n; ++i) bits[i] = joint_bits_[i][layer] ? 1 : 0;
    return;
  }
  LayerController* ctrl = layers_[index_of(layer)].get();
  if (ctrl == nullptr) {
    std::fill(bits.begin(), bits.end(), std::uint8_t{1});
    return;
  }
  std::vector<std::vector<double>> obs(static_cast<std::size_t>(n));
  std::vector<double> global;
  for (int i = 0; i < n; ++i) {
    obs[i] = observe(layer, i, ctx);
    if (training_ && cfg_.centralized_critic) global.insert(global.end(), obs[i].begin(), obs[i].end());
  }
  std::array<std::uint8_t, 2> legal{1, 1};
  for (int i = 0; i < n; ++i) {
    if (idle_[i]) {
      // No transition is recorded, but a hold that would strand tasks is still refused.
      bits[i] = cfg_.safe_masking && !hold_safe(layer, i, ctx) ? 1 : 0;
      continue;
    }
    legal[0] = (!cfg_.safe_masking && ctx.has_previous()) || hold_safe(layer, i, ctx) ? 1 : 0;
    const auto d = ctrl->act(i, obs[i], legal, explore(), rng());
    if (training_) {
      ctrl->record(i, obs[i], cfg_.centralized_critic ? std::span<const double>(global) : obs[i], d, legal);
    }
    bits[i] = static_cast<std::uint8_t>(d.action);
  }
}

void EdgeTimerPolicy::end_slot(const SlotContext&, const SlotLedger& ledger) {
  for (Layer l : kLayers) {
    const double r = layer_reward(l, ledger, rewards_);
    reward_sum_[index_of(l)] += r;
    if (auto* c = layers_.empty() ? nullptr : layers_[index_of(l)].get()) c->reward_pending(r);
  }
  if (joint_) joint_->reward_pending(ledger.total_profit());
  ++slots_;
}

std::array<double, kNumLayers> EdgeTimerPolicy::mean_layer_rewards() const {
  std::array<double, kNumLayers> out{};
  if (slots_ == 0) return out;
  for (int k = 0; k < kNumLayers; ++k) out[k] = reward_sum_[k] / slots_;
  return out;
}

std::vector<LayerController::UpdateStats> EdgeTimerPolicy::update() {
  std::vector<LayerController::UpdateStats> out;
  for (auto* c : controllers()) out.push_back(c->update(minibatch_));
  return out;
}

// ---------------------------------------------------------------- checkpoints

namespace {

constexpr char kMagic[8] = {'E', 'T', 'C', 'K', 'P', 'T', '0', '1'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw CheckpointError("checkpoint is truncated");
  return v;
}

void put_params(std::ostream& out, std::span<const double> p) {
  put<std::uint64_t>(out, p.size());
  out.write(reinterpret_cast<const char*>(p.data()), static_cast<std::streamsize>(p.size() * sizeof(double)));
}

void get_params(std::istream& in, std::span<double> p, const std::string& what) {
  if (get<std::uint64_t>(in) != p.size()) throw CheckpointError(what + " has a different parameter count");
  in.read(reinterpret_cast<char*>(p.data()), static_cast<std::streamsize>(p.size() * sizeof(double)));
  if (!in) throw CheckpointError("checkpoint is truncated");
}

}  // namespace

void EdgeTimerPolicy::save(std::ostream& out, std::uint64_t config_hash) const {
  out.write(kMagic, sizeof(kMagic));
  put(out, kVersion);
  put(out, config_hash);
  auto self = const_cast<EdgeTimerPolicy*>(this)->controllers();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(self.size()));
  for (const LayerController* c : self) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(c->name().size()));
    out.write(c->name().data(), static_cast<std::streamsize>(c->name().size()));
    put<std::int32_t>(out, c->num_agents());
    put<std::int32_t>(out, c->obs_dim());
    put<std::int32_t>(out, c->critic_dim());
    put<std::int32_t>(out, c->num_actions());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(c->num_net_sets()));
    for (std::size_t k = 0; k < c->num_net_sets(); ++k) {
      const auto& n = c->net_set(k);
      put_params(out, n.actor.params());
      put_params(out, n.critic.params());
      put(out, n.value_norm.running_mean);
      put(out, n.value_norm.running_sq);
      put(out, n.value_norm.debias);
    }
  }
  if (!out) throw CheckpointError("failed to write checkpoint");
}

void EdgeTimerPolicy::load(std::istream& in, std::uint64_t config_hash) {
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) throw CheckpointError("not an edgetimer checkpoint");
  if (get<std::uint32_t>(in) != kVersion) throw CheckpointError("unsupported checkpoint version");
  if (get<std::uint64_t>(in) != config_hash) throw CheckpointError("checkpoint was written for a different config");
  auto self = controllers();
  if (get<std::uint32_t>(in) != self.size()) throw CheckpointError("checkpoint has a different controller layout");
  for (LayerController* c : self) {
    const auto len = get<std::uint32_t>(in);
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (!in || name != c->name()) throw CheckpointError("checkpoint controller order differs");
    if (get<std::int32_t>(in) != c->num_agents() || get<std::int32_t>(in) != c->obs_dim() ||
        get<std::int32_t>(in) != c->critic_dim() || get<std::int32_t>(in) != c->num_actions() ||
        get<std::uint32_t>(in) != c->num_net_sets()) {
      throw CheckpointError("checkpoint controller " + name + " has different dimensions");
    }
    for (std::size_t k = 0; k < c->num_net_sets(); ++k) {
      auto& n = c->net_set(k);
      get_params(in, n.actor.params(), name + " actor");
      get_params(in, n.critic.params(), name + " critic");
      n.value_norm.running_mean = get<double>(in);
      n.value_norm.running_sq = get<double>(in);
      n.value_norm.debias = get<double>(in);
    }
  }
}

// ---------------------------------------------------------------- train / infer

std::vector<EpochCurve> train(EdgeTimerPolicy& policy, const ClusterConfig& cfg, const WorkloadScript& script,
                              const RuleSet& rules, const RuleParams& rule_params, const TrainOptions& options) {
  std::vector<EpochCurve> curves;
  const RunOptions run{.safety_net = policy.config().safe_masking, .keep_ledgers = false};
  for (int epoch = 0; epoch < policy.config().epochs; ++epoch) {
    policy.set_training(true);
    const auto res = run_episode(cfg, script, rules, rule_params, policy, run);
    if (!std::isfinite(res.total_profit)) {
      throw TrainingDiverged("profit became non-finite in epoch " + std::to_string(epoch));
    }
    EpochCurve c;
    c.epoch = epoch;
    c.layer_reward = policy.mean_layer_rewards();
    c.profit = res.total_profit;
    c.served_ratio = res.arrived > 0.0 ? res.served / res.arrived : 0.0;
    c.forced_updates = res.forced_updates;
    c.unsafe_holds = res.unsafe_holds;
    policy.update();
    curves.push_back(c);
    if (options.on_epoch) options.on_epoch(c);
  }
  policy.set_training(false);
  return curves;
}

EpisodeResult infer(EdgeTimerPolicy& policy, const ClusterConfig& cfg, const WorkloadScript& script,
                    const RuleSet& rules, const RuleParams& rule_params) {
  const bool was = policy.training();
  policy.set_training(false);
  const RunOptions run{.safety_net = policy.config().safe_masking, .keep_ledgers = true};
  auto res = run_episode(cfg, script, rules, rule_params, policy, run);
  policy.set_training(was);
  return res;
}

}  // namespace edgetimer
