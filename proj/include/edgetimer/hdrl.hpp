#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "edgetimer/nn.hpp"
#include "edgetimer/rewards.hpp"
#include "edgetimer/runner.hpp"

namespace edgetimer {

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct HdrlConfig {
  int hidden = 64;
  double lr = 5e-4;
  double gamma = 0.99;
  double lambda = 0.95;
  double clip = 0.2;
  double entropy_coef = 0.01;
  double max_grad_norm = 10.0;
  int ppo_epochs = 5;
  int num_minibatches = 4;
  int chunk_length = 10;       // BPTT window
  int episode_length = 200;    // T: hidden states reset every T slots
  int epochs = 50;             // M
  double mask_value = -1e9;
  bool shared_parameters = false;

  // Ablation switches.
  bool decomposed = true;             // false: one joint controller over 8 actions
  bool centralized_critic = true;     // false: critic sees only the local observation
  bool safe_masking = true;           // false: no masking and no safety net
  std::array<bool, kNumLayers> layer_learned{true, true, true};   // false: layer updates every slot
  bool skip_idle = true;

  // Evaluation draws actions from a fixed seed stream; greedy takes the argmax.
  bool greedy_eval = false;
};

void validate_hdrl(const HdrlConfig& cfg);

// ---------------------------------------------------------------- observations

int observation_size(Layer layer, const ClusterConfig& cfg);
int joint_observation_size(const ClusterConfig& cfg);

/// Local features of `edge` for `layer`, every component in [0, 1].
std::vector<double> observe(Layer layer, int edge, const SlotContext& ctx);

// ---------------------------------------------------------------- action heads

/// Replaces the hold logit (index 0) with `mask_value` when `hold_allowed`
/// is false.
std::vector<double> mask_unsafe(std::span<const double> logits, bool hold_allowed, double mask_value = -1e9);

std::vector<double> softmax(std::span<const double> logits);
/// Inverse-CDF draw from softmax(logits) with one uniform variate.
int sample_action(std::span<const double> logits, double uniform01);
int argmax_action(std::span<const double> logits);

/// Returns the default all-hold action when the edge has nothing queued and
/// nothing arriving, otherwise nullopt.
std::optional<UpdateAction> skip_if_idle(int edge, const SlotContext& ctx);

// ---------------------------------------------------------------- advantages

/// A(t) = sum_l (gamma lambda)^l delta(t+l), delta(t) = r(t) + gamma V(t+1) - V(t),
/// with V(len) = bootstrap.
std::vector<double> gae(std::span<const double> rewards, std::span<const double> values, double bootstrap,
                        double gamma, double lambda);

// ---------------------------------------------------------------- losses

struct PolicyStep {
  Eigen::VectorXi action;   // per batch column
  nn::Matrix legal;         // actions x batch, 1 = allowed
  nn::Vector old_logp;
  nn::Vector advantage;
  nn::Vector weight;        // 1 for real samples, 0 for padding
};

struct ActorBatch {
  nn::SequenceBatch seq;
  std::vector<PolicyStep> steps;
};

struct CriticBatch {
  nn::SequenceBatch seq;
  std::vector<nn::Vector> target;
  std::vector<nn::Vector> weight;
};

struct ActorLoss {
  double loss = 0.0;
  double entropy = 0.0;
  double clip_fraction = 0.0;
};

/// Clipped-ratio surrogate minus the entropy bonus, averaged over real
/// samples. Adds the gradient into `grad` when non-empty.
ActorLoss actor_loss(const nn::RecurrentNet& net, const ActorBatch& batch, double clip, double entropy_coef,
                     double mask_value, std::span<double> grad);

/// Mean of 0.5 (V - target)^2 over real samples.
double critic_loss(const nn::RecurrentNet& net, const CriticBatch& batch, std::span<double> grad);

// ---------------------------------------------------------------- controllers

struct Transition {
  std::vector<double> obs;
  std::vector<double> global_obs;
  int action = 0;
  std::vector<std::uint8_t> legal;
  double logp = 0.0;
  double value = 0.0;          // critic output (normalized scale)
  nn::Vector actor_h;          // hidden state before this step
  nn::Vector critic_h;
  double reward = 0.0;
  bool starts_segment = false; // hidden state was reset right before this step
};

struct AgentNets {
  nn::RecurrentNet actor;
  nn::RecurrentNet critic;
  nn::Adam actor_opt;
  nn::Adam critic_opt;
  nn::ValueNorm value_norm;
};

/// One Dec-POMDP controller: an actor and a critic per agent (or one shared
/// pair), hidden states and on-policy buffers.
class LayerController {
 public:
  LayerController(std::string name, int num_agents, int obs_dim, int critic_dim, int num_actions,
                  const HdrlConfig& cfg, std::mt19937_64& init_rng);

  const std::string& name() const { return name_; }
  int num_agents() const { return num_agents_; }
  int num_actions() const { return num_actions_; }
  int obs_dim() const { return obs_dim_; }
  int critic_dim() const { return critic_dim_; }

  AgentNets& nets(int agent) { return nets_[shared_ ? 0 : agent]; }
  const AgentNets& nets(int agent) const { return nets_[shared_ ? 0 : agent]; }
  std::size_t num_net_sets() const { return nets_.size(); }
  AgentNets& net_set(std::size_t k) { return nets_[k]; }
  const AgentNets& net_set(std::size_t k) const { return nets_[k]; }

  void reset_hidden();

  struct Decision {
    int action = 0;
    std::vector<double> logits;   // masked
    double value = 0.0;
  };

  /// Decentralized step: reads only `obs` and the agent's own hidden state.
  Decision act(int agent, std::span<const double> obs, std::span<const std::uint8_t> legal, bool explore,
               std::mt19937_64& rng);

  /// Training-time bookkeeping: evaluates the critic on `global_obs` and
  /// stores the transition; its reward is filled by `reward_pending`.
  void record(int agent, std::span<const double> obs, std::span<const double> global_obs, const Decision& d,
              std::span<const std::uint8_t> legal);
  void reward_pending(double reward);
  void clear_buffers();
  const std::vector<Transition>& buffer(int agent) const { return buffers_[agent]; }

  const nn::Vector& actor_hidden(int agent) const { return actor_h_[agent]; }

  struct UpdateStats {
    double actor_loss = 0.0;
    double critic_loss = 0.0;
    double entropy = 0.0;
    std::size_t samples = 0;
  };
  UpdateStats update(std::mt19937_64& rng);

 private:
  std::string name_;
  int num_agents_, obs_dim_, critic_dim_, num_actions_;
  bool shared_;
  HdrlConfig cfg_;
  std::vector<AgentNets> nets_;
  std::vector<nn::Vector> actor_h_, critic_h_;
  std::vector<std::uint8_t> segment_start_;
  std::vector<std::vector<Transition>> buffers_;
  std::vector<int> pending_;   // agents with a transition awaiting its reward
  nn::Vector last_actor_h_;
};

struct EpochCurve {
  int epoch = 0;
  std::array<double, kNumLayers> layer_reward{};   // mean per-slot layer reward
  double profit = 0.0;
  double served_ratio = 0.0;
  std::int64_t forced_updates = 0;
  std::int64_t unsafe_holds = 0;
};

/// The EdgeTimer timescale policy: three layered controllers (or one joint
/// controller) deciding update/hold per edge per layer.
class EdgeTimerPolicy : public UpdatePolicy {
 public:
  EdgeTimerPolicy(const ClusterConfig& cluster, const HdrlConfig& cfg, const RewardCoefficients& rewards,
                  std::uint64_t seed);

  std::string name() const override { return "edgetimer"; }
  void reset() override;
  void begin_slot(const SlotContext& ctx) override;
  void decide(Layer layer, const SlotContext& ctx, std::span<std::uint8_t> bits) override;
  void end_slot(const SlotContext& ctx, const SlotLedger& ledger) override;

  void set_training(bool on) { training_ = on; }
  bool training() const { return training_; }
  const HdrlConfig& config() const { return cfg_; }

  /// Mean per-slot layer rewards of the last episode.
  std::array<double, kNumLayers> mean_layer_rewards() const;

  /// PPO update of every learned controller from the last episode.
  std::vector<LayerController::UpdateStats> update();

  std::vector<LayerController*> controllers();

  void save(std::ostream& out, std::uint64_t config_hash) const;
  void load(std::istream& in, std::uint64_t config_hash);

 private:
  bool explore() const { return training_ || !cfg_.greedy_eval; }
  std::mt19937_64& rng() { return training_ ? sampling_ : eval_sampling_; }

  ClusterConfig cluster_;
  HdrlConfig cfg_;
  RewardCoefficients rewards_;
  std::uint64_t seed_;
  std::mt19937_64 sampling_;
  std::mt19937_64 eval_sampling_;   // restarted by reset(), so every rollout replays
  std::mt19937_64 minibatch_;
  std::vector<std::unique_ptr<LayerController>> layers_;   // decomposed: one per layer
  std::unique_ptr<LayerController> joint_;
  bool training_ = true;
  std::vector<std::uint8_t> idle_;
  std::vector<UpdateAction> joint_bits_;
  std::array<std::vector<std::uint8_t>, kNumLayers> acted_;
  std::array<double, kNumLayers> reward_sum_{};
  int slots_ = 0;
};

struct TrainOptions {
  std::function<void(const EpochCurve&)> on_epoch;
};

/// Runs `policy.config().epochs` epochs of rollout + update on `script`.
std::vector<EpochCurve> train(EdgeTimerPolicy& policy, const ClusterConfig& cfg, const WorkloadScript& script,
                              const RuleSet& rules, const RuleParams& rule_params, const TrainOptions& options = {});

/// Evaluation rollout with per-slot latency; replays identically for a given
/// policy seed (sampled) or always (greedy_eval).
EpisodeResult infer(EdgeTimerPolicy& policy, const ClusterConfig& cfg, const WorkloadScript& script,
                    const RuleSet& rules, const RuleParams& rule_params);

}  // namespace edgetimer
