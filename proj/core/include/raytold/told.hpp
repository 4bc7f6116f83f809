#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "raytold/common.hpp"
#include "raytold/env.hpp"
#include "raytold/nnet.hpp"

namespace raytold::told {

/// Coefficients of the combined objective: reward, value, policy, latent consistency.
struct LossWeights {
    double reward = 1.0;
    double value = 0.5;
    double policy = 1.0;
    double latent = 2.0;
};

struct ToldConfig {
    int obs_dim = 186;
    int action_dim = 2;
    int latent_dim = 128;
    std::vector<int> encoder_hidden{256, 256};
    std::vector<int> dynamics_hidden{256, 256};
    std::vector<int> reward_hidden{256};
    std::vector<int> value_hidden{256, 256};
    std::vector<int> policy_hidden{256, 256};
    nnet::Activation activation = nnet::Activation::Elu;

    // The reward and value heads regress `scale * net(.)`, keeping raw outputs O(1) while
    // returns reach the hundreds.
    double reward_scale = 10.0;
    double value_scale = 100.0;

    LossWeights weights;
    int unroll = 5;        // T
    double rho = 0.9;      // per-step loss decay
    double gamma = 0.99;
    double tau = 0.01;     // target value EMA rate
    int batch_size = 256;
    double learning_rate = 1e-4;
    std::size_t buffer_capacity = 50000;

    void validate() const;
    nnet::MlpSpec encoder_spec() const;
    nnet::MlpSpec dynamics_spec() const;
    nnet::MlpSpec reward_spec() const;
    nnet::MlpSpec value_spec() const;
    nnet::MlpSpec policy_spec() const;
};

/// Encoder, latent dynamics, reward predictor, value function, policy prior and the EMA target
/// copy of the value function.
struct ToldModel {
    ToldConfig config;
    nnet::ParamSet encoder;
    nnet::ParamSet dynamics;
    nnet::ParamSet reward;
    nnet::ParamSet value;
    nnet::ParamSet policy;
    nnet::ParamSet target_value;

    static ToldModel create(const ToldConfig& config, std::uint64_t seed);

    std::vector<nnet::NamedNetwork> networks() const;
    /// Throws CheckpointError when a network is missing or its shape disagrees with `config`.
    static ToldModel from_networks(const ToldConfig& config, const std::vector<nnet::NamedNetwork>& nets);

    void save(const std::filesystem::path& path) const;
    static ToldModel load(const std::filesystem::path& path, const ToldConfig& config);
};

using LatentState = std::vector<double>;
using nnet::Matrix;

LatentState encode(const ToldModel& model, std::span<const double> observation);
LatentState latent_step(const ToldModel& model, std::span<const double> z, const NormAction& a);
double predict_reward(const ToldModel& model, std::span<const double> z, const NormAction& a);
double q_value(const ToldModel& model, std::span<const double> z, const NormAction& a, bool use_target);
NormAction policy_mean(const ToldModel& model, std::span<const double> z);
/// Tanh mean plus N(0, std^2) per axis, re-clipped to [-1, 1]^2.
NormAction policy_action(const ToldModel& model, std::span<const double> z, double exploration_std, Rng& rng);

/// Greedy policy unrolled through the latent dynamics from encode(observation).
std::vector<NormAction> latent_policy_rollout(const ToldModel& model, std::span<const double> observation, int horizon);

/// Q(z, pi(z)) with z = encode(x), one value per observation column; uses the online value net.
Eigen::VectorXd terminal_values(const ToldModel& model, const Matrix& observations);

/// Encodes observation columns into latent columns.
Matrix encode_batch(const ToldModel& model, const Matrix& observations);

struct Transition {
    std::vector<double> obs;
    NormAction action{};
    double reward = 0.0;
    std::vector<double> next_obs;
    bool done = false;
};

/// T consecutive transitions of B sub-sequences, laid out column-per-sample.
struct Batch {
    std::vector<Matrix> obs;          // T + 1 entries, obs_dim x B
    std::vector<Matrix> actions;      // T entries, action_dim x B
    std::vector<Eigen::RowVectorXd> rewards;  // T entries
    std::vector<Eigen::RowVectorXd> not_done; // T entries, 1 - done
    int size() const { return obs.empty() ? 0 : static_cast<int>(obs.front().cols()); }
    int length() const { return static_cast<int>(actions.size()); }
};

/// Fixed-capacity ring buffer that remembers episode membership so sampled windows never cross
/// an episode boundary.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    /// A transition with `done` closes the current episode.
    void push(Transition t);
    /// Closes the current episode without a terminal flag (time-limit truncation).
    void end_episode();

    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }
    /// Oldest-first logical indexing.
    const Transition& at(std::size_t i) const;
    std::uint64_t episode_of(std::size_t i) const;

    /// Logical start indices of windows of `length` transitions inside a single episode.
    const std::vector<std::size_t>& valid_starts(int length) const;

    /// Uniform sampling with replacement over valid windows. Throws std::runtime_error when no
    /// window of `length` transitions exists.
    Batch sample(int batch_size, int length, Rng& rng) const;

private:
    struct Slot {
        Transition t;
        std::uint64_t episode = 0;
    };
    std::size_t physical(std::size_t logical) const { return (head_ + logical) % capacity_; }

    std::size_t capacity_;
    std::vector<Slot> slots_;
    std::size_t head_ = 0;
    std::size_t size_ = 0;
    std::uint64_t episode_ = 0;
    std::uint64_t version_ = 0;

    mutable std::vector<std::size_t> starts_;
    mutable std::uint64_t starts_version_ = ~0ull;
    mutable int starts_length_ = -1;
};

struct LossReport {
    double reward = 0.0;
    double value = 0.0;
    double policy = 0.0;
    double latent = 0.0;
    double total = 0.0;
};

/// Flat parameter gradients of the combined loss, one buffer per trained network.
struct GradientSet {
    std::vector<double> encoder;
    std::vector<double> dynamics;
    std::vector<double> reward;
    std::vector<double> value;
    std::vector<double> policy;

    static GradientSet zeros_like(const ToldModel& model);
};

/// Combined loss over a batch and its exact gradients under the stop-gradient rules: value
/// targets and latent targets are detached, and the policy term only reaches the policy.
LossReport compute_loss(const ToldModel& model, const Batch& batch, GradientSet* grads);

/// Owns the online model and one Adam state per network.
class ToldTrainer {
public:
    explicit ToldTrainer(ToldModel model);

    /// Samples a batch, applies one Adam step per network, then moves the target value net.
    LossReport train_step(const ReplayBuffer& buffer, Rng& rng);
    LossReport update(const Batch& batch);

    const ToldModel& model() const { return model_; }
    ToldModel& mutable_model() { return model_; }
    std::int64_t steps() const { return steps_; }

    /// Immutable copy for planners running while training continues.
    std::shared_ptr<const ToldModel> snapshot() const { return std::make_shared<const ToldModel>(model_); }

private:
    ToldModel model_;
    nnet::AdamState encoder_opt_;
    nnet::AdamState dynamics_opt_;
    nnet::AdamState reward_opt_;
    nnet::AdamState value_opt_;
    nnet::AdamState policy_opt_;
    std::int64_t steps_ = 0;
};

}  // namespace raytold::told
