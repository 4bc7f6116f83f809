#include "raytold/told.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace raytold::told {
namespace {

using nnet::Activation;
using nnet::MlpSpec;
using nnet::ParamSet;

constexpr const char* kNetworkNames[] = {"encoder", "dynamics", "reward", "value", "policy", "target_value"};

MlpSpec make_spec(int in, const std::vector<int>& hidden, int out, Activation act, Activation out_act) {
    std::vector<int> widths;
    widths.reserve(hidden.size() + 2);
    widths.push_back(in);
    widths.insert(widths.end(), hidden.begin(), hidden.end());
    widths.push_back(out);
    return MlpSpec::make(std::move(widths), act, out_act);
}

Matrix column(std::span<const double> v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Matrix stack(const Matrix& top, const Matrix& bottom) {
    Matrix out(top.rows() + bottom.rows(), top.cols());
    out.topRows(top.rows()) = top;
    out.bottomRows(bottom.rows()) = bottom;
    return out;
}

Matrix latent_action(const ToldModel& model, std::span<const double> z, const NormAction& a) {
    if (static_cast<int>(z.size()) != model.config.latent_dim) {
        throw std::invalid_argument("told: latent width mismatch");
    }
    Matrix in(model.config.latent_dim + 2, 1);
    in.topRows(model.config.latent_dim) = column(z);
    in(model.config.latent_dim, 0) = a[0];
    in(model.config.latent_dim + 1, 0) = a[1];
    return in;
}

void check_shapes(const ParamSet& p, const MlpSpec& spec, const std::string& name) {
    const ParamSet expected = nnet::make_params(spec);
    if (!p.same_shape(expected) || p.values.size() != expected.values.size()) {
        throw CheckpointError("checkpoint: network '" + name + "' does not match the configured architecture");
    }
}

}  // namespace

void ToldConfig::validate() const {
    if (obs_dim < 1 || latent_dim < 1 || action_dim != 2) {
        throw ConfigError("told: obs_dim and latent_dim must be positive and action_dim must be 2");
    }
    if (unroll < 1 || batch_size < 1 || buffer_capacity < 1) {
        throw ConfigError("told: unroll, batch_size and buffer_capacity must be positive");
    }
    if (!(gamma >= 0.0 && gamma < 1.0) || !(rho > 0.0) || !(tau > 0.0 && tau <= 1.0) || !(learning_rate > 0.0)) {
        throw ConfigError("told: gamma in [0,1), rho > 0, tau in (0,1], learning_rate > 0 required");
    }
    if (weights.reward < 0.0 || weights.value < 0.0 || weights.policy < 0.0 || weights.latent < 0.0) {
        throw ConfigError("told: loss weights must be non-negative");
    }
    if (!(reward_scale > 0.0) || !(value_scale > 0.0)) {
        throw ConfigError("told: reward_scale and value_scale must be positive");
    }
}

MlpSpec ToldConfig::encoder_spec() const {
    return make_spec(obs_dim, encoder_hidden, latent_dim, activation, Activation::Identity);
}
MlpSpec ToldConfig::dynamics_spec() const {
    return make_spec(latent_dim + action_dim, dynamics_hidden, latent_dim, activation, Activation::Identity);
}
MlpSpec ToldConfig::reward_spec() const {
    return make_spec(latent_dim + action_dim, reward_hidden, 1, activation, Activation::Identity);
}
MlpSpec ToldConfig::value_spec() const {
    return make_spec(latent_dim + action_dim, value_hidden, 1, activation, Activation::Identity);
}
MlpSpec ToldConfig::policy_spec() const {
    return make_spec(latent_dim, policy_hidden, action_dim, activation, Activation::Tanh);
}

ToldModel ToldModel::create(const ToldConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    ToldModel m;
    m.config = config;
    m.encoder = nnet::init_params(config.encoder_spec(), rng);
    m.dynamics = nnet::init_params(config.dynamics_spec(), rng);
    m.reward = nnet::init_params(config.reward_spec(), rng);
    m.value = nnet::init_params(config.value_spec(), rng);
    m.policy = nnet::init_params(config.policy_spec(), rng);
    m.target_value = m.value;
    return m;
}

std::vector<nnet::NamedNetwork> ToldModel::networks() const {
    return {{kNetworkNames[0], encoder}, {kNetworkNames[1], dynamics},     {kNetworkNames[2], reward},
            {kNetworkNames[3], value},   {kNetworkNames[4], policy},       {kNetworkNames[5], target_value}};
}

ToldModel ToldModel::from_networks(const ToldConfig& config, const std::vector<nnet::NamedNetwork>& nets) {
    config.validate();
    const auto find = [&](const char* name) -> const ParamSet& {
        const auto it = std::find_if(nets.begin(), nets.end(), [&](const auto& n) { return n.name == name; });
        if (it == nets.end()) {
            throw CheckpointError(std::string("checkpoint: missing network '") + name + "'");
        }
        return it->params;
    };
    ToldModel m;
    m.config = config;
    m.encoder = find("encoder");
    m.dynamics = find("dynamics");
    m.reward = find("reward");
    m.value = find("value");
    m.policy = find("policy");
    m.target_value = find("target_value");
    check_shapes(m.encoder, config.encoder_spec(), "encoder");
    check_shapes(m.dynamics, config.dynamics_spec(), "dynamics");
    check_shapes(m.reward, config.reward_spec(), "reward");
    check_shapes(m.value, config.value_spec(), "value");
    check_shapes(m.policy, config.policy_spec(), "policy");
    check_shapes(m.target_value, config.value_spec(), "target_value");
    return m;
}

void ToldModel::save(const std::filesystem::path& path) const {
    const auto nets = networks();
    nnet::save_checkpoint(path, nets);
}

ToldModel ToldModel::load(const std::filesystem::path& path, const ToldConfig& config) {
    return from_networks(config, nnet::load_checkpoint(path));
}

LatentState encode(const ToldModel& model, std::span<const double> observation) {
    return nnet::forward(model.encoder, observation);
}

Matrix encode_batch(const ToldModel& model, const Matrix& observations) {
    return nnet::forward_batch(model.encoder, observations);
}

LatentState latent_step(const ToldModel& model, std::span<const double> z, const NormAction& a) {
    const Matrix out = nnet::forward_batch(model.dynamics, latent_action(model, z, a));
    return {out.data(), out.data() + out.size()};
}

double predict_reward(const ToldModel& model, std::span<const double> z, const NormAction& a) {
    return model.config.reward_scale * nnet::forward_batch(model.reward, latent_action(model, z, a))(0, 0);
}

double q_value(const ToldModel& model, std::span<const double> z, const NormAction& a, bool use_target) {
    const ParamSet& net = use_target ? model.target_value : model.value;
    return model.config.value_scale * nnet::forward_batch(net, latent_action(model, z, a))(0, 0);
}

NormAction policy_mean(const ToldModel& model, std::span<const double> z) {
    const std::vector<double> out = nnet::forward(model.policy, z);
    return {out[0], out[1]};
}

NormAction policy_action(const ToldModel& model, std::span<const double> z, double exploration_std, Rng& rng) {
    NormAction a = policy_mean(model, z);
    if (exploration_std > 0.0) {
        std::normal_distribution<double> noise(0.0, exploration_std);
        for (double& v : a) {
            v = std::clamp(v + noise(rng), -1.0, 1.0);
        }
    }
    return a;
}

std::vector<NormAction> latent_policy_rollout(const ToldModel& model, std::span<const double> observation,
                                              int horizon) {
    if (horizon < 1) {
        throw std::invalid_argument("latent_policy_rollout: horizon must be at least 1");
    }
    std::vector<NormAction> actions;
    actions.reserve(static_cast<std::size_t>(horizon));
    LatentState z = encode(model, observation);
    for (int t = 0; t < horizon; ++t) {
        const NormAction u = policy_mean(model, z);
        actions.push_back(u);
        if (t + 1 < horizon) {
            z = latent_step(model, z, u);
        }
    }
    return actions;
}

Eigen::VectorXd terminal_values(const ToldModel& model, const Matrix& observations) {
    const Matrix z = nnet::forward_batch(model.encoder, observations);
    const Matrix a = nnet::forward_batch(model.policy, z);
    const Matrix q = nnet::forward_batch(model.value, stack(z, a));
    return (model.config.value_scale * q.row(0)).transpose();
}

// ---------------------------------------------------------------------------------------------
// Replay buffer

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) {
        throw std::invalid_argument("ReplayBuffer: capacity must be positive");
    }
}

void ReplayBuffer::push(Transition t) {
    const bool done = t.done;
    Slot slot{std::move(t), episode_};
    if (size_ < capacity_) {
        slots_.push_back(std::move(slot));
        ++size_;
    } else {
        slots_[head_] = std::move(slot);
        head_ = (head_ + 1) % capacity_;
    }
    if (done) {
        ++episode_;
    }
    ++version_;
}

void ReplayBuffer::end_episode() {
    ++episode_;
    ++version_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
    if (i >= size_) {
        throw std::out_of_range("ReplayBuffer: index out of range");
    }
    return slots_[physical(i)].t;
}

std::uint64_t ReplayBuffer::episode_of(std::size_t i) const {
    if (i >= size_) {
        throw std::out_of_range("ReplayBuffer: index out of range");
    }
    return slots_[physical(i)].episode;
}

const std::vector<std::size_t>& ReplayBuffer::valid_starts(int length) const {
    if (starts_version_ == version_ && starts_length_ == length) {
        return starts_;
    }
    starts_.clear();
    const auto len = static_cast<std::size_t>(std::max(length, 1));
    if (size_ >= len) {
        for (std::size_t i = 0; i + len <= size_; ++i) {
            // Episode ids are non-decreasing in insertion order.
            if (slots_[physical(i)].episode == slots_[physical(i + len - 1)].episode) {
                starts_.push_back(i);
            }
        }
    }
    starts_version_ = version_;
    starts_length_ = length;
    return starts_;
}

Batch ReplayBuffer::sample(int batch_size, int length, Rng& rng) const {
    const auto& starts = valid_starts(length);
    if (starts.empty() || batch_size < 1) {
        throw std::runtime_error("ReplayBuffer: not enough data for a window of " + std::to_string(length) +
                                 " transitions");
    }
    const Transition& first = at(starts.front());
    const auto obs_dim = static_cast<Eigen::Index>(first.obs.size());
    Batch batch;
    batch.obs.assign(static_cast<std::size_t>(length) + 1, Matrix(obs_dim, batch_size));
    batch.actions.assign(static_cast<std::size_t>(length), Matrix(2, batch_size));
    batch.rewards.assign(static_cast<std::size_t>(length), Eigen::RowVectorXd(batch_size));
    batch.not_done.assign(static_cast<std::size_t>(length), Eigen::RowVectorXd(batch_size));

    std::uniform_int_distribution<std::size_t> pick(0, starts.size() - 1);
    for (int b = 0; b < batch_size; ++b) {
        const std::size_t s = starts[pick(rng)];
        for (int t = 0; t < length; ++t) {
            const Transition& tr = at(s + static_cast<std::size_t>(t));
            batch.obs[static_cast<std::size_t>(t)].col(b) = column(tr.obs);
            batch.actions[static_cast<std::size_t>(t)](0, b) = tr.action[0];
            batch.actions[static_cast<std::size_t>(t)](1, b) = tr.action[1];
            batch.rewards[static_cast<std::size_t>(t)](b) = tr.reward;
            batch.not_done[static_cast<std::size_t>(t)](b) = tr.done ? 0.0 : 1.0;
            if (t + 1 == length) {
                batch.obs[static_cast<std::size_t>(length)].col(b) = column(tr.next_obs);
            }
        }
    }
    return batch;
}

// ---------------------------------------------------------------------------------------------
// Loss and gradients

GradientSet GradientSet::zeros_like(const ToldModel& model) {
    GradientSet g;
    g.encoder.assign(model.encoder.values.size(), 0.0);
    g.dynamics.assign(model.dynamics.values.size(), 0.0);
    g.reward.assign(model.reward.values.size(), 0.0);
    g.value.assign(model.value.values.size(), 0.0);
    g.policy.assign(model.policy.values.size(), 0.0);
    return g;
}

LossReport compute_loss(const ToldModel& model, const Batch& batch, GradientSet* grads) {
    const ToldConfig& c = model.config;
    const int B = batch.size();
    const int T = batch.length();
    const int L = c.latent_dim;
    const int A = c.action_dim;
    if (B < 1 || T < 1 || static_cast<int>(batch.obs.size()) != T + 1) {
        throw std::invalid_argument("compute_loss: malformed batch");
    }
    const Eigen::Index TB = static_cast<Eigen::Index>(T) * B;
    const auto block = [B](int t) { return static_cast<Eigen::Index>(t) * B; };

    // Detached targets from the true next observations.
    Matrix next_obs(batch.obs[0].rows(), TB);
    for (int t = 0; t < T; ++t) {
        next_obs.middleCols(block(t), B) = batch.obs[static_cast<std::size_t>(t) + 1];
    }
    const Matrix z_target = nnet::forward_batch(model.encoder, next_obs);
    const Matrix a_target = nnet::forward_batch(model.policy, z_target);
    const Matrix q_target = c.value_scale * nnet::forward_batch(model.target_value, stack(z_target, a_target));

    // Online latent unroll from the first observation with the recorded actions.
    const nnet::Tape enc_tape = nnet::forward_tape(model.encoder, batch.obs[0]);
    std::vector<Matrix> z_hat(static_cast<std::size_t>(T) + 1);
    z_hat[0] = enc_tape.output();
    std::vector<nnet::Tape> dyn_tapes;
    dyn_tapes.reserve(static_cast<std::size_t>(T));
    Matrix za(L + A, TB);
    for (int t = 0; t < T; ++t) {
        const auto ti = static_cast<std::size_t>(t);
        Matrix in = stack(z_hat[ti], batch.actions[ti]);
        za.middleCols(block(t), B) = in;
        dyn_tapes.push_back(nnet::forward_tape(model.dynamics, std::move(in)));
        z_hat[ti + 1] = dyn_tapes.back().output();
    }
    const nnet::Tape reward_tape = nnet::forward_tape(model.reward, za);
    const nnet::Tape value_tape = nnet::forward_tape(model.value, za);

    // Policy improvement on detached latents; the value net is only differentiated w.r.t. its input.
    const Matrix z_detached = za.topRows(L);
    const nnet::Tape policy_tape = nnet::forward_tape(model.policy, z_detached);
    const nnet::Tape q_policy_tape = nnet::forward_tape(model.value, stack(z_detached, policy_tape.output()));

    const LossWeights& w = c.weights;
    Matrix g_reward(1, TB);
    Matrix g_value(1, TB);
    Matrix g_policy_q(1, TB);
    std::vector<Matrix> g_latent(static_cast<std::size_t>(T));
    LossReport report;
    const double inv_b = 1.0 / static_cast<double>(B);
    const double inv_lb = inv_b / static_cast<double>(L);
    double decay = 1.0;
    for (int t = 0; t < T; ++t) {
        const auto ti = static_cast<std::size_t>(t);
        const Matrix diff = z_hat[ti + 1] - z_target.middleCols(block(t), B);
        report.latent += decay * diff.squaredNorm() * inv_lb;
        g_latent[ti] = (w.latent * decay * 2.0 * inv_lb) * diff;
        for (int b = 0; b < B; ++b) {
            const Eigen::Index col = block(t) + b;
            const double r = batch.rewards[ti](b);
            const double r_err = c.reward_scale * reward_tape.output()(0, col) - r;
            report.reward += decay * r_err * r_err * inv_b;
            g_reward(0, col) = w.reward * decay * 2.0 * r_err * inv_b * c.reward_scale;

            const double y = r + c.gamma * batch.not_done[ti](b) * q_target(0, col);
            const double v_err = c.value_scale * value_tape.output()(0, col) - y;
            report.value += decay * v_err * v_err * inv_b;
            g_value(0, col) = w.value * decay * 2.0 * v_err * inv_b * c.value_scale;

            report.policy -= decay * c.value_scale * q_policy_tape.output()(0, col) * inv_b;
            g_policy_q(0, col) = -w.policy * decay * inv_b * c.value_scale;
        }
        decay *= c.rho;
    }
    report.total = w.reward * report.reward + w.value * report.value + w.policy * report.policy +
                   w.latent * report.latent;
    if (grads == nullptr) {
        return report;
    }

    const Matrix gin_reward = nnet::backward_batch(model.reward, reward_tape, g_reward, grads->reward);
    const Matrix gin_value = nnet::backward_batch(model.value, value_tape, g_value, grads->value);

    const Matrix gin_q = nnet::backward_batch(model.value, q_policy_tape, g_policy_q, {});
    nnet::backward_batch(model.policy, policy_tape, gin_q.bottomRows(A), grads->policy, false);

    // Gradient w.r.t. each predicted latent, then back through the unrolled dynamics.
    std::vector<Matrix> g_z(static_cast<std::size_t>(T) + 1, Matrix::Zero(L, B));
    for (int t = 0; t < T; ++t) {
        const auto ti = static_cast<std::size_t>(t);
        g_z[ti] += gin_reward.topRows(L).middleCols(block(t), B) + gin_value.topRows(L).middleCols(block(t), B);
        g_z[ti + 1] += g_latent[ti];
    }
    for (int t = T - 1; t >= 0; --t) {
        const auto ti = static_cast<std::size_t>(t);
        const Matrix gin = nnet::backward_batch(model.dynamics, dyn_tapes[ti], g_z[ti + 1], grads->dynamics);
        g_z[ti] += gin.topRows(L);
    }
    nnet::backward_batch(model.encoder, enc_tape, g_z[0], grads->encoder, false);
    return report;
}

ToldTrainer::ToldTrainer(ToldModel model) : model_(std::move(model)) {
    const double lr = model_.config.learning_rate;
    encoder_opt_ = nnet::AdamState::for_params(model_.encoder.values.size(), lr);
    dynamics_opt_ = nnet::AdamState::for_params(model_.dynamics.values.size(), lr);
    reward_opt_ = nnet::AdamState::for_params(model_.reward.values.size(), lr);
    value_opt_ = nnet::AdamState::for_params(model_.value.values.size(), lr);
    policy_opt_ = nnet::AdamState::for_params(model_.policy.values.size(), lr);
}

LossReport ToldTrainer::train_step(const ReplayBuffer& buffer, Rng& rng) {
    const Batch batch = buffer.sample(model_.config.batch_size, model_.config.unroll, rng);
    return update(batch);
}

LossReport ToldTrainer::update(const Batch& batch) {
    GradientSet g = GradientSet::zeros_like(model_);
    const LossReport report = compute_loss(model_, batch, &g);
    nnet::adam_step(model_.encoder.values, g.encoder, encoder_opt_);
    nnet::adam_step(model_.dynamics.values, g.dynamics, dynamics_opt_);
    nnet::adam_step(model_.reward.values, g.reward, reward_opt_);
    nnet::adam_step(model_.value.values, g.value, value_opt_);
    nnet::adam_step(model_.policy.values, g.policy, policy_opt_);
    nnet::ema_update(model_.target_value, model_.value, model_.config.tau);
    ++steps_;
    return report;
}

}  // namespace raytold::told
