#pragma once

// Miniature TOLD models, random batches and a sample-by-sample evaluation of the combined loss.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <span>
#include <vector>

#include "finite_diff.hpp"
#include "raytold/told.hpp"

namespace raytold::told::reference {

using nnet::ParamSet;

inline ToldConfig miniature_config() {
    ToldConfig c;
    c.obs_dim = 5;
    c.latent_dim = 8;
    c.encoder_hidden = {8};
    c.dynamics_hidden = {8};
    c.reward_hidden = {8};
    c.value_hidden = {8};
    c.policy_hidden = {8};
    c.unroll = 2;
    c.batch_size = 4;
    return c;
}

inline Batch random_batch(const ToldConfig& c, int batch, int length, Rng& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Batch b;
    for (int t = 0; t <= length; ++t) {
        Matrix x(c.obs_dim, batch);
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            x.data()[i] = g(rng);
        }
        b.obs.push_back(x);
    }
    for (int t = 0; t < length; ++t) {
        Matrix a(2, batch);
        Eigen::RowVectorXd r(batch), nd(batch);
        for (int k = 0; k < batch; ++k) {
            a(0, k) = u(rng);
            a(1, k) = u(rng);
            r(k) = 5.0 * g(rng);
            nd(k) = (t == length - 1 && k == 0) ? 0.0 : 1.0;
        }
        b.actions.push_back(a);
        b.rewards.push_back(r);
        b.not_done.push_back(nd);
    }
    return b;
}

inline std::vector<double> col(const Matrix& m, Eigen::Index c) {
    return {m.col(c).data(), m.col(c).data() + m.rows()};
}

inline std::vector<double> cat(std::vector<double> a, std::span<const double> b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

inline double scalar(const ParamSet& p, const std::vector<double>& in) {
    return nnet::forward(p, in)[0];
}

// Sample-by-sample evaluation of the combined objective. Everything behind a stop-gradient is
// computed from `frozen`; everything that carries gradient comes from `online`.
inline double reference_loss(const ToldModel& online, const ToldModel& frozen, const Batch& batch) {
    const ToldConfig& c = online.config;
    const LossWeights& w = c.weights;
    const int B = batch.size();
    const int T = batch.length();
    double total = 0.0;
    for (int b = 0; b < B; ++b) {
        std::vector<double> z = nnet::forward(online.encoder, col(batch.obs[0], b));
        std::vector<double> z_frozen = nnet::forward(frozen.encoder, col(batch.obs[0], b));
        double decay = 1.0;
        for (int t = 0; t < T; ++t) {
            const auto ti = static_cast<std::size_t>(t);
            const std::vector<double> a = col(batch.actions[ti], b);
            const double r = batch.rewards[ti](b);
            const std::vector<double> za = cat(z, a);

            const double r_hat = c.reward_scale * scalar(online.reward, za);
            const std::vector<double> z_next = nnet::forward(frozen.encoder, col(batch.obs[ti + 1], b));
            const std::vector<double> a_next = nnet::forward(frozen.policy, z_next);
            const double q_next = c.value_scale * scalar(frozen.target_value, cat(z_next, a_next));
            const double y = r + c.gamma * batch.not_done[ti](b) * q_next;
            const double q_hat = c.value_scale * scalar(online.value, za);
            const std::vector<double> pi = nnet::forward(online.policy, z_frozen);
            const double q_pi = c.value_scale * scalar(frozen.value, cat(z_frozen, pi));

            const std::vector<double> z_pred = nnet::forward(online.dynamics, za);
            double latent = 0.0;
            for (std::size_t i = 0; i < z_pred.size(); ++i) {
                latent += (z_pred[i] - z_next[i]) * (z_pred[i] - z_next[i]);
            }
            latent /= static_cast<double>(c.latent_dim);

            total += decay * (w.reward * (r_hat - r) * (r_hat - r) + w.value * (q_hat - y) * (q_hat - y) -
                              w.policy * q_pi + w.latent * latent);
            decay *= c.rho;
            z = z_pred;
            z_frozen = nnet::forward(frozen.dynamics, cat(z_frozen, a));
        }
    }
    return total / static_cast<double>(B);
}


struct NetGradientError {
    std::string name;
    double error = 0.0;
};

/// Compares the analytic combined-loss gradients of every network against central differences of
/// reference_loss (step 1e-5). Entries below 1e-4 of the largest numeric entry are compared on
/// that absolute scale.
inline std::vector<NetGradientError> combined_loss_gradient_errors(const ToldConfig& c, int batch_size, int length,
                                                                   std::uint64_t seed) {
    ToldModel m = ToldModel::create(c, seed);
    Rng rng(seed + 1);
    // Separate the target value net from the online one.
    m.target_value = nnet::init_params(c.value_spec(), rng);
    const Batch batch = random_batch(c, batch_size, length, rng);
    GradientSet g = GradientSet::zeros_like(m);
    compute_loss(m, batch, &g);

    const ToldModel frozen = m;
    ToldModel online = m;
    struct Net {
        const char* name;
        ParamSet ToldModel::*params;
        std::vector<double> GradientSet::*grad;
    };
    const Net nets[] = {{"encoder", &ToldModel::encoder, &GradientSet::encoder},
                        {"dynamics", &ToldModel::dynamics, &GradientSet::dynamics},
                        {"reward", &ToldModel::reward, &GradientSet::reward},
                        {"value", &ToldModel::value, &GradientSet::value},
                        {"policy", &ToldModel::policy, &GradientSet::policy}};
    std::vector<NetGradientError> out;
    for (const Net& net : nets) {
        std::vector<double>& values = (online.*net.params).values;
        const std::vector<double> num =
            fd::central(values, [&] { return reference_loss(online, frozen, batch); }, 1e-5);
        double scale = 0.0;
        for (double v : num) {
            scale = std::max(scale, std::abs(v));
        }
        out.push_back({net.name, fd::max_relative_error(g.*net.grad, num, 1e-4 * scale)});
    }
    return out;
}

}  // namespace raytold::told::reference
