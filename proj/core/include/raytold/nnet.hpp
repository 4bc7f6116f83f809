#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "raytold/common.hpp"

namespace raytold::nnet {

enum class Activation : std::uint8_t { Identity = 0, Elu = 1, Tanh = 2 };

std::string_view to_string(Activation a);

/// Layer widths [in, h1, ..., out]; one activation per hidden layer plus the output activation.
struct MlpSpec {
    std::vector<int> widths;
    std::vector<Activation> hidden;
    Activation output = Activation::Identity;

    /// Uniform hidden activation.
    static MlpSpec make(std::vector<int> widths, Activation hidden_act, Activation output_act = Activation::Identity);
    void validate() const;
    std::size_t num_layers() const { return widths.size() - 1; }
};

/// Row-major weight matrix (out x in) followed by the bias vector, at `offset` in the flat buffer.
struct LayerShape {
    int in = 0;
    int out = 0;
    Activation activation = Activation::Identity;
    std::size_t offset = 0;

    std::size_t size() const { return static_cast<std::size_t>(in + 1) * static_cast<std::size_t>(out); }
    friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

struct ParamSet {
    std::vector<LayerShape> layers;
    std::vector<double> values;

    int input_width() const { return layers.front().in; }
    int output_width() const { return layers.back().out; }
    bool same_shape(const ParamSet& other) const { return layers == other.layers; }
};

/// Zero-initialized parameters for a spec.
ParamSet make_params(const MlpSpec& spec);
/// Fan-in scaled uniform initialization, U(-1/sqrt(in), 1/sqrt(in)) for weights and biases.
ParamSet init_params(const MlpSpec& spec, Rng& rng);

/// Samples are columns.
using Matrix = Eigen::MatrixXd;

std::vector<double> forward(const ParamSet& params, std::span<const double> input);
Matrix forward_batch(const ParamSet& params, const Matrix& inputs);

/// Cached layer outputs of a batched forward pass; `post[0]` is the input.
struct Tape {
    std::vector<Matrix> post;
    const Matrix& output() const { return post.back(); }
};

Tape forward_tape(const ParamSet& params, Matrix inputs);

/// Reverse pass. Parameter gradients are accumulated (+=) into `param_grad`, summed over the
/// batch; an empty span skips them. Returns d(loss)/d(input) when `want_input_grad`, otherwise
/// an empty matrix.
Matrix backward_batch(const ParamSet& params, const Tape& tape, const Matrix& output_grad,
                      std::span<double> param_grad, bool want_input_grad = true);

struct Gradients {
    std::vector<double> params;
    std::vector<double> input;
};

/// Single-sample reverse pass.
Gradients backward(const ParamSet& params, std::span<const double> input, std::span<const double> output_grad);

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::int64_t step = 0;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState for_params(std::size_t n, double lr = 1e-4);
};

/// Bias-corrected Adam update in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

/// target <- (1 - tau) * target + tau * online
void ema_update(ParamSet& target, const ParamSet& online, double tau);

struct NamedNetwork {
    std::string name;
    ParamSet params;
};

inline constexpr std::string_view kCheckpointMagic = "RAYTOLD1";

/// Magic, manifest (names, layer shapes, activation tags), then little-endian f64 payloads in
/// manifest order.
void write_checkpoint(std::ostream& out, std::span<const NamedNetwork> networks);
/// Throws CheckpointError on a bad magic, malformed manifest or truncated payload.
std::vector<NamedNetwork> read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, std::span<const NamedNetwork> networks);
std::vector<NamedNetwork> load_checkpoint(const std::filesystem::path& path);

}  // namespace raytold::nnet
