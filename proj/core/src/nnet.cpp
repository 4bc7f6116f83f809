#include "raytold/nnet.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace raytold::nnet {
namespace {

using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using MutRowMajorMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

RowMajorMap weights(const ParamSet& p, const LayerShape& l) {
    return RowMajorMap(p.values.data() + l.offset, l.out, l.in);
}

ConstVecMap bias(const ParamSet& p, const LayerShape& l) {
    return ConstVecMap(p.values.data() + l.offset + static_cast<std::size_t>(l.out) * l.in, l.out);
}

void apply_activation(Activation a, Matrix& m) {
    switch (a) {
        case Activation::Identity:
            break;
        case Activation::Elu:
            m = m.unaryExpr([](double x) { return x > 0.0 ? x : std::expm1(x); });
            break;
        case Activation::Tanh:
            m = m.array().tanh().matrix();
            break;
    }
}

/// Multiplies `grad` in place by the activation derivative, expressed through the layer output.
void apply_activation_grad(Activation a, const Matrix& post, Matrix& grad) {
    switch (a) {
        case Activation::Identity:
            break;
        case Activation::Elu:
            grad.array() *= post.array().unaryExpr([](double y) { return y > 0.0 ? 1.0 : y + 1.0; });
            break;
        case Activation::Tanh:
            grad.array() *= 1.0 - post.array().square();
            break;
    }
}

void check_input(const ParamSet& params, Eigen::Index rows) {
    if (params.layers.empty()) {
        throw std::invalid_argument("nnet: empty parameter set");
    }
    if (rows != params.input_width()) {
        throw std::invalid_argument("nnet: input width " + std::to_string(rows) + " does not match network input " +
                                    std::to_string(params.input_width()));
    }
}

void put_u32(std::ostream& out, std::uint32_t v) {
    char bytes[4];
    for (int i = 0; i < 4; ++i) {
        bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
    }
    out.write(bytes, 4);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char bytes[4];
    if (!in.read(reinterpret_cast<char*>(bytes), 4)) {
        throw CheckpointError("checkpoint: truncated manifest");
    }
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
    }
    return v;
}

}  // namespace

std::string_view to_string(Activation a) {
    switch (a) {
        case Activation::Identity:
            return "identity";
        case Activation::Elu:
            return "elu";
        case Activation::Tanh:
            return "tanh";
    }
    return "unknown";
}

MlpSpec MlpSpec::make(std::vector<int> widths, Activation hidden_act, Activation output_act) {
    MlpSpec spec;
    spec.hidden.assign(widths.size() >= 2 ? widths.size() - 2 : 0, hidden_act);
    spec.widths = std::move(widths);
    spec.output = output_act;
    return spec;
}

void MlpSpec::validate() const {
    if (widths.size() < 2) {
        throw std::invalid_argument("MlpSpec: need at least an input and an output width");
    }
    for (int w : widths) {
        if (w <= 0) {
            throw std::invalid_argument("MlpSpec: widths must be positive");
        }
    }
    if (hidden.size() != widths.size() - 2) {
        throw std::invalid_argument("MlpSpec: one activation per hidden layer is required");
    }
}

ParamSet make_params(const MlpSpec& spec) {
    spec.validate();
    ParamSet p;
    std::size_t offset = 0;
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        LayerShape shape;
        shape.in = spec.widths[l];
        shape.out = spec.widths[l + 1];
        shape.activation = l + 1 == spec.num_layers() ? spec.output : spec.hidden[l];
        shape.offset = offset;
        offset += shape.size();
        p.layers.push_back(shape);
    }
    p.values.assign(offset, 0.0);
    return p;
}

ParamSet init_params(const MlpSpec& spec, Rng& rng) {
    ParamSet p = make_params(spec);
    for (const LayerShape& l : p.layers) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (std::size_t i = 0; i < l.size(); ++i) {
            p.values[l.offset + i] = u(rng);
        }
    }
    return p;
}

Matrix forward_batch(const ParamSet& params, const Matrix& inputs) {
    check_input(params, inputs.rows());
    Matrix a = inputs;
    for (const LayerShape& l : params.layers) {
        Matrix z = weights(params, l) * a;
        z.colwise() += bias(params, l);
        apply_activation(l.activation, z);
        a = std::move(z);
    }
    return a;
}

std::vector<double> forward(const ParamSet& params, std::span<const double> input) {
    const Matrix in = ConstVecMap(input.data(), static_cast<Eigen::Index>(input.size()));
    const Matrix out = forward_batch(params, in);
    return {out.data(), out.data() + out.size()};
}

Tape forward_tape(const ParamSet& params, Matrix inputs) {
    check_input(params, inputs.rows());
    Tape tape;
    tape.post.reserve(params.layers.size() + 1);
    tape.post.push_back(std::move(inputs));
    for (const LayerShape& l : params.layers) {
        Matrix z = weights(params, l) * tape.post.back();
        z.colwise() += bias(params, l);
        apply_activation(l.activation, z);
        tape.post.push_back(std::move(z));
    }
    return tape;
}

Matrix backward_batch(const ParamSet& params, const Tape& tape, const Matrix& output_grad,
                      std::span<double> param_grad, bool want_input_grad) {
    const bool want_param_grad = !param_grad.empty();
    if (want_param_grad && param_grad.size() != params.values.size()) {
        throw std::invalid_argument("nnet: gradient buffer size mismatch");
    }
    if (output_grad.rows() != params.output_width() || output_grad.cols() != tape.output().cols()) {
        throw std::invalid_argument("nnet: output gradient shape mismatch");
    }
    Matrix delta = output_grad;
    for (std::size_t idx = params.layers.size(); idx-- > 0;) {
        const LayerShape& l = params.layers[idx];
        apply_activation_grad(l.activation, tape.post[idx + 1], delta);
        if (want_param_grad) {
            MutRowMajorMap dw(param_grad.data() + l.offset, l.out, l.in);
            VecMap db(param_grad.data() + l.offset + static_cast<std::size_t>(l.out) * l.in, l.out);
            // Reductions land in owned (aligned) temporaries first: Eigen picks packet or scalar
            // summation order per coefficient from the destination address, which for a span
            // into a std::vector varies between allocations.
            const Matrix gw = delta * tape.post[idx].transpose();
            const Eigen::VectorXd gb = delta.rowwise().sum();
            dw += gw;
            db += gb;
        }
        if (idx > 0 || want_input_grad) {
            delta = weights(params, l).transpose() * delta;
        }
    }
    if (!want_input_grad) {
        return {};
    }
    return delta;
}

Gradients backward(const ParamSet& params, std::span<const double> input, std::span<const double> output_grad) {
    const Matrix in = ConstVecMap(input.data(), static_cast<Eigen::Index>(input.size()));
    const Tape tape = forward_tape(params, in);
    if (static_cast<int>(output_grad.size()) != params.output_width()) {
        throw std::invalid_argument("nnet: output gradient shape mismatch");
    }
    const Matrix g = ConstVecMap(output_grad.data(), static_cast<Eigen::Index>(output_grad.size()));
    Gradients out;
    out.params.assign(params.values.size(), 0.0);
    const Matrix gin = backward_batch(params, tape, g, out.params, true);
    out.input.assign(gin.data(), gin.data() + gin.size());
    return out;
}

AdamState AdamState::for_params(std::size_t n, double lr) {
    AdamState s;
    s.m.assign(n, 0.0);
    s.v.assign(n, 0.0);
    s.lr = lr;
    return s;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
    if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw std::invalid_argument("adam_step: length mismatch");
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        params[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
}

void ema_update(ParamSet& target, const ParamSet& online, double tau) {
    if (!target.same_shape(online) || target.values.size() != online.values.size()) {
        throw std::invalid_argument("ema_update: shape mismatch");
    }
    if (!(tau > 0.0 && tau <= 1.0)) {
        throw std::invalid_argument("ema_update: tau must lie in (0, 1]");
    }
    if (tau == 1.0) {
        target.values = online.values;
        return;
    }
    // Incremental form: leaves the target bit-identical when it already equals the online net.
    for (std::size_t i = 0; i < target.values.size(); ++i) {
        target.values[i] += tau * (online.values[i] - target.values[i]);
    }
}

void write_checkpoint(std::ostream& out, std::span<const NamedNetwork> networks) {
    out.write(kCheckpointMagic.data(), static_cast<std::streamsize>(kCheckpointMagic.size()));
    put_u32(out, static_cast<std::uint32_t>(networks.size()));
    for (const NamedNetwork& net : networks) {
        put_u32(out, static_cast<std::uint32_t>(net.name.size()));
        out.write(net.name.data(), static_cast<std::streamsize>(net.name.size()));
        put_u32(out, static_cast<std::uint32_t>(net.params.layers.size()));
        for (const LayerShape& l : net.params.layers) {
            put_u32(out, static_cast<std::uint32_t>(l.in));
            put_u32(out, static_cast<std::uint32_t>(l.out));
            out.put(static_cast<char>(l.activation));
        }
    }
    for (const NamedNetwork& net : networks) {
        for (double v : net.params.values) {
            const auto bits = std::bit_cast<std::uint64_t>(v);
            char bytes[8];
            for (int i = 0; i < 8; ++i) {
                bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
            }
            out.write(bytes, 8);
        }
    }
    if (!out) {
        throw CheckpointError("checkpoint: write failed");
    }
}

std::vector<NamedNetwork> read_checkpoint(std::istream& in) {
    std::string magic(kCheckpointMagic.size(), '\0');
    if (!in.read(magic.data(), static_cast<std::streamsize>(magic.size())) || magic != kCheckpointMagic) {
        throw CheckpointError("checkpoint: bad magic (expected RAYTOLD1)");
    }
    constexpr std::uint32_t kSanity = 1u << 20;
    const std::uint32_t count = get_u32(in);
    if (count > 1024) {
        throw CheckpointError("checkpoint: implausible network count");
    }
    std::vector<NamedNetwork> nets(count);
    for (NamedNetwork& net : nets) {
        const std::uint32_t name_len = get_u32(in);
        if (name_len > 4096) {
            throw CheckpointError("checkpoint: implausible name length");
        }
        net.name.resize(name_len);
        if (!in.read(net.name.data(), name_len)) {
            throw CheckpointError("checkpoint: truncated manifest");
        }
        const std::uint32_t layers = get_u32(in);
        if (layers == 0 || layers > 1024) {
            throw CheckpointError("checkpoint: implausible layer count for " + net.name);
        }
        std::size_t offset = 0;
        int prev_out = -1;
        for (std::uint32_t l = 0; l < layers; ++l) {
            LayerShape shape;
            const std::uint32_t w_in = get_u32(in);
            const std::uint32_t w_out = get_u32(in);
            const int tag = in.get();
            if (!in || w_in == 0 || w_out == 0 || w_in > kSanity || w_out > kSanity || tag < 0 || tag > 2) {
                throw CheckpointError("checkpoint: malformed layer in " + net.name);
            }
            shape.in = static_cast<int>(w_in);
            shape.out = static_cast<int>(w_out);
            if (prev_out >= 0 && prev_out != shape.in) {
                throw CheckpointError("checkpoint: inconsistent layer chain in " + net.name);
            }
            prev_out = shape.out;
            shape.activation = static_cast<Activation>(tag);
            shape.offset = offset;
            offset += shape.size();
            net.params.layers.push_back(shape);
        }
        net.params.values.assign(offset, 0.0);
    }
    for (NamedNetwork& net : nets) {
        for (double& v : net.params.values) {
            unsigned char bytes[8];
            if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
                throw CheckpointError("checkpoint: truncated payload in " + net.name);
            }
            std::uint64_t bits = 0;
            for (int i = 0; i < 8; ++i) {
                bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
            }
            v = std::bit_cast<double>(bits);
        }
    }
    return nets;
}

void save_checkpoint(const std::filesystem::path& path, std::span<const NamedNetwork> networks) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw CheckpointError("checkpoint: cannot open " + path.string() + " for writing");
    }
    write_checkpoint(out, networks);
}

std::vector<NamedNetwork> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw CheckpointError("checkpoint: cannot open " + path.string());
    }
    return read_checkpoint(in);
}

}  // namespace raytold::nnet
