#include "qfusion/branches.hpp"

#include <cmath>
#include <numbers>

namespace qfusion {

using quantum::AngleSource;
using quantum::CircuitSpec;
using quantum::EmbeddingKind;
using quantum::GateKind;
using quantum::GateOp;
using quantum::Observable;
using quantum::PauliAxis;

namespace {

constexpr int kQubits = 4;

// Per layer: RX(theta_j) then RY(phi_j) on every qubit, then the closed
// CNOT ring 0->1->2->3->0. Parameter slots are layer-major: layer l uses
// 8l..8l+3 for RX and 8l+4..8l+7 for RY.
void append_variational_layers(CircuitSpec& spec, int layers) {
    for (int l = 0; l < layers; ++l) {
        for (int q = 0; q < kQubits; ++q) {
            GateOp g;
            g.kind = GateKind::RX;
            g.target = q;
            g.source = AngleSource::Param;
            g.slot = 8 * l + q;
            spec.gates.push_back(g);
        }
        for (int q = 0; q < kQubits; ++q) {
            GateOp g;
            g.kind = GateKind::RY;
            g.target = q;
            g.source = AngleSource::Param;
            g.slot = 8 * l + 4 + q;
            spec.gates.push_back(g);
        }
        for (int q = 0; q < kQubits; ++q) {
            GateOp g;
            g.kind = GateKind::CNOT;
            g.control = q;
            g.target = (q + 1) % kQubits;
            spec.gates.push_back(g);
        }
    }
    spec.n_params = 8 * layers;
}

}  // namespace

CircuitSpec make_amplitude_circuit(int layers) {
    CircuitSpec spec;
    spec.n_qubits = kQubits;
    spec.embedding = EmbeddingKind::Amplitude;
    spec.n_inputs = 1 << kQubits;
    append_variational_layers(spec, layers);
    for (int q = 0; q < kQubits; ++q)
        spec.observables.push_back({PauliAxis::Z, q});
    spec.validate();
    return spec;
}

CircuitSpec make_angle_circuit(int layers) {
    CircuitSpec spec;
    spec.n_qubits = kQubits;
    spec.embedding = EmbeddingKind::Angle;
    spec.n_inputs = kQubits;
    for (int q = 0; q < kQubits; ++q) {
        GateOp g;
        g.kind = GateKind::RY;
        g.target = q;
        g.source = AngleSource::Input;
        g.slot = q;
        g.scale = std::numbers::pi;
        spec.gates.push_back(g);
    }
    append_variational_layers(spec, layers);
    for (int q = 0; q < kQubits; ++q)
        spec.observables.push_back({PauliAxis::Z, q});
    spec.observables.push_back({PauliAxis::X, 0});
    spec.observables.push_back({PauliAxis::X, 1});
    spec.validate();
    return spec;
}

Tensor quantum_layer(Tape& tape, const Tensor& features, const Tensor& params,
                     const quantum::CircuitSpec& spec) {
    if (features.shape().size() != 2 ||
        features.dim(1) != static_cast<std::size_t>(spec.n_inputs))
        throw std::invalid_argument(
            "quantum_layer: features must be [B," + std::to_string(spec.n_inputs) +
            "], got " + shape_str(features.shape()));
    if (params.numel() != static_cast<std::size_t>(spec.n_params))
        throw std::invalid_argument("quantum_layer: parameter count mismatch");

    const std::size_t B = features.dim(0);
    const std::size_t n_in = static_cast<std::size_t>(spec.n_inputs);
    const std::size_t n_out = spec.observables.size();

    Tensor y = Tensor::zeros({B, n_out});
    for (std::size_t bi = 0; bi < B; ++bi) {
        const std::vector<double> out = quantum::run_circuit(
            spec, {features.data() + bi * n_in, n_in}, params.values());
        std::copy(out.begin(), out.end(), y.data() + bi * n_out);
    }

    if (tape.recording() && (features.requires_grad() || params.requires_grad())) {
        y.set_requires_grad(true);
        Tensor fc = features, pc = params, yc = y;
        tape.record([fc, pc, yc, spec, B, n_in, n_out]() mutable {
            auto gy = yc.grad();
            auto gf = fc.requires_grad() ? fc.grad() : std::span<double>();
            auto gp = pc.requires_grad() ? pc.grad() : std::span<double>();
            for (std::size_t bi = 0; bi < B; ++bi) {
                const quantum::CircuitGradients grads = quantum::grad_backprop(
                    spec, {fc.data() + bi * n_in, n_in}, pc.values(),
                    {gy.data() + bi * n_out, n_out});
                if (!gf.empty())
                    for (std::size_t i = 0; i < n_in; ++i)
                        gf[bi * n_in + i] += grads.wrt_inputs[i];
                if (!gp.empty())
                    for (std::size_t i = 0; i < gp.size(); ++i)
                        gp[i] += grads.wrt_params[i];
            }
        });
    }
    return y;
}

Tensor init_linear_weight(Shape shape, std::size_t fan_in, Xoshiro256& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor w = Tensor::zeros(std::move(shape), /*requires_grad=*/true);
    for (double& v : w.values()) v = rng.uniform(-bound, bound);
    return w;
}

Tensor init_linear_bias(std::size_t n, std::size_t fan_in, Xoshiro256& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor b = Tensor::zeros({n}, /*requires_grad=*/true);
    for (double& v : b.values()) v = rng.uniform(-bound, bound);
    return b;
}

Tensor init_circuit_params(int n_params, Xoshiro256& rng) {
    Tensor p = Tensor::zeros({static_cast<std::size_t>(n_params)},
                             /*requires_grad=*/true);
    for (double& v : p.values())
        v = rng.uniform(-std::numbers::pi, std::numbers::pi);
    return p;
}

AmplitudeBranch AmplitudeBranch::create(Xoshiro256& init_rng,
                                        std::size_t in_features) {
    AmplitudeBranch b;
    b.spec = make_amplitude_circuit();
    b.proj_w = init_linear_weight({16, in_features}, in_features, init_rng);
    b.proj_b = init_linear_bias(16, in_features, init_rng);
    b.circuit_params = init_circuit_params(b.spec.n_params, init_rng);
    return b;
}

Tensor AmplitudeBranch::forward(Tape& tape, const Tensor& features) const {
    Tensor projected = nn::linear(tape, features, proj_w, proj_b);
    return quantum_layer(tape, projected, circuit_params, spec);
}

AngleBranch AngleBranch::create(Xoshiro256& init_rng, std::size_t in_features) {
    AngleBranch b;
    b.spec = make_angle_circuit();
    b.proj_w = init_linear_weight({4, in_features}, in_features, init_rng);
    b.proj_b = init_linear_bias(4, in_features, init_rng);
    b.circuit_params = init_circuit_params(b.spec.n_params, init_rng);
    return b;
}

Tensor AngleBranch::forward(Tape& tape, const Tensor& features) const {
    Tensor projected = nn::linear(tape, features, proj_w, proj_b);
    Tensor bounded = nn::tanh_act(tape, projected);
    return quantum_layer(tape, bounded, circuit_params, spec);
}

FusionBlock FusionBlock::create(Xoshiro256& init_rng) {
    FusionBlock f;
    f.weight = init_linear_weight({128, 10}, 10, init_rng);
    f.bias = init_linear_bias(128, 10, init_rng);
    f.ln_gamma = Tensor::full({128}, 1.0, /*requires_grad=*/true);
    f.ln_beta = Tensor::zeros({128}, /*requires_grad=*/true);
    return f;
}

Tensor FusionBlock::forward(Tape& tape, const Tensor& q1, const Tensor& q2,
                            bool training, Xoshiro256& dropout_rng) const {
    if (q1.shape().size() != 2 || q1.dim(1) != 4)
        throw std::invalid_argument("fuse: q1 must be [B,4], got " +
                                    shape_str(q1.shape()));
    if (q2.shape().size() != 2 || q2.dim(1) != 6)
        throw std::invalid_argument("fuse: q2 must be [B,6], got " +
                                    shape_str(q2.shape()));
    Tensor joined = nn::concat_cols(tape, q1, q2);
    Tensor projected = nn::linear(tape, joined, weight, bias);
    Tensor normed = nn::layernorm(tape, projected, ln_gamma, ln_beta);
    Tensor activated = nn::relu(tape, normed);
    return nn::dropout(tape, activated, dropout_rate, training, dropout_rng);
}

}  // namespace qfusion
