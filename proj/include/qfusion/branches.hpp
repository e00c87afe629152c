#pragma once

#include "qfusion/nn.hpp"
#include "qfusion/quantum.hpp"
#include "qfusion/tensor.hpp"

namespace qfusion {

/// Amplitude-embedding circuit: 16 features into 4 qubits, then per layer
/// RX/RY rotations on every qubit followed by the CNOT ring; measures Z on
/// each qubit (4 features out). 8 trainable parameters per layer.
quantum::CircuitSpec make_amplitude_circuit(int layers = 2);

/// Angle-embedding circuit: RY(x_j * pi) per qubit, then the same layered
/// RX/RY + CNOT-ring template; measures Z0..Z3 plus X0, X1 (6 features out).
quantum::CircuitSpec make_angle_circuit(int layers = 2);

/// Runs `spec` row-wise over a [B, n_inputs] batch with a shared parameter
/// vector, producing [B, n_observables]. Backward uses exact reverse-mode
/// propagation through the statevector for both inputs and parameters.
Tensor quantum_layer(Tape& tape, const Tensor& features, const Tensor& params,
                     const quantum::CircuitSpec& spec);

/// Projection 2048 -> 16, L2 normalization inside the embedding, amplitude
/// circuit, Z readout: q1 in R^4.
struct AmplitudeBranch {
    Tensor proj_w;  // [16, 2048]
    Tensor proj_b;  // [16]
    Tensor circuit_params;
    quantum::CircuitSpec spec;

    static AmplitudeBranch create(Xoshiro256& init_rng, std::size_t in_features = 2048);
    Tensor forward(Tape& tape, const Tensor& features) const;
};

/// Projection 2048 -> 4 with tanh bounding into [-1,1], angle circuit with
/// ring entanglement, Z0..Z3/X0/X1 readout: q2 in R^6.
struct AngleBranch {
    Tensor proj_w;  // [4, 2048]
    Tensor proj_b;  // [4]
    Tensor circuit_params;
    quantum::CircuitSpec spec;

    static AngleBranch create(Xoshiro256& init_rng, std::size_t in_features = 2048);
    Tensor forward(Tape& tape, const Tensor& features) const;
};

/// Fused quantum representation: concat(q1, q2) -> linear 10->128 ->
/// layernorm -> ReLU -> dropout.
struct FusionBlock {
    Tensor weight;    // [128, 10]
    Tensor bias;      // [128]
    Tensor ln_gamma;  // [128]
    Tensor ln_beta;   // [128]
    double dropout_rate = 0.3;

    static FusionBlock create(Xoshiro256& init_rng);
    Tensor forward(Tape& tape, const Tensor& q1, const Tensor& q2, bool training,
                   Xoshiro256& dropout_rng) const;
};

/// Kaiming-style fan-in uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Tensor init_linear_weight(Shape shape, std::size_t fan_in, Xoshiro256& rng);
Tensor init_linear_bias(std::size_t n, std::size_t fan_in, Xoshiro256& rng);

/// Circuit parameters start uniform in (-pi, pi).
Tensor init_circuit_params(int n_params, Xoshiro256& rng);

}  // namespace qfusion
