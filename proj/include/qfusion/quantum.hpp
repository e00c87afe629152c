#pragma once

#include <complex>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace qfusion::quantum {

using cdouble = std::complex<double>;

/// Raised when an amplitude-embedding input has an L2 norm at or below the
/// 1e-9 floor: the upstream projection produced a degenerate vector.
struct NearZeroNormError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr int kMaxQubits = 12;

/// Pure n-qubit state. Basis index bit j corresponds to qubit j, with
/// qubit 0 as the least significant bit.
struct StateVector {
    int n_qubits = 0;
    std::vector<cdouble> amps;

    std::size_t size() const { return amps.size(); }
    double norm_sq() const;
};

/// Amplitude 1 at |0...0>.
StateVector zero_state(int n_qubits);

enum class GateKind { RX, RY, RZ, H, CNOT };

/// Where a rotation gate's angle comes from when a circuit runs.
enum class AngleSource { Fixed, Param, Input };

struct GateOp {
    GateKind kind = GateKind::RY;
    int target = 0;
    int control = -1;  // CNOT only
    double angle = 0.0;
    AngleSource source = AngleSource::Fixed;
    int slot = -1;      // index into the params (or inputs) vector
    double scale = 1.0;  // Input gates only: resolved angle = scale * inputs[slot]

    bool is_rotation() const {
        return kind == GateKind::RX || kind == GateKind::RY || kind == GateKind::RZ;
    }
};

enum class PauliAxis { Z, X };

struct Observable {
    PauliAxis axis = PauliAxis::Z;
    int qubit = 0;
};

enum class EmbeddingKind { Amplitude, Angle };

/// A full circuit: embedding, gate sequence, observables. Rotation angles
/// are resolved against (inputs, params) at run time.
struct CircuitSpec {
    int n_qubits = 4;
    EmbeddingKind embedding = EmbeddingKind::Angle;
    std::vector<GateOp> gates;
    std::vector<Observable> observables;
    int n_inputs = 0;
    int n_params = 0;

    void validate() const;
};

/// Applies one gate in place. Rotation convention: R_G(theta) = exp(-i theta G / 2).
void apply_gate(StateVector& state, const GateOp& gate,
                std::span<const double> params = {},
                std::span<const double> inputs = {});

/// Writes L2-normalized features into the amplitudes of a 2^n state.
/// Throws NearZeroNormError when the norm is at or below 1e-9.
StateVector amplitude_embed(std::span<const double> features);

/// Product state with qubit j rotated by R_Y(x_j * pi); |x_j| <= 1 required.
StateVector angle_embed(std::span<const double> features);

/// <psi| P_j |psi> for P in {Z, X}; always a real value in [-1, 1].
double expval(const StateVector& state, const Observable& obs);

/// Embeds, applies all gates, and measures every observable in spec order.
std::vector<double> run_circuit(const CircuitSpec& spec,
                                std::span<const double> inputs,
                                std::span<const double> params);

struct CircuitGradients {
    std::vector<double> wrt_inputs;
    std::vector<double> wrt_params;
};

/// Exact gradients of sum_k upstream[k] * output[k] by reverse propagation
/// through the complex statevector. Covers both circuit parameters and the
/// embedded inputs (through the L2 normalization for amplitude embedding).
CircuitGradients grad_backprop(const CircuitSpec& spec,
                               std::span<const double> inputs,
                               std::span<const double> params,
                               std::span<const double> upstream);

/// Parameter-shift gradients for the trainable rotation parameters only:
/// g = (E(theta + pi/2) - E(theta - pi/2)) / 2 per rotation, contracted
/// with the upstream cotangent.
std::vector<double> grad_param_shift(const CircuitSpec& spec,
                                     std::span<const double> inputs,
                                     std::span<const double> params,
                                     std::span<const double> upstream);

/// Dense row-major complex matrix used by the Kronecker-product evaluation
/// path (the oracle route, kept independent of apply_gate).
struct DenseMatrix {
    std::size_t dim = 0;
    std::vector<cdouble> a;

    static DenseMatrix identity(std::size_t dim);
    cdouble& at(std::size_t r, std::size_t c) { return a[r * dim + c]; }
    const cdouble& at(std::size_t r, std::size_t c) const { return a[r * dim + c]; }
};

DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
std::vector<cdouble> matvec(const DenseMatrix& m, std::span<const cdouble> v);

/// Full 2^n x 2^n unitary of one gate, built from Kronecker products.
DenseMatrix gate_unitary_dense(const GateOp& gate, int n_qubits,
                               std::span<const double> params = {},
                               std::span<const double> inputs = {});

/// Product of all gate unitaries in application order (last gate leftmost).
DenseMatrix circuit_unitary_dense(int n_qubits, std::span<const GateOp> gates,
                                  std::span<const double> params = {},
                                  std::span<const double> inputs = {});

/// Dense 2^n x 2^n matrix of a single-qubit Pauli observable.
DenseMatrix observable_dense(const Observable& obs, int n_qubits);

/// Plain-text dump: "qubits N", one gate per line, then a "measure" line.
/// Rotation angles are resolved against (inputs, params).
std::string dump_circuit(const CircuitSpec& spec, std::span<const double> inputs,
                         std::span<const double> params);

struct ParsedCircuit {
    int n_qubits = 0;
    std::vector<GateOp> gates;  // all angles resolved (AngleSource::Fixed)
    std::vector<Observable> observables;
};

ParsedCircuit parse_circuit_dump(const std::string& text);

}  // namespace qfusion::quantum
