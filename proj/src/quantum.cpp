#include "qfusion/quantum.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

namespace qfusion::quantum {

namespace {

constexpr double kNormFloor = 1e-9;

void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

using Mat2 = std::array<cdouble, 4>;  // row-major [u00 u01; u10 u11]

Mat2 rotation_matrix(GateKind kind, double theta) {
    const double c = std::cos(theta / 2.0);
    const double s = std::sin(theta / 2.0);
    switch (kind) {
        case GateKind::RX:
            return {cdouble(c, 0), cdouble(0, -s), cdouble(0, -s), cdouble(c, 0)};
        case GateKind::RY:
            return {cdouble(c, 0), cdouble(-s, 0), cdouble(s, 0), cdouble(c, 0)};
        case GateKind::RZ:
            return {std::exp(cdouble(0, -theta / 2.0)), cdouble(0, 0),
                    cdouble(0, 0), std::exp(cdouble(0, theta / 2.0))};
        default:
            throw std::logic_error("rotation_matrix: not a rotation gate");
    }
}

// d/dtheta of the rotation matrix: (-i G / 2) R(theta).
Mat2 rotation_derivative(GateKind kind, double theta) {
    const double c = 0.5 * std::cos(theta / 2.0);
    const double s = 0.5 * std::sin(theta / 2.0);
    switch (kind) {
        case GateKind::RX:
            return {cdouble(-s, 0), cdouble(0, -c), cdouble(0, -c), cdouble(-s, 0)};
        case GateKind::RY:
            return {cdouble(-s, 0), cdouble(-c, 0), cdouble(c, 0), cdouble(-s, 0)};
        case GateKind::RZ:
            return {cdouble(0, -0.5) * std::exp(cdouble(0, -theta / 2.0)),
                    cdouble(0, 0), cdouble(0, 0),
                    cdouble(0, 0.5) * std::exp(cdouble(0, theta / 2.0))};
        default:
            throw std::logic_error("rotation_derivative: not a rotation gate");
    }
}

Mat2 hadamard_matrix() {
    const double r = 1.0 / std::sqrt(2.0);
    return {cdouble(r, 0), cdouble(r, 0), cdouble(r, 0), cdouble(-r, 0)};
}

Mat2 adjoint(const Mat2& u) {
    return {std::conj(u[0]), std::conj(u[2]), std::conj(u[1]), std::conj(u[3])};
}

void apply_single_qubit(std::vector<cdouble>& amps, int target, const Mat2& u) {
    const std::size_t mask = std::size_t{1} << target;
    const std::size_t n = amps.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (i & mask) continue;
        const cdouble a = amps[i];
        const cdouble b = amps[i | mask];
        amps[i] = u[0] * a + u[1] * b;
        amps[i | mask] = u[2] * a + u[3] * b;
    }
}

void apply_cnot(std::vector<cdouble>& amps, int control, int target) {
    const std::size_t cmask = std::size_t{1} << control;
    const std::size_t tmask = std::size_t{1} << target;
    const std::size_t n = amps.size();
    for (std::size_t i = 0; i < n; ++i) {
        if ((i & cmask) && !(i & tmask)) std::swap(amps[i], amps[i | tmask]);
    }
}

double resolve_angle(const GateOp& gate, std::span<const double> params,
                     std::span<const double> inputs) {
    switch (gate.source) {
        case AngleSource::Fixed:
            return gate.angle;
        case AngleSource::Param:
            require(gate.slot >= 0 &&
                        static_cast<std::size_t>(gate.slot) < params.size(),
                    "gate parameter slot " + std::to_string(gate.slot) +
                        " outside parameter vector of size " +
                        std::to_string(params.size()));
            return params[gate.slot];
        case AngleSource::Input:
            require(gate.slot >= 0 &&
                        static_cast<std::size_t>(gate.slot) < inputs.size(),
                    "gate input slot outside input vector");
            return gate.scale * inputs[gate.slot];
    }
    throw std::logic_error("resolve_angle: unreachable");
}

Mat2 resolved_matrix(const GateOp& gate, std::span<const double> params,
                     std::span<const double> inputs) {
    if (gate.kind == GateKind::H) return hadamard_matrix();
    return rotation_matrix(gate.kind, resolve_angle(gate, params, inputs));
}

void check_qubit(int q, int n_qubits, const char* what) {
    require(q >= 0 && q < n_qubits, std::string(what) + " qubit " +
                                        std::to_string(q) +
                                        " outside register of size " +
                                        std::to_string(n_qubits));
}

// O |psi> for a single-qubit Pauli.
std::vector<cdouble> observable_times(const StateVector& state,
                                      const Observable& obs) {
    const std::size_t mask = std::size_t{1} << obs.qubit;
    std::vector<cdouble> out(state.size());
    if (obs.axis == PauliAxis::Z) {
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = (i & mask) ? -state.amps[i] : state.amps[i];
    } else {
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = state.amps[i ^ mask];
    }
    return out;
}

StateVector embed(const CircuitSpec& spec, std::span<const double> inputs) {
    if (spec.embedding == EmbeddingKind::Amplitude) return amplitude_embed(inputs);
    // Angle-embedding rotations live in the gate list (AngleSource::Input
    // with scale pi); the initial state is |0...0>.
    for (double x : inputs)
        require(std::abs(x) <= 1.0 + 1e-9,
                "angle embedding: feature " + std::to_string(x) +
                    " outside [-1,1]; a bounding activation is missing upstream");
    return zero_state(spec.n_qubits);
}

}  // namespace

double StateVector::norm_sq() const {
    double s = 0.0;
    for (const cdouble& a : amps) s += std::norm(a);
    return s;
}

StateVector zero_state(int n_qubits) {
    require(n_qubits >= 1 && n_qubits <= kMaxQubits,
            "zero_state: qubit count " + std::to_string(n_qubits) +
                " outside supported range [1," + std::to_string(kMaxQubits) + "]");
    StateVector s;
    s.n_qubits = n_qubits;
    s.amps.assign(std::size_t{1} << n_qubits, cdouble(0, 0));
    s.amps[0] = cdouble(1, 0);
    return s;
}

void CircuitSpec::validate() const {
    require(n_qubits >= 1 && n_qubits <= kMaxQubits, "circuit: bad qubit count");
    require(!observables.empty(), "circuit: observable list must be non-empty");
    for (const Observable& o : observables) check_qubit(o.qubit, n_qubits, "observable");
    std::vector<bool> seen(static_cast<std::size_t>(std::max(n_params, 0)), false);
    for (const GateOp& g : gates) {
        check_qubit(g.target, n_qubits, "target");
        if (g.kind == GateKind::CNOT) {
            check_qubit(g.control, n_qubits, "control");
            require(g.control != g.target, "circuit: CNOT control equals target");
        }
        if (g.source == AngleSource::Param) {
            require(g.slot >= 0 && g.slot < n_params,
                    "circuit: parameter slot out of range");
            seen[static_cast<std::size_t>(g.slot)] = true;
        }
        if (g.source == AngleSource::Input)
            require(g.slot >= 0 && g.slot < n_inputs,
                    "circuit: input slot out of range");
    }
    for (int p = 0; p < n_params; ++p)
        require(seen[static_cast<std::size_t>(p)],
                "circuit: parameter slot " + std::to_string(p) + " unused; "
                "slots must form a contiguous 0..P-1 range");
    if (embedding == EmbeddingKind::Amplitude)
        require(n_inputs == 1 << n_qubits,
                "circuit: amplitude embedding needs 2^n inputs");
}

void apply_gate(StateVector& state, const GateOp& gate,
                std::span<const double> params, std::span<const double> inputs) {
    check_qubit(gate.target, state.n_qubits, "target");
    if (gate.kind == GateKind::CNOT) {
        check_qubit(gate.control, state.n_qubits, "control");
        require(gate.control != gate.target, "apply_gate: CNOT control equals target");
        apply_cnot(state.amps, gate.control, gate.target);
        return;
    }
    apply_single_qubit(state.amps, gate.target, resolved_matrix(gate, params, inputs));
}

StateVector amplitude_embed(std::span<const double> features) {
    const std::size_t n = features.size();
    int n_qubits = 0;
    while ((std::size_t{1} << n_qubits) < n) ++n_qubits;
    require((std::size_t{1} << n_qubits) == n && n >= 2,
            "amplitude_embed: feature count must be a power of two >= 2");
    require(n_qubits <= kMaxQubits, "amplitude_embed: register too large");

    double norm_sq = 0.0;
    for (double f : features) norm_sq += f * f;
    const double norm = std::sqrt(norm_sq);
    if (norm <= kNormFloor)
        throw NearZeroNormError(
            "amplitude_embed: feature vector norm " + std::to_string(norm) +
            " at or below the 1e-9 floor; upstream projection is degenerate");

    StateVector s;
    s.n_qubits = n_qubits;
    s.amps.resize(n);
    for (std::size_t i = 0; i < n; ++i) s.amps[i] = cdouble(features[i] / norm, 0);
    return s;
}

StateVector angle_embed(std::span<const double> features) {
    const int n_qubits = static_cast<int>(features.size());
    require(n_qubits >= 1 && n_qubits <= kMaxQubits,
            "angle_embed: bad feature count");
    for (double x : features)
        require(std::abs(x) <= 1.0 + 1e-9,
                "angle_embed: feature " + std::to_string(x) +
                    " outside [-1,1]; a bounding activation is missing upstream");

    StateVector s = zero_state(n_qubits);
    for (int q = 0; q < n_qubits; ++q) {
        apply_single_qubit(s.amps, q,
                           rotation_matrix(GateKind::RY,
                                           features[static_cast<std::size_t>(q)] *
                                               std::numbers::pi));
    }
    return s;
}

double expval(const StateVector& state, const Observable& obs) {
    check_qubit(obs.qubit, state.n_qubits, "observable");
    const std::size_t mask = std::size_t{1} << obs.qubit;
    double acc = 0.0;
    if (obs.axis == PauliAxis::Z) {
        for (std::size_t i = 0; i < state.size(); ++i)
            acc += (i & mask) ? -std::norm(state.amps[i]) : std::norm(state.amps[i]);
    } else {
        for (std::size_t i = 0; i < state.size(); ++i)
            acc += (std::conj(state.amps[i]) * state.amps[i ^ mask]).real();
    }
    return acc;
}

std::vector<double> run_circuit(const CircuitSpec& spec,
                                std::span<const double> inputs,
                                std::span<const double> params) {
    require(static_cast<int>(inputs.size()) == spec.n_inputs,
            "run_circuit: expected " + std::to_string(spec.n_inputs) +
                " inputs, got " + std::to_string(inputs.size()));
    require(static_cast<int>(params.size()) == spec.n_params,
            "run_circuit: expected " + std::to_string(spec.n_params) +
                " params, got " + std::to_string(params.size()));

    StateVector state = embed(spec, inputs);
    for (const GateOp& g : spec.gates) apply_gate(state, g, params, inputs);

    std::vector<double> out;
    out.reserve(spec.observables.size());
    for (const Observable& o : spec.observables) out.push_back(expval(state, o));
    return out;
}

CircuitGradients grad_backprop(const CircuitSpec& spec,
                               std::span<const double> inputs,
                               std::span<const double> params,
                               std::span<const double> upstream) {
    require(upstream.size() == spec.observables.size(),
            "grad_backprop: upstream/observable count mismatch");
    require(static_cast<int>(inputs.size()) == spec.n_inputs &&
                static_cast<int>(params.size()) == spec.n_params,
            "grad_backprop: arity mismatch");

    // Forward, keeping the state before every gate.
    std::vector<StateVector> states;
    states.reserve(spec.gates.size() + 1);
    states.push_back(embed(spec, inputs));
    for (const GateOp& g : spec.gates) {
        StateVector next = states.back();
        apply_gate(next, g, params, inputs);
        states.push_back(std::move(next));
    }
    const StateVector& final_state = states.back();

    // Cotangent mu = sum_k upstream_k O_k |psi>; then for each gate U(theta),
    // dL/dtheta = 2 Re( <mu| dU/dtheta |psi_in> ) with mu pulled back by U^dag.
    std::vector<cdouble> mu(final_state.size(), cdouble(0, 0));
    for (std::size_t k = 0; k < upstream.size(); ++k) {
        if (upstream[k] == 0.0) continue;
        std::vector<cdouble> op = observable_times(final_state, spec.observables[k]);
        for (std::size_t i = 0; i < mu.size(); ++i) mu[i] += upstream[k] * op[i];
    }

    CircuitGradients grads;
    grads.wrt_inputs.assign(static_cast<std::size_t>(spec.n_inputs), 0.0);
    grads.wrt_params.assign(static_cast<std::size_t>(spec.n_params), 0.0);

    for (std::size_t gi = spec.gates.size(); gi-- > 0;) {
        const GateOp& g = spec.gates[gi];
        const std::vector<cdouble>& in_amps = states[gi].amps;
        if (g.is_rotation() && g.source != AngleSource::Fixed) {
            const double theta = resolve_angle(g, params, inputs);
            const Mat2 du = rotation_derivative(g.kind, theta);
            // <mu| dU |psi_in>, summed over the target-qubit pairs
            const std::size_t mask = std::size_t{1} << g.target;
            cdouble acc(0, 0);
            for (std::size_t i = 0; i < in_amps.size(); ++i) {
                if (i & mask) continue;
                const cdouble a = in_amps[i];
                const cdouble b = in_amps[i | mask];
                acc += std::conj(mu[i]) * (du[0] * a + du[1] * b);
                acc += std::conj(mu[i | mask]) * (du[2] * a + du[3] * b);
            }
            const double grad = 2.0 * acc.real();
            if (g.source == AngleSource::Param)
                grads.wrt_params[static_cast<std::size_t>(g.slot)] += grad;
            else  // chain rule through theta = scale * x
                grads.wrt_inputs[static_cast<std::size_t>(g.slot)] += grad * g.scale;
        }
        // Pull the cotangent back through the gate.
        if (g.kind == GateKind::CNOT) {
            apply_cnot(mu, g.control, g.target);
        } else {
            apply_single_qubit(mu, g.target,
                               adjoint(resolved_matrix(g, params, inputs)));
        }
    }

    if (spec.embedding == EmbeddingKind::Amplitude) {
        // psi0 = f / ||f||; with r = 2 Re(mu0), dL/df = (r - (fhat.r) fhat)/||f||.
        double norm_sq = 0.0;
        for (double f : inputs) norm_sq += f * f;
        const double norm = std::sqrt(norm_sq);
        const std::vector<cdouble>& psi0 = states.front().amps;
        double dot = 0.0;
        std::vector<double> r(inputs.size());
        for (std::size_t i = 0; i < inputs.size(); ++i) {
            r[i] = 2.0 * mu[i].real();
            dot += psi0[i].real() * r[i];
        }
        for (std::size_t i = 0; i < inputs.size(); ++i)
            grads.wrt_inputs[i] = (r[i] - dot * psi0[i].real()) / norm;
    }
    return grads;
}

std::vector<double> grad_param_shift(const CircuitSpec& spec,
                                     std::span<const double> inputs,
                                     std::span<const double> params,
                                     std::span<const double> upstream) {
    require(upstream.size() == spec.observables.size(),
            "grad_param_shift: upstream/observable count mismatch");
    std::vector<double> grads(static_cast<std::size_t>(spec.n_params), 0.0);
    constexpr double kShift = std::numbers::pi / 2.0;

    for (std::size_t gi = 0; gi < spec.gates.size(); ++gi) {
        const GateOp& g = spec.gates[gi];
        if (!(g.is_rotation() && g.source == AngleSource::Param)) continue;
        // shift this one gate occurrence; other gates sharing the slot keep
        // reading the unshifted parameter vector
        CircuitSpec tweaked = spec;
        GateOp& tg = tweaked.gates[gi];
        tg.source = AngleSource::Fixed;
        const double theta = params[static_cast<std::size_t>(g.slot)];

        tg.angle = theta + kShift;
        const std::vector<double> plus = run_circuit(tweaked, inputs, params);
        tg.angle = theta - kShift;
        const std::vector<double> minus = run_circuit(tweaked, inputs, params);

        double contrib = 0.0;
        for (std::size_t k = 0; k < upstream.size(); ++k)
            contrib += upstream[k] * (plus[k] - minus[k]) / 2.0;
        grads[static_cast<std::size_t>(g.slot)] += contrib;
    }
    return grads;
}

DenseMatrix DenseMatrix::identity(std::size_t dim) {
    DenseMatrix m;
    m.dim = dim;
    m.a.assign(dim * dim, cdouble(0, 0));
    for (std::size_t i = 0; i < dim; ++i) m.at(i, i) = cdouble(1, 0);
    return m;
}

DenseMatrix kron(const DenseMatrix& a, const DenseMatrix& b) {
    DenseMatrix m;
    m.dim = a.dim * b.dim;
    m.a.assign(m.dim * m.dim, cdouble(0, 0));
    for (std::size_t i = 0; i < a.dim; ++i)
        for (std::size_t j = 0; j < a.dim; ++j) {
            const cdouble av = a.at(i, j);
            if (av == cdouble(0, 0)) continue;
            for (std::size_t k = 0; k < b.dim; ++k)
                for (std::size_t l = 0; l < b.dim; ++l)
                    m.at(i * b.dim + k, j * b.dim + l) = av * b.at(k, l);
        }
    return m;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    require(a.dim == b.dim, "matmul: dimension mismatch");
    DenseMatrix m;
    m.dim = a.dim;
    m.a.assign(m.dim * m.dim, cdouble(0, 0));
    for (std::size_t i = 0; i < m.dim; ++i)
        for (std::size_t k = 0; k < m.dim; ++k) {
            const cdouble av = a.at(i, k);
            if (av == cdouble(0, 0)) continue;
            for (std::size_t j = 0; j < m.dim; ++j)
                m.at(i, j) += av * b.at(k, j);
        }
    return m;
}

std::vector<cdouble> matvec(const DenseMatrix& m, std::span<const cdouble> v) {
    require(v.size() == m.dim, "matvec: dimension mismatch");
    std::vector<cdouble> out(m.dim, cdouble(0, 0));
    for (std::size_t i = 0; i < m.dim; ++i)
        for (std::size_t j = 0; j < m.dim; ++j) out[i] += m.at(i, j) * v[j];
    return out;
}

namespace {

DenseMatrix mat2_to_dense(const Mat2& u) {
    DenseMatrix m;
    m.dim = 2;
    m.a = {u[0], u[1], u[2], u[3]};
    return m;
}

// I(2^(n-1-q)) (x) M (x) I(2^q): acts on qubit q with qubit 0 as the LSB.
DenseMatrix embed_single(const DenseMatrix& m2, int qubit, int n_qubits) {
    const DenseMatrix low = DenseMatrix::identity(std::size_t{1} << qubit);
    const DenseMatrix high =
        DenseMatrix::identity(std::size_t{1} << (n_qubits - 1 - qubit));
    return kron(high, kron(m2, low));
}

}  // namespace

DenseMatrix gate_unitary_dense(const GateOp& gate, int n_qubits,
                               std::span<const double> params,
                               std::span<const double> inputs) {
    if (gate.kind == GateKind::CNOT) {
        // CNOT(c,t) = P0 at c (x) I  +  P1 at c (x) X at t
        DenseMatrix p0, p1, x;
        p0.dim = p1.dim = x.dim = 2;
        p0.a = {cdouble(1, 0), cdouble(0, 0), cdouble(0, 0), cdouble(0, 0)};
        p1.a = {cdouble(0, 0), cdouble(0, 0), cdouble(0, 0), cdouble(1, 0)};
        x.a = {cdouble(0, 0), cdouble(1, 0), cdouble(1, 0), cdouble(0, 0)};
        DenseMatrix keep = embed_single(p0, gate.control, n_qubits);
        DenseMatrix flip = matmul(embed_single(p1, gate.control, n_qubits),
                                  embed_single(x, gate.target, n_qubits));
        DenseMatrix out;
        out.dim = keep.dim;
        out.a.resize(out.dim * out.dim);
        for (std::size_t i = 0; i < out.a.size(); ++i)
            out.a[i] = keep.a[i] + flip.a[i];
        return out;
    }
    return embed_single(mat2_to_dense(resolved_matrix(gate, params, inputs)),
                        gate.target, n_qubits);
}

DenseMatrix circuit_unitary_dense(int n_qubits, std::span<const GateOp> gates,
                                  std::span<const double> params,
                                  std::span<const double> inputs) {
    DenseMatrix u = DenseMatrix::identity(std::size_t{1} << n_qubits);
    for (const GateOp& g : gates)
        u = matmul(gate_unitary_dense(g, n_qubits, params, inputs), u);
    return u;
}

DenseMatrix observable_dense(const Observable& obs, int n_qubits) {
    DenseMatrix p;
    p.dim = 2;
    if (obs.axis == PauliAxis::Z)
        p.a = {cdouble(1, 0), cdouble(0, 0), cdouble(0, 0), cdouble(-1, 0)};
    else
        p.a = {cdouble(0, 0), cdouble(1, 0), cdouble(1, 0), cdouble(0, 0)};
    return embed_single(p, obs.qubit, n_qubits);
}

std::string dump_circuit(const CircuitSpec& spec, std::span<const double> inputs,
                         std::span<const double> params) {
    std::ostringstream out;
    out << "qubits " << spec.n_qubits << "\n";
    char buf[64];
    auto emit_rotation = [&](const char* name, int target, double angle,
                             bool trainable) {
        // %.17g keeps the dump -> parse -> re-simulate loop bit-faithful
        std::snprintf(buf, sizeof(buf), "%.17g", angle);
        out << name << " q" << target << " " << buf
            << " trainable=" << (trainable ? 1 : 0) << "\n";
    };
    for (const GateOp& g : spec.gates) {
        switch (g.kind) {
            case GateKind::RX:
            case GateKind::RY:
            case GateKind::RZ: {
                const char* name = g.kind == GateKind::RX   ? "RX"
                                   : g.kind == GateKind::RY ? "RY"
                                                            : "RZ";
                emit_rotation(name, g.target, resolve_angle(g, params, inputs),
                              g.source == AngleSource::Param);
                break;
            }
            case GateKind::H:
                out << "H q" << g.target << "\n";
                break;
            case GateKind::CNOT:
                out << "CNOT q" << g.control << " q" << g.target << "\n";
                break;
        }
    }
    out << "measure";
    for (const Observable& o : spec.observables)
        out << " " << (o.axis == PauliAxis::Z ? "Z" : "X") << o.qubit;
    out << "\n";
    return out.str();
}

ParsedCircuit parse_circuit_dump(const std::string& text) {
    ParsedCircuit result;
    std::istringstream in(text);
    std::string line;
    auto parse_qubit = [](const std::string& tok) {
        if (tok.size() < 2 || tok[0] != 'q')
            throw std::invalid_argument("circuit dump: bad qubit token '" + tok + "'");
        return std::stoi(tok.substr(1));
    };
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string head;
        ls >> head;
        if (head == "qubits") {
            ls >> result.n_qubits;
        } else if (head == "RX" || head == "RY" || head == "RZ") {
            GateOp g;
            g.kind = head == "RX" ? GateKind::RX
                     : head == "RY" ? GateKind::RY
                                    : GateKind::RZ;
            std::string qtok, angle_tok, train_tok;
            ls >> qtok >> angle_tok >> train_tok;
            g.target = parse_qubit(qtok);
            g.angle = std::stod(angle_tok);
            result.gates.push_back(g);
        } else if (head == "H") {
            std::string qtok;
            ls >> qtok;
            GateOp g;
            g.kind = GateKind::H;
            g.target = parse_qubit(qtok);
            result.gates.push_back(g);
        } else if (head == "CNOT") {
            std::string ctok, ttok;
            ls >> ctok >> ttok;
            GateOp g;
            g.kind = GateKind::CNOT;
            g.control = parse_qubit(ctok);
            g.target = parse_qubit(ttok);
            result.gates.push_back(g);
        } else if (head == "measure") {
            std::string tok;
            while (ls >> tok) {
                Observable o;
                o.axis = tok[0] == 'Z' ? PauliAxis::Z : PauliAxis::X;
                o.qubit = std::stoi(tok.substr(1));
                result.observables.push_back(o);
            }
        } else {
            throw std::invalid_argument("circuit dump: unknown directive '" + head + "'");
        }
    }
    if (result.n_qubits == 0)
        throw std::invalid_argument("circuit dump: missing 'qubits' header");
    return result;
}

}  // namespace qfusion::quantum
