#include <cmath>
#include <numbers>

#include "doctest.h"
#include "qfusion/branches.hpp"
#include "qfusion/quantum.hpp"
#include "qfusion/rng.hpp"

using namespace qfusion;
using namespace qfusion::quantum;

namespace {

GateOp rot(GateKind kind, int target, double angle) {
    GateOp g;
    g.kind = kind;
    g.target = target;
    g.angle = angle;
    return g;
}

GateOp cnot(int control, int target) {
    GateOp g;
    g.kind = GateKind::CNOT;
    g.control = control;
    g.target = target;
    return g;
}

GateOp hadamard(int target) {
    GateOp g;
    g.kind = GateKind::H;
    g.target = target;
    return g;
}

StateVector random_state(int n_qubits, Xoshiro256& rng) {
    StateVector s;
    s.n_qubits = n_qubits;
    s.amps.resize(std::size_t{1} << n_qubits);
    double norm_sq = 0.0;
    for (cdouble& a : s.amps) {
        a = cdouble(rng.normal(), rng.normal());
        norm_sq += std::norm(a);
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (cdouble& a : s.amps) a *= inv;
    return s;
}

std::vector<GateOp> random_gates(int n_qubits, std::size_t count, Xoshiro256& rng) {
    std::vector<GateOp> gates;
    for (std::size_t i = 0; i < count; ++i) {
        switch (rng.bounded(5)) {
            case 0:
                gates.push_back(rot(GateKind::RX, static_cast<int>(rng.bounded(n_qubits)),
                                    rng.uniform(-3.0, 3.0)));
                break;
            case 1:
                gates.push_back(rot(GateKind::RY, static_cast<int>(rng.bounded(n_qubits)),
                                    rng.uniform(-3.0, 3.0)));
                break;
            case 2:
                gates.push_back(rot(GateKind::RZ, static_cast<int>(rng.bounded(n_qubits)),
                                    rng.uniform(-3.0, 3.0)));
                break;
            case 3:
                gates.push_back(hadamard(static_cast<int>(rng.bounded(n_qubits))));
                break;
            default: {
                const int c = static_cast<int>(rng.bounded(n_qubits));
                int t = static_cast<int>(rng.bounded(n_qubits));
                if (t == c) t = (t + 1) % n_qubits;
                gates.push_back(cnot(c, t));
                break;
            }
        }
    }
    return gates;
}

}  // namespace

TEST_CASE("zero state is |0...0> with unit norm and all <Z> = +1") {
    StateVector s = zero_state(4);
    CHECK(s.size() == 16);
    CHECK(s.amps[0] == cdouble(1, 0));
    for (std::size_t i = 1; i < 16; ++i) CHECK(s.amps[i] == cdouble(0, 0));
    CHECK(s.norm_sq() == 1.0);
    for (int q = 0; q < 4; ++q)
        CHECK(expval(s, {PauliAxis::Z, q}) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("zero state rejects out-of-range register sizes") {
    CHECK_THROWS_AS(zero_state(0), std::invalid_argument);
    CHECK_THROWS_AS(zero_state(13), std::invalid_argument);
}

TEST_CASE("RY(pi) flips |0> to |1>") {
    StateVector s = zero_state(1);
    apply_gate(s, rot(GateKind::RY, 0, std::numbers::pi));
    CHECK(std::abs(s.amps[0]) < 1e-15);
    CHECK(s.amps[1].real() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("H then CNOT prepares the Bell state") {
    StateVector s = zero_state(2);
    CHECK(expval(s, {PauliAxis::Z, 1}) == doctest::Approx(1.0));
    apply_gate(s, hadamard(0));
    apply_gate(s, cnot(0, 1));
    const double r = 1.0 / std::sqrt(2.0);
    CHECK(s.amps[0].real() == doctest::Approx(r).epsilon(1e-15));
    CHECK(s.amps[3].real() == doctest::Approx(r).epsilon(1e-15));
    CHECK(std::abs(s.amps[1]) < 1e-15);
    CHECK(std::abs(s.amps[2]) < 1e-15);
    CHECK(expval(s, {PauliAxis::Z, 0}) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(expval(s, {PauliAxis::Z, 1}) == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("apply_gate rejects invalid qubit indices") {
    StateVector s = zero_state(2);
    CHECK_THROWS_AS(apply_gate(s, rot(GateKind::RX, 2, 0.1)), std::invalid_argument);
    CHECK_THROWS_AS(apply_gate(s, cnot(0, 0)), std::invalid_argument);
    CHECK_THROWS_AS(apply_gate(s, cnot(-1, 0)), std::invalid_argument);
}

TEST_CASE("sparse gate application equals the dense Kronecker route") {
    Xoshiro256 rng(31);
    for (int round = 0; round < 40; ++round) {
        StateVector s = random_state(4, rng);
        const std::vector<GateOp> gates = random_gates(4, 1 + rng.bounded(3), rng);

        StateVector sparse = s;
        for (const GateOp& g : gates) apply_gate(sparse, g);

        const DenseMatrix u = circuit_unitary_dense(4, gates);
        const std::vector<cdouble> dense = matvec(u, s.amps);
        for (std::size_t i = 0; i < 16; ++i)
            CHECK(std::abs(sparse.amps[i] - dense[i]) < 1e-12);
    }
}

TEST_CASE("every gate's dense matrix is unitary") {
    Xoshiro256 rng(32);
    const std::vector<GateOp> gates = {
        rot(GateKind::RX, 1, 0.7), rot(GateKind::RY, 2, -1.3),
        rot(GateKind::RZ, 0, 2.9), hadamard(3), cnot(2, 0)};
    for (const GateOp& g : gates) {
        const DenseMatrix u = gate_unitary_dense(g, 4);
        // U^dag U = I
        for (std::size_t i = 0; i < u.dim; ++i) {
            for (std::size_t j = 0; j < u.dim; ++j) {
                cdouble acc(0, 0);
                for (std::size_t k = 0; k < u.dim; ++k)
                    acc += std::conj(u.at(k, i)) * u.at(k, j);
                const cdouble expect = i == j ? cdouble(1, 0) : cdouble(0, 0);
                CHECK(std::abs(acc - expect) < 1e-12);
            }
        }
    }
    (void)rng;
}

TEST_CASE("norm is preserved through long random gate sequences") {
    Xoshiro256 rng(33);
    for (int round = 0; round < 10; ++round) {
        StateVector s = zero_state(4);
        for (const GateOp& g : random_gates(4, 40, rng)) apply_gate(s, g);
        CHECK(std::abs(s.norm_sq() - 1.0) < 1e-12);
    }
}

TEST_CASE("amplitude embedding writes normalized features") {
    const std::vector<double> e0 = {1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
    StateVector s = amplitude_embed(e0);
    CHECK(s.n_qubits == 4);
    CHECK(s.amps[0].real() == doctest::Approx(1.0));

    const std::vector<double> ones(16, 1.0);
    StateVector u = amplitude_embed(ones);
    for (const cdouble& a : u.amps)
        CHECK(a.real() == doctest::Approx(0.25).epsilon(1e-15));
    for (int q = 0; q < 4; ++q)
        CHECK(expval(u, {PauliAxis::Z, q}) == doctest::Approx(0.0).epsilon(1e-14));

    std::vector<double> pythag(16, 0.0);
    pythag[0] = 3.0;
    pythag[1] = 4.0;
    StateVector p = amplitude_embed(pythag);
    CHECK(p.amps[0].real() == doctest::Approx(0.6).epsilon(1e-15));
    CHECK(p.amps[1].real() == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(p.norm_sq() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("amplitude embedding rejects near-zero norms") {
    const std::vector<double> tiny(16, 1e-12);
    CHECK_THROWS_AS(amplitude_embed(tiny), NearZeroNormError);
}

TEST_CASE("angle embedding rotates each qubit by x*pi") {
    StateVector zeros = angle_embed(std::vector<double>{0, 0, 0, 0});
    CHECK(zeros.amps[0].real() == doctest::Approx(1.0));
    for (int q = 0; q < 4; ++q)
        CHECK(expval(zeros, {PauliAxis::Z, q}) == doctest::Approx(1.0));

    StateVector flipped = angle_embed(std::vector<double>{1, 0, 0, 0});
    CHECK(expval(flipped, {PauliAxis::Z, 0}) == doctest::Approx(-1.0).epsilon(1e-14));

    StateVector half = angle_embed(std::vector<double>{0.5, 0, 0, 0});
    CHECK(expval(half, {PauliAxis::Z, 0}) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("angle embedding rejects out-of-range features") {
    CHECK_THROWS_AS(angle_embed(std::vector<double>{1.5, 0, 0, 0}),
                    std::invalid_argument);
}

TEST_CASE("<X> distinguishes |0> from |+>") {
    StateVector zero = zero_state(1);
    CHECK(expval(zero, {PauliAxis::X, 0}) == doctest::Approx(0.0));
    apply_gate(zero, hadamard(0));
    CHECK(expval(zero, {PauliAxis::X, 0}) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("Bell state has vanishing single-qubit <Z>") {
    StateVector s = zero_state(2);
    apply_gate(s, hadamard(0));
    apply_gate(s, cnot(0, 1));
    CHECK(std::abs(expval(s, {PauliAxis::Z, 0})) < 1e-15);
    CHECK(std::abs(expval(s, {PauliAxis::Z, 1})) < 1e-15);
}

TEST_CASE("expval equals the dense psi^dag O psi evaluation") {
    Xoshiro256 rng(34);
    for (int round = 0; round < 25; ++round) {
        StateVector s = random_state(4, rng);
        for (int q = 0; q < 4; ++q) {
            for (PauliAxis axis : {PauliAxis::Z, PauliAxis::X}) {
                const Observable obs{axis, q};
                const DenseMatrix o = observable_dense(obs, 4);
                const std::vector<cdouble> ops = matvec(o, s.amps);
                cdouble dense(0, 0);
                for (std::size_t i = 0; i < 16; ++i)
                    dense += std::conj(s.amps[i]) * ops[i];
                CHECK(std::abs(dense.imag()) < 1e-13);
                CHECK(expval(s, obs) == doctest::Approx(dense.real()).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("angle circuit with zero inputs and parameters reads [1,1,1,1,0,0]") {
    const CircuitSpec spec = make_angle_circuit();
    const std::vector<double> inputs(4, 0.0);
    const std::vector<double> params(16, 0.0);
    const std::vector<double> out = run_circuit(spec, inputs, params);
    REQUIRE(out.size() == 6);
    for (int k = 0; k < 4; ++k) CHECK(out[k] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(out[4] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(out[5] == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("amplitude circuit on e0 with zero parameters reads [1,1,1,1]") {
    const CircuitSpec spec = make_amplitude_circuit();
    std::vector<double> inputs(16, 0.0);
    inputs[0] = 1.0;
    const std::vector<double> params(16, 0.0);
    const std::vector<double> out = run_circuit(spec, inputs, params);
    REQUIRE(out.size() == 4);
    for (double v : out) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("run_circuit rejects arity mismatches") {
    const CircuitSpec spec = make_angle_circuit();
    const std::vector<double> short_inputs(3, 0.0);
    const std::vector<double> params(16, 0.0);
    CHECK_THROWS_AS(run_circuit(spec, short_inputs, params), std::invalid_argument);
    const std::vector<double> inputs(4, 0.0);
    const std::vector<double> short_params(15, 0.0);
    CHECK_THROWS_AS(run_circuit(spec, inputs, short_params), std::invalid_argument);
}

TEST_CASE("circuit outputs stay in [-1,1] over random draws") {
    Xoshiro256 rng(35);
    const CircuitSpec angle = make_angle_circuit();
    const CircuitSpec amp = make_amplitude_circuit();
    for (int round = 0; round < 1000; ++round) {
        std::vector<double> params(16);
        for (double& p : params) p = rng.uniform(-3.14, 3.14);
        std::vector<double> x(4);
        for (double& v : x) v = rng.uniform(-1.0, 1.0);
        for (double v : run_circuit(angle, x, params)) {
            CHECK(v >= -1.0 - 1e-12);
            CHECK(v <= 1.0 + 1e-12);
        }
        std::vector<double> f(16);
        for (double& v : f) v = rng.uniform(-1.0, 1.0);
        for (double v : run_circuit(amp, f, params)) {
            CHECK(v >= -1.0 - 1e-12);
            CHECK(v <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("<Z> after RY(theta) differentiates to -sin(theta)") {
    CircuitSpec spec;
    spec.n_qubits = 1;
    spec.embedding = EmbeddingKind::Angle;
    spec.n_inputs = 0;
    spec.n_params = 1;
    GateOp g;
    g.kind = GateKind::RY;
    g.target = 0;
    g.source = AngleSource::Param;
    g.slot = 0;
    spec.gates.push_back(g);
    spec.observables.push_back({PauliAxis::Z, 0});
    spec.validate();

    const std::vector<double> upstream = {1.0};
    for (double theta : {0.0, 0.3, std::numbers::pi / 2, 2.2}) {
        const std::vector<double> params = {theta};
        const CircuitGradients bp = grad_backprop(spec, {}, params, upstream);
        CHECK(bp.wrt_params[0] == doctest::Approx(-std::sin(theta)).epsilon(1e-12));
        const std::vector<double> ps = grad_param_shift(spec, {}, params, upstream);
        CHECK(ps[0] == doctest::Approx(-std::sin(theta)).epsilon(1e-12));
    }
}

TEST_CASE("parameter-shift, backprop and finite differences agree") {
    Xoshiro256 rng(36);
    for (const bool use_angle : {true, false}) {
        const CircuitSpec spec =
            use_angle ? make_angle_circuit() : make_amplitude_circuit();
        for (int round = 0; round < 3; ++round) {
            std::vector<double> params(16);
            for (double& p : params) p = rng.uniform(-3.0, 3.0);
            std::vector<double> inputs(static_cast<std::size_t>(spec.n_inputs));
            for (double& v : inputs) v = rng.uniform(-0.9, 0.9);
            std::vector<double> upstream(spec.observables.size());
            for (double& u : upstream) u = rng.uniform(-1.0, 1.0);

            const CircuitGradients bp = grad_backprop(spec, inputs, params, upstream);
            const std::vector<double> ps =
                grad_param_shift(spec, inputs, params, upstream);

            auto loss = [&](std::span<const double> in, std::span<const double> pa) {
                const std::vector<double> out = run_circuit(spec, in, pa);
                double s = 0.0;
                for (std::size_t k = 0; k < out.size(); ++k) s += upstream[k] * out[k];
                return s;
            };

            for (std::size_t i = 0; i < params.size(); ++i) {
                CHECK(bp.wrt_params[i] == doctest::Approx(ps[i]).epsilon(1e-10));
                std::vector<double> shifted = params;
                shifted[i] = params[i] + 1e-5;
                const double hi = loss(inputs, shifted);
                shifted[i] = params[i] - 1e-5;
                const double lo = loss(inputs, shifted);
                const double fd = (hi - lo) / 2e-5;
                CHECK(bp.wrt_params[i] == doctest::Approx(fd).epsilon(1e-5));
            }
            for (std::size_t i = 0; i < inputs.size(); ++i) {
                std::vector<double> shifted = inputs;
                shifted[i] = inputs[i] + 1e-6;
                const double hi = loss(shifted, params);
                shifted[i] = inputs[i] - 1e-6;
                const double lo = loss(shifted, params);
                const double fd = (hi - lo) / 2e-6;
                const double scale = std::max(1.0, std::abs(fd));
                CHECK(std::abs(bp.wrt_inputs[i] - fd) / scale < 1e-5);
            }
        }
    }
}

TEST_CASE("circuit dump round-trips through the parser") {
    Xoshiro256 rng(37);
    const CircuitSpec spec = make_angle_circuit();
    std::vector<double> params(16);
    for (double& p : params) p = rng.uniform(-3.0, 3.0);
    std::vector<double> inputs(4);
    for (double& v : inputs) v = rng.uniform(-0.9, 0.9);

    const std::string text = dump_circuit(spec, inputs, params);
    const ParsedCircuit parsed = parse_circuit_dump(text);
    CHECK(parsed.n_qubits == 4);
    CHECK(parsed.gates.size() == spec.gates.size());
    CHECK(parsed.observables.size() == 6);

    // re-simulate the parsed gate list from |0000> and compare readouts
    StateVector s = zero_state(4);
    for (const GateOp& g : parsed.gates) apply_gate(s, g);
    std::vector<double> replay;
    for (const Observable& o : parsed.observables) replay.push_back(expval(s, o));

    const std::vector<double> direct = run_circuit(spec, inputs, params);
    REQUIRE(replay.size() == direct.size());
    for (std::size_t k = 0; k < direct.size(); ++k)
        CHECK(replay[k] == doctest::Approx(direct[k]).epsilon(1e-12));
}

TEST_CASE("circuit dump format carries the header, gates and measure line") {
    const CircuitSpec spec = make_angle_circuit();
    const std::vector<double> inputs(4, 0.0);
    const std::vector<double> params(16, 0.0);
    const std::string text = dump_circuit(spec, inputs, params);
    CHECK(text.find("qubits 4\n") == 0);
    CHECK(text.find("measure Z0 Z1 Z2 Z3 X0 X1") != std::string::npos);
    CHECK(text.find("trainable=1") != std::string::npos);
    CHECK(text.find("CNOT q0 q1") != std::string::npos);
}
