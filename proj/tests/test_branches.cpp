#include <cmath>
#include <cstdio>
#include <sstream>

#include "doctest.h"
#include "qfusion/branches.hpp"
#include "qfusion/quantum.hpp"

using namespace qfusion;

namespace {

AmplitudeBranch make_amp_branch(std::uint64_t seed = 1) {
    Xoshiro256 rng(seed);
    return AmplitudeBranch::create(rng, 2048);
}

AngleBranch make_angle_branch(std::uint64_t seed = 2) {
    Xoshiro256 rng(seed);
    return AngleBranch::create(rng, 2048);
}

void zero_params(Tensor& t) {
    for (double& v : t.values()) v = 0.0;
}

}  // namespace

TEST_CASE("amplitude branch forced to e0 reads q1 = [1,1,1,1]") {
    AmplitudeBranch branch = make_amp_branch();
    zero_params(branch.proj_w);
    zero_params(branch.proj_b);
    zero_params(branch.circuit_params);
    branch.proj_b.data()[0] = 1.0;  // projection output is e0 for any input

    Tape tape(false);
    Tensor x = Tensor::zeros({1, 2048});
    Tensor q1 = branch.forward(tape, x);
    CHECK(q1.shape() == Shape{1, 4});
    for (double v : q1.values()) CHECK(v == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("amplitude branch on the uniform vector reads q1 = [0,0,0,0]") {
    AmplitudeBranch branch = make_amp_branch();
    zero_params(branch.proj_w);
    zero_params(branch.circuit_params);
    for (double& v : branch.proj_b.values()) v = 1.0;  // uniform projection

    Tape tape(false);
    Tensor x = Tensor::zeros({1, 2048});
    Tensor q1 = branch.forward(tape, x);
    for (double v : q1.values()) CHECK(v == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("amplitude branch propagates the near-zero-norm error") {
    AmplitudeBranch branch = make_amp_branch();
    zero_params(branch.proj_w);
    zero_params(branch.proj_b);  // projection output identically zero
    Tape tape(false);
    Tensor x = Tensor::zeros({1, 2048});
    CHECK_THROWS_AS(branch.forward(tape, x), quantum::NearZeroNormError);
}

TEST_CASE("angle branch at zero projection reads q2 = [1,1,1,1,0,0]") {
    AngleBranch branch = make_angle_branch();
    zero_params(branch.proj_w);
    zero_params(branch.proj_b);
    zero_params(branch.circuit_params);

    Tape tape(false);
    Tensor x = Tensor::zeros({1, 2048});
    Tensor q2 = branch.forward(tape, x);
    CHECK(q2.shape() == Shape{1, 6});
    for (int k = 0; k < 4; ++k)
        CHECK(q2.data()[k] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(q2.data()[4] == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(q2.data()[5] == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("angle circuit on [1,0,0,0]: both CNOT rings cascade the flip") {
    // RY(pi) puts qubit 0 in |1>. The layer-1 ring then flips 1, 2, 3 in
    // sequence and wraps to clear qubit 0; layer 2 (identity rotations)
    // cascades once more. The dense Kronecker route is the referee.
    using namespace qfusion::quantum;
    const CircuitSpec spec = make_angle_circuit();
    const std::vector<double> inputs = {1.0, 0.0, 0.0, 0.0};
    const std::vector<double> params(16, 0.0);
    const std::vector<double> out = run_circuit(spec, inputs, params);

    StateVector dense_state = angle_embed(inputs);
    std::vector<GateOp> variational;
    for (const GateOp& g : spec.gates)
        if (g.source != AngleSource::Input) variational.push_back(g);
    const DenseMatrix u = circuit_unitary_dense(4, variational, params, inputs);
    const std::vector<cdouble> evolved = matvec(u, dense_state.amps);
    StateVector check;
    check.n_qubits = 4;
    check.amps = evolved;
    for (int q = 0; q < 4; ++q)
        CHECK(out[static_cast<std::size_t>(q)] ==
              doctest::Approx(expval(check, {PauliAxis::Z, q})).epsilon(1e-12));

    const std::vector<double> expected_z = {-1.0, -1.0, 1.0, -1.0};
    for (int q = 0; q < 4; ++q)
        CHECK(out[static_cast<std::size_t>(q)] ==
              doctest::Approx(expected_z[static_cast<std::size_t>(q)]).epsilon(1e-12));
}

TEST_CASE("branch outputs stay inside [-1,1] for random inputs and params") {
    AmplitudeBranch amp = make_amp_branch(5);
    AngleBranch ang = make_angle_branch(6);
    Xoshiro256 rng(7);
    Tape tape(false);
    for (int round = 0; round < 50; ++round) {
        Tensor x = Tensor::zeros({2, 2048});
        for (double& v : x.values()) v = rng.uniform(-1.0, 1.0);
        Tensor q1 = amp.forward(tape, x);
        for (double v : q1.values()) {
            CHECK(v >= -1.0 - 1e-12);
            CHECK(v <= 1.0 + 1e-12);
        }
        Tensor q2 = ang.forward(tape, x);
        for (double v : q2.values()) {
            CHECK(v >= -1.0 - 1e-12);
            CHECK(v <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("branch gradients match finite differences end to end") {
    // Small projection (8 features) keeps the finite-difference sweep fast;
    // the circuit templates are identical to the full-width ones.
    Xoshiro256 rng(8);
    AmplitudeBranch amp = AmplitudeBranch::create(rng, 8);
    AngleBranch ang = AngleBranch::create(rng, 8);

    Tensor x = Tensor::zeros({2, 8});
    for (double& v : x.values()) v = rng.uniform(-1.0, 1.0);

    auto run_branch = [&](auto& branch, Tape& tape) {
        return branch.forward(tape, x);
    };

    auto check_param = [&](auto& branch, Tensor& target) {
        target.zero_grad();
        Tape tape;
        Tensor out = run_branch(branch, tape);
        for (double& g : out.grad()) g = 1.0;
        Tensor dummy = Tensor::scalar(0.0);
        dummy.set_requires_grad(true);
        tape.backward(dummy);

        auto eval = [&]() {
            Tape fresh(false);
            Tensor out = run_branch(branch, fresh);
            double s = 0.0;
            for (double v : out.values()) s += v;
            return s;
        };
        for (std::size_t i = 0; i < target.numel(); i += std::max<std::size_t>(1, target.numel() / 7)) {
            const double saved = target.data()[i];
            target.data()[i] = saved + 1e-5;
            const double hi = eval();
            target.data()[i] = saved - 1e-5;
            const double lo = eval();
            target.data()[i] = saved;
            const double fd = (hi - lo) / 2e-5;
            const double an = target.grad()[i];
            const double scale = std::max({1.0, std::abs(fd), std::abs(an)});
            CHECK(std::abs(fd - an) / scale < 1e-4);
        }
    };

    check_param(amp, amp.proj_w);
    check_param(amp, amp.proj_b);
    check_param(amp, amp.circuit_params);
    check_param(ang, ang.proj_w);
    check_param(ang, ang.proj_b);
    check_param(ang, ang.circuit_params);
}

TEST_CASE("fusion block with zero weights and beta emits zeros") {
    Xoshiro256 rng(9), drop_rng(10);
    FusionBlock fusion = FusionBlock::create(rng);
    zero_params(fusion.weight);
    zero_params(fusion.bias);
    zero_params(fusion.ln_beta);

    Tape tape(false);
    Tensor q1 = Tensor::from_data({1, 4}, {0.1, -0.2, 0.3, 0.9});
    Tensor q2 = Tensor::from_data({1, 6}, {0.5, 0.4, -0.1, 0.0, 0.2, -0.9});
    Tensor fused = fusion.forward(tape, q1, q2, /*training=*/false, drop_rng);
    CHECK(fused.shape() == Shape{1, 128});
    for (double v : fused.values()) CHECK(v == 0.0);
}

TEST_CASE("fusion output arity is always 128 and eval mode is deterministic") {
    Xoshiro256 rng(11), drop_rng(12);
    FusionBlock fusion = FusionBlock::create(rng);
    Tape tape(false);
    Tensor q1 = Tensor::from_data({1, 4}, {0.3, -0.6, 0.2, 0.8});
    Tensor q2 = Tensor::from_data({1, 6}, {0.5, 0.1, -0.4, 0.9, -0.2, 0.7});
    Tensor a = fusion.forward(tape, q1, q2, false, drop_rng);
    Tensor b = fusion.forward(tape, q1, q2, false, drop_rng);
    CHECK(a.dim(1) == 128);
    for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a.data()[i] == b.data()[i]);
}

TEST_CASE("fusion rejects wrong arities") {
    Xoshiro256 rng(13), drop_rng(14);
    FusionBlock fusion = FusionBlock::create(rng);
    Tape tape(false);
    Tensor bad = Tensor::zeros({1, 5});
    Tensor q2 = Tensor::zeros({1, 6});
    CHECK_THROWS_AS(fusion.forward(tape, bad, q2, false, drop_rng),
                    std::invalid_argument);
}

TEST_CASE("angle circuit ring connectivity is {(0,1),(1,2),(2,3),(3,0)} per layer") {
    using namespace qfusion::quantum;
    const CircuitSpec spec = make_angle_circuit();
    const std::vector<double> inputs(4, 0.0);
    const std::vector<double> params(16, 0.0);
    const std::string text = dump_circuit(spec, inputs, params);

    std::vector<std::pair<int, int>> cnots;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("CNOT", 0) == 0) {
            int c, t;
            REQUIRE(std::sscanf(line.c_str(), "CNOT q%d q%d", &c, &t) == 2);
            cnots.emplace_back(c, t);
        }
    }
    const std::vector<std::pair<int, int>> ring = {{0, 1}, {1, 2}, {2, 3}, {3, 0}};
    REQUIRE(cnots.size() == 8);
    for (std::size_t l = 0; l < 2; ++l)
        for (std::size_t k = 0; k < 4; ++k) CHECK(cnots[l * 4 + k] == ring[k]);
}

TEST_CASE("both branches expose 16 trainable circuit parameters") {
    CHECK(make_amplitude_circuit().n_params == 16);
    CHECK(make_angle_circuit().n_params == 16);
    CHECK(make_amp_branch().circuit_params.numel() == 16);
    CHECK(make_angle_branch().circuit_params.numel() == 16);
}
