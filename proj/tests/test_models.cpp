#include <cmath>

#include "doctest.h"
#include "qfusion/models.hpp"
#include "qfusion/nn.hpp"
#include "testutil.hpp"

using namespace qfusion;

namespace {

Tensor random_images(std::size_t batch, Xoshiro256& rng) {
    Tensor x = Tensor::zeros({batch, 1, 28, 28});
    for (double& v : x.values()) v = rng.uniform(-1.0, 1.0);
    return x;
}

}  // namespace

TEST_CASE("backbone maps 1x28x28 to 2048 features through the stated shapes") {
    Xoshiro256 init_rng(41), drop_rng(42), data_rng(43);
    BackboneCNN backbone = BackboneCNN::create(init_rng);
    Tape tape(false);
    Tensor x = random_images(2, data_rng);

    Tensor h1 = backbone.block1.forward(tape, x, false);
    CHECK(h1.shape() == Shape{2, 32, 28, 28});
    Tensor p1 = nn::maxpool2d(tape, h1);
    CHECK(p1.shape() == Shape{2, 32, 14, 14});
    Tensor h2 = backbone.block2.forward(tape, p1, false);
    CHECK(h2.shape() == Shape{2, 64, 14, 14});
    Tensor p2 = nn::maxpool2d(tape, h2);
    CHECK(p2.shape() == Shape{2, 64, 7, 7});
    Tensor h3 = backbone.block3.forward(tape, p2, false);
    CHECK(h3.shape() == Shape{2, 128, 7, 7});
    Tensor p3 = nn::adaptive_avgpool2d(tape, h3, 4);
    CHECK(p3.shape() == Shape{2, 128, 4, 4});

    Tensor features = backbone.forward(tape, x, false, drop_rng);
    CHECK(features.shape() == Shape{2, 2048});
}

TEST_CASE("backbone rejects wrong input shapes") {
    Xoshiro256 init_rng(44), drop_rng(45);
    BackboneCNN backbone = BackboneCNN::create(init_rng);
    Tape tape(false);
    Tensor bad = Tensor::zeros({1, 1, 27, 28});
    CHECK_THROWS_AS(backbone.forward(tape, bad, false, drop_rng),
                    std::invalid_argument);
}

TEST_CASE("backbone eval forward is bit-identical across calls") {
    Xoshiro256 init_rng(46), drop_rng(47), data_rng(48);
    BackboneCNN backbone = BackboneCNN::create(init_rng);
    Tape tape(false);
    Tensor x = random_images(1, data_rng);
    Tensor a = backbone.forward(tape, x, false, drop_rng);
    Tensor b = backbone.forward(tape, x, false, drop_rng);
    for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a.data()[i] == b.data()[i]);
}

TEST_CASE("hybrid forward emits finite logits whose softmax sums to one") {
    HybridQCNN model(7);
    Xoshiro256 drop_rng(49), data_rng(50);
    Tape tape(false);
    Tensor x = random_images(3, data_rng);
    Tensor logits = model.forward(tape, x, false, drop_rng);
    CHECK(logits.shape() == Shape{3, 2});
    for (double v : logits.values()) CHECK(std::isfinite(v));
    Tensor probs = nn::softmax(tape, logits);
    for (std::size_t bi = 0; bi < 3; ++bi) {
        const double s = probs.data()[bi * 2] + probs.data()[bi * 2 + 1];
        CHECK(std::abs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("classical forward emits two logits deterministically in eval mode") {
    ClassicalCNN model(7);
    Xoshiro256 drop_rng(51), data_rng(52);
    Tape tape(false);
    Tensor x = random_images(2, data_rng);
    Tensor a = model.forward(tape, x, false, drop_rng);
    Tensor b = model.forward(tape, x, false, drop_rng);
    CHECK(a.shape() == Shape{2, 2});
    for (std::size_t i = 0; i < a.numel(); ++i) CHECK(a.data()[i] == b.data()[i]);
}

TEST_CASE("same-seed hybrid and classical backbones are bit-identical") {
    HybridQCNN hybrid(99);
    ClassicalCNN classical(99);
    auto hp = hybrid.parameters();
    auto cp = classical.parameters();
    for (const NamedParam& h : hp) {
        if (h.name.rfind("backbone.", 0) != 0) continue;
        bool found = false;
        for (const NamedParam& c : cp) {
            if (c.name != h.name) continue;
            found = true;
            REQUIRE(c.tensor.numel() == h.tensor.numel());
            for (std::size_t i = 0; i < h.tensor.numel(); ++i)
                CHECK(c.tensor.data()[i] == h.tensor.data()[i]);
        }
        CHECK(found);
    }
}

TEST_CASE("param counts: circuits 32, identical backbones, head delta") {
    HybridQCNN hybrid(3);
    ClassicalCNN classical(3);
    const ParamCounts hc = hybrid.param_counts();
    const ParamCounts cc = classical.param_counts();

    CHECK(hybrid.angle_branch.circuit_params.numel() == 16);
    CHECK(hc.circuits == 32);
    CHECK(hc.backbone == cc.backbone);

    // hybrid total - classical total = projections + fusion + circuits +
    // the (2176 - 2048) x 512 first classifier layer delta
    const std::size_t head_delta = (2176 - 2048) * 512;
    CHECK(hc.total() - cc.total() ==
          hc.projections + hc.fusion + hc.circuits + head_delta);

    // concrete structural counts
    CHECK(hc.projections == 2048 * 16 + 16 + 2048 * 4 + 4);
    CHECK(hc.fusion == 10 * 128 + 128 + 128 + 128);
}

TEST_CASE("hybrid end-to-end gradients match finite differences") {
    HybridQCNN model(11);
    Xoshiro256 data_rng(53);
    Tensor x = random_images(2, data_rng);
    const std::vector<int> labels = {0, 1};

    auto eval = [&]() {
        Tape fresh(false);
        Xoshiro256 drop_rng(1);  // eval mode: never drawn
        Tensor logits = model.forward(fresh, x, false, drop_rng);
        return nn::cross_entropy_smoothed(fresh, logits, labels, 0.1).item();
    };

    Tape tape;
    Xoshiro256 drop_rng(1);
    Tensor logits = model.forward(tape, x, false, drop_rng);
    Tensor loss = nn::cross_entropy_smoothed(tape, logits, labels, 0.1);
    for (NamedParam& p : model.parameters()) p.tensor.zero_grad();
    tape.backward(loss);

    struct Probe {
        const char* name;
        Tensor tensor;
        std::size_t index;
    };
    const std::vector<Probe> probes = {
        {"conv", model.backbone.block1.conv1_w, 10},
        {"projection", model.amplitude_branch.proj_w, 123},
        {"circuit", model.angle_branch.circuit_params, 3},
        {"fusion", model.fusion.weight, 77},
        {"classifier", model.head.layers[0].w, 2048},
    };
    for (Probe probe : probes) {
        INFO(probe.name);
        const double fd = testutil::fd_wrt_entry(probe.tensor, probe.index, eval, 1e-5);
        const double an = probe.tensor.grad()[probe.index];
        const double scale = std::max({1e-6, std::abs(fd), std::abs(an)});
        CHECK(std::abs(fd - an) / scale < 1e-4);
    }
}

TEST_CASE("checkpoints round-trip and reject structural mismatches") {
    testutil::TempDir tmp("ckpt");
    HybridQCNN model(21);
    Xoshiro256 drop_rng(54), data_rng(55);
    Tensor x = random_images(1, data_rng);
    Tape tape(false);
    Tensor before = model.forward(tape, x, false, drop_rng);

    const std::string path = tmp.str("model.ckpt");
    save_checkpoint(path, model);

    const CheckpointInfo info = peek_checkpoint(path);
    CHECK(info.kind == ModelKind::Hybrid);
    CHECK(info.seed == 21);

    HybridQCNN fresh(22);
    load_checkpoint(path, fresh);
    Tensor after = fresh.forward(tape, x, false, drop_rng);
    for (std::size_t i = 0; i < before.numel(); ++i)
        CHECK(before.data()[i] == after.data()[i]);

    ClassicalCNN wrong(21);
    CHECK_THROWS_AS(load_checkpoint(path, wrong), std::runtime_error);
}

TEST_CASE("snapshot/restore preserves every parameter") {
    ClassicalCNN model(5);
    const auto snap = snapshot_parameters(model);
    for (NamedParam& p : model.parameters())
        for (double& v : p.tensor.values()) v += 1.0;
    restore_parameters(model, snap);
    ClassicalCNN reference(5);
    auto mp = model.parameters();
    auto rp = reference.parameters();
    REQUIRE(mp.size() == rp.size());
    for (std::size_t i = 0; i < mp.size(); ++i)
        for (std::size_t j = 0; j < mp[i].tensor.numel(); ++j)
            CHECK(mp[i].tensor.data()[j] == rp[i].tensor.data()[j]);
}
