#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "qfusion/branches.hpp"
#include "qfusion/nn.hpp"
#include "qfusion/tensor.hpp"

namespace qfusion {

struct NamedParam {
    std::string name;
    Tensor tensor;
};

enum class ModelKind { Hybrid, Classical };

std::string model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);

struct ParamCounts {
    std::size_t backbone = 0;
    std::size_t projections = 0;
    std::size_t circuits = 0;
    std::size_t fusion = 0;
    std::size_t classifier = 0;
    std::size_t total() const {
        return backbone + projections + circuits + fusion + classifier;
    }
};

/// conv(3x3, pad 1) + batchnorm + ReLU, twice.
struct ConvBlock {
    Tensor conv1_w, conv1_b, bn1_gamma, bn1_beta;
    Tensor bn1_mean, bn1_var;  // running stats, not trainable
    Tensor conv2_w, conv2_b, bn2_gamma, bn2_beta;
    Tensor bn2_mean, bn2_var;

    static ConvBlock create(std::size_t in_ch, std::size_t out_ch, Xoshiro256& rng);
    Tensor forward(Tape& tape, const Tensor& x, bool training);
};

/// Shared feature extractor: three double-conv blocks with 32/64/128
/// filters, maxpool after blocks 1-2, adaptive average pool to 4x4 after
/// block 3, dropout 0.3 after every pooling stage. 1x28x28 in, 2048 out.
struct BackboneCNN {
    ConvBlock block1, block2, block3;
    double dropout_rate = 0.3;

    static BackboneCNN create(Xoshiro256& rng);
    Tensor forward(Tape& tape, const Tensor& images, bool training,
                   Xoshiro256& dropout_rng);
};

/// Fully connected chain with ReLU + dropout 0.3 between the linears.
struct Classifier {
    struct Layer {
        Tensor w, b;
    };
    std::vector<Layer> layers;
    double dropout_rate = 0.3;

    static Classifier create(const std::vector<std::size_t>& dims, Xoshiro256& rng);
    Tensor forward(Tape& tape, const Tensor& x, bool training,
                   Xoshiro256& dropout_rng) const;
};

/// Common model interface used by the training engine and checkpoint IO.
class Model {
public:
    virtual ~Model() = default;
    virtual ModelKind kind() const = 0;
    /// images: [B,1,28,28] -> logits [B,2].
    virtual Tensor forward(Tape& tape, const Tensor& images, bool training,
                           Xoshiro256& dropout_rng) = 0;
    virtual std::vector<NamedParam> parameters() = 0;
    virtual ParamCounts param_counts() = 0;
    std::uint64_t seed() const { return seed_; }

protected:
    std::uint64_t seed_ = 0;
};

/// Backbone -> two parallel quantum branches -> fusion -> concat with the
/// backbone features -> FC(2176 -> 512 -> 256 -> 128 -> 2).
class HybridQCNN : public Model {
public:
    explicit HybridQCNN(std::uint64_t seed);
    ModelKind kind() const override { return ModelKind::Hybrid; }
    Tensor forward(Tape& tape, const Tensor& images, bool training,
                   Xoshiro256& dropout_rng) override;
    std::vector<NamedParam> parameters() override;
    ParamCounts param_counts() override;

    BackboneCNN backbone;
    AmplitudeBranch amplitude_branch;
    AngleBranch angle_branch;
    FusionBlock fusion;
    Classifier head;
};

/// Same backbone, classical head only: FC(2048 -> 512 -> 256 -> 128 -> 2).
class ClassicalCNN : public Model {
public:
    explicit ClassicalCNN(std::uint64_t seed);
    ModelKind kind() const override { return ModelKind::Classical; }
    Tensor forward(Tape& tape, const Tensor& images, bool training,
                   Xoshiro256& dropout_rng) override;
    std::vector<NamedParam> parameters() override;
    ParamCounts param_counts() override;

    BackboneCNN backbone;
    Classifier head;
};

std::unique_ptr<Model> make_model(ModelKind kind, std::uint64_t seed);

/// Applies one dropout rate to every dropout site of the model.
void set_dropout_rate(Model& model, double rate);

/// Binary checkpoint: header (magic, version, model kind, seed) followed by
/// named little-endian float64 arrays. Loading into a structurally
/// different model is an error.
void save_checkpoint(const std::string& path, Model& model);

struct CheckpointInfo {
    ModelKind kind;
    std::uint64_t seed;
};

CheckpointInfo peek_checkpoint(const std::string& path);
void load_checkpoint(const std::string& path, Model& model);

/// In-memory parameter snapshot used for best-epoch selection.
std::map<std::string, std::vector<double>> snapshot_parameters(Model& model);
void restore_parameters(Model& model,
                        const std::map<std::string, std::vector<double>>& snap);

}  // namespace qfusion
