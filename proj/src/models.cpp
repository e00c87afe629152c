#include "qfusion/models.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "qfusion/rng.hpp"

namespace qfusion {

namespace {

// Stream ids for seed derivation. The backbone draws from its own stream so
// hybrid and classical models built from the same seed get bit-identical
// backbone parameters.
enum StreamId : std::uint64_t {
    kStreamBackbone = 1,
    kStreamBranches = 2,
    kStreamFusion = 3,
    kStreamClassifier = 4,
};

Tensor init_conv_weight(std::size_t out_ch, std::size_t in_ch, Xoshiro256& rng) {
    const std::size_t fan_in = in_ch * 9;
    return init_linear_weight({out_ch, in_ch, 3, 3}, fan_in, rng);
}

std::size_t count_params(const std::vector<NamedParam>& params) {
    std::size_t n = 0;
    for (const NamedParam& p : params) n += p.tensor.numel();
    return n;
}

void append_block_params(std::vector<NamedParam>& out, const std::string& prefix,
                         ConvBlock& b) {
    out.push_back({prefix + ".conv1.weight", b.conv1_w});
    out.push_back({prefix + ".conv1.bias", b.conv1_b});
    out.push_back({prefix + ".bn1.gamma", b.bn1_gamma});
    out.push_back({prefix + ".bn1.beta", b.bn1_beta});
    out.push_back({prefix + ".conv2.weight", b.conv2_w});
    out.push_back({prefix + ".conv2.bias", b.conv2_b});
    out.push_back({prefix + ".bn2.gamma", b.bn2_gamma});
    out.push_back({prefix + ".bn2.beta", b.bn2_beta});
}

// Running stats ride along in checkpoints but are not trainable.
void append_block_buffers(std::vector<NamedParam>& out, const std::string& prefix,
                          ConvBlock& b) {
    out.push_back({prefix + ".bn1.running_mean", b.bn1_mean});
    out.push_back({prefix + ".bn1.running_var", b.bn1_var});
    out.push_back({prefix + ".bn2.running_mean", b.bn2_mean});
    out.push_back({prefix + ".bn2.running_var", b.bn2_var});
}

std::vector<NamedParam> backbone_params(BackboneCNN& bb) {
    std::vector<NamedParam> out;
    append_block_params(out, "backbone.block1", bb.block1);
    append_block_params(out, "backbone.block2", bb.block2);
    append_block_params(out, "backbone.block3", bb.block3);
    return out;
}

std::vector<NamedParam> backbone_buffers(BackboneCNN& bb) {
    std::vector<NamedParam> out;
    append_block_buffers(out, "backbone.block1", bb.block1);
    append_block_buffers(out, "backbone.block2", bb.block2);
    append_block_buffers(out, "backbone.block3", bb.block3);
    return out;
}

std::vector<NamedParam> classifier_params(Classifier& c) {
    std::vector<NamedParam> out;
    for (std::size_t i = 0; i < c.layers.size(); ++i) {
        const std::string prefix = "classifier.fc" + std::to_string(i);
        out.push_back({prefix + ".weight", c.layers[i].w});
        out.push_back({prefix + ".bias", c.layers[i].b});
    }
    return out;
}

}  // namespace

std::string model_kind_name(ModelKind kind) {
    return kind == ModelKind::Hybrid ? "hybrid" : "classical";
}

ModelKind model_kind_from_name(const std::string& name) {
    if (name == "hybrid") return ModelKind::Hybrid;
    if (name == "classical") return ModelKind::Classical;
    throw std::invalid_argument("unknown model kind '" + name +
                                "' (expected hybrid or classical)");
}

ConvBlock ConvBlock::create(std::size_t in_ch, std::size_t out_ch, Xoshiro256& rng) {
    ConvBlock b;
    b.conv1_w = init_conv_weight(out_ch, in_ch, rng);
    b.conv1_b = init_linear_bias(out_ch, in_ch * 9, rng);
    b.bn1_gamma = Tensor::full({out_ch}, 1.0, true);
    b.bn1_beta = Tensor::zeros({out_ch}, true);
    b.bn1_mean = Tensor::zeros({out_ch});
    b.bn1_var = Tensor::full({out_ch}, 1.0);
    b.conv2_w = init_conv_weight(out_ch, out_ch, rng);
    b.conv2_b = init_linear_bias(out_ch, out_ch * 9, rng);
    b.bn2_gamma = Tensor::full({out_ch}, 1.0, true);
    b.bn2_beta = Tensor::zeros({out_ch}, true);
    b.bn2_mean = Tensor::zeros({out_ch});
    b.bn2_var = Tensor::full({out_ch}, 1.0);
    return b;
}

Tensor ConvBlock::forward(Tape& tape, const Tensor& x, bool training) {
    Tensor h = nn::conv2d(tape, x, conv1_w, conv1_b, 1);
    h = nn::batchnorm2d(tape, h, bn1_gamma, bn1_beta, bn1_mean, bn1_var, training);
    h = nn::relu(tape, h);
    h = nn::conv2d(tape, h, conv2_w, conv2_b, 1);
    h = nn::batchnorm2d(tape, h, bn2_gamma, bn2_beta, bn2_mean, bn2_var, training);
    return nn::relu(tape, h);
}

BackboneCNN BackboneCNN::create(Xoshiro256& rng) {
    BackboneCNN bb;
    bb.block1 = ConvBlock::create(1, 32, rng);
    bb.block2 = ConvBlock::create(32, 64, rng);
    bb.block3 = ConvBlock::create(64, 128, rng);
    return bb;
}

Tensor BackboneCNN::forward(Tape& tape, const Tensor& images, bool training,
                            Xoshiro256& dropout_rng) {
    if (images.shape().size() != 4 || images.dim(1) != 1 ||
        images.dim(2) != 28 || images.dim(3) != 28)
        throw std::invalid_argument("backbone: input must be [B,1,28,28], got " +
                                    shape_str(images.shape()));
    Tensor h = block1.forward(tape, images, training);          // 32 x 28 x 28
    h = nn::maxpool2d(tape, h);                                 // 32 x 14 x 14
    h = nn::dropout(tape, h, dropout_rate, training, dropout_rng);
    h = block2.forward(tape, h, training);                      // 64 x 14 x 14
    h = nn::maxpool2d(tape, h);                                 // 64 x 7 x 7
    h = nn::dropout(tape, h, dropout_rate, training, dropout_rng);
    h = block3.forward(tape, h, training);                      // 128 x 7 x 7
    h = nn::adaptive_avgpool2d(tape, h, 4);                     // 128 x 4 x 4
    h = nn::dropout(tape, h, dropout_rate, training, dropout_rng);
    return nn::reshape(tape, h, {h.dim(0), 2048});
}

Classifier Classifier::create(const std::vector<std::size_t>& dims, Xoshiro256& rng) {
    Classifier c;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        Classifier::Layer layer;
        layer.w = init_linear_weight({dims[i + 1], dims[i]}, dims[i], rng);
        layer.b = init_linear_bias(dims[i + 1], dims[i], rng);
        c.layers.push_back(std::move(layer));
    }
    return c;
}

Tensor Classifier::forward(Tape& tape, const Tensor& x, bool training,
                           Xoshiro256& dropout_rng) const {
    Tensor h = x;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        h = nn::linear(tape, h, layers[i].w, layers[i].b);
        if (i + 1 < layers.size()) {
            h = nn::relu(tape, h);
            h = nn::dropout(tape, h, dropout_rate, training, dropout_rng);
        }
    }
    return h;
}

HybridQCNN::HybridQCNN(std::uint64_t seed) {
    seed_ = seed;
    Xoshiro256 backbone_rng(derive_stream_seed(seed, kStreamBackbone));
    backbone = BackboneCNN::create(backbone_rng);
    Xoshiro256 branch_rng(derive_stream_seed(seed, kStreamBranches));
    amplitude_branch = AmplitudeBranch::create(branch_rng);
    angle_branch = AngleBranch::create(branch_rng);
    Xoshiro256 fusion_rng(derive_stream_seed(seed, kStreamFusion));
    fusion = FusionBlock::create(fusion_rng);
    Xoshiro256 head_rng(derive_stream_seed(seed, kStreamClassifier));
    head = Classifier::create({2176, 512, 256, 128, 2}, head_rng);
}

Tensor HybridQCNN::forward(Tape& tape, const Tensor& images, bool training,
                           Xoshiro256& dropout_rng) {
    Tensor features = backbone.forward(tape, images, training, dropout_rng);
    Tensor q1 = amplitude_branch.forward(tape, features);
    Tensor q2 = angle_branch.forward(tape, features);
    Tensor fused = fusion.forward(tape, q1, q2, training, dropout_rng);
    Tensor joint = nn::concat_cols(tape, fused, features);
    return head.forward(tape, joint, training, dropout_rng);
}

std::vector<NamedParam> HybridQCNN::parameters() {
    std::vector<NamedParam> out = backbone_params(backbone);
    out.push_back({"amplitude.proj.weight", amplitude_branch.proj_w});
    out.push_back({"amplitude.proj.bias", amplitude_branch.proj_b});
    out.push_back({"amplitude.circuit.params", amplitude_branch.circuit_params});
    out.push_back({"angle.proj.weight", angle_branch.proj_w});
    out.push_back({"angle.proj.bias", angle_branch.proj_b});
    out.push_back({"angle.circuit.params", angle_branch.circuit_params});
    out.push_back({"fusion.weight", fusion.weight});
    out.push_back({"fusion.bias", fusion.bias});
    out.push_back({"fusion.ln.gamma", fusion.ln_gamma});
    out.push_back({"fusion.ln.beta", fusion.ln_beta});
    for (NamedParam& p : classifier_params(head)) out.push_back(std::move(p));
    return out;
}

ParamCounts HybridQCNN::param_counts() {
    ParamCounts c;
    c.backbone = count_params(backbone_params(backbone));
    c.projections = amplitude_branch.proj_w.numel() + amplitude_branch.proj_b.numel() +
                    angle_branch.proj_w.numel() + angle_branch.proj_b.numel();
    c.circuits = amplitude_branch.circuit_params.numel() +
                 angle_branch.circuit_params.numel();
    c.fusion = fusion.weight.numel() + fusion.bias.numel() +
               fusion.ln_gamma.numel() + fusion.ln_beta.numel();
    c.classifier = count_params(classifier_params(head));
    return c;
}

ClassicalCNN::ClassicalCNN(std::uint64_t seed) {
    seed_ = seed;
    Xoshiro256 backbone_rng(derive_stream_seed(seed, kStreamBackbone));
    backbone = BackboneCNN::create(backbone_rng);
    Xoshiro256 head_rng(derive_stream_seed(seed, kStreamClassifier));
    head = Classifier::create({2048, 512, 256, 128, 2}, head_rng);
}

Tensor ClassicalCNN::forward(Tape& tape, const Tensor& images, bool training,
                             Xoshiro256& dropout_rng) {
    Tensor features = backbone.forward(tape, images, training, dropout_rng);
    return head.forward(tape, features, training, dropout_rng);
}

std::vector<NamedParam> ClassicalCNN::parameters() {
    std::vector<NamedParam> out = backbone_params(backbone);
    for (NamedParam& p : classifier_params(head)) out.push_back(std::move(p));
    return out;
}

ParamCounts ClassicalCNN::param_counts() {
    ParamCounts c;
    c.backbone = count_params(backbone_params(backbone));
    c.classifier = count_params(classifier_params(head));
    return c;
}

std::unique_ptr<Model> make_model(ModelKind kind, std::uint64_t seed) {
    if (kind == ModelKind::Hybrid) return std::make_unique<HybridQCNN>(seed);
    return std::make_unique<ClassicalCNN>(seed);
}

void set_dropout_rate(Model& model, double rate) {
    if (auto* h = dynamic_cast<HybridQCNN*>(&model)) {
        h->backbone.dropout_rate = rate;
        h->fusion.dropout_rate = rate;
        h->head.dropout_rate = rate;
    } else if (auto* c = dynamic_cast<ClassicalCNN*>(&model)) {
        c->backbone.dropout_rate = rate;
        c->head.dropout_rate = rate;
    }
}

namespace {

constexpr char kMagic[8] = {'Q', 'F', 'C', 'K', 'P', 'T', '0', '1'};

std::vector<NamedParam> checkpoint_entries(Model& model) {
    std::vector<NamedParam> entries = model.parameters();
    std::vector<NamedParam> buffers;
    if (auto* h = dynamic_cast<HybridQCNN*>(&model))
        buffers = backbone_buffers(h->backbone);
    else if (auto* c = dynamic_cast<ClassicalCNN*>(&model))
        buffers = backbone_buffers(c->backbone);
    for (NamedParam& b : buffers) entries.push_back(std::move(b));
    return entries;
}

void write_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    std::memcpy(b, &v, 4);
    out.write(b, 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    char b[8];
    std::memcpy(b, &v, 8);
    out.write(b, 8);
}

std::uint32_t read_u32(std::istream& in) {
    char b[4];
    in.read(b, 4);
    std::uint32_t v;
    std::memcpy(&v, b, 4);
    return v;
}

std::uint64_t read_u64(std::istream& in) {
    char b[8];
    in.read(b, 8);
    std::uint64_t v;
    std::memcpy(&v, b, 8);
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, Model& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
    out.write(kMagic, sizeof(kMagic));
    const std::string kind = model_kind_name(model.kind());
    write_u32(out, static_cast<std::uint32_t>(kind.size()));
    out.write(kind.data(), static_cast<std::streamsize>(kind.size()));
    write_u64(out, model.seed());

    std::vector<NamedParam> entries = checkpoint_entries(model);
    write_u32(out, static_cast<std::uint32_t>(entries.size()));
    for (NamedParam& e : entries) {
        write_u32(out, static_cast<std::uint32_t>(e.name.size()));
        out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        const Shape& shape = e.tensor.shape();
        write_u32(out, static_cast<std::uint32_t>(shape.size()));
        for (std::size_t d : shape) write_u64(out, d);
        out.write(reinterpret_cast<const char*>(e.tensor.data()),
                  static_cast<std::streamsize>(e.tensor.numel() * sizeof(double)));
    }
    if (!out) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

CheckpointInfo peek_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("checkpoint: '" + path + "' has a bad magic header");
    const std::uint32_t kind_len = read_u32(in);
    std::string kind(kind_len, '\0');
    in.read(kind.data(), kind_len);
    CheckpointInfo info;
    info.kind = model_kind_from_name(kind);
    info.seed = read_u64(in);
    return info;
}

void load_checkpoint(const std::string& path, Model& model) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("checkpoint: '" + path + "' has a bad magic header");
    const std::uint32_t kind_len = read_u32(in);
    std::string kind(kind_len, '\0');
    in.read(kind.data(), kind_len);
    if (model_kind_from_name(kind) != model.kind())
        throw std::runtime_error("checkpoint: stored model kind '" + kind +
                                 "' does not match target model '" +
                                 model_kind_name(model.kind()) + "'");
    read_u64(in);  // stored seed informational only

    std::vector<NamedParam> entries = checkpoint_entries(model);
    std::map<std::string, Tensor> by_name;
    for (NamedParam& e : entries) by_name.emplace(e.name, e.tensor);

    const std::uint32_t count = read_u32(in);
    if (count != entries.size())
        throw std::runtime_error("checkpoint: parameter count mismatch (" +
                                 std::to_string(count) + " stored vs " +
                                 std::to_string(entries.size()) + " expected)");
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = read_u32(in);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        const std::uint32_t ndim = read_u32(in);
        Shape shape(ndim);
        for (std::uint32_t d = 0; d < ndim; ++d)
            shape[d] = static_cast<std::size_t>(read_u64(in));
        auto it = by_name.find(name);
        if (it == by_name.end())
            throw std::runtime_error("checkpoint: unexpected parameter '" + name + "'");
        Tensor& t = it->second;
        if (t.shape() != shape)
            throw std::runtime_error("checkpoint: shape mismatch for '" + name +
                                     "': stored " + shape_str(shape) + " vs model " +
                                     shape_str(t.shape()));
        in.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.numel() * sizeof(double)));
        if (!in) throw std::runtime_error("checkpoint: truncated file '" + path + "'");
    }
}

std::map<std::string, std::vector<double>> snapshot_parameters(Model& model) {
    std::map<std::string, std::vector<double>> snap;
    for (NamedParam& p : checkpoint_entries(model))
        snap.emplace(p.name, std::vector<double>(p.tensor.data(),
                                                 p.tensor.data() + p.tensor.numel()));
    return snap;
}

void restore_parameters(Model& model,
                        const std::map<std::string, std::vector<double>>& snap) {
    for (NamedParam& p : checkpoint_entries(model)) {
        auto it = snap.find(p.name);
        if (it == snap.end() || it->second.size() != p.tensor.numel())
            throw std::runtime_error("restore_parameters: snapshot mismatch for '" +
                                     p.name + "'");
        std::copy(it->second.begin(), it->second.end(), p.tensor.data());
    }
}

}  // namespace qfusion
