#include "qfusion/data.hpp"

#include <algorithm>
#include <set>

#include "qfusion/npy.hpp"
#include "qfusion/rng.hpp"

namespace qfusion::data {

namespace {

constexpr std::size_t kImageSide = 28;
constexpr std::size_t kImagePixels = kImageSide * kImageSide;

// Batch iteration stream id; keeps shuffling decorrelated from the init
// and dropout streams that share the run seed.
constexpr std::uint64_t kStreamShuffle = 7;

SplitDataset build_split(const std::string& name, const npy::NpyArray& images,
                         const npy::NpyArray& labels) {
    if (images.shape.size() != 3 || images.shape[1] != kImageSide ||
        images.shape[2] != kImageSide)
        throw LoadError("archive: " + name + "_images has shape " +
                        shape_str({images.shape.begin(), images.shape.end()}) +
                        ", expected (N,28,28)");
    const std::size_t n = images.shape[0];
    const bool labels_ok =
        (labels.shape.size() == 2 && labels.shape[0] == n && labels.shape[1] == 1) ||
        (labels.shape.size() == 1 && labels.shape[0] == n);
    if (!labels_ok)
        throw LoadError("archive: " + name + "_labels shape does not match " +
                        std::to_string(n) + " images");

    SplitDataset split;
    split.name = name;
    split.count = n;
    split.images.resize(n * kImagePixels);
    for (std::size_t i = 0; i < n * kImagePixels; ++i)
        split.images[i] = normalize_pixel(images.data[i]);
    split.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) split.labels[i] = labels.data[i];
    return split;
}

}  // namespace

double normalize_pixel(std::uint8_t v) {
    return static_cast<double>(v) / 127.5 - 1.0;
}

Tensor SplitDataset::batch_images(const std::vector<std::size_t>& indices) const {
    Tensor out = Tensor::zeros({indices.size(), 1, kImageSide, kImageSide});
    for (std::size_t i = 0; i < indices.size(); ++i)
        std::copy_n(images.data() + indices[i] * kImagePixels, kImagePixels,
                    out.data() + i * kImagePixels);
    return out;
}

std::vector<int> SplitDataset::batch_labels(
    const std::vector<std::size_t>& indices) const {
    std::vector<int> out(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) out[i] = labels[indices[i]];
    return out;
}

Dataset load_archive(const std::string& path, bool swap_labels) {
    std::map<std::string, std::vector<std::uint8_t>> members;
    try {
        members = npy::read_zip(path);
    } catch (const std::exception& e) {
        throw LoadError(std::string("archive: ") + e.what());
    }

    auto member = [&](const std::string& base) -> const std::vector<std::uint8_t>& {
        auto it = members.find(base + ".npy");
        if (it == members.end()) it = members.find(base);
        if (it == members.end())
            throw LoadError("archive '" + path + "' is missing member '" + base +
                            ".npy'");
        return it->second;
    };

    auto parse = [&](const std::string& base) {
        try {
            return npy::parse_npy_u8(member(base));
        } catch (const LoadError&) {
            throw;
        } catch (const std::exception& e) {
            throw LoadError("archive member '" + base + ".npy': " + e.what());
        }
    };

    Dataset ds;
    ds.train = build_split("train", parse("train_images"), parse("train_labels"));
    ds.val = build_split("val", parse("val_images"), parse("val_labels"));
    ds.test = build_split("test", parse("test_images"), parse("test_labels"));

    std::set<int> classes;
    for (const SplitDataset* s : {&ds.train, &ds.val, &ds.test})
        for (int l : s->labels) classes.insert(l);
    for (int c : classes)
        if (c != 0 && c != 1)
            throw LoadError("archive: label value " + std::to_string(c) +
                            " outside the binary {0,1} coding");

    if (swap_labels) {
        for (SplitDataset* s : {&ds.train, &ds.val, &ds.test})
            for (int& l : s->labels) l = 1 - l;
    }
    return ds;
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t count,
                                                   std::size_t batch_size,
                                                   std::uint64_t seed,
                                                   std::uint64_t epoch,
                                                   bool shuffle) {
    if (batch_size == 0) throw std::invalid_argument("make_batches: batch_size must be >= 1");
    if (count == 0) throw std::invalid_argument("make_batches: empty split");

    std::vector<std::size_t> order(count);
    if (shuffle) {
        Xoshiro256 rng(derive_stream_seed(seed, kStreamShuffle, epoch));
        fill_permutation(order.data(), count, rng);
    } else {
        for (std::size_t i = 0; i < count; ++i) order[i] = i;
    }

    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < count; start += batch_size) {
        const std::size_t end = std::min(count, start + batch_size);
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

void write_synthetic_archive(const std::string& path, std::size_t n_train,
                             std::size_t n_val, std::size_t n_test,
                             std::uint64_t seed) {
    Xoshiro256 rng(derive_stream_seed(seed, /*stream_id=*/11));
    auto make_split = [&](std::size_t n)
        -> std::pair<std::vector<std::uint8_t>, std::vector<std::uint8_t>> {
        std::vector<std::uint8_t> images(n * kImagePixels);
        std::vector<std::uint8_t> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            const int label = static_cast<int>(i % 2);  // balanced
            labels[i] = static_cast<std::uint8_t>(label);
            const double mean = label == 0 ? 64.0 : 192.0;
            for (std::size_t p = 0; p < kImagePixels; ++p) {
                const double v = mean + 32.0 * rng.normal();
                images[i * kImagePixels + p] =
                    static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
            }
        }
        return {std::move(images), std::move(labels)};
    };

    std::vector<std::pair<std::string, std::vector<std::uint8_t>>> members;
    const std::pair<std::string, std::size_t> splits[3] = {
        {"train", n_train}, {"val", n_val}, {"test", n_test}};
    for (const auto& [name, n] : splits) {
        auto [images, labels] = make_split(n);
        members.emplace_back(name + "_images.npy",
                             npy::serialize_npy_u8({n, kImageSide, kImageSide}, images));
        members.emplace_back(name + "_labels.npy",
                             npy::serialize_npy_u8({n, 1}, labels));
    }
    npy::write_zip_stored(path, members);
}

}  // namespace qfusion::data
