#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace qfusion {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense 64-bit real tensor. Copying a Tensor copies the handle, not the
/// buffer; ops never mutate their inputs, so sharing is safe.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_data(Shape shape, std::vector<double> values,
                            bool requires_grad = false);
    static Tensor scalar(double value);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t numel() const;
    std::size_t dim(std::size_t axis) const;

    double* data();
    const double* data() const;
    std::span<double> values();
    std::span<const double> values() const;

    /// Value of a scalar (numel == 1) tensor.
    double item() const;

    bool requires_grad() const;
    void set_requires_grad(bool flag);

    /// Gradient buffer, allocated as zeros on first access.
    std::span<double> grad();
    bool has_grad() const;
    void zero_grad();
    void accumulate_grad(std::span<const double> delta);

    /// Identity comparison (same underlying buffer).
    bool same_node(const Tensor& other) const { return node_ == other.node_; }

private:
    struct Node {
        Shape shape;
        std::vector<double> data;
        std::vector<double> grad;
        bool requires_grad = false;
    };

    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
    Node& node() const;

    std::shared_ptr<Node> node_;
};

/// Ordered record of executed ops for one forward pass. Each differentiable
/// op pushes a closure that propagates adjoints; backward() replays them in
/// reverse execution order, exactly once.
class Tape {
public:
    explicit Tape(bool enabled = true) : enabled_(enabled) {}

    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    bool recording() const { return enabled_ && !consumed_; }
    void record(std::function<void()> backward_step);

    /// Seeds d(loss)/d(loss) = 1 and replays all records in reverse.
    /// The tape is consumed afterwards; a second call throws.
    void backward(Tensor& loss);

    std::size_t size() const { return steps_.size(); }

private:
    bool enabled_ = true;
    bool consumed_ = false;
    std::vector<std::function<void()>> steps_;
};

}  // namespace qfusion
