#include "qfusion/tensor.hpp"

#include <numeric>
#include <stdexcept>

namespace qfusion {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    auto node = std::make_shared<Node>();
    node->data.assign(shape_numel(shape), 0.0);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    Tensor t = zeros(std::move(shape), requires_grad);
    for (double& v : t.values()) v = value;
    return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape_numel(shape) != values.size())
        throw std::invalid_argument("Tensor::from_data: shape " + shape_str(shape) +
                                    " does not match " + std::to_string(values.size()) +
                                    " values");
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->data = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) { return from_data({1}, {value}); }

Tensor::Node& Tensor::node() const {
    if (!node_) throw std::logic_error("Tensor: use of undefined tensor");
    return *node_;
}

const Shape& Tensor::shape() const { return node().shape; }
std::size_t Tensor::numel() const { return node().data.size(); }

std::size_t Tensor::dim(std::size_t axis) const {
    const Shape& s = shape();
    if (axis >= s.size())
        throw std::out_of_range("Tensor::dim: axis out of range");
    return s[axis];
}

double* Tensor::data() { return node().data.data(); }
const double* Tensor::data() const { return node().data.data(); }
std::span<double> Tensor::values() { return node().data; }
std::span<const double> Tensor::values() const { return node().data; }

double Tensor::item() const {
    if (numel() != 1)
        throw std::logic_error("Tensor::item: tensor has " +
                               std::to_string(numel()) + " elements");
    return node().data[0];
}

bool Tensor::requires_grad() const { return node().requires_grad; }
void Tensor::set_requires_grad(bool flag) { node().requires_grad = flag; }

std::span<double> Tensor::grad() {
    Node& n = node();
    if (n.grad.empty()) n.grad.assign(n.data.size(), 0.0);
    return n.grad;
}

bool Tensor::has_grad() const { return !node().grad.empty(); }

void Tensor::zero_grad() {
    Node& n = node();
    if (!n.grad.empty()) n.grad.assign(n.data.size(), 0.0);
}

void Tensor::accumulate_grad(std::span<const double> delta) {
    auto g = grad();
    if (delta.size() != g.size())
        throw std::invalid_argument("Tensor::accumulate_grad: size mismatch");
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += delta[i];
}

void Tape::record(std::function<void()> backward_step) {
    if (!recording()) return;
    steps_.push_back(std::move(backward_step));
}

void Tape::backward(Tensor& loss) {
    if (consumed_)
        throw std::logic_error("Tape::backward called twice without a new forward pass");
    if (loss.numel() != 1)
        throw std::invalid_argument("Tape::backward: loss must be a scalar");
    consumed_ = true;
    loss.grad()[0] += 1.0;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
}

}  // namespace qfusion
