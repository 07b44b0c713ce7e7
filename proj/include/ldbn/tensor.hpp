#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ldbn {

// Dense 4-D shape in (batch, channels, height, width) order.
struct Shape {
    int64_t b = 0;
    int64_t c = 0;
    int64_t h = 0;
    int64_t w = 0;

    int64_t count() const { return b * c * h * w; }
    bool operator==(const Shape&) const = default;
    std::string str() const;
};

namespace detail {

struct TensorNode {
    Shape shape;
    std::vector<double> values;
    bool requires_grad = false;
    std::vector<double> grad;  // empty until backward first touches this node
};

}  // namespace detail

// Value-semantics handle to a 4-D array of doubles. Stored values are
// immutable once created; only the gradient buffer, and parameter values
// between optimizer steps, may be written.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(const Shape& s, bool requires_grad = false);
    static Tensor full(const Shape& s, double value, bool requires_grad = false);
    static Tensor from_values(const Shape& s, std::vector<double> values,
                              bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    bool requires_grad() const { return node_->requires_grad; }

    std::span<const double> values() const { return node_->values; }

    // Write access for parameter updates between training steps. Graph
    // intermediates must never be written through this.
    std::span<double> values_mut() { return node_->values; }

    bool has_grad() const { return !node_->grad.empty(); }
    std::span<const double> grad() const { return node_->grad; }
    void zero_grad();

    // Value of a single-element tensor.
    double scalar() const;

    double at(int64_t b, int64_t c, int64_t h, int64_t w) const;

    bool same_node(const Tensor& other) const { return node_ == other.node_; }

private:
    friend class Graph;
    explicit Tensor(std::shared_ptr<detail::TensorNode> n) : node_(std::move(n)) {}

    // Allocates a zeroed gradient buffer on first use.
    std::vector<double>& grad_buffer() const;

    std::shared_ptr<detail::TensorNode> node_;
};

// Records forward operations and replays their backward rules in reverse
// order. Single-owner: use one graph from one thread at a time; independent
// graphs may run concurrently.
//
// Every op validates its output for NaN/Inf and throws std::runtime_error if
// a non-finite value appears.
class Graph {
public:
    // 2-D convolution in cross-correlation orientation (no kernel flip, the
    // usual deep-learning convention) with zero padding. weight is
    // (out, in, kh, kw) with odd kh/kw; bias is (1, out, 1, 1).
    Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                  int64_t padding);

    // max(0, x); gradient at x == 0 is defined as 0.
    Tensor relu(const Tensor& x);

    Tensor concat_channels(std::span<const Tensor> inputs);

    Tensor add(const Tensor& a, const Tensor& b);
    Tensor sub(const Tensor& a, const Tensor& b);
    Tensor square(const Tensor& x);
    // |x|; gradient uses sign(x) with sign(0) = 0.
    Tensor abs(const Tensor& x);
    Tensor scalar_mul(const Tensor& x, double s);
    Tensor mean_all(const Tensor& x);

    // Forward differences: out(y,x) = in(y,x+1) - in(y,x) with the last
    // column 0; forward_diff_y works on rows with the last row 0. Fixed
    // kernels, no learnable parameters.
    Tensor forward_diff_x(const Tensor& x);
    Tensor forward_diff_y(const Tensor& x);

    // Reverse topological traversal from a scalar loss; seeds gradient 1 and
    // accumulates into every tensor that requires grad. A graph can be
    // consumed only once.
    void backward(const Tensor& loss);

    size_t recorded_ops() const { return steps_.size(); }

private:
    Tensor make_output(const Shape& s, std::vector<double> values, bool requires_grad,
                       const char* op_name);

    std::vector<std::function<void()>> steps_;
    bool consumed_ = false;
};

}  // namespace ldbn
