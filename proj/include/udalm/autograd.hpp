#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "udalm/tensor.hpp"

namespace udalm {

struct Parameter {
    std::string name;
    Tensor value;
};

/// Ordered, named collection of trainable arrays. Indices are stable once added.
class ParameterStore {
public:
    int add(std::string name, Tensor init);

    Parameter& at(int index) { return params_.at(static_cast<std::size_t>(index)); }
    const Parameter& at(int index) const { return params_.at(static_cast<std::size_t>(index)); }
    int size() const { return static_cast<int>(params_.size()); }

    /// Index of the named parameter, or -1.
    int find(const std::string& name) const;
    std::size_t total_elements() const;

    std::vector<Parameter>& all() { return params_; }
    const std::vector<Parameter>& all() const { return params_; }

private:
    std::vector<Parameter> params_;
};

/// Handle to a node of a Graph.
struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

/// Reverse-mode tape for a single sample. Nodes are appended in evaluation
/// order; backward() sweeps them in reverse. Parameter leaves refer to the
/// store's arrays without copying, so the store must outlive the graph.
class Graph {
public:
    using BackwardFn = std::function<void(Graph&, const Tensor& out_grad)>;

    explicit Graph(bool track_gradients = true) : track_(track_gradients) {}

    Var constant(Tensor value);
    Var parameter(const ParameterStore& store, int index);

    const Tensor& value(Var v) const;
    /// Gradient accumulated into v by the last backward(); empty if none reached it.
    const Tensor& grad(Var v) const;
    /// Gradient buffer of v, allocated as zeros on first use. For custom ops.
    Tensor& grad_buffer(Var v);
    bool requires_grad(Var v) const;

    /// Seeds every root with its weight and runs one reverse sweep.
    void backward(std::span<const std::pair<Var, double>> roots);
    void backward(Var root, double seed = 1.0);

    /// out[i] += gradient of parameter i (for every parameter leaf in the graph).
    void accumulate_parameter_grads(std::vector<Tensor>& out) const;

    /// Appends a node with a caller-supplied backward rule.
    Var custom(Tensor value, std::span<const Var> parents, BackwardFn backward);

    // Dense ops. Matrices are rank-2 row-major; feature maps are C×H×W.
    Var matmul(Var a, Var b);
    /// x (N×in) · wᵀ (w is out×in) + b (out).
    Var linear(Var x, Var w, Var b);
    Var add(Var a, Var b);
    Var add_constant(Var a, const Tensor& c);
    Var scale(Var a, double factor);
    Var relu(Var a);
    Var sigmoid(Var a);
    /// Identity forward, negated gradient backward.
    Var grl(Var a);
    Var reshape(Var a, std::vector<int> shape);

    Var conv2d(Var x, Var w, Var b, int stride, int pad);
    /// w is Cin×Cout×k×k; output size (H−1)·stride − 2·pad + k.
    Var conv_transpose2d(Var x, Var w, Var b, int stride, int pad);
    /// Row-wise normalization of an N×C matrix with affine gamma/beta (C).
    Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
    /// Multi-head scaled dot-product attention over projected q (Lq×C), k, v (N×C).
    Var attention(Var q, Var k, Var v, int heads);
    /// C×H×W → 1×C spatial mean.
    Var global_avg_pool(Var x);
    /// C×H×W → (H·W)×C.
    Var to_tokens(Var x);

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Tensor value;
        const Tensor* external = nullptr;
        Tensor grad;
        BackwardFn backward;
        int param_index = -1;
        bool needs_grad = false;
    };

    Var push(Tensor value, bool needs_grad, BackwardFn backward);
    bool any_needs(std::initializer_list<Var> vars) const;

    bool track_;
    std::vector<Node> nodes_;
};

}  // namespace udalm
