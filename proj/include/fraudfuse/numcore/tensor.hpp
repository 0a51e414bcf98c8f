#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fraudfuse::nc {

// Every differentiable primitive. Used to label graph nodes, to name ops in
// gradient-check reports, and as the key for backward fault injection.
enum class OpKind : std::uint8_t {
    Leaf,
    MatMul,
    MatMulNT,
    Transpose,
    Add,
    Sub,
    Mul,
    Scale,
    Relu,
    Gelu,
    Softmax,
    MaskedSoftmax,
    LayerNorm,
    Gather,
    Mean,
    Concat,
    SliceCols,
    SliceRows,
    Sum,
    Clamp,
    Dropout,
    BinaryCrossEntropy,
    StraightThrough,
    Count_
};

const char* op_name(OpKind kind);

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of the computation graph. `grad` is the per-backward-pass
// buffer; `grad_acc` is the persistent accumulator on leaves.
struct Node {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;
    std::vector<double> grad;
    std::vector<double> grad_acc;
    bool requires_grad = false;
    OpKind op = OpKind::Leaf;
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backward;
};

// Dense row-major matrix of doubles with reverse-mode tracking. Vectors are
// 1 x n rows and scalars are 1 x 1.
//
// Tensor is a handle: copies share the underlying node, like references into
// the computation graph. Use clone() for an independent copy of the values.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(NodePtr node) : node_(std::move(node)) {}

    static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false);
    static Tensor full(std::size_t rows, std::size_t cols, double value, bool requires_grad = false);
    static Tensor from(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor identity(std::size_t n);

    bool defined() const noexcept { return node_ != nullptr; }
    std::size_t rows() const { return node_->rows; }
    std::size_t cols() const { return node_->cols; }
    std::size_t size() const { return node_->data.size(); }
    std::vector<std::size_t> shape() const { return {node_->rows, node_->cols}; }
    std::string shape_str() const;

    std::span<const double> data() const { return node_->data; }
    std::span<double> mutable_data() { return node_->data; }
    double at(std::size_t r, std::size_t c) const { return node_->data[r * node_->cols + c]; }
    double& at(std::size_t r, std::size_t c) { return node_->data[r * node_->cols + c]; }
    double item() const;

    bool requires_grad() const { return node_->requires_grad; }
    // Accumulated gradient; empty until zero_grad() or a backward pass.
    std::span<const double> grad() const { return node_->grad_acc; }
    bool has_grad() const { return !node_->grad_acc.empty(); }
    void zero_grad();

    // Detached copy of the values.
    Tensor clone() const;
    // Same values, no graph history.
    Tensor detach() const;

    Node* node() const { return node_.get(); }
    const NodePtr& node_ptr() const { return node_; }

private:
    NodePtr node_;
};

// Named trainable tensor, e.g. "gcn.layer0.W".
struct Parameter {
    std::string name;
    Tensor tensor;
};

// Ordered parameter registry. Names are unique; insertion order is the
// iteration order (and the checkpoint order).
class ParameterStore {
public:
    Tensor& add(const std::string& name, std::size_t rows, std::size_t cols);
    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;
    bool contains(const std::string& name) const;

    std::vector<Parameter>& all() { return params_; }
    const std::vector<Parameter>& all() const { return params_; }
    std::size_t count() const { return params_.size(); }
    std::size_t scalar_count() const;

    void zero_grad();

    // Value snapshot / restore, used for best-epoch retention.
    std::vector<std::vector<double>> snapshot() const;
    void restore(const std::vector<std::vector<double>>& values);

private:
    std::vector<Parameter> params_;
};

// Graph construction is skipped while a NoGradGuard is alive on this thread.
bool grad_enabled();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

// Reverse-mode pass from a 1 x 1 root. Leaves accumulate into grad_acc;
// calling it twice without zeroing adds the same gradient twice.
void backward(const Tensor& loss);

namespace debug {

// Multiplies the upstream gradient entering every node of `kind` during
// backward by `factor`. Test-only: used to confirm that the gradient checker
// catches a broken backward rule. factor = 1 restores normal behaviour.
void inject_backward_fault(OpKind kind, double factor);
void clear_backward_faults();

}  // namespace debug

}  // namespace fraudfuse::nc
