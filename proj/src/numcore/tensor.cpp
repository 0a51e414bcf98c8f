#include "fraudfuse/numcore/tensor.hpp"

#include <algorithm>
#include <array>
#include <unordered_set>

#include "fraudfuse/errors.hpp"

namespace fraudfuse::nc {

namespace {

thread_local bool g_grad_enabled = true;

std::array<double, static_cast<std::size_t>(OpKind::Count_)>& fault_table() {
    static std::array<double, static_cast<std::size_t>(OpKind::Count_)> table = [] {
        std::array<double, static_cast<std::size_t>(OpKind::Count_)> t{};
        t.fill(1.0);
        return t;
    }();
    return table;
}

}  // namespace

const char* op_name(OpKind kind) {
    switch (kind) {
        case OpKind::Leaf: return "leaf";
        case OpKind::MatMul: return "matmul";
        case OpKind::MatMulNT: return "matmul_nt";
        case OpKind::Transpose: return "transpose";
        case OpKind::Add: return "add";
        case OpKind::Sub: return "sub";
        case OpKind::Mul: return "mul";
        case OpKind::Scale: return "scale";
        case OpKind::Relu: return "relu";
        case OpKind::Gelu: return "gelu";
        case OpKind::Softmax: return "softmax";
        case OpKind::MaskedSoftmax: return "masked_softmax";
        case OpKind::LayerNorm: return "layer_norm";
        case OpKind::Gather: return "embedding_lookup";
        case OpKind::Mean: return "mean";
        case OpKind::Concat: return "concat";
        case OpKind::SliceCols: return "slice_cols";
        case OpKind::SliceRows: return "slice_rows";
        case OpKind::Sum: return "sum";
        case OpKind::Clamp: return "clamp";
        case OpKind::Dropout: return "dropout";
        case OpKind::BinaryCrossEntropy: return "binary_cross_entropy";
        case OpKind::StraightThrough: return "straight_through";
        case OpKind::Count_: break;
    }
    return "unknown";
}

Tensor Tensor::zeros(std::size_t rows, std::size_t cols, bool requires_grad) {
    return full(rows, cols, 0.0, requires_grad);
}

Tensor Tensor::full(std::size_t rows, std::size_t cols, double value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->rows = rows;
    n->cols = cols;
    n->data.assign(rows * cols, value);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::from(std::size_t rows, std::size_t cols, std::vector<double> values,
                    bool requires_grad) {
    if (values.size() != rows * cols) {
        throw ShapeError("Tensor::from: " + std::to_string(values.size()) + " values for shape [" +
                         std::to_string(rows) + "," + std::to_string(cols) + "]");
    }
    auto n = std::make_shared<Node>();
    n->rows = rows;
    n->cols = cols;
    n->data = std::move(values);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return full(1, 1, value, requires_grad);
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t = zeros(n, n);
    for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

std::string Tensor::shape_str() const {
    if (!node_) return "[undefined]";
    return "[" + std::to_string(node_->rows) + "," + std::to_string(node_->cols) + "]";
}

double Tensor::item() const {
    if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_str());
    return node_->data[0];
}

void Tensor::zero_grad() {
    node_->grad_acc.assign(node_->data.size(), 0.0);
}

Tensor Tensor::clone() const {
    return from(rows(), cols(), node_->data, node_->requires_grad);
}

Tensor Tensor::detach() const {
    return from(rows(), cols(), node_->data, false);
}

Tensor& ParameterStore::add(const std::string& name, std::size_t rows, std::size_t cols) {
    if (contains(name)) throw ConfigError("duplicate parameter name: " + name);
    params_.push_back({name, Tensor::zeros(rows, cols, true)});
    return params_.back().tensor;
}

Tensor& ParameterStore::get(const std::string& name) {
    for (auto& p : params_) {
        if (p.name == name) return p.tensor;
    }
    throw ConfigError("unknown parameter: " + name);
}

const Tensor& ParameterStore::get(const std::string& name) const {
    for (const auto& p : params_) {
        if (p.name == name) return p.tensor;
    }
    throw ConfigError("unknown parameter: " + name);
}

bool ParameterStore::contains(const std::string& name) const {
    return std::any_of(params_.begin(), params_.end(),
                       [&](const Parameter& p) { return p.name == name; });
}

std::size_t ParameterStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.tensor.size();
    return n;
}

void ParameterStore::zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
}

std::vector<std::vector<double>> ParameterStore::snapshot() const {
    std::vector<std::vector<double>> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.emplace_back(p.tensor.data().begin(), p.tensor.data().end());
    return out;
}

void ParameterStore::restore(const std::vector<std::vector<double>>& values) {
    if (values.size() != params_.size()) throw ShapeError("restore: parameter count mismatch");
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto dst = params_[i].tensor.mutable_data();
        if (values[i].size() != dst.size()) {
            throw ShapeError("restore: size mismatch for " + params_[i].name);
        }
        std::copy(values[i].begin(), values[i].end(), dst.begin());
    }
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.size() != 1) {
        throw ShapeError("backward: root must be a 1x1 scalar, got " + loss.shape_str());
    }
    Node* root = loss.node();
    if (!root->requires_grad) return;

    // Iterative post-order DFS gives a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{root, 0}};
    seen.insert(root);
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Node* n : order) n->grad.assign(n->data.size(), 0.0);
    root->grad[0] = 1.0;

    const auto& faults = fault_table();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (!n->backward) continue;
        const double f = faults[static_cast<std::size_t>(n->op)];
        if (f != 1.0) {
            for (double& g : n->grad) g *= f;
        }
        n->backward(*n);
    }

    for (Node* n : order) {
        if (n->parents.empty()) {
            if (n->grad_acc.size() != n->grad.size()) n->grad_acc.assign(n->grad.size(), 0.0);
            for (std::size_t i = 0; i < n->grad.size(); ++i) n->grad_acc[i] += n->grad[i];
        }
        std::vector<double>().swap(n->grad);
    }
}

namespace debug {

void inject_backward_fault(OpKind kind, double factor) {
    fault_table()[static_cast<std::size_t>(kind)] = factor;
}

void clear_backward_faults() { fault_table().fill(1.0); }

}  // namespace debug

}  // namespace fraudfuse::nc
