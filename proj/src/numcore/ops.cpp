#include "fraudfuse/numcore/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "fraudfuse/errors.hpp"

namespace fraudfuse::nc {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap view(const Node& n) { return ConstMap(n.data.data(), n.rows, n.cols); }
ConstMap grad_view(const Node& n) { return ConstMap(n.grad.data(), n.rows, n.cols); }
MutMap grad_mut(Node& n) { return MutMap(n.grad.data(), n.rows, n.cols); }

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
    throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_str() + " and " +
                     b.shape_str());
}

void check_defined(const char* op, const Tensor& a) {
    if (!a.defined()) throw ShapeError(std::string(op) + ": undefined operand");
}

// Builds the output node. The backward closure and parent links are only
// kept when some parent is tracked and grad mode is on.
Tensor make_node(std::size_t rows, std::size_t cols, std::vector<double> data, OpKind op,
                 std::initializer_list<Tensor> parents, std::function<void(Node&)> bw) {
    auto n = std::make_shared<Node>();
    n->rows = rows;
    n->cols = cols;
    n->data = std::move(data);
    n->op = op;
#ifndef NDEBUG
    for (double v : n->data) {
        if (!std::isfinite(v)) {
            bool finite_in = true;
            for (const auto& p : parents) {
                for (double x : p.data()) finite_in = finite_in && std::isfinite(x);
            }
            if (finite_in) throw NumericError(std::string(op_name(op)) + ": non-finite output");
        }
    }
#endif
    if (grad_enabled()) {
        bool track = false;
        for (const auto& p : parents) track = track || p.requires_grad();
        if (track) {
            n->requires_grad = true;
            for (const auto& p : parents) n->parents.push_back(p.node_ptr());
            n->backward = std::move(bw);
        }
    }
    return Tensor(std::move(n));
}

Tensor make_node_vec(std::size_t rows, std::size_t cols, std::vector<double> data, OpKind op,
                     const std::vector<Tensor>& parents, std::function<void(Node&)> bw) {
    auto n = std::make_shared<Node>();
    n->rows = rows;
    n->cols = cols;
    n->data = std::move(data);
    n->op = op;
    if (grad_enabled()) {
        bool track = false;
        for (const auto& p : parents) track = track || p.requires_grad();
        if (track) {
            n->requires_grad = true;
            for (const auto& p : parents) n->parents.push_back(p.node_ptr());
            n->backward = std::move(bw);
        }
    }
    return Tensor(std::move(n));
}

struct Broadcast {
    std::size_t rows, cols;
};

Broadcast broadcast_shape(const char* op, const Tensor& a, const Tensor& b) {
    auto dim = [&](std::size_t x, std::size_t y) {
        if (x == y) return x;
        if (x == 1) return y;
        if (y == 1) return x;
        shape_fail(op, a, b);
    };
    return {dim(a.rows(), b.rows()), dim(a.cols(), b.cols())};
}

inline std::size_t bidx(const Node& n, std::size_t r, std::size_t c) {
    return (n.rows == 1 ? 0 : r) * n.cols + (n.cols == 1 ? 0 : c);
}

template <typename Fwd, typename DA, typename DB>
Tensor binary_elementwise(const char* name, OpKind op, const Tensor& a, const Tensor& b, Fwd fwd,
                          DA da, DB db) {
    check_defined(name, a);
    check_defined(name, b);
    const auto [rows, cols] = broadcast_shape(name, a, b);
    const Node& na = *a.node();
    const Node& nb = *b.node();
    std::vector<double> out(rows * cols);
    if (na.rows == rows && na.cols == cols && nb.rows == rows && nb.cols == cols) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(na.data[i], nb.data[i]);
    } else {
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
                out[r * cols + c] = fwd(na.data[bidx(na, r, c)], nb.data[bidx(nb, r, c)]);
            }
        }
    }
    return make_node(rows, cols, std::move(out), op, {a, b}, [da, db](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        for (std::size_t r = 0; r < self.rows; ++r) {
            for (std::size_t c = 0; c < self.cols; ++c) {
                const double g = self.grad[r * self.cols + c];
                const std::size_t ia = bidx(pa, r, c);
                const std::size_t ib = bidx(pb, r, c);
                if (pa.requires_grad) pa.grad[ia] += da(g, pa.data[ia], pb.data[ib]);
                if (pb.requires_grad) pb.grad[ib] += db(g, pa.data[ia], pb.data[ib]);
            }
        }
    });
}

template <typename Fwd, typename Deriv>
Tensor unary_elementwise(const char* name, OpKind op, const Tensor& a, Fwd fwd, Deriv deriv) {
    check_defined(name, a);
    const auto& in = a.data();
    std::vector<double> out(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
    return make_node(a.rows(), a.cols(), std::move(out), op, {a}, [deriv](Node& self) {
        Node& p = *self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            p.grad[i] += self.grad[i] * deriv(p.data[i], self.data[i]);
        }
    });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_defined("matmul", a);
    check_defined("matmul", b);
    if (a.cols() != b.rows()) shape_fail("matmul", a, b);
    std::vector<double> out(a.rows() * b.cols());
    MutMap(out.data(), a.rows(), b.cols()).noalias() = view(*a.node()) * view(*b.node());
    return make_node(a.rows(), b.cols(), std::move(out), OpKind::MatMul, {a, b}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) grad_mut(pa).noalias() += grad_view(self) * view(pb).transpose();
        if (pb.requires_grad) grad_mut(pb).noalias() += view(pa).transpose() * grad_view(self);
    });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    check_defined("matmul_nt", a);
    check_defined("matmul_nt", b);
    if (a.cols() != b.cols()) shape_fail("matmul_nt", a, b);
    std::vector<double> out(a.rows() * b.rows());
    MutMap(out.data(), a.rows(), b.rows()).noalias() =
        view(*a.node()) * view(*b.node()).transpose();
    return make_node(a.rows(), b.rows(), std::move(out), OpKind::MatMulNT, {a, b}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        if (pa.requires_grad) grad_mut(pa).noalias() += grad_view(self) * view(pb);
        if (pb.requires_grad) grad_mut(pb).noalias() += grad_view(self).transpose() * view(pa);
    });
}

Tensor transpose(const Tensor& a) {
    check_defined("transpose", a);
    std::vector<double> out(a.size());
    MutMap(out.data(), a.cols(), a.rows()) = view(*a.node()).transpose();
    return make_node(a.cols(), a.rows(), std::move(out), OpKind::Transpose, {a}, [](Node& self) {
        Node& p = *self.parents[0];
        grad_mut(p) += grad_view(self).transpose();
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        "add", OpKind::Add, a, b, [](double x, double y) { return x + y; },
        [](double g, double, double) { return g; }, [](double g, double, double) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        "sub", OpKind::Sub, a, b, [](double x, double y) { return x - y; },
        [](double g, double, double) { return g; }, [](double g, double, double) { return -g; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary_elementwise(
        "mul", OpKind::Mul, a, b, [](double x, double y) { return x * y; },
        [](double g, double, double y) { return g * y; },
        [](double g, double x, double) { return g * x; });
}

Tensor scale(const Tensor& a, double factor) {
    return unary_elementwise(
        "scale", OpKind::Scale, a, [factor](double x) { return factor * x; },
        [factor](double, double) { return factor; });
}

Tensor relu(const Tensor& a) {
    return unary_elementwise(
        "relu", OpKind::Relu, a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& a) {
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    return unary_elementwise(
        "gelu", OpKind::Gelu, a,
        [](double x) { return 0.5 * x * (1.0 + std::erf(x * inv_sqrt2)); },
        [inv_sqrt_2pi](double x, double) {
            const double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
            return cdf + x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
        });
}

namespace {

// Stable softmax over `n` strided entries; masked entries are set to 0.
void softmax_line(const double* in, double* out, std::size_t n, std::size_t stride,
                  const std::vector<bool>* valid) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        if (valid && !(*valid)[i]) continue;
        mx = std::max(mx, in[i * stride]);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (valid && !(*valid)[i]) {
            out[i * stride] = 0.0;
            continue;
        }
        out[i * stride] = std::exp(in[i * stride] - mx);
        total += out[i * stride];
    }
    for (std::size_t i = 0; i < n; ++i) out[i * stride] /= total;
}

void softmax_line_backward(const double* y, const double* gy, double* gx, std::size_t n,
                           std::size_t stride) {
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += y[i * stride] * gy[i * stride];
    for (std::size_t i = 0; i < n; ++i) gx[i * stride] += y[i * stride] * (gy[i * stride] - dot);
}

}  // namespace

Tensor softmax(const Tensor& a, int axis) {
    check_defined("softmax", a);
    if (axis != 0 && axis != 1) throw ShapeError("softmax: axis must be 0 or 1");
    const std::size_t rows = a.rows();
    const std::size_t cols = a.cols();
    std::vector<double> out(a.size());
    const double* in = a.data().data();
    if (axis == 1) {
        for (std::size_t r = 0; r < rows; ++r) softmax_line(in + r * cols, out.data() + r * cols, cols, 1, nullptr);
    } else {
        for (std::size_t c = 0; c < cols; ++c) softmax_line(in + c, out.data() + c, rows, cols, nullptr);
    }
    return make_node(rows, cols, std::move(out), OpKind::Softmax, {a}, [axis](Node& self) {
        Node& p = *self.parents[0];
        if (axis == 1) {
            for (std::size_t r = 0; r < self.rows; ++r) {
                const std::size_t o = r * self.cols;
                softmax_line_backward(self.data.data() + o, self.grad.data() + o, p.grad.data() + o,
                                      self.cols, 1);
            }
        } else {
            for (std::size_t c = 0; c < self.cols; ++c) {
                softmax_line_backward(self.data.data() + c, self.grad.data() + c, p.grad.data() + c,
                                      self.rows, self.cols);
            }
        }
    });
}

Tensor masked_softmax(const Tensor& a, const std::vector<bool>& key_valid) {
    check_defined("masked_softmax", a);
    if (key_valid.size() != a.cols()) {
        throw ShapeError("masked_softmax: mask length " + std::to_string(key_valid.size()) +
                         " for shape " + a.shape_str());
    }
    if (std::none_of(key_valid.begin(), key_valid.end(), [](bool v) { return v; })) {
        throw ShapeError("masked_softmax: every key position is masked");
    }
    const std::size_t rows = a.rows();
    const std::size_t cols = a.cols();
    std::vector<double> out(a.size());
    const double* in = a.data().data();
    for (std::size_t r = 0; r < rows; ++r) {
        softmax_line(in + r * cols, out.data() + r * cols, cols, 1, &key_valid);
    }
    // Masked outputs are exactly 0, so the unmasked Jacobian handles them.
    return make_node(rows, cols, std::move(out), OpKind::MaskedSoftmax, {a}, [](Node& self) {
        Node& p = *self.parents[0];
        for (std::size_t r = 0; r < self.rows; ++r) {
            const std::size_t o = r * self.cols;
            softmax_line_backward(self.data.data() + o, self.grad.data() + o, p.grad.data() + o,
                                  self.cols, 1);
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    check_defined("layer_norm", x);
    if (gain.rows() != 1 || gain.cols() != x.cols()) shape_fail("layer_norm", x, gain);
    if (bias.rows() != 1 || bias.cols() != x.cols()) shape_fail("layer_norm", x, bias);
    const std::size_t rows = x.rows();
    const std::size_t cols = x.cols();
    std::vector<double> out(x.size());
    // Saved per row: normalized values and 1/sigma.
    auto xhat = std::make_shared<std::vector<double>>(x.size());
    auto inv_std = std::make_shared<std::vector<double>>(rows);
    const double* in = x.data().data();
    const double* g = gain.data().data();
    const double* b = bias.data().data();
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = in + r * cols;
        double mu = 0.0;
        for (std::size_t c = 0; c < cols; ++c) mu += row[c];
        mu /= static_cast<double>(cols);
        double var = 0.0;
        for (std::size_t c = 0; c < cols; ++c) var += (row[c] - mu) * (row[c] - mu);
        var /= static_cast<double>(cols);
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[r] = is;
        for (std::size_t c = 0; c < cols; ++c) {
            const double h = (row[c] - mu) * is;
            (*xhat)[r * cols + c] = h;
            out[r * cols + c] = h * g[c] + b[c];
        }
    }
    return make_node(rows, cols, std::move(out), OpKind::LayerNorm, {x, gain, bias},
                     [xhat, inv_std](Node& self) {
                         Node& px = *self.parents[0];
                         Node& pg = *self.parents[1];
                         Node& pb = *self.parents[2];
                         const std::size_t cols = self.cols;
                         const double n = static_cast<double>(cols);
                         std::vector<double> dxhat(cols);
                         for (std::size_t r = 0; r < self.rows; ++r) {
                             const double* gy = self.grad.data() + r * cols;
                             const double* h = xhat->data() + r * cols;
                             double mean_d = 0.0;
                             double mean_dh = 0.0;
                             for (std::size_t c = 0; c < cols; ++c) {
                                 if (pg.requires_grad) pg.grad[c] += gy[c] * h[c];
                                 if (pb.requires_grad) pb.grad[c] += gy[c];
                                 dxhat[c] = gy[c] * pg.data[c];
                                 mean_d += dxhat[c];
                                 mean_dh += dxhat[c] * h[c];
                             }
                             if (!px.requires_grad) continue;
                             mean_d /= n;
                             mean_dh /= n;
                             const double is = (*inv_std)[r];
                             for (std::size_t c = 0; c < cols; ++c) {
                                 px.grad[r * cols + c] += is * (dxhat[c] - mean_d - h[c] * mean_dh);
                             }
                         }
                     });
}

Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids) {
    check_defined("embedding_lookup", table);
    const std::size_t cols = table.cols();
    std::vector<double> out(ids.size() * cols);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] >= table.rows()) {
            throw ShapeError("embedding_lookup: id " + std::to_string(ids[i]) +
                             " out of range for table " + table.shape_str());
        }
        std::copy_n(table.data().data() + ids[i] * cols, cols, out.data() + i * cols);
    }
    std::vector<std::size_t> saved(ids.begin(), ids.end());
    return make_node(ids.size(), cols, std::move(out), OpKind::Gather, {table},
                     [saved = std::move(saved)](Node& self) {
                         Node& p = *self.parents[0];
                         const std::size_t cols = self.cols;
                         for (std::size_t i = 0; i < saved.size(); ++i) {
                             for (std::size_t c = 0; c < cols; ++c) {
                                 p.grad[saved[i] * cols + c] += self.grad[i * cols + c];
                             }
                         }
                     });
}

Tensor mean(const Tensor& a, int axis) {
    check_defined("mean", a);
    const std::size_t rows = a.rows();
    const std::size_t cols = a.cols();
    if (axis == 0) {
        if (rows == 0) throw ShapeError("mean: no rows");
        std::vector<double> out(cols, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) out[c] += a.at(r, c);
        }
        for (double& v : out) v /= static_cast<double>(rows);
        return make_node(1, cols, std::move(out), OpKind::Mean, {a}, [](Node& self) {
            Node& p = *self.parents[0];
            const double inv = 1.0 / static_cast<double>(p.rows);
            for (std::size_t r = 0; r < p.rows; ++r) {
                for (std::size_t c = 0; c < p.cols; ++c) p.grad[r * p.cols + c] += self.grad[c] * inv;
            }
        });
    }
    if (axis == 1) {
        if (cols == 0) throw ShapeError("mean: no columns");
        std::vector<double> out(rows, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) out[r] += a.at(r, c);
            out[r] /= static_cast<double>(cols);
        }
        return make_node(rows, 1, std::move(out), OpKind::Mean, {a}, [](Node& self) {
            Node& p = *self.parents[0];
            const double inv = 1.0 / static_cast<double>(p.cols);
            for (std::size_t r = 0; r < p.rows; ++r) {
                for (std::size_t c = 0; c < p.cols; ++c) p.grad[r * p.cols + c] += self.grad[r] * inv;
            }
        });
    }
    throw ShapeError("mean: axis must be 0 or 1");
}

Tensor sum(const Tensor& a) {
    check_defined("sum", a);
    double s = 0.0;
    for (double v : a.data()) s += v;
    return make_node(1, 1, {s}, OpKind::Sum, {a}, [](Node& self) {
        Node& p = *self.parents[0];
        for (double& g : p.grad) g += self.grad[0];
    });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw ShapeError("concat: no operands");
    for (const auto& p : parts) check_defined("concat", p);
    if (axis == 1) {
        const std::size_t rows = parts[0].rows();
        std::size_t cols = 0;
        for (const auto& p : parts) {
            if (p.rows() != rows) shape_fail("concat", parts[0], p);
            cols += p.cols();
        }
        std::vector<double> out(rows * cols);
        std::size_t off = 0;
        for (const auto& p : parts) {
            for (std::size_t r = 0; r < rows; ++r) {
                std::copy_n(p.data().data() + r * p.cols(), p.cols(), out.data() + r * cols + off);
            }
            off += p.cols();
        }
        return make_node_vec(rows, cols, std::move(out), OpKind::Concat, parts, [](Node& self) {
            std::size_t off = 0;
            for (auto& pp : self.parents) {
                Node& p = *pp;
                if (p.requires_grad) {
                    for (std::size_t r = 0; r < self.rows; ++r) {
                        for (std::size_t c = 0; c < p.cols; ++c) {
                            p.grad[r * p.cols + c] += self.grad[r * self.cols + off + c];
                        }
                    }
                }
                off += p.cols;
            }
        });
    }
    if (axis == 0) {
        const std::size_t cols = parts[0].cols();
        std::size_t rows = 0;
        for (const auto& p : parts) {
            if (p.cols() != cols) shape_fail("concat", parts[0], p);
            rows += p.rows();
        }
        std::vector<double> out;
        out.reserve(rows * cols);
        for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
        return make_node_vec(rows, cols, std::move(out), OpKind::Concat, parts, [](Node& self) {
            std::size_t off = 0;
            for (auto& pp : self.parents) {
                Node& p = *pp;
                if (p.requires_grad) {
                    for (std::size_t i = 0; i < p.data.size(); ++i) p.grad[i] += self.grad[off + i];
                }
                off += p.data.size();
            }
        });
    }
    throw ShapeError("concat: axis must be 0 or 1");
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count) {
    check_defined("slice_cols", a);
    if (start + count > a.cols()) {
        throw ShapeError("slice_cols: [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") out of range for " + a.shape_str());
    }
    const std::size_t rows = a.rows();
    std::vector<double> out(rows * count);
    for (std::size_t r = 0; r < rows; ++r) {
        std::copy_n(a.data().data() + r * a.cols() + start, count, out.data() + r * count);
    }
    return make_node(rows, count, std::move(out), OpKind::SliceCols, {a}, [start](Node& self) {
        Node& p = *self.parents[0];
        for (std::size_t r = 0; r < self.rows; ++r) {
            for (std::size_t c = 0; c < self.cols; ++c) {
                p.grad[r * p.cols + start + c] += self.grad[r * self.cols + c];
            }
        }
    });
}

Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count) {
    check_defined("slice_rows", a);
    if (start + count > a.rows()) {
        throw ShapeError("slice_rows: [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") out of range for " + a.shape_str());
    }
    const std::size_t cols = a.cols();
    std::vector<double> out(a.data().begin() + start * cols,
                            a.data().begin() + (start + count) * cols);
    return make_node(count, cols, std::move(out), OpKind::SliceRows, {a}, [start](Node& self) {
        Node& p = *self.parents[0];
        const std::size_t off = start * self.cols;
        for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[off + i] += self.grad[i];
    });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    return unary_elementwise(
        "clamp", OpKind::Clamp, a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
        [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Tensor dropout(const Tensor& a, double rate, Rng& rng) {
    check_defined("dropout", a);
    if (rate < 0.0 || rate >= 1.0) throw ConfigError("dropout: rate must be in [0, 1)");
    if (rate == 0.0) return a;
    const double keep_scale = 1.0 / (1.0 - rate);
    auto mask = std::make_shared<std::vector<double>>(a.size());
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        (*mask)[i] = rng.uniform() < rate ? 0.0 : keep_scale;
        out[i] = a.data()[i] * (*mask)[i];
    }
    return make_node(a.rows(), a.cols(), std::move(out), OpKind::Dropout, {a}, [mask](Node& self) {
        Node& p = *self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i] * (*mask)[i];
    });
}

Tensor binary_cross_entropy(const Tensor& probs, std::span<const int> labels) {
    check_defined("binary_cross_entropy", probs);
    const std::size_t n = labels.size();
    if (n == 0) throw NumericError("binary_cross_entropy: empty batch");
    if (probs.cols() != 1 || probs.rows() != n) {
        throw ShapeError("binary_cross_entropy: probabilities " + probs.shape_str() + " for " +
                         std::to_string(n) + " labels");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (labels[i] != 0 && labels[i] != 1) throw DataError("binary_cross_entropy: label not in {0,1}");
        const double p = std::clamp(probs.data()[i], kProbClamp, 1.0 - kProbClamp);
        total += labels[i] == 1 ? std::log(p) : std::log(1.0 - p);
    }
    std::vector<int> saved(labels.begin(), labels.end());
    return make_node(1, 1, {-total / static_cast<double>(n)}, OpKind::BinaryCrossEntropy, {probs},
                     [saved = std::move(saved)](Node& self) {
                         Node& p = *self.parents[0];
                         const double inv_n = 1.0 / static_cast<double>(saved.size());
                         for (std::size_t i = 0; i < saved.size(); ++i) {
                             const double x = p.data[i];
                             if (x < kProbClamp || x > 1.0 - kProbClamp) continue;
                             const double d = saved[i] == 1 ? -1.0 / x : 1.0 / (1.0 - x);
                             p.grad[i] += self.grad[0] * d * inv_n;
                         }
                     });
}

Tensor straight_through_onehot(const Tensor& soft) {
    check_defined("straight_through_onehot", soft);
    const std::size_t rows = soft.rows();
    const std::size_t cols = soft.cols();
    std::vector<double> out(soft.size(), 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = soft.data().data() + r * cols;
        const auto best = static_cast<std::size_t>(std::max_element(row, row + cols) - row);
        out[r * cols + best] = 1.0;
    }
    return make_node(rows, cols, std::move(out), OpKind::StraightThrough, {soft}, [](Node& self) {
        Node& p = *self.parents[0];
        for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
    });
}

}  // namespace fraudfuse::nc
