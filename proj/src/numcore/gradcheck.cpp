#include "fraudfuse/numcore/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fraudfuse/numcore/ops.hpp"
#include "fraudfuse/numcore/random.hpp"

namespace fraudfuse::nc {

bool GradCheckReport::passed() const {
    return std::all_of(entries.begin(), entries.end(), [](const auto& e) { return e.passed; });
}

const GradCheckEntry* GradCheckReport::worst() const {
    const GradCheckEntry* w = nullptr;
    for (const auto& e : entries) {
        if (!w || e.max_rel_error > w->max_rel_error) w = &e;
    }
    return w;
}

std::string GradCheckReport::summary() const {
    std::ostringstream os;
    os << (passed() ? "PASS" : "FAIL") << " (" << entries.size() << " entries, tol " << tolerance << ")";
    if (const auto* w = worst()) {
        os << "; worst: " << w->name << "[" << w->worst_index << "] rel_err=" << w->max_rel_error
           << " analytic=" << w->analytic << " numeric=" << w->numeric;
    }
    return os.str();
}

double relative_error(double analytic, double numeric, double floor) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

namespace {

std::vector<std::size_t> pick_coords(std::size_t size, std::size_t wanted, Rng& rng) {
    std::vector<std::size_t> idx(size);
    std::iota(idx.begin(), idx.end(), 0);
    if (size <= wanted) return idx;
    // Partial Fisher-Yates.
    for (std::size_t i = 0; i < wanted; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(size - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(wanted);
    std::sort(idx.begin(), idx.end());
    return idx;
}

// Analytic gradients come from `analytic_fn`; the finite differences are
// taken on `numeric_fn`. They are the same function except for the
// straight-through check, where the numeric side is the soft relaxation.
GradCheckReport check_pair(const std::function<Tensor()>& analytic_fn,
                           const std::function<Tensor()>& numeric_fn, std::vector<Parameter>& params,
                           const GradCheckOptions& options, const std::string& name_prefix) {
    GradCheckReport report;
    report.tolerance = options.tolerance;
    for (auto& p : params) p.tensor.zero_grad();
    backward(analytic_fn());

    Rng rng(options.seed, "grad-check");
    NoGradGuard no_grad;
    for (auto& p : params) {
        GradCheckEntry entry;
        entry.name = name_prefix.empty() ? p.name : name_prefix;
        const std::vector<double> analytic(p.tensor.grad().begin(), p.tensor.grad().end());
        auto values = p.tensor.mutable_data();
        for (std::size_t i : pick_coords(values.size(), options.coords_per_param, rng)) {
            const double saved = values[i];
            values[i] = saved + options.step;
            const double up = numeric_fn().item();
            values[i] = saved - options.step;
            const double down = numeric_fn().item();
            values[i] = saved;
            const double numeric = (up - down) / (2.0 * options.step);
            const double err = relative_error(analytic[i], numeric, options.rel_floor);
            if (entry.coords_checked == 0 || err > entry.max_rel_error) {
                entry.max_rel_error = err;
                entry.worst_index = i;
                entry.analytic = analytic[i];
                entry.numeric = numeric;
            }
            ++entry.coords_checked;
        }
        entry.passed = entry.max_rel_error <= options.tolerance;
        report.entries.push_back(entry);
    }
    return report;
}

Tensor random_tensor(std::size_t rows, std::size_t cols, Rng& rng, bool requires_grad,
                     double min_abs = 0.0) {
    Tensor t = Tensor::zeros(rows, cols, requires_grad);
    for (double& v : t.mutable_data()) {
        const double mag = min_abs + (1.0 - min_abs) * rng.uniform();
        v = rng.uniform() < 0.5 ? -mag : mag;
    }
    return t;
}

// Weighted sum against a fixed random projection, so every output entry gets
// a distinct upstream gradient.
Tensor project(const Tensor& out, std::uint64_t seed) {
    Rng rng(seed, "grad-check-projection");
    return sum(mul(out, random_tensor(out.rows(), out.cols(), rng, false)));
}

struct OpCase {
    OpKind kind;
    std::vector<Parameter> params;
    std::function<Tensor(std::vector<Parameter>&)> fn;
    std::function<Tensor(std::vector<Parameter>&)> numeric_fn;
};

std::vector<OpCase> build_op_cases(std::uint64_t seed) {
    Rng rng(seed, "grad-check-ops");
    auto P = [&](const char* name, std::size_t r, std::size_t c, double min_abs = 0.0) {
        return Parameter{name, random_tensor(r, c, rng, true, min_abs)};
    };
    std::vector<OpCase> cases;
    auto unary = [&](OpKind kind, std::size_t r, std::size_t c, double min_abs,
                     std::function<Tensor(const Tensor&)> op) {
        cases.push_back({kind, {P("x", r, c, min_abs)},
                         [op](std::vector<Parameter>& ps) { return project(op(ps[0].tensor), 11); },
                         {}});
    };
    auto binary = [&](OpKind kind, std::size_t r1, std::size_t c1, std::size_t r2, std::size_t c2,
                      std::function<Tensor(const Tensor&, const Tensor&)> op) {
        cases.push_back({kind, {P("a", r1, c1), P("b", r2, c2)},
                         [op](std::vector<Parameter>& ps) {
                             return project(op(ps[0].tensor, ps[1].tensor), 12);
                         },
                         {}});
    };

    binary(OpKind::MatMul, 3, 4, 4, 2, [](const Tensor& a, const Tensor& b) { return matmul(a, b); });
    binary(OpKind::MatMulNT, 3, 4, 2, 4,
           [](const Tensor& a, const Tensor& b) { return matmul_nt(a, b); });
    unary(OpKind::Transpose, 3, 2, 0.0, [](const Tensor& x) { return transpose(x); });
    binary(OpKind::Add, 3, 4, 1, 4, [](const Tensor& a, const Tensor& b) { return add(a, b); });
    binary(OpKind::Sub, 3, 4, 3, 1, [](const Tensor& a, const Tensor& b) { return sub(a, b); });
    binary(OpKind::Mul, 3, 4, 1, 1, [](const Tensor& a, const Tensor& b) { return mul(a, b); });
    unary(OpKind::Scale, 2, 3, 0.0, [](const Tensor& x) { return scale(x, -1.7); });
    // Keep inputs away from the kink at 0 so central differences are smooth.
    unary(OpKind::Relu, 3, 4, 0.1, [](const Tensor& x) { return relu(x); });
    unary(OpKind::Gelu, 3, 4, 0.0, [](const Tensor& x) { return gelu(x); });
    unary(OpKind::Softmax, 3, 4, 0.0, [](const Tensor& x) {
        return concat({softmax(x, 1), softmax(x, 0)}, 0);
    });
    unary(OpKind::MaskedSoftmax, 3, 5, 0.0, [](const Tensor& x) {
        return masked_softmax(x, {true, false, true, true, false});
    });
    cases.push_back({OpKind::LayerNorm,
                     {P("x", 3, 5), P("gain", 1, 5), P("bias", 1, 5)},
                     [](std::vector<Parameter>& ps) {
                         return project(layer_norm(ps[0].tensor, ps[1].tensor, ps[2].tensor, 1e-5), 13);
                     },
                     {}});
    unary(OpKind::Gather, 4, 3, 0.0, [](const Tensor& x) {
        const std::vector<std::size_t> ids{2, 0, 2, 3};
        return embedding_lookup(x, ids);
    });
    unary(OpKind::Mean, 3, 4, 0.0,
          [](const Tensor& x) { return concat({mean(x, 0), transpose(mean(x, 1))}, 1); });
    unary(OpKind::Sum, 3, 4, 0.0, [](const Tensor& x) { return sum(x); });
    binary(OpKind::Concat, 2, 3, 2, 2, [](const Tensor& a, const Tensor& b) {
        return concat({concat({a, b}, 1), concat({b, a}, 1)}, 0);
    });
    unary(OpKind::SliceCols, 3, 5, 0.0, [](const Tensor& x) { return slice_cols(x, 1, 3); });
    unary(OpKind::SliceRows, 4, 3, 0.0, [](const Tensor& x) { return slice_rows(x, 1, 2); });
    // Values kept inside (-0.5, 0.5) so clamp at +-0.9 is the identity locally,
    // and a shifted copy lands outside to exercise the zero-gradient branch.
    unary(OpKind::Clamp, 3, 4, 0.0, [](const Tensor& x) {
        return concat({clamp(scale(x, 0.5), -0.9, 0.9), clamp(add(x, Tensor::scalar(3.0)), -0.9, 0.9)}, 1);
    });
    unary(OpKind::Dropout, 3, 4, 0.0, [](const Tensor& x) {
        Rng r(5, "grad-check-dropout");
        return dropout(x, 0.3, r);
    });
    cases.push_back({OpKind::BinaryCrossEntropy,
                     {Parameter{"p", Tensor::from(4, 1, {0.2, 0.7, 0.45, 0.9}, true)}},
                     [](std::vector<Parameter>& ps) {
                         const std::vector<int> y{1, 0, 1, 1};
                         return binary_cross_entropy(ps[0].tensor, y);
                     },
                     {}});
    // The straight-through forward is piecewise constant, so its gradient is
    // checked against finite differences of the soft path it stands in for.
    cases.push_back({OpKind::StraightThrough,
                     {P("x", 2, 3)},
                     [](std::vector<Parameter>& ps) {
                         return project(straight_through_onehot(softmax(ps[0].tensor, 1)), 14);
                     },
                     [](std::vector<Parameter>& ps) { return project(softmax(ps[0].tensor, 1), 14); }});
    return cases;
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor()>& loss_fn, std::vector<Parameter>& params,
                           const GradCheckOptions& options) {
    return check_pair(loss_fn, loss_fn, params, options, "");
}

GradCheckReport grad_check_ops(const GradCheckOptions& options) {
    GradCheckReport report;
    report.tolerance = options.tolerance;
    for (auto& c : build_op_cases(options.seed)) {
        auto& params = c.params;
        auto fn = [&] { return c.fn(params); };
        std::function<Tensor()> numeric = fn;
        if (c.numeric_fn) numeric = [&] { return c.numeric_fn(params); };
        auto sub = check_pair(fn, numeric, params, options, op_name(c.kind));
        // One entry per op: the worst over its parameters.
        GradCheckEntry merged = *sub.worst();
        merged.passed = sub.passed();
        merged.coords_checked = 0;
        for (const auto& e : sub.entries) merged.coords_checked += e.coords_checked;
        report.entries.push_back(merged);
    }
    return report;
}

}  // namespace fraudfuse::nc
