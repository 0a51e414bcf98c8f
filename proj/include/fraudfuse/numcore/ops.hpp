#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fraudfuse/numcore/random.hpp"
#include "fraudfuse/numcore/tensor.hpp"

namespace fraudfuse::nc {

// Differentiable primitives. Every op checks shapes and throws ShapeError
// naming the op and both shapes on mismatch.

Tensor matmul(const Tensor& a, const Tensor& b);
// a * b^T without materializing the transpose.
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Elementwise with 2-D broadcasting: each dimension must match or be 1.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

Tensor relu(const Tensor& a);
// Exact (erf) form.
Tensor gelu(const Tensor& a);

// axis = 1 normalizes each row, axis = 0 each column.
Tensor softmax(const Tensor& a, int axis = 1);
// Row softmax where columns with key_valid[c] == false get probability
// exactly 0. At least one column must be valid.
Tensor masked_softmax(const Tensor& a, const std::vector<bool>& key_valid);

// Per-row normalization with learned gain/bias (both 1 x cols).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-12);

// Rows of `table` selected by `ids`; the gradient scatter-adds into the table.
Tensor embedding_lookup(const Tensor& table, std::span<const std::size_t> ids);

// axis = 0 averages over rows (1 x cols), axis = 1 over columns (rows x 1).
Tensor mean(const Tensor& a, int axis);
Tensor sum(const Tensor& a);
// axis = 1 joins side by side, axis = 0 stacks vertically.
Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count);
Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count);

// Gradient passes through where lo <= x <= hi and is zero outside.
Tensor clamp(const Tensor& a, double lo, double hi);

// Inverted dropout. rate = 0 returns the input unchanged.
Tensor dropout(const Tensor& a, double rate, Rng& rng);

// Mean binary cross-entropy  -(1/N) sum[y log p + (1-y) log(1-p)]  over an
// N x 1 column of probabilities, after clamping p to [eps, 1 - eps].
inline constexpr double kProbClamp = 1e-12;
Tensor binary_cross_entropy(const Tensor& probs, std::span<const int> labels);

// Forward: one-hot at the row-wise argmax (first index on ties).
// Backward: identity, so gradients flow to `soft` as if it were used directly.
Tensor straight_through_onehot(const Tensor& soft);

}  // namespace fraudfuse::nc
