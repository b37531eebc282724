#pragma once

#include <cstdint>
#include <vector>

#include "ketlab/tensor.hpp"

namespace ketlab {

enum class ConvMode { causal, symmetric };

// Elementwise / shape plumbing. All of these record onto the active Graph
// when an input requires grad.
Tensor add(const Tensor &a, const Tensor &b);
Tensor sub(const Tensor &a, const Tensor &b);
Tensor mul(const Tensor &a, const Tensor &b);
Tensor scale(const Tensor &a, double c);
Tensor add_row_vector(const Tensor &x, const Tensor &bias);  // rows of x + bias[d]

Tensor matmul(const Tensor &a, const Tensor &b);
Tensor transpose(const Tensor &a);

Tensor slice_rows(const Tensor &a, std::int64_t r0, std::int64_t r1);
Tensor slice_cols(const Tensor &a, std::int64_t c0, std::int64_t c1);
Tensor concat_rows(const std::vector<Tensor> &parts);
Tensor concat_cols(const std::vector<Tensor> &parts);

// Row t of the output is row t-1 / t+1 of the input; the vacated row is zero.
Tensor shift_rows_down(const Tensor &a);
Tensor shift_rows_up(const Tensor &a);

// Softmax over the last axis, max-stabilized. Rejects non-finite input.
Tensor softmax(const Tensor &x);
// Softmax over the allowed subset of each row; masked-out entries are
// exactly 0. A fully masked row is rejected (empty neighborhood).
Tensor masked_softmax(const Tensor &x, const std::vector<std::uint8_t> &mask);

Tensor layer_norm(const Tensor &x, const Tensor &gain, const Tensor &bias, double eps = 1e-5);
Tensor gelu(const Tensor &x);

// Depthwise 1-D convolution over rows of u (S x d) with kernel (k x d).
// Causal mode left-pads with k-1 zeros; symmetric mode needs odd k and pads
// (k-1)/2 on each side. Channels never mix.
Tensor depthwise_conv1d(const Tensor &u, const Tensor &kernel, ConvMode mode);

Tensor embedding_lookup(const Tensor &table, const std::vector<int> &ids);

// Mean over rows of -log softmax(logits)[target]. Gradient is
// (softmax - onehot) / N.
Tensor cross_entropy(const Tensor &logits, const std::vector<int> &targets);
// Per-row negative log-likelihoods, no autodiff (evaluation path).
std::vector<double> nll_rows(const Tensor &logits, const std::vector<int> &targets);

// D[t][s] = |z_t - z_s|^2 for z of shape (S x m).
Tensor pairwise_sqdist(const Tensor &z);

Tensor sum(const Tensor &x);
Tensor mean_all(const Tensor &x);

// Forward identity; gradient into x through this node is exactly zero.
Tensor detach(const Tensor &x);

}  // namespace ketlab
