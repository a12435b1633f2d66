#pragma once

#include "cwc/codebook.hpp"
#include "cwc/tensor.hpp"

namespace cwc {

// Dense kernels. All of them are bit-deterministic: per output element the
// reduction order is fixed (ascending inner index), and parallel variants
// only ever partition whole output rows, so results are byte-identical for
// any thread count.

// c[i][j] = sum_t a[i][t]*b[t][j], FP32, strictly ascending t.
Tensor matmul(const Tensor& a, const Tensor& b);

// y = x * dequantize(w). Weights are resolved through the codebook one
// row-strip at a time; the accumulation runs through the same strip kernel
// as matmul, so the result is bit-identical to matmul(x, dequantize(w)).
Tensor clustered_matmul(const Tensor& x, const ClusteredTensor& w, const Codebook& cb);

// Row-wise softmax with max subtraction.
Tensor softmax_rows(const Tensor& x);

// Normalizes over the last axis with population variance:
// (x - mean)/sqrt(var + eps) * gamma + beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, float eps);

// tanh approximation: 0.5*x*(1 + tanh(sqrt(2/pi)*(x + 0.044715*x^3))).
Tensor gelu(const Tensor& x);

// Multi-head self attention over q,k,v of shape [s x d]; d % heads == 0.
// Composed from matmul and softmax_rows only.
Tensor mha_attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads);

// value[i] = centroids[indices[i]], original shape restored.
Tensor dequantize_tensor(const ClusteredTensor& t, const Codebook& cb);

namespace ref {

// Serial reference kernels. Same contracts as above; plain loops, no OpenMP,
// no strip buffering. Tests assert bit-identity against the parallel path
// and the benchmark measures the gap.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor clustered_matmul(const Tensor& x, const ClusteredTensor& w, const Codebook& cb);
Tensor softmax_rows(const Tensor& x);

}  // namespace ref

}  // namespace cwc
