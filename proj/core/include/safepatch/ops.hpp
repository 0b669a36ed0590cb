#pragma once

#include "safepatch/tape.hpp"
#include "safepatch/tensor.hpp"

namespace safepatch {
namespace ops {

// All ops run pure-forward when no tape is active. Binary elementwise ops
// require identical shapes; the only broadcast is tensor-scalar.

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor silu(const Tensor& a);

// a: [m,k], b: [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);

// x: [m,n] -> [n,m]
Tensor transpose(const Tensor& x);

// Row-wise softmax over the last axis of a 2-d tensor, max-subtracted.
Tensor softmax(const Tensor& x);

// Mean squared error -> scalar.
Tensor mse(const Tensor& a, const Tensor& b);

// Sum of all entries -> scalar.
Tensor sum(const Tensor& x);

// Cross-correlation. x: [C_in,H,W], kernel: [C_out,C_in,kh,kw],
// optional bias: [C_out]. Output [C_out,H',W'].
Tensor conv2d(const Tensor& x, const Tensor& kernel, const Tensor& bias,
              int stride, int padding);
Tensor conv2d(const Tensor& x, const Tensor& kernel, int stride, int padding);

// table: [rows,d], ids indexing rows -> [ids.size(),d]
Tensor gather_rows(const Tensor& table, const std::vector<int>& ids);

// Same data, new shape (numel must match).
Tensor reshape(const Tensor& x, const Shape& shape);

// a: [Ca,H,W], b: [Cb,H,W] -> [Ca+Cb,H,W]
Tensor concat_channels(const Tensor& a, const Tensor& b);

// Nearest-neighbour 2x upsample of [C,H,W].
Tensor upsample_nearest2(const Tensor& x);

// x: [C,H,W] + bias[C] broadcast over the spatial plane.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias);

} // namespace ops
} // namespace safepatch
