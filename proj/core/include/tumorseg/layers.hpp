#pragma once

#include <cstdint>
#include <vector>

#include "tumorseg/tensor.hpp"

namespace tumorseg {

// Layers operate on batched NHWC tensors (B, h, w, c). Each layer owns its
// parameters and gradient buffers; backward accumulates into dw/db and
// returns the gradient with respect to its input.

// Odd-kernel convolution with same padding, stride 1. Weight layout is
// (kh, kw, cin, cout), matching the im2col patch order.
class Conv2d {
 public:
  Conv2d(int kh, int kw, int cin, int cout);

  Tensor forward(const Tensor& x) const;
  Tensor backward(const Tensor& x, const Tensor& dy);
  void zero_grad();

  Tensor w, b;
  Tensor dw, db;
  int kh, kw, cin, cout;
};

// 2x2 transposed convolution with stride 2 (doubles spatial dims). Weight
// layout (2, 2, cin, cout).
class TransposedConv2 {
 public:
  TransposedConv2(int cin, int cout);

  Tensor forward(const Tensor& x) const;
  Tensor backward(const Tensor& x, const Tensor& dy);
  void zero_grad();

  Tensor w, b;
  Tensor dw, db;
  int cin, cout;
};

Tensor relu(const Tensor& x);
// dx from dy and the saved relu *output*.
Tensor relu_backward(const Tensor& y, const Tensor& dy);

// 2x2 max pooling with stride 2; argmax stores each output's flat input index
// for the backward scatter.
Tensor maxpool2(const Tensor& x, std::vector<std::int64_t>& argmax);
Tensor maxpool2_backward(const Tensor& dy, const std::vector<std::int64_t>& argmax,
                         const std::vector<int>& input_shape);

Tensor concat_channels(const Tensor& a, const Tensor& b);
void split_channels_grad(const Tensor& d, int ca, Tensor& da, Tensor& db);

// Numerically stable per-pixel softmax over the trailing dimension.
Tensor softmax_channels(const Tensor& logits);

}  // namespace tumorseg
