#include "tumorseg/layers.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "tumorseg/errors.hpp"

namespace tumorseg {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;

void check_nhwc(const Tensor& x, int channels, const char* who) {
  if (x.rank() != 4 || x.dim(3) != channels) {
    throw ShapeMismatchError(std::string(who) + ": expected (B,h,w," +
                             std::to_string(channels) + "), got " + x.shape_str());
  }
}

// Gathers padded 3x3 (or kxk) patches of one sample into rows of `cols`:
// row (y*w + x) holds the (kh*kw*cin) receptive field in (ky, kx, c) order.
void im2col(const double* x, int h, int w, int c, int kh, int kw, double* cols) {
  const int ph = kh / 2;
  const int pw = kw / 2;
  const std::size_t row_len = static_cast<std::size_t>(kh) * kw * c;
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      double* row = cols + (static_cast<std::size_t>(y) * w + xx) * row_len;
      for (int ky = 0; ky < kh; ++ky) {
        const int sy = y + ky - ph;
        for (int kx = 0; kx < kw; ++kx) {
          const int sx = xx + kx - pw;
          double* dst = row + (static_cast<std::size_t>(ky) * kw + kx) * c;
          if (sy < 0 || sy >= h || sx < 0 || sx >= w) {
            std::memset(dst, 0, sizeof(double) * static_cast<std::size_t>(c));
          } else {
            std::memcpy(dst, x + (static_cast<std::size_t>(sy) * w + sx) * c,
                        sizeof(double) * static_cast<std::size_t>(c));
          }
        }
      }
    }
  }
}

// Scatter-adds patch-space gradients back onto the input grid.
void col2im(const double* cols, int h, int w, int c, int kh, int kw, double* grad) {
  const int ph = kh / 2;
  const int pw = kw / 2;
  const std::size_t row_len = static_cast<std::size_t>(kh) * kw * c;
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      const double* row = cols + (static_cast<std::size_t>(y) * w + xx) * row_len;
      for (int ky = 0; ky < kh; ++ky) {
        const int sy = y + ky - ph;
        if (sy < 0 || sy >= h) continue;
        for (int kx = 0; kx < kw; ++kx) {
          const int sx = xx + kx - pw;
          if (sx < 0 || sx >= w) continue;
          const double* src = row + (static_cast<std::size_t>(ky) * kw + kx) * c;
          double* dst = grad + (static_cast<std::size_t>(sy) * w + sx) * c;
          for (int ch = 0; ch < c; ++ch) dst[ch] += src[ch];
        }
      }
    }
  }
}

}  // namespace

Conv2d::Conv2d(int kh_, int kw_, int cin_, int cout_)
    : w(Tensor({kh_, kw_, cin_, cout_})),
      b(Tensor({cout_})),
      dw(Tensor({kh_, kw_, cin_, cout_})),
      db(Tensor({cout_})),
      kh(kh_),
      kw(kw_),
      cin(cin_),
      cout(cout_) {
  if (kh % 2 == 0 || kw % 2 == 0) {
    throw ConfigInvalidError("same-padded convolution needs odd kernel dims");
  }
}

void Conv2d::zero_grad() {
  dw.fill(0.0);
  db.fill(0.0);
}

Tensor Conv2d::forward(const Tensor& x) const {
  check_nhwc(x, cin, "conv2d");
  const int batch = x.dim(0), h = x.dim(1), ww = x.dim(2);
  const std::int64_t pixels = static_cast<std::int64_t>(h) * ww;
  const std::int64_t patch = static_cast<std::int64_t>(kh) * kw * cin;

  Tensor y({batch, h, ww, cout});
  std::vector<double> cols(static_cast<std::size_t>(pixels * patch));
  MapConstMat wmat(w.data(), patch, cout);
  for (int n = 0; n < batch; ++n) {
    im2col(x.data() + n * pixels * cin, h, ww, cin, kh, kw, cols.data());
    MapConstMat pmat(cols.data(), pixels, patch);
    MapMat ymat(y.data() + n * pixels * cout, pixels, cout);
    ymat.noalias() = pmat * wmat;
    ymat.rowwise() += MapConstMat(b.data(), 1, cout).row(0);
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& x, const Tensor& dy) {
  check_nhwc(x, cin, "conv2d backward");
  check_nhwc(dy, cout, "conv2d backward dy");
  const int batch = x.dim(0), h = x.dim(1), ww = x.dim(2);
  const std::int64_t pixels = static_cast<std::int64_t>(h) * ww;
  const std::int64_t patch = static_cast<std::int64_t>(kh) * kw * cin;

  Tensor dx(x.shape());
  std::vector<double> cols(static_cast<std::size_t>(pixels * patch));
  std::vector<double> dcols(static_cast<std::size_t>(pixels * patch));
  MapConstMat wmat(w.data(), patch, cout);
  MapMat dwmat(dw.data(), patch, cout);
  MapMat dbv(db.data(), 1, cout);
  for (int n = 0; n < batch; ++n) {
    im2col(x.data() + n * pixels * cin, h, ww, cin, kh, kw, cols.data());
    MapConstMat pmat(cols.data(), pixels, patch);
    MapConstMat dymat(dy.data() + n * pixels * cout, pixels, cout);
    dwmat.noalias() += pmat.transpose() * dymat;
    dbv.row(0) += dymat.colwise().sum();
    MapMat dpmat(dcols.data(), pixels, patch);
    dpmat.noalias() = dymat * wmat.transpose();
    col2im(dcols.data(), h, ww, cin, kh, kw, dx.data() + n * pixels * cin);
  }
  return dx;
}

TransposedConv2::TransposedConv2(int cin_, int cout_)
    : w(Tensor({2, 2, cin_, cout_})),
      b(Tensor({cout_})),
      dw(Tensor({2, 2, cin_, cout_})),
      db(Tensor({cout_})),
      cin(cin_),
      cout(cout_) {}

void TransposedConv2::zero_grad() {
  dw.fill(0.0);
  db.fill(0.0);
}

// With kernel 2 and stride 2 every output pixel receives exactly one
// contribution: out[2y+dy, 2x+dx, :] = x[y, x, :] . w[dy, dx, :, :] + b.
// That makes the op a per-pixel GEMM against w reshaped to (cin, 4*cout).
Tensor TransposedConv2::forward(const Tensor& x) const {
  check_nhwc(x, cin, "transposed conv");
  const int batch = x.dim(0), h = x.dim(1), ww = x.dim(2);
  const std::int64_t pixels = static_cast<std::int64_t>(h) * ww;

  Tensor w2({cin, 4 * cout});
  for (int dy = 0; dy < 2; ++dy)
    for (int dx = 0; dx < 2; ++dx)
      for (int ci = 0; ci < cin; ++ci)
        for (int co = 0; co < cout; ++co)
          w2(ci, (dy * 2 + dx) * cout + co) = w(dy, dx, ci, co);

  Tensor y({batch, 2 * h, 2 * ww, cout});
  RowMat m(pixels, 4 * cout);
  MapConstMat w2m(w2.data(), cin, 4 * cout);
  for (int n = 0; n < batch; ++n) {
    MapConstMat xm(x.data() + n * pixels * cin, pixels, cin);
    m.noalias() = xm * w2m;
    double* yb = y.data() + n * pixels * 4 * cout;
    for (int yy = 0; yy < h; ++yy) {
      for (int xx = 0; xx < ww; ++xx) {
        const double* src = m.data() + (static_cast<std::size_t>(yy) * ww + xx) * 4 * cout;
        for (int dy = 0; dy < 2; ++dy) {
          double* dst = yb + ((static_cast<std::size_t>(2 * yy + dy) * (2 * ww)) +
                              2 * xx) * cout;
          for (int dx = 0; dx < 2; ++dx) {
            const double* s = src + (dy * 2 + dx) * cout;
            for (int co = 0; co < cout; ++co) dst[dx * cout + co] = s[co] + b[co];
          }
        }
      }
    }
  }
  return y;
}

Tensor TransposedConv2::backward(const Tensor& x, const Tensor& dy) {
  check_nhwc(x, cin, "transposed conv backward");
  check_nhwc(dy, cout, "transposed conv backward dy");
  const int batch = x.dim(0), h = x.dim(1), ww = x.dim(2);
  const std::int64_t pixels = static_cast<std::int64_t>(h) * ww;

  Tensor w2({cin, 4 * cout});
  for (int dy_ = 0; dy_ < 2; ++dy_)
    for (int dx_ = 0; dx_ < 2; ++dx_)
      for (int ci = 0; ci < cin; ++ci)
        for (int co = 0; co < cout; ++co)
          w2(ci, (dy_ * 2 + dx_) * cout + co) = w(dy_, dx_, ci, co);

  Tensor dx(x.shape());
  RowMat dm(pixels, 4 * cout);
  RowMat dw2 = RowMat::Zero(cin, 4 * cout);
  MapConstMat w2m(w2.data(), cin, 4 * cout);
  MapMat dbv(db.data(), 1, cout);
  for (int n = 0; n < batch; ++n) {
    // Gather dy back into per-input-pixel rows.
    const double* dyb = dy.data() + n * pixels * 4 * cout;
    for (int yy = 0; yy < h; ++yy) {
      for (int xx = 0; xx < ww; ++xx) {
        double* dst = dm.data() + (static_cast<std::size_t>(yy) * ww + xx) * 4 * cout;
        for (int dy_ = 0; dy_ < 2; ++dy_) {
          const double* src = dyb + ((static_cast<std::size_t>(2 * yy + dy_) * (2 * ww)) +
                                     2 * xx) * cout;
          for (int dx_ = 0; dx_ < 2; ++dx_) {
            std::memcpy(dst + (dy_ * 2 + dx_) * cout, src + dx_ * cout,
                        sizeof(double) * static_cast<std::size_t>(cout));
          }
        }
      }
    }
    MapConstMat xm(x.data() + n * pixels * cin, pixels, cin);
    dw2.noalias() += xm.transpose() * dm;
    MapMat dxm(dx.data() + n * pixels * cin, pixels, cin);
    dxm.noalias() += dm * w2m.transpose();
    MapConstMat dym(dy.data() + n * pixels * 4 * cout, pixels * 4, cout);
    dbv.row(0) += dym.colwise().sum();
  }
  for (int dy_ = 0; dy_ < 2; ++dy_)
    for (int dx_ = 0; dx_ < 2; ++dx_)
      for (int ci = 0; ci < cin; ++ci)
        for (int co = 0; co < cout; ++co)
          dw(dy_, dx_, ci, co) += dw2(ci, (dy_ * 2 + dx_) * cout + co);
  return dx;
}

Tensor relu(const Tensor& x) {
  Tensor y(x.shape());
  for (std::int64_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& y, const Tensor& dy) {
  if (!y.same_shape(dy)) throw ShapeMismatchError("relu backward shape mismatch");
  Tensor dx(dy.shape());
  for (std::int64_t i = 0; i < dy.size(); ++i) dx[i] = y[i] > 0.0 ? dy[i] : 0.0;
  return dx;
}

Tensor maxpool2(const Tensor& x, std::vector<std::int64_t>& argmax) {
  if (x.rank() != 4 || x.dim(1) % 2 != 0 || x.dim(2) % 2 != 0) {
    throw ShapeMismatchError("maxpool2 needs even spatial dims, got " + x.shape_str());
  }
  const int batch = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const int oh = h / 2, ow = w / 2;
  Tensor y({batch, oh, ow, c});
  argmax.assign(static_cast<std::size_t>(y.size()), 0);
  for (int n = 0; n < batch; ++n) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        for (int ch = 0; ch < c; ++ch) {
          double best = -std::numeric_limits<double>::infinity();
          std::int64_t best_idx = 0;
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const std::int64_t idx =
                  ((static_cast<std::int64_t>(n) * h + (2 * oy + dy)) * w +
                   (2 * ox + dx)) * c + ch;
              if (x[idx] > best) {
                best = x[idx];
                best_idx = idx;
              }
            }
          }
          const std::int64_t out_idx =
              ((static_cast<std::int64_t>(n) * oh + oy) * ow + ox) * c + ch;
          y[out_idx] = best;
          argmax[static_cast<std::size_t>(out_idx)] = best_idx;
        }
      }
    }
  }
  return y;
}

Tensor maxpool2_backward(const Tensor& dy, const std::vector<std::int64_t>& argmax,
                         const std::vector<int>& input_shape) {
  Tensor dx(input_shape);
  for (std::int64_t i = 0; i < dy.size(); ++i) {
    dx[argmax[static_cast<std::size_t>(i)]] += dy[i];
  }
  return dx;
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.rank() != 4 || b.rank() != 4 || a.dim(0) != b.dim(0) || a.dim(1) != b.dim(1) ||
      a.dim(2) != b.dim(2)) {
    throw ShapeMismatchError("concat needs matching batch and spatial dims: " +
                             a.shape_str() + " vs " + b.shape_str());
  }
  const int ca = a.dim(3), cb = b.dim(3);
  Tensor out({a.dim(0), a.dim(1), a.dim(2), ca + cb});
  const std::int64_t pixels = out.size() / (ca + cb);
  for (std::int64_t p = 0; p < pixels; ++p) {
    std::memcpy(out.data() + p * (ca + cb), a.data() + p * ca,
                sizeof(double) * static_cast<std::size_t>(ca));
    std::memcpy(out.data() + p * (ca + cb) + ca, b.data() + p * cb,
                sizeof(double) * static_cast<std::size_t>(cb));
  }
  return out;
}

void split_channels_grad(const Tensor& d, int ca, Tensor& da, Tensor& db) {
  const int c = d.dim(3);
  const int cb = c - ca;
  da = Tensor({d.dim(0), d.dim(1), d.dim(2), ca});
  db = Tensor({d.dim(0), d.dim(1), d.dim(2), cb});
  const std::int64_t pixels = d.size() / c;
  for (std::int64_t p = 0; p < pixels; ++p) {
    std::memcpy(da.data() + p * ca, d.data() + p * c,
                sizeof(double) * static_cast<std::size_t>(ca));
    std::memcpy(db.data() + p * cb, d.data() + p * c + ca,
                sizeof(double) * static_cast<std::size_t>(cb));
  }
}

Tensor softmax_channels(const Tensor& logits) {
  if (logits.rank() < 1) throw ShapeMismatchError("softmax needs a class dimension");
  const int c = logits.dim(logits.rank() - 1);
  Tensor probs(logits.shape());
  const std::int64_t pixels = logits.size() / c;
  for (std::int64_t p = 0; p < pixels; ++p) {
    const double* in = logits.data() + p * c;
    double* out = probs.data() + p * c;
    double mx = in[0];
    for (int i = 1; i < c; ++i) mx = std::max(mx, in[i]);
    double sum = 0.0;
    for (int i = 0; i < c; ++i) {
      out[i] = std::exp(in[i] - mx);
      sum += out[i];
    }
    const double inv = 1.0 / sum;
    for (int i = 0; i < c; ++i) out[i] *= inv;
  }
  return probs;
}

}  // namespace tumorseg
