#pragma once

#include <cstddef>
#include <vector>

#include "idinit/matrix.hpp"

namespace idinit {

// 4-D convolution kernel (k_h x k_w x c_in x c_out). The flat layout equals
// the row-major layout of its matrix form: row = output channel, column =
// (row offset, col offset, input channel) with the input channel varying
// fastest. Reshape in either direction is therefore a plain copy and
// round-trips bitwise.
class ConvKernel {
 public:
  ConvKernel() = default;
  ConvKernel(std::size_t k_h, std::size_t k_w, std::size_t c_in, std::size_t c_out)
      : k_h_(k_h), k_w_(k_w), c_in_(c_in), c_out_(c_out),
        data_(k_h * k_w * c_in * c_out, 0.0) {}

  std::size_t k_h() const { return k_h_; }
  std::size_t k_w() const { return k_w_; }
  std::size_t c_in() const { return c_in_; }
  std::size_t c_out() const { return c_out_; }
  std::size_t size() const { return data_.size(); }

  double& at(std::size_t r, std::size_t c, std::size_t i, std::size_t o) {
    return data_[index(r, c, i, o)];
  }
  double at(std::size_t r, std::size_t c, std::size_t i, std::size_t o) const {
    return data_[index(r, c, i, o)];
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  // Matrix view: c_out rows, k_h*k_w*c_in columns.
  Matrix to_matrix() const { return Matrix(c_out_, k_h_ * k_w_ * c_in_, data_); }

  static ConvKernel from_matrix(const Matrix& m, std::size_t k_h, std::size_t k_w,
                                std::size_t c_in) {
    if (m.cols() != k_h * k_w * c_in)
      throw ShapeError("ConvKernel::from_matrix: column count != k_h*k_w*c_in");
    ConvKernel k(k_h, k_w, c_in, m.rows());
    k.data_ = m.data();
    return k;
  }

 private:
  std::size_t index(std::size_t r, std::size_t c, std::size_t i, std::size_t o) const {
    return (o * k_h_ * k_w_ + r * k_w_ + c) * c_in_ + i;
  }

  std::size_t k_h_ = 0, k_w_ = 0, c_in_ = 0, c_out_ = 0;
  std::vector<double> data_;
};

// Channel-major 3-D activation map (c x h x w).
struct Tensor3 {
  std::size_t c = 0, h = 0, w = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(std::size_t c_, std::size_t h_, std::size_t w_)
      : c(c_), h(h_), w(w_), data(c_ * h_ * w_, 0.0) {}

  double& at(std::size_t ch, std::size_t y, std::size_t x) {
    return data[(ch * h + y) * w + x];
  }
  double at(std::size_t ch, std::size_t y, std::size_t x) const {
    return data[(ch * h + y) * w + x];
  }
};

// Cross-correlation, stride 1, zero 'same' padding: output has the input's
// spatial size.
inline Tensor3 conv2d_forward(const ConvKernel& k, const Tensor3& in) {
  if (k.c_in() != in.c) throw ShapeError("conv2d_forward: channel mismatch");
  Tensor3 out(k.c_out(), in.h, in.w);
  const std::ptrdiff_t pad_h = static_cast<std::ptrdiff_t>((k.k_h() - 1) / 2);
  const std::ptrdiff_t pad_w = static_cast<std::ptrdiff_t>((k.k_w() - 1) / 2);
  for (std::size_t o = 0; o < k.c_out(); ++o) {
    for (std::size_t y = 0; y < in.h; ++y) {
      for (std::size_t x = 0; x < in.w; ++x) {
        double s = 0.0;
        for (std::size_t r = 0; r < k.k_h(); ++r) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + r) - pad_h;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(in.h)) continue;
          for (std::size_t c = 0; c < k.k_w(); ++c) {
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + c) - pad_w;
            if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(in.w)) continue;
            for (std::size_t i = 0; i < in.c; ++i)
              s += k.at(r, c, i, o) * in.at(i, static_cast<std::size_t>(sy),
                                            static_cast<std::size_t>(sx));
          }
        }
        out.at(o, y, x) = s;
      }
    }
  }
  return out;
}

}  // namespace idinit
