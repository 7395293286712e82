#include "sfp/nn.hpp"

#include <cmath>
#include <numeric>

#include "sfp/errors.hpp"

namespace sfp::nn {

std::size_t shape_size(std::span<const std::size_t> shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(std::vector<std::size_t> dims)
    : shape(std::move(dims)), data(shape_size(shape), 0.0) {}

void check_finite(std::span<const double> values, const std::string& what) {
  for (double v : values) {
    if (!std::isfinite(v)) throw NonFiniteValue("non-finite value in " + what);
  }
}

void Tensor::check_finite(const std::string& what) const { nn::check_finite(data, what); }

Param::Param(std::string param_name, std::vector<std::size_t> shape)
    : name(std::move(param_name)), value(std::move(shape)), grad(value.size(), 0.0) {}

void Param::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

void orthogonal_init(std::span<double> weights, std::size_t rows, std::size_t cols, double gain,
                     Rng& rng) {
  // Gram-Schmidt over the shorter side of a Gaussian matrix.
  const bool by_rows = rows <= cols;
  const std::size_t count = by_rows ? rows : cols;
  const std::size_t length = by_rows ? cols : rows;
  std::vector<std::vector<double>> basis;
  basis.reserve(count);
  while (basis.size() < count) {
    std::vector<double> v(length);
    for (double& e : v) e = rng.normal();
    for (const auto& u : basis) {
      const double dot = std::inner_product(v.begin(), v.end(), u.begin(), 0.0);
      for (std::size_t k = 0; k < length; ++k) v[k] -= dot * u[k];
    }
    const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    if (norm < 1e-8) continue;
    for (double& e : v) e /= norm;
    basis.push_back(std::move(v));
  }
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      weights[r * cols + c] = gain * (by_rows ? basis[r][c] : basis[c][r]);
    }
  }
}

Dense::Dense(std::size_t in, std::size_t out, const std::string& name)
    : weight(name + ".weight", {out, in}), bias(name + ".bias", {out}), in_(in), out_(out) {}

void Dense::init(Rng& rng, double gain) {
  orthogonal_init(weight.value.data, out_, in_, gain, rng);
  std::fill(bias.value.data.begin(), bias.value.data.end(), 0.0);
}

std::vector<double> Dense::forward(std::span<const double> input) {
  if (input.size() != in_) {
    throw ShapeMismatch(weight.name + ": input has " + std::to_string(input.size()) +
                        " features, expected " + std::to_string(in_));
  }
  input_.assign(input.begin(), input.end());
  primed_ = true;
  std::vector<double> out(bias.value.data);
  const double* w = weight.value.data.data();
  for (std::size_t o = 0; o < out_; ++o) {
    const double* row = w + o * in_;
    double acc = 0.0;
    for (std::size_t i = 0; i < in_; ++i) acc += row[i] * input[i];
    out[o] += acc;
  }
  return out;
}

std::vector<double> Dense::backward(std::span<const double> grad_out) {
  if (!primed_) throw StateError(weight.name + ": backward without a recorded forward pass");
  if (grad_out.size() != out_) throw ShapeMismatch(weight.name + ": bad upstream gradient size");
  std::vector<double> grad_in(in_, 0.0);
  const double* w = weight.value.data.data();
  double* gw = weight.grad.data();
  for (std::size_t o = 0; o < out_; ++o) {
    const double g = grad_out[o];
    bias.grad[o] += g;
    if (g == 0.0) continue;
    const double* row = w + o * in_;
    double* grow = gw + o * in_;
    for (std::size_t i = 0; i < in_; ++i) {
      grow[i] += g * input_[i];
      grad_in[i] += g * row[i];
    }
  }
  primed_ = false;
  return grad_in;
}

Conv2d::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t height,
               std::size_t width, const std::string& name)
    : weight(name + ".weight", {out_channels, in_channels, 3, 3}),
      bias(name + ".bias", {out_channels}),
      in_ch_(in_channels),
      out_ch_(out_channels),
      height_(height),
      width_(width) {}

void Conv2d::init(Rng& rng, double gain) {
  orthogonal_init(weight.value.data, out_ch_, in_ch_ * 9, gain, rng);
  std::fill(bias.value.data.begin(), bias.value.data.end(), 0.0);
}

std::vector<double> Conv2d::forward(std::span<const double> input) {
  const std::size_t plane = height_ * width_;
  if (input.size() != in_ch_ * plane) throw ShapeMismatch(weight.name + ": bad input size");
  input_.assign(input.begin(), input.end());
  primed_ = true;
  std::vector<double> out(out_ch_ * plane);
  const auto h = static_cast<std::ptrdiff_t>(height_);
  const auto w = static_cast<std::ptrdiff_t>(width_);
  for (std::size_t oc = 0; oc < out_ch_; ++oc) {
    double* dst = out.data() + oc * plane;
    std::fill(dst, dst + plane, bias.value.data[oc]);
    for (std::size_t ic = 0; ic < in_ch_; ++ic) {
      const double* src = input.data() + ic * plane;
      const double* k = weight.value.data.data() + (oc * in_ch_ + ic) * 9;
      for (std::ptrdiff_t r = 0; r < h; ++r) {
        for (std::ptrdiff_t c = 0; c < w; ++c) {
          double acc = 0.0;
          for (std::ptrdiff_t dr = -1; dr <= 1; ++dr) {
            const std::ptrdiff_t rr = r + dr;
            if (rr < 0 || rr >= h) continue;
            for (std::ptrdiff_t dc = -1; dc <= 1; ++dc) {
              const std::ptrdiff_t cc = c + dc;
              if (cc < 0 || cc >= w) continue;
              acc += k[(dr + 1) * 3 + (dc + 1)] * src[rr * w + cc];
            }
          }
          dst[r * w + c] += acc;
        }
      }
    }
  }
  return out;
}

std::vector<double> Conv2d::backward(std::span<const double> grad_out) {
  if (!primed_) throw StateError(weight.name + ": backward without a recorded forward pass");
  const std::size_t plane = height_ * width_;
  if (grad_out.size() != out_ch_ * plane) {
    throw ShapeMismatch(weight.name + ": bad upstream gradient size");
  }
  std::vector<double> grad_in(in_ch_ * plane, 0.0);
  const auto h = static_cast<std::ptrdiff_t>(height_);
  const auto w = static_cast<std::ptrdiff_t>(width_);
  for (std::size_t oc = 0; oc < out_ch_; ++oc) {
    const double* g = grad_out.data() + oc * plane;
    for (std::size_t p = 0; p < plane; ++p) bias.grad[oc] += g[p];
    for (std::size_t ic = 0; ic < in_ch_; ++ic) {
      const double* src = input_.data() + ic * plane;
      double* gsrc = grad_in.data() + ic * plane;
      const std::size_t kbase = (oc * in_ch_ + ic) * 9;
      const double* k = weight.value.data.data() + kbase;
      double* gk = weight.grad.data() + kbase;
      for (std::ptrdiff_t r = 0; r < h; ++r) {
        for (std::ptrdiff_t c = 0; c < w; ++c) {
          const double go = g[r * w + c];
          if (go == 0.0) continue;
          for (std::ptrdiff_t dr = -1; dr <= 1; ++dr) {
            const std::ptrdiff_t rr = r + dr;
            if (rr < 0 || rr >= h) continue;
            for (std::ptrdiff_t dc = -1; dc <= 1; ++dc) {
              const std::ptrdiff_t cc = c + dc;
              if (cc < 0 || cc >= w) continue;
              const std::ptrdiff_t ki = (dr + 1) * 3 + (dc + 1);
              gk[ki] += go * src[rr * w + cc];
              gsrc[rr * w + cc] += go * k[ki];
            }
          }
        }
      }
    }
  }
  primed_ = false;
  return grad_in;
}

std::vector<double> ActivationLayer::forward(std::span<const double> input) {
  output_.resize(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) {
    output_[i] = kind_ == Activation::kTanh ? std::tanh(input[i]) : std::max(0.0, input[i]);
  }
  primed_ = true;
  return output_;
}

std::vector<double> ActivationLayer::backward(std::span<const double> grad_out) {
  if (!primed_) throw StateError("activation: backward without a recorded forward pass");
  std::vector<double> grad_in(grad_out.size());
  for (std::size_t i = 0; i < grad_out.size(); ++i) {
    const double y = output_[i];
    grad_in[i] = kind_ == Activation::kTanh ? grad_out[i] * (1.0 - y * y)
                                            : (y > 0.0 ? grad_out[i] : 0.0);
  }
  primed_ = false;
  return grad_in;
}

}  // namespace sfp::nn
