#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sfp/rng.hpp"

// Minimal layers with hand-written reverse mode. Each layer caches what its
// backward pass needs from the most recent forward call; backward
// accumulates into Param::grad and returns the gradient w.r.t. its input.
namespace sfp::nn {

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> dims);

  std::size_t size() const { return data.size(); }
  // Throws NonFiniteValue naming `what` if any entry is NaN or infinite.
  void check_finite(const std::string& what) const;
};

std::size_t shape_size(std::span<const std::size_t> shape);

struct Param {
  std::string name;
  Tensor value;
  std::vector<double> grad;

  Param() = default;
  Param(std::string param_name, std::vector<std::size_t> shape);

  void zero_grad();
};

void check_finite(std::span<const double> values, const std::string& what);

// Orthogonal rows (or columns, whichever is the shorter side) scaled by gain.
void orthogonal_init(std::span<double> weights, std::size_t rows, std::size_t cols, double gain,
                     Rng& rng);

class Dense {
 public:
  Dense() = default;
  Dense(std::size_t in, std::size_t out, const std::string& name);

  std::vector<double> forward(std::span<const double> input);
  std::vector<double> backward(std::span<const double> grad_out);

  void init(Rng& rng, double gain);
  void collect(std::vector<Param*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }

  std::size_t in_features() const { return in_; }
  std::size_t out_features() const { return out_; }

  Param weight;  // [out, in]
  Param bias;    // [out]

 private:
  std::size_t in_ = 0;
  std::size_t out_ = 0;
  std::vector<double> input_;
  bool primed_ = false;
};

// 3x3 convolution, stride 1, zero padding 1, so the spatial shape is kept.
// Activations are laid out channel-major: [channel][row][col].
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t height,
         std::size_t width, const std::string& name);

  std::vector<double> forward(std::span<const double> input);
  std::vector<double> backward(std::span<const double> grad_out);

  void init(Rng& rng, double gain);
  void collect(std::vector<Param*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }

  std::size_t output_size() const { return out_ch_ * height_ * width_; }

  Param weight;  // [out, in, 3, 3]
  Param bias;    // [out]

 private:
  std::size_t in_ch_ = 0;
  std::size_t out_ch_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> input_;
  bool primed_ = false;
};

enum class Activation { kTanh, kRelu };

class ActivationLayer {
 public:
  ActivationLayer() = default;
  explicit ActivationLayer(Activation kind) : kind_(kind) {}

  std::vector<double> forward(std::span<const double> input);
  std::vector<double> backward(std::span<const double> grad_out);

 private:
  Activation kind_ = Activation::kTanh;
  std::vector<double> output_;
  bool primed_ = false;
};

}  // namespace sfp::nn
