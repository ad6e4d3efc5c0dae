#pragma once

#include <span>

#include "cubedn/common.hpp"

// Differentiable building blocks of the detector. A Volume is a
// (channels, x, y, z) tensor.
namespace cubedn::model::layers {

using Volume = Tensor<double>;

// 3D convolution with cubic kernel, zero padding kernel/2 and equal stride on
// all spatial axes. Weights are laid out (out, in, k, k, k).
struct Conv3d {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;

  std::size_t pad() const { return kernel / 2; }
  std::size_t fan_in() const { return in_channels * kernel * kernel * kernel; }
  Shape weight_shape() const { return {out_channels, in_channels, kernel, kernel, kernel}; }
  Shape bias_shape() const { return {out_channels}; }
  std::size_t output_extent(std::size_t n) const { return (n + 2 * pad() - kernel) / stride + 1; }
  Shape output_shape(const Shape& input) const;

  Volume forward(const Volume& x, std::span<const double> w, std::span<const double> b) const;

  // Accumulates into dw and db. Returns dL/dx, or an empty volume when
  // need_input_grad is false.
  Volume backward(const Volume& x, const Volume& dy, std::span<const double> w,
                  std::span<double> dw, std::span<double> db, bool need_input_grad = true) const;
};

void relu_inplace(Volume& x);
// dy masked where the ReLU output y is not positive.
Volume relu_backward(const Volume& y, Volume dy);

// Nearest-neighbour x2 upsampling of every spatial axis.
Volume upsample2(const Volume& x);
Volume upsample2_backward(const Volume& dy);

void add_inplace(Volume& acc, const Volume& x);

void sigmoid_inplace(Tensor<double>& x);
Tensor<double> sigmoid_backward(const Tensor<double>& y, Tensor<double> dy);

// Mean over classes of the per-class mean squared error; for equal voxel
// counts per class this is the mean over all elements.
double mse(const Tensor<double>& pred, const Tensor<double>& target);
Tensor<double> mse_gradient(const Tensor<double>& pred, const Tensor<double>& target);

}  // namespace cubedn::model::layers
