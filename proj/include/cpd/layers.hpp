#pragma once

#include <cstdint>
#include <random>

#include "cpd/ops.hpp"
#include "cpd/tensor.hpp"

namespace cpd {

enum class InitScheme {
  kFanInScaledNormal,  ///< N(0, 2 / (in * kh * kw))
  kZeros,
};

template <typename T>
struct BasicConvLayer {
  BasicTensor<T> weight;  ///< (out, in, kh, kw)
  BasicTensor<T> bias;    ///< (1, out, 1, 1); undefined when the layer has none
  Conv2dParams params;

  BasicTensor<T> forward(const BasicTensor<T>& x) const { return conv2d(x, weight, bias, params); }

  std::size_t out_channels() const { return weight.shape().n; }
  std::size_t in_channels() const { return weight.shape().c; }

  template <typename U>
  BasicConvLayer<U> cast() const {
    return {weight.template cast<U>(), bias.defined() ? bias.template cast<U>() : BasicTensor<U>{},
            params};
  }
};

using ConvLayer = BasicConvLayer<float>;

/// Biases start at zero under every scheme.
ConvLayer init_conv(std::size_t out, std::size_t in, std::size_t kh, std::size_t kw,
                    InitScheme scheme, std::mt19937_64& rng, Conv2dParams params = {},
                    bool with_bias = true);

ConvLayer init_conv(std::size_t out, std::size_t in, std::size_t kh, std::size_t kw,
                    InitScheme scheme, std::uint64_t seed, Conv2dParams params = {},
                    bool with_bias = true);

/// Learnable blur with a fixed zero bias. Borders are edge-replicated so a
/// constant map stays constant under a normalized kernel.
template <typename T>
struct BasicGaussianBlurLayer {
  BasicTensor<T> kernel;  ///< (1, 1, size, size)
  std::size_t size = 0;
  double sigma = 0.0;     ///< initialization record only

  BasicTensor<T> forward(const BasicTensor<T>& map) const;

  template <typename U>
  BasicGaussianBlurLayer<U> cast() const {
    return {kernel.template cast<U>(), size, sigma};
  }
};

using GaussianBlurLayer = BasicGaussianBlurLayer<float>;

/// kernel[y,x] ∝ exp(-((y-c)^2 + (x-c)^2) / (2 sigma^2)), c = (size-1)/2,
/// normalized to unit sum.
GaussianBlurLayer init_gaussian_kernel(std::size_t size, double sigma);

/// Kernel size for a given network input side: round(side / 11), bumped to
/// the next even number, at least 2. 352 -> 32, 64 -> 6.
std::size_t blur_kernel_size_for(std::size_t input_side);
/// size / 8, which gives 4 at size 32.
double blur_sigma_for(std::size_t size);

/// Per-sample (x - min) / (max - min) over a single-channel map. A range
/// below 1e-12 yields zeros. min and max are treated as constants when
/// differentiating unless `rule` is kExact.
enum class MinMaxGradient { kConstantExtrema, kExact };

template <typename T>
BasicTensor<T> minmax_normalize(const BasicTensor<T>& map,
                                MinMaxGradient rule = MinMaxGradient::kConstantExtrema);

}  // namespace cpd
