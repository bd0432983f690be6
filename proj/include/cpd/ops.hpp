#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cpd/tensor.hpp"

// Differentiable tensor operations. Each op records a backward rule on the
// active tape (see TapeScope) when any input requires a gradient.

namespace cpd {

/// Explicit per-side padding. Even kernels need asymmetric "same" padding.
struct Padding {
  std::size_t top = 0;
  std::size_t bottom = 0;
  std::size_t left = 0;
  std::size_t right = 0;

  static Padding uniform(std::size_t p) { return {p, p, p, p}; }
  /// Output keeps the input size for a stride-1 kernel of `size` taps.
  static Padding same(std::size_t size, std::size_t dilation = 1) {
    const std::size_t span = dilation * (size - 1);
    return {span / 2, span - span / 2, span / 2, span - span / 2};
  }
  bool operator==(const Padding&) const = default;
};

struct Conv2dParams {
  std::size_t stride = 1;
  Padding padding{};
  std::size_t dilation = 1;
};

/// Output spatial extent of a convolution along one axis; throws when it
/// would be empty.
std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t pad_lo,
                               std::size_t pad_hi, std::size_t stride, std::size_t dilation);

/// Cross-correlation with zero padding. `bias` may be undefined; when present
/// it holds one value per output channel.
template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias, const Conv2dParams& params);

/// Integer-factor bilinear resize with half-pixel source mapping:
/// src = (dst + 0.5) / factor - 0.5, clamped to the input.
template <typename T>
BasicTensor<T> upsample_bilinear(const BasicTensor<T>& input, std::size_t factor);

enum class Elementwise { kAdd, kMul, kMax };

/// `b` may have a single channel, broadcast across the channels of `a`.
/// kMax routes gradient to the strictly larger operand and splits exact
/// ties 50/50.
template <typename T>
BasicTensor<T> elementwise(Elementwise kind, const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return elementwise(Elementwise::kAdd, a, b);
}
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return elementwise(Elementwise::kMul, a, b);
}
template <typename T>
BasicTensor<T> maximum(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return elementwise(Elementwise::kMax, a, b);
}

template <typename T>
BasicTensor<T> concat_channels(std::span<const BasicTensor<T>> parts);

template <typename T>
BasicTensor<T> concat_channels(const std::vector<BasicTensor<T>>& parts) {
  return concat_channels(std::span<const BasicTensor<T>>(parts));
}

enum class Activation { kRelu, kSigmoid };

template <typename T>
BasicTensor<T> activation(Activation kind, const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  return activation(Activation::kRelu, x);
}
template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
  return activation(Activation::kSigmoid, x);
}

/// Logistic function in the overflow-free split form.
template <typename T>
T stable_sigmoid(T x);

/// 2x2 max pooling with stride 2. Gradient goes to the first maximal entry
/// in row-major window order.
template <typename T>
BasicTensor<T> maxpool2(const BasicTensor<T>& x);

/// Edge-replicating pad.
template <typename T>
BasicTensor<T> pad_replicate(const BasicTensor<T>& x, const Padding& pad);

/// Sum of all elements as a (1,1,1,1) tensor.
template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, T factor);

}  // namespace cpd
