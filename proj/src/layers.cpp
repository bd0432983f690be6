#include "cpd/layers.hpp"

#include <algorithm>
#include <cmath>

#include "cpd/autograd.hpp"

namespace cpd {

ConvLayer init_conv(std::size_t out, std::size_t in, std::size_t kh, std::size_t kw,
                    InitScheme scheme, std::mt19937_64& rng, Conv2dParams params, bool with_bias) {
  if (out == 0 || in == 0 || kh == 0 || kw == 0) {
    throw ShapeError("init_conv: dimensions must be positive");
  }
  ConvLayer layer;
  layer.weight = Tensor(Shape{out, in, kh, kw});
  layer.params = params;
  if (scheme == InitScheme::kFanInScaledNormal) {
    const double stddev = std::sqrt(2.0 / static_cast<double>(in * kh * kw));
    std::normal_distribution<double> dist(0.0, stddev);
    for (float& v : layer.weight.data()) v = static_cast<float>(dist(rng));
  }
  if (with_bias) layer.bias = Tensor(Shape{1, out, 1, 1});
  return layer;
}

ConvLayer init_conv(std::size_t out, std::size_t in, std::size_t kh, std::size_t kw,
                    InitScheme scheme, std::uint64_t seed, Conv2dParams params, bool with_bias) {
  std::mt19937_64 rng(seed);
  return init_conv(out, in, kh, kw, scheme, rng, params, with_bias);
}

template <typename T>
BasicTensor<T> BasicGaussianBlurLayer<T>::forward(const BasicTensor<T>& map) const {
  const BasicTensor<T> padded = pad_replicate(map, Padding::same(size));
  return conv2d(padded, kernel, BasicTensor<T>{}, {});
}

GaussianBlurLayer init_gaussian_kernel(std::size_t size, double sigma) {
  if (size < 2) throw ShapeError("init_gaussian_kernel: size must be >= 2");
  if (!(sigma > 0.0)) throw std::invalid_argument("init_gaussian_kernel: sigma must be > 0");
  const double c = (static_cast<double>(size) - 1.0) / 2.0;
  std::vector<double> k(size * size);
  double total = 0.0;
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double dy = static_cast<double>(y) - c;
      const double dx = static_cast<double>(x) - c;
      k[y * size + x] = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
      total += k[y * size + x];
    }
  }
  GaussianBlurLayer layer;
  layer.size = size;
  layer.sigma = sigma;
  layer.kernel = Tensor(Shape{1, 1, size, size});
  for (std::size_t i = 0; i < k.size(); ++i) layer.kernel.data()[i] = static_cast<float>(k[i] / total);
  return layer;
}

std::size_t blur_kernel_size_for(std::size_t input_side) {
  auto size = static_cast<std::size_t>(std::lround(static_cast<double>(input_side) / 11.0));
  if (size % 2 == 1) ++size;
  return std::max<std::size_t>(size, 2);
}

double blur_sigma_for(std::size_t size) { return static_cast<double>(size) / 8.0; }

template <typename T>
BasicTensor<T> minmax_normalize(const BasicTensor<T>& map, MinMaxGradient rule) {
  const Shape& s = map.shape();
  if (s.c != 1) throw ShapeError("minmax_normalize: expects one channel, got " + s.str());
  const std::size_t plane = s.plane();
  BasicTensor<T> out(s);
  std::vector<T> inv_range(s.n, T(0));
  std::vector<std::size_t> arg_lo(s.n, 0), arg_hi(s.n, 0);
  for (std::size_t n = 0; n < s.n; ++n) {
    const T* src = map.ptr() + n * plane;
    T* dst = out.ptr() + n * plane;
    const auto [lo, hi] = std::minmax_element(src, src + plane);
    arg_lo[n] = static_cast<std::size_t>(lo - src);
    arg_hi[n] = static_cast<std::size_t>(hi - src);
    const T range = *hi - *lo;
    if (!(static_cast<double>(range) >= 1e-12)) continue;  // degenerate: zeros
    inv_range[n] = T(1) / range;
    const T low = *lo;
    for (std::size_t i = 0; i < plane; ++i) dst[i] = std::min(T(1), (src[i] - low) / range);
  }
  record_op<T>({map}, out, [map, out, inv_range, arg_lo, arg_hi, plane, rule]() mutable {
    const T* gy = out.grad().data();
    const T* y = out.ptr();
    T* gx = map.grad().data();
    for (std::size_t n = 0; n < inv_range.size(); ++n) {
      const std::size_t base = n * plane;
      for (std::size_t i = 0; i < plane; ++i) gx[base + i] += gy[base + i] * inv_range[n];
      if (rule != MinMaxGradient::kExact || inv_range[n] == T(0)) continue;
      // dy/dmin = (y - 1)/range, dy/dmax = -y/range
      T g_lo = 0, g_hi = 0;
      for (std::size_t i = 0; i < plane; ++i) {
        g_lo += gy[base + i] * (y[base + i] - T(1));
        g_hi -= gy[base + i] * y[base + i];
      }
      gx[base + arg_lo[n]] += g_lo * inv_range[n];
      gx[base + arg_hi[n]] += g_hi * inv_range[n];
    }
  });
  return out;
}

template struct BasicGaussianBlurLayer<float>;
template struct BasicGaussianBlurLayer<double>;
template BasicTensor<float> minmax_normalize(const BasicTensor<float>&, MinMaxGradient);
template BasicTensor<double> minmax_normalize(const BasicTensor<double>&, MinMaxGradient);

}  // namespace cpd
