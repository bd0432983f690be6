#include "cpd/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cpd/autograd.hpp"
#include "cpd/kernels.hpp"

namespace cpd {

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t pad_lo,
                               std::size_t pad_hi, std::size_t stride, std::size_t dilation) {
  const std::size_t padded = in + pad_lo + pad_hi;
  const std::size_t reach = dilation * (kernel - 1) + 1;
  if (padded < reach) return 0;
  return (padded - reach) / stride + 1;
}

namespace {

struct ConvGeometry {
  std::size_t cin, h, w, kh, kw, hout, wout;
  Conv2dParams p;

  std::size_t depth() const { return cin * kh * kw; }
  std::size_t pixels() const { return hout * wout; }
  bool direct() const {
    return kh == 1 && kw == 1 && p.stride == 1 && p.padding == Padding{};
  }
};

/// Output columns [lo, hi) whose input column ox*stride + off is in range.
inline std::pair<std::size_t, std::size_t> valid_span(long off, std::size_t stride, std::size_t in,
                                                      std::size_t out) {
  const long s = static_cast<long>(stride);
  const long lo = off >= 0 ? 0 : (-off + s - 1) / s;
  const long last = static_cast<long>(in) - 1 - off;  // largest ox*stride allowed
  const long hi = last < 0 ? 0 : last / s + 1;
  const auto clamp = [out](long v) { return static_cast<std::size_t>(std::clamp<long>(v, 0, static_cast<long>(out))); };
  const std::size_t a = clamp(lo);
  return {a, std::max(a, clamp(hi))};
}

template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* col) {
  const std::size_t P = g.pixels();
  const std::size_t st = g.p.stride;
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    const T* plane = x + ci * g.h * g.w;
    for (std::size_t dy = 0; dy < g.kh; ++dy) {
      for (std::size_t dx = 0; dx < g.kw; ++dx) {
        T* row = col + ((ci * g.kh + dy) * g.kw + dx) * P;
        const long oy_off = static_cast<long>(dy * g.p.dilation) - static_cast<long>(g.p.padding.top);
        const long ox_off = static_cast<long>(dx * g.p.dilation) - static_cast<long>(g.p.padding.left);
        const auto [lo, hi] = valid_span(ox_off, st, g.w, g.wout);
        for (std::size_t oy = 0; oy < g.hout; ++oy) {
          const long iy = static_cast<long>(oy * st) + oy_off;
          T* dst = row + oy * g.wout;
          if (iy < 0 || iy >= static_cast<long>(g.h) || lo == hi) {
            std::fill(dst, dst + g.wout, T(0));
            continue;
          }
          const T* src = plane + static_cast<std::size_t>(iy) * g.w + ox_off;
          std::fill(dst, dst + lo, T(0));
          if (st == 1) {
            std::copy(src + lo, src + hi, dst + lo);
          } else {
            for (std::size_t ox = lo; ox < hi; ++ox) dst[ox] = src[ox * st];
          }
          std::fill(dst + hi, dst + g.wout, T(0));
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, const ConvGeometry& g, T* gx) {
  const std::size_t P = g.pixels();
  const std::size_t st = g.p.stride;
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    T* plane = gx + ci * g.h * g.w;
    for (std::size_t dy = 0; dy < g.kh; ++dy) {
      for (std::size_t dx = 0; dx < g.kw; ++dx) {
        const T* row = col + ((ci * g.kh + dy) * g.kw + dx) * P;
        const long oy_off = static_cast<long>(dy * g.p.dilation) - static_cast<long>(g.p.padding.top);
        const long ox_off = static_cast<long>(dx * g.p.dilation) - static_cast<long>(g.p.padding.left);
        const auto [lo, hi] = valid_span(ox_off, st, g.w, g.wout);
        if (lo == hi) continue;
        for (std::size_t oy = 0; oy < g.hout; ++oy) {
          const long iy = static_cast<long>(oy * st) + oy_off;
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          T* dst = plane + static_cast<std::size_t>(iy) * g.w + ox_off;
          const T* src = row + oy * g.wout;
          if (st == 1) {
            for (std::size_t ox = lo; ox < hi; ++ox) dst[ox] += src[ox];
          } else {
            for (std::size_t ox = lo; ox < hi; ++ox) dst[ox * st] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
void transpose(const T* src, std::size_t rows, std::size_t cols, T* dst) {
  constexpr std::size_t kBlock = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kBlock) {
    for (std::size_t c0 = 0; c0 < cols; c0 += kBlock) {
      const std::size_t r1 = std::min(rows, r0 + kBlock);
      const std::size_t c1 = std::min(cols, c0 + kBlock);
      for (std::size_t r = r0; r < r1; ++r)
        for (std::size_t c = c0; c < c1; ++c) dst[c * rows + r] = src[r * cols + c];
    }
  }
}

template <typename T>
void check_broadcast(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa == sb) return;
  if (sb.c == 1 && sa.n == sb.n && sa.h == sb.h && sa.w == sb.w) return;
  throw ShapeError(std::string(op) + ": incompatible shapes " + sa.str() + " and " + sb.str() +
                   " (need equal shapes or a single-channel second operand)");
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias, const Conv2dParams& params) {
  const Shape& xs = input.shape();
  const Shape& ws = weight.shape();
  if (params.stride < 1) throw ShapeError("conv2d: stride must be >= 1");
  if (params.dilation < 1) throw ShapeError("conv2d: dilation must be >= 1");
  if (xs.c != ws.c) {
    throw ShapeError("conv2d: input channels c=" + std::to_string(xs.c) +
                     " do not match weight k_in=" + std::to_string(ws.c));
  }
  if (bias.defined() && bias.numel() != ws.n) {
    throw ShapeError("conv2d: bias has " + std::to_string(bias.numel()) +
                     " entries but weight k_out=" + std::to_string(ws.n));
  }
  const Padding& pad = params.padding;
  ConvGeometry g{xs.c,
                 xs.h,
                 xs.w,
                 ws.h,
                 ws.w,
                 conv_output_extent(xs.h, ws.h, pad.top, pad.bottom, params.stride, params.dilation),
                 conv_output_extent(xs.w, ws.w, pad.left, pad.right, params.stride, params.dilation),
                 params};
  if (g.hout == 0 || g.wout == 0 || ws.n == 0 || xs.n == 0) {
    throw ShapeError("conv2d: zero-size output for input " + xs.str() + " and weight " + ws.str());
  }

  const std::size_t cout = ws.n;
  const std::size_t K = g.depth();
  const std::size_t P = g.pixels();
  BasicTensor<T> out(Shape{xs.n, cout, g.hout, g.wout});
  std::vector<T> col(g.direct() ? 0 : K * P);
  const T* wp = weight.ptr();
  for (std::size_t n = 0; n < xs.n; ++n) {
    const T* xn = input.ptr() + n * xs.c * xs.h * xs.w;
    T* on = out.ptr() + n * cout * P;
    if (bias.defined()) {
      for (std::size_t o = 0; o < cout; ++o) std::fill(on + o * P, on + (o + 1) * P, bias.ptr()[o]);
    }
    const T* cp = xn;
    if (!g.direct()) {
      im2col(xn, g, col.data());
      cp = col.data();
    }
    kernels::gemm<T>(cout, P, K, wp, K, cp, P, on, P);
  }

  record_op<T>({input, weight, bias}, out, [input, weight, bias, out, g]() mutable {
    const Shape& xs = input.shape();
    const std::size_t cout = weight.shape().n;
    const std::size_t K = g.depth();
    const std::size_t P = g.pixels();
    const T* gy = out.grad().data();
    std::vector<T> col(g.direct() ? 0 : K * P);
    // dW^T (K x cout) accumulates col * dY^T; transposing dY is cheaper
    // than transposing col since cout <= K for every layer we build.
    std::vector<T> gyT;
    std::vector<T> gwT;
    std::vector<T> wT;
    if (weight.requires_grad()) {
      gyT.resize(P * cout);
      gwT.assign(K * cout, T(0));
    }
    if (input.requires_grad()) {
      wT.resize(K * cout);
      transpose(weight.ptr(), cout, K, wT.data());
    }
    std::vector<T> gcol(input.requires_grad() && !g.direct() ? K * P : 0);
    for (std::size_t n = 0; n < xs.n; ++n) {
      const T* xn = input.ptr() + n * xs.c * xs.h * xs.w;
      const T* gyn = gy + n * cout * P;
      if (weight.requires_grad()) {
        const T* cp = xn;
        if (!g.direct()) {
          im2col(xn, g, col.data());
          cp = col.data();
        }
        transpose(gyn, cout, P, gyT.data());
        kernels::gemm<T>(K, cout, P, cp, P, gyT.data(), cout, gwT.data(), cout);
      }
      if (bias.defined() && bias.requires_grad()) {
        T* gb = bias.grad().data();
        for (std::size_t o = 0; o < cout; ++o) {
          T acc = T(0);
          for (std::size_t p = 0; p < P; ++p) acc += gyn[o * P + p];
          gb[o] += acc;
        }
      }
      if (input.requires_grad()) {
        T* gxn = input.grad().data() + n * xs.c * xs.h * xs.w;
        if (g.direct()) {
          kernels::gemm<T>(K, P, cout, wT.data(), cout, gyn, P, gxn, P);
        } else {
          std::fill(gcol.begin(), gcol.end(), T(0));
          kernels::gemm<T>(K, P, cout, wT.data(), cout, gyn, P, gcol.data(), P);
          col2im_add(gcol.data(), g, gxn);
        }
      }
    }
    if (weight.requires_grad()) {
      T* gw = weight.grad().data();
      for (std::size_t o = 0; o < cout; ++o)
        for (std::size_t k = 0; k < K; ++k) gw[o * K + k] += gwT[k * cout + o];
    }
  });
  return out;
}

template <typename T>
BasicTensor<T> upsample_bilinear(const BasicTensor<T>& input, std::size_t factor) {
  if (factor < 1) throw ShapeError("upsample_bilinear: factor must be >= 1");
  const Shape& s = input.shape();
  if (factor == 1) {
    BasicTensor<T> out = input.clone();
    record_op<T>({input}, out, [input, out]() mutable {
      kernels::axpy<T>(out.numel(), T(1), out.grad().data(), input.grad().data());
    });
    return out;
  }

  struct Tap {
    std::size_t i0, i1;
    T frac;
  };
  auto taps = [factor](std::size_t in, std::size_t outn) {
    std::vector<Tap> t(outn);
    for (std::size_t d = 0; d < outn; ++d) {
      T src = (static_cast<T>(d) + T(0.5)) / static_cast<T>(factor) - T(0.5);
      src = std::clamp(src, T(0), static_cast<T>(in - 1));
      const auto i0 = static_cast<std::size_t>(std::floor(src));
      t[d] = {i0, std::min(i0 + 1, in - 1), src - static_cast<T>(i0)};
    }
    return t;
  };
  const std::size_t oh = s.h * factor;
  const std::size_t ow = s.w * factor;
  const std::vector<Tap> ty = taps(s.h, oh);
  const std::vector<Tap> tx = taps(s.w, ow);

  BasicTensor<T> out(Shape{s.n, s.c, oh, ow});
  for (std::size_t pl = 0; pl < s.n * s.c; ++pl) {
    const T* src = input.ptr() + pl * s.h * s.w;
    T* dst = out.ptr() + pl * oh * ow;
    for (std::size_t y = 0; y < oh; ++y) {
      const T* r0 = src + ty[y].i0 * s.w;
      const T* r1 = src + ty[y].i1 * s.w;
      const T fy = ty[y].frac;
      for (std::size_t x = 0; x < ow; ++x) {
        const Tap& t = tx[x];
        const T top = r0[t.i0] + t.frac * (r0[t.i1] - r0[t.i0]);
        const T bot = r1[t.i0] + t.frac * (r1[t.i1] - r1[t.i0]);
        dst[y * ow + x] = top + fy * (bot - top);
      }
    }
  }

  record_op<T>({input}, out, [input, out, ty, tx]() mutable {
    const Shape& s = input.shape();
    const std::size_t oh = ty.size();
    const std::size_t ow = tx.size();
    const T* gy = out.grad().data();
    T* gx = input.grad().data();
    for (std::size_t pl = 0; pl < s.n * s.c; ++pl) {
      const T* g = gy + pl * oh * ow;
      T* dst = gx + pl * s.h * s.w;
      for (std::size_t y = 0; y < oh; ++y) {
        T* r0 = dst + ty[y].i0 * s.w;
        T* r1 = dst + ty[y].i1 * s.w;
        const T fy = ty[y].frac;
        for (std::size_t x = 0; x < ow; ++x) {
          const Tap& t = tx[x];
          const T v = g[y * ow + x];
          const T top = v * (T(1) - fy);
          const T bot = v * fy;
          r0[t.i0] += top * (T(1) - t.frac);
          r0[t.i1] += top * t.frac;
          r1[t.i0] += bot * (T(1) - t.frac);
          r1[t.i1] += bot * t.frac;
        }
      }
    }
  });
  return out;
}

template <typename T>
BasicTensor<T> elementwise(Elementwise kind, const BasicTensor<T>& a, const BasicTensor<T>& b) {
  static constexpr const char* kNames[] = {"add", "mul", "max"};
  check_broadcast(a, b, kNames[static_cast<int>(kind)]);
  const Shape& s = a.shape();
  const bool bcast = b.shape().c != s.c;
  const std::size_t plane = s.plane();
  BasicTensor<T> out(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* pa = a.ptr() + (n * s.c + c) * plane;
      const T* pb = b.ptr() + (bcast ? n * plane : (n * s.c + c) * plane);
      T* po = out.ptr() + (n * s.c + c) * plane;
      switch (kind) {
        case Elementwise::kAdd: kernels::add<T>(plane, pa, pb, po); break;
        case Elementwise::kMul: kernels::mul<T>(plane, pa, pb, po); break;
        case Elementwise::kMax:
          for (std::size_t i = 0; i < plane; ++i) po[i] = pa[i] >= pb[i] ? pa[i] : pb[i];
          break;
      }
    }
  }

  record_op<T>({a, b}, out, [kind, a, b, out, bcast]() mutable {
    const Shape& s = a.shape();
    const std::size_t plane = s.plane();
    const T* gy = out.grad().data();
    T* ga = a.requires_grad() ? a.grad().data() : nullptr;
    T* gb = b.requires_grad() ? b.grad().data() : nullptr;
    std::vector<T> tmp(plane);
    for (std::size_t n = 0; n < s.n; ++n) {
      for (std::size_t c = 0; c < s.c; ++c) {
        const std::size_t ao = (n * s.c + c) * plane;
        const std::size_t bo = bcast ? n * plane : ao;
        const T* g = gy + ao;
        switch (kind) {
          case Elementwise::kAdd:
            if (ga) kernels::axpy<T>(plane, T(1), g, ga + ao);
            if (gb) kernels::axpy<T>(plane, T(1), g, gb + bo);
            break;
          case Elementwise::kMul:
            if (ga) {
              kernels::mul<T>(plane, g, b.ptr() + bo, tmp.data());
              kernels::axpy<T>(plane, T(1), tmp.data(), ga + ao);
            }
            if (gb) {
              kernels::mul<T>(plane, g, a.ptr() + ao, tmp.data());
              kernels::axpy<T>(plane, T(1), tmp.data(), gb + bo);
            }
            break;
          case Elementwise::kMax: {
            const T* pa = a.ptr() + ao;
            const T* pb = b.ptr() + bo;
            for (std::size_t i = 0; i < plane; ++i) {
              T to_a = T(0);
              T to_b = T(0);
              if (pa[i] > pb[i]) {
                to_a = g[i];
              } else if (pb[i] > pa[i]) {
                to_b = g[i];
              } else {
                to_a = g[i] * T(0.5);
                to_b = g[i] * T(0.5);
              }
              if (ga) ga[ao + i] += to_a;
              if (gb) gb[bo + i] += to_b;
            }
            break;
          }
        }
      }
    }
  });
  return out;
}

template <typename T>
BasicTensor<T> concat_channels(std::span<const BasicTensor<T>> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no parts");
  const Shape& s0 = parts[0].shape();
  std::size_t channels = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.n != s0.n || s.h != s0.h || s.w != s0.w) {
      throw ShapeError("concat_channels: part " + s.str() + " does not match n/h/w of " + s0.str());
    }
    channels += s.c;
  }
  const std::size_t plane = s0.plane();
  BasicTensor<T> out(Shape{s0.n, channels, s0.h, s0.w});
  for (std::size_t n = 0; n < s0.n; ++n) {
    T* dst = out.ptr() + n * channels * plane;
    for (const auto& p : parts) {
      const std::size_t len = p.shape().c * plane;
      std::copy_n(p.ptr() + n * len, len, dst);
      dst += len;
    }
  }
  std::vector<BasicTensor<T>> inputs(parts.begin(), parts.end());
  record_op<T>(inputs, out, [inputs, out, channels, plane]() mutable {
    const T* gy = out.grad().data();
    const std::size_t batch = out.shape().n;
    for (std::size_t n = 0; n < batch; ++n) {
      const T* src = gy + n * channels * plane;
      for (auto& p : inputs) {
        const std::size_t len = p.shape().c * plane;
        if (p.requires_grad()) kernels::axpy<T>(len, T(1), src, p.grad().data() + n * len);
        src += len;
      }
    }
  });
  return out;
}

template <typename T>
T stable_sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
BasicTensor<T> activation(Activation kind, const BasicTensor<T>& x) {
  BasicTensor<T> out(x.shape());
  const std::size_t n = x.numel();
  if (kind == Activation::kRelu) {
    kernels::relu<T>(n, x.ptr(), out.ptr());
  } else {
    const T* src = x.ptr();
    T* dst = out.ptr();
    for (std::size_t i = 0; i < n; ++i) dst[i] = stable_sigmoid(src[i]);
  }
  record_op<T>({x}, out, [kind, x, out]() mutable {
    const std::size_t n = x.numel();
    const T* gy = out.grad().data();
    T* gx = x.grad().data();
    if (kind == Activation::kRelu) {
      kernels::relu_backward<T>(n, x.ptr(), gy, gx);
    } else {
      const T* s = out.ptr();
      for (std::size_t i = 0; i < n; ++i) gx[i] += gy[i] * s[i] * (T(1) - s[i]);
    }
  });
  return out;
}

template <typename T>
BasicTensor<T> maxpool2(const BasicTensor<T>& x) {
  const Shape& s = x.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw ShapeError("maxpool2: spatial dims must be even, got " + s.str());
  }
  const std::size_t oh = s.h / 2;
  const std::size_t ow = s.w / 2;
  BasicTensor<T> out(Shape{s.n, s.c, oh, ow});
  std::vector<std::size_t> argmax(out.numel());
  for (std::size_t pl = 0; pl < s.n * s.c; ++pl) {
    const T* src = x.ptr() + pl * s.h * s.w;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t xo = 0; xo < ow; ++xo) {
        const std::size_t base = (2 * y) * s.w + 2 * xo;
        const std::size_t cand[4] = {base, base + 1, base + s.w, base + s.w + 1};
        std::size_t best = cand[0];
        for (std::size_t k = 1; k < 4; ++k)
          if (src[cand[k]] > src[best]) best = cand[k];
        const std::size_t o = pl * oh * ow + y * ow + xo;
        out.ptr()[o] = src[best];
        argmax[o] = pl * s.h * s.w + best;
      }
    }
  }
  record_op<T>({x}, out, [x, out, argmax = std::move(argmax)]() mutable {
    const T* gy = out.grad().data();
    T* gx = x.grad().data();
    for (std::size_t o = 0; o < argmax.size(); ++o) gx[argmax[o]] += gy[o];
  });
  return out;
}

template <typename T>
BasicTensor<T> pad_replicate(const BasicTensor<T>& x, const Padding& pad) {
  const Shape& s = x.shape();
  if (s.h == 0 || s.w == 0) throw ShapeError("pad_replicate: empty input " + s.str());
  const std::size_t oh = s.h + pad.top + pad.bottom;
  const std::size_t ow = s.w + pad.left + pad.right;
  auto src_index = [](std::size_t o, std::size_t lo, std::size_t extent) {
    const long i = static_cast<long>(o) - static_cast<long>(lo);
    return static_cast<std::size_t>(std::clamp<long>(i, 0, static_cast<long>(extent) - 1));
  };
  std::vector<std::size_t> ys(oh);
  std::vector<std::size_t> xs(ow);
  for (std::size_t y = 0; y < oh; ++y) ys[y] = src_index(y, pad.top, s.h);
  for (std::size_t xo = 0; xo < ow; ++xo) xs[xo] = src_index(xo, pad.left, s.w);

  BasicTensor<T> out(Shape{s.n, s.c, oh, ow});
  for (std::size_t pl = 0; pl < s.n * s.c; ++pl) {
    const T* src = x.ptr() + pl * s.h * s.w;
    T* dst = out.ptr() + pl * oh * ow;
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xo = 0; xo < ow; ++xo) dst[y * ow + xo] = src[ys[y] * s.w + xs[xo]];
  }
  record_op<T>({x}, out, [x, out, ys, xs]() mutable {
    const Shape& s = x.shape();
    const std::size_t oh = ys.size();
    const std::size_t ow = xs.size();
    const T* gy = out.grad().data();
    T* gx = x.grad().data();
    for (std::size_t pl = 0; pl < s.n * s.c; ++pl) {
      const T* g = gy + pl * oh * ow;
      T* dst = gx + pl * s.h * s.w;
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xo = 0; xo < ow; ++xo) dst[ys[y] * s.w + xs[xo]] += g[y * ow + xo];
    }
  });
  return out;
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
  T acc = T(0);
  for (T v : x.data()) acc += v;
  BasicTensor<T> out = BasicTensor<T>::scalar(acc);
  record_op<T>({x}, out, [x, out]() mutable {
    const T g = out.grad()[0];
    for (T& v : x.grad()) v += g;
  });
  return out;
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, T factor) {
  BasicTensor<T> out(x.shape());
  const T* src = x.ptr();
  T* dst = out.ptr();
  for (std::size_t i = 0; i < x.numel(); ++i) dst[i] = src[i] * factor;
  record_op<T>({x}, out, [x, out, factor]() mutable {
    kernels::axpy<T>(x.numel(), factor, out.grad().data(), x.grad().data());
  });
  return out;
}

#define CPD_INSTANTIATE_OPS(T)                                                                     \
  template BasicTensor<T> conv2d(const BasicTensor<T>&, const BasicTensor<T>&,                     \
                                 const BasicTensor<T>&, const Conv2dParams&);                      \
  template BasicTensor<T> upsample_bilinear(const BasicTensor<T>&, std::size_t);                   \
  template BasicTensor<T> elementwise(Elementwise, const BasicTensor<T>&, const BasicTensor<T>&);  \
  template BasicTensor<T> concat_channels(std::span<const BasicTensor<T>>);                        \
  template BasicTensor<T> activation(Activation, const BasicTensor<T>&);                           \
  template T stable_sigmoid(T);                                                                    \
  template BasicTensor<T> maxpool2(const BasicTensor<T>&);                                         \
  template BasicTensor<T> pad_replicate(const BasicTensor<T>&, const Padding&);                    \
  template BasicTensor<T> sum(const BasicTensor<T>&);                                              \
  template BasicTensor<T> scale(const BasicTensor<T>&, T);

CPD_INSTANTIATE_OPS(float)
CPD_INSTANTIATE_OPS(double)

}  // namespace cpd
