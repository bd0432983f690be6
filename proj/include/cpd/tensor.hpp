#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cpd {

/// NCHW extents of a rank-4 tensor.
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t numel() const { return n * c * h * w; }
  std::size_t plane() const { return h * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

template <typename T>
struct TensorStorage {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;
};

/// Shared handle to a dense NCHW buffer with an optional gradient.
///
/// Copies alias the same storage (the autodiff tape needs identity);
/// use clone() for a deep copy.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T(0));
  BasicTensor(Shape shape, std::vector<T> values);

  static BasicTensor scalar(T value) { return BasicTensor(Shape{1, 1, 1, 1}, value); }

  bool defined() const { return static_cast<bool>(impl_); }
  const Shape& shape() const { return impl_->shape; }
  std::size_t numel() const { return impl_->shape.numel(); }

  std::span<T> data() { return impl_->data; }
  std::span<const T> data() const { return impl_->data; }
  T* ptr() { return impl_->data.data(); }
  const T* ptr() const { return impl_->data.data(); }

  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    const Shape& s = impl_->shape;
    return impl_->data[((n * s.c + c) * s.h + h) * s.w + w];
  }
  T at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    const Shape& s = impl_->shape;
    return impl_->data[((n * s.c + c) * s.h + h) * s.w + w];
  }
  /// Value of a (1,1,1,1) tensor.
  T item() const;

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  BasicTensor& set_requires_grad(bool on = true) {
    impl_->requires_grad = on;
    return *this;
  }

  bool has_grad() const { return impl_ && !impl_->grad.empty(); }
  /// Gradient buffer, allocated (zero-filled) on first access. The handle
  /// is shallow-const: gradients of a const handle remain writable.
  std::span<T> grad() const;
  void zero_grad() { impl_->grad.clear(); }

  BasicTensor clone() const;
  /// Same values, no gradient tracking, independent storage.
  BasicTensor detach() const { return clone(); }

  template <typename U>
  BasicTensor<U> cast() const {
    BasicTensor<U> out(shape());
    auto dst = out.data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<U>(impl_->data[i]);
    return out;
  }

  bool same_storage(const BasicTensor& other) const { return impl_ == other.impl_; }

 private:
  std::shared_ptr<TensorStorage<T>> impl_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

/// Define-by-run record of differentiable operations.
///
/// Ops append a node when a tape is active on the current thread and any
/// input requires a gradient. backward() replays the nodes in exact
/// reverse order.
template <typename T>
class BasicTape {
 public:
  struct Node {
    std::vector<BasicTensor<T>> inputs;
    BasicTensor<T> output;
    std::function<void()> backward;
  };

  void record(Node node) { nodes_.push_back(std::move(node)); }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }
  void clear() { nodes_.clear(); }

  /// Seeds d(loss)/d(loss) = 1 and propagates into every requires_grad
  /// tensor reachable on the tape. Gradients accumulate into existing
  /// buffers.
  void backward(BasicTensor<T>& loss);

  static BasicTape* active();

 private:
  template <typename>
  friend class TapeScope;
  std::vector<Node> nodes_;
};

using Tape = BasicTape<float>;
using Tape64 = BasicTape<double>;

/// Makes `tape` the recording target for the current thread while alive.
template <typename T>
class TapeScope {
 public:
  explicit TapeScope(BasicTape<T>& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  BasicTape<T>* previous_;
};

/// Suspends recording for the current thread while alive.
template <typename T>
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  BasicTape<T>* previous_;
};

/// Convenience free function matching the tape method.
template <typename T>
void backward(BasicTensor<T>& loss, BasicTape<T>& tape) {
  tape.backward(loss);
}

}  // namespace cpd
