#include "cpd/tensor.hpp"

#include <algorithm>

namespace cpd {

std::string Shape::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," + std::to_string(h) + "," +
         std::to_string(w) + ")";
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill) : impl_(std::make_shared<TensorStorage<T>>()) {
  impl_->shape = shape;
  impl_->data.assign(shape.numel(), fill);
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> values)
    : impl_(std::make_shared<TensorStorage<T>>()) {
  if (values.size() != shape.numel()) {
    throw ShapeError("tensor data length " + std::to_string(values.size()) +
                     " does not match shape " + shape.str());
  }
  impl_->shape = shape;
  impl_->data = std::move(values);
}

template <typename T>
T BasicTensor<T>::item() const {
  if (numel() != 1) throw ShapeError("item() on non-scalar tensor " + shape().str());
  return impl_->data[0];
}

template <typename T>
std::span<T> BasicTensor<T>::grad() const {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), T(0));
  return impl_->grad;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::clone() const {
  BasicTensor out;
  out.impl_ = std::make_shared<TensorStorage<T>>();
  out.impl_->shape = impl_->shape;
  out.impl_->data = impl_->data;
  return out;
}

namespace {
template <typename T>
BasicTape<T>*& active_slot() {
  thread_local BasicTape<T>* tape = nullptr;
  return tape;
}
}  // namespace

template <typename T>
BasicTape<T>* BasicTape<T>::active() {
  return active_slot<T>();
}

template <typename T>
void BasicTape<T>::backward(BasicTensor<T>& loss) {
  if (loss.shape() != Shape{1, 1, 1, 1}) {
    throw ShapeError("backward() needs a scalar loss, got shape " + loss.shape().str());
  }
  // Rules must not record while replaying.
  NoGradScope<T> guard;
  loss.grad()[0] += T(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (!it->output.has_grad()) continue;
    it->backward();
  }
}

template <typename T>
TapeScope<T>::TapeScope(BasicTape<T>& tape) : previous_(active_slot<T>()) {
  active_slot<T>() = &tape;
}

template <typename T>
TapeScope<T>::~TapeScope() {
  active_slot<T>() = previous_;
}

template <typename T>
NoGradScope<T>::NoGradScope() : previous_(active_slot<T>()) {
  active_slot<T>() = nullptr;
}

template <typename T>
NoGradScope<T>::~NoGradScope() {
  active_slot<T>() = previous_;
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template class BasicTape<float>;
template class BasicTape<double>;
template class TapeScope<float>;
template class TapeScope<double>;
template class NoGradScope<float>;
template class NoGradScope<double>;

}  // namespace cpd
