#pragma once

#include <utility>
#include <vector>

#include "cpd/tensor.hpp"

namespace cpd {

/// Records a backward rule for `out` on the active tape, if there is one and
/// any input requires a gradient. Marks `out` as requiring a gradient when
/// recorded.
template <typename T, typename Rule>
void record_op(std::vector<BasicTensor<T>> inputs, BasicTensor<T>& out, Rule&& rule) {
  BasicTape<T>* tape = BasicTape<T>::active();
  if (tape == nullptr) return;
  bool any = false;
  for (const auto& t : inputs) any = any || t.requires_grad();
  if (!any) return;
  out.set_requires_grad(true);
  tape->record({std::move(inputs), out, std::function<void()>(std::forward<Rule>(rule))});
}

}  // namespace cpd
