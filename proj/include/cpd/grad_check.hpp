#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cpd/tensor.hpp"

namespace cpd {

struct NamedTensor64 {
  std::string name;
  Tensor64 tensor;
};

enum class Stencil {
  kCentral,   ///< (f(x+h) - f(x-h)) / 2h
  kFivePoint  ///< fourth-order: (f(x-2h) - 8f(x-h) + 8f(x+h) - f(x+2h)) / 12h
};

struct GradCheckOptions {
  double eps = 1e-6;
  double tol = 1e-4;
  /// 0 checks every coordinate; otherwise a seeded sample of at most this
  /// many coordinates per input.
  std::size_t max_coords_per_input = 0;
  std::uint64_t seed = 0;
  Stencil stencil = Stencil::kCentral;
  /// Repeat the estimate with the step divided by 4 until two successive
  /// estimates agree (or the step would fall below min_eps). Guards large
  /// steps against relu and max kinks.
  bool adaptive = false;
  double min_eps = 1e-7;
};

struct GradCheckEntry {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  bool passed = false;
};

/// |a - n| / max(1e-8, |a| + |n|)
double relative_error(double analytic, double numeric);

/// Compares reverse-mode gradients of the scalar program `fn` against finite
/// differences, coordinate by coordinate, in double precision. `fn` must read the given tensors; they
/// are switched to requires_grad and perturbed in place (restored after).
GradCheckReport grad_check(const std::function<Tensor64()>& fn, std::span<NamedTensor64> inputs,
                           const GradCheckOptions& options = {});

}  // namespace cpd
