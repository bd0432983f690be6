#include "cpd/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace cpd {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

namespace {

double evaluate(const std::function<Tensor64()>& fn) {
  NoGradScope<double> guard;
  Tensor64 y = fn();
  if (y.shape() != Shape{1, 1, 1, 1}) {
    throw ShapeError("grad_check: program must return a scalar, got " + y.shape().str());
  }
  return y.item();
}

std::vector<std::size_t> pick_coords(std::size_t count, std::size_t limit, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(count);
  std::iota(idx.begin(), idx.end(), 0);
  if (limit == 0 || limit >= count) return idx;
  for (std::size_t i = 0; i < limit; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (count - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

GradCheckReport grad_check(const std::function<Tensor64()>& fn, std::span<NamedTensor64> inputs,
                           const GradCheckOptions& options) {
  for (auto& in : inputs) {
    in.tensor.set_requires_grad(true);
    in.tensor.zero_grad();
  }
  {
    Tape64 tape;
    Tensor64 y;
    {
      TapeScope<double> scope(tape);
      y = fn();
    }
    if (y.shape() != Shape{1, 1, 1, 1}) {
      throw ShapeError("grad_check: program must return a scalar, got " + y.shape().str());
    }
    tape.backward(y);
  }

  std::mt19937_64 rng(options.seed);
  GradCheckReport report;
  for (auto& in : inputs) {
    GradCheckEntry entry{in.name, 0.0, 0};
    std::vector<double> analytic(in.tensor.numel(), 0.0);
    if (in.tensor.has_grad()) {
      auto g = in.tensor.grad();
      std::copy(g.begin(), g.end(), analytic.begin());
    }
    auto data = in.tensor.data();
    for (std::size_t i : pick_coords(data.size(), options.max_coords_per_input, rng)) {
      const double saved = data[i];
      auto at = [&](double offset) {
        data[i] = saved + offset;
        return evaluate(fn);
      };
      auto estimate = [&](double h) {
        if (options.stencil == Stencil::kFivePoint) {
          return (at(-2 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2 * h)) / (12.0 * h);
        }
        return (at(h) - at(-h)) / (2.0 * h);
      };
      double h = options.eps;
      double numeric = estimate(h);
      // A kink inside the stencil makes successive estimates disagree; keep
      // shrinking the step until two agree.
      while (options.adaptive && h * 0.25 >= options.min_eps) {
        h *= 0.25;
        const double next = estimate(h);
        const bool agree = std::abs(next - numeric) <= 1e-6 * std::max(std::abs(next), std::abs(numeric)) + 1e-11;
        if (agree) break;  // keep the larger step: less roundoff
        numeric = next;
      }
      data[i] = saved;
      entry.max_rel_error = std::max(entry.max_rel_error, relative_error(analytic[i], numeric));
      ++entry.coords_checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  report.passed = report.max_rel_error <= options.tol;
  return report;
}

}  // namespace cpd
