// Acceptance harness: one PASS/FAIL line per criterion, with the measured
// numbers. Arguments select criteria by number; none runs all ten. Exit
// status is 0 only when every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cpd/autograd.hpp"
#include "cpd/cost_model.hpp"
#include "cpd/experiment.hpp"
#include "cpd/grad_check.hpp"
#include "cpd/metrics.hpp"
#include "cpd/model.hpp"
#include "cpd/ops.hpp"
#include "cpd/training.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;

namespace cpd {
namespace {

using testing::random_tensor;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int precision = 3) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// --- 1: ops against nested-loop oracles --------------------------------------

Outcome ops_vs_oracles() {
  constexpr int kInstances = 150;
  constexpr double kTol = 1e-6;
  double conv_err = 0, pool_err = 0, up_err = 0, mul_err = 0;
  for (int seed = 0; seed < kInstances; ++seed) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(seed) + 7000);
    const std::size_t kh = pick(rng, 1, 4), kw = pick(rng, 1, 4), dil = pick(rng, 1, 3), stride = pick(rng, 1, 3);
    const std::size_t pt = pick(rng, 0, 3), pb = pick(rng, 0, 3), pl = pick(rng, 0, 3), pr = pick(rng, 0, 3);
    const std::size_t h = std::max(pick(rng, 1, 8), dil * (kh - 1) + 1);
    const std::size_t w = std::max(pick(rng, 1, 8), dil * (kw - 1) + 1);
    const Tensor64 x = random_tensor<double>({pick(rng, 1, 3), pick(rng, 1, 8), h, w}, rng);
    const Tensor64 wt = random_tensor<double>({pick(rng, 1, 8), x.shape().c, kh, kw}, rng);
    const Tensor64 b = random_tensor<double>({1, wt.shape().n, 1, 1}, rng);
    std::size_t ho = 0, wo = 0;
    const auto ref = testing::naive_conv(x, wt, &b, stride, pt, pb, pl, pr, dil, ho, wo);
    const Tensor64 y = conv2d(x, wt, b, {stride, {pt, pb, pl, pr}, dil});
    conv_err = std::max(conv_err, y.shape().h == ho && y.shape().w == wo ? testing::max_abs_diff(y, ref) : 1e300);

    const Tensor64 p = random_tensor<double>({pick(rng, 1, 3), pick(rng, 1, 8), 2 * pick(rng, 1, 4), 2 * pick(rng, 1, 4)}, rng);
    pool_err = std::max(pool_err, testing::max_abs_diff(maxpool2(p), testing::naive_maxpool(p)));

    const Tensor64 u = random_tensor<double>({pick(rng, 1, 3), pick(rng, 1, 8), pick(rng, 1, 8), pick(rng, 1, 8)}, rng);
    const std::size_t f = pick(rng, 1, 4);
    up_err = std::max(up_err, testing::max_abs_diff(upsample_bilinear(u, f), testing::naive_bilinear(u, f)));

    const Shape ms{pick(rng, 1, 3), pick(rng, 1, 8), pick(rng, 1, 8), pick(rng, 1, 8)};
    const Tensor64 a = random_tensor<double>(ms, rng);
    const Tensor64 m = random_tensor<double>({ms.n, 1, ms.h, ms.w}, rng, 0.0, 1.0);
    mul_err = std::max(mul_err, testing::max_abs_diff(mul(a, m), testing::naive_broadcast_mul(a, m)));
  }
  const double worst = std::max({conv_err, pool_err, up_err, mul_err});
  return {worst <= kTol, std::to_string(kInstances) + " instances each; max abs err conv " + fmt(conv_err) +
                             ", maxpool " + fmt(pool_err) + ", upsample " + fmt(up_err) + ", broadcast mul " +
                             fmt(mul_err) + " (tol 1e-6, double)"};
}

// --- 2: finite-difference gradient checks ------------------------------------

Tensor64 weighted_sum(const Tensor64& y, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sum(mul(y, random_tensor<double>(y.shape(), rng)));
}

Outcome gradient_checks() {
  const auto start = std::chrono::steady_clock::now();
  GradCheckOptions op_opts;
  op_opts.eps = 1e-6;
  op_opts.tol = 1e-4;
  std::vector<std::pair<std::string, double>> errors;
  auto run = [&](const std::string& name, const std::function<Tensor64()>& fn, std::vector<NamedTensor64> ins) {
    errors.emplace_back(name, grad_check(fn, ins, op_opts).max_rel_error);
  };

  std::mt19937_64 rng(2024);
  const Tensor64 x = random_tensor<double>({2, 3, 6, 5}, rng);
  const Tensor64 w = random_tensor<double>({4, 3, 3, 2}, rng);
  const Tensor64 b = random_tensor<double>({1, 4, 1, 1}, rng);
  run("conv2d", [&] { return weighted_sum(conv2d(x, w, b, {1, Padding::uniform(1), 1}), 1); },
      {{"x", x}, {"w", w}, {"b", b}});
  run("conv2d strided dilated", [&] { return weighted_sum(conv2d(x, w, b, {2, {1, 2, 0, 3}, 2}), 2); },
      {{"x", x}, {"w", w}, {"b", b}});
  const Tensor64 u = random_tensor<double>({1, 2, 3, 4}, rng);
  for (std::size_t f : {2, 3, 4}) {
    run("upsample x" + std::to_string(f), [&] { return weighted_sum(upsample_bilinear(u, f), 3); }, {{"u", u}});
  }
  const Tensor64 a = random_tensor<double>({2, 3, 4, 4}, rng);
  const Tensor64 c = random_tensor<double>({2, 1, 4, 4}, rng);
  const Tensor64 d = random_tensor<double>({2, 3, 4, 4}, rng);
  for (auto [kind, name] : {std::pair{Elementwise::kAdd, "add"}, {Elementwise::kMul, "mul"}, {Elementwise::kMax, "max"}}) {
    run(std::string(name) + " broadcast", [&] { return weighted_sum(elementwise(kind, a, c), 4); }, {{"a", a}, {"c", c}});
    run(name, [&] { return weighted_sum(elementwise(kind, a, d), 5); }, {{"a", a}, {"d", d}});
  }
  run("concat", [&] { return weighted_sum(concat_channels(std::vector<Tensor64>{a, d}), 6); }, {{"a", a}, {"d", d}});
  run("relu", [&] { return weighted_sum(relu(a), 7); }, {{"a", a}});
  run("sigmoid", [&] { return weighted_sum(sigmoid(a), 8); }, {{"a", a}});
  run("maxpool2", [&] { return weighted_sum(maxpool2(a), 9); }, {{"a", a}});
  run("pad_replicate", [&] { return weighted_sum(pad_replicate(a, {2, 1, 0, 3}), 10); }, {{"a", a}});
  run("scale", [&] { return weighted_sum(scale(a, -1.7), 11); }, {{"a", a}});

  const Tensor64 s = random_tensor<double>({2, 1, 8, 8}, rng, 0.05, 0.95);
  BasicGaussianBlurLayer<double> blur = init_gaussian_kernel(4, 0.75).cast<double>();
  run("gaussian blur", [&] { return weighted_sum(blur.forward(s), 12); }, {{"map", s}, {"kernel", blur.kernel}});
  run("minmax normalize", [&] { return weighted_sum(minmax_normalize(s, MinMaxGradient::kExact), 13); }, {{"map", s}});
  run("holistic attention", [&] { return weighted_sum(holistic_attention(s, blur, MinMaxGradient::kExact), 14); },
      {{"map", s}, {"kernel", blur.kernel}});
  const Tensor64 logits = random_tensor<double>({2, 1, 5, 5}, rng, -3.0, 3.0);
  Tensor64 mask(logits.shape());
  for (double& v : mask.data()) v = static_cast<double>(rng() % 2);
  run("bce with logits", [&] { return bce_with_logits(logits, mask); }, {{"logits", logits}});

  double op_worst = 0;
  std::string op_worst_name;
  for (const auto& [name, e] : errors) {
    if (e >= op_worst) {
      op_worst = e;
      op_worst_name = name;
    }
  }

  // Whole toy model at 16x16 with the training loss.
  CpdModel64 model = CpdModel::create(ModelConfig::toy(16), 36).cast<double>();
  std::mt19937_64 mrng(37);
  const Tensor64 img = random_tensor<double>({1, 3, 16, 16}, mrng, 0.0, 1.0);
  Tensor64 target(Shape{1, 1, 16, 16});
  for (double& v : target.data()) v = static_cast<double>(mrng() % 2);
  for (auto& p : model.parameters()) {
    if (p.name.ends_with(".bias")) {
      for (double& v : p.tensor.data()) v = 0.05 * (static_cast<double>(mrng() % 200) / 100.0 - 1.0);
    }
  }
  std::vector<NamedTensor64> inputs;
  for (const auto& p : model.parameters()) inputs.push_back({p.name, p.tensor});
  inputs.push_back({"image", img});
  GradCheckOptions model_opts;
  model_opts.eps = 1e-3;
  model_opts.stencil = Stencil::kFivePoint;
  model_opts.adaptive = true;
  model_opts.tol = 1e-3;
  model_opts.max_coords_per_input = 6;
  model_opts.seed = 38;
  const ForwardOptions fwd{.minmax_gradient = MinMaxGradient::kExact};
  const auto report = grad_check([&] { return total_loss(model.forward(img, fwd), target); }, inputs, model_opts);
  std::size_t coords = 0;
  for (const auto& e : report.entries) coords += e.coords_checked;

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool pass = op_worst < 1e-4 && report.max_rel_error < 1e-3 && secs < 300.0;
  return {pass, std::to_string(errors.size()) + " op checks, worst rel err " + fmt(op_worst) + " (" + op_worst_name +
                    ", tol 1e-4); whole model 16x16 " + std::to_string(report.entries.size()) + " tensors / " +
                    std::to_string(coords) + " coords, max rel err " + fmt(report.max_rel_error) + " (tol 1e-3); " +
                    fmt(secs, 3) + " s (limit 300)"};
}

// --- 3: holistic attention dominance ------------------------------------------

Outcome attention_dominance() {
  constexpr int kTrials = 1000;
  std::size_t violations = 0, out_of_range = 0;
  double min_gap = 1e300;
  for (int trial = 0; trial < kTrials; ++trial) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(trial) + 9000);
    const std::size_t ksize = pick(rng, 2, 8);
    const Shape ms{pick(rng, 1, 2), 1, pick(rng, 4, 24), pick(rng, 4, 24)};
    Tensor s = random_tensor<float>(ms, rng, 0.0, 1.0);
    if (trial % 3 == 0) {
      // Peaked maps: mostly background with a few confident pixels.
      for (float& v : s.data()) v = v < 0.9f ? 0.05f * v : v;
    }
    GaussianBlurLayer blur = trial % 2 == 0
                                 ? init_gaussian_kernel(ksize, 0.25 + std::uniform_real_distribution<double>(0, 2)(rng))
                                 : GaussianBlurLayer{random_tensor<float>({1, 1, ksize, ksize}, rng), ksize, 1.0};
    const Tensor h = holistic_attention(s, blur);
    for (std::size_t i = 0; i < h.numel(); ++i) {
      min_gap = std::min(min_gap, static_cast<double>(h.data()[i]) - s.data()[i]);
      violations += h.data()[i] < s.data()[i];
      out_of_range += !(h.data()[i] >= 0.0f && h.data()[i] <= 1.0f);
    }
  }
  std::size_t constant_mismatch = 0;
  std::mt19937_64 rng(9999);
  for (float v : {0.0f, 0.3f, 0.5f, 0.77f, 1.0f}) {
    for (std::size_t ksize : {2, 6, 8}) {
      const Tensor s(Shape{2, 1, 12, 12}, v);
      for (const GaussianBlurLayer& blur :
           {init_gaussian_kernel(ksize, blur_sigma_for(ksize)),
            GaussianBlurLayer{random_tensor<float>({1, 1, ksize, ksize}, rng), ksize, 1.0}}) {
        const Tensor h = holistic_attention(s, blur);
        for (float x : h.data()) constant_mismatch += x != v;
      }
    }
  }
  return {violations == 0 && out_of_range == 0 && constant_mismatch == 0,
          std::to_string(kTrials) + " random maps and kernels: " + std::to_string(violations) +
              " pixels with S_h < S_i, min(S_h - S_i) = " + fmt(min_gap) + ", " + std::to_string(out_of_range) +
              " outside [0,1]; constant maps: " + std::to_string(constant_mismatch) + " changed pixels"};
}

// --- 4: level fusion expansion at l = 3 ---------------------------------------

Outcome fusion_structure() {
  double worst = 0;
  bool pass_through = true;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    std::mt19937_64 rng(seed + 400);
    const std::size_t ch = 4;
    const std::vector<Tensor64> f{random_tensor<double>({2, ch, 16, 16}, rng),
                                  random_tensor<double>({2, ch, 8, 8}, rng),
                                  random_tensor<double>({2, ch, 4, 4}, rng)};
    std::vector<std::vector<BasicConvLayer<double>>> convs(2);
    for (std::size_t i = 0; i < 2; ++i)
      for (std::size_t k = i + 1; k < 3; ++k) {
        auto c = init_conv(ch, ch, 3, 3, InitScheme::kFanInScaledNormal, rng, {1, Padding::uniform(1), 1}).cast<double>();
        c.bias = random_tensor<double>(c.bias.shape(), rng);
        convs[i].push_back(c);
      }
    const auto out = fuse_levels<double>(f, convs);
    auto conv_up = [&](const BasicConvLayer<double>& c, const Tensor64& x, std::size_t factor) {
      const Shape s = x.shape();
      const Tensor64 up(Shape{s.n, s.c, s.h * factor, s.w * factor}, testing::naive_bilinear(x, factor));
      std::size_t ho = 0, wo = 0;
      return testing::naive_conv<double>(up, c.weight, &c.bias, 1, 1, 1, 1, 1, 1, ho, wo);
    };
    // Level 3 carries two factors, level 4 one, level 5 none.
    const auto a = conv_up(convs[0][0], f[1], 2);
    const auto b = conv_up(convs[0][1], f[2], 4);
    const auto c = conv_up(convs[1][0], f[2], 2);
    for (std::size_t i = 0; i < out[0].numel(); ++i)
      worst = std::max(worst, std::abs(out[0].data()[i] - f[0].data()[i] * a[i] * b[i]));
    for (std::size_t i = 0; i < out[1].numel(); ++i)
      worst = std::max(worst, std::abs(out[1].data()[i] - f[1].data()[i] * c[i]));
    pass_through = pass_through && out.size() == 3 && testing::max_abs_diff(out[2], std::vector<double>(
                                                                                      f[2].data().begin(), f[2].data().end())) == 0.0;
  }
  return {worst <= 1e-6 && pass_through, "25 random instances, max abs diff vs hand expansion " + fmt(worst) +
                                             " (tol 1e-6); deepest level unchanged: " + (pass_through ? "yes" : "no")};
}

// --- 5: parameter partition ----------------------------------------------------

std::set<std::string> touched(const CpdModel& m, const Tensor& img, const Tensor& mask, bool detection) {
  const auto params = m.parameters();
  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.set_requires_grad();
    t.zero_grad();
  }
  Tape tape;
  Tensor loss;
  {
    TapeScope<float> scope(tape);
    const SaliencyOutputs out = m.forward(img);
    loss = bce_with_logits(detection ? out.detection_logits : out.initial_logits, mask);
  }
  tape.backward(loss);
  std::set<std::string> names;
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    const auto g = p.tensor.grad();
    if (std::any_of(g.begin(), g.end(), [](float v) { return v != 0.0f; })) names.insert(p.name);
  }
  return names;
}

Outcome parameter_partition() {
  bool pass = true;
  std::ostringstream detail;
  for (std::size_t level : {2, 3, 4}) {
    ModelConfig cfg = ModelConfig::toy(32);
    cfg.optimization_level = level;
    const CpdModel m = CpdModel::create(cfg, 30 + level);
    std::mt19937_64 rng(level);
    const Tensor img = random_tensor<float>({2, 3, 32, 32}, rng, 0.0, 1.0);
    Tensor mask(Shape{2, 1, 32, 32});
    for (float& v : mask.data()) v = static_cast<float>(rng() % 2);
    const auto ti = touched(m, img, mask, false);
    const auto td = touched(m, img, mask, true);
    const bool subset = std::includes(td.begin(), td.end(), ti.begin(), ti.end());
    const bool proper = subset && td.size() > ti.size();
    const bool no_detection_in_initial =
        std::none_of(ti.begin(), ti.end(), [](const std::string& n) { return n.starts_with("detection."); });
    const bool reaches_attention_decoder =
        std::any_of(td.begin(), td.end(), [](const std::string& n) { return n.starts_with("attention.decoder."); });
    const bool ok = !ti.empty() && proper && no_detection_in_initial && reaches_attention_decoder;
    pass = pass && ok;
    detail << (level == 2 ? "" : "; ") << "l=" << level << ": |theta_i| " << ti.size() << " of |theta_d| " << td.size()
           << (ok ? " proper subset" : " NOT a proper subset");
  }
  return {pass, detail.str() + " (detection loss reaches the attention decoder through S_h)"};
}

// --- 6: cost model claims --------------------------------------------------------

Outcome cost_claims() {
  ModelConfig cfg;
  cfg.block_channels = {64, 128, 256, 512, 512};
  cfg.input_side = 352;
  const CostModel full = model_cost(cfg, CostMode::kFullDecoder);
  const CostModel l3 = model_cost(cfg, CostMode::kPartialL3);
  const CostModel two = model_cost(cfg, CostMode::kCpdTwoBranch);
  const double ratio = static_cast<double>(l3.decoder_flops()) / static_cast<double>(full.decoder_flops());
  const bool third = 3 * l3.decoder_flops() <= full.decoder_flops();
  const bool cheaper = two.total_flops() < full.total_flops();

  const std::vector<CostModel> ms{full, model_cost(cfg, CostMode::kPartialL2), l3,
                                  model_cost(cfg, CostMode::kPartialL4), two};
  const CostComparison cmp = compare(ms);
  bool monotone = true;
  for (std::size_t m = 0; m < ms.size(); ++m)
    for (std::size_t level = 1; level < kTopLevel; ++level)
      monotone = monotone && cmp.cumulative[level - 1][m] >= cmp.cumulative[level][m];

  ModelConfig half = cfg;
  half.input_side = 176;
  bool area = true;
  const CostModel small = model_cost(half, CostMode::kFullDecoder);
  for (std::size_t i = 0; i < small.layers.size(); ++i) area = area && 4 * small.layers[i].flops == full.layers[i].flops;

  const auto gf = [](std::uint64_t f) { return fmt(static_cast<double>(f) / 1e9, 4); };
  return {third && cheaper && monotone && area,
          "352x352 VGG widths: decoder GFLOPs full " + gf(full.decoder_flops()) + ", partial l=3 " +
              gf(l3.decoder_flops()) + " (ratio " + fmt(ratio) + ", limit 1/3); total GFLOPs two-branch " +
              gf(two.total_flops()) + " < full " + gf(full.total_flops()) + ": " + (cheaper ? "yes" : "no") +
              "; cumulative table monotone: " + (monotone ? "yes" : "no") + "; side doubling x4: " +
              (area ? "yes" : "no")};
}

// --- 7 and 8: toy training runs ---------------------------------------------------

constexpr std::uint64_t kToySeeds[] = {1, 2, 3, 4, 5};

struct ArmResult {
  std::vector<ToyRun> runs;
  double seconds = 0;
  double mean_mae = 0, mean_max_f = 0, mean_att_mae = 0, mean_att_max_f = 0;
  double worst_mae = 0, worst_max_f = 1;
};

ArmResult run_arm(bool full_decoder) {
  ToyProtocol protocol;
  const ToyData data = make_toy_data(protocol);
  ModelConfig cfg = ModelConfig::toy(protocol.scene.side);
  cfg.full_decoder = full_decoder;
  ArmResult arm;
  const auto start = std::chrono::steady_clock::now();
  for (std::uint64_t seed : kToySeeds) {
    const auto t0 = std::chrono::steady_clock::now();
    ToyRun r = run_toy(data, protocol, cfg, seed);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "  " << (full_decoder ? "full decoder" : "l=3") << " seed " << seed << ": S_d MAE "
              << fmt(r.detection.mae) << " maxF " << fmt(r.detection.max_f);
    if (r.has_attention) std::cout << " | S_i MAE " << fmt(r.attention.mae) << " maxF " << fmt(r.attention.max_f);
    std::cout << " | final loss " << fmt(r.log.back().loss) << " (" << fmt(secs, 3) << " s)" << std::endl;
    arm.runs.push_back(std::move(r));
  }
  arm.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double n = static_cast<double>(arm.runs.size());
  for (const ToyRun& r : arm.runs) {
    arm.mean_mae += r.detection.mae / n;
    arm.mean_max_f += r.detection.max_f / n;
    arm.mean_att_mae += r.has_attention ? r.attention.mae / n : 0.0;
    arm.mean_att_max_f += r.has_attention ? r.attention.max_f / n : 0.0;
    arm.worst_mae = std::max(arm.worst_mae, r.detection.mae);
    arm.worst_max_f = std::min(arm.worst_max_f, r.detection.max_f);
  }
  return arm;
}

std::optional<ArmResult> level3_arm, full_arm;

const ArmResult& level3() {
  if (!level3_arm) level3_arm = run_arm(false);
  return *level3_arm;
}

const ArmResult& full_decoder() {
  if (!full_arm) full_arm = run_arm(true);
  return *full_arm;
}

Outcome toy_end_to_end() {
  const ArmResult& a = level3();
  const bool mae_ok = a.mean_mae <= 0.08;
  const bool f_ok = a.mean_max_f >= 0.85;
  const bool branch_ok = a.mean_mae <= a.mean_att_mae;
  const bool time_ok = a.seconds <= 600.0;
  return {mae_ok && f_ok && branch_ok && time_ok,
          "5 seeds, mean held-out S_d MAE " + fmt(a.mean_mae) + " (limit 0.08, worst seed " + fmt(a.worst_mae) +
              "), maxF " + fmt(a.mean_max_f) + " (limit 0.85, worst seed " + fmt(a.worst_max_f) + "); S_i MAE " +
              fmt(a.mean_att_mae) + ", S_d <= S_i: " + (branch_ok ? "yes" : "no") + "; " + fmt(a.seconds, 4) +
              " s (limit 600)"};
}

Outcome ablation_order() {
  const ArmResult& a = level3();
  const ArmResult& f = full_decoder();
  return {a.mean_mae <= f.mean_mae, "5 seeds, mean held-out MAE l=3 " + fmt(a.mean_mae, 4) + " vs full decoder " +
                                        fmt(f.mean_mae, 4) + " (maxF " + fmt(a.mean_max_f) + " vs " + fmt(f.mean_max_f) +
                                        "); full-decoder arm " + fmt(f.seconds, 4) + " s"};
}

// --- 9: metric oracles ----------------------------------------------------------------

Outcome metric_oracles() {
  double max_f_err = 0, loop_err = 0;
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    std::mt19937_64 rng(trial + 500);
    std::vector<Tensor> maps, gts;
    for (int k = 0; k < 3; ++k) {
      const std::size_t h = pick(rng, 4, 12), w = pick(rng, 4, 12);
      Tensor m = random_tensor<float>({1, 1, h, w}, rng, 0.0, 1.0);
      Tensor g(Shape{1, 1, h, w});
      for (std::size_t j = 0; j < g.numel(); ++j) g.data()[j] = static_cast<float>(rng() % 5 < 2);
      if (trial % 2 == 0) {
        for (float& v : m.data()) v = std::round(v * 255.0f) / 255.0f;
      }
      maps.push_back(m);
      gts.push_back(g);
    }
    max_f_err = std::max(max_f_err, std::abs(f_measure(maps, gts).max_f - testing::brute_max_f(maps, gts)));

    const Tensor& m = maps[0];
    const Tensor& g = gts[0];
    double abs_sum = 0, tp = 0, tn = 0, fp = 0, fn = 0;
    for (std::size_t j = 0; j < m.numel(); ++j) {
      const double v = m.data()[j];
      const bool gt = g.data()[j] == 1.0f;
      const bool p = v >= 0.5;
      abs_sum += std::abs(v - g.data()[j]);
      tp += p && gt;
      tn += !p && !gt;
      fp += p && !gt;
      fn += !p && gt;
    }
    loop_err = std::max(loop_err, std::abs(mae(m, g) - abs_sum / static_cast<double>(m.numel())));
    if (tp + fn > 0 && tn + fp > 0)
      loop_err = std::max(loop_err, std::abs(ber(m, g).ber - 100.0 * (1.0 - 0.5 * (tp / (tp + fn) + tn / (tn + fp)))));
    const double uni = tp + fp + fn;
    loop_err = std::max(loop_err, std::abs(iou(m, g) - (uni == 0 ? 1.0 : tp / uni)));
  }
  Tensor g(Shape{1, 1, 6, 6});
  for (std::size_t j = 0; j < g.numel(); ++j) g.data()[j] = static_cast<float>(j % 3 == 0);
  const MetricReport perfect = evaluate(std::span(&g, 1), std::span(&g, 1));
  const bool perfect_ok = perfect.mae == 0.0 && perfect.max_f == 1.0 && perfect.ber == 0.0 && perfect.mean_iou == 1.0;
  return {max_f_err <= 1e-12 && loop_err <= 1e-9 && perfect_ok,
          "100 three-image sets: |maxF - brute force| " + fmt(max_f_err) + "; MAE/BER/IoU vs loops " + fmt(loop_err) +
              "; perfect prediction MAE 0, maxF 1, BER 0, IoU 1: " + (perfect_ok ? "yes" : "no")};
}

// --- 10: checkpoints ---------------------------------------------------------------------

std::vector<char> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, const std::vector<char>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
}

std::size_t find_text(const std::vector<char>& b, const std::string& s) {
  const auto it = std::search(b.begin(), b.end(), s.begin(), s.end());
  return it == b.end() ? std::string::npos : static_cast<std::size_t>(it - b.begin());
}

std::optional<CheckpointError::Kind> load_error(const fs::path& p) {
  try {
    load_checkpoint(p);
  } catch (const CheckpointError& e) {
    return e.kind();
  }
  return std::nullopt;
}

Outcome checkpoints() {
  const fs::path dir = fs::temp_directory_path() / "cpd_acceptance_ckpt";
  fs::remove_all(dir);
  fs::create_directories(dir);

  SceneConfig scene;
  scene.side = 32;
  scene.seed = 3;
  std::vector<Sample> data;
  for (std::size_t i = 0; i < 4; ++i) data.push_back(synth_sample(scene, i));
  const auto [images, masks] = make_batch(data, std::vector<std::size_t>{0, 1, 2, 3});

  bool identical = true;
  for (bool full : {false, true}) {
    ModelConfig cfg = ModelConfig::toy(32);
    cfg.full_decoder = full;
    CpdModel m = CpdModel::create(cfg, 12);
    TrainConfig tc;
    tc.epochs = 2;
    const TrainResult r = fit(m, data, tc);
    save_checkpoint(dir / "a.ckpt", m, &r.adam);
    const Checkpoint ck = load_checkpoint(dir / "a.ckpt");
    const SaliencyOutputs x = m.forward(images), y = ck.model.forward(images);
    identical = identical && std::memcmp(x.detection.data().data(), y.detection.data().data(),
                                         x.detection.numel() * sizeof(float)) == 0;
    if (!full) {
      identical = identical && std::memcmp(x.initial.data().data(), y.initial.data().data(),
                                           x.initial.numel() * sizeof(float)) == 0;
    }
    save_checkpoint(dir / "b.ckpt", ck.model, ck.adam ? &*ck.adam : nullptr);
    identical = identical && read_bytes(dir / "a.ckpt") == read_bytes(dir / "b.ckpt");
  }

  save_checkpoint(dir / "good.ckpt", CpdModel::create(ModelConfig::toy(32), 1));
  const std::vector<char> good = read_bytes(dir / "good.ckpt");
  const std::string first = "shared.block1.conv0.weight";
  const std::size_t at = find_text(good, first);
  using K = CheckpointError::Kind;
  std::vector<std::pair<std::string, K>> cases;
  auto probe = [&](const std::string& name, const std::vector<char>& bytes, K expected) {
    write_bytes(dir / (name + ".ckpt"), bytes);
    const auto got = load_error(dir / (name + ".ckpt"));
    cases.emplace_back(name, got && *got == expected ? expected : static_cast<K>(-1));
  };
  auto b = good;
  b[0] = 'X';
  probe("bad magic", b, K::kBadMagic);
  b.assign(good.begin(), good.begin() + static_cast<long>(at + first.size() + 1 + 16 + 40));
  probe("truncated", b, K::kTruncated);
  b = good;
  b[at + first.size() - 8] = 'X';
  probe("unknown name", b, K::kUnknownParameter);
  b = good;
  b[at + first.size() + 1] = 9;
  probe("shape mismatch", b, K::kShapeMismatch);
  b = good;
  b[find_text(good, "optimization_level=3") + std::string("optimization_level=").size()] = '9';
  probe("bad config", b, K::kBadConfig);

  std::set<K> kinds;
  std::size_t correct = 0;
  std::string names;
  for (const auto& [name, k] : cases) {
    correct += k != static_cast<K>(-1);
    kinds.insert(k);
    names += (names.empty() ? "" : ", ") + name;
  }
  fs::remove_all(dir);
  const bool distinct = correct == cases.size() && kinds.size() == cases.size();
  return {identical && distinct, std::string("save/load forward and re-saved bytes bit-identical (both modes): ") +
                                     (identical ? "yes" : "no") + "; " + std::to_string(correct) + "/" +
                                     std::to_string(cases.size()) + " corruptions raise their own error kind (" +
                                     names + ")"};
}

}  // namespace
}  // namespace cpd

int main(int argc, char** argv) {
  using namespace cpd;
  const std::map<int, std::pair<std::string, std::function<Outcome()>>> criteria{
      {1, {"ops match nested-loop oracles", ops_vs_oracles}},
      {2, {"finite-difference gradients", gradient_checks}},
      {3, {"attention map dominates S_i", attention_dominance}},
      {4, {"level fusion expansion at l=3", fusion_structure}},
      {5, {"S_i parameters proper subset of S_d", parameter_partition}},
      {6, {"decoder cost claims", cost_claims}},
      {7, {"toy end-to-end training", toy_end_to_end}},
      {8, {"ablation: l=3 vs full decoder", ablation_order}},
      {9, {"metrics match oracles", metric_oracles}},
      {10, {"checkpoint round trip and errors", checkpoints}},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) {
    const int n = std::atoi(argv[i]);
    if (!criteria.contains(n)) {
      std::cerr << "usage: acceptance [criterion numbers 1-10]\n";
      return 2;
    }
    selected.insert(n);
  }
  if (selected.empty())
    for (const auto& [n, c] : criteria) selected.insert(n);

  int failed = 0;
  for (int n : selected) {
    const auto& [title, fn] = criteria.at(n);
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << "criterion " << n << " " << (o.pass ? "PASS" : "FAIL") << "  " << title << ": " << o.detail
              << std::endl;
  }
  std::cout << (selected.size() - static_cast<std::size_t>(failed)) << "/" << selected.size() << " criteria pass"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
