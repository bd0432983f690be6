#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cpd/layers.hpp"
#include "cpd/tensor.hpp"

namespace cpd {

inline constexpr std::size_t kTopLevel = 5;

/// Architecture hyperparameters. Levels are 1-based: f_1 is the full
/// resolution block, f_5 the deepest.
struct ModelConfig {
  std::array<std::size_t, kTopLevel> block_channels{8, 16, 32, 32, 32};
  std::array<std::size_t, kTopLevel> convs_per_block{2, 2, 3, 3, 3};
  /// Optimization layer l in {2,3,4}: the level refined by the attention
  /// map and where the backbone bifurcates.
  std::size_t optimization_level = 3;
  /// One decoder over all five levels and no attention branch.
  bool full_decoder = false;
  std::size_t context_channels = 32;
  std::size_t context_branches = 4;
  std::size_t input_side = 352;

  /// First level the decoder(s) integrate.
  std::size_t decoder_level() const { return full_decoder ? 1 : optimization_level; }
  /// Stride of the decoder output relative to the input.
  std::size_t output_stride() const { return std::size_t{1} << (decoder_level() - 1); }
  std::size_t blur_size() const { return blur_kernel_size_for(input_side); }

  /// Throws std::invalid_argument on an inconsistent configuration.
  void validate() const;

  /// key=value lines; parse() accepts exactly what to_text() produces.
  std::string to_text() const;
  static ModelConfig parse(std::string_view text);

  /// Desk-scale configuration used by the toy experiments.
  static ModelConfig toy(std::size_t input_side = 64);

  bool operator==(const ModelConfig&) const = default;
};

template <typename T>
struct NamedParameter {
  std::string name;
  BasicTensor<T> tensor;
};

/// convs_per_block 3x3 conv + relu layers at one resolution.
template <typename T>
struct BasicBackboneBlock {
  std::vector<BasicConvLayer<T>> convs;

  BasicTensor<T> forward(const BasicTensor<T>& x) const;
};

/// Multi-branch receptive-field module. Branch 1 is a 1x1 reduction; branch
/// m > 1 adds a (2m-1)x(2m-1) conv and a 3x3 conv with dilation 2m-1. The
/// concatenated branches are fused by a 1x1 conv and added to a 1x1
/// shortcut of the input before a relu.
template <typename T>
struct BasicContextModule {
  std::vector<std::vector<BasicConvLayer<T>>> branches;
  BasicConvLayer<T> fuse;
  BasicConvLayer<T> shortcut;

  BasicTensor<T> forward(const BasicTensor<T>& f) const;
  std::size_t in_channels() const { return shortcut.in_channels(); }
  std::size_t out_channels() const { return fuse.out_channels(); }
};

/// Aggregates levels first_level..5 into a one-channel logit map on the
/// first_level grid.
template <typename T>
struct BasicPartialDecoder {
  std::size_t first_level = 3;
  std::vector<BasicContextModule<T>> contexts;  ///< one per level, shallow to deep
  /// fusion[i][j] multiplies level (first_level + i) by the upsampled level
  /// (first_level + i + 1 + j).
  std::vector<std::vector<BasicConvLayer<T>>> fusion;
  BasicConvLayer<T> head3;  ///< 3x3 over the concatenation
  BasicConvLayer<T> head1;  ///< 1x1 to a single logit channel

  std::size_t levels() const { return contexts.size(); }
  std::size_t concat_channels() const { return head3.in_channels(); }

  /// `feats[i]` is level first_level + i.
  BasicTensor<T> forward(std::span<const BasicTensor<T>> feats) const;
};

/// Runs `blocks` on `x`, max-pooling before every block except when the
/// first block is level 1. Returns one feature per block.
template <typename T>
std::vector<BasicTensor<T>> backbone_forward(std::span<const BasicBackboneBlock<T>> blocks,
                                             std::size_t first_level, const BasicTensor<T>& x);

template <typename T>
BasicTensor<T> context_forward(const BasicContextModule<T>& cm, const BasicTensor<T>& f) {
  return cm.forward(f);
}

/// Level fusion: the deepest feature passes through; every shallower one is
/// multiplied by conv(up(deeper)) for each deeper level, upsampled by
/// 2^(k-i).
template <typename T>
std::vector<BasicTensor<T>> fuse_levels(std::span<const BasicTensor<T>> feats,
                                        const std::vector<std::vector<BasicConvLayer<T>>>& convs);

template <typename T>
BasicTensor<T> decode(const BasicPartialDecoder<T>& pd, std::span<const BasicTensor<T>> feats) {
  return pd.forward(feats);
}

/// max(minmax_normalize(blur(S_i)), S_i)
template <typename T>
BasicTensor<T> holistic_attention(const BasicTensor<T>& initial,
                                  const BasicGaussianBlurLayer<T>& blur,
                                  MinMaxGradient rule = MinMaxGradient::kConstantExtrema);

template <typename T>
struct BasicSaliencyOutputs {
  /// Probability maps on the decoder grid (stride 2^(l-1)).
  BasicTensor<T> initial;    ///< S_i; undefined in full-decoder mode
  BasicTensor<T> holistic;   ///< S_h; undefined in full-decoder mode
  BasicTensor<T> detection;  ///< S_d
  /// Logits resized to the input resolution, as seen by the loss.
  BasicTensor<T> initial_logits;
  BasicTensor<T> detection_logits;

  bool has_attention() const { return initial.defined(); }
};

using SaliencyOutputs = BasicSaliencyOutputs<float>;

struct ForwardOptions {
  /// Replace S_h with ones, so the detection branch sees f_l unrefined.
  bool identity_attention = false;
  /// Differentiate the attention normalization through its extrema. Off in
  /// training; gradient checks turn it on to compare against finite
  /// differences.
  MinMaxGradient minmax_gradient = MinMaxGradient::kConstantExtrema;
};

template <typename T>
class BasicCpdModel {
 public:
  BasicCpdModel() = default;

  /// Fan-in scaled normal weights, zero biases, Gaussian blur kernel.
  static BasicCpdModel create(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }

  BasicSaliencyOutputs<T> forward(const BasicTensor<T>& image, const ForwardOptions& options = {}) const;

  /// Stable, dotted names: shared.*, attention.*, detection.*, blur.kernel.
  std::vector<NamedParameter<T>> parameters() const;
  std::size_t parameter_count() const;

  template <typename U>
  BasicCpdModel<U> cast() const;

  // Components, exposed for tests and the cost model.
  std::vector<BasicBackboneBlock<T>> shared;
  std::vector<BasicBackboneBlock<T>> attention_blocks;
  std::vector<BasicBackboneBlock<T>> detection_blocks;
  BasicPartialDecoder<T> attention_decoder;
  BasicPartialDecoder<T> detection_decoder;
  BasicGaussianBlurLayer<T> blur;

 private:
  template <typename>
  friend class BasicCpdModel;
  ModelConfig config_;
};

using CpdModel = BasicCpdModel<float>;
using CpdModel64 = BasicCpdModel<double>;

template <typename T>
BasicSaliencyOutputs<T> cpd_forward(const BasicCpdModel<T>& model, const BasicTensor<T>& image,
                                    const ForwardOptions& options = {}) {
  return model.forward(image, options);
}

}  // namespace cpd
