#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cpd/model.hpp"
#include "cpd/tensor.hpp"

namespace cpd {

enum class CostMode { kFullDecoder, kPartialL2, kPartialL3, kPartialL4, kCpdTwoBranch };

std::string_view mode_name(CostMode mode);
/// Accepts full, partial_l2, partial_l3, partial_l4, cpd (or cpd_two_branch).
CostMode parse_cost_mode(std::string_view name);

enum class OpKind { kConv, kUpsample, kElementwise, kPool, kConcat };

/// Where a layer sits. The comparison table counts everything except the
/// backbone groups as decoder side.
enum class CostGroup {
  kSharedBackbone,
  kAttentionBackbone,   ///< attention-branch copy of blocks l+1..5
  kDetectionBackbone,   ///< detection-branch copy (the single decoder's blocks in partial modes)
  kAttentionDecoder,
  kDetectionDecoder,
  kHolisticAttention,   ///< blur, normalization, max and the f_l refinement
};

bool is_backbone(CostGroup g);

// Declared per-op constants.
inline constexpr std::uint64_t kUpsampleFlopsPerOutput = 8;
inline constexpr std::uint64_t kElementwiseFlops = 1;
inline constexpr std::uint64_t kBytesPerElement = 4;

struct LayerCost {
  std::string name;
  OpKind kind = OpKind::kConv;
  CostGroup group = CostGroup::kSharedBackbone;
  /// Feature level the layer works for (1..5). Fusion convolutions belong
  /// to the shallower level they refine; decoder heads to the decoder's
  /// first level.
  std::size_t level = 1;
  std::uint64_t flops = 0;
  std::uint64_t activation_bytes = 0;  ///< output tensor, float32
  Shape output_shape;
};

/// 2 kh kw cin cout ho wo, plus cout ho wo with a bias.
std::uint64_t conv_flops(std::size_t kh, std::size_t kw, std::size_t cin, std::size_t cout, std::size_t ho,
                         std::size_t wo, bool bias);

struct CostModel {
  std::string name;
  std::vector<LayerCost> layers;

  std::uint64_t total_flops() const;
  std::uint64_t total_activation_bytes() const;
  std::uint64_t flops(CostGroup g) const;
  std::uint64_t backbone_flops() const;
  std::uint64_t decoder_flops() const;  ///< every non-backbone layer
  /// Decoder-side FLOPs attributed to exactly `level`.
  std::uint64_t decoder_flops_at(std::size_t level) const;
};

// Building blocks, each appending the layers one forward step executes for
// a single image of the given spatial side at that level.
void add_block_cost(std::vector<LayerCost>& out, const ModelConfig& cfg, std::size_t level, CostGroup group,
                    std::size_t input_side);
void add_decoder_cost(std::vector<LayerCost>& out, const ModelConfig& cfg, std::size_t first_level,
                      CostGroup group, std::size_t input_side);
void add_attention_cost(std::vector<LayerCost>& out, const ModelConfig& cfg, std::size_t level,
                        std::size_t input_side);

/// Every layer the corresponding forward executes at cfg.input_side.
/// Partial modes are single-decoder networks over levels l..5 of one
/// backbone; cpd_two_branch is the bifurcated model at
/// cfg.optimization_level. cfg.full_decoder is ignored in favour of `mode`.
CostModel model_cost(const ModelConfig& cfg, CostMode mode);

struct CostComparison {
  std::vector<std::string> models;
  std::vector<std::uint64_t> backbone_flops;
  std::vector<std::uint64_t> decoder_flops;
  std::vector<std::uint64_t> total_flops;
  /// cumulative[level - 1][m]: decoder FLOPs at levels >= level divided by
  /// the model's own backbone FLOPs.
  std::array<std::vector<double>, kTopLevel> cumulative;
  /// Same cumulative FLOPs relative to models[0].
  std::array<std::vector<double>, kTopLevel> relative;

  std::string tsv() const;
  std::string text() const;
};

/// Requires at least one model (the CLI's single-mode table); the
/// relative columns need two to be informative.
CostComparison compare(std::span<const CostModel> models);

}  // namespace cpd
