#include "cpd/cost_model.hpp"

#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace cpd {

std::string_view mode_name(CostMode mode) {
  switch (mode) {
    case CostMode::kFullDecoder: return "full";
    case CostMode::kPartialL2: return "partial_l2";
    case CostMode::kPartialL3: return "partial_l3";
    case CostMode::kPartialL4: return "partial_l4";
    case CostMode::kCpdTwoBranch: return "cpd";
  }
  return "?";
}

CostMode parse_cost_mode(std::string_view name) {
  if (name == "full" || name == "full_decoder") return CostMode::kFullDecoder;
  if (name == "partial_l2") return CostMode::kPartialL2;
  if (name == "partial_l3") return CostMode::kPartialL3;
  if (name == "partial_l4") return CostMode::kPartialL4;
  if (name == "cpd" || name == "cpd_two_branch") return CostMode::kCpdTwoBranch;
  throw std::invalid_argument("unknown cost mode '" + std::string(name) + "'");
}

bool is_backbone(CostGroup g) {
  return g == CostGroup::kSharedBackbone || g == CostGroup::kAttentionBackbone ||
         g == CostGroup::kDetectionBackbone;
}

std::uint64_t conv_flops(std::size_t kh, std::size_t kw, std::size_t cin, std::size_t cout, std::size_t ho,
                         std::size_t wo, bool bias) {
  const std::uint64_t out = static_cast<std::uint64_t>(cout) * ho * wo;
  return 2ull * kh * kw * cin * out + (bias ? out : 0);
}

namespace {

std::size_t side_at(std::size_t input_side, std::size_t level) { return input_side >> (level - 1); }

struct Emitter {
  std::vector<LayerCost>& out;
  CostGroup group;
  std::size_t level;

  void push(std::string name, OpKind kind, std::uint64_t flops, Shape shape) {
    out.push_back({std::move(name), kind, group, level, flops, shape.numel() * kBytesPerElement, shape});
  }
  void conv(const std::string& name, std::size_t k, std::size_t cin, std::size_t cout, std::size_t side,
            bool bias = true) {
    push(name, OpKind::kConv, conv_flops(k, k, cin, cout, side, side, bias), Shape{1, cout, side, side});
  }
  void elementwise(const std::string& name, std::size_t c, std::size_t side, std::uint64_t per_element = 1) {
    const Shape s{1, c, side, side};
    push(name, OpKind::kElementwise, per_element * kElementwiseFlops * s.numel(), s);
  }
  void upsample(const std::string& name, std::size_t c, std::size_t side) {
    const Shape s{1, c, side, side};
    push(name, OpKind::kUpsample, kUpsampleFlopsPerOutput * s.numel(), s);
  }
};

std::string group_prefix(CostGroup g) {
  switch (g) {
    case CostGroup::kSharedBackbone: return "shared";
    case CostGroup::kAttentionBackbone: return "attention";
    case CostGroup::kDetectionBackbone: return "detection";
    case CostGroup::kAttentionDecoder: return "attention.decoder";
    case CostGroup::kDetectionDecoder: return "detection.decoder";
    case CostGroup::kHolisticAttention: return "holistic";
  }
  return "?";
}

}  // namespace

void add_block_cost(std::vector<LayerCost>& out, const ModelConfig& cfg, std::size_t level, CostGroup group,
                    std::size_t input_side) {
  Emitter e{out, group, level};
  const std::string p = group_prefix(group) + ".block" + std::to_string(level);
  const std::size_t side = side_at(input_side, level);
  std::size_t in = level == 1 ? 3 : cfg.block_channels[level - 2];
  if (level > 1) {
    // One comparison per input element.
    const Shape s{1, in, side, side};
    e.push(p + ".pool", OpKind::kPool, 4 * s.numel(), s);
  }
  const std::size_t ch = cfg.block_channels[level - 1];
  for (std::size_t c = 0; c < cfg.convs_per_block[level - 1]; ++c) {
    e.conv(p + ".conv" + std::to_string(c), 3, in, ch, side);
    e.elementwise(p + ".relu" + std::to_string(c), ch, side);
    in = ch;
  }
}

void add_decoder_cost(std::vector<LayerCost>& out, const ModelConfig& cfg, std::size_t first_level,
                      CostGroup group, std::size_t input_side) {
  const std::string p = group_prefix(group);
  const std::size_t ch = cfg.context_channels;
  for (std::size_t level = first_level; level <= kTopLevel; ++level) {
    Emitter e{out, group, level};
    const std::string cp = p + ".context" + std::to_string(level);
    const std::size_t side = side_at(input_side, level);
    const std::size_t in = cfg.block_channels[level - 1];
    for (std::size_t m = 1; m <= cfg.context_branches; ++m) {
      const std::string bp = cp + ".branch" + std::to_string(m);
      e.conv(bp + ".conv0", 1, in, ch, side);
      if (m > 1) {
        e.conv(bp + ".conv1", 2 * m - 1, ch, ch, side);
        e.conv(bp + ".conv2", 3, ch, ch, side);
      }
    }
    e.push(cp + ".concat", OpKind::kConcat, 0, Shape{1, cfg.context_branches * ch, side, side});
    e.conv(cp + ".fuse", 1, cfg.context_branches * ch, ch, side);
    e.conv(cp + ".shortcut", 1, in, ch, side);
    e.elementwise(cp + ".add", ch, side);
    e.elementwise(cp + ".relu", ch, side);
  }
  for (std::size_t level = first_level; level < kTopLevel; ++level) {
    Emitter e{out, group, level};
    const std::size_t side = side_at(input_side, level);
    for (std::size_t k = level + 1; k <= kTopLevel; ++k) {
      const std::string fp = p + ".fusion" + std::to_string(level) + "_" + std::to_string(k);
      e.upsample(fp + ".up", ch, side);
      e.conv(fp, 3, ch, ch, side);
      e.elementwise(fp + ".mul", ch, side);
    }
  }
  const std::size_t side = side_at(input_side, first_level);
  for (std::size_t level = first_level + 1; level <= kTopLevel; ++level) {
    Emitter{out, group, level}.upsample(p + ".up" + std::to_string(level), ch, side);
  }
  const std::size_t levels = kTopLevel - first_level + 1;
  Emitter e{out, group, first_level};
  if (levels > 1) e.push(p + ".concat", OpKind::kConcat, 0, Shape{1, levels * ch, side, side});
  e.conv(p + ".head3", 3, levels * ch, ch, side);
  e.conv(p + ".head1", 1, ch, 1, side);
  e.elementwise(p + ".sigmoid", 1, side);
  if (side != input_side) e.upsample(p + ".logits_up", 1, input_side);
}

void add_attention_cost(std::vector<LayerCost>& out, const ModelConfig& cfg, std::size_t level,
                        std::size_t input_side) {
  Emitter e{out, CostGroup::kHolisticAttention, level};
  const std::size_t side = side_at(input_side, level);
  const std::size_t k = cfg.blur_size();
  e.push("holistic.blur", OpKind::kConv, conv_flops(k, k, 1, 1, side, side, false), Shape{1, 1, side, side});
  // Min and max scans, then subtract and divide.
  e.elementwise("holistic.minmax", 1, side, 4);
  e.elementwise("holistic.max", 1, side);
  e.elementwise("holistic.refine", cfg.block_channels[level - 1], side);
}

CostModel model_cost(const ModelConfig& cfg, CostMode mode) {
  CostModel m;
  m.name = std::string(mode_name(mode));
  const std::size_t side = cfg.input_side;
  if (mode == CostMode::kCpdTwoBranch) {
    const std::size_t l = cfg.optimization_level;
    for (std::size_t level = 1; level <= l; ++level) {
      add_block_cost(m.layers, cfg, level, CostGroup::kSharedBackbone, side);
    }
    for (std::size_t level = l + 1; level <= kTopLevel; ++level) {
      add_block_cost(m.layers, cfg, level, CostGroup::kAttentionBackbone, side);
    }
    add_decoder_cost(m.layers, cfg, l, CostGroup::kAttentionDecoder, side);
    add_attention_cost(m.layers, cfg, l, side);
    for (std::size_t level = l + 1; level <= kTopLevel; ++level) {
      add_block_cost(m.layers, cfg, level, CostGroup::kDetectionBackbone, side);
    }
    add_decoder_cost(m.layers, cfg, l, CostGroup::kDetectionDecoder, side);
    return m;
  }
  const std::size_t first = mode == CostMode::kFullDecoder ? 1
                            : mode == CostMode::kPartialL2 ? 2
                            : mode == CostMode::kPartialL3 ? 3
                                                           : 4;
  for (std::size_t level = 1; level <= kTopLevel; ++level) {
    add_block_cost(m.layers, cfg, level, CostGroup::kSharedBackbone, side);
  }
  add_decoder_cost(m.layers, cfg, first, CostGroup::kDetectionDecoder, side);
  return m;
}

std::uint64_t CostModel::total_flops() const {
  std::uint64_t s = 0;
  for (const auto& l : layers) s += l.flops;
  return s;
}

std::uint64_t CostModel::total_activation_bytes() const {
  std::uint64_t s = 0;
  for (const auto& l : layers) s += l.activation_bytes;
  return s;
}

std::uint64_t CostModel::flops(CostGroup g) const {
  std::uint64_t s = 0;
  for (const auto& l : layers) s += l.group == g ? l.flops : 0;
  return s;
}

std::uint64_t CostModel::backbone_flops() const {
  std::uint64_t s = 0;
  for (const auto& l : layers) s += is_backbone(l.group) ? l.flops : 0;
  return s;
}

std::uint64_t CostModel::decoder_flops() const { return total_flops() - backbone_flops(); }

std::uint64_t CostModel::decoder_flops_at(std::size_t level) const {
  std::uint64_t s = 0;
  for (const auto& l : layers) s += !is_backbone(l.group) && l.level == level ? l.flops : 0;
  return s;
}

CostComparison compare(std::span<const CostModel> models) {
  if (models.empty()) throw std::invalid_argument("compare: no models");
  CostComparison c;
  std::array<std::vector<std::uint64_t>, kTopLevel> raw;
  for (const auto& m : models) {
    c.models.push_back(m.name);
    c.backbone_flops.push_back(m.backbone_flops());
    c.decoder_flops.push_back(m.decoder_flops());
    c.total_flops.push_back(m.total_flops());
    std::uint64_t acc = 0;
    for (std::size_t level = kTopLevel; level >= 1; --level) {
      acc += m.decoder_flops_at(level);
      raw[level - 1].push_back(acc);
      const double bb = static_cast<double>(c.backbone_flops.back());
      c.cumulative[level - 1].push_back(bb > 0 ? static_cast<double>(acc) / bb : 0.0);
    }
  }
  for (std::size_t i = 0; i < kTopLevel; ++i) {
    for (std::size_t m = 0; m < models.size(); ++m) {
      const double ref = static_cast<double>(raw[i][0]);
      const double v = static_cast<double>(raw[i][m]);
      c.relative[i].push_back(ref > 0 ? v / ref : (v == 0 ? 1.0 : 0.0));
    }
  }
  return c;
}

std::string CostComparison::tsv() const {
  std::string s = "model\tbackbone_flops\tdecoder_flops\ttotal_flops\tdecoder_over_backbone\n";
  for (std::size_t m = 0; m < models.size(); ++m) {
    char line[160];
    std::snprintf(line, sizeof(line), "\t%llu\t%llu\t%llu\t%.6f\n",
                  static_cast<unsigned long long>(backbone_flops[m]),
                  static_cast<unsigned long long>(decoder_flops[m]), static_cast<unsigned long long>(total_flops[m]),
                  static_cast<double>(decoder_flops[m]) / static_cast<double>(backbone_flops[m]));
    s += models[m] + line;
  }
  s += "\nlevel";
  for (const auto& name : models) s += "\t" + name + ".cumulative\t" + name + ".relative";
  s += "\nbackbone";
  for (std::size_t m = 0; m < models.size(); ++m) s += "\t1.000000\t-";
  s += "\n";
  for (std::size_t level = kTopLevel; level >= 1; --level) {
    s += std::to_string(level);
    for (std::size_t m = 0; m < models.size(); ++m) {
      char cell[64];
      std::snprintf(cell, sizeof(cell), "\t%.6f\t%.6f", cumulative[level - 1][m], relative[level - 1][m]);
      s += cell;
    }
    s += "\n";
  }
  return s;
}

std::string CostComparison::text() const {
  std::string s;
  char line[200];
  std::snprintf(line, sizeof(line), "%-12s %14s %14s %14s %10s\n", "mode", "backbone GF", "decoder GF", "total GF",
                "dec/bb");
  s += line;
  for (std::size_t m = 0; m < models.size(); ++m) {
    std::snprintf(line, sizeof(line), "%-12s %14.3f %14.3f %14.3f %10.3f\n", models[m].c_str(),
                  static_cast<double>(backbone_flops[m]) * 1e-9, static_cast<double>(decoder_flops[m]) * 1e-9,
                  static_cast<double>(total_flops[m]) * 1e-9,
                  static_cast<double>(decoder_flops[m]) / static_cast<double>(backbone_flops[m]));
    s += line;
  }
  s += "\ncumulative decoder cost down to level (backbone = 1)\n";
  std::snprintf(line, sizeof(line), "%-8s", "level");
  s += line;
  for (const auto& name : models) {
    std::snprintf(line, sizeof(line), " %12s", name.c_str());
    s += line;
  }
  s += "\n";
  for (std::size_t level = kTopLevel; level >= 1; --level) {
    std::snprintf(line, sizeof(line), "%-8zu", level);
    s += line;
    for (std::size_t m = 0; m < models.size(); ++m) {
      std::snprintf(line, sizeof(line), " %12.4f", cumulative[level - 1][m]);
      s += line;
    }
    s += "\n";
  }
  return s;
}

}  // namespace cpd
