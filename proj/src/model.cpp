#include "cpd/model.hpp"

#include <charconv>
#include <sstream>
#include <stdexcept>

#include "cpd/ops.hpp"

namespace cpd {

// --- config -------------------------------------------------------------

void ModelConfig::validate() const {
  for (std::size_t i = 0; i < kTopLevel; ++i) {
    if (block_channels[i] == 0) throw std::invalid_argument("block_channels must be positive");
    if (convs_per_block[i] == 0) throw std::invalid_argument("convs_per_block must be positive");
  }
  if (!full_decoder && (optimization_level < 2 || optimization_level >= kTopLevel)) {
    throw std::invalid_argument("optimization_level must be 2, 3 or 4, got " +
                                std::to_string(optimization_level));
  }
  if (context_channels == 0) throw std::invalid_argument("context_channels must be positive");
  if (context_branches == 0) throw std::invalid_argument("context_branches must be positive");
  if (input_side == 0 || input_side % 16 != 0) {
    throw std::invalid_argument("input_side must be a positive multiple of 16, got " +
                                std::to_string(input_side));
  }
}

namespace {

template <std::size_t N>
std::string join(const std::array<std::size_t, N>& v) {
  std::string s;
  for (std::size_t i = 0; i < N; ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::size_t parse_size(std::string_view s, std::string_view key) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw std::invalid_argument("model config: bad value for " + std::string(key) + ": '" +
                                std::string(s) + "'");
  }
  return v;
}

template <std::size_t N>
std::array<std::size_t, N> parse_list(std::string_view s, std::string_view key) {
  std::array<std::size_t, N> out{};
  std::size_t i = 0;
  while (true) {
    const std::size_t comma = s.find(',');
    if (i >= N) throw std::invalid_argument("model config: too many entries in " + std::string(key));
    out[i++] = parse_size(s.substr(0, comma), key);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  if (i != N) throw std::invalid_argument("model config: too few entries in " + std::string(key));
  return out;
}

}  // namespace

std::string ModelConfig::to_text() const {
  std::ostringstream os;
  os << "block_channels=" << join(block_channels) << "\n"
     << "convs_per_block=" << join(convs_per_block) << "\n"
     << "optimization_level=" << (full_decoder ? std::string("full") : std::to_string(optimization_level))
     << "\n"
     << "context_channels=" << context_channels << "\n"
     << "context_branches=" << context_branches << "\n"
     << "input_side=" << input_side << "\n";
  return os.str();
}

ModelConfig ModelConfig::parse(std::string_view text) {
  ModelConfig cfg;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("model config: expected key=value, got '" + std::string(line) + "'");
    }
    const std::string_view key = line.substr(0, eq);
    const std::string_view value = line.substr(eq + 1);
    if (key == "block_channels") {
      cfg.block_channels = parse_list<kTopLevel>(value, key);
    } else if (key == "convs_per_block") {
      cfg.convs_per_block = parse_list<kTopLevel>(value, key);
    } else if (key == "optimization_level") {
      cfg.full_decoder = value == "full";
      if (!cfg.full_decoder) cfg.optimization_level = parse_size(value, key);
    } else if (key == "context_channels") {
      cfg.context_channels = parse_size(value, key);
    } else if (key == "context_branches") {
      cfg.context_branches = parse_size(value, key);
    } else if (key == "input_side") {
      cfg.input_side = parse_size(value, key);
    } else {
      throw std::invalid_argument("model config: unknown key '" + std::string(key) + "'");
    }
  }
  cfg.validate();
  return cfg;
}

ModelConfig ModelConfig::toy(std::size_t input_side) {
  ModelConfig cfg;
  cfg.input_side = input_side;
  cfg.context_channels = 8;
  return cfg;
}

// --- blocks ---------------------------------------------------------------

template <typename T>
BasicTensor<T> BasicBackboneBlock<T>::forward(const BasicTensor<T>& x) const {
  BasicTensor<T> h = x;
  for (const auto& conv : convs) h = relu(conv.forward(h));
  return h;
}

template <typename T>
BasicTensor<T> BasicContextModule<T>::forward(const BasicTensor<T>& f) const {
  if (f.shape().c != in_channels()) {
    throw ShapeError("context module expects " + std::to_string(in_channels()) +
                     " input channels, got " + f.shape().str());
  }
  std::vector<BasicTensor<T>> outs;
  outs.reserve(branches.size());
  for (const auto& branch : branches) {
    BasicTensor<T> h = f;
    for (const auto& conv : branch) h = conv.forward(h);
    outs.push_back(std::move(h));
  }
  return relu(add(fuse.forward(concat_channels(outs)), shortcut.forward(f)));
}

template <typename T>
std::vector<BasicTensor<T>> backbone_forward(std::span<const BasicBackboneBlock<T>> blocks,
                                             std::size_t first_level, const BasicTensor<T>& x) {
  const Shape& s = x.shape();
  if (first_level == 1 && (s.h % 16 != 0 || s.w % 16 != 0)) {
    throw ShapeError("backbone: input height and width must be divisible by 16, got " + s.str());
  }
  std::vector<BasicTensor<T>> feats;
  BasicTensor<T> h = x;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (first_level + i > 1) h = maxpool2(h);
    h = blocks[i].forward(h);
    feats.push_back(h);
  }
  return feats;
}

template <typename T>
std::vector<BasicTensor<T>> fuse_levels(std::span<const BasicTensor<T>> feats,
                                        const std::vector<std::vector<BasicConvLayer<T>>>& convs) {
  const std::size_t levels = feats.size();
  if (levels == 0) throw ShapeError("fuse_levels: no features");
  if (convs.size() + 1 < levels) throw ShapeError("fuse_levels: missing fusion convolutions");
  for (std::size_t i = 1; i < levels; ++i) {
    const Shape& a = feats[i - 1].shape();
    const Shape& b = feats[i].shape();
    if (a.h != 2 * b.h || a.w != 2 * b.w) {
      throw ShapeError("fuse_levels: resolution chain broken between " + a.str() + " and " + b.str());
    }
  }
  std::vector<BasicTensor<T>> out(levels);
  out[levels - 1] = feats[levels - 1];
  for (std::size_t i = 0; i + 1 < levels; ++i) {
    if (convs[i].size() != levels - 1 - i) {
      throw ShapeError("fuse_levels: level offset " + std::to_string(i) + " needs " +
                       std::to_string(levels - 1 - i) + " convolutions");
    }
    BasicTensor<T> h = feats[i];
    for (std::size_t k = i + 1; k < levels; ++k) {
      const BasicTensor<T> up = upsample_bilinear(feats[k], std::size_t{1} << (k - i));
      h = mul(h, convs[i][k - i - 1].forward(up));
    }
    out[i] = h;
  }
  return out;
}

template <typename T>
BasicTensor<T> BasicPartialDecoder<T>::forward(std::span<const BasicTensor<T>> feats) const {
  if (feats.size() != levels()) {
    throw ShapeError("decoder expects " + std::to_string(levels()) + " levels, got " +
                     std::to_string(feats.size()));
  }
  std::vector<BasicTensor<T>> ctx;
  ctx.reserve(levels());
  for (std::size_t i = 0; i < levels(); ++i) ctx.push_back(contexts[i].forward(feats[i]));
  std::vector<BasicTensor<T>> fused = fuse_levels<T>(ctx, fusion);
  for (std::size_t i = 1; i < fused.size(); ++i) {
    fused[i] = upsample_bilinear(fused[i], std::size_t{1} << i);
  }
  const BasicTensor<T> cat = fused.size() == 1 ? fused[0] : cpd::concat_channels<T>(fused);
  return head1.forward(head3.forward(cat));
}

template <typename T>
BasicTensor<T> holistic_attention(const BasicTensor<T>& initial,
                                  const BasicGaussianBlurLayer<T>& blur, MinMaxGradient rule) {
  return maximum(minmax_normalize(blur.forward(initial), rule), initial);
}

// --- model ----------------------------------------------------------------

namespace {

ConvLayer he_conv(std::size_t out, std::size_t in, std::size_t k, std::mt19937_64& rng,
                  Conv2dParams params = {}) {
  return init_conv(out, in, k, k, InitScheme::kFanInScaledNormal, rng, params);
}

BasicBackboneBlock<float> make_block(std::size_t in, std::size_t out, std::size_t convs,
                                     std::mt19937_64& rng) {
  BasicBackboneBlock<float> b;
  for (std::size_t i = 0; i < convs; ++i) {
    b.convs.push_back(he_conv(out, i == 0 ? in : out, 3, rng, {1, Padding::uniform(1), 1}));
  }
  return b;
}

BasicContextModule<float> make_context(std::size_t in, const ModelConfig& cfg, std::mt19937_64& rng) {
  const std::size_t ch = cfg.context_channels;
  BasicContextModule<float> cm;
  for (std::size_t m = 1; m <= cfg.context_branches; ++m) {
    std::vector<ConvLayer> branch;
    branch.push_back(he_conv(ch, in, 1, rng));
    if (m > 1) {
      const std::size_t k = 2 * m - 1;
      branch.push_back(he_conv(ch, ch, k, rng, {1, Padding::same(k), 1}));
      branch.push_back(he_conv(ch, ch, 3, rng, {1, Padding::same(3, k), k}));
    }
    cm.branches.push_back(std::move(branch));
  }
  cm.fuse = he_conv(ch, cfg.context_branches * ch, 1, rng);
  cm.shortcut = he_conv(ch, in, 1, rng);
  return cm;
}

BasicPartialDecoder<float> make_decoder(std::size_t first_level, const ModelConfig& cfg,
                                        std::mt19937_64& rng) {
  const std::size_t ch = cfg.context_channels;
  BasicPartialDecoder<float> pd;
  pd.first_level = first_level;
  for (std::size_t level = first_level; level <= kTopLevel; ++level) {
    pd.contexts.push_back(make_context(cfg.block_channels[level - 1], cfg, rng));
  }
  const std::size_t levels = pd.contexts.size();
  for (std::size_t i = 0; i + 1 < levels; ++i) {
    std::vector<ConvLayer> row;
    for (std::size_t k = i + 1; k < levels; ++k) row.push_back(he_conv(ch, ch, 3, rng, {1, Padding::uniform(1), 1}));
    pd.fusion.push_back(std::move(row));
  }
  pd.head3 = he_conv(ch, levels * ch, 3, rng, {1, Padding::uniform(1), 1});
  pd.head1 = he_conv(1, ch, 1, rng);
  return pd;
}

template <typename U, typename T>
BasicBackboneBlock<U> cast_block(const BasicBackboneBlock<T>& b) {
  BasicBackboneBlock<U> out;
  for (const auto& c : b.convs) out.convs.push_back(c.template cast<U>());
  return out;
}

template <typename U, typename T>
BasicPartialDecoder<U> cast_decoder(const BasicPartialDecoder<T>& d) {
  BasicPartialDecoder<U> out;
  out.first_level = d.first_level;
  for (const auto& cm : d.contexts) {
    BasicContextModule<U> c;
    for (const auto& br : cm.branches) {
      std::vector<BasicConvLayer<U>> b;
      for (const auto& l : br) b.push_back(l.template cast<U>());
      c.branches.push_back(std::move(b));
    }
    c.fuse = cm.fuse.template cast<U>();
    c.shortcut = cm.shortcut.template cast<U>();
    out.contexts.push_back(std::move(c));
  }
  for (const auto& row : d.fusion) {
    std::vector<BasicConvLayer<U>> r;
    for (const auto& l : row) r.push_back(l.template cast<U>());
    out.fusion.push_back(std::move(r));
  }
  out.head3 = d.head3.template cast<U>();
  out.head1 = d.head1.template cast<U>();
  return out;
}

template <typename T>
void push_conv(std::vector<NamedParameter<T>>& out, const std::string& name, const BasicConvLayer<T>& c) {
  out.push_back({name + ".weight", c.weight});
  if (c.bias.defined()) out.push_back({name + ".bias", c.bias});
}

template <typename T>
void push_blocks(std::vector<NamedParameter<T>>& out, const std::string& prefix,
                 const std::vector<BasicBackboneBlock<T>>& blocks, std::size_t first_level) {
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (std::size_t c = 0; c < blocks[b].convs.size(); ++c) {
      push_conv(out, prefix + ".block" + std::to_string(first_level + b) + ".conv" + std::to_string(c),
                blocks[b].convs[c]);
    }
  }
}

template <typename T>
void push_decoder(std::vector<NamedParameter<T>>& out, const std::string& prefix,
                  const BasicPartialDecoder<T>& d) {
  for (std::size_t i = 0; i < d.contexts.size(); ++i) {
    const std::string cp = prefix + ".context" + std::to_string(d.first_level + i);
    const auto& cm = d.contexts[i];
    for (std::size_t m = 0; m < cm.branches.size(); ++m) {
      for (std::size_t j = 0; j < cm.branches[m].size(); ++j) {
        push_conv(out, cp + ".branch" + std::to_string(m + 1) + ".conv" + std::to_string(j),
                  cm.branches[m][j]);
      }
    }
    push_conv(out, cp + ".fuse", cm.fuse);
    push_conv(out, cp + ".shortcut", cm.shortcut);
  }
  for (std::size_t i = 0; i < d.fusion.size(); ++i) {
    for (std::size_t j = 0; j < d.fusion[i].size(); ++j) {
      const std::size_t level = d.first_level + i;
      push_conv(out, prefix + ".fusion" + std::to_string(level) + "_" + std::to_string(level + 1 + j),
                d.fusion[i][j]);
    }
  }
  push_conv(out, prefix + ".head3", d.head3);
  push_conv(out, prefix + ".head1", d.head1);
}

}  // namespace

template <typename T>
BasicCpdModel<T> BasicCpdModel<T>::create(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  BasicCpdModel<float> m;
  m.config_ = config;
  const std::size_t split = config.full_decoder ? kTopLevel : config.optimization_level;
  for (std::size_t level = 1; level <= split; ++level) {
    const std::size_t in = level == 1 ? 3 : config.block_channels[level - 2];
    m.shared.push_back(make_block(in, config.block_channels[level - 1], config.convs_per_block[level - 1], rng));
  }
  if (config.full_decoder) {
    m.detection_decoder = make_decoder(1, config, rng);
  } else {
    for (auto* branch : {&m.attention_blocks, &m.detection_blocks}) {
      for (std::size_t level = split + 1; level <= kTopLevel; ++level) {
        branch->push_back(make_block(config.block_channels[level - 2], config.block_channels[level - 1],
                                     config.convs_per_block[level - 1], rng));
      }
    }
    m.attention_decoder = make_decoder(split, config, rng);
    m.detection_decoder = make_decoder(split, config, rng);
    const std::size_t size = config.blur_size();
    m.blur = init_gaussian_kernel(size, blur_sigma_for(size));
  }
  if constexpr (std::is_same_v<T, float>) {
    return m;
  } else {
    return m.template cast<T>();
  }
}

template <typename T>
template <typename U>
BasicCpdModel<U> BasicCpdModel<T>::cast() const {
  BasicCpdModel<U> out;
  out.config_ = config_;
  for (const auto& b : shared) out.shared.push_back(cast_block<U>(b));
  for (const auto& b : attention_blocks) out.attention_blocks.push_back(cast_block<U>(b));
  for (const auto& b : detection_blocks) out.detection_blocks.push_back(cast_block<U>(b));
  if (!attention_decoder.contexts.empty()) out.attention_decoder = cast_decoder<U>(attention_decoder);
  out.detection_decoder = cast_decoder<U>(detection_decoder);
  if (blur.kernel.defined()) out.blur = blur.template cast<U>();
  return out;
}

template <typename T>
std::vector<NamedParameter<T>> BasicCpdModel<T>::parameters() const {
  std::vector<NamedParameter<T>> out;
  push_blocks(out, "shared", shared, 1);
  const std::size_t split = config_.full_decoder ? kTopLevel : config_.optimization_level;
  if (!config_.full_decoder) {
    push_blocks(out, "attention", attention_blocks, split + 1);
    push_decoder(out, "attention.decoder", attention_decoder);
    push_blocks(out, "detection", detection_blocks, split + 1);
  }
  push_decoder(out, "detection.decoder", detection_decoder);
  if (!config_.full_decoder) out.push_back({"blur.kernel", blur.kernel});
  return out;
}

template <typename T>
std::size_t BasicCpdModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

template <typename T>
BasicSaliencyOutputs<T> BasicCpdModel<T>::forward(const BasicTensor<T>& image,
                                                  const ForwardOptions& options) const {
  const Shape& s = image.shape();
  if (s.c != 3) throw ShapeError("model input must have 3 channels, got " + s.str());
  if (s.h % 16 != 0 || s.w % 16 != 0) {
    throw ShapeError("model input height and width must be divisible by 16, got " + s.str());
  }
  const std::size_t factor = config_.output_stride();
  BasicSaliencyOutputs<T> out;
  std::vector<BasicTensor<T>> feats = backbone_forward<T>(shared, 1, image);

  if (config_.full_decoder) {
    const BasicTensor<T> logits = detection_decoder.forward(feats);
    out.detection = sigmoid(logits);
    out.detection_logits = upsample_bilinear(logits, factor);
    return out;
  }

  const std::size_t l = config_.optimization_level;
  const BasicTensor<T> f_l = feats.back();

  std::vector<BasicTensor<T>> att{f_l};
  for (auto& f : backbone_forward<T>(attention_blocks, l + 1, f_l)) att.push_back(f);
  const BasicTensor<T> logits_i = attention_decoder.forward(att);
  out.initial = sigmoid(logits_i);
  out.initial_logits = upsample_bilinear(logits_i, factor);

  if (options.identity_attention) {
    out.holistic = BasicTensor<T>(out.initial.shape(), T(1));
  } else {
    out.holistic = holistic_attention(out.initial, blur, options.minmax_gradient);
  }

  const BasicTensor<T> refined = mul(f_l, out.holistic);
  std::vector<BasicTensor<T>> det{refined};
  for (auto& f : backbone_forward<T>(detection_blocks, l + 1, refined)) det.push_back(f);
  const BasicTensor<T> logits_d = detection_decoder.forward(det);
  out.detection = sigmoid(logits_d);
  out.detection_logits = upsample_bilinear(logits_d, factor);
  return out;
}

#define CPD_INSTANTIATE_MODEL(T)                                                                   \
  template struct BasicBackboneBlock<T>;                                                           \
  template struct BasicContextModule<T>;                                                           \
  template struct BasicPartialDecoder<T>;                                                          \
  template class BasicCpdModel<T>;                                                                 \
  template std::vector<BasicTensor<T>> backbone_forward(std::span<const BasicBackboneBlock<T>>,    \
                                                        std::size_t, const BasicTensor<T>&);       \
  template std::vector<BasicTensor<T>> fuse_levels(std::span<const BasicTensor<T>>,                \
                                                   const std::vector<std::vector<BasicConvLayer<T>>>&); \
  template BasicTensor<T> holistic_attention(const BasicTensor<T>&, const BasicGaussianBlurLayer<T>&, \
                                             MinMaxGradient);

CPD_INSTANTIATE_MODEL(float)
CPD_INSTANTIATE_MODEL(double)

template BasicCpdModel<double> BasicCpdModel<float>::cast<double>() const;
template BasicCpdModel<float> BasicCpdModel<float>::cast<float>() const;
template BasicCpdModel<float> BasicCpdModel<double>::cast<float>() const;

}  // namespace cpd
