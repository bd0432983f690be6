#include "cpd/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <random>

#include "cpd/autograd.hpp"
#include "cpd/ops.hpp"

namespace cpd {

template <typename T>
BasicTensor<T> bce_with_logits(const BasicTensor<T>& logits, const BasicTensor<T>& mask) {
  if (logits.shape() != mask.shape()) {
    throw ShapeError("bce_with_logits: logits " + logits.shape().str() + " vs mask " + mask.shape().str());
  }
  const std::size_t n = logits.numel();
  if (n == 0) throw ShapeError("bce_with_logits: empty input");
  const T* x = logits.ptr();
  const T* z = mask.ptr();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (z[i] != T(0) && z[i] != T(1)) {
      throw std::invalid_argument("bce_with_logits: mask value " + std::to_string(z[i]) +
                                  " at index " + std::to_string(i) + " is not 0 or 1");
    }
    const double xi = x[i];
    total += std::max(xi, 0.0) - xi * z[i] + std::log1p(std::exp(-std::abs(xi)));
  }
  BasicTensor<T> out = BasicTensor<T>::scalar(static_cast<T>(total / static_cast<double>(n)));
  record_op<T>({logits}, out, [logits, mask, out, n]() {
    const T g = out.grad()[0] / static_cast<T>(n);
    const T* x = logits.ptr();
    const T* z = mask.ptr();
    T* gx = logits.grad().data();
    for (std::size_t i = 0; i < n; ++i) gx[i] += g * (stable_sigmoid(x[i]) - z[i]);
  });
  return out;
}

template <typename T>
BasicTensor<T> total_loss(const BasicSaliencyOutputs<T>& out, const BasicTensor<T>& mask) {
  BasicTensor<T> detection = bce_with_logits(out.detection_logits, mask);
  if (!out.has_attention()) return detection;
  return add(bce_with_logits(out.initial_logits, mask), detection);
}

template BasicTensor<float> bce_with_logits(const BasicTensor<float>&, const BasicTensor<float>&);
template BasicTensor<double> bce_with_logits(const BasicTensor<double>&, const BasicTensor<double>&);
template BasicTensor<float> total_loss(const BasicSaliencyOutputs<float>&, const BasicTensor<float>&);
template BasicTensor<double> total_loss(const BasicSaliencyOutputs<double>&, const BasicTensor<double>&);

// --- optimizer ---------------------------------------------------------------

void adam_step(std::span<const NamedParameter<float>> params, AdamState& state, float lr,
               const AdamConfig& cfg) {
  if (state.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.tensor.shape());
      state.v.emplace_back(p.tensor.shape());
    }
  }
  if (state.m.size() != params.size()) {
    throw std::invalid_argument("adam_step: state has " + std::to_string(state.m.size()) +
                                " moments for " + std::to_string(params.size()) + " parameters");
  }
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) throw std::invalid_argument("adam_step: parameter " + p.name + " has no gradient");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const float c1 = static_cast<float>(1.0 - std::pow(static_cast<double>(cfg.beta1), t));
  const float c2 = static_cast<float>(1.0 - std::pow(static_cast<double>(cfg.beta2), t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    BasicTensor<float> w = params[k].tensor;
    const std::span<const float> g = w.grad();
    float* m = state.m[k].ptr();
    float* v = state.v[k].ptr();
    float* x = w.ptr();
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0f - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0f - cfg.beta2) * g[i] * g[i];
      const float mhat = m[i] / c1;
      const float vhat = v[i] / c2;
      x[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

float PlateauScheduler::observe(double epoch_loss) {
  if (!best_ || epoch_loss < *best_ * (1.0 - rule_.min_improvement)) {
    best_ = epoch_loss;
    stale_ = 0;
    return lr_;
  }
  if (++stale_ >= rule_.window) {
    lr_ = static_cast<float>(lr_ * rule_.decay);
    stale_ = 0;
  }
  return lr_;
}

// --- training loop -----------------------------------------------------------

void TrainConfig::validate() const {
  if (!(lr >= 0.0f) || !std::isfinite(lr)) throw std::invalid_argument("learning rate must be >= 0");
  if (batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
}

std::pair<Tensor, Tensor> make_batch(std::span<const Sample> data, std::span<const std::size_t> order) {
  if (order.empty()) throw std::invalid_argument("make_batch: empty batch");
  const Shape is = data[order[0]].image.shape();
  const Shape ms = data[order[0]].mask.shape();
  Tensor images(Shape{order.size(), is.c, is.h, is.w});
  Tensor masks(Shape{order.size(), ms.c, ms.h, ms.w});
  for (std::size_t b = 0; b < order.size(); ++b) {
    const Sample& s = data[order[b]];
    if (s.image.shape() != is || s.mask.shape() != ms) {
      throw ShapeError("make_batch: sample " + s.id + " has shape " + s.image.shape().str() +
                       ", expected " + is.str());
    }
    std::copy_n(s.image.ptr(), is.numel(), images.ptr() + b * is.numel());
    std::copy_n(s.mask.ptr(), ms.numel(), masks.ptr() + b * ms.numel());
  }
  return {images, masks};
}

TrainResult fit(CpdModel& model, std::span<const Sample> data, const TrainConfig& cfg,
                const std::function<void(const EpochRecord&)>& on_epoch) {
  cfg.validate();
  if (data.empty()) throw std::invalid_argument("fit: empty dataset");
  TrainResult result;
  const std::vector<NamedParameter<float>> params = model.parameters();
  for (const auto& p : params) BasicTensor<float>(p.tensor).set_requires_grad();

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(data.size());
  PlateauScheduler schedule(cfg.lr, cfg.plateau);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i-- > 1;) std::swap(order[i], order[rng() % (i + 1)]);

    const float lr = schedule.lr();
    double loss_sum = 0.0;
    for (std::size_t first = 0; first < order.size(); first += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, order.size() - first);
      auto [images, masks] = make_batch(data, std::span(order).subspan(first, count));
      Tape tape;
      Tensor loss;
      {
        TapeScope<float> scope(tape);
        loss = total_loss(model.forward(images), masks);
      }
      const float value = loss.item();
      if (!std::isfinite(value)) {
        throw NonFiniteLossError("non-finite loss in epoch " + std::to_string(epoch) + " at batch starting " +
                                 std::to_string(first));
      }
      for (const auto& p : params) BasicTensor<float>(p.tensor).zero_grad();
      tape.backward(loss);
      adam_step(params, result.adam, lr, cfg.adam);
      loss_sum += static_cast<double>(value) * static_cast<double>(count);
    }
    const EpochRecord rec{epoch, loss_sum / static_cast<double>(data.size()), lr};
    schedule.observe(rec.loss);
    result.log.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return result;
}

// --- checkpoints -------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'C', 'P', 'D', 'C', 'K', 'P', 'T', '1'};

class Writer {
 public:
  template <typename U>
  void le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) bytes.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  void raw(const void* p, std::size_t n) {
    const char* c = static_cast<const char*>(p);
    bytes.insert(bytes.end(), c, c + n);
  }
  void entry(const std::string& name, const Tensor& t) {
    if (name.size() > 0xFFFF) throw std::invalid_argument("checkpoint: parameter name too long");
    le(static_cast<std::uint16_t>(name.size()));
    raw(name.data(), name.size());
    le(std::uint8_t{4});
    const Shape& s = t.shape();
    for (std::size_t d : {s.n, s.c, s.h, s.w}) le(static_cast<std::uint32_t>(d));
    for (float v : t.data()) le(std::bit_cast<std::uint32_t>(v));
  }
  std::vector<char> bytes;
};

class Reader {
 public:
  explicit Reader(std::vector<char> bytes) : bytes_(std::move(bytes)) {}

  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  template <typename U>
  U le(const std::string& context) {
    need(sizeof(U), context);
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i));
    }
    pos_ += sizeof(U);
    return v;
  }
  std::string str(std::size_t n, const std::string& context) {
    need(n, context);
    std::string s(bytes_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  void need(std::size_t n, const std::string& context) const {
    if (remaining() < n) {
      throw CheckpointError(CheckpointError::Kind::kTruncated, "checkpoint truncated while reading " + context);
    }
  }

 private:
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
};

struct RawEntry {
  std::string name;
  Shape shape;
};

RawEntry read_header(Reader& r, const std::string& section) {
  const auto len = r.le<std::uint16_t>(section + " entry name length");
  RawEntry e;
  e.name = r.str(len, section + " entry name");
  const auto rank = r.le<std::uint8_t>("rank of '" + e.name + "'");
  if (rank != 4) {
    throw CheckpointError(CheckpointError::Kind::kShapeMismatch,
                          "checkpoint: parameter '" + e.name + "' has rank " + std::to_string(rank) + ", expected 4");
  }
  std::size_t dims[4];
  for (auto& d : dims) d = r.le<std::uint32_t>("dims of '" + e.name + "'");
  e.shape = Shape{dims[0], dims[1], dims[2], dims[3]};
  return e;
}

void read_values(Reader& r, const RawEntry& e, Tensor& dst) {
  if (dst.shape() != e.shape) {
    throw CheckpointError(CheckpointError::Kind::kShapeMismatch, "checkpoint: parameter '" + e.name + "' has shape " +
                                                                     e.shape.str() + ", expected " + dst.shape().str());
  }
  r.need(e.shape.numel() * 4, "data of parameter '" + e.name + "'");
  for (float& v : dst.data()) v = std::bit_cast<float>(r.le<std::uint32_t>(e.name));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const CpdModel& model, const AdamState* adam) {
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  const std::string cfg = model.config().to_text();
  w.le(static_cast<std::uint32_t>(cfg.size()));
  w.raw(cfg.data(), cfg.size());
  const auto params = model.parameters();
  w.le(static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params) w.entry(p.name, p.tensor);
  if (adam != nullptr && !adam->empty()) {
    if (adam->m.size() != params.size() || adam->v.size() != params.size()) {
      throw std::invalid_argument("save_checkpoint: optimizer state does not match the model");
    }
    w.le(static_cast<std::uint32_t>(2 * params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
      w.entry("m." + params[i].name, adam->m[i]);
      w.entry("v." + params[i].name, adam->v[i]);
    }
    w.le(static_cast<std::uint64_t>(adam->step));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(CheckpointError::Kind::kIo, "cannot open " + path.string() + " for writing");
  out.write(w.bytes.data(), static_cast<std::streamsize>(w.bytes.size()));
  if (!out) throw CheckpointError(CheckpointError::Kind::kIo, "failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::kIo, "cannot open checkpoint " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t cmp = std::min(bytes.size(), sizeof(kMagic));
  if (std::memcmp(bytes.data(), kMagic, cmp) != 0) {
    throw CheckpointError(CheckpointError::Kind::kBadMagic, path.string() + " is not a checkpoint (magic mismatch)");
  }
  Reader r(std::move(bytes));
  r.str(sizeof(kMagic), "magic");

  const auto cfg_len = r.le<std::uint32_t>("config length");
  const std::string cfg_text = r.str(cfg_len, "config text");
  ModelConfig cfg;
  try {
    cfg = ModelConfig::parse(cfg_text);
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(CheckpointError::Kind::kBadConfig, std::string("checkpoint: ") + e.what());
  }

  Checkpoint ck{CpdModel::create(cfg, 0), std::nullopt};
  const auto params = ck.model.parameters();
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < params.size(); ++i) index[params[i].name] = i;

  std::vector<bool> seen(params.size(), false);
  const auto count = r.le<std::uint32_t>("parameter count");
  for (std::uint32_t k = 0; k < count; ++k) {
    const RawEntry e = read_header(r, "parameter");
    const auto it = index.find(e.name);
    if (it == index.end()) {
      throw CheckpointError(CheckpointError::Kind::kUnknownParameter, "checkpoint: unknown parameter '" + e.name + "'");
    }
    Tensor dst = params[it->second].tensor;
    read_values(r, e, dst);
    seen[it->second] = true;
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!seen[i]) {
      throw CheckpointError(CheckpointError::Kind::kMissingParameter,
                            "checkpoint: parameter '" + params[i].name + "' is missing");
    }
  }

  if (!r.at_end()) {
    AdamState st;
    for (const auto& p : params) {
      st.m.emplace_back(p.tensor.shape());
      st.v.emplace_back(p.tensor.shape());
    }
    const auto n = r.le<std::uint32_t>("optimizer entry count");
    for (std::uint32_t k = 0; k < n; ++k) {
      const RawEntry e = read_header(r, "optimizer");
      const bool is_m = e.name.starts_with("m.");
      const auto it = e.name.size() > 2 ? index.find(e.name.substr(2)) : index.end();
      if ((!is_m && !e.name.starts_with("v.")) || it == index.end()) {
        throw CheckpointError(CheckpointError::Kind::kUnknownParameter,
                              "checkpoint: unknown optimizer entry '" + e.name + "'");
      }
      Tensor dst = is_m ? st.m[it->second] : st.v[it->second];
      read_values(r, e, dst);
    }
    st.step = r.le<std::uint64_t>("optimizer step");
    ck.adam = std::move(st);
  }
  return ck;
}

}  // namespace cpd
