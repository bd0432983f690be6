#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "cpd/data.hpp"
#include "cpd/model.hpp"

namespace cpd {

/// Mean over all pixels of max(x,0) - x*z + log(1 + exp(-|x|)). Throws
/// std::invalid_argument if the mask has values outside {0,1}.
template <typename T>
BasicTensor<T> bce_with_logits(const BasicTensor<T>& logits, const BasicTensor<T>& mask);

/// bce(initial logits) + bce(detection logits); the detection term alone in
/// full-decoder mode.
template <typename T>
BasicTensor<T> total_loss(const BasicSaliencyOutputs<T>& out, const BasicTensor<T>& mask);

struct AdamConfig {
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::uint64_t step = 0;

  bool empty() const { return m.empty(); }
};

/// One bias-corrected Adam update. Moments are created on the first call.
/// Throws std::invalid_argument if a parameter has no gradient buffer.
void adam_step(std::span<const NamedParameter<float>> params, AdamState& state, float lr,
               const AdamConfig& cfg = {});

struct PlateauRule {
  std::size_t window = 5;
  double min_improvement = 0.01;
  double decay = 0.9;
};

/// Tracks the best epoch loss; an epoch counts as an improvement when its
/// loss is below best * (1 - min_improvement). After `window` epochs without
/// one, the learning rate is multiplied by `decay` and the count restarts.
class PlateauScheduler {
 public:
  PlateauScheduler(float lr, PlateauRule rule = {}) : lr_(lr), rule_(rule) {}

  /// Returns the learning rate for the next epoch.
  float observe(double epoch_loss);
  float lr() const { return lr_; }
  std::size_t stale_epochs() const { return stale_; }

 private:
  float lr_;
  PlateauRule rule_;
  std::optional<double> best_;
  std::size_t stale_ = 0;
};

struct TrainConfig {
  std::size_t batch_size = 4;
  float lr = 1e-4f;
  AdamConfig adam;
  std::size_t epochs = 20;
  PlateauRule plateau;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  ///< 1-based
  double loss = 0.0;      ///< sample-weighted mean total loss
  float lr = 0.0f;        ///< rate used during this epoch
};

struct TrainResult {
  std::vector<EpochRecord> log;
  AdamState adam;
};

/// Raised when a batch loss is NaN or infinite.
class NonFiniteLossError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mini-batch training with a seeded shuffle per epoch. The last batch of an
/// epoch may be smaller. Throws std::invalid_argument on an empty dataset.
TrainResult fit(CpdModel& model, std::span<const Sample> data, const TrainConfig& cfg,
                const std::function<void(const EpochRecord&)>& on_epoch = {});

/// Stacks data[order[0]], data[order[1]], ... into (k,3,H,W) images and
/// (k,1,H,W) masks.
std::pair<Tensor, Tensor> make_batch(std::span<const Sample> data, std::span<const std::size_t> order);

// --- checkpoints -------------------------------------------------------------

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { kIo, kBadMagic, kTruncated, kUnknownParameter, kMissingParameter, kShapeMismatch, kBadConfig };
  CheckpointError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct Checkpoint {
  CpdModel model;
  std::optional<AdamState> adam;
};

/// "CPDCKPT1", u32 config length + config text, u32 parameter count, then
/// per parameter: u16 name length, name, u8 rank, u32 dims, float32 data (all
/// little-endian). An optional Adam section follows with the same layout
/// (entries "m.<name>" and "v.<name>") and a trailing u64 step count.
void save_checkpoint(const std::filesystem::path& path, const CpdModel& model,
                     const AdamState* adam = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cpd
