#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "cpd/data.hpp"
#include "cpd/metrics.hpp"
#include "cpd/model.hpp"
#include "cpd/training.hpp"

namespace cpd {

enum class Branch { kAttention, kDetection };

/// Probability maps of one branch, bilinearly resized to the input grid.
/// Runs without recording gradients, `batch` images at a time.
std::vector<Tensor> predict_maps(const CpdModel& model, std::span<const Sample> data, Branch branch,
                                 std::size_t batch = 8);

/// The desk-scale train/evaluate protocol shared by the CLI-free harnesses.
struct ToyProtocol {
  SceneConfig scene;         ///< side taken from here
  std::size_t train_count = 200;
  std::size_t test_count = 50;
  TrainConfig train;         ///< epochs, batch size, lr
};

/// Held-out samples use indices after the training ones, so the two sets
/// never overlap.
struct ToyData {
  std::vector<Sample> train;
  std::vector<Sample> test;
};
ToyData make_toy_data(const ToyProtocol& protocol);

struct ToyRun {
  std::vector<EpochRecord> log;
  MetricReport detection;
  MetricReport attention;  ///< empty in full-decoder mode
  bool has_attention = false;
};

/// Trains a fresh model (initialized and shuffled with `seed`) and scores
/// both branches on the held-out set.
ToyRun run_toy(const ToyData& data, const ToyProtocol& protocol, const ModelConfig& model_cfg, std::uint64_t seed,
               const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace cpd
