#include "cpd/experiment.hpp"

#include <algorithm>
#include <numeric>

#include "cpd/ops.hpp"

namespace cpd {

std::vector<Tensor> predict_maps(const CpdModel& model, std::span<const Sample> data, Branch branch,
                                 std::size_t batch) {
  if (branch == Branch::kAttention && model.config().full_decoder) {
    throw std::invalid_argument("full-decoder models have no attention branch");
  }
  NoGradScope<float> no_grad;
  std::vector<Tensor> maps;
  maps.reserve(data.size());
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t stride = model.config().output_stride();
  for (std::size_t first = 0; first < data.size(); first += batch) {
    const std::size_t count = std::min(batch, data.size() - first);
    const auto [images, masks] = make_batch(data, std::span(order).subspan(first, count));
    const SaliencyOutputs out = model.forward(images);
    const Tensor up = upsample_bilinear(branch == Branch::kAttention ? out.initial : out.detection, stride);
    const std::size_t plane = up.shape().plane();
    for (std::size_t b = 0; b < count; ++b) {
      Tensor m(Shape{1, 1, up.shape().h, up.shape().w});
      std::copy_n(up.ptr() + b * plane, plane, m.ptr());
      maps.push_back(std::move(m));
    }
  }
  return maps;
}

ToyData make_toy_data(const ToyProtocol& protocol) {
  ToyData d;
  for (std::size_t i = 0; i < protocol.train_count; ++i) d.train.push_back(synth_sample(protocol.scene, i));
  for (std::size_t i = 0; i < protocol.test_count; ++i) {
    d.test.push_back(synth_sample(protocol.scene, protocol.train_count + i));
  }
  return d;
}

ToyRun run_toy(const ToyData& data, const ToyProtocol& protocol, const ModelConfig& model_cfg, std::uint64_t seed,
               const std::function<void(const EpochRecord&)>& on_epoch) {
  CpdModel model = CpdModel::create(model_cfg, seed);
  TrainConfig tc = protocol.train;
  tc.seed = seed;
  ToyRun run;
  run.log = fit(model, data.train, tc, on_epoch).log;
  std::vector<Tensor> gts;
  std::vector<std::string> ids;
  for (const auto& s : data.test) {
    gts.push_back(s.mask);
    ids.push_back(s.id);
  }
  run.detection = evaluate(predict_maps(model, data.test, Branch::kDetection), gts, ids);
  run.has_attention = !model_cfg.full_decoder;
  if (run.has_attention) run.attention = evaluate(predict_maps(model, data.test, Branch::kAttention), gts, ids);
  return run;
}

}  // namespace cpd
