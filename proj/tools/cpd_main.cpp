// cpd: synthesize data, train, predict, evaluate and profile the cascaded
// partial decoder.
//
// Exit codes: 0 success, 1 usage error, 2 data or format error, 3 numerical
// failure during training.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cpd/cost_model.hpp"
#include "cpd/data.hpp"
#include "cpd/experiment.hpp"
#include "cpd/metrics.hpp"
#include "cpd/model.hpp"
#include "cpd/ops.hpp"
#include "cpd/training.hpp"

namespace fs = std::filesystem;
using namespace cpd;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

/// Inputs that parse but do not fit together (image vs checkpoint size).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::pair<std::size_t, std::size_t> parse_range(const std::string& text) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) throw UsageError("--objects expects MIN..MAX, got '" + text + "'");
  try {
    std::size_t used = 0;
    const std::string a = text.substr(0, dots), b = text.substr(dots + 2);
    const unsigned long lo = std::stoul(a, &used);
    if (used != a.size()) throw std::invalid_argument(a);
    const unsigned long hi = std::stoul(b, &used);
    if (used != b.size()) throw std::invalid_argument(b);
    if (lo < 1 || hi < lo) throw UsageError("--objects range " + text + " must satisfy 1 <= MIN <= MAX");
    return {lo, hi};
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception&) {
    throw UsageError("--objects expects MIN..MAX, got '" + text + "'");
  }
}

fs::path manifest_in(const fs::path& data) {
  return fs::is_directory(data) ? data / "manifest.tsv" : data;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ImageFormatError(ImageFormatError::Kind::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw ImageFormatError(ImageFormatError::Kind::kIo, "failed writing " + path.string());
}

// --- synth -----------------------------------------------------------------

struct SynthArgs {
  fs::path out;
  std::size_t count = 0;
  std::size_t side = 64;
  std::uint64_t seed = 0;
  std::string objects;
};

int run_synth(const SynthArgs& a) {
  SceneConfig cfg;
  cfg.side = a.side;
  cfg.seed = a.seed;
  if (!a.objects.empty()) std::tie(cfg.min_objects, cfg.max_objects) = parse_range(a.objects);
  cfg.validate();
  if (a.count == 0) std::cerr << "warning: --count 0 writes an empty manifest\n";
  write_dataset(a.out, cfg, a.count);
  std::cout << "wrote " << a.count << " samples to " << a.out.string() << "\n";
  return kOk;
}

// --- train -----------------------------------------------------------------

struct TrainArgs {
  fs::path data, out, log;
  std::size_t epochs = 20;
  float lr = 1e-4f;
  std::size_t batch = 4;
  std::string level = "3";
  std::size_t side = 0;
  std::uint64_t seed = 0;
};

int run_train(const TrainArgs& a) {
  const fs::path manifest = manifest_in(a.data);
  std::size_t side = a.side;
  if (side == 0) {
    const auto entries = load_manifest(manifest);
    if (entries.empty()) throw ManifestError(manifest.string() + ": no samples to train on");
    side = read_ppm(entries.front().image).shape().h;
  }
  ModelConfig mc = ModelConfig::toy(side);
  if (a.level == "full") {
    mc.full_decoder = true;
  } else {
    mc.optimization_level = std::stoul(a.level);
  }
  mc.validate();
  const std::vector<Sample> data = load_dataset(manifest, side);
  if (data.empty()) throw ManifestError(manifest.string() + ": no samples to train on");

  TrainConfig tc;
  tc.epochs = a.epochs;
  tc.lr = a.lr;
  tc.batch_size = a.batch;
  tc.seed = a.seed;
  tc.validate();

  CpdModel model = CpdModel::create(mc, a.seed);
  std::cerr << "training " << model.parameter_count() << " parameters on " << data.size() << " samples ("
            << side << "x" << side << ", level " << a.level << ")\n";
  std::string log = "epoch\tloss\tlr\n";
  const TrainResult r = fit(model, data, tc, [&](const EpochRecord& e) {
    char line[96];
    std::snprintf(line, sizeof(line), "%zu\t%.6f\t%.6g\n", e.epoch, e.loss, static_cast<double>(e.lr));
    log += line;
    std::cerr << "epoch " << line;
  });
  save_checkpoint(a.out, model, &r.adam);
  const fs::path log_path = a.log.empty() ? fs::path(a.out.string() + ".log.tsv") : a.log;
  write_text(log_path, log);
  std::cout << "checkpoint " << a.out.string() << ", log " << log_path.string() << "\n";
  return kOk;
}

// --- predict ----------------------------------------------------------------

struct PredictArgs {
  fs::path ckpt, image, out, attention_out;
  std::string branch = "detection";
};

Tensor to_input_grid(const Tensor& map, std::size_t stride) {
  NoGradScope<float> no_grad;
  return upsample_bilinear(map, stride);
}

int run_predict(const PredictArgs& a) {
  const Checkpoint ck = load_checkpoint(a.ckpt);
  const ModelConfig& mc = ck.model.config();
  const Tensor image = read_ppm(a.image);
  if (image.shape().h != mc.input_side || image.shape().w != mc.input_side) {
    throw DataError("image " + a.image.string() + " is " + std::to_string(image.shape().w) + "x" +
                    std::to_string(image.shape().h) + " but the checkpoint expects " + std::to_string(mc.input_side) +
                    "x" + std::to_string(mc.input_side) + "; resize it first");
  }
  const bool attention = a.branch == "attention";
  if (mc.full_decoder && (attention || !a.attention_out.empty())) {
    throw UsageError("full-decoder checkpoints have no attention branch");
  }
  SaliencyOutputs out;
  {
    NoGradScope<float> no_grad;
    out = ck.model.forward(image);
  }
  const std::size_t stride = mc.output_stride();
  write_pgm(a.out, to_input_grid(attention ? out.initial : out.detection, stride));
  if (!a.attention_out.empty()) write_pgm(a.attention_out, to_input_grid(out.holistic, stride));
  return kOk;
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
  fs::path ckpt, data, report;
  std::string metric_set = "saliency";
};

int run_eval(const EvalArgs& a) {
  const Checkpoint ck = load_checkpoint(a.ckpt);
  const std::vector<Sample> data = load_dataset(manifest_in(a.data), ck.model.config().input_side);
  if (data.empty()) throw ManifestError(manifest_in(a.data).string() + ": no samples to evaluate");
  std::vector<Tensor> gts;
  std::vector<std::string> ids;
  for (const auto& s : data) {
    gts.push_back(s.mask);
    ids.push_back(s.id);
  }
  std::vector<NamedReport> reports;
  if (!ck.model.config().full_decoder) {
    reports.push_back({"CPD-A", evaluate(predict_maps(ck.model, data, Branch::kAttention), gts, ids)});
  }
  reports.push_back({"CPD", evaluate(predict_maps(ck.model, data, Branch::kDetection), gts, ids)});
  const bool shadow = a.metric_set == "shadow";
  write_text(a.report, report_tsv(reports, shadow));
  std::cout << report_summary(reports, shadow);
  return kOk;
}

// --- profile ----------------------------------------------------------------

struct ProfileArgs {
  std::size_t side = 352;
  std::vector<std::size_t> channels{64, 128, 256, 512, 512};
  std::vector<std::string> modes{"full", "partial_l3", "cpd"};
  std::size_t level = 3;
  fs::path out;
};

int run_profile(const ProfileArgs& a) {
  if (a.channels.size() != kTopLevel) throw UsageError("--channels needs exactly 5 values");
  ModelConfig cfg;
  std::copy(a.channels.begin(), a.channels.end(), cfg.block_channels.begin());
  cfg.input_side = a.side;
  cfg.optimization_level = a.level;
  cfg.validate();
  std::vector<CostModel> models;
  for (const auto& m : a.modes) models.push_back(model_cost(cfg, parse_cost_mode(m)));
  const CostComparison table = compare(models);
  if (!a.out.empty()) write_text(a.out, table.tsv());
  std::cout << table.text();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cascaded partial decoder toolkit"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic saliency dataset");
  s->add_option("--out", synth.out, "Output directory")->required();
  s->add_option("--count", synth.count, "Number of samples")->required();
  s->add_option("--side", synth.side, "Image side in pixels")->capture_default_str();
  s->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();
  s->add_option("--objects", synth.objects, "Object count range MIN..MAX (default 1..2)");

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train a model on a dataset");
  t->add_option("--data", train.data, "Dataset directory or manifest")->required();
  t->add_option("--out", train.out, "Checkpoint to write")->required();
  t->add_option("--log", train.log, "Training log TSV (default CKPT.log.tsv)");
  t->add_option("--epochs", train.epochs)->capture_default_str();
  t->add_option("--lr", train.lr)->capture_default_str();
  t->add_option("--batch", train.batch)->capture_default_str();
  t->add_option("--opt-level", train.level, "Optimization level 2, 3, 4 or full")
      ->check(CLI::IsMember({"2", "3", "4", "full"}))
      ->capture_default_str();
  t->add_option("--side", train.side, "Training side (default: the dataset's)");
  t->add_option("--seed", train.seed)->capture_default_str();

  PredictArgs predict;
  auto* p = app.add_subcommand("predict", "Write a saliency map for one image");
  p->add_option("--ckpt", predict.ckpt)->required();
  p->add_option("--image", predict.image, "Input PPM")->required();
  p->add_option("--out", predict.out, "Output PGM")->required();
  p->add_option("--branch", predict.branch)
      ->check(CLI::IsMember({"attention", "detection"}))
      ->capture_default_str();
  p->add_option("--emit-attention", predict.attention_out, "Also write the holistic attention map");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Score both branches on a dataset");
  e->add_option("--ckpt", eval.ckpt)->required();
  e->add_option("--data", eval.data, "Dataset directory or manifest")->required();
  e->add_option("--report", eval.report, "Report TSV")->required();
  e->add_option("--metric-set", eval.metric_set)
      ->check(CLI::IsMember({"saliency", "shadow"}))
      ->capture_default_str();

  ProfileArgs profile;
  auto* f = app.add_subcommand("profile", "Analytical decoder cost comparison");
  f->add_option("--side", profile.side)->capture_default_str();
  f->add_option("--channels", profile.channels, "Five block widths")->delimiter(',')->capture_default_str();
  f->add_option("--modes", profile.modes, "full, partial_l2..4, cpd")->delimiter(',')->capture_default_str();
  f->add_option("--level", profile.level, "Optimization level of the cpd mode")->capture_default_str();
  f->add_option("--out", profile.out, "Comparison TSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (s->parsed()) return run_synth(synth);
    if (t->parsed()) return run_train(train);
    if (p->parsed()) return run_predict(predict);
    if (e->parsed()) return run_eval(eval);
    return run_profile(profile);
  } catch (const NonFiniteLossError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kNumeric;
  } catch (const ShapeError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kData;
  } catch (const std::invalid_argument& err) {
    std::cerr << "usage error: " << err.what() << "\n";
    return kUsage;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kData;
  }
}
