#include "cpd/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace cpd {

namespace {

void check_pair(const Tensor& map, const Tensor& gt) {
  if (map.shape() != gt.shape()) {
    throw ShapeError("prediction " + map.shape().str() + " and ground truth " + gt.shape().str() + " differ");
  }
  if (map.numel() == 0) throw ShapeError("empty prediction");
}

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

Counts confusion(const Tensor& map, const Tensor& gt, double threshold) {
  Counts c;
  const float* m = map.ptr();
  const float* g = gt.ptr();
  for (std::size_t i = 0; i < map.numel(); ++i) {
    const bool p = predicted_positive(m[i], threshold);
    const bool t = g[i] >= 0.5f;
    c.tp += p && t;
    c.fp += p && !t;
    c.fn += !p && t;
    c.tn += !p && !t;
  }
  return c;
}

PrPoint pr_from(const Counts& c, double threshold) {
  PrPoint pt{threshold, 0.0, 0.0};
  const std::size_t predicted = c.tp + c.fp;
  const std::size_t actual = c.tp + c.fn;
  if (predicted == 0) {
    pt.precision = actual == 0 ? 1.0 : 0.0;
    pt.recall = actual == 0 ? 1.0 : 0.0;
    return pt;
  }
  pt.precision = static_cast<double>(c.tp) / static_cast<double>(predicted);
  pt.recall = actual == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(actual);
  return pt;
}

}  // namespace

double mae(const Tensor& map, const Tensor& gt) {
  check_pair(map, gt);
  double s = 0.0;
  for (std::size_t i = 0; i < map.numel(); ++i) s += std::abs(static_cast<double>(map.ptr()[i]) - gt.ptr()[i]);
  return s / static_cast<double>(map.numel());
}

PrPoint precision_recall(const Tensor& map, const Tensor& gt, double threshold) {
  check_pair(map, gt);
  return pr_from(confusion(map, gt, threshold), threshold);
}

double f_beta(double precision, double recall, double beta2) {
  const double denom = beta2 * precision + recall;
  return denom > 0.0 ? (1.0 + beta2) * precision * recall / denom : 0.0;
}

FMeasure f_measure(std::span<const Tensor> maps, std::span<const Tensor> gts, double beta2) {
  if (maps.empty()) throw std::invalid_argument("f_measure: empty dataset");
  if (maps.size() != gts.size()) throw std::invalid_argument("f_measure: prediction and ground-truth counts differ");
  FMeasure out;
  out.curve.resize(256);
  for (std::size_t t = 0; t < 256; ++t) out.curve[t].threshold = static_cast<double>(t) / 255.0;

  for (std::size_t k = 0; k < maps.size(); ++k) {
    check_pair(maps[k], gts[k]);
    // Histogram of positive and negative pixels by the lowest threshold index
    // that still keeps them positive; a cumulative sum gives every sweep
    // point in one pass.
    std::array<std::size_t, 257> pos{}, neg{};
    const float* m = maps[k].ptr();
    const float* g = gts[k].ptr();
    for (std::size_t i = 0; i < maps[k].numel(); ++i) {
      const float v = m[i];
      std::size_t top = 0;  // positive for threshold indices [0, top)
      if (v > 0.0f) {
        top = static_cast<std::size_t>(std::clamp(std::floor(static_cast<double>(v) * 255.0), 0.0, 255.0)) + 1;
        while (top > 0 && !predicted_positive(v, static_cast<double>(top - 1) / 255.0)) --top;
        while (top < 256 && predicted_positive(v, static_cast<double>(top) / 255.0)) ++top;
      }
      (g[i] >= 0.5f ? pos : neg)[top] += 1;
    }
    std::size_t actual = 0;
    for (std::size_t b = 0; b < 257; ++b) actual += pos[b];
    // tp(t) = positives with top > t
    std::size_t tp = 0, fp = 0;
    for (std::size_t b = 257; b-- > 1;) {
      tp += pos[b];
      fp += neg[b];
      const std::size_t t = b - 1;
      const PrPoint p = pr_from({tp, fp, actual - tp, 0}, out.curve[t].threshold);
      out.curve[t].precision += p.precision;
      out.curve[t].recall += p.recall;
    }
    const Tensor& map = maps[k];
    double mean = 0.0;
    for (float v : map.data()) mean += v;
    mean /= static_cast<double>(map.numel());
    const PrPoint adaptive = precision_recall(map, gts[k], std::min(2.0 * mean, 1.0));
    out.avg_f += f_beta(adaptive.precision, adaptive.recall, beta2);
  }
  const double n = static_cast<double>(maps.size());
  out.avg_f /= n;
  for (auto& p : out.curve) {
    p.precision /= n;
    p.recall /= n;
    const double f = f_beta(p.precision, p.recall, beta2);
    if (f > out.max_f) {
      out.max_f = f;
      out.best_threshold = p.threshold;
    }
  }
  return out;
}

BerResult ber(const Tensor& map, const Tensor& gt, double threshold) {
  check_pair(map, gt);
  Counts c;
  for (std::size_t i = 0; i < map.numel(); ++i) {
    const bool p = static_cast<double>(map.ptr()[i]) >= threshold;
    const bool t = gt.ptr()[i] >= 0.5f;
    c.tp += p && t;
    c.fp += p && !t;
    c.fn += !p && t;
    c.tn += !p && !t;
  }
  const std::size_t pos = c.tp + c.fn, neg = c.tn + c.fp;
  BerResult r;
  double rate_sum = 0.0;
  int classes = 0;
  if (pos > 0) {
    rate_sum += static_cast<double>(c.tp) / static_cast<double>(pos);
    ++classes;
  }
  if (neg > 0) {
    rate_sum += static_cast<double>(c.tn) / static_cast<double>(neg);
    ++classes;
  }
  r.single_class = classes == 1;
  r.ber = 100.0 * (1.0 - rate_sum / classes);
  return r;
}

double iou(const Tensor& map, const Tensor& gt, double threshold) {
  check_pair(map, gt);
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < map.numel(); ++i) {
    const bool p = static_cast<double>(map.ptr()[i]) >= threshold;
    const bool t = gt.ptr()[i] >= 0.5f;
    inter += p && t;
    uni += p || t;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

MetricReport evaluate(std::span<const Tensor> maps, std::span<const Tensor> gts, std::span<const std::string> ids) {
  if (maps.empty()) throw std::invalid_argument("evaluate: empty dataset");
  if (maps.size() != gts.size()) throw std::invalid_argument("evaluate: prediction and ground-truth counts differ");
  MetricReport r;
  const FMeasure f = f_measure(maps, gts);
  r.max_f = f.max_f;
  r.avg_f = f.avg_f;
  for (std::size_t k = 0; k < maps.size(); ++k) {
    ImageMetrics m;
    m.id = k < ids.size() ? ids[k] : std::to_string(k);
    m.mae = mae(maps[k], gts[k]);
    const BerResult b = ber(maps[k], gts[k]);
    m.ber = b.ber;
    m.ber_single_class = b.single_class;
    m.iou = iou(maps[k], gts[k]);
    r.mae += m.mae;
    r.ber += m.ber;
    r.mean_iou += m.iou;
    r.ber_flagged += b.single_class;
    r.per_image.push_back(std::move(m));
  }
  const double n = static_cast<double>(maps.size());
  r.mae /= n;
  r.ber /= n;
  r.mean_iou /= n;
  return r;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

std::string report_tsv(std::span<const NamedReport> reports, bool with_ber) {
  std::string s = "model\tmae\tmax_f\tavg_f\tmean_iou";
  if (with_ber) s += "\tber\tber_single_class_images";
  s += "\n";
  for (const auto& [name, r] : reports) {
    s += name + "\t" + fmt(r.mae) + "\t" + fmt(r.max_f) + "\t" + fmt(r.avg_f) + "\t" + fmt(r.mean_iou);
    if (with_ber) s += "\t" + fmt(r.ber) + "\t" + std::to_string(r.ber_flagged);
    s += "\n";
  }
  if (reports.empty()) return s;
  s += "\nimage";
  for (const auto& [name, r] : reports) {
    s += "\t" + name + ".mae\t" + name + ".iou";
    if (with_ber) s += "\t" + name + ".ber";
  }
  s += "\n";
  for (std::size_t k = 0; k < reports[0].report.per_image.size(); ++k) {
    s += reports[0].report.per_image[k].id;
    for (const auto& [name, r] : reports) {
      const ImageMetrics& m = r.per_image.at(k);
      s += "\t" + fmt(m.mae) + "\t" + fmt(m.iou);
      if (with_ber) s += "\t" + fmt(m.ber);
    }
    s += "\n";
  }
  return s;
}

std::string report_summary(std::span<const NamedReport> reports, bool with_ber) {
  std::string s;
  char line[160];
  std::snprintf(line, sizeof(line), "%-12s %8s %8s %8s %8s", "model", "MAE", "maxF", "avgF", "mIoU");
  s += line;
  if (with_ber) s += "      BER";
  s += "\n";
  for (const auto& [name, r] : reports) {
    std::snprintf(line, sizeof(line), "%-12s %8.4f %8.4f %8.4f %8.4f", name.c_str(), r.mae, r.max_f, r.avg_f,
                  r.mean_iou);
    s += line;
    if (with_ber) {
      std::snprintf(line, sizeof(line), " %8.3f", r.ber);
      s += line;
      if (r.ber_flagged > 0) s += "  (" + std::to_string(r.ber_flagged) + " single-class images)";
    }
    s += "\n";
  }
  return s;
}

}  // namespace cpd
