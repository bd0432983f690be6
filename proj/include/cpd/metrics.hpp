#pragma once

#include <span>
#include <string>
#include <vector>

#include "cpd/tensor.hpp"

namespace cpd {

/// A prediction counts as positive at threshold t when v > 0 and v >= t, so
/// an all-zero map is empty at every threshold.
inline bool predicted_positive(float v, double t) { return v > 0.0f && static_cast<double>(v) >= t; }

/// Mean |map - gt| over pixels of one image.
double mae(const Tensor& map, const Tensor& gt);

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

/// Precision and recall of one binarized prediction. An empty prediction
/// has precision 0 unless the ground truth is also empty (then P = R = 1);
/// an empty ground truth has recall 1.
PrPoint precision_recall(const Tensor& map, const Tensor& gt, double threshold);

/// (1 + b2) P R / (b2 P + R), 0 when the denominator is 0.
double f_beta(double precision, double recall, double beta2 = 0.3);

struct FMeasure {
  double max_f = 0.0;
  double avg_f = 0.0;
  double best_threshold = 0.0;
  std::vector<PrPoint> curve;  ///< 256 points, dataset-averaged P and R at i/255
};

/// maxF over the 256-threshold sweep with P and R averaged across images,
/// and avgF from per-image adaptive thresholds min(2 mean, 1).
FMeasure f_measure(std::span<const Tensor> maps, std::span<const Tensor> gts, double beta2 = 0.3);

struct BerResult {
  double ber = 0.0;  ///< percent
  /// Ground truth had one class; only the present class's rate was used.
  bool single_class = false;
};

BerResult ber(const Tensor& map, const Tensor& gt, double threshold = 0.5);

/// Intersection over union of the thresholded prediction; 1 when both are
/// empty.
double iou(const Tensor& map, const Tensor& gt, double threshold = 0.5);

struct ImageMetrics {
  std::string id;
  double mae = 0.0;
  double ber = 0.0;
  double iou = 0.0;
  bool ber_single_class = false;
};

struct MetricReport {
  double mae = 0.0;
  double max_f = 0.0;
  double avg_f = 0.0;
  double ber = 0.0;
  double mean_iou = 0.0;
  std::size_t ber_flagged = 0;  ///< images whose BER used one class only
  std::vector<ImageMetrics> per_image;
};

/// Dataset metrics; every per-image metric is averaged over images. Throws
/// std::invalid_argument on an empty dataset, ShapeError on mismatches.
MetricReport evaluate(std::span<const Tensor> maps, std::span<const Tensor> gts,
                      std::span<const std::string> ids = {});

struct NamedReport {
  std::string name;
  MetricReport report;
};

/// One summary row per report: name, mae, maxF, avgF, mIoU and optionally
/// BER; then a blank line and a per-image table with one column group per
/// report.
std::string report_tsv(std::span<const NamedReport> reports, bool with_ber);
/// Aligned text block for terminals.
std::string report_summary(std::span<const NamedReport> reports, bool with_ber);

}  // namespace cpd
