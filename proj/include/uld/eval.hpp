#pragma once

#include <istream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "uld/annotations.hpp"
#include "uld/box.hpp"

namespace uld::eval {

struct Detection {
  std::string image_key;
  Box box;
  double score = 0.0;

  bool operator==(const Detection&) const = default;
};

struct GroundTruth {
  std::string image_key;
  Box box;
  std::optional<int> organ_code;
  std::optional<double> long_diameter_mm;
};

std::vector<GroundTruth> ground_truth_from(std::span<const annotations::LesionRecord> records);

enum class Label { kTruePositive, kFalsePositive };

struct MatchResult {
  /// Detection indices in processing order: score descending, ties by image_key then box.
  std::vector<std::size_t> order;
  /// Per detection (input indexing).
  std::vector<Label> labels;
  std::vector<std::optional<std::size_t>> matched_gt;
  /// Per ground truth.
  std::vector<bool> gt_matched;
};

/// Greedy matching: each detection, in order, takes the unmatched same-image gt
/// with the highest IoU; it is a TP only if that IoU is strictly greater than the threshold.
MatchResult match_detections(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                             double iou_threshold = 0.5);

struct FrocPoint {
  double fp_per_image = 0.0;
  double sensitivity = 0.0;
};

struct FrocCurve {
  std::vector<FrocPoint> points;
  double average = 0.0;
};

inline const std::vector<double> kDefaultFpRates = {0.5, 1.0, 2.0, 4.0};

struct EvalOptions {
  std::vector<double> fp_rates = kDefaultFpRates;
  double iou_threshold = 0.5;
  /// Images counted in the FP denominator besides those holding a gt (images without lesions).
  std::vector<std::string> extra_image_keys;
  /// Replaces the image count in the FP-per-image denominator when set.
  std::optional<double> fp_denominator;
};

/// Step FROC: at each rate, the best TP/|gts| over score thresholds whose
/// FP/num_images stays within the rate. Throws kEmptyGroundTruth.
FrocCurve sensitivity_at_fp(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                            const EvalOptions& opts = {});

enum class Strata { kOrgan, kSize };

struct StratumRow {
  std::string name;
  std::size_t num_gts = 0;
  std::optional<FrocCurve> curve;  // empty when the stratum holds no gt
};

/// One row per stratum (8 organs in code order, or small/medium/large).
/// Sensitivity is stratum-local; false positives are counted image-wide.
/// Throws kMissingAttribute when a gt lacks the stratum attribute.
std::vector<StratumRow> stratified_report(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                                          Strata strata, const EvalOptions& opts = {});

/// Header `stratum,FP@<rate>...,Average`; percentages with 2 decimals, NA for empty strata.
std::string report_csv(std::span<const StratumRow> rows, std::span<const double> fp_rates);

/// Reads {"image_key": str, "box": [x1, y1, x2, y2], "score": num} per line.
std::vector<Detection> parse_detections(std::istream& in);
std::vector<Detection> load_detections(const std::string& path);
std::string detections_to_jsonl(std::span<const Detection> dets);

/// One image key per line; blank lines ignored.
std::vector<std::string> load_image_list(const std::string& path);

}  // namespace uld::eval
