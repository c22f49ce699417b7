#include "uld/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <unordered_map>

#include <json.hpp>

#include "uld/anchors.hpp"
#include "uld/errors.hpp"
#include "uld/text.hpp"

namespace uld::eval {

namespace {

// Cumulative counts after each tie group of the processing order, starting at (0, 0).
struct SweepPoint {
  std::size_t false_positives = 0;
  std::vector<std::size_t> true_positives;  // one counter per stratum
};

std::vector<SweepPoint> sweep(std::span<const Detection> dets, const MatchResult& match,
                              std::span<const std::size_t> gt_stratum, std::size_t num_strata) {
  std::vector<SweepPoint> points;
  SweepPoint cur{0, std::vector<std::size_t>(num_strata, 0)};
  points.push_back(cur);
  for (std::size_t k = 0; k < match.order.size(); ++k) {
    const auto d = match.order[k];
    if (match.labels[d] == Label::kTruePositive) {
      ++cur.true_positives[gt_stratum[*match.matched_gt[d]]];
    } else {
      ++cur.false_positives;
    }
    const bool group_end = k + 1 == match.order.size() || dets[match.order[k + 1]].score != dets[d].score;
    if (group_end) points.push_back(cur);
  }
  return points;
}

double image_count(std::span<const GroundTruth> gts, const EvalOptions& opts) {
  if (opts.fp_denominator) {
    if (!(*opts.fp_denominator > 0.0)) throw Error(ErrorCode::kInvalidArgument, "fp denominator must be positive");
    return *opts.fp_denominator;
  }
  std::set<std::string> images(opts.extra_image_keys.begin(), opts.extra_image_keys.end());
  for (const auto& g : gts) images.insert(g.image_key);
  return static_cast<double>(images.size());
}

FrocCurve curve_for(std::span<const SweepPoint> points, std::size_t stratum, std::size_t num_gts,
                    double num_images, std::span<const double> rates) {
  FrocCurve curve;
  for (double rate : rates) {
    std::size_t best = 0;
    for (const auto& p : points) {
      if (static_cast<double>(p.false_positives) / num_images <= rate) {
        best = std::max(best, p.true_positives[stratum]);
      }
    }
    curve.points.push_back({rate, static_cast<double>(best) / static_cast<double>(num_gts)});
  }
  double sum = 0.0;
  for (const auto& p : curve.points) sum += p.sensitivity;
  curve.average = curve.points.empty() ? 0.0 : sum / static_cast<double>(curve.points.size());
  return curve;
}

}  // namespace

std::vector<GroundTruth> ground_truth_from(std::span<const annotations::LesionRecord> records) {
  std::vector<GroundTruth> gts;
  gts.reserve(records.size());
  for (const auto& r : records) gts.push_back({r.image_key, r.bbox, r.organ_code, r.long_diameter_mm()});
  return gts;
}

MatchResult match_detections(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                             double iou_threshold) {
  MatchResult result;
  result.order.resize(dets.size());
  std::iota(result.order.begin(), result.order.end(), std::size_t{0});
  std::stable_sort(result.order.begin(), result.order.end(), [&](std::size_t a, std::size_t b) {
    const auto& da = dets[a];
    const auto& db = dets[b];
    if (da.score != db.score) return da.score > db.score;
    if (da.image_key != db.image_key) return da.image_key < db.image_key;
    return da.box < db.box;
  });

  std::unordered_map<std::string, std::vector<std::size_t>> gts_by_image;
  for (std::size_t g = 0; g < gts.size(); ++g) gts_by_image[gts[g].image_key].push_back(g);

  result.labels.assign(dets.size(), Label::kFalsePositive);
  result.matched_gt.assign(dets.size(), std::nullopt);
  result.gt_matched.assign(gts.size(), false);
  for (const auto d : result.order) {
    const auto it = gts_by_image.find(dets[d].image_key);
    if (it == gts_by_image.end()) continue;
    std::optional<std::size_t> best;
    double best_iou = -1.0;
    for (const auto g : it->second) {
      if (result.gt_matched[g]) continue;
      const double v = anchors::iou(dets[d].box, gts[g].box);
      if (v > best_iou) {
        best_iou = v;
        best = g;
      }
    }
    if (best && best_iou > iou_threshold) {
      result.labels[d] = Label::kTruePositive;
      result.matched_gt[d] = best;
      result.gt_matched[*best] = true;
    }
  }
  return result;
}

FrocCurve sensitivity_at_fp(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                            const EvalOptions& opts) {
  if (gts.empty()) throw Error(ErrorCode::kEmptyGroundTruth, "no ground-truth lesions");
  const double num_images = image_count(gts, opts);
  const auto match = match_detections(dets, gts, opts.iou_threshold);
  const std::vector<std::size_t> one_stratum(gts.size(), 0);
  const auto points = sweep(dets, match, one_stratum, 1);
  return curve_for(points, 0, gts.size(), num_images, opts.fp_rates);
}

std::vector<StratumRow> stratified_report(std::span<const Detection> dets, std::span<const GroundTruth> gts,
                                          Strata strata, const EvalOptions& opts) {
  if (gts.empty()) throw Error(ErrorCode::kEmptyGroundTruth, "no ground-truth lesions");
  std::vector<StratumRow> rows;
  std::vector<std::size_t> gt_stratum(gts.size());
  if (strata == Strata::kOrgan) {
    for (int code = 1; code <= annotations::kOrganCount; ++code) {
      rows.push_back({std::string(annotations::organ_name(code)), 0, std::nullopt});
    }
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const auto& organ = gts[g].organ_code;
      if (!organ) throw Error(ErrorCode::kMissingAttribute, "gt " + std::to_string(g) + " has no organ code");
      if (*organ < 1 || *organ > annotations::kOrganCount) {
        throw Error(ErrorCode::kUnknownOrganCode, "organ code " + std::to_string(*organ));
      }
      gt_stratum[g] = static_cast<std::size_t>(*organ - 1);
    }
  } else {
    for (auto b : {annotations::SizeBucket::kSmall, annotations::SizeBucket::kMedium, annotations::SizeBucket::kLarge}) {
      rows.push_back({std::string(annotations::bucket_name(b)), 0, std::nullopt});
    }
    for (std::size_t g = 0; g < gts.size(); ++g) {
      const auto& d = gts[g].long_diameter_mm;
      if (!d) throw Error(ErrorCode::kMissingAttribute, "gt " + std::to_string(g) + " has no diameter");
      gt_stratum[g] = static_cast<std::size_t>(annotations::size_bucket(*d));
    }
  }
  for (auto s : gt_stratum) ++rows[s].num_gts;

  const double num_images = image_count(gts, opts);
  const auto match = match_detections(dets, gts, opts.iou_threshold);
  const auto points = sweep(dets, match, gt_stratum, rows.size());
  for (std::size_t s = 0; s < rows.size(); ++s) {
    if (rows[s].num_gts > 0) rows[s].curve = curve_for(points, s, rows[s].num_gts, num_images, opts.fp_rates);
  }
  return rows;
}

std::string report_csv(std::span<const StratumRow> rows, std::span<const double> fp_rates) {
  std::string out = "stratum";
  for (double r : fp_rates) out += ",FP@" + text::format_double(r);
  out += ",Average\n";
  for (const auto& row : rows) {
    out += row.name;
    if (!row.curve) {
      for (std::size_t i = 0; i <= fp_rates.size(); ++i) out += ",NA";
    } else {
      for (const auto& p : row.curve->points) out += "," + text::format_fixed(100.0 * p.sensitivity, 2);
      out += "," + text::format_fixed(100.0 * row.curve->average, 2);
    }
    out += "\n";
  }
  return out;
}

std::vector<Detection> parse_detections(std::istream& in) {
  std::vector<Detection> dets;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      const auto box = j.at("box").get<std::vector<double>>();
      if (box.size() != 4) throw ParseError(ErrorCode::kMalformedRow, line_no, 0, "box needs 4 numbers");
      Detection d{j.at("image_key").get<std::string>(), {box[0], box[1], box[2], box[3]}, j.at("score").get<double>()};
      if (!std::isfinite(d.score)) throw ParseError(ErrorCode::kInvariantViolation, line_no, 0, "score not finite");
      if (!d.box.valid()) throw ParseError(ErrorCode::kInvariantViolation, line_no, 0, "box needs x2 > x1 and y2 > y1");
      dets.push_back(std::move(d));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(ErrorCode::kMalformedRow, line_no, 0, e.what());
    }
  }
  return dets;
}

std::vector<Detection> load_detections(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  return parse_detections(in);
}

std::string detections_to_jsonl(std::span<const Detection> dets) {
  std::string out;
  for (const auto& d : dets) {
    nlohmann::ordered_json j;
    j["image_key"] = d.image_key;
    j["box"] = {d.box.x1, d.box.y1, d.box.x2, d.box.y2};
    j["score"] = d.score;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<std::string> load_image_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::vector<std::string> keys;
  std::string line;
  while (std::getline(in, line)) {
    const auto key = text::trim(line);
    if (!key.empty()) keys.emplace_back(key);
  }
  return keys;
}

}  // namespace uld::eval
