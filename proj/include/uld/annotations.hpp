#pragma once

#include <array>
#include <istream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uld/box.hpp"

namespace uld::annotations {

enum class Split { kTrain, kVal, kTest };

enum class SizeBucket { kSmall, kMedium, kLarge };

inline constexpr int kOrganCount = 8;

/// Organ names indexed by code - 1: bone, abdomen, mediastinum, liver, lung,
/// kidney, soft-tissue, pelvis.
std::string_view organ_name(int organ_code);
std::string_view split_name(Split split);
std::string_view bucket_name(SizeBucket bucket);

struct LesionRecord {
  std::string image_key;
  Box bbox;
  /// Long-axis endpoint pair then short-axis endpoint pair: x, y, x, y, x, y, x, y.
  std::array<double, 8> recist{};
  /// Long then short diameter in millimetres.
  std::array<double, 2> diameters_mm{};
  int organ_code = 1;
  Split split = Split::kTrain;
  std::array<double, 2> pixel_spacing_mm{1.0, 1.0};
  double slice_interval_mm = 1.0;

  double long_diameter_mm() const noexcept { return diameters_mm[0]; }

  bool operator==(const LesionRecord&) const = default;
};

/// Header line of the annotation CSV, without the trailing newline.
inline constexpr std::string_view kCsvHeader =
    "image_key,x1,y1,x2,y2,recist,long_mm,short_mm,organ,split,spacing_x,spacing_y,slice_mm";

/// Throws Error(kInvariantViolation | kUnknownOrganCode) on the first broken invariant.
void validate(const LesionRecord& record);

/// Parses the annotation CSV. Failures throw ParseError carrying the 1-based
/// line and column (field index) of the first violation.
std::vector<LesionRecord> parse_annotations(std::istream& in);
std::vector<LesionRecord> parse_annotations(std::string_view text);
std::vector<LesionRecord> load_annotations(const std::string& path);

/// Emits the header plus one LF-terminated row per record, numbers in shortest
/// round-trip form.
std::string serialize_annotations(std::span<const LesionRecord> records);

struct SplitParts {
  std::vector<LesionRecord> train;
  std::vector<LesionRecord> val;
  std::vector<LesionRecord> test;
};

SplitParts split_records(std::span<const LesionRecord> records);

/// small: d < 10 mm, medium: 10 <= d <= 30 mm, large: d > 30 mm (long diameter).
SizeBucket size_bucket(double long_diameter_mm);
SizeBucket size_bucket(const LesionRecord& record);

}  // namespace uld::annotations
