#include "uld/annotations.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "uld/errors.hpp"
#include "uld/text.hpp"

namespace uld::annotations {

namespace {

constexpr std::array<std::string_view, kOrganCount> kOrganNames = {
    "bone", "abdomen", "mediastinum", "liver", "lung", "kidney", "soft-tissue", "pelvis"};

constexpr std::size_t kColumnCount = 13;

// 1-based column indices in the CSV header.
enum Column : std::size_t {
  kColKey = 1,
  kColX1,
  kColY1,
  kColX2,
  kColY2,
  kColRecist,
  kColLong,
  kColShort,
  kColOrgan,
  kColSplit,
  kColSpacingX,
  kColSpacingY,
  kColSlice,
};

[[noreturn]] void fail(ErrorCode code, std::size_t line, std::size_t column, const std::string& msg) {
  throw ParseError(code, line, column, msg);
}

double field_double(std::string_view field, std::size_t line, std::size_t column) {
  auto v = text::parse_double(field);
  if (!v) fail(ErrorCode::kMalformedRow, line, column, "not a number: '" + std::string(field) + "'");
  return *v;
}

LesionRecord parse_row(std::string_view row, std::size_t line) {
  const auto fields = text::split(row, ',');
  if (fields.size() != kColumnCount) {
    fail(ErrorCode::kMalformedRow, line, 0,
         "expected " + std::to_string(kColumnCount) + " fields, got " + std::to_string(fields.size()));
  }
  auto field = [&](Column c) { return fields[c - 1]; };

  LesionRecord r;
  r.image_key = std::string(text::trim(field(kColKey)));
  if (r.image_key.empty()) fail(ErrorCode::kMalformedRow, line, kColKey, "empty image_key");

  r.bbox.x1 = field_double(field(kColX1), line, kColX1);
  r.bbox.y1 = field_double(field(kColY1), line, kColY1);
  r.bbox.x2 = field_double(field(kColX2), line, kColX2);
  r.bbox.y2 = field_double(field(kColY2), line, kColY2);

  const auto recist = text::split(field(kColRecist), ';');
  if (recist.size() != r.recist.size()) {
    fail(ErrorCode::kMalformedRow, line, kColRecist,
         "recist needs 8 values, got " + std::to_string(recist.size()));
  }
  for (std::size_t i = 0; i < recist.size(); ++i) r.recist[i] = field_double(recist[i], line, kColRecist);

  r.diameters_mm[0] = field_double(field(kColLong), line, kColLong);
  r.diameters_mm[1] = field_double(field(kColShort), line, kColShort);

  auto organ = text::parse_int(field(kColOrgan));
  if (!organ) fail(ErrorCode::kMalformedRow, line, kColOrgan, "organ must be an integer");
  r.organ_code = static_cast<int>(*organ);

  const auto split = text::trim(field(kColSplit));
  if (split == "train") {
    r.split = Split::kTrain;
  } else if (split == "val") {
    r.split = Split::kVal;
  } else if (split == "test") {
    r.split = Split::kTest;
  } else {
    fail(ErrorCode::kMalformedRow, line, kColSplit, "unknown split '" + std::string(split) + "'");
  }

  r.pixel_spacing_mm[0] = field_double(field(kColSpacingX), line, kColSpacingX);
  r.pixel_spacing_mm[1] = field_double(field(kColSpacingY), line, kColSpacingY);
  r.slice_interval_mm = field_double(field(kColSlice), line, kColSlice);

  // Re-raise invariant failures with the column that caused them.
  if (!(r.bbox.x2 > r.bbox.x1)) fail(ErrorCode::kInvariantViolation, line, kColX2, "x2 must exceed x1");
  if (!(r.bbox.y2 > r.bbox.y1)) fail(ErrorCode::kInvariantViolation, line, kColY2, "y2 must exceed y1");
  if (!(r.diameters_mm[1] > 0.0)) {
    fail(ErrorCode::kInvariantViolation, line, kColShort, "short diameter must be positive");
  }
  if (!(r.diameters_mm[0] >= r.diameters_mm[1])) {
    fail(ErrorCode::kInvariantViolation, line, kColLong, "long diameter must be >= short diameter");
  }
  if (r.organ_code < 1 || r.organ_code > kOrganCount) {
    fail(ErrorCode::kUnknownOrganCode, line, kColOrgan, "organ code " + std::to_string(r.organ_code));
  }
  if (!(r.pixel_spacing_mm[0] > 0.0)) fail(ErrorCode::kInvariantViolation, line, kColSpacingX, "spacing_x must be positive");
  if (!(r.pixel_spacing_mm[1] > 0.0)) fail(ErrorCode::kInvariantViolation, line, kColSpacingY, "spacing_y must be positive");
  if (!(r.slice_interval_mm > 0.0)) fail(ErrorCode::kInvariantViolation, line, kColSlice, "slice_mm must be positive");
  return r;
}

}  // namespace

std::string_view organ_name(int organ_code) {
  if (organ_code < 1 || organ_code > kOrganCount) {
    throw Error(ErrorCode::kUnknownOrganCode, "organ code " + std::to_string(organ_code));
  }
  return kOrganNames[static_cast<std::size_t>(organ_code - 1)];
}

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

std::string_view bucket_name(SizeBucket bucket) {
  switch (bucket) {
    case SizeBucket::kSmall: return "small";
    case SizeBucket::kMedium: return "medium";
    case SizeBucket::kLarge: return "large";
  }
  return "small";
}

void validate(const LesionRecord& r) {
  if (r.image_key.empty()) throw Error(ErrorCode::kInvariantViolation, "empty image_key");
  if (!r.bbox.valid()) throw Error(ErrorCode::kInvariantViolation, "bbox must have x2 > x1 and y2 > y1");
  if (!(r.diameters_mm[1] > 0.0 && r.diameters_mm[0] >= r.diameters_mm[1])) {
    throw Error(ErrorCode::kInvariantViolation, "diameters must satisfy long >= short > 0");
  }
  if (r.organ_code < 1 || r.organ_code > kOrganCount) {
    throw Error(ErrorCode::kUnknownOrganCode, "organ code " + std::to_string(r.organ_code));
  }
  if (!(r.pixel_spacing_mm[0] > 0.0 && r.pixel_spacing_mm[1] > 0.0 && r.slice_interval_mm > 0.0)) {
    throw Error(ErrorCode::kInvariantViolation, "spacings must be positive");
  }
}

std::vector<LesionRecord> parse_annotations(std::istream& in) {
  std::vector<LesionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!header_seen) {
      if (line != kCsvHeader) fail(ErrorCode::kMalformedRow, line_no, 0, "missing or unexpected header");
      header_seen = true;
      continue;
    }
    if (text::trim(line).empty()) continue;
    records.push_back(parse_row(line, line_no));
  }
  if (!header_seen) fail(ErrorCode::kMalformedRow, 1, 0, "empty input, header expected");
  return records;
}

std::vector<LesionRecord> parse_annotations(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_annotations(in);
}

std::vector<LesionRecord> load_annotations(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  return parse_annotations(in);
}

std::string serialize_annotations(std::span<const LesionRecord> records) {
  using text::format_double;
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : records) {
    validate(r);
    out += r.image_key;
    for (double v : {r.bbox.x1, r.bbox.y1, r.bbox.x2, r.bbox.y2}) out += "," + format_double(v);
    out += ',';
    for (std::size_t i = 0; i < r.recist.size(); ++i) {
      if (i > 0) out += ';';
      out += format_double(r.recist[i]);
    }
    out += "," + format_double(r.diameters_mm[0]) + "," + format_double(r.diameters_mm[1]);
    out += "," + std::to_string(r.organ_code) + "," + std::string(split_name(r.split));
    out += "," + format_double(r.pixel_spacing_mm[0]) + "," + format_double(r.pixel_spacing_mm[1]);
    out += "," + format_double(r.slice_interval_mm) + "\n";
  }
  return out;
}

SplitParts split_records(std::span<const LesionRecord> records) {
  SplitParts parts;
  for (const auto& r : records) {
    switch (r.split) {
      case Split::kTrain: parts.train.push_back(r); break;
      case Split::kVal: parts.val.push_back(r); break;
      case Split::kTest: parts.test.push_back(r); break;
    }
  }
  return parts;
}

SizeBucket size_bucket(double long_diameter_mm) {
  if (long_diameter_mm < 10.0) return SizeBucket::kSmall;
  if (long_diameter_mm <= 30.0) return SizeBucket::kMedium;
  return SizeBucket::kLarge;
}

SizeBucket size_bucket(const LesionRecord& record) { return size_bucket(record.long_diameter_mm()); }

}  // namespace uld::annotations
