#include "uld/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "uld/errors.hpp"
#include "uld/io.hpp"
#include "uld/rng.hpp"

namespace uld::synthgen {

namespace {

bool boxes_touch(const Box& a, const Box& b) {
  // One pixel of clearance between lesions.
  return a.x1 - 1.0 <= b.x2 && b.x1 - 1.0 <= a.x2 && a.y1 - 1.0 <= b.y2 && b.y1 - 1.0 <= a.y2;
}

void bad(const std::string& msg) { throw Error(ErrorCode::kInvalidArgument, "phantom spec: " + msg); }

}  // namespace

bool PlantedLesion::contains(std::size_t r, std::size_t c) const {
  const double dx = (static_cast<double>(c) - cx) / semi_x;
  const double dy = (static_cast<double>(r) - cy) / semi_y;
  return dx * dx + dy * dy <= 1.0;
}

void validate(const PhantomSpec& spec) {
  if (spec.slices == 0 || spec.rows == 0 || spec.cols == 0) bad("dims must be positive");
  if (!(spec.spacing.x > 0.0 && spec.spacing.y > 0.0 && spec.spacing.z > 0.0)) bad("spacing must be positive");
  if (!(spec.size_lo_mm > 0.0 && spec.size_lo_mm <= spec.size_hi_mm)) bad("size range needs 0 < lo <= hi");
  if (!std::isfinite(spec.lesion_hu_delta)) bad("lesion delta must be finite");
  for (std::size_t i = 0; i < spec.organs.size(); ++i) {
    const auto& o = spec.organs[i];
    if (o.organ_code < 1 || o.organ_code > annotations::kOrganCount) bad("organ code out of 1..8");
    if (!(o.x0 < o.x1 && o.y0 < o.y1 && o.x1 <= spec.cols && o.y1 <= spec.rows)) bad("organ rect outside frame");
    for (std::size_t j = 0; j < i; ++j) {
      const auto& p = spec.organs[j];
      if (o.x0 < p.x1 && p.x0 < o.x1 && o.y0 < p.y1 && p.y0 < o.y1) bad("organ rects overlap");
    }
  }
}

std::string slice_key(std::uint64_t seed, std::size_t slice) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "synth%06llu_01_01_%03zu", static_cast<unsigned long long>(seed % 1000000), slice);
  return buf;
}

Phantom generate_phantom(const PhantomSpec& spec) {
  validate(spec);
  Rng rng(spec.seed);
  Phantom ph;
  ph.volume = Volume(spec.slices, spec.rows, spec.cols, spec.spacing, kAirHu);
  for (std::size_t s = 0; s < spec.slices; ++s) {
    ph.image_keys.push_back(slice_key(spec.seed, s));
    for (const auto& o : spec.organs) {
      for (std::size_t r = o.y0; r < o.y1; ++r) {
        for (std::size_t c = o.x0; c < o.x1; ++c) ph.volume(s, r, c) = o.hu;
      }
    }
  }

  for (const auto& organ : spec.organs) {
    for (std::size_t n = 0; n < organ.lesions; ++n) {
      bool placed = false;
      for (std::size_t attempt = 0; attempt < kMaxPlacementAttempts && !placed; ++attempt) {
        const std::size_t slice = rng.index(spec.slices);
        const double long_mm = rng.uniform(spec.size_lo_mm, spec.size_hi_mm);
        const double short_mm = rng.uniform(spec.size_lo_mm, long_mm);
        const bool long_along_x = rng.coin();
        const double dx_mm = long_along_x ? long_mm : short_mm;
        const double dy_mm = long_along_x ? short_mm : long_mm;
        const double semi_x = dx_mm / (2.0 * spec.spacing.x);
        const double semi_y = dy_mm / (2.0 * spec.spacing.y);

        // Integer centers keep the whole ellipse, and its box, on pixel centers within the organ.
        const double lo_x = static_cast<double>(organ.x0) + std::ceil(semi_x);
        const double hi_x = static_cast<double>(organ.x1) - 1.0 - std::ceil(semi_x);
        const double lo_y = static_cast<double>(organ.y0) + std::ceil(semi_y);
        const double hi_y = static_cast<double>(organ.y1) - 1.0 - std::ceil(semi_y);
        if (lo_x > hi_x || lo_y > hi_y) {
          continue;
        }
        const double cx = lo_x + static_cast<double>(rng.index(static_cast<std::size_t>(hi_x - lo_x) + 1));
        const double cy = lo_y + static_cast<double>(rng.index(static_cast<std::size_t>(hi_y - lo_y) + 1));
        const Box bbox{cx - semi_x, cy - semi_y, cx + semi_x, cy + semi_y};

        const bool clash = std::any_of(ph.lesions.begin(), ph.lesions.end(), [&](const PlantedLesion& l) {
          if (l.slice != slice) return false;
          return boxes_touch(bbox, {l.cx - l.semi_x, l.cy - l.semi_y, l.cx + l.semi_x, l.cy + l.semi_y});
        });
        if (clash) continue;

        PlantedLesion lesion{slice, cx, cy, semi_x, semi_y, organ.organ_code};
        const auto r0 = static_cast<std::size_t>(std::ceil(cy - semi_y));
        const auto r1 = static_cast<std::size_t>(std::floor(cy + semi_y));
        const auto c0 = static_cast<std::size_t>(std::ceil(cx - semi_x));
        const auto c1 = static_cast<std::size_t>(std::floor(cx + semi_x));
        for (std::size_t r = r0; r <= r1; ++r) {
          for (std::size_t c = c0; c <= c1; ++c) {
            if (lesion.contains(r, c)) ph.volume(slice, r, c) = organ.hu + spec.lesion_hu_delta;
          }
        }

        annotations::LesionRecord rec;
        rec.image_key = ph.image_keys[slice];
        rec.bbox = bbox;
        const std::array<double, 4> x_axis = {cx - semi_x, cy, cx + semi_x, cy};
        const std::array<double, 4> y_axis = {cx, cy - semi_y, cx, cy + semi_y};
        const auto& long_axis = long_along_x ? x_axis : y_axis;
        const auto& short_axis = long_along_x ? y_axis : x_axis;
        std::copy(long_axis.begin(), long_axis.end(), rec.recist.begin());
        std::copy(short_axis.begin(), short_axis.end(), rec.recist.begin() + 4);
        rec.diameters_mm = {long_mm, short_mm};
        rec.organ_code = organ.organ_code;
        const double u = rng.uniform01();
        rec.split = u < 0.70 ? annotations::Split::kTrain
                             : (u < 0.85 ? annotations::Split::kVal : annotations::Split::kTest);
        rec.pixel_spacing_mm = {spec.spacing.x, spec.spacing.y};
        rec.slice_interval_mm = spec.spacing.z;
        ph.records.push_back(std::move(rec));
        ph.lesions.push_back(lesion);
        placed = true;
      }
      if (!placed) {
        throw Error(ErrorCode::kInfeasiblePlacement,
                    "could not place lesion " + std::to_string(n) + " in organ " +
                        std::string(annotations::organ_name(organ.organ_code)));
      }
    }
  }
  return ph;
}

PhantomSpec example_spec(std::uint64_t seed) {
  PhantomSpec spec;
  spec.seed = seed;
  spec.slices = 8;
  spec.rows = 128;
  spec.cols = 128;
  spec.organs = {
      {1, 4, 4, 36, 36, 700.0, 1},     // bone
      {2, 40, 4, 88, 36, 40.0, 2},     // abdomen
      {3, 92, 4, 124, 36, 35.0, 1},    // mediastinum
      {4, 4, 40, 60, 84, 60.0, 3},     // liver
      {5, 64, 40, 124, 84, -750.0, 3}, // lung
      {6, 4, 88, 44, 124, 30.0, 2},    // kidney
      {7, 48, 88, 84, 124, 20.0, 1},   // soft tissue
      {8, 88, 88, 124, 124, 45.0, 1},  // pelvis
  };
  spec.lesion_hu_delta = 60.0;
  spec.size_lo_mm = 5.0;
  spec.size_hi_mm = 24.0;
  return spec;
}

PhantomSpec parse_spec(const std::string& json_text) {
  try {
    const auto j = nlohmann::json::parse(json_text);
    PhantomSpec spec;
    const auto dims = j.at("dims").get<std::vector<std::size_t>>();
    if (dims.size() != 3) bad("dims needs [slices, rows, cols]");
    spec.slices = dims[0];
    spec.rows = dims[1];
    spec.cols = dims[2];
    if (j.contains("spacing_mm")) {
      const auto sp = j["spacing_mm"].get<std::vector<double>>();
      if (sp.size() != 3) bad("spacing_mm needs 3 values");
      spec.spacing = {sp[0], sp[1], sp[2]};
    }
    for (const auto& o : j.at("organs")) {
      const auto rect = o.at("rect").get<std::vector<std::size_t>>();
      if (rect.size() != 4) bad("organ rect needs [x0, y0, x1, y1]");
      spec.organs.push_back({o.at("organ").get<int>(), rect[0], rect[1], rect[2], rect[3], o.at("hu").get<double>(),
                             o.value("lesions", std::size_t{0})});
    }
    spec.lesion_hu_delta = j.value("lesion_hu_delta", spec.lesion_hu_delta);
    if (j.contains("size_range_mm")) {
      const auto range = j["size_range_mm"].get<std::vector<double>>();
      if (range.size() != 2) bad("size_range_mm needs [lo, hi]");
      spec.size_lo_mm = range[0];
      spec.size_hi_mm = range[1];
    }
    spec.seed = j.value("seed", std::uint64_t{0});
    validate(spec);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("phantom spec: ") + e.what());
  }
}

PhantomSpec load_spec(const std::filesystem::path& path) { return parse_spec(io::read_file(path)); }

std::vector<eval::Detection> oracle_detections(const Phantom& phantom) {
  std::vector<eval::Detection> dets;
  for (const auto& r : phantom.records) dets.push_back({r.image_key, r.bbox, 1.0});
  return dets;
}

void write_phantom(const Phantom& phantom, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  io::write_volume(phantom.volume, dir / "volume.json");
  io::write_file(dir / "annotations.csv", annotations::serialize_annotations(phantom.records));
  io::write_file(dir / "oracle_detections.jsonl", eval::detections_to_jsonl(oracle_detections(phantom)));
  std::string images;
  for (const auto& k : phantom.image_keys) images += k + "\n";
  io::write_file(dir / "images.txt", images);
}

}  // namespace uld::synthgen
