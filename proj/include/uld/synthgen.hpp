#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "uld/annotations.hpp"
#include "uld/eval.hpp"
#include "uld/image.hpp"

namespace uld::synthgen {

inline constexpr double kAirHu = -1024.0;
inline constexpr std::size_t kMaxPlacementAttempts = 1000;

/// Rectangular organ region, half-open pixel bounds.
struct OrganRegion {
  int organ_code = 1;
  std::size_t x0 = 0;
  std::size_t y0 = 0;
  std::size_t x1 = 0;
  std::size_t y1 = 0;
  double hu = 0.0;
  std::size_t lesions = 0;
};

struct PhantomSpec {
  std::size_t slices = 8;
  std::size_t rows = 128;
  std::size_t cols = 128;
  Spacing spacing{0.8, 0.8, 2.0};
  std::vector<OrganRegion> organs;
  double lesion_hu_delta = 60.0;
  double size_lo_mm = 5.0;
  double size_hi_mm = 40.0;
  std::uint64_t seed = 0;
};

/// A planted axis-aligned ellipse: voxel (r, c) on `slice` is lesion iff
/// ((c - cx) / semi_x)^2 + ((r - cy) / semi_y)^2 <= 1.
struct PlantedLesion {
  std::size_t slice = 0;
  double cx = 0.0;
  double cy = 0.0;
  double semi_x = 0.0;
  double semi_y = 0.0;
  int organ_code = 1;

  bool contains(std::size_t r, std::size_t c) const;
};

struct Phantom {
  Volume volume;
  std::vector<annotations::LesionRecord> records;
  std::vector<PlantedLesion> lesions;  // parallel to records
  std::vector<std::string> image_keys; // one per slice
};

/// Throws kInvalidArgument for a malformed spec.
void validate(const PhantomSpec& spec);

/// Air background, filled organ rectangles, elliptical lesions at organ HU + delta
/// placed fully inside their organ without overlapping each other. Throws
/// kInfeasiblePlacement after kMaxPlacementAttempts failed draws for one lesion.
Phantom generate_phantom(const PhantomSpec& spec);

/// A small torso-like layout: eight organ rectangles on a 128x128 frame.
PhantomSpec example_spec(std::uint64_t seed);

std::string slice_key(std::uint64_t seed, std::size_t slice);

PhantomSpec parse_spec(const std::string& json_text);
PhantomSpec load_spec(const std::filesystem::path& path);

/// Emits every record as a detection with score 1.
std::vector<eval::Detection> oracle_detections(const Phantom& phantom);

/// Writes volume.json + volume.raw, annotations.csv, oracle_detections.jsonl and images.txt.
void write_phantom(const Phantom& phantom, const std::filesystem::path& dir);

}  // namespace uld::synthgen
