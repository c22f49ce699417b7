#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uld/box.hpp"

namespace uld::anchors {

struct PyramidLevel {
  int id = 2;          // P2..P6
  double stride = 4.0; // pixels between anchor centers

  bool operator==(const PyramidLevel&) const = default;
};

struct AnchorConfig {
  std::vector<double> sizes;   // absolute pixels, ascending with level
  std::vector<double> ratios;  // w / h
  std::vector<PyramidLevel> levels;

  bool operator==(const AnchorConfig&) const = default;
};

/// P2..P6 with strides 4..64.
std::vector<PyramidLevel> default_levels();

/// Sizes [32, 64, 128, 256, 512], ratios [0.5, 1, 2]: the usual detector defaults.
AnchorConfig default_config();

/// Sizes [16, 24, 64, 128, 256], ratios [3.27, 1.78, 1, 0.56, 0.30] found for lesions.
AnchorConfig lesion_config();

struct Shape {
  double w = 0.0;
  double h = 0.0;
};

/// w = size * sqrt(ratio), h = size / sqrt(ratio). Throws kNonPositiveInput.
Shape anchor_shape(double size, double ratio);

enum class AnchorMode {
  /// At every pixel center: (s1, r_j) for all j plus (s_i, r1) for i > 1,
  /// i.e. W*H*(n+m-1) boxes.
  kDense,
  /// Per level: that level's size with every ratio at stride-spaced centers.
  kFpn,
};

/// Boxes are centered and unclipped. Throws kEmptyConfig / kInvalidArgument.
std::vector<Box> generate_anchors(const AnchorConfig& cfg, std::size_t width, std::size_t height,
                                  AnchorMode mode);

/// Intersection over union; 0 for disjoint boxes.
double iou(const Box& a, const Box& b);

/// IoU of two shapes sharing a center.
double centered_iou(const Shape& a, const Shape& b);

/// Mean over ground-truth boxes of the best centered IoU against every
/// (size, ratio) pair. Throws kEmptyGroundTruth.
double anchor_fitness(std::span<const double> sizes, std::span<const double> ratios,
                      std::span<const Box> gt);

struct Bounds {
  double lo = 0.0;
  double hi = 1.0;
};

struct DeParams {
  std::size_t population = 50;
  double mutation = 0.5;   // F
  double crossover = 0.9;  // CR
  std::size_t generations = 200;
  std::size_t num_sizes = 5;
  std::size_t num_ratios = 5;
  Bounds size_bounds{4.0, 512.0};
  Bounds ratio_bounds{0.2, 5.0};
  std::uint64_t seed = 0;
  /// Worker threads for fitness evaluation; results do not depend on it.
  std::size_t threads = 1;
};

/// Throws kInvalidDeParams on NP < 4, F outside (0, 2], CR outside [0, 1],
/// lo >= hi, or zero-length size/ratio vectors.
void validate(const DeParams& p);

struct DeResult {
  AnchorConfig config;                // sizes ascending, ratios descending
  double fitness = 0.0;
  std::vector<double> history;        // best fitness after each generation
};

/// DE/rand/1/bin over (sizes, ratios). The default config (truncated or padded
/// to the vector length) is injected into the initial population.
DeResult optimize_anchors_de(std::span<const Box> gt, const DeParams& p);

/// Plain "x1,y1,x2,y2" lines, or an annotation CSV (detected by its header).
std::vector<Box> load_boxes(const std::string& path);

/// {"sizes": [...], "ratios": [...], "levels": [{"level": "P2", "stride": 4}, ...]}
std::string config_to_json(const AnchorConfig& cfg, double fitness);

}  // namespace uld::anchors
