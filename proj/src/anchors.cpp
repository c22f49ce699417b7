#include "uld/anchors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <thread>

#include <json.hpp>

#include "uld/annotations.hpp"
#include "uld/errors.hpp"
#include "uld/rng.hpp"
#include "uld/text.hpp"

namespace uld::anchors {

namespace {

using Genome = std::vector<double>;

std::vector<Shape> shapes_of(std::span<const double> sizes, std::span<const double> ratios) {
  std::vector<Shape> shapes;
  shapes.reserve(sizes.size() * ratios.size());
  for (double s : sizes) {
    for (double r : ratios) shapes.push_back(anchor_shape(s, r));
  }
  return shapes;
}

Box centered_box(double cx, double cy, const Shape& s) {
  return {cx - s.w / 2.0, cy - s.h / 2.0, cx + s.w / 2.0, cy + s.h / 2.0};
}

Genome injected_default(const DeParams& p) {
  const auto def = default_config();
  // Ratio preference when fewer than three slots exist; surplus slots repeat 1.
  const std::vector<double> ratio_order = {1.0, 0.5, 2.0};
  Genome g;
  for (std::size_t i = 0; i < p.num_sizes; ++i) {
    const double s = def.sizes[std::min(i, def.sizes.size() - 1)];
    g.push_back(std::clamp(s, p.size_bounds.lo, p.size_bounds.hi));
  }
  for (std::size_t j = 0; j < p.num_ratios; ++j) {
    const double r = j < ratio_order.size() ? ratio_order[j] : 1.0;
    g.push_back(std::clamp(r, p.ratio_bounds.lo, p.ratio_bounds.hi));
  }
  return g;
}

double genome_fitness(const Genome& g, std::size_t num_sizes, std::span<const Box> gt) {
  const std::span<const double> all(g);
  return anchor_fitness(all.first(num_sizes), all.subspan(num_sizes), gt);
}

// Evaluates fitness for each genome; the split across threads does not affect values.
std::vector<double> evaluate_all(const std::vector<Genome>& genomes, std::size_t num_sizes,
                                 std::span<const Box> gt, std::size_t threads) {
  std::vector<double> out(genomes.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) out[i] = genome_fitness(genomes[i], num_sizes, gt);
  };
  threads = std::clamp<std::size_t>(threads, 1, genomes.size());
  if (threads == 1) {
    work(0, genomes.size());
    return out;
  }
  std::vector<std::jthread> pool;
  const std::size_t chunk = (genomes.size() + threads - 1) / threads;
  for (std::size_t begin = 0; begin < genomes.size(); begin += chunk) {
    pool.emplace_back(work, begin, std::min(begin + chunk, genomes.size()));
  }
  return out;
}

}  // namespace

std::vector<PyramidLevel> default_levels() {
  return {{2, 4.0}, {3, 8.0}, {4, 16.0}, {5, 32.0}, {6, 64.0}};
}

AnchorConfig default_config() { return {{32, 64, 128, 256, 512}, {0.5, 1.0, 2.0}, default_levels()}; }

AnchorConfig lesion_config() {
  return {{16, 24, 64, 128, 256}, {3.27, 1.78, 1.0, 0.56, 0.30}, default_levels()};
}

Shape anchor_shape(double size, double ratio) {
  if (!(size > 0.0) || !(ratio > 0.0)) {
    throw Error(ErrorCode::kNonPositiveInput, "anchor size and ratio must be positive");
  }
  const double root = std::sqrt(ratio);
  return {size * root, size / root};
}

std::vector<Box> generate_anchors(const AnchorConfig& cfg, std::size_t width, std::size_t height,
                                  AnchorMode mode) {
  if (cfg.sizes.empty() || cfg.ratios.empty()) throw Error(ErrorCode::kEmptyConfig, "no sizes or ratios");
  if (width == 0 || height == 0) throw Error(ErrorCode::kInvalidArgument, "image must be at least 1x1");

  std::vector<Box> boxes;
  if (mode == AnchorMode::kDense) {
    std::vector<Shape> shapes;
    for (double r : cfg.ratios) shapes.push_back(anchor_shape(cfg.sizes[0], r));
    for (std::size_t i = 1; i < cfg.sizes.size(); ++i) shapes.push_back(anchor_shape(cfg.sizes[i], cfg.ratios[0]));
    boxes.reserve(width * height * shapes.size());
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        for (const auto& s : shapes) {
          boxes.push_back(centered_box(static_cast<double>(x), static_cast<double>(y), s));
        }
      }
    }
    return boxes;
  }

  if (cfg.levels.empty()) throw Error(ErrorCode::kEmptyConfig, "fpn mode needs pyramid levels");
  if (cfg.levels.size() > cfg.sizes.size()) {
    throw Error(ErrorCode::kInvalidArgument, "more pyramid levels than anchor sizes");
  }
  for (std::size_t li = 0; li < cfg.levels.size(); ++li) {
    const double stride = cfg.levels[li].stride;
    if (!(stride > 0.0)) throw Error(ErrorCode::kNonPositiveInput, "stride must be positive");
    const auto nx = static_cast<std::size_t>(std::ceil(static_cast<double>(width) / stride));
    const auto ny = static_cast<std::size_t>(std::ceil(static_cast<double>(height) / stride));
    std::vector<Shape> shapes;
    for (double r : cfg.ratios) shapes.push_back(anchor_shape(cfg.sizes[li], r));
    for (std::size_t j = 0; j < ny; ++j) {
      for (std::size_t i = 0; i < nx; ++i) {
        const double cx = static_cast<double>(i) * stride + (stride - 1.0) / 2.0;
        const double cy = static_cast<double>(j) * stride + (stride - 1.0) / 2.0;
        for (const auto& s : shapes) boxes.push_back(centered_box(cx, cy, s));
      }
    }
  }
  return boxes;
}

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

double centered_iou(const Shape& a, const Shape& b) {
  const double inter = std::min(a.w, b.w) * std::min(a.h, b.h);
  return inter / (a.w * a.h + b.w * b.h - inter);
}

double anchor_fitness(std::span<const double> sizes, std::span<const double> ratios,
                      std::span<const Box> gt) {
  if (gt.empty()) throw Error(ErrorCode::kEmptyGroundTruth, "no ground-truth boxes");
  if (sizes.empty() || ratios.empty()) throw Error(ErrorCode::kEmptyConfig, "no sizes or ratios");
  const auto shapes = shapes_of(sizes, ratios);
  double total = 0.0;
  for (const auto& box : gt) {
    const Shape g{box.width(), box.height()};
    double best = 0.0;
    for (const auto& s : shapes) best = std::max(best, centered_iou(g, s));
    total += best;
  }
  return total / static_cast<double>(gt.size());
}

void validate(const DeParams& p) {
  auto bad = [](const std::string& msg) { throw Error(ErrorCode::kInvalidDeParams, msg); };
  if (p.population < 4) bad("population must be at least 4");
  if (!(p.mutation > 0.0 && p.mutation <= 2.0)) bad("mutation F must lie in (0, 2]");
  if (!(p.crossover >= 0.0 && p.crossover <= 1.0)) bad("crossover CR must lie in [0, 1]");
  if (p.num_sizes == 0 || p.num_ratios == 0) bad("need at least one size and one ratio");
  if (!(p.size_bounds.lo < p.size_bounds.hi) || !(p.ratio_bounds.lo < p.ratio_bounds.hi)) {
    bad("bounds need lo < hi");
  }
  if (!(p.size_bounds.lo > 0.0) || !(p.ratio_bounds.lo > 0.0)) bad("bounds must be positive");
}

DeResult optimize_anchors_de(std::span<const Box> gt, const DeParams& p) {
  if (gt.empty()) throw Error(ErrorCode::kEmptyGroundTruth, "no ground-truth boxes");
  validate(p);
  for (const auto& b : gt) {
    if (!b.valid()) throw Error(ErrorCode::kInvalidArgument, "ground-truth box with non-positive extent");
  }

  const std::size_t dims = p.num_sizes + p.num_ratios;
  std::vector<Bounds> bounds(dims, p.size_bounds);
  std::fill(bounds.begin() + static_cast<std::ptrdiff_t>(p.num_sizes), bounds.end(), p.ratio_bounds);

  Rng rng(p.seed);
  std::vector<Genome> pop;
  pop.reserve(p.population);
  pop.push_back(injected_default(p));
  while (pop.size() < p.population) {
    Genome g(dims);
    for (std::size_t d = 0; d < dims; ++d) g[d] = rng.uniform(bounds[d].lo, bounds[d].hi);
    pop.push_back(std::move(g));
  }
  auto fit = evaluate_all(pop, p.num_sizes, gt, p.threads);

  DeResult result;
  result.history.reserve(p.generations);
  std::vector<Genome> trials(p.population, Genome(dims));
  for (std::size_t gen = 0; gen < p.generations; ++gen) {
    for (std::size_t i = 0; i < p.population; ++i) {
      std::size_t a, b, c;
      do { a = rng.index(p.population); } while (a == i);
      do { b = rng.index(p.population); } while (b == i || b == a);
      do { c = rng.index(p.population); } while (c == i || c == a || c == b);
      const std::size_t forced = rng.index(dims);
      for (std::size_t d = 0; d < dims; ++d) {
        const bool take = rng.uniform01() < p.crossover || d == forced;
        double v = take ? pop[a][d] + p.mutation * (pop[b][d] - pop[c][d]) : pop[i][d];
        trials[i][d] = std::clamp(v, bounds[d].lo, bounds[d].hi);
      }
    }
    const auto trial_fit = evaluate_all(trials, p.num_sizes, gt, p.threads);
    for (std::size_t i = 0; i < p.population; ++i) {
      if (trial_fit[i] >= fit[i]) {
        pop[i] = trials[i];
        fit[i] = trial_fit[i];
      }
    }
    result.history.push_back(*std::max_element(fit.begin(), fit.end()));
  }

  const auto best = static_cast<std::size_t>(std::max_element(fit.begin(), fit.end()) - fit.begin());
  const auto& g = pop[best];
  result.config.sizes.assign(g.begin(), g.begin() + static_cast<std::ptrdiff_t>(p.num_sizes));
  result.config.ratios.assign(g.begin() + static_cast<std::ptrdiff_t>(p.num_sizes), g.end());
  std::sort(result.config.sizes.begin(), result.config.sizes.end());
  std::sort(result.config.ratios.begin(), result.config.ratios.end(), std::greater<>());
  result.config.levels = default_levels();
  result.config.levels.resize(std::min(result.config.levels.size(), p.num_sizes));
  result.fitness = fit[best];
  return result;
}

std::vector<Box> load_boxes(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
  std::string first;
  std::getline(in, first);
  if (!first.empty() && first.back() == '\r') first.pop_back();
  if (first == annotations::kCsvHeader) {
    in.clear();
    in.seekg(0);
    std::vector<Box> boxes;
    for (const auto& r : annotations::parse_annotations(in)) boxes.push_back(r.bbox);
    return boxes;
  }

  std::vector<Box> boxes;
  std::size_t line_no = 0;
  auto take = [&](const std::string& line) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#') return;
    auto v = text::parse_double_list(body, ',');
    if (!v || v->size() != 4) throw ParseError(ErrorCode::kMalformedRow, line_no, 0, "expected x1,y1,x2,y2");
    Box b{(*v)[0], (*v)[1], (*v)[2], (*v)[3]};
    if (!b.valid()) throw ParseError(ErrorCode::kInvariantViolation, line_no, 0, "box needs x2 > x1 and y2 > y1");
    boxes.push_back(b);
  };
  take(first);
  std::string line;
  while (std::getline(in, line)) take(line);
  return boxes;
}

std::string config_to_json(const AnchorConfig& cfg, double fitness) {
  nlohmann::ordered_json j;
  j["sizes"] = cfg.sizes;
  j["ratios"] = cfg.ratios;
  auto levels = nlohmann::ordered_json::array();
  for (const auto& l : cfg.levels) {
    levels.push_back({{"level", "P" + std::to_string(l.id)}, {"stride", l.stride}});
  }
  j["levels"] = levels;
  j["fitness"] = fitness;
  return j.dump(2) + "\n";
}

}  // namespace uld::anchors
