#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "uld/anchors.hpp"
#include "uld/errors.hpp"

using namespace uld;
using namespace uld::anchors;

namespace {

AnchorConfig config_nm(std::size_t n, std::size_t m) {
  AnchorConfig cfg;
  for (std::size_t i = 0; i < n; ++i) cfg.sizes.push_back(8.0 * static_cast<double>(i + 1));
  for (std::size_t j = 0; j < m; ++j) cfg.ratios.push_back(0.5 + 0.25 * static_cast<double>(j));
  cfg.levels = default_levels();
  return cfg;
}

double fitness_oracle(const std::vector<double>& sizes, const std::vector<double>& ratios,
                      const std::vector<Box>& gt) {
  double sum = 0.0;
  for (const auto& g : gt) {
    const double gw = g.width(), gh = g.height();
    double best = 0.0;
    for (double s : sizes) {
      for (double r : ratios) {
        const double w = s * std::sqrt(r), h = s / std::sqrt(r);
        const Box a{-w / 2, -h / 2, w / 2, h / 2};
        const Box b{-gw / 2, -gh / 2, gw / 2, gh / 2};
        best = std::max(best, oracle::box_iou(a, b));
      }
    }
    sum += best;
  }
  return sum / static_cast<double>(gt.size());
}

std::vector<Box> random_boxes(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> pos(0.0, 400.0), len(4.0, 120.0);
  std::vector<Box> out;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = pos(gen), y = pos(gen);
    out.push_back({x, y, x + len(gen), y + len(gen)});
  }
  return out;
}

}  // namespace

TEST(AnchorShape, Examples) {
  const auto unit = anchor_shape(16, 1);
  EXPECT_EQ(unit.w, 16.0);
  EXPECT_EQ(unit.h, 16.0);
  const auto wide = anchor_shape(16, 4);
  EXPECT_EQ(wide.w, 32.0);
  EXPECT_EQ(wide.h, 8.0);
}

TEST(AnchorShape, AreaAndRatioIdentities) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> s(1.0, 512.0), r(0.1, 10.0);
  for (int i = 0; i < 1000; ++i) {
    const double size = s(gen), ratio = r(gen);
    const auto sh = anchor_shape(size, ratio);
    EXPECT_NEAR(sh.w * sh.h / (size * size), 1.0, 1e-9);
    EXPECT_NEAR(sh.w / sh.h / ratio, 1.0, 1e-9);
  }
}

TEST(AnchorShape, NonPositiveInput) {
  for (auto [s, r] : {std::pair{0.0, 1.0}, {-3.0, 1.0}, {16.0, 0.0}, {16.0, -1.0}}) {
    try {
      anchor_shape(s, r);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kNonPositiveInput);
    }
  }
}

TEST(GenerateAnchors, DenseCounts) {
  EXPECT_EQ(generate_anchors(config_nm(5, 5), 1, 1, AnchorMode::kDense).size(), 9u);
  EXPECT_EQ(generate_anchors(config_nm(1, 1), 2, 2, AnchorMode::kDense).size(), 4u);
  EXPECT_EQ(generate_anchors(config_nm(2, 3), 3, 2, AnchorMode::kDense).size(), 24u);
  EXPECT_EQ(generate_anchors(lesion_config(), 1, 1, AnchorMode::kDense).size(), 9u);
  std::mt19937 gen(11);
  std::uniform_int_distribution<std::size_t> dim(1, 12), nm(1, 6);
  for (int t = 0; t < 50; ++t) {
    const auto w = dim(gen), h = dim(gen), n = nm(gen), m = nm(gen);
    EXPECT_EQ(generate_anchors(config_nm(n, m), w, h, AnchorMode::kDense).size(), w * h * (n + m - 1));
  }
}

TEST(GenerateAnchors, DenseShapesAreCenteredOnPixels) {
  const auto cfg = config_nm(2, 3);
  const auto boxes = generate_anchors(cfg, 3, 2, AnchorMode::kDense);
  std::vector<std::pair<double, double>> expected_shapes;
  for (double r : cfg.ratios) {
    const auto s = anchor_shape(cfg.sizes[0], r);
    expected_shapes.emplace_back(s.w, s.h);
  }
  const auto s2 = anchor_shape(cfg.sizes[1], cfg.ratios[0]);
  expected_shapes.emplace_back(s2.w, s2.h);
  std::size_t k = 0;
  for (std::size_t y = 0; y < 2; ++y) {
    for (std::size_t x = 0; x < 3; ++x) {
      for (const auto& [w, h] : expected_shapes) {
        const auto& b = boxes[k++];
        EXPECT_NEAR((b.x1 + b.x2) / 2, static_cast<double>(x), 1e-12);
        EXPECT_NEAR((b.y1 + b.y2) / 2, static_cast<double>(y), 1e-12);
        EXPECT_NEAR(b.width(), w, 1e-12);
        EXPECT_NEAR(b.height(), h, 1e-12);
      }
    }
  }
}

TEST(GenerateAnchors, FpnUsesStrideGridPerLevel) {
  const auto cfg = lesion_config();
  const std::size_t w = 64, h = 32;
  const auto boxes = generate_anchors(cfg, w, h, AnchorMode::kFpn);
  std::size_t expected = 0;
  for (const auto& lvl : cfg.levels) {
    const auto cx = static_cast<std::size_t>(std::ceil(static_cast<double>(w) / lvl.stride));
    const auto cy = static_cast<std::size_t>(std::ceil(static_cast<double>(h) / lvl.stride));
    expected += cx * cy * cfg.ratios.size();
  }
  EXPECT_EQ(boxes.size(), expected);
  // First level, first anchor: size 16, ratio 3.27, center (1.5, 1.5).
  const auto s = anchor_shape(16, 3.27);
  EXPECT_NEAR(boxes[0].x1, 1.5 - s.w / 2, 1e-12);
  EXPECT_NEAR(boxes[0].y2, 1.5 + s.h / 2, 1e-12);
}

TEST(GenerateAnchors, Errors) {
  AnchorConfig empty;
  try {
    generate_anchors(empty, 4, 4, AnchorMode::kDense);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyConfig);
  }
  EXPECT_THROW(generate_anchors(config_nm(1, 1), 0, 4, AnchorMode::kDense), Error);
}

TEST(LesionConfig, ValuesAndCanonicalLevels) {
  const auto cfg = lesion_config();
  EXPECT_EQ(cfg.sizes, (std::vector<double>{16, 24, 64, 128, 256}));
  EXPECT_EQ(cfg.ratios, (std::vector<double>{3.27, 1.78, 1, 0.56, 0.30}));
  ASSERT_EQ(cfg.levels.size(), 5u);
  EXPECT_EQ(cfg.levels.front(), (PyramidLevel{2, 4.0}));
  EXPECT_EQ(cfg.levels.back(), (PyramidLevel{6, 64.0}));
  const auto def = default_config();
  EXPECT_EQ(def.sizes, (std::vector<double>{32, 64, 128, 256, 512}));
  EXPECT_EQ(def.ratios, (std::vector<double>{0.5, 1, 2}));
}

TEST(Iou, Examples) {
  const Box a{0, 0, 1, 1};
  EXPECT_EQ(iou(a, a), 1.0);
  EXPECT_EQ(iou(a, {2, 2, 3, 3}), 0.0);
  EXPECT_EQ(iou(a, {1, 0, 2, 1}), 0.0);
  EXPECT_NEAR(iou(a, {0.5, 0, 1.5, 1}), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(iou({10, 10, 20, 30}, {5, 0, 25, 40}), 0.25, 1e-15);
}

TEST(Iou, SymmetricAndMatchesOracle) {
  const auto boxes = random_boxes(60, 5);
  for (const auto& a : boxes) {
    for (const auto& b : boxes) {
      const double v = iou(a, b);
      EXPECT_EQ(v, iou(b, a));
      EXPECT_NEAR(v, oracle::box_iou(a, b), 1e-12);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
      if (!(a == b)) EXPECT_LT(v, 1.0);
    }
  }
}

TEST(AnchorFitness, Examples) {
  const std::vector<Box> squares(10, Box{0, 0, 32, 32});
  const std::vector<double> sizes = {16, 32, 64}, ratios = {0.5, 1, 2};
  EXPECT_DOUBLE_EQ(anchor_fitness(sizes, ratios, squares), 1.0);
  const std::vector<Box> one = {{0, 0, 10, 10}};
  const std::vector<double> s20 = {20}, r1 = {1};
  EXPECT_DOUBLE_EQ(anchor_fitness(s20, r1, one), 0.25);
}

TEST(AnchorFitness, MatchesOracleSupersetAndTranslation) {
  auto gt = random_boxes(80, 9);
  std::vector<double> sizes = {16, 40, 90}, ratios = {0.5, 1.3};
  const double f = anchor_fitness(sizes, ratios, gt);
  EXPECT_NEAR(f, fitness_oracle(sizes, ratios, gt), 1e-12);
  auto more_sizes = sizes;
  more_sizes.push_back(64);
  EXPECT_GE(anchor_fitness(more_sizes, ratios, gt), f);
  auto more_ratios = ratios;
  more_ratios.push_back(3.0);
  EXPECT_GE(anchor_fitness(sizes, more_ratios, gt), f);
  for (auto& b : gt) {
    b.x1 += 37.25;
    b.x2 += 37.25;
    b.y1 -= 11.5;
    b.y2 -= 11.5;
  }
  EXPECT_NEAR(anchor_fitness(sizes, ratios, gt), f, 1e-12);
}

TEST(AnchorFitness, EmptyGroundTruth) {
  const std::vector<double> s = {32}, r = {1};
  try {
    anchor_fitness(s, r, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyGroundTruth);
  }
}

TEST(DeParamsValidate, RejectsBadParams) {
  auto bad = [](auto mutate) {
    DeParams p;
    mutate(p);
    try {
      validate(p);
      return false;
    } catch (const Error& e) {
      return e.code() == ErrorCode::kInvalidDeParams;
    }
  };
  EXPECT_NO_THROW(validate(DeParams{}));
  EXPECT_TRUE(bad([](DeParams& p) { p.population = 3; }));
  EXPECT_TRUE(bad([](DeParams& p) { p.mutation = 0.0; }));
  EXPECT_TRUE(bad([](DeParams& p) { p.mutation = 2.5; }));
  EXPECT_TRUE(bad([](DeParams& p) { p.crossover = -0.1; }));
  EXPECT_TRUE(bad([](DeParams& p) { p.crossover = 1.1; }));
  EXPECT_TRUE(bad([](DeParams& p) { p.size_bounds = {10, 10}; }));
  EXPECT_TRUE(bad([](DeParams& p) { p.ratio_bounds = {3, 1}; }));
  EXPECT_TRUE(bad([](DeParams& p) { p.num_sizes = 0; }));
}

TEST(OptimizeAnchorsDe, DeterministicAndThreadIndependent) {
  const auto gt = random_boxes(120, 4);
  DeParams p;
  p.generations = 15;
  p.population = 16;
  p.seed = 42;
  const auto a = optimize_anchors_de(gt, p);
  const auto b = optimize_anchors_de(gt, p);
  EXPECT_EQ(a.config, b.config);
  EXPECT_EQ(a.history, b.history);
  EXPECT_EQ(a.fitness, b.fitness);
  p.threads = 4;
  const auto c = optimize_anchors_de(gt, p);
  EXPECT_EQ(a.config, c.config);
  EXPECT_EQ(a.history, c.history);
}

TEST(OptimizeAnchorsDe, CanonicalMonotoneAndBeatsDefault) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto gt = random_boxes(100, seed + 100);
    DeParams p;
    p.generations = 20;
    p.population = 20;
    p.seed = seed;
    const auto res = optimize_anchors_de(gt, p);
    ASSERT_EQ(res.history.size(), p.generations);
    for (std::size_t g = 1; g < res.history.size(); ++g) EXPECT_GE(res.history[g], res.history[g - 1]);
    EXPECT_TRUE(std::is_sorted(res.config.sizes.begin(), res.config.sizes.end()));
    EXPECT_TRUE(std::is_sorted(res.config.ratios.rbegin(), res.config.ratios.rend()));
    EXPECT_EQ(res.config.sizes.size(), 5u);
    EXPECT_EQ(res.config.ratios.size(), 5u);
    EXPECT_NEAR(res.fitness, anchor_fitness(res.config.sizes, res.config.ratios, gt), 1e-12);
    EXPECT_EQ(res.fitness, res.history.back());
    const auto def = default_config();
    EXPECT_GE(res.fitness, anchor_fitness(def.sizes, def.ratios, gt));
    for (double s : res.config.sizes) {
      EXPECT_GE(s, p.size_bounds.lo);
      EXPECT_LE(s, p.size_bounds.hi);
    }
    for (double r : res.config.ratios) {
      EXPECT_GE(r, p.ratio_bounds.lo);
      EXPECT_LE(r, p.ratio_bounds.hi);
    }
  }
}

TEST(OptimizeAnchorsDe, ConvergesOnSquares) {
  const std::vector<Box> gt(500, Box{0, 0, 32, 32});
  DeParams p;
  p.num_sizes = 1;
  p.num_ratios = 1;
  p.seed = 7;
  p.generations = 60;
  const auto res = optimize_anchors_de(gt, p);
  EXPECT_NEAR(res.config.sizes[0] / 32.0, 1.0, 0.05);
  EXPECT_NEAR(res.config.ratios[0], 1.0, 0.05);
}

TEST(OptimizeAnchorsDe, Errors) {
  DeParams p;
  EXPECT_THROW(optimize_anchors_de({}, p), Error);
  p.population = 2;
  const std::vector<Box> gt = {{0, 0, 4, 4}};
  EXPECT_THROW(optimize_anchors_de(gt, p), Error);
}

TEST(ConfigToJson, Layout) {
  const auto json = config_to_json(lesion_config(), 0.5);
  EXPECT_NE(json.find("\"sizes\""), std::string::npos);
  EXPECT_NE(json.find("\"level\": \"P2\""), std::string::npos);
  EXPECT_LT(json.find("\"sizes\""), json.find("\"ratios\""));
  EXPECT_LT(json.find("\"ratios\""), json.find("\"levels\""));
}
