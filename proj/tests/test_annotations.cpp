#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <string>

#include "uld/annotations.hpp"
#include "uld/errors.hpp"
#include "uld/io.hpp"

using namespace uld;
using namespace uld::annotations;

namespace {

std::string with_header(const std::string& row) { return std::string(kCsvHeader) + "\n" + row + "\n"; }

const std::string kRow = "img_1,10,20,30,50,10;35;30;35;20;30;20;40,20,10,5,train,0.8,0.8,2";

LesionRecord sample_record(int i) {
  LesionRecord r;
  r.image_key = "000001_01_01_" + std::to_string(100 + i);
  r.bbox = {1.0 * i, 2.0, 10.0 + i, 12.5};
  r.recist = {1, 2, 3, 4, 5, 6, 7, 8.25};
  r.diameters_mm = {12.0 + i, 4.5};
  r.organ_code = 1 + i % kOrganCount;
  r.split = static_cast<Split>(i % 3);
  return r;
}

ErrorCode code_of(const std::string& text) {
  try {
    parse_annotations(text);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected a parse failure";
  return ErrorCode::kIoError;
}

}  // namespace

TEST(ParseAnnotations, MapsFieldsDirectly) {
  const auto recs = parse_annotations(with_header(kRow));
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].image_key, "img_1");
  EXPECT_DOUBLE_EQ(recs[0].bbox.width(), 20.0);
  EXPECT_DOUBLE_EQ(recs[0].bbox.height(), 30.0);
  EXPECT_EQ(recs[0].organ_code, 5);
  EXPECT_EQ(organ_name(recs[0].organ_code), "lung");
  EXPECT_EQ(recs[0].split, Split::kTrain);
  EXPECT_DOUBLE_EQ(recs[0].recist[7], 40.0);
  EXPECT_DOUBLE_EQ(recs[0].slice_interval_mm, 2.0);
}

TEST(ParseAnnotations, SwappedXIsInvariantViolationAtThatLine) {
  const std::string bad = "img_1,30,20,10,50,10;35;30;35;20;30;20;40,20,10,5,train,0.8,0.8,2";
  const std::string text = with_header(kRow) + bad + "\n";
  try {
    parse_annotations(text);
    FAIL() << "expected InvariantViolation";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvariantViolation);
    EXPECT_EQ(e.line(), 3u);
    EXPECT_EQ(e.column(), 4u);  // x2
  }
}

TEST(ParseAnnotations, ErrorKinds) {
  EXPECT_EQ(code_of(with_header("img_1,10,20,30")), ErrorCode::kMalformedRow);
  EXPECT_EQ(code_of(with_header("img_1,10,20,30,50,1;2;3,20,10,5,train,0.8,0.8,2")), ErrorCode::kMalformedRow);
  EXPECT_EQ(code_of(with_header("img_1,10,20,30,50,10;35;30;35;20;30;20;40,20,10,9,train,0.8,0.8,2")),
            ErrorCode::kUnknownOrganCode);
  EXPECT_EQ(code_of(with_header("img_1,10,20,30,50,10;35;30;35;20;30;20;40,20,10,0,train,0.8,0.8,2")),
            ErrorCode::kUnknownOrganCode);
  // One measured diameter only: rejected rather than imputed.
  EXPECT_EQ(code_of(with_header("img_1,10,20,30,50,10;35;30;35;20;30;20;40,20,0,5,train,0.8,0.8,2")),
            ErrorCode::kInvariantViolation);
  EXPECT_EQ(code_of(with_header("img_1,10,20,30,50,10;35;30;35;20;30;20;40,5,10,5,train,0.8,0.8,2")),
            ErrorCode::kInvariantViolation);
  EXPECT_EQ(code_of(with_header("img_1,10,20,30,50,10;35;30;35;20;30;20;40,20,10,5,holdout,0.8,0.8,2")),
            ErrorCode::kMalformedRow);
  EXPECT_EQ(code_of("image_key,x1\n"), ErrorCode::kMalformedRow);
  EXPECT_EQ(code_of(""), ErrorCode::kMalformedRow);
}

TEST(ParseAnnotations, FixtureRoundTripsByteForByte) {
  const auto text = io::read_file(std::string(ULD_FIXTURE_DIR) + "/annotations_3.csv");
  const auto recs = parse_annotations(text);
  ASSERT_EQ(recs.size(), 3u);
  EXPECT_EQ(recs[1].image_key, "000002_02_01_077");
  EXPECT_DOUBLE_EQ(recs[1].bbox.x1, 233.537);
  EXPECT_EQ(recs[1].split, Split::kVal);
  EXPECT_EQ(recs[2].organ_code, 7);
  EXPECT_EQ(serialize_annotations(recs), text);
  EXPECT_EQ(parse_annotations(serialize_annotations(recs)), recs);
}

TEST(ParseAnnotations, ParseSerializeIdentityOnRandomRecords) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(0.0, 500.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<LesionRecord> recs;
    for (int i = 0; i < 5; ++i) {
      auto r = sample_record(i + trial);
      r.bbox.x1 = u(gen);
      r.bbox.x2 = r.bbox.x1 + 1.0 + u(gen);
      for (auto& v : r.recist) v = u(gen);
      r.diameters_mm = {u(gen) + 1e-3, 0.0};
      r.diameters_mm[1] = r.diameters_mm[0] * 0.5;
      r.pixel_spacing_mm = {0.5 + u(gen) / 1000.0, 0.7};
      recs.push_back(r);
    }
    ASSERT_EQ(parse_annotations(serialize_annotations(recs)), recs);
  }
}

TEST(SplitRecords, PartitionsByTag) {
  std::vector<LesionRecord> recs;
  for (int i = 0; i < 10; ++i) {
    auto r = sample_record(i);
    r.split = i < 7 ? Split::kTrain : (i < 9 ? Split::kVal : Split::kTest);
    recs.push_back(r);
  }
  const auto parts = split_records(recs);
  EXPECT_EQ(parts.train.size(), 7u);
  EXPECT_EQ(parts.val.size(), 2u);
  EXPECT_EQ(parts.test.size(), 1u);
  EXPECT_EQ(parts.train.front(), recs.front());
}

TEST(SplitRecords, EmptyInput) {
  const auto parts = split_records({});
  EXPECT_TRUE(parts.train.empty() && parts.val.empty() && parts.test.empty());
}

TEST(SplitRecords, ConcatenationIsPermutationPreservingOrder) {
  std::vector<LesionRecord> recs;
  for (int i = 0; i < 40; ++i) recs.push_back(sample_record(i));
  std::shuffle(recs.begin(), recs.end(), std::mt19937(3));
  const auto parts = split_records(recs);
  std::vector<std::string> joined;
  for (const auto* part : {&parts.train, &parts.val, &parts.test}) {
    for (const auto& r : *part) joined.push_back(r.image_key);
    // Relative order within a part follows the input.
    std::vector<std::string> expected;
    for (const auto& r : recs) {
      if (!part->empty() && r.split == part->front().split) expected.push_back(r.image_key);
    }
    std::vector<std::string> got;
    for (const auto& r : *part) got.push_back(r.image_key);
    EXPECT_EQ(got, expected);
  }
  std::vector<std::string> original;
  for (const auto& r : recs) original.push_back(r.image_key);
  std::sort(joined.begin(), joined.end());
  std::sort(original.begin(), original.end());
  EXPECT_EQ(joined, original);
}

TEST(SizeBucket, Boundaries) {
  EXPECT_EQ(size_bucket(5.0), SizeBucket::kSmall);
  EXPECT_EQ(size_bucket(9.999), SizeBucket::kSmall);
  EXPECT_EQ(size_bucket(10.0), SizeBucket::kMedium);
  EXPECT_EQ(size_bucket(30.0), SizeBucket::kMedium);
  EXPECT_EQ(size_bucket(30.1), SizeBucket::kLarge);
}

TEST(SizeBucket, MatchesIndependentThresholdsAndIsMonotone) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.1, 80.0);
  std::vector<double> ds(1000);
  for (auto& d : ds) d = u(gen);
  std::array<int, 3> got{}, expected{};
  for (double d : ds) {
    ++got[static_cast<int>(size_bucket(d))];
    ++expected[d < 10.0 ? 0 : (d > 30.0 ? 2 : 1)];
  }
  EXPECT_EQ(got, expected);
  std::sort(ds.begin(), ds.end());
  for (std::size_t i = 1; i < ds.size(); ++i) {
    EXPECT_LE(static_cast<int>(size_bucket(ds[i - 1])), static_cast<int>(size_bucket(ds[i])));
  }
}

TEST(OrganNames, FollowDatasetOrder) {
  const std::vector<std::string> expected = {"bone", "abdomen", "mediastinum", "liver",
                                             "lung", "kidney", "soft-tissue", "pelvis"};
  for (int c = 1; c <= kOrganCount; ++c) EXPECT_EQ(organ_name(c), expected[static_cast<std::size_t>(c - 1)]);
  EXPECT_THROW(organ_name(9), Error);
}
