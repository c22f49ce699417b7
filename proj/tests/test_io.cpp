#include <gtest/gtest.h>

#include <filesystem>

#include "uld/errors.hpp"
#include "uld/io.hpp"

using namespace uld;

namespace {

std::filesystem::path scratch(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST(Encoding, LittleEndianBytes) {
  const std::vector<double> one = {1.0};
  EXPECT_EQ(io::encode_f32_le(one), std::string("\x00\x00\x80\x3f", 4));
  EXPECT_EQ(io::encode_f64_le(one), std::string("\x00\x00\x00\x00\x00\x00\xf0\x3f", 8));
  const std::vector<double> vals = {-1024.0, 0.5, 3071.25, -0.0};
  EXPECT_EQ(io::decode_f32_le(io::encode_f32_le(vals)), vals);
  const std::vector<double> fine = {0.1, -1e-300, 12345.678901234};
  EXPECT_EQ(io::decode_f64_le(io::encode_f64_le(fine)), fine);
  EXPECT_THROW(io::decode_f32_le("abc"), Error);
}

TEST(VolumeFiles, RoundTrip) {
  const auto dir = scratch("uld_test_io_vol");
  Volume vol(2, 3, 4, Spacing{0.7, 0.8, 2.5});
  double v = -1024.0;
  for (auto& x : vol.voxels()) x = (v += 37.5);
  io::write_volume(vol, dir / "ct.json");
  EXPECT_TRUE(std::filesystem::exists(dir / "ct.raw"));
  EXPECT_EQ(std::filesystem::file_size(dir / "ct.raw"), 24u * 4u);
  EXPECT_EQ(io::read_volume(dir / "ct.json"), vol);
  EXPECT_THROW(io::read_volume(dir / "missing.json"), Error);
  io::write_file(dir / "bad.json", "{\"dims\": [2, 3, 4], \"spacing_mm\": [1, 1, 1], \"raw\": \"ct.raw\"}");
  EXPECT_NO_THROW(io::read_volume(dir / "bad.json"));
  io::write_file(dir / "short.json", "{\"dims\": [9, 3, 4], \"spacing_mm\": [1, 1, 1], \"raw\": \"ct.raw\"}");
  EXPECT_THROW(io::read_volume(dir / "short.json"), Error);
  std::filesystem::remove_all(dir);
}

TEST(Pgm, RoundTripAndHeader) {
  const auto dir = scratch("uld_test_io_pgm");
  Mask m(3, 5);
  m(0, 0) = 1;
  m(2, 4) = 1;
  m(1, 2) = 1;
  io::write_pgm(m, dir / "m.pgm");
  const auto bytes = io::read_file(dir / "m.pgm");
  EXPECT_EQ(bytes.substr(0, 11), "P5\n5 3\n255\n");
  EXPECT_EQ(bytes.size(), 11u + 15u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[11]), 255);
  EXPECT_EQ(io::read_pgm(dir / "m.pgm"), m);
  std::filesystem::remove_all(dir);
}
