#include "uld/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include <json.hpp>

#include "uld/errors.hpp"

namespace uld::io {

namespace {

template <typename Word>
Word to_little(Word w) {
  if constexpr (std::endian::native == std::endian::big) {
    Word out = 0;
    for (std::size_t i = 0; i < sizeof(Word); ++i) {
      out = (out << 8) | (w & 0xFF);
      w >>= 8;
    }
    return out;
  } else {
    return w;
  }
}

template <typename Float, typename Word>
std::string encode(std::span<const double> values) {
  std::string out(values.size() * sizeof(Word), '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    const Word w = to_little(std::bit_cast<Word>(static_cast<Float>(values[i])));
    std::memcpy(out.data() + i * sizeof(Word), &w, sizeof(Word));
  }
  return out;
}

template <typename Float, typename Word>
std::vector<double> decode(std::string_view bytes) {
  if (bytes.size() % sizeof(Word) != 0) throw Error(ErrorCode::kIoError, "truncated binary payload");
  std::vector<double> out(bytes.size() / sizeof(Word));
  for (std::size_t i = 0; i < out.size(); ++i) {
    Word w;
    std::memcpy(&w, bytes.data() + i * sizeof(Word), sizeof(Word));
    out[i] = static_cast<double>(std::bit_cast<Float>(to_little(w)));
  }
  return out;
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path.string());
}

std::string encode_f32_le(std::span<const double> values) { return encode<float, std::uint32_t>(values); }
std::vector<double> decode_f32_le(std::string_view bytes) { return decode<float, std::uint32_t>(bytes); }
std::string encode_f64_le(std::span<const double> values) { return encode<double, std::uint64_t>(values); }
std::vector<double> decode_f64_le(std::string_view bytes) { return decode<double, std::uint64_t>(bytes); }

void write_volume(const Volume& volume, const std::filesystem::path& header_path) {
  auto raw_path = header_path;
  raw_path.replace_extension(".raw");
  nlohmann::ordered_json header;
  header["dims"] = {volume.slices(), volume.rows(), volume.cols()};
  header["spacing_mm"] = {volume.spacing().x, volume.spacing().y, volume.spacing().z};
  header["dtype"] = "float32";
  header["byte_order"] = "little";
  header["raw"] = raw_path.filename().string();
  write_file(raw_path, encode_f32_le(volume.voxels()));
  write_file(header_path, header.dump(2) + "\n");
}

Volume read_volume(const std::filesystem::path& header_path) {
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(read_file(header_path));
    const auto dims = header.at("dims").get<std::vector<std::size_t>>();
    const auto spacing = header.at("spacing_mm").get<std::vector<double>>();
    if (dims.size() != 3 || spacing.size() != 3) {
      throw Error(ErrorCode::kIoError, "volume header needs 3 dims and 3 spacings");
    }
    auto raw_path = header_path;
    raw_path.replace_extension(".raw");
    if (header.contains("raw")) raw_path = header_path.parent_path() / header["raw"].get<std::string>();
    auto voxels = decode_f32_le(read_file(raw_path));
    if (voxels.size() != dims[0] * dims[1] * dims[2]) {
      throw Error(ErrorCode::kIoError, "raw voxel count does not match header dims");
    }
    return Volume(dims[0], dims[1], dims[2], Spacing{spacing[0], spacing[1], spacing[2]}, std::move(voxels));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIoError, "bad volume header " + header_path.string() + ": " + e.what());
  }
}

void write_pgm(const Mask& mask, const std::filesystem::path& path) {
  std::string out = "P5\n" + std::to_string(mask.cols) + " " + std::to_string(mask.rows) + "\n255\n";
  out.reserve(out.size() + mask.data.size());
  for (auto v : mask.data) out.push_back(static_cast<char>(v ? 255 : 0));
  write_file(path, out);
}

Mask read_pgm(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  std::istringstream in(bytes);
  std::string magic;
  std::size_t cols = 0, rows = 0, maxval = 0;
  in >> magic >> cols >> rows >> maxval;
  if (magic != "P5" || maxval != 255 || !in) throw Error(ErrorCode::kIoError, "unsupported PGM " + path.string());
  in.get();
  const auto offset = static_cast<std::size_t>(in.tellg());
  if (bytes.size() - offset != rows * cols) throw Error(ErrorCode::kIoError, "truncated PGM " + path.string());
  Mask mask(rows, cols);
  for (std::size_t i = 0; i < rows * cols; ++i) mask.data[i] = static_cast<unsigned char>(bytes[offset + i]) ? 1 : 0;
  return mask;
}

}  // namespace uld::io
