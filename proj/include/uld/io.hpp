#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "uld/image.hpp"

namespace uld::io {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Little-endian IEEE encodings regardless of host byte order.
std::string encode_f32_le(std::span<const double> values);
std::vector<double> decode_f32_le(std::string_view bytes);
std::string encode_f64_le(std::span<const double> values);
std::vector<double> decode_f64_le(std::string_view bytes);

/// Writes `<stem>.raw` (float32 LE, slice-major) and `<stem>.json`
/// {"dims": [slices, rows, cols], "spacing_mm": [x, y, z], "dtype": "float32", "raw": "<stem>.raw"}.
void write_volume(const Volume& volume, const std::filesystem::path& header_path);

/// Reads a volume from its JSON header; the raw file is resolved next to it.
Volume read_volume(const std::filesystem::path& header_path);

/// Binary (P5) 8-bit PGM; mask pixels map to 0 / 255.
void write_pgm(const Mask& mask, const std::filesystem::path& path);
Mask read_pgm(const std::filesystem::path& path);

}  // namespace uld::io
