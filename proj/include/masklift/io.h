#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "masklift/image.h"

namespace masklift {

// 16-bit binary PGM (`P5`, maxval 65535, big-endian samples).
void write_pgm16(const std::string& path, const LabelImage& image);
LabelImage read_pgm16(const std::string& path);

// Depth raster: `D32F`, u32 width, u32 height, u32 reserved (all LE), then
// f32 LE samples. Background (+inf in memory) is stored as 0.
void write_depth(const std::string& path, const DepthImage& depth);
DepthImage read_depth(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, std::string_view text);
std::vector<std::uint8_t> read_binary_file(const std::string& path);

// FNV-1a 64-bit, printed as 16 lowercase hex digits.
std::uint64_t fnv1a64(std::string_view bytes);
std::string hash_file_hex(const std::string& path);

// Creates the directory (and parents); throws kIoError if that fails or the
// directory is not writable.
void ensure_directory(const std::string& path);

}  // namespace masklift
