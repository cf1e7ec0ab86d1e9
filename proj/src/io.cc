#include "masklift/io.h"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "masklift/error.h"

namespace masklift {
namespace {

void put_u32_le(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32_le(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

}  // namespace

void write_pgm16(const std::string& path, const LabelImage& image) {
  std::string buf = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) +
                    "\n65535\n";
  buf.reserve(buf.size() + image.size() * 2);
  for (Label v : image.data) {
    if (v > 65535) fail(ErrorCode::kFormatError, "label exceeds 16 bits: " + std::to_string(v));
    buf.push_back(static_cast<char>(v >> 8));
    buf.push_back(static_cast<char>(v & 0xff));
  }
  write_text_file(path, buf);
}

LabelImage read_pgm16(const std::string& path) {
  const auto bytes = read_binary_file(path);
  std::size_t pos = 0;
  // Header tokens are whitespace separated; `#` starts a comment line.
  auto next_token = [&]() {
    std::string tok;
    while (pos < bytes.size()) {
      const char c = static_cast<char>(bytes[pos]);
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        if (!tok.empty()) break;
        ++pos;
      } else {
        tok.push_back(c);
        ++pos;
      }
    }
    return tok;
  };
  if (next_token() != "P5") fail(ErrorCode::kFormatError, path + ": not a binary PGM");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    fail(ErrorCode::kFormatError, path + ": bad PGM header");
  }
  ++pos;  // single whitespace after maxval
  if (w < 1 || h < 1 || maxval != 65535) {
    fail(ErrorCode::kFormatError, path + ": expected 16-bit PGM");
  }
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (bytes.size() < pos + 2 * n) fail(ErrorCode::kFormatError, path + ": truncated PGM");
  LabelImage image(w, h);
  for (std::size_t i = 0; i < n; ++i) {
    image.data[i] = (Label{bytes[pos + 2 * i]} << 8) | Label{bytes[pos + 2 * i + 1]};
  }
  return image;
}

void write_depth(const std::string& path, const DepthImage& depth) {
  std::string buf = "D32F";
  put_u32_le(buf, static_cast<std::uint32_t>(depth.width));
  put_u32_le(buf, static_cast<std::uint32_t>(depth.height));
  put_u32_le(buf, 0);
  for (float d : depth.data) {
    put_u32_le(buf, std::bit_cast<std::uint32_t>(std::isfinite(d) ? d : 0.0f));
  }
  write_text_file(path, buf);
}

DepthImage read_depth(const std::string& path) {
  const auto bytes = read_binary_file(path);
  if (bytes.size() < 16 || std::memcmp(bytes.data(), "D32F", 4) != 0) {
    fail(ErrorCode::kFormatError, path + ": bad depth magic");
  }
  const std::uint32_t w = get_u32_le(bytes.data() + 4);
  const std::uint32_t h = get_u32_le(bytes.data() + 8);
  const std::size_t n = static_cast<std::size_t>(w) * h;
  if (w == 0 || h == 0 || bytes.size() != 16 + 4 * n) {
    fail(ErrorCode::kFormatError, path + ": bad depth size");
  }
  DepthImage depth(static_cast<int>(w), static_cast<int>(h));
  for (std::size_t i = 0; i < n; ++i) {
    const float d = std::bit_cast<float>(get_u32_le(bytes.data() + 16 + 4 * i));
    depth.data[i] = d > 0.0f ? d : kNoDepth;
  }
  return depth;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIoError, "cannot write " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) fail(ErrorCode::kIoError, "write failed: " + path);
}

std::vector<std::uint8_t> read_binary_file(const std::string& path) {
  const std::string text = read_text_file(path);
  return {text.begin(), text.end()};
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_file_hex(const std::string& path) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(read_text_file(path));
  return ss.str();
}

void ensure_directory(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec || !std::filesystem::is_directory(path)) {
    fail(ErrorCode::kIoError, "cannot create directory " + path);
  }
  const auto probe = std::filesystem::path(path) / ".write_probe";
  {
    std::ofstream out(probe);
    if (!out) fail(ErrorCode::kIoError, "directory not writable: " + path);
  }
  std::filesystem::remove(probe, ec);
}

}  // namespace masklift
