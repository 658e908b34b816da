#include "ditto/image.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "ditto/error.hpp"

namespace ditto {

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](auto b) { return b != 0; }));
}

Mask intersect(const Mask& a, const Mask& b) {
  if (a.size != b.size) throw Error(ErrorKind::DimensionMismatch, "mask intersection: size mismatch");
  Mask out(a.size);
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = (a.data[i] && b.data[i]) ? 1 : 0;
  return out;
}

namespace {

std::uint32_t to_little(std::uint32_t x) {
  if constexpr (std::endian::native == std::endian::little) return x;
  return ((x & 0xffu) << 24) | ((x & 0xff00u) << 8) | ((x >> 8) & 0xff00u) | (x >> 24);
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_all(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::Io, "short write to " + path.string());
}

}  // namespace

DepthImage read_depth(const std::filesystem::path& path, ImageSize size) {
  const std::string bytes = read_all(path);
  DepthImage img(size);
  if (bytes.size() != img.data.size() * 4) {
    throw Error(ErrorKind::Malformed, path.string() + ": expected " + std::to_string(img.data.size() * 4) +
                                          " bytes of float32 depth, found " + std::to_string(bytes.size()));
  }
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    std::uint32_t raw;
    std::memcpy(&raw, bytes.data() + 4 * i, 4);
    img.data[i] = std::bit_cast<float>(to_little(raw));
  }
  return img;
}

void write_depth(const std::filesystem::path& path, const DepthImage& depth) {
  std::string bytes(depth.data.size() * 4, '\0');
  for (std::size_t i = 0; i < depth.data.size(); ++i) {
    const std::uint32_t raw = to_little(std::bit_cast<std::uint32_t>(depth.data[i]));
    std::memcpy(bytes.data() + 4 * i, &raw, 4);
  }
  write_all(path, bytes);
}

Mask read_mask(const std::filesystem::path& path) {
  const std::string bytes = read_all(path);
  std::size_t pos = 0;
  auto fail = [&](const std::string& what) {
    throw Error(ErrorKind::Malformed, path.string() + ": " + what + " at byte " + std::to_string(pos));
  };
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&] {
    skip_space();
    std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) fail("expected integer");
    return std::stoi(bytes.substr(start, pos - start));
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') fail("not a binary PGM (P5)");
  pos = 2;
  const int w = read_int();
  const int h = read_int();
  const int maxval = read_int();
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) fail("unsupported PGM header");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) fail("missing header terminator");
  ++pos;
  Mask m(ImageSize{w, h});
  if (bytes.size() - pos != m.data.size()) fail("pixel payload size mismatch");
  for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] = bytes[pos + i] != 0 ? 1 : 0;
  return m;
}

void write_mask(const std::filesystem::path& path, const Mask& mask) {
  std::string bytes = "P5\n" + std::to_string(mask.size.width) + " " + std::to_string(mask.size.height) + "\n255\n";
  bytes.reserve(bytes.size() + mask.data.size());
  for (auto b : mask.data) bytes.push_back(b ? static_cast<char>(255) : '\0');
  write_all(path, bytes);
}

}  // namespace ditto
