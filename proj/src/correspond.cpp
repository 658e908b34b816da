#include "ditto/correspond.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "ditto/error.hpp"
#include "ditto/fileio.hpp"

namespace ditto {

using nlohmann::json;

CorrespondenceSet filter_by_mask(const CorrespondenceSet& c, const Mask& mask,
                                 std::optional<ImageSize> source_size) {
  if (source_size && *source_size != mask.size) {
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("filter_by_mask: mask is {}x{}, source frame is {}x{}", mask.size.width,
                            mask.size.height, source_size->width, source_size->height));
  }
  CorrespondenceSet out{c.source_frame, c.target_frame, {}};
  for (const auto& m : c.matches) {
    if (mask.contains(m.u1, m.v1)) out.matches.push_back(m);
  }
  return out;
}

namespace {

std::optional<double> depth_at(const DepthImage& depth, double u, double v) {
  const auto p = nearest_pixel(u, v, depth.size);
  if (!p) return std::nullopt;
  const double d = depth.at(p->x, p->y);
  if (!is_valid_depth(d)) return std::nullopt;
  return d;
}

}  // namespace

PointPairSet lift_correspondences(const CorrespondenceSet& c, const DepthImage& depth_src,
                                  const DepthImage& depth_dst, const CameraIntrinsics& k,
                                  std::vector<std::size_t>* kept) {
  const ImageSize expected{k.width, k.height};
  if (depth_src.size != expected || depth_dst.size != expected) {
    throw Error(ErrorKind::DimensionMismatch, "lift_correspondences: depth image does not match intrinsics");
  }
  PointPairSet out;
  if (kept) kept->clear();
  for (std::size_t i = 0; i < c.matches.size(); ++i) {
    const Match& m = c.matches[i];
    const auto ds = depth_at(depth_src, m.u1, m.v1);
    const auto dd = depth_at(depth_dst, m.u2, m.v2);
    if (!ds || !dd) continue;
    out.add(backproject(m.u1, m.v1, *ds, k), backproject(m.u2, m.v2, *dd, k), m.confidence);
    if (kept) kept->push_back(i);
  }
  return out;
}

PointCloud lift_mask(const DepthImage& depth, const Mask* mask, const CameraIntrinsics& k) {
  if (mask && mask->size != depth.size) {
    throw Error(ErrorKind::DimensionMismatch, "lift_mask: mask does not match depth image");
  }
  PointCloud cloud;
  for (int y = 0; y < depth.size.height; ++y) {
    for (int x = 0; x < depth.size.width; ++x) {
      if (mask && !mask->at(x, y)) continue;
      const double d = depth.at(x, y);
      if (is_valid_depth(d)) cloud.push_back(backproject(x, y, d, k));
    }
  }
  return cloud;
}

double quantize_coordinate(double x) { return std::round(x * 1e6) / 1e6; }

std::string serialize_correspondences(const CorrespondenceSet& c) {
  std::string out = fmt::format("{{\"source_frame\":{},\"target_frame\":{},\"matches\":[",
                                json(c.source_frame).dump(), json(c.target_frame).dump());
  for (std::size_t i = 0; i < c.matches.size(); ++i) {
    const auto& m = c.matches[i];
    fmt::format_to(std::back_inserter(out),
                   "{}\n{{\"u1\":{:.6f},\"v1\":{:.6f},\"u2\":{:.6f},\"v2\":{:.6f},\"conf\":{:.6f}}}",
                   i == 0 ? "" : ",", m.u1, m.v1, m.u2, m.v2, m.confidence);
  }
  out += "]}\n";
  return out;
}

namespace {

std::string locate(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return fmt::format("line {}, column {} (byte {})", line, col, byte);
}

double number_field(const json& m, const char* key, std::size_t index, const std::string& origin) {
  const auto it = m.find(key);
  if (it == m.end() || !it->is_number()) {
    throw Error(ErrorKind::Malformed,
                fmt::format("{}: match {} is missing numeric field \"{}\"", origin, index, key));
  }
  const double v = it->get<double>();
  if (!std::isfinite(v)) {
    throw Error(ErrorKind::Malformed, fmt::format("{}: match {} field \"{}\" is not finite", origin, index, key));
  }
  return v;
}

}  // namespace

CorrespondenceSet parse_correspondences(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Malformed, fmt::format("{}: JSON syntax error at {}", origin, locate(text, e.byte)));
  }
  if (!doc.is_object() || !doc.contains("matches") || !doc["matches"].is_array()) {
    throw Error(ErrorKind::Malformed, origin + ": expected an object with a \"matches\" array");
  }
  CorrespondenceSet c;
  for (const char* key : {"source_frame", "target_frame"}) {
    if (doc.contains(key) && !doc[key].is_string()) {
      throw Error(ErrorKind::Malformed, fmt::format("{}: \"{}\" must be a string", origin, key));
    }
  }
  c.source_frame = doc.value("source_frame", "");
  c.target_frame = doc.value("target_frame", "");
  const auto& matches = doc["matches"];
  c.matches.reserve(matches.size());
  for (std::size_t i = 0; i < matches.size(); ++i) {
    const auto& m = matches[i];
    if (!m.is_object()) throw Error(ErrorKind::Malformed, fmt::format("{}: match {} is not an object", origin, i));
    Match out{number_field(m, "u1", i, origin), number_field(m, "v1", i, origin), number_field(m, "u2", i, origin),
              number_field(m, "v2", i, origin), number_field(m, "conf", i, origin)};
    if (out.confidence < 0.0 || out.confidence > 1.0) {
      throw Error(ErrorKind::Malformed,
                  fmt::format("{}: match {} confidence {} outside [0,1]", origin, i, out.confidence));
    }
    c.matches.push_back(out);
  }
  return c;
}

CorrespondenceSet load_correspondences(const std::filesystem::path& path) {
  return parse_correspondences(read_text_file(path), path.string());
}

void store_correspondences(const std::filesystem::path& path, const CorrespondenceSet& c) {
  write_text_file_atomic(path, serialize_correspondences(c));
}

}  // namespace ditto
