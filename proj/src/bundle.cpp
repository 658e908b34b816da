#include "ditto/bundle.hpp"

#include <fmt/format.h>

#include <cmath>
#include <system_error>

#include "ditto/error.hpp"
#include "ditto/fileio.hpp"
#include "ditto/json_io.hpp"

namespace ditto {

namespace fs = std::filesystem;
using nlohmann::json;

void EpisodeBundle::validate() const {
  const ImageSize size = image_size();
  if (frames.size() < 2) throw Error(ErrorKind::Malformed, "bundle needs at least 2 frames");
  if (grasp_frame_index >= frames.size()) {
    throw Error(ErrorKind::Malformed, "grasp_frame_index outside the frame range");
  }
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    const bool ok = f.depth.size == size && f.object_mask.size == size &&
                    (!f.secondary_mask || f.secondary_mask->size == size) &&
                    (!f.hand_mask || f.hand_mask->size == size);
    if (!ok) throw Error(ErrorKind::Malformed, fmt::format("frame {}: image dimensions differ from intrinsics", i));
  }
  for (const auto& [key, set] : correspondences) {
    if (key.first >= frames.size() || key.second >= frames.size()) {
      throw Error(ErrorKind::Malformed, fmt::format("correspondences {}->{} reference a missing frame", key.first,
                                                    key.second));
    }
  }
}

json grasps_to_json(const std::vector<GraspCandidate>& grasps) {
  json arr = json::array();
  for (const auto& g : grasps) arr.push_back({{"pose", pose_to_json(g.pose)}, {"score", g.score}});
  return {{"grasps", arr}};
}

std::vector<GraspCandidate> grasps_from_json(const json& j) {
  const json& arr = require(j, "grasps", "grasp file");
  if (!arr.is_array()) throw Error(ErrorKind::Malformed, "grasp file: \"grasps\" must be an array");
  std::vector<GraspCandidate> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const std::string where = fmt::format("grasps[{}]", i);
    out.push_back({pose_from_json(require(arr[i], "pose", where), where + ".pose"),
                   require_number(arr[i], "score", where)});
  }
  return out;
}

namespace {

std::string frame_file(const char* stem, std::size_t i, const char* ext) {
  return fmt::format("frames/{}_{:03d}.{}", stem, i, ext);
}

std::string corr_file(std::size_t a, std::size_t b) { return fmt::format("frames/corr_{:03d}_{:03d}.json", a, b); }

void write_json(const fs::path& path, const json& j) { write_text_file_atomic(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Malformed, fmt::format("{}: JSON syntax error at byte {}", path.string(), e.byte));
  }
}

std::string path_field(const json& j, const char* key, const std::string& where) {
  const json& v = require(j, key, where);
  if (!v.is_string()) throw Error(ErrorKind::Malformed, where + ": \"" + key + "\" must be a path string");
  return v.get<std::string>();
}

}  // namespace

void store_bundle(const EpisodeBundle& bundle, const fs::path& dir) {
  bundle.validate();
  std::error_code ec;
  fs::create_directories(dir / "frames", ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create bundle directory " + (dir / "frames").string());

  json frames = json::array();
  for (std::size_t i = 0; i < bundle.frames.size(); ++i) {
    const auto& f = bundle.frames[i];
    json rec;
    rec["depth"] = frame_file("depth", i, "bin");
    write_depth(dir / rec["depth"].get<std::string>(), f.depth);
    rec["mask"] = frame_file("mask", i, "pgm");
    write_mask(dir / rec["mask"].get<std::string>(), f.object_mask);
    if (f.secondary_mask) {
      rec["secondary_mask"] = frame_file("secondary_mask", i, "pgm");
      write_mask(dir / rec["secondary_mask"].get<std::string>(), *f.secondary_mask);
    }
    if (f.hand_mask) {
      rec["hand_mask"] = frame_file("hand_mask", i, "pgm");
      write_mask(dir / rec["hand_mask"].get<std::string>(), *f.hand_mask);
    }
    json to = json::object();
    for (const auto& [key, set] : bundle.correspondences) {
      if (key.first != i) continue;
      const std::string rel = corr_file(key.first, key.second);
      store_correspondences(dir / rel, set);
      if (key.second == i + 1) {
        rec["correspondence_to_next"] = rel;
      } else {
        to[std::to_string(key.second)] = rel;
      }
    }
    if (!to.empty()) rec["correspondences_to"] = to;
    rec["discarded"] = f.discarded;
    frames.push_back(rec);
  }

  json manifest;
  manifest["format_version"] = 1;
  manifest["intrinsics"] = intrinsics_to_json(bundle.intrinsics);
  manifest["grasp_frame_index"] = bundle.grasp_frame_index;
  manifest["frames"] = frames;
  if (!bundle.grasps.empty()) {
    manifest["grasps"] = "grasps.json";
    write_json(dir / "grasps.json", grasps_to_json(bundle.grasps));
  }
  if (bundle.ground_truth) {
    manifest["ground_truth"] = "ground_truth.json";
    write_json(dir / "ground_truth.json", *bundle.ground_truth);
  }
  write_json(dir / "manifest.json", manifest);
}

EpisodeBundle load_bundle(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) {
    throw Error(ErrorKind::Malformed, "no manifest.json in bundle " + dir.string());
  }
  const json manifest = read_json(manifest_path);
  const std::string where = manifest_path.string();
  EpisodeBundle b;
  b.intrinsics = intrinsics_from_json(require(manifest, "intrinsics", where));
  const ImageSize size = b.image_size();
  b.grasp_frame_index = static_cast<std::size_t>(require_number(manifest, "grasp_frame_index", where));
  const json& frames = require(manifest, "frames", where);
  if (!frames.is_array()) throw Error(ErrorKind::Malformed, where + ": \"frames\" must be an array");

  auto load_mask = [&](const std::string& rel, std::size_t i) {
    Mask m = read_mask(dir / rel);
    if (m.size != size) {
      throw Error(ErrorKind::Malformed, fmt::format("frame {}: mask {} is {}x{}, intrinsics say {}x{}", i, rel,
                                                    m.size.width, m.size.height, size.width, size.height));
    }
    return m;
  };
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const json& rec = frames[i];
    const std::string fw = fmt::format("{}: frames[{}]", where, i);
    FrameRecord f;
    f.depth = read_depth(dir / path_field(rec, "depth", fw), size);
    f.object_mask = load_mask(path_field(rec, "mask", fw), i);
    if (rec.contains("secondary_mask")) f.secondary_mask = load_mask(path_field(rec, "secondary_mask", fw), i);
    if (rec.contains("hand_mask")) f.hand_mask = load_mask(path_field(rec, "hand_mask", fw), i);
    f.discarded = rec.value("discarded", false);
    if (rec.contains("correspondence_to_next")) {
      b.correspondences[{i, i + 1}] = load_correspondences(dir / path_field(rec, "correspondence_to_next", fw));
    }
    if (rec.contains("correspondences_to")) {
      for (const auto& [target, rel] : rec["correspondences_to"].items()) {
        std::size_t t = 0;
        try {
          t = std::stoul(target);
        } catch (const std::exception&) {
          throw Error(ErrorKind::Malformed, fw + ": correspondences_to key \"" + target + "\" is not a frame index");
        }
        if (!rel.is_string()) throw Error(ErrorKind::Malformed, fw + ": correspondences_to values must be paths");
        b.correspondences[{i, t}] = load_correspondences(dir / rel.get<std::string>());
      }
    }
    b.frames.push_back(std::move(f));
  }
  if (manifest.contains("grasps")) b.grasps = grasps_from_json(read_json(dir / path_field(manifest, "grasps", where)));
  if (manifest.contains("ground_truth")) b.ground_truth = read_json(dir / path_field(manifest, "ground_truth", where));
  b.validate();
  return b;
}

bool BundleCorrespondences::has(std::size_t src, std::size_t dst) const {
  return bundle_->correspondences.count({src, dst}) != 0;
}

CorrespondenceSet BundleCorrespondences::get(std::size_t src, std::size_t dst) const {
  const auto it = bundle_->correspondences.find({src, dst});
  if (it == bundle_->correspondences.end()) {
    throw Error(ErrorKind::Malformed, fmt::format("no correspondence file for frames {} -> {}", src, dst));
  }
  return it->second;
}

std::vector<std::size_t> select_frames(const EpisodeBundle& bundle, std::size_t max_frames) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < bundle.frames.size(); ++i) {
    if (!bundle.frames[i].discarded) kept.push_back(i);
  }
  if (max_frames < 2 || kept.size() <= max_frames) return kept;
  std::vector<std::size_t> out;
  const double step = static_cast<double>(kept.size() - 1) / static_cast<double>(max_frames - 1);
  for (std::size_t k = 0; k < max_frames; ++k) {
    out.push_back(kept[static_cast<std::size_t>(std::llround(step * static_cast<double>(k)))]);
  }
  return out;
}

}  // namespace ditto
