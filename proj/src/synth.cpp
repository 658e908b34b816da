#include "ditto/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "ditto/error.hpp"
#include "ditto/rng.hpp"

namespace ditto {

const char* to_string(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::Box: return "box";
    case ShapeKind::Cylinder: return "cylinder";
    case ShapeKind::Blob: return "blob";
    case ShapeKind::Disk: return "disk";
  }
  return "box";
}

ShapeKind shape_from_string(const std::string& name) {
  if (name == "box") return ShapeKind::Box;
  if (name == "cylinder") return ShapeKind::Cylinder;
  if (name == "blob") return ShapeKind::Blob;
  if (name == "disk") return ShapeKind::Disk;
  throw Error(ErrorKind::ConfigInvalid, "unknown shape \"" + name + "\" (box, cylinder, blob, disk)");
}

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kFrontSurfaceTolerance = 0.004;  // meters

int steps_for(double length, double spacing) {
  return std::max(1, static_cast<int>(std::ceil(length / spacing)));
}

// Grid over a rectangle spanned by `eu`, `ev` around `center`, pixel-centred.
void sample_rect(PointCloud& out, const Point3& center, const Point3& eu, const Point3& ev, double spacing) {
  const int nu = steps_for(2.0 * eu.norm(), spacing);
  const int nv = steps_for(2.0 * ev.norm(), spacing);
  for (int i = 0; i < nu; ++i) {
    for (int j = 0; j < nv; ++j) {
      const double a = -1.0 + (2.0 * i + 1.0) / nu;
      const double b = -1.0 + (2.0 * j + 1.0) / nv;
      out.push_back(center + a * eu + b * ev);
    }
  }
}

void sample_disk(PointCloud& out, const Point3& center, double radius, double z_sign, double spacing) {
  const int rings = steps_for(radius, spacing);
  for (int r = 0; r < rings; ++r) {
    const double rad = radius * (r + 0.5) / rings;
    const int n = steps_for(2.0 * kPi * rad, spacing);
    for (int i = 0; i < n; ++i) {
      const double th = 2.0 * kPi * (i + 0.5 * (r % 2)) / n;
      out.push_back(center + Point3(rad * std::cos(th), z_sign * rad * std::sin(th), 0.0));
    }
  }
}

}  // namespace

PointCloud sample_surface(const ShapeSpec& shape) {
  if (!(shape.size > 0.0) || !(shape.spacing > 0.0)) {
    throw Error(ErrorKind::ConfigInvalid, "shape size and spacing must be positive");
  }
  PointCloud out;
  const double s = shape.size;
  const double h = shape.spacing;
  switch (shape.kind) {
    case ShapeKind::Box: {
      const Point3 half(0.5 * s, 0.35 * s, 0.25 * s);
      for (int a = 0; a < 3; ++a) {
        const int b = (a + 1) % 3;
        const int c = (a + 2) % 3;
        for (double sign : {-1.0, 1.0}) {
          Point3 center = Point3::Zero();
          center[a] = sign * half[a];
          Point3 eu = Point3::Zero();
          Point3 ev = Point3::Zero();
          eu[b] = half[b];
          ev[c] = half[c];
          sample_rect(out, center, eu, ev, h);
        }
      }
      break;
    }
    case ShapeKind::Cylinder: {
      const double radius = 0.3 * s;
      const double half_h = 0.5 * s;
      const int around = steps_for(2.0 * kPi * radius, h);
      const int along = steps_for(2.0 * half_h, h);
      for (int i = 0; i < around; ++i) {
        const double th = 2.0 * kPi * (i + 0.5) / around;
        for (int j = 0; j < along; ++j) {
          const double z = -half_h + (j + 0.5) * 2.0 * half_h / along;
          out.emplace_back(radius * std::cos(th), radius * std::sin(th), z);
        }
      }
      sample_disk(out, Point3(0, 0, half_h), radius, 1.0, h);
      sample_disk(out, Point3(0, 0, -half_h), radius, -1.0, h);
      break;
    }
    case ShapeKind::Blob: {
      // Lumpy sphere, Fibonacci-lattice directions.
      const double radius = 0.5 * s;
      const double area = 4.0 * kPi * radius * radius * 1.3;
      const int n = std::max(16, static_cast<int>(area / (h * h)));
      const double golden = kPi * (3.0 - std::sqrt(5.0));
      for (int i = 0; i < n; ++i) {
        const double z = 1.0 - (2.0 * i + 1.0) / n;
        const double rxy = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double phi = golden * i;
        const Point3 dir(rxy * std::cos(phi), rxy * std::sin(phi), z);
        const double theta = std::acos(z);
        const double r = radius * (1.0 + 0.15 * std::sin(3.0 * theta) * std::cos(2.0 * phi));
        out.push_back(r * dir);
      }
      break;
    }
    case ShapeKind::Disk:
      sample_disk(out, Point3::Zero(), 0.5 * s, 1.0, h);
      break;
  }
  return out;
}

Mask RenderedFrame::mask(int object_id) const {
  Mask m(depth.size);
  for (std::size_t i = 0; i < owner_object.size(); ++i) m.data[i] = owner_object[i] == object_id ? 1 : 0;
  return m;
}

RenderedFrame render_scene(std::span<const SceneObject> objects, const CameraIntrinsics& k) {
  const ImageSize size{k.width, k.height};
  RenderedFrame f;
  f.depth = DepthImage(size);
  const std::size_t n = static_cast<std::size_t>(size.width) * size.height;
  f.owner_object.assign(n, -1);
  f.owner_point.assign(n, -1);
  std::vector<double> zmin(n, std::numeric_limits<double>::infinity());
  std::vector<int> front(n, -1);

  struct Splat {
    std::size_t pixel;
    double z;
    double offset;  // squared distance to the pixel centre
  };
  std::vector<std::vector<Splat>> splats(objects.size());
  for (std::size_t o = 0; o < objects.size(); ++o) {
    const auto& obj = objects[o];
    const Eigen::Matrix3d r = obj.pose.rotation_matrix();
    const PointCloud& cloud = *obj.cloud;
    auto& out = splats[o];
    out.resize(cloud.size(), Splat{n, 0.0, 0.0});
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Point3 p = r * cloud[i] + obj.pose.translation();
      if (!(p.z() > 0.0)) continue;
      const Pixel px = project(p, k);
      const auto pix = nearest_pixel(px.u, px.v, size);
      if (!pix) continue;
      const std::size_t idx = static_cast<std::size_t>(pix->y) * size.width + pix->x;
      const double du = px.u - pix->x;
      const double dv = px.v - pix->y;
      out[i] = Splat{idx, p.z(), du * du + dv * dv};
      if (p.z() < zmin[idx]) {
        zmin[idx] = p.z();
        front[idx] = static_cast<int>(o);
      }
    }
  }

  // A pixel the nearer surface spans but no point of it landed in is a gap in
  // the sampling; it stays empty instead of showing the far side.
  std::vector<char> gap(n, 0);
  const int offsets[4][2] = {{1, 0}, {0, 1}, {1, 1}, {1, -1}};
  for (int y = 0; y < size.height; ++y) {
    for (int x = 0; x < size.width; ++x) {
      const std::size_t idx = static_cast<std::size_t>(y) * size.width + x;
      if (front[idx] < 0) continue;
      for (const auto& d : offsets) {
        const int xa = x - d[0], ya = y - d[1], xb = x + d[0], yb = y + d[1];
        if (xa < 0 || xb < 0 || xa >= size.width || xb >= size.width || ya < 0 || yb < 0 || ya >= size.height ||
            yb >= size.height) {
          continue;
        }
        const double za = zmin[static_cast<std::size_t>(ya) * size.width + xa];
        const double zb = zmin[static_cast<std::size_t>(yb) * size.width + xb];
        if (0.5 * (za + zb) + kFrontSurfaceTolerance < zmin[idx]) {
          gap[idx] = 1;
          break;
        }
      }
    }
  }

  // Among the front-surface points of the nearest object, the one closest to
  // the pixel centre owns the pixel, so depth samples the surface at centres.
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  for (std::size_t o = 0; o < objects.size(); ++o) {
    const auto& out = splats[o];
    for (std::size_t i = 0; i < out.size(); ++i) {
      const Splat& s = out[i];
      if (s.pixel == n || gap[s.pixel] || front[s.pixel] != static_cast<int>(o)) continue;
      if (s.z > zmin[s.pixel] + kFrontSurfaceTolerance) continue;
      if (s.offset < best[s.pixel]) {
        best[s.pixel] = s.offset;
        f.owner_object[s.pixel] = objects[o].id;
        f.owner_point[s.pixel] = static_cast<std::int32_t>(i);
        f.depth.data[s.pixel] = static_cast<float>(s.z);
      }
    }
  }
  return f;
}

void add_depth_noise(DepthImage& depth, double sigma, std::uint64_t seed) {
  if (sigma <= 0.0) return;
  Rng rng(seed);
  for (float& d : depth.data) {
    if (d > 0.0f) d = static_cast<float>(d + rng.normal(0.0, sigma));
  }
}

void SyntheticNoiseParams::validate() const {
  if (!(pixel_sigma >= 0.0) || !(depth_sigma >= 0.0) || !(outlier_fraction >= 0.0) || !(outlier_fraction < 1.0)) {
    throw Error(ErrorKind::ConfigInvalid,
                "noise: need pixel_sigma >= 0, depth_sigma >= 0, outlier_fraction in [0,1)");
  }
}

namespace {

const SceneObject* find_object(std::span<const SceneObject> scene, int id) {
  for (const auto& o : scene) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

}  // namespace

SyntheticMatches match_rendered(std::span<const SceneObject> scene_a, const RenderedFrame& render_a,
                                std::span<const SceneObject> scene_b, const RenderedFrame& render_b,
                                std::span<const int> object_ids, const CameraIntrinsics& k,
                                const SyntheticNoiseParams& noise) {
  noise.validate();
  const ImageSize size{k.width, k.height};
  SyntheticMatches out;
  for (int id : object_ids) {
    const SceneObject* a = find_object(scene_a, id);
    const SceneObject* b = find_object(scene_b, id);
    if (!a || !b) continue;
    const Eigen::Matrix3d ra = a->pose.rotation_matrix();
    const Eigen::Matrix3d rb = b->pose.rotation_matrix();
    const PointCloud& cloud = *a->cloud;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
      const Point3 pa = ra * cloud[i] + a->pose.translation();
      const Point3 pb = rb * cloud[i] + b->pose.translation();
      if (!(pa.z() > 0.0) || !(pb.z() > 0.0)) continue;
      const Pixel xa = project(pa, k);
      const Pixel xb = project(pb, k);
      const auto ia = nearest_pixel(xa.u, xa.v, size);
      const auto ib = nearest_pixel(xb.u, xb.v, size);
      const auto pid = static_cast<std::int32_t>(i);
      if (!ia || !ib || !render_a.owns(id, pid, *ia) || !render_b.owns(id, pid, *ib)) continue;
      out.set.matches.push_back({xa.u, xa.v, xb.u, xb.v, 1.0});
    }
  }

  Rng rng(noise.seed);
  const double umax = size.width - 1.0;
  const double vmax = size.height - 1.0;
  if (noise.pixel_sigma > 0.0) {
    for (auto& m : out.set.matches) {
      m.u2 = std::clamp(m.u2 + rng.normal(0.0, noise.pixel_sigma), 0.0, umax);
      m.v2 = std::clamp(m.v2 + rng.normal(0.0, noise.pixel_sigma), 0.0, vmax);
    }
  }
  const std::size_t n = out.set.matches.size();
  out.planted_outlier.assign(n, false);
  const auto n_out = static_cast<std::size_t>(std::floor(noise.outlier_fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t j = 0; j < n_out; ++j) {
    const std::size_t pick = j + static_cast<std::size_t>(rng.index(n - j));
    std::swap(order[j], order[pick]);
    auto& m = out.set.matches[order[j]];
    m.u2 = rng.uniform(0.0, umax);
    m.v2 = rng.uniform(0.0, vmax);
    out.planted_outlier[order[j]] = true;
  }
  for (auto& m : out.set.matches) {
    m.u1 = quantize_coordinate(m.u1);
    m.v1 = quantize_coordinate(m.v1);
    m.u2 = quantize_coordinate(m.u2);
    m.v2 = quantize_coordinate(m.v2);
  }
  return out;
}

SyntheticPair synthesize_correspondences(const PointCloud& cloud, const Pose& motion, const CameraIntrinsics& k,
                                         const SyntheticNoiseParams& noise) {
  k.validate();
  noise.validate();
  if (cloud.empty()) throw Error(ErrorKind::EmptyCloud, "synthesize_correspondences: empty cloud");
  for (const auto& p : cloud) {
    if (!(p.z() > 0.0) || !(motion.apply(p).z() > 0.0)) {
      throw Error(ErrorKind::BehindCamera, "synthesize_correspondences: point not in front of the camera");
    }
  }
  const SceneObject before{0, &cloud, Pose::identity()};
  const SceneObject after{0, &cloud, motion};
  const RenderedFrame ra = render_scene(std::span(&before, 1), k);
  const RenderedFrame rb = render_scene(std::span(&after, 1), k);
  const int ids[] = {0};
  SyntheticNoiseParams match_noise = noise;
  match_noise.seed = mix_seed(noise.seed, 3);
  SyntheticMatches m = match_rendered(std::span(&before, 1), ra, std::span(&after, 1), rb, ids, k, match_noise);

  SyntheticPair out;
  out.correspondences = std::move(m.set);
  out.correspondences.source_frame = "src";
  out.correspondences.target_frame = "dst";
  out.planted_outlier = std::move(m.planted_outlier);
  out.depth_src = ra.depth;
  out.depth_dst = rb.depth;
  add_depth_noise(out.depth_src, noise.depth_sigma, mix_seed(noise.seed, 1));
  add_depth_noise(out.depth_dst, noise.depth_sigma, mix_seed(noise.seed, 2));
  out.mask_src = ra.mask(0);
  out.mask_dst = rb.mask(0);
  return out;
}

}  // namespace ditto
