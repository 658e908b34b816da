#include "ditto/eval.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <memory>
#include <set>
#include <sstream>

#include "ditto/demo.hpp"
#include "ditto/error.hpp"
#include "ditto/scene.hpp"

namespace ditto {

using nlohmann::json;

TrackingMetrics tracking_metrics(const CorrespondenceSet& c, const Mask& target_mask, double runtime_seconds,
                                 std::optional<ImageSize> target_size) {
  if (target_size && !(target_mask.size == *target_size)) {
    throw Error(ErrorKind::DimensionMismatch,
                fmt::format("tracking_metrics: mask is {}x{}, target frame is {}x{}", target_mask.size.width,
                            target_mask.size.height, target_size->width, target_size->height));
  }
  TrackingMetrics m;
  m.total = c.size();
  m.runtime_seconds = runtime_seconds;
  for (const auto& match : c.matches) {
    if (target_mask.contains(match.u2, match.v2)) ++m.inlier_count;
  }
  if (m.total == 0) {
    m.degenerate = true;
  } else {
    m.inlier_rate = 100.0 * static_cast<double>(m.inlier_count) / static_cast<double>(m.total);
  }
  return m;
}

TrajectoryErrorMetrics trajectory_errors(const std::vector<Pose>& pred, const std::vector<Pose>& gt) {
  if (pred.size() != gt.size() || pred.empty()) {
    throw Error(ErrorKind::LengthMismatch,
                fmt::format("trajectory_errors: {} predicted vs {} reference steps", pred.size(), gt.size()));
  }
  TrajectoryErrorMetrics out;
  out.per_step.reserve(pred.size());
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const PoseError e = pose_error(pred[k], gt[k]);
    out.per_step.push_back(e);
    out.mean_rot_err += e.rotation;
    out.mean_trans_err += e.translation;
  }
  out.mean_rot_err /= static_cast<double>(pred.size());
  out.mean_trans_err /= static_cast<double>(pred.size());
  return out;
}

const char* to_string(Protocol p) {
  switch (p) {
    case Protocol::IntraDemo: return "intra";
    case Protocol::InterDemo: return "inter";
    case Protocol::Trajectory: return "trajectory";
  }
  return "?";
}

Protocol protocol_from_string(const std::string& s) {
  if (s == "intra" || s == "intra_demo") return Protocol::IntraDemo;
  if (s == "inter" || s == "inter_demo") return Protocol::InterDemo;
  if (s == "trajectory") return Protocol::Trajectory;
  throw Error(ErrorKind::InvalidArgument, "unknown protocol \"" + s + "\"");
}

// ---------------------------------------------------------------------------
// Report serialization

namespace {

bool is_tracking(Protocol p) { return p != Protocol::Trajectory; }

const char* const kTrackingHeader = "protocol,method,detection,pair,samples,inlier_rate_pct,inlier_count,runtime_s";
const char* const kTrajectoryHeader = "protocol,method,detection,pair,samples,rot_err_rad,trans_err_m";

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::string num(double x) { return fmt::format("{}", x); }

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, row_open = false;
  std::size_t line = 1;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (ch == '\n') ++line;
        field += ch;
      }
      continue;
    }
    if (ch == '"' && field.empty()) {
      quoted = true;
      row_open = true;
    } else if (ch == ',') {
      row.push_back(std::move(field));
      field.clear();
      row_open = true;
    } else if (ch == '\n' || ch == '\r') {
      if (ch == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (row_open || !field.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      row_open = false;
      ++line;
    } else {
      field += ch;
      row_open = true;
    }
  }
  if (quoted) throw Error(ErrorKind::Malformed, fmt::format("report csv: unterminated quote at line {}", line));
  if (row_open || !field.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

double parse_double(const std::string& s, std::size_t row) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw Error(ErrorKind::Malformed, fmt::format("report csv: row {}: \"{}\" is not a number", row, s));
  }
  return v;
}

std::size_t parse_count(const std::string& s, std::size_t row) {
  if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
    throw Error(ErrorKind::Malformed, fmt::format("report csv: row {}: \"{}\" is not a count", row, s));
  }
  return std::stoull(s);
}

}  // namespace

std::string report_to_csv(const MetricsReport& r) {
  std::string out = is_tracking(r.protocol) ? kTrackingHeader : kTrajectoryHeader;
  out += '\n';
  const std::string proto = to_string(r.protocol);
  if (is_tracking(r.protocol)) {
    for (const auto& row : r.tracking) {
      out += fmt::format("{},{},{},{},{},{},{},{}\n", proto, csv_field(row.method), csv_field(row.detection),
                         csv_field(row.pair), row.samples, num(row.inlier_rate_pct), num(row.inlier_count),
                         num(row.runtime_s));
    }
  } else {
    for (const auto& row : r.trajectory) {
      out += fmt::format("{},{},{},{},{},{},{}\n", proto, csv_field(row.method), csv_field(row.detection),
                         csv_field(row.pair), row.samples, num(row.rot_err_rad), num(row.trans_err_m));
    }
  }
  return out;
}

MetricsReport report_from_csv(const std::string& text) {
  const auto rows = parse_csv(text);
  if (rows.empty()) throw Error(ErrorKind::Malformed, "report csv: missing header");
  std::string header;
  for (std::size_t i = 0; i < rows[0].size(); ++i) header += (i ? "," : "") + rows[0][i];
  MetricsReport r;
  bool tracking;
  if (header == kTrackingHeader) {
    tracking = true;
  } else if (header == kTrajectoryHeader) {
    tracking = false;
    r.protocol = Protocol::Trajectory;
  } else {
    throw Error(ErrorKind::Malformed, "report csv: unrecognized header \"" + header + "\"");
  }
  const std::size_t width = tracking ? 8 : 7;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i];
    if (f.size() != width) {
      throw Error(ErrorKind::Malformed, fmt::format("report csv: row {} has {} fields, expected {}", i, f.size(), width));
    }
    const Protocol p = protocol_from_string(f[0]);
    if (is_tracking(p) != tracking || (i > 1 && p != r.protocol)) {
      throw Error(ErrorKind::Malformed, fmt::format("report csv: row {} has protocol \"{}\"", i, f[0]));
    }
    r.protocol = p;
    if (tracking) {
      r.tracking.push_back({f[1], f[2], f[3], parse_count(f[4], i), parse_double(f[5], i), parse_double(f[6], i),
                            parse_double(f[7], i)});
    } else {
      r.trajectory.push_back({f[1], f[2], f[3], parse_count(f[4], i), parse_double(f[5], i), parse_double(f[6], i)});
    }
  }
  return r;
}

json report_to_json(const MetricsReport& r) {
  json rows = json::array();
  if (is_tracking(r.protocol)) {
    for (const auto& row : r.tracking) {
      rows.push_back({{"method", row.method},
                      {"detection", row.detection},
                      {"pair", row.pair},
                      {"samples", row.samples},
                      {"inlier_rate_pct", row.inlier_rate_pct},
                      {"inlier_count", row.inlier_count},
                      {"runtime_s", row.runtime_s}});
    }
  } else {
    for (const auto& row : r.trajectory) {
      rows.push_back({{"method", row.method},
                      {"detection", row.detection},
                      {"pair", row.pair},
                      {"samples", row.samples},
                      {"rot_err_rad", row.rot_err_rad},
                      {"trans_err_m", row.trans_err_m}});
    }
  }
  return {{"protocol", to_string(r.protocol)}, {"rows", rows}};
}

MetricsReport report_from_json(const json& j) {
  MetricsReport r;
  try {
    r.protocol = protocol_from_string(j.at("protocol").get<std::string>());
    for (const auto& row : j.at("rows")) {
      if (is_tracking(r.protocol)) {
        r.tracking.push_back({row.at("method").get<std::string>(), row.at("detection").get<std::string>(),
                              row.at("pair").get<std::string>(), row.at("samples").get<std::size_t>(),
                              row.at("inlier_rate_pct").get<double>(), row.at("inlier_count").get<double>(),
                              row.at("runtime_s").get<double>()});
      } else {
        r.trajectory.push_back({row.at("method").get<std::string>(), row.at("detection").get<std::string>(),
                                row.at("pair").get<std::string>(), row.at("samples").get<std::size_t>(),
                                row.at("rot_err_rad").get<double>(), row.at("trans_err_m").get<double>()});
      }
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Malformed, std::string("report json: ") + e.what());
  }
  return r;
}

// ---------------------------------------------------------------------------
// Offline protocols

namespace {

struct Prepared {
  const NamedBundle* named = nullptr;
  DemoSequence seq;
  std::optional<SyntheticScene> scene;
  std::optional<GroundTruth> truth;
};

struct Task {
  std::size_t a = 0;
  std::size_t b = 0;
  std::size_t step = 0;  // intra only
};

struct TaskResult {
  std::string method;
  std::string detection;
  std::string pair;
  TrackingMetrics tracking;
  TrajectoryErrorMetrics trajectory;
};

class Stopwatch {
 public:
  explicit Stopwatch(bool enabled) : enabled_(enabled), start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    if (!enabled_) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  bool enabled_;
  std::chrono::steady_clock::time_point start_;
};

// Registration is part of the timed unit; its outcome does not affect the
// tracking metrics.
void register_pairs(const PointPairSet& pairs, const RansacParams& params) {
  if (pairs.size() < params.sample_size) return;
  try {
    (void)fit_rigid_ransac(pairs, params);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NoConsensus && e.kind() != ErrorKind::DegenerateConfiguration) throw;
  }
}

CorrespondenceSet cross_correspondences(const Prepared& demo, const Prepared& live, std::string& method) {
  const auto it = demo.named->cross.find(live.named->name);
  if (it != demo.named->cross.end()) {
    method = "file";
    return it->second;
  }
  if (demo.scene && live.scene) {
    method = "synthetic-oracle";
    return oracle_cross_correspondences(*demo.scene, demo.seq.frames.front(), *live.scene, live.seq.frames.front());
  }
  throw Error(ErrorKind::Malformed, fmt::format("no correspondences from bundle \"{}\" to bundle \"{}\"",
                                                demo.named->name, live.named->name));
}

std::vector<Pose> reference_steps(const Prepared& live, const CorrespondenceSource& source, const RansacParams& params) {
  if (live.truth) {
    const auto& poses = live.truth->object_poses;
    std::vector<Pose> out;
    for (std::size_t i = 0; i + 1 < live.seq.frames.size(); ++i) {
      out.push_back(compose(poses.at(live.seq.frames[i + 1]), inverse(poses.at(live.seq.frames[i]))));
    }
    return out;
  }
  return extract_trajectory(live.seq, source, params).relative_poses;
}

TaskResult run_intra(const Prepared& p, std::size_t step, const EvalOptions& opt) {
  const EpisodeBundle& b = p.named->bundle;
  const std::size_t src = p.seq.frames[step];
  const std::size_t dst = p.seq.frames[step + 1];
  const BundleCorrespondences stored(b);
  std::optional<SyntheticOracle> oracle;
  if (opt.regenerate && p.scene) oracle.emplace(*p.scene);
  const CorrespondenceSource& source = oracle ? static_cast<const CorrespondenceSource&>(*oracle) : stored;
  if (!source.has(src, dst)) {
    throw Error(ErrorKind::Malformed,
                fmt::format("bundle \"{}\": no correspondences for frames {} -> {}", p.named->name, src, dst));
  }
  const Stopwatch watch(opt.timing);
  const CorrespondenceSet c = source.get(src, dst);
  const CorrespondenceSet filtered = filter_by_mask(c, b.frames[src].object_mask, b.image_size());
  register_pairs(lift_correspondences(filtered, b.frames[src].depth, b.frames[dst].depth, b.intrinsics), opt.ransac);
  const double runtime = watch.seconds();

  TaskResult r;
  r.method = source.name();
  r.detection = "mask";
  r.pair = fmt::format("{}:{}->{}", p.named->name, src, dst);
  r.tracking = tracking_metrics(filtered, b.frames[dst].object_mask, runtime, b.image_size());
  return r;
}

TaskResult run_inter(const Prepared& demo, const Prepared& live, const EvalOptions& opt) {
  const EpisodeBundle& a = demo.named->bundle;
  const EpisodeBundle& b = live.named->bundle;
  if (!(a.intrinsics == b.intrinsics)) {
    throw Error(ErrorKind::DimensionMismatch, fmt::format("bundles \"{}\" and \"{}\" use different intrinsics",
                                                          demo.named->name, live.named->name));
  }
  const std::size_t fa = demo.seq.frames.front();
  const std::size_t fb = live.seq.frames.front();
  TaskResult r;
  const Stopwatch watch(opt.timing);
  const CorrespondenceSet c = cross_correspondences(demo, live, r.method);
  const CorrespondenceSet filtered = filter_by_mask(c, a.frames[fa].object_mask, a.image_size());
  register_pairs(lift_correspondences(filtered, a.frames[fa].depth, b.frames[fb].depth, a.intrinsics), opt.ransac);
  const double runtime = watch.seconds();
  r.detection = "mask";
  r.pair = fmt::format("{}->{}", demo.named->name, live.named->name);
  r.tracking = tracking_metrics(filtered, b.frames[fb].object_mask, runtime, b.image_size());
  return r;
}

TaskResult run_trajectory(const Prepared& demo, const Prepared& live, const EvalOptions& opt) {
  const EpisodeBundle& a = demo.named->bundle;
  const EpisodeBundle& b = live.named->bundle;
  if (!(a.intrinsics == b.intrinsics)) {
    throw Error(ErrorKind::DimensionMismatch, fmt::format("bundles \"{}\" and \"{}\" use different intrinsics",
                                                          demo.named->name, live.named->name));
  }
  auto source_for = [&](const Prepared& p) -> std::unique_ptr<CorrespondenceSource> {
    if (opt.regenerate && p.scene) return std::make_unique<SyntheticOracle>(*p.scene);
    return std::make_unique<BundleCorrespondences>(p.named->bundle);
  };
  const auto demo_source = source_for(demo);
  const DemoTrajectory traj = extract_trajectory(demo.seq, *demo_source, opt.ransac);

  TaskResult r;
  const CorrespondenceSet cross = cross_correspondences(demo, live, r.method);
  const std::size_t fa = demo.seq.frames.front();
  const std::size_t fb = live.seq.frames.front();
  LiveObservation obs;
  obs.depth = b.frames[fb].depth;
  obs.intrinsics = b.intrinsics;
  obs.object_mask = b.frames[fb].object_mask;
  obs.secondary_mask = b.frames[fb].secondary_mask;
  const DemoToLive object = estimate_demo_to_live(a.frames[fa].depth, a.frames[fa].object_mask, a.intrinsics, obs,
                                                  cross, opt.ransac, opt.warp.margin);
  std::optional<Pose> goal;
  if (opt.warp.use_secondary) {
    if (!a.frames[fa].secondary_mask || !obs.secondary_mask) {
      throw Error(ErrorKind::MissingGoalPose,
                  fmt::format("pair {} -> {}: secondary mixing needs a secondary mask in both first frames",
                              demo.named->name, live.named->name));
    }
    goal = estimate_demo_to_live(a.frames[fa].depth, *a.frames[fa].secondary_mask, a.intrinsics, obs, cross,
                                 opt.ransac, opt.warp.margin)
               .pose;
  }
  const WarpedTrajectory warped = warp_trajectory(traj.relative_poses, object.pose, goal, opt.warp);
  const auto live_source = source_for(live);
  r.detection = "bbox";
  r.pair = fmt::format("{}->{}", demo.named->name, live.named->name);
  r.trajectory = trajectory_errors(warped.relative, reference_steps(live, *live_source, opt.ransac));
  return r;
}

}  // namespace

MetricsReport run_offline_eval(const std::vector<NamedBundle>& bundles, Protocol protocol, const EvalOptions& opt) {
  const std::size_t needed = protocol == Protocol::IntraDemo ? 1 : 2;
  if (bundles.size() < needed) {
    throw Error(ErrorKind::InsufficientBundles,
                fmt::format("{} protocol needs at least {} bundle{}, got {}", to_string(protocol), needed,
                            needed == 1 ? "" : "s", bundles.size()));
  }
  opt.ransac.validate();
  opt.warp.validate();

  std::vector<const NamedBundle*> sorted;
  for (const auto& b : bundles) sorted.push_back(&b);
  std::sort(sorted.begin(), sorted.end(), [](const NamedBundle* x, const NamedBundle* y) { return x->name < y->name; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i]->name == sorted[i - 1]->name) {
      throw Error(ErrorKind::InvalidArgument, "duplicate bundle name \"" + sorted[i]->name + "\"");
    }
  }

  std::vector<Prepared> prepared(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    Prepared& p = prepared[i];
    p.named = sorted[i];
    p.named->bundle.validate();
    p.seq = make_demo_sequence(p.named->bundle, opt.max_frames);
    if (p.named->bundle.ground_truth) {
      p.truth = ground_truth_from_json(*p.named->bundle.ground_truth);
      p.scene = build_scene(p.truth->config, p.truth->seed);
    }
  }

  std::vector<Task> tasks;
  if (protocol == Protocol::IntraDemo) {
    for (std::size_t i = 0; i < prepared.size(); ++i) {
      for (std::size_t s = 0; s + 1 < prepared[i].seq.length(); ++s) tasks.push_back({i, i, s});
    }
  } else {
    for (std::size_t i = 0; i < prepared.size(); ++i) {
      for (std::size_t j = 0; j < prepared.size(); ++j) {
        if (i != j) tasks.push_back({i, j, 0});
      }
    }
  }

  std::vector<TaskResult> results(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(tasks.size()); ++t) {
    const Task& task = tasks[t];
    try {
      switch (protocol) {
        case Protocol::IntraDemo: results[t] = run_intra(prepared[task.a], task.step, opt); break;
        case Protocol::InterDemo: results[t] = run_inter(prepared[task.a], prepared[task.b], opt); break;
        case Protocol::Trajectory: results[t] = run_trajectory(prepared[task.a], prepared[task.b], opt); break;
      }
    } catch (...) {
      errors[t] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  MetricsReport report;
  report.protocol = protocol;
  std::map<std::pair<std::string, std::string>, std::vector<const TaskResult*>> cells;
  for (const auto& r : results) cells[{r.method, r.detection}].push_back(&r);

  if (protocol == Protocol::Trajectory) {
    for (const auto& r : results) {
      report.trajectory.push_back(
          {r.method, r.detection, r.pair, r.trajectory.per_step.size(), r.trajectory.mean_rot_err, r.trajectory.mean_trans_err});
    }
    for (const auto& [key, rows] : cells) {
      TrajectoryRow agg{key.first, key.second, kAggregatePair, rows.size(), 0.0, 0.0};
      for (const auto* r : rows) {
        agg.rot_err_rad += r->trajectory.mean_rot_err;
        agg.trans_err_m += r->trajectory.mean_trans_err;
      }
      agg.rot_err_rad /= static_cast<double>(rows.size());
      agg.trans_err_m /= static_cast<double>(rows.size());
      report.trajectory.push_back(agg);
    }
  } else {
    for (const auto& r : results) {
      report.tracking.push_back({r.method, r.detection, r.pair, 1, r.tracking.inlier_rate,
                                 static_cast<double>(r.tracking.inlier_count), r.tracking.runtime_seconds});
    }
    for (const auto& [key, rows] : cells) {
      TrackingRow agg{key.first, key.second, kAggregatePair, rows.size(), 0.0, 0.0, 0.0};
      for (const auto* r : rows) {
        agg.inlier_rate_pct += r->tracking.inlier_rate;
        agg.inlier_count += static_cast<double>(r->tracking.inlier_count);
        agg.runtime_s += r->tracking.runtime_seconds;
      }
      const double n = static_cast<double>(rows.size());
      agg.inlier_rate_pct /= n;
      agg.inlier_count /= n;
      agg.runtime_s /= n;
      report.tracking.push_back(agg);
    }
  }
  return report;
}

}  // namespace ditto
