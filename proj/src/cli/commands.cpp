#include "ditto/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <glob.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <system_error>

#include "ditto/bundle.hpp"
#include "ditto/demo.hpp"
#include "ditto/error.hpp"
#include "ditto/fileio.hpp"
#include "ditto/json_io.hpp"
#include "ditto/scene.hpp"

namespace ditto::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json_file(const fs::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Malformed, fmt::format("{}: JSON syntax error at byte {}", path.string(), e.byte));
  }
}

void write_json_file(const fs::path& path, const json& j) { write_text_file_atomic(path, j.dump(2) + "\n"); }

json ransac_json(const RansacParams& p) {
  return {{"seed", p.seed},
          {"inlier_threshold", p.inlier_threshold},
          {"max_iterations", p.max_iterations},
          {"sample_size", p.sample_size}};
}

json warp_json(const WarpConfig& w) {
  return {{"sigma", w.sigma}, {"use_secondary", w.use_secondary}, {"margin", w.margin}, {"max_obj_dist", w.max_obj_dist}};
}

json meta_base(const char* command) { return {{"tool", "ditto"}, {"version", kToolVersion}, {"command", command}}; }

std::string manifest_hash(const fs::path& bundle_dir) { return file_hash(bundle_dir / "manifest.json"); }

json bbox_json(const Mask& m) {
  int x0 = m.size.width, y0 = m.size.height, x1 = -1, y1 = -1;
  for (int y = 0; y < m.size.height; ++y) {
    for (int x = 0; x < m.size.width; ++x) {
      if (!m.at(x, y)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return nullptr;
  return json::array({x0, y0, x1, y1});
}

json demo_to_live_json(const DemoToLive& d) {
  return {{"pose", pose_to_json(d.pose)},
          {"filtered_matches", d.filtered_matches},
          {"lifted_pairs", d.lifted_pairs},
          {"inliers", d.inliers},
          {"bbox", bbox_json(d.redetection)}};
}

std::string bundle_name(const fs::path& dir) {
  const fs::path clean = dir.lexically_normal();
  return clean.has_filename() ? clean.filename().string() : clean.parent_path().filename().string();
}

std::map<std::string, CorrespondenceSet> load_cross(const fs::path& dir) {
  std::map<std::string, CorrespondenceSet> out;
  const fs::path cross = dir / "cross";
  std::error_code ec;
  if (!fs::is_directory(cross, ec)) return out;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(cross)) {
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) out[f.stem().string()] = load_correspondences(f);
  return out;
}

// Stored paths are resolved against the working directory first, then
// against the directory of the file that references them.
fs::path resolve_reference(const std::string& stored, const fs::path& referrer) {
  const fs::path p(stored);
  std::error_code ec;
  if (p.is_absolute() || fs::exists(p, ec)) return p;
  return referrer.parent_path() / p;
}

}  // namespace

fs::path meta_path(const fs::path& out) {
  fs::path m = out;
  m.replace_extension(".meta.json");
  return m;
}

std::vector<fs::path> expand_bundle_paths(const std::vector<std::string>& patterns) {
  std::vector<fs::path> out;
  for (const auto& pattern : patterns) {
    if (pattern.find_first_of("*?[") == std::string::npos) {
      out.emplace_back(pattern);
      continue;
    }
    glob_t g{};
    const int rc = ::glob(pattern.c_str(), GLOB_ONLYDIR, nullptr, &g);
    if (rc == 0) {
      for (std::size_t i = 0; i < g.gl_pathc; ++i) out.emplace_back(g.gl_pathv[i]);
    }
    globfree(&g);
    if (rc == GLOB_NOMATCH) throw Error(ErrorKind::Io, "no bundles match \"" + pattern + "\"");
    if (rc != 0) throw Error(ErrorKind::Io, "cannot expand \"" + pattern + "\"");
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void cmd_synth(const SynthOptions& opt) {
  SyntheticEpisodeConfig cfg;
  if (opt.config) cfg = config_from_json(read_json_file(*opt.config));
  cfg.validate();
  spdlog::info("synth: {} frames, seed {}", cfg.frames, opt.seed);
  const EpisodeBundle bundle = generate_synthetic_episode(cfg, opt.seed);

  const fs::path out = opt.out;
  std::error_code ec;
  if (fs::exists(out, ec)) {
    if (!fs::is_directory(out, ec)) throw Error(ErrorKind::Io, out.string() + " exists and is not a directory");
    if (!fs::is_empty(out, ec) && !fs::exists(out / "manifest.json", ec)) {
      throw Error(ErrorKind::Io, "refusing to replace non-bundle directory " + out.string());
    }
  }
  fs::path tmp = out;
  tmp += ".tmp";
  fs::remove_all(tmp, ec);
  try {
    store_bundle(bundle, tmp);
    json meta = meta_base("synth");
    meta["seed"] = opt.seed;
    const json cfg_json = config_to_json(cfg);
    meta["config"] = cfg_json;
    meta["config_hash"] = content_hash(cfg_json.dump());
    meta["manifest_hash"] = manifest_hash(tmp);
    write_json_file(tmp / "run_meta.json", meta);
  } catch (const Error& e) {
    fs::remove_all(tmp, ec);
    if (e.kind() == ErrorKind::Io) throw Error(ErrorKind::Io, "cannot write bundle to " + out.string() + ": " + e.what());
    throw;
  }
  fs::remove_all(out, ec);
  fs::rename(tmp, out, ec);
  if (ec) {
    fs::remove_all(tmp, ec);
    throw Error(ErrorKind::Io, "cannot move bundle into place at " + out.string());
  }
  spdlog::info("synth: wrote {}", out.string());
}

void cmd_extract(const ExtractOptions& opt) {
  const EpisodeBundle bundle = load_bundle(opt.bundle);
  const DemoSequence seq = make_demo_sequence(bundle, opt.max_frames);
  std::optional<SyntheticOracle> oracle;
  if (opt.regenerate) {
    auto scene = scene_of(bundle);
    if (!scene) {
      throw Error(ErrorKind::InvalidArgument, "--regenerate needs a synthetic bundle (ground_truth.json)");
    }
    oracle.emplace(std::move(*scene));
  }
  const BundleCorrespondences stored(bundle);
  const CorrespondenceSource& source = oracle ? static_cast<const CorrespondenceSource&>(*oracle) : stored;
  spdlog::info("extract: {} frames via {}", seq.length(), source.name());
  DemoTrajectory traj = extract_trajectory(seq, source, opt.ransac);
  const auto& hand = bundle.frames[seq.grasp_frame].hand_mask;
  if (hand) {
    traj.hand_anchor = extract_hand_anchor(seq, *hand, traj);
  } else {
    spdlog::warn("extract: no hand mask at grasp frame {}; hand anchor left empty", seq.grasp_frame);
  }
  for (const auto& s : traj.steps) {
    spdlog::debug("extract: step {}->{}: {} pairs, {} inliers", s.source_frame, s.target_frame, s.pairs, s.inliers);
  }

  json out = demo_trajectory_to_json(traj);
  out["bundle"] = opt.bundle.lexically_normal().string();
  out["correspondences"] = source.name();
  write_json_file(opt.out, out);

  json meta = meta_base("extract");
  meta["seed"] = opt.ransac.seed;
  meta["ransac"] = ransac_json(opt.ransac);
  meta["regenerate"] = opt.regenerate;
  meta["max_frames"] = opt.max_frames;
  meta["inputs"] = {{"bundle", out["bundle"]}, {"manifest_hash", manifest_hash(opt.bundle)}};
  write_json_file(meta_path(opt.out), meta);
}

void cmd_generate(const GenerateOptions& opt) {
  opt.warp.validate();
  const json demo_json = read_json_file(opt.demo);
  const DemoTrajectory traj = demo_trajectory_from_json(demo_json);
  const json& bundle_ref = require(demo_json, "bundle", opt.demo.string());
  if (!bundle_ref.is_string()) throw Error(ErrorKind::Malformed, opt.demo.string() + ": \"bundle\" must be a path");
  const fs::path demo_dir = resolve_reference(bundle_ref.get<std::string>(), opt.demo);
  const EpisodeBundle demo = load_bundle(demo_dir);
  const EpisodeBundle live = load_bundle(opt.live);
  if (!(demo.intrinsics == live.intrinsics)) {
    throw Error(ErrorKind::DimensionMismatch, "demo and live bundles use different intrinsics");
  }
  if (traj.frames.empty() || traj.frames.front() >= demo.frames.size()) {
    throw Error(ErrorKind::Malformed, opt.demo.string() + ": frame indices do not match the demo bundle");
  }
  const std::size_t fa = traj.frames.front();
  const std::size_t fb = select_frames(live, live.frames.size()).front();
  const FrameRecord& demo_frame = demo.frames[fa];
  const FrameRecord& live_frame = live.frames[fb];

  if (opt.warp.use_secondary) {
    if (!live_frame.secondary_mask) {
      throw Error(ErrorKind::MissingGoalPose,
                  fmt::format("--use-secondary: live bundle {} has no secondary mask at frame {}; add "
                              "\"secondary_mask\" to its manifest or rerun without --use-secondary",
                              opt.live.string(), fb));
    }
    if (!demo_frame.secondary_mask) {
      throw Error(ErrorKind::MissingGoalPose,
                  fmt::format("--use-secondary: demo bundle {} has no secondary mask at frame {}; add "
                              "\"secondary_mask\" to its manifest or rerun without --use-secondary",
                              demo_dir.string(), fa));
    }
  }

  CorrespondenceSet object_corr;
  std::string corr_source;
  if (opt.object_correspondences) {
    object_corr = load_correspondences(*opt.object_correspondences);
    corr_source = "file";
  } else {
    const auto sa = scene_of(demo);
    const auto sb = scene_of(live);
    if (!sa || !sb) {
      throw Error(ErrorKind::Malformed,
                  "no demo->live correspondences: pass --object-correspondences (both bundles must be synthetic "
                  "to use the oracle)");
    }
    object_corr = oracle_cross_correspondences(*sa, fa, *sb, fb);
    corr_source = "synthetic-oracle";
  }
  const CorrespondenceSet secondary_corr =
      opt.secondary_correspondences ? load_correspondences(*opt.secondary_correspondences) : object_corr;

  LiveObservation obs;
  obs.depth = live_frame.depth;
  obs.intrinsics = live.intrinsics;
  obs.object_mask = live_frame.object_mask;
  obs.secondary_mask = live_frame.secondary_mask;
  obs.grasps = live.grasps;

  const DemoToLive object = estimate_demo_to_live(demo_frame.depth, demo_frame.object_mask, demo.intrinsics, obs,
                                                  object_corr, opt.ransac, opt.warp.margin);
  spdlog::info("generate: object {} inliers of {} pairs", object.inliers, object.lifted_pairs);
  std::optional<DemoToLive> goal;
  if (opt.warp.use_secondary) {
    goal = estimate_demo_to_live(demo_frame.depth, *demo_frame.secondary_mask, demo.intrinsics, obs, secondary_corr,
                                 opt.ransac, opt.warp.margin);
    spdlog::info("generate: goal {} inliers of {} pairs", goal->inliers, goal->lifted_pairs);
  }
  const std::optional<Pose> goal_pose = goal ? std::optional<Pose>(goal->pose) : std::nullopt;
  const WarpedTrajectory warped = warp_trajectory(traj.relative_poses, object.pose, goal_pose, opt.warp);
  const Pose initial = compose(object.pose, canonical_object_pose(demo_frame.depth, demo_frame.object_mask, demo.intrinsics));
  const std::vector<Pose> poses = accumulate_trajectory(initial, warped.relative);

  json out;
  out["demo"] = opt.demo.lexically_normal().string();
  out["live"] = opt.live.lexically_normal().string();
  out["correspondences"] = corr_source;
  json rel = json::array();
  for (const auto& p : warped.relative) rel.push_back(pose_to_json(p));
  json abs = json::array();
  for (const auto& p : poses) abs.push_back(pose_to_json(p));
  out["relative"] = rel;
  out["alpha"] = warped.alpha;
  out["absolute"] = abs;
  out["diagnostics"] = {{"object", demo_to_live_json(object)}, {"goal", goal ? demo_to_live_json(*goal) : json(nullptr)}};
  out["warp"] = warp_json(opt.warp);
  out["selected_grasp"] = nullptr;
  out["grasp"] = nullptr;
  out["hand_anchor_live"] = nullptr;

  if (!live.grasps.empty()) {
    if (!traj.hand_anchor) {
      spdlog::warn("generate: live bundle has grasps but the demonstration has no hand anchor; skipping selection");
    } else {
      // Carry the grasp-frame canonical pose back to the first demo frame.
      const auto it = std::find(traj.frames.begin(), traj.frames.end(), traj.grasp_frame);
      if (it == traj.frames.end()) throw Error(ErrorKind::Malformed, opt.demo.string() + ": grasp frame not in frames");
      Pose carry = Pose::identity();
      for (std::size_t k = 0; k < static_cast<std::size_t>(it - traj.frames.begin()); ++k) {
        carry = compose(traj.relative_poses.at(k), carry);
      }
      const Pose canonical_first = compose(inverse(carry), traj.object_canonical_pose);
      const Point3 hand_live = transform_hand_anchor(*traj.hand_anchor, canonical_first, object.pose);
      const PointCloud cloud = live_object_cloud(obs, object.redetection);
      const GraspSelection sel = select_grasp(live.grasps, cloud, hand_live, opt.warp.max_obj_dist);
      out["hand_anchor_live"] = point_to_json(hand_live);
      out["selected_grasp"] = pose_to_json(sel.grasp.pose);
      out["grasp"] = {{"index", sel.index},
                      {"pose", pose_to_json(sel.grasp.pose)},
                      {"score", sel.grasp.score},
                      {"hand_distance", sel.hand_distance}};
      spdlog::info("generate: selected grasp {} ({:.4f} m from the hand)", sel.index, sel.hand_distance);
    }
  }
  write_json_file(opt.out, out);

  json meta = meta_base("generate");
  meta["seed"] = opt.ransac.seed;
  meta["ransac"] = ransac_json(opt.ransac);
  meta["warp"] = out["warp"];
  meta["inputs"] = {{"demo", out["demo"]},
                    {"demo_hash", file_hash(opt.demo)},
                    {"demo_bundle_hash", manifest_hash(demo_dir)},
                    {"live", out["live"]},
                    {"live_hash", manifest_hash(opt.live)}};
  if (opt.object_correspondences) meta["inputs"]["object_correspondences_hash"] = file_hash(*opt.object_correspondences);
  if (opt.secondary_correspondences) {
    meta["inputs"]["secondary_correspondences_hash"] = file_hash(*opt.secondary_correspondences);
  }
  write_json_file(meta_path(opt.out), meta);
}

void cmd_eval(const EvalCommandOptions& opt) {
  const auto paths = expand_bundle_paths(opt.bundles);
  std::vector<NamedBundle> bundles;
  json inputs = json::array();
  for (const auto& p : paths) {
    NamedBundle nb{bundle_name(p), load_bundle(p), load_cross(p)};
    inputs.push_back({{"name", nb.name}, {"manifest_hash", manifest_hash(p)}});
    bundles.push_back(std::move(nb));
  }
  spdlog::info("eval: {} protocol over {} bundles", to_string(opt.protocol), bundles.size());
  const MetricsReport report = run_offline_eval(bundles, opt.protocol, opt.eval);

  if (opt.format == ReportFormat::Csv) {
    write_text_file_atomic(opt.out, report_to_csv(report));
  } else if (opt.format == ReportFormat::Json) {
    write_json_file(opt.out, report_to_json(report));
  } else {
    fs::path csv = opt.out, js = opt.out;
    write_text_file_atomic(csv.replace_extension(".csv"), report_to_csv(report));
    write_json_file(js.replace_extension(".json"), report_to_json(report));
  }

  json meta = meta_base("eval");
  meta["seed"] = opt.eval.ransac.seed;
  meta["protocol"] = to_string(opt.protocol);
  meta["ransac"] = ransac_json(opt.eval.ransac);
  meta["warp"] = warp_json(opt.eval.warp);
  meta["timing"] = opt.eval.timing;
  meta["regenerate"] = opt.eval.regenerate;
  meta["max_frames"] = opt.eval.max_frames;
  meta["inputs"] = inputs;
  write_json_file(meta_path(opt.out), meta);
}

namespace {

void setup_logging() {
  auto logger = spdlog::stderr_logger_mt("ditto");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("DITTO_LOG")) {
    const std::string level = env;
    if (level == "error") spdlog::set_level(spdlog::level::err);
    else if (level == "warn") spdlog::set_level(spdlog::level::warn);
    else if (level == "info") spdlog::set_level(spdlog::level::info);
    else if (level == "debug") spdlog::set_level(spdlog::level::debug);
    else spdlog::warn("DITTO_LOG=\"{}\" not recognized (error, warn, info, debug)", level);
  }
}

void add_ransac_flags(CLI::App* cmd, RansacParams& p) {
  cmd->add_option("--seed", p.seed, "RANSAC seed")->capture_default_str();
  cmd->add_option("--ransac-threshold", p.inlier_threshold, "RANSAC inlier threshold [m]")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--ransac-iters", p.max_iterations, "RANSAC iterations")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

void add_warp_flags(CLI::App* cmd, WarpConfig& w) {
  cmd->add_option("--sigma", w.sigma, "mixing steepness")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_flag("--use-secondary", w.use_secondary, "mix towards the secondary object's relative pose");
  cmd->add_option("--margin", w.margin, "re-detection box margin [px]")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--max-obj-dist", w.max_obj_dist, "grasp-to-object distance filter [m]")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
}

}  // namespace

int run(int argc, char** argv) {
  setup_logging();
  CLI::App app{"Trajectory extraction, warping and evaluation from one RGB-D demonstration", "ditto"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic episode bundle");
  synth_cmd->add_option("--config", synth.config, "episode config JSON")->check(CLI::ExistingFile);
  synth_cmd->add_option("--seed", synth.seed, "episode seed")->capture_default_str();
  synth_cmd->add_option("--out", synth.out, "bundle directory")->required();

  ExtractOptions extract;
  auto* extract_cmd = app.add_subcommand("extract", "extract the demonstration trajectory from a bundle");
  extract_cmd->add_option("--bundle", extract.bundle, "demonstration bundle directory")->required();
  extract_cmd->add_option("--out", extract.out, "trajectory JSON")->required();
  add_ransac_flags(extract_cmd, extract.ransac);
  extract_cmd->add_flag("--regenerate", extract.regenerate, "re-derive correspondences from the synthetic oracle");
  extract_cmd->add_option("--max-frames", extract.max_frames, "frames kept after subsampling")
      ->check(CLI::Range(2, 100000))
      ->capture_default_str();

  GenerateOptions generate;
  auto* generate_cmd = app.add_subcommand("generate", "warp a demonstration into a live scene");
  generate_cmd->add_option("--demo", generate.demo, "trajectory JSON from extract")->required()->check(CLI::ExistingFile);
  generate_cmd->add_option("--live", generate.live, "live bundle directory")->required();
  generate_cmd->add_option("--out", generate.out, "warped trajectory JSON")->required();
  generate_cmd->add_option("--object-correspondences", generate.object_correspondences,
                           "demo->live correspondences file")
      ->check(CLI::ExistingFile);
  generate_cmd->add_option("--secondary-correspondences", generate.secondary_correspondences,
                           "demo->live correspondences for the secondary object")
      ->check(CLI::ExistingFile);
  add_ransac_flags(generate_cmd, generate.ransac);
  add_warp_flags(generate_cmd, generate.warp);

  EvalCommandOptions eval;
  std::string protocol = "intra";
  std::string format;
  bool no_timing = false;
  auto* eval_cmd = app.add_subcommand("eval", "offline tracking / trajectory evaluation");
  eval_cmd->add_option("bundles", eval.bundles, "bundle directories or glob patterns")->required();
  eval_cmd->add_option("--protocol", protocol, "evaluation protocol")
      ->check(CLI::IsMember({"intra", "inter", "trajectory"}))
      ->capture_default_str();
  eval_cmd->add_option("--out", eval.out, "report path (extension replaced by .csv/.json without --format)")
      ->required();
  eval_cmd->add_option("--format", format, "report format")->check(CLI::IsMember({"csv", "json"}));
  eval_cmd->add_flag("--no-timing", no_timing, "write runtime_s = 0 for byte-reproducible reports");
  eval_cmd->add_flag("--regenerate", eval.eval.regenerate, "re-derive correspondences from the synthetic oracle");
  eval_cmd->add_option("--max-frames", eval.eval.max_frames, "frames kept after subsampling")
      ->check(CLI::Range(2, 100000))
      ->capture_default_str();
  add_ransac_flags(eval_cmd, eval.eval.ransac);
  add_warp_flags(eval_cmd, eval.eval.warp);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*synth_cmd) {
      cmd_synth(synth);
    } else if (*extract_cmd) {
      cmd_extract(extract);
    } else if (*generate_cmd) {
      cmd_generate(generate);
    } else if (*eval_cmd) {
      eval.protocol = protocol_from_string(protocol);
      eval.format = format == "csv" ? ReportFormat::Csv : format == "json" ? ReportFormat::Json : ReportFormat::Both;
      eval.eval.timing = !no_timing;
      cmd_eval(eval);
    }
  } catch (const Error& e) {
    spdlog::error("{}: {}", to_string(e.kind()), e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}

}  // namespace ditto::cli
