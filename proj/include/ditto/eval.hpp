#pragma once

#include <json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ditto/bundle.hpp"
#include "ditto/correspond.hpp"
#include "ditto/geom.hpp"
#include "ditto/image.hpp"
#include "ditto/registration.hpp"
#include "ditto/warp.hpp"

namespace ditto {

struct TrackingMetrics {
  double inlier_rate = 0.0;  // percent
  std::size_t inlier_count = 0;
  std::size_t total = 0;
  double runtime_seconds = 0.0;
  bool degenerate = false;  // empty correspondence set
};

/// Counts matches whose round-half-up target pixel lies in `target_mask`.
/// With `target_size` the mask must have exactly those dimensions.
TrackingMetrics tracking_metrics(const CorrespondenceSet& c, const Mask& target_mask, double runtime_seconds,
                                 std::optional<ImageSize> target_size = std::nullopt);

struct TrajectoryErrorMetrics {
  double mean_rot_err = 0.0;
  double mean_trans_err = 0.0;
  std::vector<PoseError> per_step;
};

/// Throws LengthMismatch when lengths differ or are zero.
TrajectoryErrorMetrics trajectory_errors(const std::vector<Pose>& pred, const std::vector<Pose>& gt);

enum class Protocol { IntraDemo, InterDemo, Trajectory };
const char* to_string(Protocol p);
Protocol protocol_from_string(const std::string& s);

inline constexpr const char* kAggregatePair = "mean";

struct TrackingRow {
  std::string method;
  std::string detection;
  std::string pair;
  std::size_t samples = 1;
  double inlier_rate_pct = 0.0;
  double inlier_count = 0.0;  // mean over samples on aggregate rows
  double runtime_s = 0.0;
  bool operator==(const TrackingRow&) const = default;
};

struct TrajectoryRow {
  std::string method;
  std::string detection;
  std::string pair;
  std::size_t samples = 1;
  double rot_err_rad = 0.0;
  double trans_err_m = 0.0;
  bool operator==(const TrajectoryRow&) const = default;
};

/// One tracking or trajectory report.
struct MetricsReport {
  Protocol protocol = Protocol::IntraDemo;
  std::vector<TrackingRow> tracking;
  std::vector<TrajectoryRow> trajectory;
  bool operator==(const MetricsReport&) const = default;
};

std::string report_to_csv(const MetricsReport& r);
MetricsReport report_from_csv(const std::string& text);
nlohmann::json report_to_json(const MetricsReport& r);
MetricsReport report_from_json(const nlohmann::json& j);

struct NamedBundle {
  std::string name;
  EpisodeBundle bundle;
  /// Correspondences from this bundle's first kept frame to the first frame of
  /// another bundle, keyed by that bundle's name. Synthetic bundles sharing a
  /// layout fall back to the oracle.
  std::map<std::string, CorrespondenceSet> cross;
};

struct EvalOptions {
  RansacParams ransac;
  WarpConfig warp;
  bool timing = true;
  bool regenerate = false;  // synthetic bundles: oracle instead of stored files
  std::size_t max_frames = 11;
};

/// Rows are emitted per pair in canonical (name-sorted) order, followed by an
/// aggregate row. Throws InsufficientBundles.
MetricsReport run_offline_eval(const std::vector<NamedBundle>& bundles, Protocol protocol, const EvalOptions& opt);

}  // namespace ditto
