#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ditto/eval.hpp"
#include "ditto/registration.hpp"
#include "ditto/warp.hpp"

namespace ditto::cli {

inline constexpr const char* kToolVersion = "0.1.0";

struct SynthOptions {
  std::optional<std::filesystem::path> config;
  std::uint64_t seed = 0;
  std::filesystem::path out;
};

struct ExtractOptions {
  std::filesystem::path bundle;
  std::filesystem::path out;
  RansacParams ransac;
  bool regenerate = false;
  std::size_t max_frames = 11;
};

struct GenerateOptions {
  std::filesystem::path demo;
  std::filesystem::path live;
  std::filesystem::path out;
  RansacParams ransac;
  WarpConfig warp;
  std::optional<std::filesystem::path> object_correspondences;
  std::optional<std::filesystem::path> secondary_correspondences;
};

enum class ReportFormat { Both, Csv, Json };

struct EvalCommandOptions {
  std::vector<std::string> bundles;  // paths or glob patterns
  Protocol protocol = Protocol::IntraDemo;
  std::filesystem::path out;
  ReportFormat format = ReportFormat::Both;
  EvalOptions eval;
};

/// Each command writes its outputs atomically plus a run-metadata file.
void cmd_synth(const SynthOptions& opt);
void cmd_extract(const ExtractOptions& opt);
void cmd_generate(const GenerateOptions& opt);
void cmd_eval(const EvalCommandOptions& opt);

/// Paths of the metadata file written next to an output.
std::filesystem::path meta_path(const std::filesystem::path& out);

/// Expands glob patterns; plain paths pass through. Result is sorted.
std::vector<std::filesystem::path> expand_bundle_paths(const std::vector<std::string>& patterns);

/// Parses arguments and dispatches; returns the process exit code.
int run(int argc, char** argv);

}  // namespace ditto::cli
