#pragma once

#include <exception>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "histocam/cli/config.hpp"
#include "histocam/datakit.hpp"
#include "histocam/metrics.hpp"
#include "histocam/trainer.hpp"

namespace histocam::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3, kArtifact = 4 };

/// Maps a failure onto the documented exit codes: data/I-O problems 2,
/// non-finite numerics 3, unreadable or mismatched artifacts 4, anything
/// else (bad config, usage) 1.
int exit_code_for(const std::exception& error);

// Each command writes its artifacts under config.output_dir together with the
// resolved config and reports progress on `log`.

/// Generates the synthetic dataset when configured, draws the split, writes
/// split.json and split.txt.
datakit::DatasetSplit cmd_split(const PipelineConfig& config, std::ostream& log);

/// Reads <out>/split.json (drawing it first when absent), trains, and writes
/// weights.hscw and history.csv.
std::vector<trainer::HistoryRecord> cmd_train(const PipelineConfig& config, std::ostream& log);

/// Evaluates the test partition with the given weights; writes metrics.json
/// and metrics.txt.
metrics::MetricsReport cmd_eval(const PipelineConfig& config, const std::filesystem::path& weights,
                                std::ostream& log);

/// One overlay PNG plus JSON sidecar per (image, method). Undecodable images
/// are skipped with a warning; a DataError is raised when none succeed.
/// Returns the overlay paths written.
std::vector<std::filesystem::path> cmd_explain(const PipelineConfig& config, const std::filesystem::path& weights,
                                               const std::vector<std::filesystem::path>& images, std::ostream& log);

/// 8x8 grid of augmented copies of `image` (draw indices 0..63).
std::filesystem::path cmd_preview_augment(const PipelineConfig& config, const std::filesystem::path& image,
                                          std::ostream& log);

/// Writes the synthetic dataset described by config.dataset into `out_dir`.
std::size_t cmd_synth(const PipelineConfig& config, const std::filesystem::path& out_dir, std::ostream& log);

/// Full command-line entry point; returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace histocam::cli
