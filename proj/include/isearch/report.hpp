#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include <json.hpp>

#include "isearch/influence.hpp"

namespace isearch {

std::uint64_t fnv1a64(std::span<const unsigned char> bytes);
std::string digest_label(std::uint64_t digest);      // "fnv1a64:<16 hex>"
std::string text_digest(const std::string& text);
std::string file_digest(const std::filesystem::path& path);

/// Writes the full report directory for a pipeline run: cohort summary,
/// center tables, per-cluster value counts, ranges, prototype sizes and
/// overlap, paired histograms per compared attribute, divergences, and a
/// run manifest listing every emitted file with its content digest.
/// Returns the manifest document.
nlohmann::json write_report(const std::filesystem::path& dir,
                            const PipelineResult& result,
                            const PipelineConfig& config);

/// Re-digests every file listed in `dir`/manifest.json. On mismatch or a
/// missing file returns false and, when given, fills `problem`.
bool verify_report(const std::filesystem::path& dir, std::string* problem = nullptr);

/// Output of the standalone clustering command: centers in original units
/// plus the per-row cluster index.
void write_cluster_outputs(const std::filesystem::path& dir,
                           const std::vector<std::string>& columns,
                           const ClusterModel& model);

}
