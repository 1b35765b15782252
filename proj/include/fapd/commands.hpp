#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fapd/config.hpp"
#include "fapd/federation.hpp"

namespace fapd {

// Shortest decimal that parses back to the same double.
std::string format_real(double value);

inline constexpr const char* kMetricsHeader = "round,k,accuracy,loss_total,loss_ce,loss_kd,loss_cl,consensus,clients";

std::string metrics_csv(std::span<const RoundMetrics> metrics);

// First 1-based round whose accuracy reaches 95% of the final accuracy.
std::size_t rounds_to_95(std::span<const RoundMetrics> metrics);

// First 1-based round trained at k == max_dim, or -1 if none.
long completion_round(std::span<const RoundMetrics> metrics, std::size_t max_dim);

// Writes metrics.csv, summary.json and checkpoint/ under the output directory.
int cmd_run(const RunConfig& config, std::ostream& progress);

// Runs every config and writes compare.csv (plus one run directory per
// config) under `out_dir`.
int cmd_compare(std::span<const RunConfig> configs, const std::filesystem::path& out_dir, std::ostream& progress);

// CSV of test-split features: label,f_0..f_{D-1}.
int cmd_dump_embeddings(const RunConfig& config, const std::filesystem::path& checkpoint,
                        const std::filesystem::path& out);

// Writes the synthetic train/ and test/ splits described by the config.
int cmd_gen_data(const RunConfig& config, const std::filesystem::path& out_dir);

}  // namespace fapd
