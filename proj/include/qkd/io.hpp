#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "qkd/bounds_and_report.hpp"
#include "qkd/core_types.hpp"
#include "qkd/decoy_analysis.hpp"

namespace qkd::io {

inline constexpr const char* kToolVersion = "qkdsim 1.0.0";

// File unusable: missing, unreadable, unwritable, or syntactically broken.
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File readable but semantically invalid (bad values, inconsistent counts,
// config-hash mismatch).
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

uint64_t fnv1a64(const void* data, size_t size);
std::string hash_hex(uint64_t h);
std::string file_hash(const std::string& path);  // FNV-1a64 over the raw bytes

// --- protocol config (JSON, unit-suffixed keys) ---
core::ProtocolConfig config_from_json(const std::string& text);
std::string config_to_json(const core::ProtocolConfig& config);
core::ProtocolConfig load_config(const std::string& path);

// --- intensity-pair labels ---
std::string pair_name(core::IntensityLabel a, core::IntensityLabel b);
std::pair<core::IntensityLabel, core::IntensityLabel> parse_pair_name(const std::string& name);

// --- tally files (simulate output) ---
std::string tally_to_csv(const core::TallyTable& tally, const std::string& config_hash);
struct LoadedGains {
    decoy::ObservedGains gains;
    std::string config_hash;  // empty when the file carries none
    bool from_tally = false;
};
// Accepts both the tally format and the aggregated gains format (rows
// pair_label,sent,successes,errors with NA for unknown error counts).
LoadedGains load_gains(const std::string& path);

// --- analysis results / sweep output ---
std::string result_to_json(const decoy::DecoyResult& result, const std::string& config_hash);
std::string sweep_to_csv(const std::vector<report::SweepRow>& rows);

// --- run manifest (sidecar <out>.manifest.json) ---
struct RunManifest {
    std::string tool_version = kToolVersion;
    std::string command;
    std::vector<std::string> arguments;
    std::string config_hash;
    uint64_t seed = 0;
    uint32_t workers = 0;
    std::string started_utc;
    std::string finished_utc;
    std::string note;
};
std::string manifest_to_json(const RunManifest& manifest);
std::string iso8601_utc_now();

std::string read_file(const std::string& path);
// Write-to-temp-then-rename so partially written outputs never appear.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace qkd::io
