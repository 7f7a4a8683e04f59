#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qkd/core_types.hpp"
#include "qkd/decoy_analysis.hpp"

namespace qkd::report {

// eta = 10^(-loss_db/10)
double transmissivity(double loss_db);

// Repeaterless capacity -log2(1 - eta); requires loss_db > 0.
double plob_bound(double loss_db);

// Ideal decoy-state MDI rate eta/(2 e^2); requires loss_db >= 0.
double ideal_decoy_mdi_bound(double loss_db);

struct RateCurvePoint {
    double total_loss_db = 0.0;
    double transmissivity = 0.0;
    double rate_per_pulse = 0.0;
    double rate_bps = 0.0;
    std::string source;  // simulated | experimental-replay | plob | ideal-decoy
};

// One sweep output row; column order matches the CSV writer.
struct SweepRow {
    double loss_db = 0.0;
    double eta = 0.0;
    double y11_lower = 0.0;
    double e11ph_upper = 0.0;
    double rate_per_pulse = 0.0;
    double rate_bps = 0.0;
    double plob = 0.0;
    double ideal_decoy = 0.0;
};

enum class SweepMode { AnalyticGains, FullSimulation };
SweepMode sweep_mode_from_string(const std::string& name);

// How per-loss protocol parameters are chosen during a sweep; recorded in the
// run manifest next to every sweep output.
extern const char* const kParameterInterpolationNote;

// Intensities and send probabilities for an arbitrary total loss: piecewise
// linear between the three tabulated operating points (24/35/44 dB), clamped
// outside that range. channel_loss_db is set so the configured chip loss plus
// twice the channel loss equals total_loss_db.
core::ProtocolConfig parameters_for_loss(const core::ProtocolConfig& config_template,
                                         double total_loss_db);

// Expected per-pair gains/error gains of the coherent-state model with dead
// time off: click probabilities integrated over the uniform phase difference
// between the senders. Counts are expectations over `pair_budget` pulse pairs
// split by the configured send probabilities.
decoy::ObservedGains analytic_gains(const core::ProtocolConfig& config);

std::vector<SweepRow> sweep_rate_vs_loss(const core::ProtocolConfig& config_template,
                                         const std::vector<double>& losses_db, SweepMode mode,
                                         uint64_t seed, uint32_t workers);

struct ComparisonRow {
    std::string reference;
    double clock_rate_mhz = 0.0;
    double loss_db = 0.0;
    double key_rate_bps = 0.0;
    double key_rate_per_pulse = 0.0;
};

// Published experiments this system is benchmarked against.
std::vector<ComparisonRow> builtin_comparison_rows();

// Plain-text table: one row per external entry plus one per produced point.
std::string comparison_table(const std::vector<RateCurvePoint>& points,
                             const std::vector<ComparisonRow>& external_rows);

}  // namespace qkd::report
