#pragma once

#include <cstdint>
#include <optional>

#include "qkd/core_types.hpp"
#include "qkd/detector_model.hpp"
#include "qkd/rng.hpp"

namespace qkd::sim {

struct SimOptions {
    uint32_t workers = 1;
    bool dead_time_enabled = true;
    bool interference_enabled = true;   // false = mutually distinguishable sources
    bool classify_psi_plus = true;      // false = PsiMinus-only BSM
};

// Test/diagnostic hook: pin intensity labels and/or bits while consuming the
// same random draws as a free-running simulation.
struct ForcedScenario {
    std::optional<core::IntensityLabel> label_a;
    std::optional<core::IntensityLabel> label_b;
    std::optional<uint8_t> bit_a;
    std::optional<uint8_t> bit_b;
};

struct SlotClicks {
    bool d1_early = false, d2_early = false, d1_late = false, d2_late = false;
    int count() const { return int(d1_early) + int(d2_early) + int(d1_late) + int(d2_late); }
};

struct SlotResult {
    core::BsmOutcome outcome;
    SlotClicks clicks;
};

struct SiftedStats {
    double sifted_rate_bps = 0.0;
    double qber_z = 0.0;
    double qber_x_psi_minus = 0.0;  // NaN when that outcome never occurred
    double qber_x_psi_plus = 0.0;
    uint64_t z_successes = 0;
    uint64_t x_successes = 0;
};

struct HomResult {
    uint64_t coincidences_indistinguishable = 0;
    uint64_t coincidences_distinguishable = 0;
    double visibility = 0.0;
};

// Error convention for matched-basis conclusive outcomes: both Bell states
// imply anticorrelated bits in Z; in X, PsiMinus implies anticorrelation and
// PsiPlus correlation.
bool is_error(core::Basis basis, uint8_t bit_a, uint8_t bit_b, core::BsmVariant variant);

core::PulseFrame encode_frame(core::Basis basis, uint8_t bit, core::IntensityLabel label,
                              uint32_t slot_index, double intensity, rng::Stream& rs);
core::PulseFrame encode_frame(const core::ProtocolConfig& config, core::Basis basis, uint8_t bit,
                              core::IntensityLabel label, uint32_t slot_index, rng::Stream& rs);

std::pair<core::Basis, core::IntensityLabel> sample_intensity_and_basis(
    const core::ProtocolConfig& config, rng::Stream& rs);

SlotResult simulate_pair(const core::PulseFrame& frame_a, const core::PulseFrame& frame_b,
                         detector::DetectorState& d1, detector::DetectorState& d2,
                         const core::ProtocolConfig& config, const SimOptions& options,
                         double slot_time_s, rng::Stream& rs);

core::TallyTable run_simulation(const core::ProtocolConfig& config, uint64_t seed,
                                uint64_t pair_budget, const SimOptions& options = {},
                                const ForcedScenario* forced = nullptr);

SiftedStats sift(const core::TallyTable& tally, const core::ProtocolConfig& config);

HomResult run_hom_scan(const core::ProtocolConfig& config, core::IntensityLabel label,
                       uint64_t trials, uint64_t seed);

}  // namespace qkd::sim
