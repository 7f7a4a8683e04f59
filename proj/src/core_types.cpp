#include "qkd/core_types.hpp"

#include <cmath>

namespace qkd::core {

ValidationResult validate_config(const ProtocolConfig& c) {
    ValidationResult r;
    auto bad = [&r](const std::string& field, const std::string& msg) {
        r.violations.push_back({field, msg});
    };

    for (const char* name : {"s", "mu", "nu", "o"}) {
        auto it = c.intensities.find(name);
        if (it == c.intensities.end()) {
            bad(std::string("intensity.") + name, "missing");
            continue;
        }
        if (!(it->second >= 0.0)) bad(std::string("intensity.") + name, "must be >= 0");
    }
    if (auto it = c.intensities.find("o"); it != c.intensities.end() && it->second != 0.0)
        bad("intensity.o", "vacuum intensity must be 0");

    double prob_sum = 0.0;
    for (const char* name : {"s", "mu", "nu"}) {
        auto it = c.intensity_probs.find(name);
        if (it == c.intensity_probs.end()) {
            bad(std::string("intensity_probs.") + name, "missing");
            continue;
        }
        if (it->second < 0.0 || it->second > 1.0)
            bad(std::string("intensity_probs.") + name, "must lie in [0,1]");
        prob_sum += it->second;
    }
    if (prob_sum > 1.0 + 1e-12) bad("intensity_probs", "probabilities exceed 1");

    if (!(c.bin_separation_dt_s > 0.0)) bad("bin_separation_ns", "must be > 0");
    if (!(c.multiplex_slot_spacing_s > 0.0)) bad("multiplex_slot_spacing_ns", "must be > 0");
    if (c.bin_separation_dt_s > 0.0 && c.multiplex_slot_spacing_s > 0.0 &&
        (c.inserted_pairs + 1) * c.multiplex_slot_spacing_s > c.bin_separation_dt_s * (1.0 + 1e-12))
        bad("inserted_pairs", "(inserted_pairs + 1) * slot spacing exceeds bin separation");
    if (!(c.clock_rate_hz > 0.0)) bad("clock_rate_hz", "must be > 0");
    if (c.clock_rate_hz > 0.0 && c.bin_separation_dt_s > 0.0 && c.multiplex_slot_spacing_s > 0.0 &&
        c.inserted_pairs * c.multiplex_slot_spacing_s + c.bin_separation_dt_s >
            (1.0 + 1e-12) / c.clock_rate_hz)
        bad("clock_rate_hz", "frame period too short for the last late bin");
    if (!(c.failure_prob > 0.0 && c.failure_prob < 1.0)) bad("failure_prob", "must lie in (0,1)");
    if (!(c.error_correction_f >= 1.0)) bad("error_correction_f", "must be >= 1");
    if (c.visibility < 0.0 || c.visibility > 1.0) bad("visibility", "must lie in [0,1]");
    if (!(c.coincidence_window_tau_s > 0.0)) bad("coincidence_window_ps", "must be > 0");
    if (c.channel_loss_db < 0.0) bad("channel_loss_db", "must be >= 0");
    if (c.chip_insertion_loss_db < 0.0) bad("chip_insertion_loss_db", "must be >= 0");
    if (c.fluctuation_mode != "joint" && c.fluctuation_mode != "per_observable" &&
        c.fluctuation_mode != "none")
        bad("fluctuation_mode", "must be one of joint|per_observable|none");

    try {
        c.detector.check();
    } catch (const std::exception& e) {
        bad("detector", e.what());
    }
    return r;
}

}  // namespace qkd::core
