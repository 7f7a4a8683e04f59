#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>

namespace qkd::detector {

// SNSPD calibration figures. Times in seconds, rates in Hz.
struct DetectorParams {
    double ocde = 0.80;                 // on-chip detection efficiency
    double dark_rate_hz = 0.25;
    double decay_time_1e_s = 3.39e-9;   // 1/e recovery constant
    double full_recovery_s = 12.0e-9;
    double blind_time_s = 2.0e-9;       // hard blind interval after a click
    double gate_window_s = 1.0e-9;      // per-bin gate for dark counts

    void check() const {
        if (ocde < 0.0 || ocde > 1.0) throw std::invalid_argument("ocde outside [0,1]");
        if (dark_rate_hz < 0.0) throw std::invalid_argument("dark_rate_hz negative");
        if (!(decay_time_1e_s > 0.0) || !(decay_time_1e_s < full_recovery_s))
            throw std::invalid_argument("need 0 < decay_time_1e < full_recovery_time");
        if (blind_time_s < 0.0 || blind_time_s >= decay_time_1e_s)
            throw std::invalid_argument("blind_time must sit in [0, decay_time_1e)");
        if (gate_window_s <= 0.0) throw std::invalid_argument("gate_window must be positive");
    }
};

// Recovery of detection efficiency after a click.
// 0 during the blind interval, then a saturating exponential whose time
// constant is tied to the 1/e anchor (r(decay_time_1e) = 1 - 1/e before
// normalization) and which is pinned to exactly 1 at full_recovery_s.
inline double recovery_factor(double time_since_click_s, const DetectorParams& p) {
    if (time_since_click_s < 0.0) throw std::invalid_argument("negative time since click");
    if (time_since_click_s <= p.blind_time_s) return 0.0;
    if (time_since_click_s >= p.full_recovery_s) return 1.0;
    const double kappa = p.decay_time_1e_s - p.blind_time_s;
    const double norm = 1.0 - std::exp(-(p.full_recovery_s - p.blind_time_s) / kappa);
    const double r = (1.0 - std::exp(-(time_since_click_s - p.blind_time_s) / kappa)) / norm;
    return r < 0.0 ? 0.0 : (r > 1.0 ? 1.0 : r);
}

// Mutable per-detector state; confined to one simulation worker.
struct DetectorState {
    DetectorParams params;
    std::optional<double> last_click_time_s;  // none = fully recovered
    bool dead_time_enabled = true;
    double p_dark = 0.0;  // per-gate dark probability, cached off params

    explicit DetectorState(const DetectorParams& p = DetectorParams{}, bool dead_time = true)
        : params(p),
          dead_time_enabled(dead_time),
          p_dark(1.0 - std::exp(-p.dark_rate_hz * p.gate_window_s)) {}

    double efficiency_at(double bin_time_s) const {
        if (!dead_time_enabled || !last_click_time_s) return params.ocde;
        return params.ocde * recovery_factor(bin_time_s - *last_click_time_s, params);
    }
    void register_click(double bin_time_s) {
        if (last_click_time_s && bin_time_s < *last_click_time_s)
            throw std::logic_error("click times must be nondecreasing");
        last_click_time_s = bin_time_s;
    }
    void reset() { last_click_time_s.reset(); }
};

// p = 1 - (1 - p_dark) * exp(-eta_eff * nbar)
inline double click_probability(double incident_mean_photons, const DetectorState& state,
                                double bin_time_s) {
    if (incident_mean_photons < 0.0) throw std::invalid_argument("negative mean photon number");
    const double eta_eff = state.efficiency_at(bin_time_s);
    return 1.0 - (1.0 - state.p_dark) * std::exp(-eta_eff * incident_mean_photons);
}

// OCDE = (C - C_d) / N_in
inline double ocde_from_counts(double on_chip_count_rate_hz, double dark_count_rate_hz,
                               double photon_arrival_rate_hz) {
    if (photon_arrival_rate_hz <= 0.0) throw std::invalid_argument("photon arrival rate must be > 0");
    if (on_chip_count_rate_hz < dark_count_rate_hz)
        throw std::invalid_argument("count rate below dark rate");
    return (on_chip_count_rate_hz - dark_count_rate_hz) / photon_arrival_rate_hz;
}

// N_in = (P_in / E_photon) * eta * r * A
inline double photon_arrival_rate(double input_power_w, double attenuation,
                                  double coupler_eff, double splitter_ratio,
                                  double photon_energy_j) {
    if (input_power_w <= 0.0 || photon_energy_j <= 0.0)
        throw std::invalid_argument("power and photon energy must be positive");
    if (attenuation < 0.0 || attenuation > 1.0 || coupler_eff <= 0.0 || coupler_eff > 1.0 ||
        splitter_ratio <= 0.0 || splitter_ratio > 1.0)
        throw std::invalid_argument("attenuation/efficiency factors outside (0,1]");
    return (input_power_w / photon_energy_j) * coupler_eff * splitter_ratio * attenuation;
}

}  // namespace qkd::detector
