#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <utility>

#include "qkd/core_types.hpp"

namespace qkd::optics {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kPi = 3.14159265358979323846;

struct InterferenceParams {
    double visibility_v = 0.5;
    double coincidence_window_tau_s = 0.37e-9;
    double wavelength_a_m = 1536.47e-9;
    double wavelength_b_m = 1536.47e-9;
    double bin_separation_dt_s = 12.0e-9;

    void check() const {
        if (!(wavelength_a_m > 0.0) || !(wavelength_b_m > 0.0))
            throw std::invalid_argument("wavelengths must be positive");
        if (!(coincidence_window_tau_s > 0.0)) throw std::invalid_argument("tau must be positive");
        if (visibility_v < 0.0 || visibility_v > 1.0)
            throw std::invalid_argument("visibility outside [0,1]");
    }
};

// Frequency offset between the two lasers from their wavelengths.
inline double detuning_from_wavelengths(double lambda_a_m, double lambda_b_m) {
    if (!(lambda_a_m > 0.0) || !(lambda_b_m > 0.0))
        throw std::invalid_argument("wavelengths must be positive");
    return kSpeedOfLight * std::abs(lambda_a_m - lambda_b_m) / (lambda_a_m * lambda_b_m);
}

// theta = 2*pi*delta_omega*dt — phase accumulated between subsequent time bins.
inline double phase_offset(double detuning_hz, double dt_s) {
    if (!(dt_s > 0.0)) throw std::invalid_argument("dt must be positive");
    return 2.0 * kPi * detuning_hz * dt_s;
}

inline double phase_offset_from_wavelengths(double lambda_a_m, double lambda_b_m, double dt_s) {
    return phase_offset(detuning_from_wavelengths(lambda_a_m, lambda_b_m), dt_s);
}

// Unnormalized X-basis coincidence weights:
//   P_X^(+-) = 1 +- V * exp[-tau^2 (c|la-lb|/(la*lb))^2] * cos(theta)
// Returned as (P_plus, P_minus); their sum is exactly 2.
inline std::pair<double, double> x_basis_coincidence_probs(const InterferenceParams& p) {
    p.check();
    const double dw = detuning_from_wavelengths(p.wavelength_a_m, p.wavelength_b_m);
    const double theta = phase_offset(dw, p.bin_separation_dt_s);
    const double damp = std::exp(-(p.coincidence_window_tau_s * dw) * (p.coincidence_window_tau_s * dw));
    const double mod = p.visibility_v * damp * std::cos(theta);
    return {1.0 + mod, 1.0 - mod};
}

inline double qber_x(double p_plus, double p_minus, core::BsmVariant target) {
    const double denom = p_plus + p_minus;
    if (!(denom > 0.0)) throw std::invalid_argument("zero total coincidence weight");
    if (target == core::BsmVariant::PsiMinus) return p_minus / denom;
    if (target == core::BsmVariant::PsiPlus) return p_plus / denom;
    throw std::invalid_argument("QBER is defined for conclusive Bell outcomes only");
}

inline double qber_z(double error_weight, double correct_weight) {
    const double denom = error_weight + correct_weight;
    if (!(denom > 0.0)) throw std::invalid_argument("zero total weight");
    return error_weight / denom;
}

// Fixed 50:50 convention: d1 = (a + i b)/sqrt(2), d2 = (i a + b)/sqrt(2).
inline std::pair<std::complex<double>, std::complex<double>> beamsplitter_mix(
    std::complex<double> alice_amp, std::complex<double> bob_amp) {
    static const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    const std::complex<double> i{0.0, 1.0};
    return {(alice_amp + i * bob_amp) * inv_sqrt2, (i * alice_amp + bob_amp) * inv_sqrt2};
}

// V = 1 - C_indistinguishable / C_distinguishable; 0.5 is the ceiling for
// phase-randomized weak coherent pulses.
inline double hom_dip_visibility(double coincidences_indistinguishable,
                                 double coincidences_distinguishable) {
    if (!(coincidences_distinguishable > 0.0))
        throw std::invalid_argument("distinguishable baseline must be positive");
    return 1.0 - coincidences_indistinguishable / coincidences_distinguishable;
}

}  // namespace qkd::optics
