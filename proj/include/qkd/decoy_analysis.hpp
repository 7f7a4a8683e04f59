#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qkd/core_types.hpp"

namespace qkd::decoy {

struct AnalysisError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct PairObservation {
    double sent = 0.0;
    double successes = 0.0;
    std::optional<double> errors;
};

// Observed counts per ordered intensity pair (Alice label, Bob label).
struct ObservedGains {
    std::array<PairObservation, 16> pairs{};

    PairObservation& at(core::IntensityLabel a, core::IntensityLabel b) {
        return pairs[core::TallyTable::index(a, b)];
    }
    const PairObservation& at(core::IntensityLabel a, core::IntensityLabel b) const {
        return pairs[core::TallyTable::index(a, b)];
    }
    static ObservedGains from_tally(const core::TallyTable& tally);
};

// Estimator variants for handling finite-size fluctuations.
//  Joint          pooled statistically identical observables; the yield system
//                 is solved at the pooled central gains while the error-side
//                 estimates carry Chernoff intervals (default; see README)
//  PerObservable  Chernoff intervals on every observable separately (strictly
//                 conservative box treatment)
//  None           asymptotic limit, all intervals collapsed to the observation
enum class FluctuationMode { Joint, PerObservable, None };

FluctuationMode fluctuation_mode_from_string(const std::string& name);
std::string to_string(FluctuationMode mode);

double binary_entropy(double x);

struct Interval {
    double lower = 0.0;
    double upper = 0.0;
};

// Inverted multiplicative Chernoff interval for the expectation of a counting
// observable: each side fails with probability at most failure_prob.
Interval chernoff_bounds(double observed_count, double failure_prob);

struct IntervalRecord {
    std::string observable;
    double count = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

struct DecoyResult {
    double y11_lower = 0.0;
    double e11ph_upper = 0.0;
    double key_rate_per_pulse = 0.0;
    double key_rate_bps = 0.0;
    bool clamped = false;     // quantum term lost to error correction
    bool infeasible = false;  // yield system had no solution
    std::string mode;
    std::vector<IntervalRecord> intervals;
};

// Lower bound on the single-photon-pair yield from the photon-number
// decomposition linear program over yields y_nm, n,m <= 10.
double estimate_y11_lower(const ObservedGains& gains, const core::ProtocolConfig& config,
                          FluctuationMode mode, std::vector<IntervalRecord>* records = nullptr,
                          bool* infeasible = nullptr);

// Closed-form two-decoy bound; used to validate the LP.
double analytic_y11_lower(const ObservedGains& gains, const core::ProtocolConfig& config,
                          FluctuationMode mode);

// Upper bound on the single-photon phase-error rate from the mu-mu error gain
// with the vacuum contribution (e_0m = e_n0 = 1/2) subtracted.
double estimate_e11ph_upper(const ObservedGains& gains, const core::ProtocolConfig& config,
                            double y11_lower, FluctuationMode mode,
                            std::vector<IntervalRecord>* records = nullptr);

DecoyResult key_rate(double y11_lower, double e11ph_upper, double y_ss, double big_e_ss,
                     const core::ProtocolConfig& config);

// Full pipeline: bounds plus key rate from a complete observation set.
DecoyResult analyze(const ObservedGains& gains, const core::ProtocolConfig& config);

}  // namespace qkd::decoy
