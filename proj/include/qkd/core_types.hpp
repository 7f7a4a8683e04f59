#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qkd/detector_model.hpp"

namespace qkd::core {

enum class Basis : uint8_t { Z, X };
enum class IntensityLabel : uint8_t { S, Mu, Nu, O };
enum class BsmVariant : uint8_t { PsiMinus, PsiPlus, Inconclusive };

inline const char* label_name(IntensityLabel l) {
    switch (l) {
        case IntensityLabel::S: return "s";
        case IntensityLabel::Mu: return "mu";
        case IntensityLabel::Nu: return "nu";
        default: return "o";
    }
}
inline Basis basis_for(IntensityLabel l) {
    // s carries the Z (key) basis; decoys and vacuum are recorded as X.
    return l == IntensityLabel::S ? Basis::Z : Basis::X;
}

struct ProtocolConfig {
    double clock_rate_hz = 41.7e6;          // base frame rate
    double bin_separation_dt_s = 12.0e-9;   // early/late separation
    double multiplex_slot_spacing_s = 4.0e-9;  // tau_R between inserted slot pairs
    uint32_t inserted_pairs = 2;            // extra independent slot pairs per frame

    // mean photon number per pulse, and send probabilities; vacuum probability
    // is the remainder 1 - (P_s + P_mu + P_nu)
    std::map<std::string, double> intensities{{"s", 0.714}, {"mu", 0.034}, {"nu", 0.172}, {"o", 0.0}};
    std::map<std::string, double> intensity_probs{{"s", 0.828}, {"mu", 0.14}, {"nu", 0.014}};

    double channel_loss_db = 12.0;          // per arm (half of the symmetric total)
    double chip_insertion_loss_db = 0.0;    // counted once; half per arm
    uint64_t pulse_pair_budget = 0;
    double failure_prob = 1e-10;
    double error_correction_f = 1.16;
    double laser_detuning_hz = 0.0;
    double visibility = 0.5;
    double coincidence_window_tau_s = 0.37e-9;

    detector::DetectorParams detector;

    // Estimator variant for the decoy analysis (see decoy_analysis).
    std::string fluctuation_mode = "joint";

    double intensity(IntensityLabel l) const { return intensities.at(label_name(l)); }
    double vacuum_prob() const {
        double s = 0.0;
        for (const auto& [k, v] : intensity_probs) s += v;
        return 1.0 - s;
    }
    double send_prob(IntensityLabel l) const {
        if (l == IntensityLabel::O) return vacuum_prob();
        return intensity_probs.at(label_name(l));
    }
    uint32_t slots_per_frame() const { return inserted_pairs + 1; }
    double effective_clock_hz() const { return clock_rate_hz * slots_per_frame(); }
    double per_arm_loss_db() const { return channel_loss_db + 0.5 * chip_insertion_loss_db; }
    double total_loss_db() const { return 2.0 * channel_loss_db + chip_insertion_loss_db; }
    double arm_transmissivity() const { return std::pow(10.0, -per_arm_loss_db() / 10.0); }
};

struct ValidationResult {
    struct Violation {
        std::string field;
        std::string message;
    };
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
    std::string to_string() const {
        std::string out;
        for (const auto& v : violations) out += v.field + ": " + v.message + "\n";
        return out;
    }
};

ValidationResult validate_config(const ProtocolConfig& config);

// One time-multiplexed early/late pulse pair. Amplitudes are the logical
// coherent amplitudes before phase randomization; the drawn global phase is
// kept separate and applied at the beam splitter.
struct PulseFrame {
    Basis basis = Basis::Z;
    uint8_t bit = 0;
    IntensityLabel intensity_label = IntensityLabel::S;
    uint32_t slot_index = 0;
    double global_phase = 0.0;
    std::complex<double> early_amplitude{0.0, 0.0};
    std::complex<double> late_amplitude{0.0, 0.0};
};

struct BsmOutcome {
    BsmVariant variant = BsmVariant::Inconclusive;
};

// Counts keyed by ordered intensity pair (Alice label, Bob label).
// success/error are indexed by conclusive Bell variant (0 = PsiMinus, 1 = PsiPlus).
struct PairTally {
    uint64_t sent = 0;
    std::array<uint64_t, 2> success{0, 0};
    std::array<uint64_t, 2> error{0, 0};

    uint64_t successes() const { return success[0] + success[1]; }
    uint64_t errors() const { return error[0] + error[1]; }
};

struct TallyTable {
    // index = 4*label_a + label_b
    std::array<PairTally, 16> pairs{};

    static size_t index(IntensityLabel a, IntensityLabel b) {
        return 4 * static_cast<size_t>(a) + static_cast<size_t>(b);
    }
    PairTally& at(IntensityLabel a, IntensityLabel b) { return pairs[index(a, b)]; }
    const PairTally& at(IntensityLabel a, IntensityLabel b) const { return pairs[index(a, b)]; }

    uint64_t total_sent() const {
        uint64_t n = 0;
        for (const auto& p : pairs) n += p.sent;
        return n;
    }
    void merge(const TallyTable& other) {
        for (size_t i = 0; i < pairs.size(); ++i) {
            pairs[i].sent += other.pairs[i].sent;
            for (int v = 0; v < 2; ++v) {
                pairs[i].success[v] += other.pairs[i].success[v];
                pairs[i].error[v] += other.pairs[i].error[v];
            }
        }
    }
    bool consistent() const {
        for (const auto& p : pairs) {
            if (p.successes() > p.sent) return false;
            if (p.error[0] > p.success[0] || p.error[1] > p.success[1]) return false;
        }
        return true;
    }
};

inline TallyTable merge(TallyTable a, const TallyTable& b) {
    a.merge(b);
    return a;
}

constexpr std::array<IntensityLabel, 4> all_labels{IntensityLabel::S, IntensityLabel::Mu,
                                                   IntensityLabel::Nu, IntensityLabel::O};

}  // namespace qkd::core
