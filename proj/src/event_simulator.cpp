#include "qkd/event_simulator.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>
#include <vector>

#include "qkd/optics_model.hpp"

namespace qkd::sim {

using core::Basis;
using core::BsmVariant;
using core::IntensityLabel;
using core::ProtocolConfig;
using core::PulseFrame;
using core::TallyTable;

core::PulseFrame encode_frame(Basis basis, uint8_t bit, IntensityLabel label, uint32_t slot_index,
                              double intensity, rng::Stream& rs) {
    PulseFrame f;
    f.basis = basis;
    f.bit = bit & 1;
    f.intensity_label = label;
    f.slot_index = slot_index;
    f.global_phase = rs.angle();
    if (intensity < 0.0) throw std::invalid_argument("negative intensity");
    if (basis == Basis::Z) {
        const double amp = std::sqrt(intensity);
        if (f.bit == 0)
            f.early_amplitude = amp;
        else
            f.late_amplitude = amp;
    } else {
        const double amp = std::sqrt(intensity / 2.0);
        f.early_amplitude = amp;
        f.late_amplitude = f.bit == 0 ? amp : -amp;  // |+> or |->
    }
    return f;
}

core::PulseFrame encode_frame(const ProtocolConfig& config, Basis basis, uint8_t bit,
                              IntensityLabel label, uint32_t slot_index, rng::Stream& rs) {
    return encode_frame(basis, bit, label, slot_index, config.intensity(label), rs);
}

std::pair<Basis, IntensityLabel> sample_intensity_and_basis(const ProtocolConfig& config,
                                                            rng::Stream& rs) {
    const double u = rs.uniform();
    double acc = config.send_prob(IntensityLabel::S);
    if (u < acc) return {Basis::Z, IntensityLabel::S};
    acc += config.send_prob(IntensityLabel::Mu);
    if (u < acc) return {Basis::X, IntensityLabel::Mu};
    acc += config.send_prob(IntensityLabel::Nu);
    if (u < acc) return {Basis::X, IntensityLabel::Nu};
    return {Basis::X, IntensityLabel::O};
}

namespace {

// Per-run constants hoisted out of the slot loop.
struct SlotContext {
    double sqrt_eta;
    double theta;   // detuning phase between Bob's e and l bins
    double dt_s;
    bool interference;
    bool classify_psi_plus;
};

SlotContext make_context(const ProtocolConfig& config, const SimOptions& options) {
    return {std::sqrt(config.arm_transmissivity()),
            optics::phase_offset(config.laser_detuning_hz, config.bin_separation_dt_s),
            config.bin_separation_dt_s, options.interference_enabled, options.classify_psi_plus};
}

BsmVariant classify(const SlotClicks& c, bool classify_psi_plus) {
    if (c.count() != 2) return BsmVariant::Inconclusive;
    const bool cross_bin = (c.d1_early || c.d2_early) && (c.d1_late || c.d2_late);
    if (!cross_bin) return BsmVariant::Inconclusive;  // same-bin double click
    const bool same_detector = (c.d1_early && c.d1_late) || (c.d2_early && c.d2_late);
    if (same_detector) return classify_psi_plus ? BsmVariant::PsiPlus : BsmVariant::Inconclusive;
    return BsmVariant::PsiMinus;
}

// Per-slot arm amplitudes at the beam splitter: channel loss, the drawn global
// phases, and the detuning phase on Bob's late bin.
struct SlotAmps {
    std::complex<double> ae, al, be, bl;
};

SlotAmps slot_amplitudes(const PulseFrame& fa, const PulseFrame& fb, const SlotContext& ctx) {
    const std::complex<double> pa = std::polar(ctx.sqrt_eta, fa.global_phase);
    const std::complex<double> pb = std::polar(ctx.sqrt_eta, fb.global_phase);
    const std::complex<double> pbl = std::polar(ctx.sqrt_eta, fb.global_phase + ctx.theta);
    return {fa.early_amplitude * pa, fa.late_amplitude * pa, fb.early_amplitude * pb,
            fb.late_amplitude * pbl};
}

void detect_bin(const SlotContext& ctx, std::complex<double> a, std::complex<double> b,
                detector::DetectorState& d1, detector::DetectorState& d2, double t,
                rng::Stream& rs, bool& c1, bool& c2) {
    double m1, m2;
    if (ctx.interference) {
        auto [o1, o2] = optics::beamsplitter_mix(a, b);
        m1 = std::norm(o1);
        m2 = std::norm(o2);
    } else {
        m1 = m2 = 0.5 * (std::norm(a) + std::norm(b));
    }
    const double p1 = detector::click_probability(m1, d1, t);
    const double p2 = detector::click_probability(m2, d2, t);
    // Draws happen unconditionally to keep streams aligned across options.
    c1 = rs.uniform() < p1;
    c2 = rs.uniform() < p2;
    if (c1) d1.register_click(t);
    if (c2) d2.register_click(t);
}

SlotResult simulate_pair_impl(const PulseFrame& fa, const PulseFrame& fb,
                              detector::DetectorState& d1, detector::DetectorState& d2,
                              const SlotContext& ctx, double slot_time_s, rng::Stream& rs) {
    const SlotAmps amp = slot_amplitudes(fa, fb, ctx);
    SlotClicks clicks;
    detect_bin(ctx, amp.ae, amp.be, d1, d2, slot_time_s, rs, clicks.d1_early, clicks.d2_early);
    detect_bin(ctx, amp.al, amp.bl, d1, d2, slot_time_s + ctx.dt_s, rs, clicks.d1_late,
               clicks.d2_late);
    return {core::BsmOutcome{classify(clicks, ctx.classify_psi_plus)}, clicks};
}

struct BatchJob {
    uint64_t first_slot = 0;
    uint64_t count = 0;
    uint64_t stream_seed = 0;
};

// One drawn slot of a frame, staged so bins can be detected in time order.
struct SlotDraw {
    IntensityLabel label_a = IntensityLabel::S, label_b = IntensityLabel::S;
    Basis basis_a = Basis::Z, basis_b = Basis::Z;
    uint8_t bit_a = 0, bit_b = 0;
    SlotAmps amp;
    SlotClicks clicks;
};

TallyTable run_batch(const ProtocolConfig& config, const SimOptions& options,
                     const ForcedScenario* forced, const BatchJob& job) {
    TallyTable tally;
    rng::Stream rs(job.stream_seed);
    detector::DetectorState d1(config.detector, options.dead_time_enabled);
    detector::DetectorState d2(config.detector, options.dead_time_enabled);
    const SlotContext ctx = make_context(config, options);

    const uint32_t spf = config.slots_per_frame();
    const double frame_period = 1.0 / config.clock_rate_hz;
    const double tau_r = config.multiplex_slot_spacing_s;
    const double intens[4] = {config.intensity(IntensityLabel::S),
                              config.intensity(IntensityLabel::Mu),
                              config.intensity(IntensityLabel::Nu), 0.0};

    std::vector<SlotDraw> slots(spf);
    uint64_t g = job.first_slot;
    const uint64_t end = job.first_slot + job.count;
    while (g < end) {
        // Frame chunk [s_lo, s_hi): with inserted pairs, all early bins of a
        // frame precede all its late bins, so bins are detected early-sweep
        // then late-sweep to keep detector recovery causal.
        const uint64_t frame_idx = g / spf;
        const uint32_t s_lo = static_cast<uint32_t>(g % spf);
        const uint32_t s_hi = static_cast<uint32_t>(
            std::min<uint64_t>(spf, s_lo + (end - g)));
        const double t0 = double(frame_idx) * frame_period;

        for (uint32_t s = s_lo; s < s_hi; ++s) {
            SlotDraw& d = slots[s];
            auto [basis_a, label_a] = sample_intensity_and_basis(config, rs);
            uint8_t bit_a = rs.bernoulli(0.5) ? 1 : 0;
            if (forced && forced->label_a) {
                label_a = *forced->label_a;
                basis_a = core::basis_for(label_a);
            }
            if (forced && forced->bit_a) bit_a = *forced->bit_a;
            const PulseFrame fa = encode_frame(basis_a, bit_a, label_a, s, intens[size_t(label_a)], rs);

            auto [basis_b, label_b] = sample_intensity_and_basis(config, rs);
            uint8_t bit_b = rs.bernoulli(0.5) ? 1 : 0;
            if (forced && forced->label_b) {
                label_b = *forced->label_b;
                basis_b = core::basis_for(label_b);
            }
            if (forced && forced->bit_b) bit_b = *forced->bit_b;
            const PulseFrame fb = encode_frame(basis_b, bit_b, label_b, s, intens[size_t(label_b)], rs);

            d = {label_a, label_b, basis_a, basis_b, bit_a, bit_b, slot_amplitudes(fa, fb, ctx), {}};
        }
        for (uint32_t s = s_lo; s < s_hi; ++s)
            detect_bin(ctx, slots[s].amp.ae, slots[s].amp.be, d1, d2, t0 + s * tau_r, rs,
                       slots[s].clicks.d1_early, slots[s].clicks.d2_early);
        for (uint32_t s = s_lo; s < s_hi; ++s)
            detect_bin(ctx, slots[s].amp.al, slots[s].amp.bl, d1, d2, t0 + s * tau_r + ctx.dt_s, rs,
                       slots[s].clicks.d1_late, slots[s].clicks.d2_late);

        for (uint32_t s = s_lo; s < s_hi; ++s) {
            const SlotDraw& d = slots[s];
            core::PairTally& pt = tally.at(d.label_a, d.label_b);
            pt.sent += 1;
            const BsmVariant v = classify(d.clicks, ctx.classify_psi_plus);
            if (v == BsmVariant::Inconclusive) continue;
            const size_t vi = v == BsmVariant::PsiMinus ? 0 : 1;
            pt.success[vi] += 1;
            if (d.basis_a == d.basis_b && is_error(d.basis_a, d.bit_a, d.bit_b, v)) pt.error[vi] += 1;
        }
        g += s_hi - s_lo;
    }
    return tally;
}

}  // namespace

bool is_error(Basis basis, uint8_t bit_a, uint8_t bit_b, BsmVariant v) {
    if (basis == Basis::Z) return bit_a == bit_b;
    if (v == BsmVariant::PsiMinus) return bit_a == bit_b;
    return bit_a != bit_b;
}

SlotResult simulate_pair(const PulseFrame& frame_a, const PulseFrame& frame_b,
                         detector::DetectorState& d1, detector::DetectorState& d2,
                         const ProtocolConfig& config, const SimOptions& options,
                         double slot_time_s, rng::Stream& rs) {
    return simulate_pair_impl(frame_a, frame_b, d1, d2, make_context(config, options), slot_time_s,
                              rs);
}

core::TallyTable run_simulation(const ProtocolConfig& config, uint64_t seed, uint64_t pair_budget,
                                const SimOptions& options, const ForcedScenario* forced) {
    const auto validation = core::validate_config(config);
    if (!validation.ok())
        throw std::invalid_argument("invalid config:\n" + validation.to_string());

    const uint32_t workers = options.workers == 0 ? 1 : options.workers;
    std::vector<BatchJob> jobs;
    const uint64_t base = pair_budget / workers, rem = pair_budget % workers;
    uint64_t cursor = 0;
    for (uint32_t w = 0; w < workers; ++w) {
        const uint64_t n = base + (w < rem ? 1 : 0);
        jobs.push_back({cursor, n, rng::batch_seed(seed, w)});
        cursor += n;
    }

    std::vector<TallyTable> partial(jobs.size());
    if (workers == 1) {
        partial[0] = run_batch(config, options, forced, jobs[0]);
    } else {
        std::vector<std::thread> threads;
        threads.reserve(jobs.size());
        for (size_t i = 0; i < jobs.size(); ++i)
            threads.emplace_back([&, i] { partial[i] = run_batch(config, options, forced, jobs[i]); });
        for (auto& t : threads) t.join();
    }
    TallyTable tally;
    for (const auto& p : partial) tally.merge(p);
    return tally;
}

SiftedStats sift(const core::TallyTable& tally, const ProtocolConfig& config) {
    SiftedStats out;
    const core::PairTally& zz = tally.at(IntensityLabel::S, IntensityLabel::S);
    out.z_successes = zz.successes();
    if (out.z_successes == 0) throw std::runtime_error("no successes in Z basis");
    out.qber_z = optics::qber_z(double(zz.errors()), double(out.z_successes - zz.errors()));

    // X-basis QBER pools the matched-intensity decoy pairs; vacuum-involving
    // pairs carry no bit information.
    uint64_t succ[2] = {0, 0}, err[2] = {0, 0};
    for (IntensityLabel l : {IntensityLabel::Mu, IntensityLabel::Nu}) {
        const core::PairTally& pt = tally.at(l, l);
        for (int v = 0; v < 2; ++v) {
            succ[v] += pt.success[v];
            err[v] += pt.error[v];
        }
    }
    out.x_successes = succ[0] + succ[1];
    out.qber_x_psi_minus = succ[0] ? double(err[0]) / double(succ[0]) : std::nan("");
    out.qber_x_psi_plus = succ[1] ? double(err[1]) / double(succ[1]) : std::nan("");

    const uint64_t total_slots = tally.total_sent();
    out.sifted_rate_bps =
        double(out.z_successes) / double(total_slots) * config.effective_clock_hz();
    return out;
}

HomResult run_hom_scan(const ProtocolConfig& config, IntensityLabel label, uint64_t trials,
                       uint64_t seed) {
    HomResult out;
    rng::Stream rs(rng::batch_seed(seed, 0));
    detector::DetectorState d1(config.detector, false), d2(config.detector, false);
    const double eta = config.arm_transmissivity();
    const double amp = std::sqrt(config.intensity(label) * eta);

    for (uint64_t i = 0; i < trials; ++i) {
        const double dphi = rs.angle() - rs.angle();  // only the phase difference matters
        const std::complex<double> a{amp, 0.0};
        const std::complex<double> b = std::polar(amp, dphi);
        auto [o1, o2] = optics::beamsplitter_mix(a, b);
        const double p1 = detector::click_probability(std::norm(o1), d1, 0.0);
        const double p2 = detector::click_probability(std::norm(o2), d2, 0.0);
        const double md = 0.5 * (std::norm(a) + std::norm(b));
        const double pd1 = detector::click_probability(md, d1, 0.0);
        const double pd2 = detector::click_probability(md, d2, 0.0);
        const double u1 = rs.uniform(), u2 = rs.uniform();
        if (u1 < p1 && u2 < p2) out.coincidences_indistinguishable += 1;
        if (u1 < pd1 && u2 < pd2) out.coincidences_distinguishable += 1;
    }
    out.visibility = optics::hom_dip_visibility(double(out.coincidences_indistinguishable),
                                                double(out.coincidences_distinguishable));
    return out;
}

}  // namespace qkd::sim
