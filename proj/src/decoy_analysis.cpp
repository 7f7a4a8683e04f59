#include "qkd/decoy_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace qkd::decoy {

using core::IntensityLabel;
using core::ProtocolConfig;

namespace {

constexpr int kCut = 10;                          // photon-number cutoff per side
constexpr int kVars = (kCut + 1) * (kCut + 1);    // yield variables y_nm
inline int var_index(int n, int m) { return n * (kCut + 1) + m; }

std::array<double, kCut + 1> poisson_pmf(double mean) {
    std::array<double, kCut + 1> p{};
    p[0] = std::exp(-mean);
    for (int n = 1; n <= kCut; ++n) p[n] = p[n - 1] * mean / n;
    return p;
}

// ---------------------------------------------------------------------------
// Dense two-phase primal simplex for: min c.x  s.t.  A x <= b, 0 <= x <= 1.
// Bland's rule throughout; box bounds enter as explicit rows so every
// structural column always has an eligible pivot.
// ---------------------------------------------------------------------------
class BoxSimplex {
  public:
    BoxSimplex(int n_vars) : n_(n_vars) {}

    void add_row(const std::vector<double>& coeff, double rhs) {
        rows_.push_back(coeff);
        rhs_.push_back(rhs);
    }

    bool minimize(const std::vector<double>& objective, double& value_out) {
        const int m_user = static_cast<int>(rows_.size());
        const int m = m_user + n_;  // + box rows x_j <= 1
        // Count artificials: rows whose rhs is negative after canonicalization.
        std::vector<int> art_of_row(m, -1);
        int n_art = 0;
        for (int i = 0; i < m_user; ++i)
            if (rhs_[i] < 0.0) art_of_row[i] = n_art++;

        const int n_slack = m;
        const int width = n_ + n_slack + n_art + 1;  // + RHS column
        std::vector<std::vector<double>> t(m, std::vector<double>(width, 0.0));
        std::vector<int> basis(m);

        for (int i = 0; i < m; ++i) {
            double sign = 1.0;
            double b;
            if (i < m_user) {
                b = rhs_[i];
                if (b < 0.0) sign = -1.0;
                for (int j = 0; j < n_; ++j) t[i][j] = sign * rows_[i][j];
                t[i][width - 1] = sign * b;
                t[i][n_ + i] = sign;  // slack (surplus when the row was flipped)
                if (art_of_row[i] >= 0) {
                    t[i][n_ + n_slack + art_of_row[i]] = 1.0;
                    basis[i] = n_ + n_slack + art_of_row[i];
                } else {
                    basis[i] = n_ + i;
                }
            } else {
                const int j = i - m_user;
                t[i][j] = 1.0;
                t[i][n_ + i] = 1.0;
                t[i][width - 1] = 1.0;
                basis[i] = n_ + i;
            }
        }

        // `allowed` caps the entering-column range: phase 2 must never pivot an
        // artificial column back in.
        auto run_phase = [&](const std::vector<double>& cost, int allowed) -> double {
            std::vector<double> z(width, 0.0);
            for (int j = 0; j < width; ++j) z[j] = j < int(cost.size()) ? cost[j] : 0.0;
            // reduced costs: z - sum over basic rows of c_basic * row
            for (int i = 0; i < m; ++i) {
                const double cb = basis[i] < int(cost.size()) ? cost[basis[i]] : 0.0;
                if (cb == 0.0) continue;
                for (int j = 0; j < width; ++j) z[j] -= cb * t[i][j];
            }
            const double rc_tol = 1e-10;
            const double piv_tol = 1e-11;
            while (true) {
                int enter = -1;
                for (int j = 0; j < allowed; ++j)
                    if (z[j] < -rc_tol) {
                        enter = j;
                        break;  // Bland: first improving column
                    }
                if (enter < 0) break;
                int leave = -1;
                double best = 0.0;
                for (int i = 0; i < m; ++i) {
                    if (t[i][enter] > piv_tol) {
                        const double ratio = t[i][width - 1] / t[i][enter];
                        if (leave < 0 || ratio < best - 1e-15 ||
                            (std::abs(ratio - best) <= 1e-15 && basis[i] < basis[leave])) {
                            leave = i;
                            best = ratio;
                        }
                    }
                }
                if (leave < 0) return std::nan("");  // unbounded (cannot happen with box rows)
                pivot(t, basis, z, leave, enter, width);
            }
            double obj = 0.0;
            for (int i = 0; i < m; ++i)
                if (basis[i] < int(cost.size())) obj += cost[basis[i]] * t[i][width - 1];
            return obj;
        };

        if (n_art > 0) {
            std::vector<double> phase1(n_ + n_slack + n_art, 0.0);
            for (int k = 0; k < n_art; ++k) phase1[n_ + n_slack + k] = 1.0;
            const double w = run_phase(phase1, width - 1);
            if (std::isnan(w) || w > 1e-7) return false;  // infeasible
            // Drive any residual artificial out of the basis.
            for (int i = 0; i < m; ++i) {
                if (basis[i] >= n_ + n_slack) {
                    int enter = -1;
                    for (int j = 0; j < n_ + n_slack; ++j)
                        if (std::abs(t[i][j]) > 1e-9) {
                            enter = j;
                            break;
                        }
                    if (enter >= 0) {
                        std::vector<double> dummy(width, 0.0);
                        pivot(t, basis, dummy, i, enter, width);
                    }
                }
            }
        }

        std::vector<double> phase2(n_, 0.0);
        for (int j = 0; j < n_ && j < int(objective.size()); ++j) phase2[j] = objective[j];
        const double v = run_phase(phase2, n_ + n_slack);
        if (std::isnan(v)) return false;
        value_out = v;
        return true;
    }

  private:
    static void pivot(std::vector<std::vector<double>>& t, std::vector<int>& basis,
                      std::vector<double>& z, int leave, int enter, int width) {
        const double p = t[leave][enter];
        for (int j = 0; j < width; ++j) t[leave][j] /= p;
        for (size_t i = 0; i < t.size(); ++i) {
            if (int(i) == leave) continue;
            const double f = t[i][enter];
            if (f == 0.0) continue;
            for (int j = 0; j < width; ++j) t[i][j] -= f * t[leave][j];
        }
        const double fz = z[enter];
        if (fz != 0.0)
            for (int j = 0; j < width; ++j) z[j] -= fz * t[leave][j];
        basis[leave] = enter;
    }

    int n_;
    std::vector<std::vector<double>> rows_;
    std::vector<double> rhs_;
};

// ---------------------------------------------------------------------------
// Pooled observables
// ---------------------------------------------------------------------------
struct Pooled {
    std::string name;
    std::vector<double> coeff;  // predicted gain sum = coeff . y
    double count = 0.0;
    double exposure = 0.0;      // pulse pairs behind `count`
    double pool_factor = 1.0;   // gain sum = pool_factor * count / exposure
    double tail = 0.0;          // worst-case truncated mass

    double gain() const { return exposure > 0.0 ? pool_factor * count / exposure : 0.0; }
    Interval gain_interval(double eps) const {
        const Interval c = chernoff_bounds(count, eps);
        return {pool_factor * c.lower / exposure, pool_factor * c.upper / exposure};
    }
};

std::vector<double> outer_coeff(const std::array<double, kCut + 1>& pa,
                                const std::array<double, kCut + 1>& pb) {
    std::vector<double> c(kVars, 0.0);
    for (int n = 0; n <= kCut; ++n)
        for (int m = 0; m <= kCut; ++m) c[var_index(n, m)] = pa[n] * pb[m];
    return c;
}

std::vector<double> add_vec(std::vector<double> a, const std::vector<double>& b) {
    for (size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
}

std::vector<Pooled> build_pooled(const ObservedGains& g, const ProtocolConfig& cfg) {
    const double mu = cfg.intensity(IntensityLabel::Mu);
    const double nu = cfg.intensity(IntensityLabel::Nu);
    const auto pm = poisson_pmf(mu), pv = poisson_pmf(nu);
    std::array<double, kCut + 1> pvac{};
    pvac[0] = 1.0;
    double sum_m = 0.0, sum_v = 0.0;
    for (double x : pm) sum_m += x;
    for (double x : pv) sum_v += x;
    const double tail_m = 1.0 - sum_m, tail_v = 1.0 - sum_v;

    auto obs = [&](IntensityLabel a, IntensityLabel b) -> const PairObservation& {
        return g.at(a, b);
    };
    auto pooled2 = [&](const char* name, IntensityLabel a, IntensityLabel b,
                       std::vector<double> coeff, double tail) {
        const PairObservation &ab = obs(a, b), &ba = obs(b, a);
        Pooled p;
        p.name = name;
        p.coeff = std::move(coeff);
        p.count = ab.successes + ba.successes;
        p.exposure = ab.sent + ba.sent;
        p.pool_factor = 2.0;  // gain sum of the two orders over equal exposures
        p.tail = tail;
        return p;
    };

    std::vector<Pooled> out;
    out.push_back({"mumu", outer_coeff(pm, pm), obs(IntensityLabel::Mu, IntensityLabel::Mu).successes,
                   obs(IntensityLabel::Mu, IntensityLabel::Mu).sent, 1.0,
                   1.0 - (1.0 - tail_m) * (1.0 - tail_m)});
    out.push_back({"nunu", outer_coeff(pv, pv), obs(IntensityLabel::Nu, IntensityLabel::Nu).successes,
                   obs(IntensityLabel::Nu, IntensityLabel::Nu).sent, 1.0,
                   1.0 - (1.0 - tail_v) * (1.0 - tail_v)});
    out.push_back(pooled2("muo+omu", IntensityLabel::Mu, IntensityLabel::O,
                          add_vec(outer_coeff(pm, pvac), outer_coeff(pvac, pm)), tail_m));
    out.push_back(pooled2("nuo+onu", IntensityLabel::Nu, IntensityLabel::O,
                          add_vec(outer_coeff(pv, pvac), outer_coeff(pvac, pv)), tail_v));
    out.push_back({"oo", outer_coeff(pvac, pvac), obs(IntensityLabel::O, IntensityLabel::O).successes,
                   obs(IntensityLabel::O, IntensityLabel::O).sent, 1.0, 0.0});

    for (const Pooled& p : out) {
        if (!(p.exposure > 0.0))
            throw AnalysisError("missing intensity pair " + p.name);
        if (p.count > p.exposure * p.pool_factor)
            throw AnalysisError("successes exceed sent pairs for " + p.name);
    }
    return out;
}

}  // namespace

ObservedGains ObservedGains::from_tally(const core::TallyTable& tally) {
    ObservedGains g;
    for (core::IntensityLabel a : core::all_labels)
        for (core::IntensityLabel b : core::all_labels) {
            const core::PairTally& t = tally.at(a, b);
            PairObservation& o = g.at(a, b);
            o.sent = double(t.sent);
            o.successes = double(t.successes());
            o.errors = double(t.errors());
        }
    return g;
}

FluctuationMode fluctuation_mode_from_string(const std::string& name) {
    if (name == "joint") return FluctuationMode::Joint;
    if (name == "per_observable") return FluctuationMode::PerObservable;
    if (name == "none") return FluctuationMode::None;
    throw AnalysisError("unknown fluctuation mode: " + name);
}

std::string to_string(FluctuationMode mode) {
    switch (mode) {
        case FluctuationMode::Joint: return "joint";
        case FluctuationMode::PerObservable: return "per_observable";
        default: return "none";
    }
}

double binary_entropy(double x) {
    if (x < -1e-12 || x > 1.0 + 1e-12) throw AnalysisError("binary_entropy argument outside [0,1]");
    x = std::clamp(x, 0.0, 1.0);
    if (x == 0.0 || x == 1.0) return 0.0;
    return -x * std::log2(x) - (1.0 - x) * std::log2(1.0 - x);
}

// Solve E - x + x*log(x/E) = log(1/eps) on each side of the observation x.
Interval chernoff_bounds(double observed_count, double failure_prob) {
    if (!(failure_prob > 0.0 && failure_prob < 1.0)) throw AnalysisError("failure_prob outside (0,1)");
    if (observed_count < 0.0) throw AnalysisError("negative count");
    const double t = std::log(1.0 / failure_prob);
    const double x = observed_count;
    if (x == 0.0) return {0.0, t};

    auto rate = [x](double e) { return e - x + x * std::log(x / e); };
    auto bisect = [&](double lo, double hi, bool increasing) {
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            const bool above = rate(mid) > t;
            if (above == increasing)
                hi = mid;
            else
                lo = mid;
        }
        return 0.5 * (lo + hi);
    };

    double hi = x + t + std::sqrt(2.0 * x * t) + 1.0;
    while (rate(hi) < t) hi *= 2.0;
    const double upper = bisect(x, hi, true);

    double lo = std::max(x - t - std::sqrt(2.0 * x * t) - 1.0, x * 1e-18);
    while (rate(lo) < t && lo > x * 1e-17) lo *= 0.5;
    const double lower = rate(lo) < t ? 0.0 : bisect(lo, x, false);
    return {lower, upper};
}

double estimate_y11_lower(const ObservedGains& gains, const ProtocolConfig& config,
                          FluctuationMode mode, std::vector<IntervalRecord>* records,
                          bool* infeasible) {
    if (infeasible) *infeasible = false;
    const std::vector<Pooled> pooled = build_pooled(gains, config);

    BoxSimplex lp(kVars);
    for (const Pooled& p : pooled) {
        double glo, ghi;
        if (mode == FluctuationMode::PerObservable) {
            const Interval iv = p.gain_interval(config.failure_prob);
            glo = iv.lower;
            ghi = iv.upper;
            if (records)
                records->push_back({"gain " + p.name, p.count, iv.lower * p.exposure / p.pool_factor,
                                    iv.upper * p.exposure / p.pool_factor});
        } else {
            glo = ghi = p.gain();  // pooled central value (Joint) / asymptotic (None)
        }
        lp.add_row(p.coeff, ghi);
        std::vector<double> neg(p.coeff.size());
        for (size_t j = 0; j < neg.size(); ++j) neg[j] = -p.coeff[j];
        lp.add_row(neg, -std::max(glo - p.tail, 0.0));
    }

    std::vector<double> c(kVars, 0.0);
    c[var_index(1, 1)] = 1.0;
    double value = 0.0;
    if (!lp.minimize(c, value)) {
        if (infeasible) *infeasible = true;
        return 0.0;  // infeasible constraint system
    }
    return std::max(value, 0.0);
}

double analytic_y11_lower(const ObservedGains& gains, const ProtocolConfig& config,
                          FluctuationMode mode) {
    const std::vector<Pooled> pooled = build_pooled(gains, config);
    auto find = [&](const char* name) -> const Pooled& {
        for (const Pooled& p : pooled)
            if (p.name == name) return p;
        throw AnalysisError("internal: pooled observable missing");
    };
    const double eps = config.failure_prob;
    auto lo = [&](const Pooled& p) {
        return mode == FluctuationMode::PerObservable ? p.gain_interval(eps).lower : p.gain();
    };
    auto hi = [&](const Pooled& p) {
        return mode == FluctuationMode::PerObservable ? p.gain_interval(eps).upper : p.gain();
    };
    const Pooled &mm = find("mumu"), &vv = find("nunu"), &mo = find("muo+omu"),
                 &vo = find("nuo+onu"), &oo = find("oo");

    const double mu = config.intensity(IntensityLabel::Mu);
    const double nu = config.intensity(IntensityLabel::Nu);
    if (!(nu > mu)) throw AnalysisError("analytic bound requires nu > mu");
    // H_k = S_kk - (S_ko + S_ok) + S_oo, bounded from the right side for each term.
    const double h_mu = lo(mm) - hi(mo) + lo(oo);
    const double h_nu = hi(vv) - lo(vo) + hi(oo);
    const double num =
        nu * nu * nu * std::exp(2.0 * mu) * h_mu - mu * mu * mu * std::exp(2.0 * nu) * h_nu;
    const double den = mu * mu * nu * nu * (nu - mu);
    return std::max(num / den, 0.0);
}

double estimate_e11ph_upper(const ObservedGains& gains, const ProtocolConfig& config,
                            double y11_lower, FluctuationMode mode,
                            std::vector<IntervalRecord>* records) {
    if (!(y11_lower > 0.0)) throw AnalysisError("phase error undefined: y11 lower bound is 0");
    const PairObservation& mm = gains.at(IntensityLabel::Mu, IntensityLabel::Mu);
    const PairObservation& mo = gains.at(IntensityLabel::Mu, IntensityLabel::O);
    const PairObservation& om = gains.at(IntensityLabel::O, IntensityLabel::Mu);
    const PairObservation& oo = gains.at(IntensityLabel::O, IntensityLabel::O);
    if (!mm.errors) throw AnalysisError("mu-mu error counts required for e11ph");
    if (!(mm.sent > 0.0) || !(mo.sent + om.sent > 0.0) || !(oo.sent > 0.0))
        throw AnalysisError("missing intensity pair for e11ph");

    const double eps = config.failure_prob;
    const double err_count = *mm.errors;
    const double pool_count = mo.successes + om.successes;
    const double pool_exposure = mo.sent + om.sent;

    double t_upper, pool_lower, s_oo;
    if (mode == FluctuationMode::None) {
        t_upper = err_count / mm.sent;
        pool_lower = 2.0 * pool_count / pool_exposure;
        s_oo = oo.successes / oo.sent;
    } else {
        const Interval it = chernoff_bounds(err_count, eps);
        const Interval ip = chernoff_bounds(pool_count, eps);
        t_upper = it.upper / mm.sent;
        pool_lower = 2.0 * ip.lower / pool_exposure;
        // Joint keeps the doubly-vacuum term at its observation; the strict
        // per-observable variant worst-cases it upward.
        s_oo = mode == FluctuationMode::PerObservable
                   ? chernoff_bounds(oo.successes, eps).upper / oo.sent
                   : oo.successes / oo.sent;
        if (records) {
            records->push_back({"error gain mumu", err_count, it.lower, it.upper});
            records->push_back({"gain muo+omu", pool_count, ip.lower, ip.upper});
        }
    }

    const double mu = config.intensity(IntensityLabel::Mu);
    const double p0 = std::exp(-mu);
    const double p1 = mu * std::exp(-mu);
    const double numerator = t_upper - 0.5 * p0 * pool_lower + 0.5 * p0 * p0 * s_oo;
    return std::max(numerator, 0.0) / (p1 * p1 * y11_lower);
}

DecoyResult key_rate(double y11_lower, double e11ph_upper, double y_ss, double big_e_ss,
                     const ProtocolConfig& config) {
    DecoyResult r;
    r.y11_lower = y11_lower;
    r.e11ph_upper = e11ph_upper;
    const double s = config.intensity(IntensityLabel::S);
    const double p_s = config.send_prob(IntensityLabel::S);
    const double quantum = s * s * std::exp(-2.0 * s) * y11_lower *
                           (1.0 - binary_entropy(std::min(e11ph_upper, 0.5)));
    const double correction = config.error_correction_f * y_ss * binary_entropy(big_e_ss);
    double rate = p_s * p_s * (quantum - correction);
    if (rate < 0.0) {
        rate = 0.0;
        r.clamped = true;
    }
    r.key_rate_per_pulse = rate;
    r.key_rate_bps = rate * config.effective_clock_hz();
    return r;
}

DecoyResult analyze(const ObservedGains& gains, const ProtocolConfig& config) {
    const FluctuationMode mode = fluctuation_mode_from_string(config.fluctuation_mode);
    const PairObservation& ss = gains.at(IntensityLabel::S, IntensityLabel::S);
    if (!(ss.sent > 0.0)) throw AnalysisError("missing intensity pair ss");
    if (!ss.errors) throw AnalysisError("ss error counts required for key rate");
    if (ss.successes > ss.sent || *ss.errors > ss.successes)
        throw AnalysisError("inconsistent ss counts");

    std::vector<IntervalRecord> records;
    bool infeasible = false;
    const double y11 = estimate_y11_lower(gains, config, mode, &records, &infeasible);
    DecoyResult result;
    if (infeasible || !(y11 > 0.0)) {
        result.infeasible = infeasible;
        result.mode = to_string(mode);
        result.intervals = std::move(records);
        return result;  // no key claim
    }
    const double e11 = estimate_e11ph_upper(gains, config, y11, mode, &records);
    const double y_ss = ss.successes / ss.sent;
    const double e_ss = ss.successes > 0.0 ? *ss.errors / ss.successes : 0.0;
    result = key_rate(y11, e11, y_ss, e_ss, config);
    result.mode = to_string(mode);
    result.intervals = std::move(records);
    return result;
}

}  // namespace qkd::decoy
