#include "qkd/io.hpp"

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace qkd::io {

using core::IntensityLabel;
using core::ProtocolConfig;
using json = nlohmann::ordered_json;

namespace {

constexpr double kNs = 1e-9;
constexpr double kPs = 1e-12;

constexpr const char* kTallyHeader =
    "pair,sent,success_psi_minus,success_psi_plus,error_psi_minus,error_psi_plus";
constexpr const char* kGainsHeader = "pair_label,sent,successes,errors";

[[noreturn]] void bad_key(const std::string& context, const std::string& key) {
    throw ValidationError("config: " + context + " key \"" + key + "\"");
}

// Strict object reader: every expected key consumed exactly once, nothing else.
class ObjectReader {
  public:
    ObjectReader(const json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) throw ValidationError("config: " + name_ + " must be an object");
    }
    ~ObjectReader() = default;

    template <typename T>
    T get(const std::string& key) {
        if (!j_.contains(key)) bad_key("missing", scoped(key));
        seen_.push_back(key);
        try {
            return j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ValidationError("config: wrong type for key \"" + scoped(key) + "\"");
        }
    }
    const json& child(const std::string& key) {
        if (!j_.contains(key)) bad_key("missing", scoped(key));
        seen_.push_back(key);
        return j_.at(key);
    }
    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (std::find(seen_.begin(), seen_.end(), key) == seen_.end())
                bad_key("unknown", scoped(key));
    }

  private:
    std::string scoped(const std::string& key) const {
        return name_.empty() ? key : name_ + "." + key;
    }
    const json& j_;
    std::string name_;
    std::vector<std::string> seen_;
};

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

uint64_t parse_count(const std::string& s, const std::string& context) {
    try {
        size_t pos = 0;
        if (!s.empty() && s[0] == '-') throw ValidationError(context + ": negative count");
        const unsigned long long v = std::stoull(s, &pos);
        if (pos != s.size()) throw IoError("");
        return v;
    } catch (const ValidationError&) {
        throw;
    } catch (const std::exception&) {
        throw IoError("malformed count \"" + s + "\" in " + context);
    }
}

double parse_real_count(const std::string& s, const std::string& context) {
    try {
        size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw IoError("");
        if (v < 0.0) throw ValidationError(context + ": negative count");
        return v;
    } catch (const ValidationError&) {
        throw;
    } catch (const std::exception&) {
        throw IoError("malformed count \"" + s + "\" in " + context);
    }
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace

uint64_t fnv1a64(const void* data, size_t size) {
    const auto* p = static_cast<const unsigned char*>(data);
    uint64_t h = 14695981039346656037ULL;
    for (size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hash_hex(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string file_hash(const std::string& path) {
    const std::string bytes = read_file(path);
    return hash_hex(fnv1a64(bytes.data(), bytes.size()));
}

core::ProtocolConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw IoError(std::string("config parse error: ") + e.what());
    }

    ProtocolConfig cfg;
    ObjectReader root(j, "");
    cfg.clock_rate_hz = root.get<double>("clock_rate_hz");
    cfg.bin_separation_dt_s = root.get<double>("bin_separation_ns") * kNs;
    cfg.multiplex_slot_spacing_s = root.get<double>("multiplex_slot_spacing_ns") * kNs;
    cfg.inserted_pairs = root.get<uint32_t>("inserted_pairs");

    ObjectReader intens(root.child("intensity"), "intensity");
    cfg.intensities = {{"s", intens.get<double>("s")},
                       {"mu", intens.get<double>("mu")},
                       {"nu", intens.get<double>("nu")},
                       {"o", intens.get<double>("o")}};
    intens.finish();

    ObjectReader probs(root.child("intensity_probs"), "intensity_probs");
    cfg.intensity_probs = {{"s", probs.get<double>("s")},
                           {"mu", probs.get<double>("mu")},
                           {"nu", probs.get<double>("nu")}};
    probs.finish();

    cfg.channel_loss_db = root.get<double>("channel_loss_db");
    cfg.chip_insertion_loss_db = root.get<double>("chip_insertion_loss_db");
    cfg.pulse_pair_budget = root.get<uint64_t>("pulse_pair_budget");
    cfg.failure_prob = root.get<double>("failure_prob");
    cfg.error_correction_f = root.get<double>("error_correction_f");
    cfg.laser_detuning_hz = root.get<double>("laser_detuning_hz");
    cfg.visibility = root.get<double>("visibility");
    cfg.coincidence_window_tau_s = root.get<double>("coincidence_window_ps") * kPs;
    cfg.fluctuation_mode = root.get<std::string>("fluctuation_mode");

    ObjectReader det(root.child("detector"), "detector");
    cfg.detector.ocde = det.get<double>("ocde");
    cfg.detector.dark_rate_hz = det.get<double>("dark_rate_hz");
    cfg.detector.decay_time_1e_s = det.get<double>("decay_time_1e_ns") * kNs;
    cfg.detector.full_recovery_s = det.get<double>("full_recovery_ns") * kNs;
    cfg.detector.blind_time_s = det.get<double>("blind_ns") * kNs;
    cfg.detector.gate_window_s = det.get<double>("gate_window_ns") * kNs;
    det.finish();
    root.finish();
    return cfg;
}

std::string config_to_json(const ProtocolConfig& cfg) {
    json j;
    j["clock_rate_hz"] = cfg.clock_rate_hz;
    j["bin_separation_ns"] = cfg.bin_separation_dt_s / kNs;
    j["multiplex_slot_spacing_ns"] = cfg.multiplex_slot_spacing_s / kNs;
    j["inserted_pairs"] = cfg.inserted_pairs;
    j["intensity"] = {{"s", cfg.intensities.at("s")},
                      {"mu", cfg.intensities.at("mu")},
                      {"nu", cfg.intensities.at("nu")},
                      {"o", cfg.intensities.at("o")}};
    j["intensity_probs"] = {{"s", cfg.intensity_probs.at("s")},
                            {"mu", cfg.intensity_probs.at("mu")},
                            {"nu", cfg.intensity_probs.at("nu")}};
    j["channel_loss_db"] = cfg.channel_loss_db;
    j["chip_insertion_loss_db"] = cfg.chip_insertion_loss_db;
    j["pulse_pair_budget"] = cfg.pulse_pair_budget;
    j["failure_prob"] = cfg.failure_prob;
    j["error_correction_f"] = cfg.error_correction_f;
    j["laser_detuning_hz"] = cfg.laser_detuning_hz;
    j["visibility"] = cfg.visibility;
    j["coincidence_window_ps"] = cfg.coincidence_window_tau_s / kPs;
    j["fluctuation_mode"] = cfg.fluctuation_mode;
    j["detector"] = {{"ocde", cfg.detector.ocde},
                     {"dark_rate_hz", cfg.detector.dark_rate_hz},
                     {"decay_time_1e_ns", cfg.detector.decay_time_1e_s / kNs},
                     {"full_recovery_ns", cfg.detector.full_recovery_s / kNs},
                     {"blind_ns", cfg.detector.blind_time_s / kNs},
                     {"gate_window_ns", cfg.detector.gate_window_s / kNs}};
    return j.dump(2) + "\n";
}

core::ProtocolConfig load_config(const std::string& path) {
    if (!std::filesystem::exists(path)) throw IoError("config not found: " + path);
    return config_from_json(read_file(path));
}

std::string pair_name(IntensityLabel a, IntensityLabel b) {
    return std::string(core::label_name(a)) + core::label_name(b);
}

std::pair<IntensityLabel, IntensityLabel> parse_pair_name(const std::string& name) {
    for (IntensityLabel a : core::all_labels) {
        const std::string pa = core::label_name(a);
        if (name.rfind(pa, 0) != 0) continue;
        const std::string rest = name.substr(pa.size());
        for (IntensityLabel b : core::all_labels)
            if (rest == core::label_name(b)) return {a, b};
    }
    throw ValidationError("unknown pair label \"" + name + "\"");
}

std::string tally_to_csv(const core::TallyTable& tally, const std::string& config_hash) {
    std::string out = "# qkdsim tally v1\n";
    if (!config_hash.empty()) out += "# config_hash " + config_hash + "\n";
    out += kTallyHeader;
    out += '\n';
    char line[160];
    for (IntensityLabel a : core::all_labels)
        for (IntensityLabel b : core::all_labels) {
            const core::PairTally& t = tally.at(a, b);
            std::snprintf(line, sizeof(line), "%s,%llu,%llu,%llu,%llu,%llu\n",
                          pair_name(a, b).c_str(), (unsigned long long)t.sent,
                          (unsigned long long)t.success[0], (unsigned long long)t.success[1],
                          (unsigned long long)t.error[0], (unsigned long long)t.error[1]);
            out += line;
        }
    return out;
}

LoadedGains load_gains(const std::string& path) {
    if (!std::filesystem::exists(path)) throw IoError("gains file not found: " + path);
    std::istringstream in(read_file(path));

    LoadedGains out;
    std::string line;
    std::string header;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ls(line.substr(1));
            std::string key, value;
            ls >> key >> value;
            if (key == "config_hash") out.config_hash = value;
            continue;
        }
        header = line;
        break;
    }
    if (header == kTallyHeader) {
        out.from_tally = true;
        core::TallyTable tally;
        std::array<bool, 16> seen{};
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line[0] == '#') continue;
            const auto f = split_csv_line(line);
            if (f.size() != 6) throw IoError("expected 6 columns in tally row \"" + line + "\"");
            const auto [a, b] = parse_pair_name(f[0]);
            if (seen[core::TallyTable::index(a, b)])
                throw ValidationError("duplicate tally row for pair " + f[0]);
            seen[core::TallyTable::index(a, b)] = true;
            core::PairTally& t = tally.at(a, b);
            t.sent = parse_count(f[1], f[0]);
            t.success[0] = parse_count(f[2], f[0]);
            t.success[1] = parse_count(f[3], f[0]);
            t.error[0] = parse_count(f[4], f[0]);
            t.error[1] = parse_count(f[5], f[0]);
        }
        if (!tally.consistent())
            throw ValidationError("tally counts inconsistent (errors <= successes <= sent violated)");
        out.gains = decoy::ObservedGains::from_tally(tally);
        return out;
    }
    if (header != kGainsHeader)
        throw IoError("unrecognized gains header \"" + header + "\"");

    std::array<bool, 16> seen{};
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        const auto f = split_csv_line(line);
        if (f.size() != 4) throw IoError("expected 4 columns in gains row \"" + line + "\"");
        const std::string& label = f[0];
        const double sent = parse_real_count(f[1], label);
        const double successes = parse_real_count(f[2], label);
        const bool has_err = f[3] != "NA" && f[3] != "na";
        const double errors = has_err ? parse_real_count(f[3], label) : 0.0;
        if (successes > sent)
            throw ValidationError(label + ": successes exceed sent");
        if (has_err && errors > successes)
            throw ValidationError(label + ": errors exceed successes");

        // pooled rows like muo+omu split evenly across the two orders
        std::vector<std::pair<IntensityLabel, IntensityLabel>> targets;
        const size_t plus = label.find('+');
        if (plus == std::string::npos) {
            targets.push_back(parse_pair_name(label));
        } else {
            targets.push_back(parse_pair_name(label.substr(0, plus)));
            targets.push_back(parse_pair_name(label.substr(plus + 1)));
        }
        const double w = 1.0 / double(targets.size());
        for (const auto& [a, b] : targets) {
            if (seen[core::TallyTable::index(a, b)])
                throw ValidationError("duplicate gains row for pair " + pair_name(a, b));
            seen[core::TallyTable::index(a, b)] = true;
            decoy::PairObservation& obs = out.gains.at(a, b);
            obs.sent = sent * w;
            obs.successes = successes * w;
            if (has_err) obs.errors = errors * w;
        }
    }
    return out;
}

std::string result_to_json(const decoy::DecoyResult& result, const std::string& config_hash) {
    json j;
    j["config_hash"] = config_hash;
    j["fluctuation_mode"] = result.mode;
    j["y11_lower"] = result.y11_lower;
    j["e11ph_upper"] = result.e11ph_upper;
    j["key_rate_per_pulse"] = result.key_rate_per_pulse;
    j["key_rate_bps"] = result.key_rate_bps;
    j["clamped"] = result.clamped;
    j["infeasible"] = result.infeasible;
    json intervals = json::array();
    for (const auto& r : result.intervals)
        intervals.push_back(json{{"observable", r.observable},
                                 {"count", r.count},
                                 {"lower", r.lower},
                                 {"upper", r.upper}});
    j["chernoff_intervals"] = intervals;
    return j.dump(2) + "\n";
}

std::string sweep_to_csv(const std::vector<report::SweepRow>& rows) {
    std::string out = "loss_db,eta,y11_lower,e11ph_upper,rate_per_pulse,rate_bps,plob,ideal_decoy\n";
    for (const report::SweepRow& r : rows) {
        out += format_double(r.loss_db) + "," + format_double(r.eta) + "," +
               format_double(r.y11_lower) + "," + format_double(r.e11ph_upper) + "," +
               format_double(r.rate_per_pulse) + "," + format_double(r.rate_bps) + "," +
               format_double(r.plob) + "," + format_double(r.ideal_decoy) + "\n";
    }
    return out;
}

std::string manifest_to_json(const RunManifest& m) {
    json j;
    j["tool_version"] = m.tool_version;
    j["command"] = m.command;
    j["arguments"] = m.arguments;
    j["config_hash"] = m.config_hash;
    j["seed"] = m.seed;
    j["workers"] = m.workers;
    j["started_utc"] = m.started_utc;
    j["finished_utc"] = m.finished_utc;
    j["note"] = m.note;
    return j.dump(2) + "\n";
}

std::string iso8601_utc_now() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failed for " + path);
    return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream outf(tmp, std::ios::binary | std::ios::trunc);
        if (!outf) throw IoError("cannot write " + tmp);
        outf << content;
        outf.flush();
        if (!outf) throw IoError("write failed for " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp + " to " + path + ": " + ec.message());
}

}  // namespace qkd::io
