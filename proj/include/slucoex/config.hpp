#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace slucoex {

enum class Scheme {
    Ccha,     // BS type-1 + centralized slots + user type-2
    CchaT1,   // centralized slots, users run a full type-1 sense
    T12Dra,   // distributed: type-1 then type-2 before the boundary
    T1oDra,   // distributed: type-1 only
    FCcha,    // CCHA with fixed 0 dBm users (benchmark for the learned schemes)
    Cghdrl,   // learned channel access + power
    Dqn,      // learned power only
    Random,   // random access + power
    Olpc      // open-loop power from the reference path loss
};

inline const std::vector<std::pair<std::string, Scheme>>& scheme_names() {
    static const std::vector<std::pair<std::string, Scheme>> names = {
        {"ccha", Scheme::Ccha},     {"ccha_t1", Scheme::CchaT1},
        {"t12_dra", Scheme::T12Dra}, {"t1o_dra", Scheme::T1oDra},
        {"f_ccha", Scheme::FCcha},   {"cghdrl", Scheme::Cghdrl},
        {"dqn", Scheme::Dqn},        {"random", Scheme::Random},
        {"olpc", Scheme::Olpc}};
    return names;
}

inline std::string valid_scheme_list() {
    std::string out;
    for (const auto& [name, s] : scheme_names()) {
        if (!out.empty())
            out += ", ";
        out += name;
    }
    return out;
}

inline Scheme parse_scheme(const std::string& name) {
    for (const auto& [n, s] : scheme_names())
        if (n == name)
            return s;
    throw std::invalid_argument("unknown scheme '" + name + "' (valid: " +
                                valid_scheme_list() + ")");
}

inline std::string scheme_name(Scheme s) {
    for (const auto& [n, v] : scheme_names())
        if (v == s)
            return n;
    return "?";
}

// Schemes built on the CCHA mechanism with learned/derived per-slot decisions
// (SL-U power range [-40, 0] dBm, Wi-Fi closed-loop power control).
inline bool is_adaptive_family(Scheme s) {
    return s == Scheme::FCcha || s == Scheme::Cghdrl || s == Scheme::Dqn ||
           s == Scheme::Random || s == Scheme::Olpc;
}

inline bool is_learned(Scheme s) { return s == Scheme::Cghdrl || s == Scheme::Dqn; }

enum class TrafficModel { Periodic, Poisson };

struct RunConfig {
    Scheme scheme = Scheme::Ccha;
    int m_pairs = 20;
    int n_wifi = 20;
    std::uint64_t seed = 1;
    double horizon_s = 10.0;

    // radio
    double carrier_freq_ghz = 5.8;
    double bandwidth_hz = 20e6;
    double scs_khz = 30.0;
    double noise_psd_dbm_hz = -174.0;
    double ed_threshold_dbm = -72.0;

    // MAC timing (T_d is derived from the priority class)
    int capc_priority = 1;
    std::int64_t cot_us = 2000;

    // area / traffic
    double area_m = 400.0;
    double pair_max_dist_m = 10.0;
    TrafficModel traffic = TrafficModel::Periodic;
    double traffic_period_ms = 10.0;
    int tb_bytes = 300;
    std::int64_t wifi_txop_us = 500;

    // link thresholds and utility
    double slu_sinr_min_db = 15.0;
    double wifi_sinr_min_db = 6.0;
    double beta = 0.8;
    double rate_scale_bps = 0.0; // 0 = derived from bandwidth

    // power (C1/C2)
    double slu_fixed_power_dbm = 23.0; // contention-scheme runs
    double slu_power_min_dbm = -40.0;  // adaptive-family runs
    double slu_power_max_dbm = 0.0;
    int slu_power_levels = 9;
    double wifi_power_dbm = 23.0; // fixed runs
    double wifi_power_min_dbm = 0.0;
    double wifi_power_max_dbm = 23.0;
    double wifi_target_sinr_db = 10.0; // closed loop: threshold + 4
    double wifi_power_margin_db = 3.0;
    double olpc_margin_db = 3.0;

    // learning
    int episodes = 200;
    int episode_cots = 25;
    std::vector<int> rl_hidden = {256, 256, 512};
    double learning_rate = 1e-3;
    double gamma = 0.8;
    int batch_size = 256;
    int replay_capacity = 1000;
    int target_sync_steps = 100;
    std::int64_t model_update_ms = 100;

    std::string checkpoint_path;

    // engine internals
    bool tick_mode = false; // true forces 1 us stepping (test hook)

    std::int64_t horizon_us() const {
        return static_cast<std::int64_t>(horizon_s * 1e6 + 0.5);
    }
    // slot duration scales inversely with subcarrier spacing (500 us at 30 kHz)
    std::int64_t slot_us() const {
        return static_cast<std::int64_t>(15000.0 / scs_khz + 0.5);
    }
    std::int64_t traffic_period_us() const {
        return static_cast<std::int64_t>(traffic_period_ms * 1000.0 + 0.5);
    }
    double rate_scale() const {
        if (rate_scale_bps > 0.0)
            return rate_scale_bps;
        return 2.0 * bandwidth_hz * std::log2(1.0 + std::pow(10.0, 4.0));
    }
    double slu_power_level_dbm(int index) const {
        const int n = slu_power_levels;
        if (n <= 1)
            return slu_power_max_dbm;
        return slu_power_min_dbm +
               (slu_power_max_dbm - slu_power_min_dbm) * index / (n - 1);
    }

    void validate() const {
        if (m_pairs < 1 || n_wifi < 1)
            throw std::invalid_argument("config: user counts must be >= 1");
        if (!(horizon_s > 0.0))
            throw std::invalid_argument("config: horizon must be > 0");
        if (!(beta >= 0.0 && beta <= 1.0))
            throw std::invalid_argument("config: beta must be in [0,1]");
        if (!(pair_max_dist_m > 0.0))
            throw std::invalid_argument("config: pair_max_dist must be > 0");
        if (!(bandwidth_hz > 0.0) || !(carrier_freq_ghz > 0.0))
            throw std::invalid_argument("config: bandwidth/frequency must be > 0");
        if (capc_priority < 1 || capc_priority > 4)
            throw std::invalid_argument("config: capc_priority must be in 1..4");
        if (slu_power_levels < 1)
            throw std::invalid_argument("config: slu_power_levels must be >= 1");
        if (!(slu_power_max_dbm >= slu_power_min_dbm))
            throw std::invalid_argument("config: SL-U power bounds inverted");
        if (episodes < 0 || episode_cots < 1)
            throw std::invalid_argument("config: bad episode budget");
        if (batch_size < 1 || replay_capacity < 1 || target_sync_steps < 1)
            throw std::invalid_argument("config: bad learning parameters");
        if (wifi_txop_us < 1 || cot_us < 1)
            throw std::invalid_argument("config: bad air-time parameters");
        if (rl_hidden.empty())
            throw std::invalid_argument("config: rl_hidden must not be empty");
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<int> parse_int_list(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (!tok.empty())
            out.push_back(std::stoi(tok));
    }
    return out;
}

} // namespace detail

// Apply one key=value setting. Unknown keys are rejected.
inline void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
    using detail::parse_int_list;
    try {
        if (key == "scheme") cfg.scheme = parse_scheme(value);
        else if (key == "m_pairs") cfg.m_pairs = std::stoi(value);
        else if (key == "n_wifi") cfg.n_wifi = std::stoi(value);
        else if (key == "seed") cfg.seed = std::stoull(value);
        else if (key == "horizon_s") cfg.horizon_s = std::stod(value);
        else if (key == "carrier_freq_ghz") cfg.carrier_freq_ghz = std::stod(value);
        else if (key == "bandwidth_hz") cfg.bandwidth_hz = std::stod(value);
        else if (key == "scs_khz") cfg.scs_khz = std::stod(value);
        else if (key == "noise_psd_dbm_hz") cfg.noise_psd_dbm_hz = std::stod(value);
        else if (key == "ed_threshold_dbm") cfg.ed_threshold_dbm = std::stod(value);
        else if (key == "capc_priority") cfg.capc_priority = std::stoi(value);
        else if (key == "cot_us") cfg.cot_us = std::stoll(value);
        else if (key == "area_m") cfg.area_m = std::stod(value);
        else if (key == "pair_max_dist_m") cfg.pair_max_dist_m = std::stod(value);
        else if (key == "traffic_model") {
            if (value == "periodic") cfg.traffic = TrafficModel::Periodic;
            else if (value == "poisson") cfg.traffic = TrafficModel::Poisson;
            else throw std::invalid_argument("traffic_model must be periodic or poisson");
        }
        else if (key == "traffic_period_ms") cfg.traffic_period_ms = std::stod(value);
        else if (key == "tb_bytes") cfg.tb_bytes = std::stoi(value);
        else if (key == "wifi_txop_us") cfg.wifi_txop_us = std::stoll(value);
        else if (key == "slu_sinr_min_db") cfg.slu_sinr_min_db = std::stod(value);
        else if (key == "wifi_sinr_min_db") cfg.wifi_sinr_min_db = std::stod(value);
        else if (key == "beta") cfg.beta = std::stod(value);
        else if (key == "rate_scale_bps") cfg.rate_scale_bps = std::stod(value);
        else if (key == "slu_fixed_power_dbm") cfg.slu_fixed_power_dbm = std::stod(value);
        else if (key == "slu_power_min_dbm") cfg.slu_power_min_dbm = std::stod(value);
        else if (key == "slu_power_max_dbm") cfg.slu_power_max_dbm = std::stod(value);
        else if (key == "slu_power_levels") cfg.slu_power_levels = std::stoi(value);
        else if (key == "wifi_power_dbm") cfg.wifi_power_dbm = std::stod(value);
        else if (key == "wifi_power_min_dbm") cfg.wifi_power_min_dbm = std::stod(value);
        else if (key == "wifi_power_max_dbm") cfg.wifi_power_max_dbm = std::stod(value);
        else if (key == "wifi_target_sinr_db") cfg.wifi_target_sinr_db = std::stod(value);
        else if (key == "wifi_power_margin_db") cfg.wifi_power_margin_db = std::stod(value);
        else if (key == "olpc_margin_db") cfg.olpc_margin_db = std::stod(value);
        else if (key == "episodes") cfg.episodes = std::stoi(value);
        else if (key == "episode_cots") cfg.episode_cots = std::stoi(value);
        else if (key == "rl_hidden") cfg.rl_hidden = parse_int_list(value);
        else if (key == "learning_rate") cfg.learning_rate = std::stod(value);
        else if (key == "gamma") cfg.gamma = std::stod(value);
        else if (key == "batch_size") cfg.batch_size = std::stoi(value);
        else if (key == "replay_capacity") cfg.replay_capacity = std::stoi(value);
        else if (key == "target_sync_steps") cfg.target_sync_steps = std::stoi(value);
        else if (key == "model_update_ms") cfg.model_update_ms = std::stoll(value);
        else if (key == "checkpoint") cfg.checkpoint_path = value;
        else if (key == "tick_mode") cfg.tick_mode = (value == "1" || value == "true");
        else throw std::invalid_argument("unknown config key '" + key + "'");
    } catch (const std::invalid_argument&) {
        throw;
    } catch (const std::exception&) {
        throw std::invalid_argument("bad value '" + value + "' for key '" + key + "'");
    }
}

// Flat key = value text format; '#' starts a comment.
inline RunConfig parse_config_text(std::istream& in) {
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) +
                                        ": expected key = value");
        apply_config_key(cfg, detail::trim(line.substr(0, eq)),
                         detail::trim(line.substr(eq + 1)));
    }
    return cfg;
}

inline RunConfig parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f)
        throw std::invalid_argument("cannot open config file '" + path + "'");
    return parse_config_text(f);
}

struct ResultRow {
    std::string scheme;
    int m = 0;
    int n = 0;
    std::uint64_t seed = 0;
    double prr_slu = 0.0;
    double prr_total = 0.0;
    double throughput_bps = 0.0;
    double jain = 0.0;
    double mean_utility = 0.0;
    std::uint64_t collisions = 0;
};

} // namespace slucoex
