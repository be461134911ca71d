#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>

namespace slucoex::phy {

inline double dbm_to_mw(double dbm) { return std::pow(10.0, dbm / 10.0); }
inline double mw_to_dbm(double mw) { return 10.0 * std::log10(mw); }
inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

struct LinkParams {
    double carrier_freq_ghz = 5.8;
    double bandwidth_hz = 20e6;
    double noise_psd_dbm_hz = -174.0;
};

struct SinrThresholds {
    double slu_min_db = 15.0;
    double wifi_min_db = 6.0;
};

struct RatePair {
    double slu_bps = 0.0;
    double wifi_bps = 0.0;
};

// LOS path loss, frequency in GHz, distance in meters.
inline double path_loss_db(double freq_ghz, double distance_m) {
    if (!(freq_ghz > 0.0) || !(distance_m > 0.0))
        throw std::domain_error("path_loss_db: freq and distance must be > 0");
    return 32.4 + 20.0 * std::log10(freq_ghz) + 17.3 * std::log10(distance_m);
}

// Thermal noise integrated over the channel bandwidth.
inline double noise_power_dbm(double noise_psd_dbm_hz, double bandwidth_hz) {
    if (!(bandwidth_hz > 0.0))
        throw std::domain_error("noise_power_dbm: bandwidth must be > 0");
    return noise_psd_dbm_hz + 10.0 * std::log10(bandwidth_hz);
}

inline double noise_power_dbm(const LinkParams& p) {
    return noise_power_dbm(p.noise_psd_dbm_hz, p.bandwidth_hz);
}

// SINR with the denominator summed in linear milliwatts. With no interferers
// this reduces to signal - noise in dB, exactly.
inline double sinr_db(double signal_dbm, std::span<const double> interferers_dbm,
                      double noise_dbm) {
    if (interferers_dbm.empty())
        return signal_dbm - noise_dbm;
    double denom_mw = dbm_to_mw(noise_dbm);
    for (double p : interferers_dbm)
        denom_mw += dbm_to_mw(p);
    return signal_dbm - mw_to_dbm(denom_mw);
}

inline double shannon_rate_bps(double bandwidth_hz, double sinr_db_value) {
    if (!(bandwidth_hz > 0.0))
        throw std::domain_error("shannon_rate_bps: bandwidth must be > 0");
    return bandwidth_hz * std::log2(1.0 + db_to_linear(sinr_db_value));
}

// Jain's fairness index (sum x)^2 / (n * sum x^2), in [1/n, 1].
inline double jain_index(std::span<const double> values) {
    if (values.empty())
        throw std::domain_error("jain_index: empty input");
    double sum = 0.0, sum_sq = 0.0;
    for (double v : values) {
        if (v < 0.0)
            throw std::domain_error("jain_index: negative value");
        sum += v;
        sum_sq += v * v;
    }
    if (sum_sq == 0.0)
        throw std::domain_error("jain_index: all-zero input");
    return (sum * sum) / (static_cast<double>(values.size()) * sum_sq);
}

inline double jain_index(double a, double b) {
    const double vals[2] = {a, b};
    return jain_index(std::span<const double>(vals, 2));
}

// Weighted rate/fairness utility. The rate term is normalized by rate_scale so
// both terms are commensurate before beta-mixing.
inline double utility(double beta, double total_rate_bps, double jain, double rate_scale_bps) {
    if (!(rate_scale_bps > 0.0))
        throw std::domain_error("utility: rate_scale must be > 0");
    return beta * (total_rate_bps / rate_scale_bps) + (1.0 - beta) * jain;
}

// Default normalization: two concurrent links at 40 dB SINR over the channel.
inline double default_rate_scale_bps(double bandwidth_hz) {
    return 2.0 * shannon_rate_bps(bandwidth_hz, 40.0);
}

inline double throughput_bps(std::uint64_t success_count, std::uint64_t tb_size_bytes,
                             double elapsed_s) {
    if (!(elapsed_s > 0.0))
        throw std::domain_error("throughput_bps: elapsed must be > 0");
    return static_cast<double>(success_count) * static_cast<double>(tb_size_bytes) * 8.0 /
           elapsed_s;
}

// Packet reception rate; an empty offering counts as fully received.
inline double prr(std::uint64_t success_count, std::uint64_t sent_count) {
    if (sent_count == 0)
        return 1.0;
    return static_cast<double>(success_count) / static_cast<double>(sent_count);
}

} // namespace slucoex::phy
