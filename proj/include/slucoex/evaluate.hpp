#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "slucoex/phy.hpp"
#include "slucoex/topology.hpp"

namespace slucoex {

enum class TxKind : std::uint8_t { Slu, Wifi };

struct TxAttempt {
    TxKind kind = TxKind::Slu;
    int node = 0; // pair index or Wi-Fi index
    double power_dbm = 0.0;
    std::int64_t start_us = 0;
    std::int64_t end_us = 0;
};

struct AttemptOutcome {
    double min_sinr_db = std::numeric_limits<double>::infinity();
    bool success = false;
};

// Piecewise-constant SINR evaluation of a set of (possibly overlapping)
// transmissions. Each attempt is judged at its intended receiver (the pair's
// Rx for SL-U, the AP for Wi-Fi) against every concurrent transmission, and
// succeeds only if its SINR clears the kind's threshold over the whole span.
inline std::vector<AttemptOutcome> evaluate_concurrent(
    const std::vector<TxAttempt>& attempts, const GainTable& gains, double noise_dbm,
    const phy::SinrThresholds& thr) {
    std::vector<AttemptOutcome> out(attempts.size());
    if (attempts.empty())
        return out;

    std::vector<std::int64_t> edges;
    edges.reserve(attempts.size() * 2);
    for (const auto& a : attempts) {
        edges.push_back(a.start_us);
        edges.push_back(a.end_us);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

    const double noise_mw = phy::dbm_to_mw(noise_dbm);
    auto source_of = [&](const TxAttempt& a) {
        return a.kind == TxKind::Slu ? gains.source_slu(a.node) : gains.source_wifi(a.node);
    };
    auto receiver_of = [&](const TxAttempt& a) {
        return a.kind == TxKind::Slu ? gains.point_slu_rx(a.node) : gains.point_ap();
    };

    for (std::size_t seg = 0; seg + 1 < edges.size(); ++seg) {
        const std::int64_t t0 = edges[seg], t1 = edges[seg + 1];
        if (t1 <= t0)
            continue;
        for (std::size_t i = 0; i < attempts.size(); ++i) {
            const auto& a = attempts[i];
            if (a.start_us > t0 || a.end_us < t1)
                continue;
            const int rx = receiver_of(a);
            double interference_mw = 0.0;
            for (std::size_t j = 0; j < attempts.size(); ++j) {
                if (j == i)
                    continue;
                const auto& b = attempts[j];
                if (b.start_us > t0 || b.end_us < t1)
                    continue;
                interference_mw +=
                    phy::dbm_to_mw(b.power_dbm) * gains.gain(source_of(b), rx);
            }
            const double signal_mw = phy::dbm_to_mw(a.power_dbm) * gains.gain(source_of(a), rx);
            const double sinr = phy::linear_to_db(signal_mw / (noise_mw + interference_mw));
            out[i].min_sinr_db = std::min(out[i].min_sinr_db, sinr);
        }
    }
    for (std::size_t i = 0; i < attempts.size(); ++i) {
        const double need = attempts[i].kind == TxKind::Slu ? thr.slu_min_db : thr.wifi_min_db;
        out[i].success = out[i].min_sinr_db >= need;
    }
    return out;
}

} // namespace slucoex
