#pragma once

#include <algorithm>

#include "slucoex/rng.hpp"

namespace slucoex {

// Closed-loop power control: one 1 dB step toward the target SINR per update,
// with a dead band of margin dB above the target, clamped to the bounds.
inline double closed_loop_power(double current_dbm, double last_sinr_db, double target_db,
                                double margin_db, double min_dbm, double max_dbm) {
    double next = current_dbm;
    if (last_sinr_db < target_db)
        next += 1.0;
    else if (last_sinr_db > target_db + margin_db)
        next -= 1.0;
    return std::clamp(next, min_dbm, max_dbm);
}

// Random baseline: access flag uniform over {0,1}, power uniform over the
// discrete action set. Draw order is fixed (g first) for reproducibility.
struct RandomDecision {
    int g;
    int power_index;
};

inline RandomDecision baseline_random(Rng& rng, int n_power_levels) {
    RandomDecision d;
    d.g = static_cast<int>(rng.uniform_int(0, 1));
    d.power_index = static_cast<int>(rng.uniform_int(0, n_power_levels - 1));
    return d;
}

// Open-loop power control: invert the reference-signal path loss for the
// receive target, ignoring interference entirely.
inline double baseline_olpc(double reference_pl_db, double noise_dbm, double sinr_min_db,
                            double margin_db, double min_dbm, double max_dbm) {
    const double p = noise_dbm + sinr_min_db + reference_pl_db + margin_db;
    return std::clamp(p, min_dbm, max_dbm);
}

} // namespace slucoex
