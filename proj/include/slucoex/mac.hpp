#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "slucoex/phy.hpp"
#include "slucoex/rng.hpp"

namespace slucoex::mac {

// All MAC timing runs on integer microseconds.
inline constexpr std::int64_t kSifsUs = 16;
inline constexpr std::int64_t kDifsUs = 34;
inline constexpr std::int64_t kSenseSlotUs = 9; // T_sl
inline constexpr std::int64_t kShortSense16Us = 16;
inline constexpr std::int64_t kShortSense25Us = 25;
inline constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::max();

// One channel access priority class row.
struct CapcClass {
    int priority;
    int defer_slots;                // m_p
    int cw_min;
    int cw_max;
    std::int64_t mcot_us;           // maximum channel occupancy time
    std::int64_t mcot_alt_us;       // alternative MCOT where the class defines one, else 0
    std::vector<int> allowed_cw;
};

// Deferral duration T_d(p) = 16 us + m_p * T_sl (evaluates to 34 us for p = 1).
inline std::int64_t defer_duration_us(const CapcClass& c) {
    return 16 + static_cast<std::int64_t>(c.defer_slots) * kSenseSlotUs;
}

inline const CapcClass& capc_lookup(int priority) {
    static const std::array<CapcClass, 4> table = {{
        {1, 2, 3, 7, 2000, 0, {3, 7}},
        {2, 2, 7, 15, 4000, 0, {7, 15}},
        {3, 3, 15, 1023, 6000, 10000, {15, 31, 63, 127, 255, 511, 1023}},
        {4, 7, 15, 1023, 6000, 10000, {15, 31, 63, 127, 255, 511, 1023}},
    }};
    if (priority < 1 || priority > 4)
        throw std::out_of_range("capc_lookup: priority must be in {1,2,3,4}");
    return table[static_cast<std::size_t>(priority - 1)];
}

enum class Channel : std::uint8_t { Idle, Busy };

struct EdConfig {
    double threshold_dbm = -72.0;
};

// Clear channel assessment: busy iff the linear sum of received powers reaches
// the detection threshold.
inline Channel energy_detect(std::span<const double> received_dbm, const EdConfig& cfg) {
    double sum_mw = 0.0;
    for (double p : received_dbm)
        sum_mw += phy::dbm_to_mw(p);
    return sum_mw >= phy::dbm_to_mw(cfg.threshold_dbm) ? Channel::Busy : Channel::Idle;
}

inline int draw_backoff(Rng& rng, int cw) {
    return static_cast<int>(rng.uniform_int(0, cw));
}

enum class TxOutcome : std::uint8_t { Success, Collision };

// ---------------------------------------------------------------------------
// Type 1 LBT: deferral of T_d(p), then a drawn counter decremented one per
// idle sensing slot. Busy resets the deferral and freezes the counter.
// ---------------------------------------------------------------------------
struct LbtType1State {
    enum class Phase : std::uint8_t { Idle, Deferring, BackingOff, Granted };

    Phase phase = Phase::Idle;
    std::int64_t defer_remaining_us = 0;
    int backoff_counter = 0;
    std::int64_t slot_progress_us = 0;
    int cw = 0;
    const CapcClass* capc = nullptr;
};

inline LbtType1State lbt1_make(int priority) {
    LbtType1State s;
    s.capc = &capc_lookup(priority);
    s.cw = s.capc->cw_min;
    return s;
}

// Arm a new sensing attempt with an externally drawn counter in [0, cw].
inline void lbt1_begin(LbtType1State& s, int drawn_counter) {
    s.phase = LbtType1State::Phase::Deferring;
    s.defer_remaining_us = defer_duration_us(*s.capc);
    s.backoff_counter = drawn_counter;
    s.slot_progress_us = 0;
}

// Time until grant assuming the channel stays idle, or kNever if not sensing.
inline std::int64_t lbt1_time_to_grant(const LbtType1State& s) {
    switch (s.phase) {
    case LbtType1State::Phase::Deferring:
        return s.defer_remaining_us +
               static_cast<std::int64_t>(s.backoff_counter) * kSenseSlotUs;
    case LbtType1State::Phase::BackingOff:
        return static_cast<std::int64_t>(s.backoff_counter) * kSenseSlotUs -
               s.slot_progress_us;
    default:
        return kNever;
    }
}

// Advance by n idle-or-busy microseconds (channel state constant over the
// span). Returns the grant (MCOT duration) if the counter completes exactly at
// the end of the span; callers keep n at or below lbt1_time_to_grant.
inline std::optional<std::int64_t> lbt1_advance(LbtType1State& s, Channel ch, std::int64_t n) {
    using Phase = LbtType1State::Phase;
    if (s.phase != Phase::Deferring && s.phase != Phase::BackingOff)
        return std::nullopt;
    if (ch == Channel::Busy) {
        // deferral restarts at the next idle onset; the counter freezes
        s.phase = Phase::Deferring;
        s.defer_remaining_us = defer_duration_us(*s.capc);
        s.slot_progress_us = 0;
        return std::nullopt;
    }
    std::int64_t budget = n;
    if (s.phase == Phase::Deferring) {
        const std::int64_t d = std::min(budget, s.defer_remaining_us);
        s.defer_remaining_us -= d;
        budget -= d;
        if (s.defer_remaining_us > 0)
            return std::nullopt;
        if (s.backoff_counter == 0) {
            s.phase = Phase::Granted;
            return s.capc->mcot_us;
        }
        s.phase = Phase::BackingOff;
        s.slot_progress_us = 0;
    }
    s.slot_progress_us += budget;
    while (s.slot_progress_us >= kSenseSlotUs && s.backoff_counter > 0) {
        s.slot_progress_us -= kSenseSlotUs;
        if (--s.backoff_counter == 0) {
            s.phase = Phase::Granted;
            return s.capc->mcot_us;
        }
    }
    return std::nullopt;
}

// Single 1 us tick.
inline std::optional<std::int64_t> lbt1_step(LbtType1State& s, Channel ch) {
    return lbt1_advance(s, ch, 1);
}

// CW adaptation over the allowed set: collisions escalate, success resets.
inline void lbt1_cw_update(LbtType1State& s, TxOutcome outcome) {
    const auto& allowed = s.capc->allowed_cw;
    if (outcome == TxOutcome::Success) {
        s.cw = s.capc->cw_min;
        return;
    }
    for (std::size_t i = 0; i + 1 < allowed.size(); ++i) {
        if (allowed[i] == s.cw) {
            s.cw = allowed[i + 1];
            return;
        }
    }
    s.cw = allowed.back();
}

// ---------------------------------------------------------------------------
// Type 2 LBT: a single fixed-length sense ending at the target boundary.
// ---------------------------------------------------------------------------
inline bool lbt2_check(std::int64_t trailing_idle_us, std::int64_t variant_us) {
    if (variant_us != kShortSense16Us && variant_us != kShortSense25Us)
        throw std::invalid_argument("lbt2_check: variant must be 16 or 25");
    return trailing_idle_us >= variant_us;
}

// ---------------------------------------------------------------------------
// Wi-Fi CSMA/CA (DCF): DIFS idle wait, random backoff frozen while busy,
// transmission, then receiver-side SIFS before the ACK.
// ---------------------------------------------------------------------------
inline constexpr int kWifiCwMin = 15;
inline constexpr int kWifiCwMax = 1023;
inline constexpr int kWifiRetryLimit = 7;

enum class CsmaEvent : std::uint8_t { None, TxStart, AckDue };
enum class CsmaAck : std::uint8_t { Delivered, Retry, Dropped };

struct CsmaState {
    enum class Phase : std::uint8_t {
        Idle,
        DifsWait,
        BackingOff,
        Transmitting,
        SifsWait,
        AwaitAck
    };

    Phase phase = Phase::Idle;
    std::int64_t difs_remaining_us = 0;
    int backoff_counter = 0;
    std::int64_t slot_progress_us = 0;
    std::int64_t sifs_remaining_us = 0;
    int cw = kWifiCwMin;
    int retries = 0;
};

// Start contending for the head-of-line packet with a drawn counter in [0, cw].
inline void csma_begin(CsmaState& s, int drawn_counter) {
    s.phase = CsmaState::Phase::DifsWait;
    s.difs_remaining_us = kDifsUs;
    s.backoff_counter = drawn_counter;
    s.slot_progress_us = 0;
}

inline std::int64_t csma_time_to_event(const CsmaState& s, Channel ch) {
    using Phase = CsmaState::Phase;
    switch (s.phase) {
    case Phase::DifsWait:
        if (ch == Channel::Busy)
            return kNever;
        return s.difs_remaining_us +
               static_cast<std::int64_t>(s.backoff_counter) * kSenseSlotUs;
    case Phase::BackingOff:
        if (ch == Channel::Busy)
            return kNever;
        return static_cast<std::int64_t>(s.backoff_counter) * kSenseSlotUs -
               s.slot_progress_us;
    case Phase::SifsWait:
        return s.sifs_remaining_us; // turnaround runs regardless of the channel
    default:
        return kNever;
    }
}

inline CsmaEvent csma_advance(CsmaState& s, Channel ch, std::int64_t n) {
    using Phase = CsmaState::Phase;
    switch (s.phase) {
    case Phase::DifsWait:
    case Phase::BackingOff: {
        if (ch == Channel::Busy) {
            // busy restarts the DIFS wait; the drawn counter persists
            s.phase = Phase::DifsWait;
            s.difs_remaining_us = kDifsUs;
            s.slot_progress_us = 0;
            return CsmaEvent::None;
        }
        std::int64_t budget = n;
        if (s.phase == Phase::DifsWait) {
            const std::int64_t d = std::min(budget, s.difs_remaining_us);
            s.difs_remaining_us -= d;
            budget -= d;
            if (s.difs_remaining_us > 0)
                return CsmaEvent::None;
            if (s.backoff_counter == 0) {
                s.phase = Phase::Transmitting;
                return CsmaEvent::TxStart;
            }
            s.phase = Phase::BackingOff;
            s.slot_progress_us = 0;
        }
        s.slot_progress_us += budget;
        while (s.slot_progress_us >= kSenseSlotUs && s.backoff_counter > 0) {
            s.slot_progress_us -= kSenseSlotUs;
            if (--s.backoff_counter == 0) {
                s.phase = Phase::Transmitting;
                return CsmaEvent::TxStart;
            }
        }
        return CsmaEvent::None;
    }
    case Phase::SifsWait: {
        s.sifs_remaining_us -= n;
        if (s.sifs_remaining_us <= 0) {
            s.phase = Phase::AwaitAck;
            return CsmaEvent::AckDue;
        }
        return CsmaEvent::None;
    }
    default:
        return CsmaEvent::None;
    }
}

inline CsmaEvent csma_step(CsmaState& s, Channel ch) { return csma_advance(s, ch, 1); }

// Air time ended; the receiver turns around for SIFS before acknowledging.
inline void csma_on_tx_end(CsmaState& s) {
    s.phase = CsmaState::Phase::SifsWait;
    s.sifs_remaining_us = kSifsUs;
}

// Resolve the ACK. On failure the CW doubles and the packet retries until the
// limit, after which it is dropped.
inline CsmaAck csma_on_ack(CsmaState& s, bool success) {
    if (success) {
        s.cw = kWifiCwMin;
        s.retries = 0;
        s.phase = CsmaState::Phase::Idle;
        return CsmaAck::Delivered;
    }
    if (++s.retries > kWifiRetryLimit) {
        s.cw = kWifiCwMin;
        s.retries = 0;
        s.phase = CsmaState::Phase::Idle;
        return CsmaAck::Dropped;
    }
    s.cw = std::min(2 * s.cw + 1, kWifiCwMax);
    s.phase = CsmaState::Phase::Idle; // caller re-arms with csma_begin
    return CsmaAck::Retry;
}

// Aborted start (another node occupied the channel in the same microsecond):
// fall back to contention without touching cw/retries.
inline void csma_cancel_tx(CsmaState& s) {
    s.phase = CsmaState::Phase::Idle;
}

} // namespace slucoex::mac
