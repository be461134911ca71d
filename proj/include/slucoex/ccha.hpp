#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "slucoex/mac.hpp"

namespace slucoex::ccha {

// Spectrum slot grid. 30 kHz SCS gives 500 us slots; the guard interval is the
// final OFDM symbol of an allocation (nominally 33.33 us, quantized to 33 on
// the 1 us tick grid) and always covers the 25 us Type-2 sense.
inline constexpr std::int64_t kSlotUs = 500;
inline constexpr std::int64_t kGuardUs = 33;
inline constexpr std::int64_t kType2WindowUs = mac::kShortSense25Us;

struct SlotGrid {
    std::int64_t slot_us = kSlotUs;

    // first slot boundary at or after t
    std::int64_t next_ssb(std::int64_t t) const {
        const std::int64_t r = t % slot_us;
        return r == 0 ? t : t + (slot_us - r);
    }
};

struct CotWindow {
    std::int64_t start_us = 0;
    std::int64_t duration_us = 0;
    double bandwidth_hz = 20e6;
    int owner = -1; // BS id

    std::int64_t end_us() const { return start_us + duration_us; }
    int slot_count(std::int64_t slot_us = kSlotUs) const {
        return static_cast<int>(duration_us / slot_us);
    }
};

struct ResourceGrant {
    int slot_index = 0;
    std::int64_t slot_start_us = 0;
    std::int64_t slot_end_us = 0;
    int pair = -1;
    std::int64_t gi_us = kGuardUs;

    std::int64_t data_end_us() const { return slot_end_us - gi_us; }
    // the Type-2 sense occupies the final 25 us before the slot boundary
    std::int64_t type2_window_start_us() const { return slot_start_us - kType2WindowUs; }
};

// COT placement after a Type-1 grant at grant_time: occupancy begins at the
// next slot boundary.
inline CotWindow make_cot(std::int64_t grant_time_us, std::int64_t mcot_us,
                          const SlotGrid& grid, int owner, double bandwidth_hz) {
    CotWindow c;
    c.start_us = grid.next_ssb(grant_time_us);
    c.duration_us = mcot_us;
    c.owner = owner;
    c.bandwidth_hz = bandwidth_hz;
    return c;
}

// Centralized allocation: one slot per pending pair in queue order, capped by
// the slots available in the occupancy. Unserved pairs stay queued.
inline std::vector<ResourceGrant> allocate_slots(const CotWindow& cot,
                                                 std::span<const int> pending,
                                                 std::int64_t slot_us = kSlotUs) {
    std::vector<ResourceGrant> grants;
    const int capacity = static_cast<int>(cot.duration_us / slot_us);
    const int n = std::min<int>(capacity, static_cast<int>(pending.size()));
    grants.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        ResourceGrant g;
        g.slot_index = i;
        g.slot_start_us = cot.start_us + static_cast<std::int64_t>(i) * slot_us;
        g.slot_end_us = g.slot_start_us + slot_us;
        g.pair = pending[static_cast<std::size_t>(i)];
        grants.push_back(g);
    }
    return grants;
}

enum class Access : std::uint8_t { Transmit, Yield };

// Type-2 gate for a granted slot, judged from the idle run immediately before
// the slot boundary.
inline Access user_access(std::int64_t trailing_idle_us) {
    return mac::lbt2_check(trailing_idle_us, kType2WindowUs) ? Access::Transmit
                                                             : Access::Yield;
}

// ---------------------------------------------------------------------------
// Trace-driven helpers. A trace holds one busy flag per microsecond starting
// at trace_start; used by tests and by the baseline schemes' contracts.
// ---------------------------------------------------------------------------
struct ChannelTrace {
    std::int64_t start_us = 0;
    std::vector<bool> busy;

    mac::Channel at(std::int64_t t) const {
        const std::int64_t i = t - start_us;
        if (i < 0 || i >= static_cast<std::int64_t>(busy.size()))
            return mac::Channel::Idle;
        return busy[static_cast<std::size_t>(i)] ? mac::Channel::Busy : mac::Channel::Idle;
    }

    std::int64_t trailing_idle_before(std::int64_t t) const {
        std::int64_t n = 0;
        while (at(t - 1 - n) == mac::Channel::Idle && n < t - start_us)
            ++n;
        // everything before the trace is idle as well
        if (t - n <= start_us)
            return kType2WindowUs + n; // unbounded prefix; anything >= window passes
        return n;
    }
};

// Run a Type-1 sense over a trace starting at start_us with a forced counter.
// Returns the grant completion time, or nullopt if the horizon runs out.
inline std::optional<std::int64_t> lbt1_on_trace(int priority, int counter,
                                                 const ChannelTrace& trace,
                                                 std::int64_t start_us,
                                                 std::int64_t horizon_us) {
    mac::LbtType1State s = mac::lbt1_make(priority);
    mac::lbt1_begin(s, counter);
    for (std::int64_t t = start_us; t < start_us + horizon_us; ++t) {
        if (mac::lbt1_step(s, trace.at(t)))
            return t + 1;
    }
    return std::nullopt;
}

// CCHA-T1 variant: the slot holder must finish its own full Type-1 sense no
// later than its slot boundary; sensing starts one slot ahead (or at the
// moment the allocation exists, whichever is later).
inline Access scheme_ccha_t1(const ResourceGrant& grant, const ChannelTrace& trace,
                             int priority, int counter, std::int64_t alloc_time_us) {
    const std::int64_t sense_start =
        std::max(alloc_time_us, grant.slot_start_us - kSlotUs);
    const std::int64_t horizon = grant.slot_start_us - sense_start;
    if (horizon <= 0)
        return Access::Yield;
    const auto done = lbt1_on_trace(priority, counter, trace, sense_start, horizon);
    return done ? Access::Transmit : Access::Yield;
}

} // namespace slucoex::ccha
