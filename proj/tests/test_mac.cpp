#include <catch2/catch_amalgamated.hpp>

#include "slucoex/mac.hpp"
#include "slucoex/rng.hpp"

#include "oracles.hpp"

#include <algorithm>
#include <vector>

using namespace slucoex;
using namespace slucoex::mac;
using Catch::Approx;

TEST_CASE("CAPC table rows") {
    const auto& p1 = capc_lookup(1);
    REQUIRE(p1.defer_slots == 2);
    REQUIRE(p1.cw_min == 3);
    REQUIRE(p1.cw_max == 7);
    REQUIRE(p1.mcot_us == 2000);
    REQUIRE(p1.allowed_cw == std::vector<int>{3, 7});

    const auto& p2 = capc_lookup(2);
    REQUIRE(p2.defer_slots == 2);
    REQUIRE(p2.cw_min == 7);
    REQUIRE(p2.cw_max == 15);
    REQUIRE(p2.mcot_us == 4000);
    REQUIRE(p2.allowed_cw == std::vector<int>{7, 15});

    const auto& p3 = capc_lookup(3);
    REQUIRE(p3.defer_slots == 3);
    REQUIRE(p3.cw_min == 15);
    REQUIRE(p3.cw_max == 1023);
    REQUIRE(p3.mcot_us == 6000);
    REQUIRE(p3.mcot_alt_us == 10000);
    REQUIRE(p3.allowed_cw == std::vector<int>{15, 31, 63, 127, 255, 511, 1023});

    const auto& p4 = capc_lookup(4);
    REQUIRE(p4.defer_slots == 7);
    REQUIRE(p4.cw_min == 15);
    REQUIRE(p4.cw_max == 1023);

    REQUIRE_THROWS_AS(capc_lookup(5), std::out_of_range);
    REQUIRE_THROWS_AS(capc_lookup(0), std::out_of_range);

    // cw_min / cw_max bracket the allowed set
    for (int p = 1; p <= 4; ++p) {
        const auto& c = capc_lookup(p);
        REQUIRE(c.allowed_cw.front() == c.cw_min);
        REQUIRE(c.allowed_cw.back() == c.cw_max);
    }

    // T_d(p) = 16 + m_p * 9
    REQUIRE(defer_duration_us(p1) == 34);
    REQUIRE(defer_duration_us(p3) == 43);
    REQUIRE(defer_duration_us(p4) == 79);
}

TEST_CASE("energy detection sums in linear domain") {
    EdConfig cfg{-72.0};
    REQUIRE(energy_detect({}, cfg) == Channel::Idle);

    const double one[] = {-60.0};
    REQUIRE(energy_detect(one, cfg) == Channel::Busy);

    // two -80 dBm sources sum to -76.99 dBm, still under threshold
    const double two[] = {-80.0, -80.0};
    REQUIRE(oracle::dbm(oracle::mw(-80.0) * 2.0) == Approx(-76.9897).margin(0.001));
    REQUIRE(energy_detect(two, cfg) == Channel::Idle);

    // seven of them sum to -71.55 dBm and cross the threshold
    const double seven[] = {-80.0, -80.0, -80.0, -80.0, -80.0, -80.0, -80.0};
    REQUIRE(oracle::dbm(oracle::mw(-80.0) * 7.0) == Approx(-71.549).margin(0.001));
    REQUIRE(energy_detect(seven, cfg) == Channel::Busy);

    // boundary is inclusive
    const double exact[] = {-72.0};
    REQUIRE(energy_detect(exact, cfg) == Channel::Busy);
}

namespace {

// run an LBT1 machine over a busy trace, returns completion time or -1
std::int64_t run_lbt1(int priority, int counter, const std::vector<bool>& busy) {
    auto s = lbt1_make(priority);
    lbt1_begin(s, counter);
    for (std::int64_t t = 0; t < static_cast<std::int64_t>(busy.size()); ++t) {
        if (lbt1_step(s, busy[static_cast<std::size_t>(t)] ? Channel::Busy : Channel::Idle))
            return t + 1;
    }
    return -1;
}

} // namespace

TEST_CASE("LBT type 1 timing on an idle channel") {
    // grant lands exactly T_d + counter * T_sl after start
    for (int k = 0; k <= 7; ++k) {
        std::vector<bool> idle(1000, false);
        REQUIRE(run_lbt1(1, k, idle) == 34 + 9 * k);
    }
    // zero backoff grants right after the deferral
    std::vector<bool> idle(200, false);
    REQUIRE(run_lbt1(1, 0, idle) == 34);
}

TEST_CASE("LBT type 1 deferral restarts after busy") {
    // busy for the first 50 us, then idle: grant 34 + 63 us after idle onset
    std::vector<bool> trace(400, false);
    std::fill(trace.begin(), trace.begin() + 50, true);
    REQUIRE(run_lbt1(1, 7, trace) == 50 + 34 + 63);
}

TEST_CASE("LBT type 1 freezes the counter across busy gaps") {
    // idle long enough to defer and count 2 slots, busy gap, then idle again
    std::vector<bool> trace(1000, false);
    // 34 defer + 18 (2 slots) idle, then 40 busy
    std::fill(trace.begin() + 52, trace.begin() + 92, true);
    // counter 5: 2 slots consumed before the gap, 3 remain after a fresh defer
    REQUIRE(run_lbt1(1, 5, trace) == 92 + 34 + 27);
}

TEST_CASE("LBT backoff counters never go negative and busy never decrements") {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        auto s = lbt1_make(1);
        const int counter = static_cast<int>(rng.uniform_int(0, 7));
        lbt1_begin(s, counter);
        int prev = s.backoff_counter;
        for (int t = 0; t < 600; ++t) {
            const bool busy = rng.uniform() < 0.3;
            lbt1_step(s, busy ? Channel::Busy : Channel::Idle);
            REQUIRE(s.backoff_counter >= 0);
            if (busy)
                REQUIRE(s.backoff_counter == prev);
            prev = s.backoff_counter;
            if (s.phase == LbtType1State::Phase::Granted)
                break;
        }
    }
}

TEST_CASE("LBT step determinism (replay)") {
    Rng rng(5);
    std::vector<bool> trace;
    for (int t = 0; t < 500; ++t)
        trace.push_back(rng.uniform() < 0.4);
    REQUIRE(run_lbt1(1, 6, trace) == run_lbt1(1, 6, trace));
}

TEST_CASE("LBT advance matches repeated single steps") {
    Rng rng(23);
    for (int trial = 0; trial < 200; ++trial) {
        auto a = lbt1_make(1);
        auto b = lbt1_make(1);
        const int counter = static_cast<int>(rng.uniform_int(0, 7));
        lbt1_begin(a, counter);
        lbt1_begin(b, counter);
        std::int64_t granted_a = -1, granted_b = -1;
        std::int64_t t = 0;
        while (t < 400) {
            const Channel ch = rng.uniform() < 0.25 ? Channel::Busy : Channel::Idle;
            // stride bounded by the machine's own emission horizon while idle;
            // under busy the freeze is idempotent for any stride
            std::int64_t cap = 17;
            if (ch == Channel::Idle)
                cap = std::min<std::int64_t>(lbt1_time_to_grant(a), 17);
            const std::int64_t n = rng.uniform_int(1, std::max<std::int64_t>(1, cap));
            if (lbt1_advance(a, ch, n) && granted_a < 0)
                granted_a = t + n;
            for (std::int64_t i = 0; i < n; ++i)
                if (lbt1_step(b, ch) && granted_b < 0)
                    granted_b = t + i + 1;
            t += n;
            REQUIRE(a.phase == b.phase);
            REQUIRE(a.backoff_counter == b.backoff_counter);
            REQUIRE(a.defer_remaining_us == b.defer_remaining_us);
            REQUIRE(a.slot_progress_us == b.slot_progress_us);
            if (granted_a >= 0 || granted_b >= 0)
                break;
        }
        REQUIRE(granted_a == granted_b);
    }
}

TEST_CASE("contention window walks the allowed set") {
    auto s = lbt1_make(3);
    REQUIRE(s.cw == 15);
    lbt1_cw_update(s, TxOutcome::Collision);
    REQUIRE(s.cw == 31);
    s.cw = 1023;
    lbt1_cw_update(s, TxOutcome::Collision);
    REQUIRE(s.cw == 1023);
    s.cw = 255;
    lbt1_cw_update(s, TxOutcome::Success);
    REQUIRE(s.cw == 15);

    // random walks stay inside the table set
    Rng rng(31);
    for (int p = 1; p <= 4; ++p) {
        auto st = lbt1_make(p);
        const auto& allowed = capc_lookup(p).allowed_cw;
        for (int i = 0; i < 200; ++i) {
            lbt1_cw_update(st, rng.uniform() < 0.5 ? TxOutcome::Collision : TxOutcome::Success);
            REQUIRE(std::find(allowed.begin(), allowed.end(), st.cw) != allowed.end());
        }
    }
}

TEST_CASE("LBT type 2 short sense") {
    REQUIRE(lbt2_check(25, 25));
    REQUIRE(lbt2_check(16, 16));
    REQUIRE_FALSE(lbt2_check(20, 25)); // idle run interrupted before the window filled
    REQUIRE_FALSE(lbt2_check(0, 16));

    // passing the 25 us variant implies passing the 16 us variant
    for (std::int64_t idle = 0; idle < 60; ++idle)
        if (lbt2_check(idle, 25))
            REQUIRE(lbt2_check(idle, 16));

    REQUIRE_THROWS_AS(lbt2_check(30, 20), std::invalid_argument);
}

namespace {

std::int64_t run_csma_to_txstart(int counter, const std::vector<bool>& busy) {
    CsmaState s;
    csma_begin(s, counter);
    for (std::int64_t t = 0; t < static_cast<std::int64_t>(busy.size()); ++t) {
        if (csma_step(s, busy[static_cast<std::size_t>(t)] ? Channel::Busy : Channel::Idle) ==
            CsmaEvent::TxStart)
            return t + 1;
    }
    return -1;
}

} // namespace

TEST_CASE("CSMA timing") {
    std::vector<bool> idle(1000, false);
    // zero backoff transmits right after DIFS
    REQUIRE(run_csma_to_txstart(0, idle) == 34);
    // four idle slots of 9 us
    REQUIRE(run_csma_to_txstart(4, idle) == 34 + 36);
    for (int k = 0; k <= 15; ++k)
        REQUIRE(run_csma_to_txstart(k, idle) == 34 + 9 * k);
}

TEST_CASE("CSMA ack follows SIFS after transmission end") {
    CsmaState s;
    csma_begin(s, 0);
    for (int t = 0; t < 34; ++t)
        csma_step(s, Channel::Idle);
    REQUIRE(s.phase == CsmaState::Phase::Transmitting);
    // engine ends the air time, receiver waits SIFS
    csma_on_tx_end(s);
    std::int64_t ack_at = -1;
    for (std::int64_t i = 0; i < 40; ++i) {
        if (csma_step(s, Channel::Idle) == CsmaEvent::AckDue) {
            ack_at = i + 1;
            break;
        }
    }
    REQUIRE(ack_at == 16);
}

TEST_CASE("CSMA busy freezes the counter and restarts DIFS") {
    // counter 3, busy burst in the middle of the countdown
    std::vector<bool> trace(1000, false);
    std::fill(trace.begin() + 40, trace.begin() + 60, true);
    // 34 DIFS, then idle from 34..40 (6 us, no full slot yet), busy to 60,
    // DIFS again to 94, then 27 us of slots
    REQUIRE(run_csma_to_txstart(3, trace) == 60 + 34 + 27);
}

TEST_CASE("CSMA contention window and retry ladder") {
    CsmaState s;
    REQUIRE(s.cw == 15);
    REQUIRE(csma_on_ack(s, false) == CsmaAck::Retry);
    REQUIRE(s.cw == 31);
    REQUIRE(csma_on_ack(s, false) == CsmaAck::Retry);
    REQUIRE(s.cw == 63);
    csma_on_ack(s, false);
    csma_on_ack(s, false);
    csma_on_ack(s, false);
    REQUIRE(s.cw == 511);
    csma_on_ack(s, false);
    REQUIRE(s.cw == 1023);
    csma_on_ack(s, false); // saturates
    REQUIRE(s.cw == 1023);
    s = CsmaState{};
    s.cw = 1023;
    REQUIRE(csma_on_ack(s, true) == CsmaAck::Delivered);
    REQUIRE(s.cw == kWifiCwMin);
}

TEST_CASE("CSMA drops after the retry limit") {
    CsmaState s;
    int drops = 0, retries = 0;
    for (int i = 0; i < 8; ++i) {
        const auto r = csma_on_ack(s, false);
        if (r == CsmaAck::Dropped)
            ++drops;
        else if (r == CsmaAck::Retry)
            ++retries;
    }
    REQUIRE(retries == 7);
    REQUIRE(drops == 1);
}

TEST_CASE("CSMA advance matches repeated single steps") {
    Rng rng(29);
    for (int trial = 0; trial < 200; ++trial) {
        CsmaState a, b;
        const int counter = static_cast<int>(rng.uniform_int(0, 15));
        csma_begin(a, counter);
        csma_begin(b, counter);
        std::int64_t start_a = -1, start_b = -1;
        std::int64_t t = 0;
        while (t < 600) {
            const Channel ch = rng.uniform() < 0.25 ? Channel::Busy : Channel::Idle;
            std::int64_t horizon = csma_time_to_event(a, ch);
            std::int64_t cap = horizon == kNever ? 13 : std::min<std::int64_t>(horizon, 13);
            const std::int64_t n = rng.uniform_int(1, std::max<std::int64_t>(1, cap));
            if (csma_advance(a, ch, n) == CsmaEvent::TxStart && start_a < 0)
                start_a = t + n;
            for (std::int64_t i = 0; i < n; ++i)
                if (csma_step(b, ch) == CsmaEvent::TxStart && start_b < 0)
                    start_b = t + i + 1;
            t += n;
            REQUIRE(a.phase == b.phase);
            REQUIRE(a.backoff_counter == b.backoff_counter);
            REQUIRE(a.difs_remaining_us == b.difs_remaining_us);
            if (start_a >= 0 || start_b >= 0)
                break;
        }
        REQUIRE(start_a == start_b);
    }
}
