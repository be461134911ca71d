#include <catch2/catch_amalgamated.hpp>

#include "slucoex/ccha.hpp"
#include "slucoex/rng.hpp"

#include <numeric>
#include <vector>

using namespace slucoex;
using namespace slucoex::ccha;

TEST_CASE("slot grid boundary alignment") {
    SlotGrid grid;
    REQUIRE(grid.next_ssb(130) == 500);
    REQUIRE(grid.next_ssb(0) == 0);
    REQUIRE(grid.next_ssb(500) == 500);
    REQUIRE(grid.next_ssb(501) == 1000);
    REQUIRE(grid.next_ssb(4999) == 5000);
}

TEST_CASE("COT placement after a grant") {
    SlotGrid grid;
    const auto cot = make_cot(130, 2000, grid, 0, 20e6);
    REQUIRE(cot.start_us == 500);
    REQUIRE(cot.duration_us == 2000);
    REQUIRE(cot.end_us() == 2500);
    // 2 ms at 0.5 ms slots is exactly 4 slots
    REQUIRE(cot.slot_count() == 4);
}

TEST_CASE("slot allocation is FIFO and capacity bounded") {
    SlotGrid grid;
    const auto cot = make_cot(0, 2000, grid, 0, 20e6);

    SECTION("full occupancy") {
        const std::vector<int> pending{10, 11, 12, 13};
        const auto grants = allocate_slots(cot, pending);
        REQUIRE(grants.size() == 4);
        for (int i = 0; i < 4; ++i) {
            REQUIRE(grants[i].pair == 10 + i);
            REQUIRE(grants[i].slot_index == i);
            REQUIRE(grants[i].slot_start_us == cot.start_us + 500 * i);
            REQUIRE(grants[i].slot_end_us == grants[i].slot_start_us + 500);
        }
    }
    SECTION("single pending pair leaves the rest unallocated") {
        const std::vector<int> pending{7};
        const auto grants = allocate_slots(cot, pending);
        REQUIRE(grants.size() == 1);
        REQUIRE(grants[0].slot_index == 0);
        REQUIRE(grants[0].pair == 7);
    }
    SECTION("overflow defers the tail") {
        const std::vector<int> pending{0, 1, 2, 3, 4, 5};
        const auto grants = allocate_slots(cot, pending);
        REQUIRE(grants.size() == 4);
        REQUIRE(grants.back().pair == 3);
    }
    SECTION("empty pending gives no grants") {
        REQUIRE(allocate_slots(cot, {}).empty());
    }
}

TEST_CASE("grants within one COT are pairwise disjoint") {
    SlotGrid grid;
    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        const auto cot = make_cot(rng.uniform_int(0, 10000), 2000, grid, 0, 20e6);
        std::vector<int> pending(static_cast<std::size_t>(rng.uniform_int(1, 9)));
        std::iota(pending.begin(), pending.end(), 0);
        const auto grants = allocate_slots(cot, pending);
        REQUIRE(grants.size() ==
                std::min<std::size_t>(pending.size(), static_cast<std::size_t>(cot.slot_count())));
        for (std::size_t i = 0; i < grants.size(); ++i) {
            REQUIRE(grants[i].slot_start_us >= cot.start_us);
            REQUIRE(grants[i].slot_end_us <= cot.end_us());
            // guard interval hosts the whole Type-2 sense
            REQUIRE(grants[i].gi_us >= kType2WindowUs);
            REQUIRE(grants[i].data_end_us() - grants[i].slot_start_us > 0);
            for (std::size_t j = i + 1; j < grants.size(); ++j) {
                const bool disjoint = grants[i].slot_end_us <= grants[j].slot_start_us ||
                                      grants[j].slot_end_us <= grants[i].slot_start_us;
                REQUIRE(disjoint);
            }
        }
    }
}

TEST_CASE("type 2 gate before the slot boundary") {
    // fully idle guard interval
    REQUIRE(user_access(33) == Access::Transmit);
    REQUIRE(user_access(25) == Access::Transmit);
    // energy inside the window
    REQUIRE(user_access(10) == Access::Yield);
    REQUIRE(user_access(0) == Access::Yield);
    // the previous grant's data ends a full guard interval before the SSB, so
    // back-to-back grants are compatible
    ResourceGrant g;
    g.slot_start_us = 1000;
    g.slot_end_us = 1500;
    REQUIRE(g.data_end_us() == 1467);
    REQUIRE(g.type2_window_start_us() == 975);
    const std::int64_t idle_after_prev_data = g.slot_start_us - (g.slot_start_us - kGuardUs);
    REQUIRE(user_access(idle_after_prev_data) == Access::Transmit);
}

TEST_CASE("CCHA-T1 slot holders sense with a full type 1 process") {
    SlotGrid grid;
    const auto cot = make_cot(130, 2000, grid, 0, 20e6);
    const std::vector<int> pending{0, 1};
    const auto grants = allocate_slots(cot, pending);
    REQUIRE(grants.size() == 2);

    SECTION("idle channel before the slot lets the sense finish") {
        ChannelTrace idle;
        idle.start_us = 0;
        idle.busy.assign(3000, false);
        REQUIRE(scheme_ccha_t1(grants[0], idle, 1, 3, 130) == Access::Transmit);
    }
    SECTION("the previous grant's transmission blocks the sense") {
        ChannelTrace trace;
        trace.start_us = 0;
        trace.busy.assign(3000, false);
        // slot 0 occupied with data up to its guard interval
        for (std::int64_t t = grants[0].slot_start_us; t < grants[0].data_end_us(); ++t)
            trace.busy[static_cast<std::size_t>(t)] = true;
        // 33 us of idle guard is shorter than any full type 1 sense
        REQUIRE(scheme_ccha_t1(grants[1], trace, 1, 0, 130) == Access::Yield);
    }
    SECTION("a sense that would finish past the boundary yields") {
        ChannelTrace trace;
        trace.start_us = 0;
        trace.busy.assign(3000, false);
        // busy until 10 us before the slot; 34 + 0 cannot complete in time
        for (std::int64_t t = 0; t < grants[0].slot_start_us - 10; ++t)
            trace.busy[static_cast<std::size_t>(t)] = true;
        REQUIRE(scheme_ccha_t1(grants[0], trace, 1, 0, 130) == Access::Yield);
    }
}
