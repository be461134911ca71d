#include <catch2/catch_amalgamated.hpp>

#include "slucoex/evaluate.hpp"
#include "slucoex/run.hpp"
#include "slucoex/sim.hpp"
#include "slucoex/topology.hpp"

#include "oracles.hpp"

#include <vector>

using namespace slucoex;
using Catch::Approx;

namespace {

Topology two_pair_topology() {
    // pair 0 and pair 1 close together (mutual interference kills both),
    // AP and a Wi-Fi user far off to the side
    Topology t;
    t.area_m = 400.0;
    t.bs = {200.0, 200.0};
    t.ap = {200.0, 200.0};
    t.slu_tx = {{100.0, 100.0}, {102.0, 108.0}};
    t.slu_rx = {{105.0, 100.0}, {107.0, 108.0}};
    t.wifi = {{205.0, 200.0}};
    return t;
}

} // namespace

TEST_CASE("node placement is deterministic and in bounds") {
    Rng a(77), b(77);
    const auto t1 = place_nodes(a, 32, 44, 50.0);
    const auto t2 = place_nodes(b, 32, 44, 50.0);
    REQUIRE(t1.pairs() == 32);
    REQUIRE(t1.wifi_users() == 44);
    for (int m = 0; m < 32; ++m) {
        REQUIRE(t1.slu_tx[m].x == t2.slu_tx[m].x);
        REQUIRE(t1.slu_rx[m].y == t2.slu_rx[m].y);
        REQUIRE(t1.slu_tx[m].x >= 0.0);
        REQUIRE(t1.slu_tx[m].x <= 400.0);
        REQUIRE(t1.slu_rx[m].x >= 0.0);
        REQUIRE(t1.slu_rx[m].x <= 400.0);
        const double d = distance(t1.slu_tx[m], t1.slu_rx[m]);
        REQUIRE(d > 0.0);
        REQUIRE(d <= 50.0 + 1e-9);
    }
    Rng c(1);
    REQUIRE_THROWS_AS(place_nodes(c, 1, 1, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(place_nodes(c, 0, 1, 50.0), std::invalid_argument);
}

TEST_CASE("concurrent outcome evaluation") {
    const auto topo = two_pair_topology();
    const GainTable gains(topo, 5.8);
    const double noise = phy::noise_power_dbm(-174.0, 20e6);
    const phy::SinrThresholds thr{15.0, 6.0};

    SECTION("single attempt succeeds with a wide margin") {
        std::vector<TxAttempt> a = {{TxKind::Slu, 0, 23.0, 0, 467}};
        const auto out = evaluate_concurrent(a, gains, noise, thr);
        // oracle: signal over noise only, distance 5 m
        const double pl = phy::path_loss_db(5.8, 5.0);
        const double want = oracle::sinr_db_linear(23.0 - pl, {}, noise);
        REQUIRE(out[0].min_sinr_db == Approx(want).epsilon(1e-9));
        REQUIRE(out[0].min_sinr_db > 40.0);
        REQUIRE(out[0].success);
    }
    SECTION("two overlapping close pairs both fail") {
        std::vector<TxAttempt> a = {{TxKind::Slu, 0, 23.0, 0, 467},
                                    {TxKind::Slu, 1, 23.0, 0, 467}};
        const auto out = evaluate_concurrent(a, gains, noise, thr);
        // oracle on the generated geometry, all arithmetic in milliwatts
        const double pl00 = phy::path_loss_db(5.8, distance(topo.slu_tx[0], topo.slu_rx[0]));
        const double pl10 = phy::path_loss_db(5.8, distance(topo.slu_tx[1], topo.slu_rx[0]));
        const std::vector<double> interf0 = {23.0 - pl10};
        const double want0 = oracle::sinr_db_linear(23.0 - pl00, interf0, noise);
        REQUIRE(out[0].min_sinr_db == Approx(want0).epsilon(1e-9));
        REQUIRE(out[0].min_sinr_db < 15.0);
        REQUIRE_FALSE(out[0].success);
        REQUIRE_FALSE(out[1].success);
    }
    SECTION("an SL-U pair far from the AP coexists with Wi-Fi") {
        std::vector<TxAttempt> a = {{TxKind::Slu, 0, 23.0, 0, 467},
                                    {TxKind::Wifi, 0, 23.0, 0, 467}};
        const auto out = evaluate_concurrent(a, gains, noise, thr);
        REQUIRE(out[0].success);
        REQUIRE(out[1].success);
        // cross-check against the linear-sum oracle at the sampled geometry
        const double pl_sig = phy::path_loss_db(5.8, distance(topo.wifi[0], topo.ap));
        const double pl_int = phy::path_loss_db(5.8, distance(topo.slu_tx[0], topo.ap));
        const std::vector<double> interf = {23.0 - pl_int};
        const double want = oracle::sinr_db_linear(23.0 - pl_sig, interf, noise);
        REQUIRE(out[1].min_sinr_db == Approx(want).epsilon(1e-9));
    }
    SECTION("partial overlap takes the worst segment") {
        std::vector<TxAttempt> a = {{TxKind::Slu, 0, 23.0, 0, 400},
                                    {TxKind::Slu, 1, 23.0, 200, 600}};
        const auto out = evaluate_concurrent(a, gains, noise, thr);
        // attempt 0 is clean for [0,200) but jammed during [200,400)
        REQUIRE_FALSE(out[0].success);
        REQUIRE_FALSE(out[1].success);
    }
}

TEST_CASE("closed loop power steps") {
    REQUIRE(closed_loop_power(23.0, 3.0, 10.0, 3.0, 0.0, 23.0) == 23.0); // clamp at max
    REQUIRE(closed_loop_power(10.0, 3.0, 6.0, 3.0, 0.0, 23.0) == Approx(11.0));
    REQUIRE(closed_loop_power(10.0, 20.0, 6.0, 3.0, 0.0, 23.0) == Approx(9.0));
    REQUIRE(closed_loop_power(10.0, 7.0, 6.0, 3.0, 0.0, 23.0) == Approx(10.0)); // dead band
    REQUIRE(closed_loop_power(0.0, 30.0, 6.0, 3.0, 0.0, 23.0) == 0.0); // clamp at min
}

TEST_CASE("engine clock advances by single steps") {
    RunConfig cfg;
    cfg.m_pairs = 1;
    cfg.n_wifi = 1;
    cfg.seed = 3;
    Rng rng(derive_seed(cfg.seed, "topo"));
    auto topo = place_nodes(rng, 1, 1, 50.0);
    Engine engine(cfg, topo);
    REQUIRE(engine.now() == 0);
    engine.step();
    REQUIRE(engine.now() == 1);
    engine.step();
    REQUIRE(engine.now() == 2);
    engine.run_until(100);
    REQUIRE(engine.now() == 100);
}

TEST_CASE("wifi transmission starts DIFS plus backoff after arrival") {
    // pick a seed whose pair phase is far beyond the test window so only the
    // Wi-Fi user acts, then replay the engine's draw order for the oracle
    RunConfig cfg;
    cfg.m_pairs = 1;
    cfg.n_wifi = 1;
    std::uint64_t seed = 0;
    std::int64_t wifi_phase = 0;
    for (std::uint64_t s = 1; s < 500; ++s) {
        Rng probe(s);
        const std::int64_t pp = probe.uniform_int(0, cfg.traffic_period_us() - 1);
        const std::int64_t wp = probe.uniform_int(0, cfg.traffic_period_us() - 1);
        if (pp > 6000 && wp < 3000) {
            seed = s;
            wifi_phase = wp;
            break;
        }
    }
    REQUIRE(seed != 0);
    Rng replay(seed);
    replay.uniform_int(0, cfg.traffic_period_us() - 1); // pair phase
    replay.uniform_int(0, cfg.traffic_period_us() - 1); // wifi phase
    const std::int64_t counter = replay.uniform_int(0, 15); // backoff at csma_begin

    cfg.seed = seed;
    Rng topo_rng(derive_seed(1, "topo"));
    auto topo = place_nodes(topo_rng, 1, 1, 50.0);
    Engine engine(cfg, topo);
    std::int64_t tx_start = -1;
    while (engine.now() < 6000) {
        engine.step();
        if (engine.active_tx_count() > 0) {
            tx_start = engine.now();
            break;
        }
    }
    REQUIRE(tx_start == wifi_phase + 34 + 9 * counter);
}

TEST_CASE("run rejects invalid configurations") {
    RunConfig cfg;
    cfg.m_pairs = 0;
    REQUIRE_THROWS_AS(run(cfg), std::invalid_argument);
    RunConfig cfg2;
    cfg2.horizon_s = 0.0;
    REQUIRE_THROWS_AS(run(cfg2), std::invalid_argument);
}

TEST_CASE("identical config and seed reproduce the report exactly") {
    RunConfig cfg;
    cfg.scheme = Scheme::Ccha;
    cfg.m_pairs = 6;
    cfg.n_wifi = 6;
    cfg.seed = 11;
    cfg.horizon_s = 0.5;
    cfg.ed_threshold_dbm = -82.0;
    const auto a = run(cfg);
    const auto b = run(cfg);
    REQUIRE(a.prr_slu == b.prr_slu);
    REQUIRE(a.prr_total == b.prr_total);
    REQUIRE(a.slu_throughput_bps == b.slu_throughput_bps);
    REQUIRE(a.jain == b.jain);
    REQUIRE(a.mean_utility == b.mean_utility);
    REQUIRE(a.slu_collisions == b.slu_collisions);
    REQUIRE(a.slu_offered == b.slu_offered);
    REQUIRE(a.wifi_success == b.wifi_success);
}

TEST_CASE("stride and tick execution agree") {
    RunConfig fast;
    fast.scheme = Scheme::Ccha;
    fast.m_pairs = 4;
    fast.n_wifi = 4;
    fast.seed = 5;
    fast.horizon_s = 0.2;
    fast.ed_threshold_dbm = -82.0;
    RunConfig slow = fast;
    slow.tick_mode = true;
    const auto a = run(fast);
    const auto b = run(slow);
    REQUIRE(a.slu_offered == b.slu_offered);
    REQUIRE(a.slu_success == b.slu_success);
    REQUIRE(a.wifi_success == b.wifi_success);
    REQUIRE(a.slu_collisions == b.slu_collisions);
    REQUIRE(a.prr_slu == b.prr_slu);
    REQUIRE(a.jain == b.jain);
    REQUIRE(a.mean_utility == b.mean_utility);
}

TEST_CASE("packet bookkeeping balances") {
    for (Scheme s : {Scheme::Ccha, Scheme::CchaT1, Scheme::T12Dra, Scheme::T1oDra}) {
        RunConfig cfg;
        cfg.scheme = s;
        cfg.m_pairs = 5;
        cfg.n_wifi = 5;
        cfg.seed = 23;
        cfg.horizon_s = 0.5;
        cfg.ed_threshold_dbm = -82.0;
        const auto r = run(cfg);
        REQUIRE(r.slu_offered == r.slu_success + r.slu_failed + r.slu_queued_end);
        REQUIRE(r.wifi_offered == r.wifi_success + r.wifi_dropped + r.wifi_queued_end);
        // throughput is exactly the success count over the horizon
        REQUIRE(r.slu_throughput_bps ==
                phy::throughput_bps(r.slu_success, 300, r.horizon_s));
    }
}

TEST_CASE("constraint audit under the coordinated schemes") {
    RunConfig cfg;
    cfg.scheme = Scheme::Ccha;
    cfg.m_pairs = 8;
    cfg.n_wifi = 8;
    cfg.seed = 31;
    cfg.horizon_s = 1.0;
    cfg.ed_threshold_dbm = -82.0;
    const auto r = run(cfg);
    REQUIRE(r.slu_collisions == 0);
    REQUIRE(r.max_concurrent_slu <= 1);
    REQUIRE(r.max_concurrent_wifi <= 1);
    REQUIRE(r.power_violations == 0);
    REQUIRE(r.slu_success > 0);
    REQUIRE(r.wifi_success > 0);
}

TEST_CASE("distributed access without the short sense collides") {
    RunConfig cfg;
    cfg.scheme = Scheme::T1oDra;
    cfg.m_pairs = 12;
    cfg.n_wifi = 4;
    cfg.seed = 7;
    cfg.horizon_s = 2.0;
    cfg.ed_threshold_dbm = -82.0;
    const auto r = run(cfg);
    REQUIRE(r.slu_collisions > 0);
    REQUIRE(r.max_concurrent_slu > 1);
}

TEST_CASE("jain and utility stay in range") {
    for (Scheme s : {Scheme::Ccha, Scheme::T1oDra}) {
        RunConfig cfg;
        cfg.scheme = s;
        cfg.m_pairs = 6;
        cfg.n_wifi = 6;
        cfg.seed = 13;
        cfg.horizon_s = 1.0;
        cfg.ed_threshold_dbm = -82.0;
        const auto r = run(cfg);
        REQUIRE(r.jain >= 0.5);
        REQUIRE(r.jain <= 1.0);
        REQUIRE(r.prr_slu >= 0.0);
        REQUIRE(r.prr_slu <= 1.0);
        REQUIRE(r.prr_total >= 0.0);
        REQUIRE(r.prr_total <= 1.0);
    }
}
