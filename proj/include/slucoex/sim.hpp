#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "slucoex/agent.hpp"
#include "slucoex/baselines.hpp"
#include "slucoex/ccha.hpp"
#include "slucoex/config.hpp"
#include "slucoex/evaluate.hpp"
#include "slucoex/mac.hpp"
#include "slucoex/phy.hpp"
#include "slucoex/topology.hpp"

namespace slucoex {

struct MetricsReport {
    std::string scheme;
    int m = 0;
    int n = 0;
    std::uint64_t seed = 0;
    double horizon_s = 0.0;

    std::uint64_t slu_offered = 0;
    std::uint64_t slu_success = 0;
    std::uint64_t slu_failed = 0;
    std::uint64_t slu_queued_end = 0;
    std::uint64_t wifi_offered = 0;
    std::uint64_t wifi_success = 0;
    std::uint64_t wifi_dropped = 0;
    std::uint64_t wifi_queued_end = 0;

    double prr_slu = 0.0;
    double prr_wifi = 0.0;
    double prr_total = 0.0;
    double slu_throughput_bps = 0.0;
    double wifi_throughput_bps = 0.0;
    double slu_rate_bps = 0.0;  // time-averaged spectral rate
    double wifi_rate_bps = 0.0;
    double jain = 0.0;
    double mean_utility = 0.0;

    std::uint64_t slu_collisions = 0;
    int max_concurrent_slu = 0;
    int max_concurrent_wifi = 0;
    std::uint64_t power_violations = 0;
};

// Per-slot decision surface for the adaptive (CCHA-based) schemes.
struct SlotChoice {
    int g = 1;
    int action_index = 0;
    double power_dbm = 0.0;
};

class SlotPolicy {
public:
    virtual ~SlotPolicy() = default;
    virtual SlotChoice decide(int pair, const rl::McState& state, Rng& rng) = 0;
};

// Record of one granted slot, emitted to the training hook.
struct SlotRecord {
    int pair = 0;
    rl::McState state;
    rl::McState next_state;
    int g = 1;
    int action = 0;
    double reward = 0.0;
    bool transmitted = false;
    bool yielded = false;
    std::uint64_t cot_index = 0;
    std::int64_t slot_start_us = 0;
    std::int64_t slot_end_us = 0;
    // diagnostics
    double slu_min_sinr_db = 0.0;
    std::optional<double> wifi_min_sinr_db;
};

namespace detail {

inline bool uses_bs_cot(Scheme s) {
    return s != Scheme::T12Dra && s != Scheme::T1oDra;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Deterministic microsecond event engine. Transmissions start and end on
// integer microseconds; channel state is piecewise constant between those
// instants, so the engine can stride from event to event. cfg.tick_mode forces
// 1 us strides (the two paths produce identical runs).
// ---------------------------------------------------------------------------
class Engine {
public:
    Engine(const RunConfig& cfg, Topology topo)
        : cfg_(cfg), topo_(std::move(topo)), gains_(topo_, cfg.carrier_freq_ghz),
          rng_(cfg.seed) {
        cfg_.validate();
        if (topo_.pairs() != cfg_.m_pairs || topo_.wifi_users() != cfg_.n_wifi)
            throw std::invalid_argument("Engine: topology does not match config");
        noise_dbm_ = phy::noise_power_dbm(cfg_.noise_psd_dbm_hz, cfg_.bandwidth_hz);
        noise_mw_ = phy::dbm_to_mw(noise_dbm_);
        ed_mw_ = phy::dbm_to_mw(cfg_.ed_threshold_dbm);
        wifi_point_base_ = gains_.point_wifi(0);
        slot_us_ = cfg_.slot_us();
        capc_ = &mac::capc_lookup(cfg_.capc_priority);
        cot_us_ = std::min<std::int64_t>(cfg_.cot_us, capc_->mcot_us);
        adaptive_ = is_adaptive_family(cfg_.scheme);
        reset_dynamic(cfg_.seed);
    }

    // hooks
    SlotPolicy* policy = nullptr;                       // adaptive slot decisions
    std::function<void(const SlotRecord&)> on_slot;     // training observer
    std::function<void(std::int64_t)> on_model_push;    // model distribution cadence

    std::int64_t now() const { return now_; }
    std::uint64_t cots_completed() const { return cots_completed_; }
    std::uint64_t current_cot_index() const { return cots_completed_; }

    // Drop all dynamic state (clock, queues, machines, in-flight traffic) and
    // reseed the draw stream. Topology and gains stay fixed.
    void reset_dynamic(std::uint64_t seed) {
        rng_ = Rng(seed);
        now_ = 0;
        seg_start_ = 0;
        cots_completed_ = 0;
        active_.clear();
        cot_.reset();
        grants_.clear();
        grant_sense_.clear();
        pending_records_.clear();

        const int points = gains_.point_count();
        rx_mw_.assign(static_cast<std::size_t>(points), 0.0);
        busy_.assign(static_cast<std::size_t>(points), 0);
        idle_since_.assign(static_cast<std::size_t>(points), -1000000);

        pairs_.assign(static_cast<std::size_t>(cfg_.m_pairs), PairState{});
        wifi_.assign(static_cast<std::size_t>(cfg_.n_wifi), WifiState{});
        for (auto& p : pairs_) {
            p.lbt = mac::lbt1_make(cfg_.capc_priority);
            p.next_arrival = rng_.uniform_int(0, cfg_.traffic_period_us() - 1);
            p.prev_power_dbm = rl::kSilenceFloorDbm;
        }
        for (auto& w : wifi_) {
            w.csma = mac::CsmaState{};
            w.next_arrival = rng_.uniform_int(0, cfg_.traffic_period_us() - 1);
            w.power_dbm = adaptive_ ? std::clamp(cfg_.wifi_power_dbm, cfg_.wifi_power_min_dbm,
                                                 cfg_.wifi_power_max_dbm)
                                    : cfg_.wifi_power_dbm;
        }
        bs_ = BsState{};
        bs_.lbt = mac::lbt1_make(cfg_.capc_priority);

        slot_bits_slu_ = slot_bits_wifi_ = 0.0;
        slot_wifi_min_sinr_.reset();
        next_push_ = cfg_.model_update_ms * 1000;
        last_processed_ = -1;
        bs_grant_at_ = -1;
        pair_grant_at_.clear();
        wifi_start_at_.clear();
        wifi_ack_at_.clear();
        slu_overlap_seen_.assign(pairs_.size(), false);
        reset_metrics();
    }

    void reset_metrics() {
        metrics_ = MetricsReport{};
        metrics_.scheme = scheme_name(cfg_.scheme);
        metrics_.m = cfg_.m_pairs;
        metrics_.n = cfg_.n_wifi;
        metrics_.seed = cfg_.seed;
        total_bits_slu_ = total_bits_wifi_ = 0.0;
        utility_sum_ = 0.0;
        utility_slots_ = 0;
        metrics_start_us_ = now_;
    }

    // spec-contract single microsecond step
    void step() { run_until(now_ + 1); }

    void run_until(std::int64_t t_end) {
        while (now_ < t_end) {
            process_instant(now_);
            std::int64_t next = next_event_after(now_, t_end);
            if (cfg_.tick_mode)
                next = std::min(next, now_ + 1);
            advance_machines(next - now_);
            now_ = next;
        }
        process_instant(now_);
    }

    void run_until_cots(std::uint64_t target, std::int64_t safety_horizon_us) {
        const std::int64_t t_max = now_ + safety_horizon_us;
        while (cots_completed_ < target && now_ < t_max) {
            process_instant(now_);
            if (cots_completed_ >= target)
                break;
            std::int64_t next = next_event_after(now_, t_max);
            if (cfg_.tick_mode)
                next = std::min(next, now_ + 1);
            advance_machines(next - now_);
            now_ = next;
        }
    }

    // Close the books: truncate in-flight SL-U transmissions and count queues.
    MetricsReport finalize() {
        close_segments(now_);
        std::uint64_t unstarted = 0;
        for (auto& tx : active_) {
            if (tx.kind == TxKind::Slu)
                unstarted += resolve_slu_tb_outcomes(tx, now_);
        }
        MetricsReport r = metrics_;
        r.slu_queued_end += unstarted; // popped but never on the air
        const double horizon_s =
            static_cast<double>(now_ - metrics_start_us_) / 1e6;
        r.horizon_s = horizon_s;
        for (const auto& p : pairs_)
            r.slu_queued_end += p.queue.size();
        for (const auto& w : wifi_)
            r.wifi_queued_end += w.queue.size();
        r.prr_slu = phy::prr(r.slu_success, r.slu_offered);
        r.prr_wifi = phy::prr(r.wifi_success, r.wifi_offered);
        r.prr_total = phy::prr(r.slu_success + r.wifi_success,
                               r.slu_offered + r.wifi_offered);
        if (horizon_s > 0.0) {
            r.slu_throughput_bps =
                phy::throughput_bps(r.slu_success, static_cast<std::uint64_t>(cfg_.tb_bytes),
                                    horizon_s);
            r.wifi_throughput_bps =
                phy::throughput_bps(r.wifi_success, static_cast<std::uint64_t>(cfg_.tb_bytes),
                                    horizon_s);
            const double us = horizon_s * 1e6;
            r.slu_rate_bps = total_bits_slu_ * cfg_.bandwidth_hz / us;
            r.wifi_rate_bps = total_bits_wifi_ * cfg_.bandwidth_hz / us;
        }
        // system fairness over the rates attained across the run
        if (r.slu_throughput_bps > 0.0 || r.wifi_throughput_bps > 0.0)
            r.jain = phy::jain_index(r.slu_throughput_bps, r.wifi_throughput_bps);
        else
            r.jain = 1.0;
        r.mean_utility = utility_slots_ > 0 ? utility_sum_ / utility_slots_ : 0.0;
        return r;
    }

    // instantaneous received power at a pair's receiver, for the state vector
    double observer_rssi_dbm(int pair) const {
        const double mw = rx_mw_[static_cast<std::size_t>(gains_.point_slu_rx(pair))];
        if (mw <= 0.0)
            return rl::kSilenceFloorDbm;
        return std::max(phy::mw_to_dbm(mw), rl::kSilenceFloorDbm);
    }

    rl::McState build_mc_state(int pair) const {
        rl::McState s;
        s.prev_power_dbm = pairs_[static_cast<std::size_t>(pair)].prev_power_dbm;
        s.channel_energy_dbm.reserve(static_cast<std::size_t>(cfg_.m_pairs - 1));
        for (int v = 0; v < cfg_.m_pairs; ++v) {
            if (v == pair)
                continue;
            s.channel_energy_dbm.push_back(observer_rssi_dbm(v));
        }
        return s;
    }

    int active_tx_count() const { return static_cast<int>(active_.size()); }
    const RunConfig& config() const { return cfg_; }
    const Topology& topology() const { return topo_; }
    const GainTable& gains() const { return gains_; }
    double noise_dbm() const { return noise_dbm_; }

private:
    struct ActiveTx {
        TxKind kind = TxKind::Slu;
        int node = 0;
        double power_dbm = 0.0;
        double p_mw = 0.0;
        std::int64_t start_us = 0;
        std::int64_t end_us = 0;
        int source = 0;
        int rx_point = 0;
        int tb_count = 1;
        std::vector<double> tb_min_sinr; // dB, per TB sub-span
        double cur_sinr_db = 0.0;
    };

    struct PairState {
        std::deque<std::int64_t> queue; // packet arrival stamps
        std::int64_t next_arrival = 0;
        mac::LbtType1State lbt;
        enum class Mode : std::uint8_t { Inactive, Contending, WaitSsb, Transmitting };
        Mode mode = Mode::Inactive;
        std::int64_t target_ssb = 0;
        double prev_power_dbm = rl::kSilenceFloorDbm;
        // scratch for in-flight TB outcome delivery
        int inflight_tbs = 0;
    };

    struct WifiState {
        std::deque<std::int64_t> queue;
        std::int64_t next_arrival = 0;
        mac::CsmaState csma;
        bool in_flight = false;     // HOL packet on the air / awaiting ack
        double power_dbm = 23.0;
        double last_min_sinr_db = 0.0;
        bool have_result = false;
    };

    struct BsState {
        mac::LbtType1State lbt;
        enum class Mode : std::uint8_t { Idle, Contending, Holding };
        Mode mode = Mode::Idle;
    };

    // one granted slot awaiting its end-of-slot bookkeeping
    struct PendingSlotRecord {
        SlotRecord rec;
        bool want_callback = false;
        double slu_min_sinr_db = std::numeric_limits<double>::infinity();
        bool outcome_known = false;
    };

    RunConfig cfg_;
    Topology topo_;
    GainTable gains_;
    Rng rng_;

    double noise_dbm_ = -101.0;
    double noise_mw_ = 0.0;
    double ed_mw_ = 0.0;
    int wifi_point_base_ = 0;
    std::int64_t slot_us_ = 500;
    const mac::CapcClass* capc_ = nullptr;
    std::int64_t cot_us_ = 2000;
    bool adaptive_ = false;

    std::int64_t now_ = 0;
    std::int64_t seg_start_ = 0;
    std::uint64_t cots_completed_ = 0;
    std::int64_t next_push_ = 0;
    std::int64_t metrics_start_us_ = 0;

    std::vector<ActiveTx> active_;
    std::vector<double> rx_mw_;
    std::vector<std::uint8_t> busy_;
    std::vector<std::int64_t> idle_since_;

    std::vector<PairState> pairs_;
    std::vector<WifiState> wifi_;
    BsState bs_;

    // current COT and its grants (BS-coordinated schemes)
    std::optional<ccha::CotWindow> cot_;
    std::vector<ccha::ResourceGrant> grants_;

    // per-grant Type-1 sensing for the ccha_t1 scheme
    struct GrantSense {
        int grant_index = 0;
        int pair = 0;
        std::int64_t deadline_us = 0;
        mac::LbtType1State lbt;
        bool done = false;
        bool armed = false;
        std::int64_t arm_at = 0;
    };
    std::vector<GrantSense> grant_sense_;

    std::vector<PendingSlotRecord> pending_records_;

    MetricsReport metrics_;
    double total_bits_slu_ = 0.0;
    double total_bits_wifi_ = 0.0;
    double slot_bits_slu_ = 0.0;
    double slot_bits_wifi_ = 0.0;
    std::optional<double> slot_wifi_min_sinr_;
    double utility_sum_ = 0.0;
    std::uint64_t utility_slots_ = 0;

    // ------------------------------------------------------------------
    // channel occupancy bookkeeping
    // ------------------------------------------------------------------
    void close_segments(std::int64_t t) {
        if (t <= seg_start_)
            return;
        const double dur = static_cast<double>(t - seg_start_);
        for (auto& tx : active_) {
            const double lin = phy::db_to_linear(tx.cur_sinr_db);
            const double bits = std::log2(1.0 + lin) * dur;
            if (tx.kind == TxKind::Slu) {
                total_bits_slu_ += bits;
                slot_bits_slu_ += bits;
            } else {
                total_bits_wifi_ += bits;
                slot_bits_wifi_ += bits;
                if (!slot_wifi_min_sinr_ || tx.cur_sinr_db < *slot_wifi_min_sinr_)
                    slot_wifi_min_sinr_ = tx.cur_sinr_db;
            }
            // segments never span TB boundaries (slot edges are events)
            const int tb = static_cast<int>((seg_start_ - tx.start_us) / slot_us_);
            if (tb >= 0 && tb < tx.tb_count)
                tx.tb_min_sinr[static_cast<std::size_t>(tb)] =
                    std::min(tx.tb_min_sinr[static_cast<std::size_t>(tb)], tx.cur_sinr_db);
        }
        seg_start_ = t;
    }

    void refresh_channel(std::int64_t t) {
        const int points = gains_.point_count();
        int wifi_on_air = 0;
        for (const auto& tx : active_)
            if (tx.kind == TxKind::Wifi)
                ++wifi_on_air;
        for (int p = 0; p < points; ++p) {
            double mw = 0.0;
            for (const auto& tx : active_)
                mw += tx.p_mw * gains_.gain(tx.source, p);
            rx_mw_[static_cast<std::size_t>(p)] = mw;
            bool now_busy = mw >= ed_mw_;
            // Wi-Fi sensors also carrier-sense same-technology preambles,
            // which decode far below the energy-detection level; this is what
            // keeps CSMA/CA collision avoidance effective at low powers.
            if (!now_busy && wifi_on_air > 0 && p >= wifi_point_base_)
                now_busy = true;
            if (busy_[static_cast<std::size_t>(p)] && !now_busy)
                idle_since_[static_cast<std::size_t>(p)] = t;
            busy_[static_cast<std::size_t>(p)] = now_busy ? 1 : 0;
        }
        for (auto& tx : active_) {
            double interf = 0.0;
            for (const auto& other : active_) {
                if (&other == &tx)
                    continue;
                interf += other.p_mw * gains_.gain(other.source, tx.rx_point);
            }
            const double sig = tx.p_mw * gains_.gain(tx.source, tx.rx_point);
            tx.cur_sinr_db = phy::linear_to_db(sig / (noise_mw_ + interf));
        }
    }

    std::int64_t trailing_idle(int point, std::int64_t t) const {
        if (busy_[static_cast<std::size_t>(point)])
            return 0;
        return t - idle_since_[static_cast<std::size_t>(point)];
    }

    void start_tx(TxKind kind, int node, double power_dbm, std::int64_t start,
                  std::int64_t end, int tb_count) {
        close_segments(start);
        ActiveTx tx;
        tx.kind = kind;
        tx.node = node;
        tx.power_dbm = power_dbm;
        tx.p_mw = phy::dbm_to_mw(power_dbm);
        tx.start_us = start;
        tx.end_us = end;
        tx.tb_count = tb_count;
        tx.tb_min_sinr.assign(static_cast<std::size_t>(tb_count),
                              std::numeric_limits<double>::infinity());
        if (kind == TxKind::Slu) {
            tx.source = gains_.source_slu(node);
            tx.rx_point = gains_.point_slu_rx(node);
            int concurrent = 0;
            for (const auto& a : active_)
                if (a.kind == TxKind::Slu)
                    ++concurrent;
            if (concurrent > 0)
                metrics_.slu_collisions += 1;
            metrics_.max_concurrent_slu =
                std::max(metrics_.max_concurrent_slu, concurrent + 1);
            const double lo = adaptive_ ? cfg_.slu_power_min_dbm : cfg_.slu_fixed_power_dbm;
            const double hi = adaptive_ ? cfg_.slu_power_max_dbm : cfg_.slu_fixed_power_dbm;
            if (power_dbm < lo - 1e-9 || power_dbm > hi + 1e-9)
                metrics_.power_violations += 1;
        } else {
            tx.source = gains_.source_wifi(node);
            tx.rx_point = gains_.point_ap();
            int concurrent = 0;
            for (const auto& a : active_)
                if (a.kind == TxKind::Wifi)
                    ++concurrent;
            metrics_.max_concurrent_wifi =
                std::max(metrics_.max_concurrent_wifi, concurrent + 1);
            if (power_dbm < cfg_.wifi_power_min_dbm - 1e-9 ||
                power_dbm > std::max(cfg_.wifi_power_max_dbm, cfg_.wifi_power_dbm) + 1e-9)
                metrics_.power_violations += 1;
        }
        active_.push_back(std::move(tx));
        refresh_channel(start);
    }

    std::uint64_t resolve_slu_tb_outcomes(const ActiveTx& tx, std::int64_t upto) {
        auto& pair = pairs_[static_cast<std::size_t>(tx.node)];
        std::uint64_t unstarted = 0;
        for (int tb = 0; tb < tx.tb_count; ++tb) {
            const std::int64_t tb_start = tx.start_us + tb * slot_us_;
            if (tb_start >= upto) {
                ++unstarted;
                continue;
            }
            const double min_sinr = tx.tb_min_sinr[static_cast<std::size_t>(tb)];
            const bool ok = min_sinr >= cfg_.slu_sinr_min_db;
            if (ok)
                metrics_.slu_success += 1;
            else
                metrics_.slu_failed += 1;
            if (pair.inflight_tbs > 0)
                --pair.inflight_tbs;
            // deliver the slot outcome to a pending record, if one is waiting
            for (auto& pr : pending_records_) {
                if (pr.rec.pair == tx.node && !pr.outcome_known &&
                    pr.rec.slot_start_us <= tb_start && tb_start < pr.rec.slot_end_us) {
                    pr.slu_min_sinr_db = min_sinr;
                    pr.outcome_known = true;
                    break;
                }
            }
        }
        return unstarted;
    }

    void end_tx_at(std::size_t index, std::int64_t t) {
        close_segments(t);
        ActiveTx tx = std::move(active_[index]);
        active_.erase(active_.begin() + static_cast<std::ptrdiff_t>(index));
        refresh_channel(t);
        if (tx.kind == TxKind::Slu) {
            resolve_slu_tb_outcomes(tx, t);
            auto& pair = pairs_[static_cast<std::size_t>(tx.node)];
            if (pair.mode == PairState::Mode::Transmitting) {
                // distributed occupancy finished: escalate on overlap, else reset
                const bool collided = slu_overlap_seen_[static_cast<std::size_t>(tx.node)];
                mac::lbt1_cw_update(pair.lbt,
                                    collided ? mac::TxOutcome::Collision : mac::TxOutcome::Success);
                slu_overlap_seen_[static_cast<std::size_t>(tx.node)] = false;
                pair.mode = PairState::Mode::Inactive;
                arm_pair_if_needed(tx.node, t);
            }
        } else {
            auto& w = wifi_[static_cast<std::size_t>(tx.node)];
            w.last_min_sinr_db = tx.tb_min_sinr[0];
            w.have_result = true;
            mac::csma_on_tx_end(w.csma);
        }
    }

    // ------------------------------------------------------------------
    // event loop
    // ------------------------------------------------------------------
    std::int64_t next_event_after(std::int64_t t, std::int64_t t_end) const {
        std::int64_t next = t_end;
        auto consider = [&](std::int64_t cand) {
            if (cand > t && cand < next)
                next = cand;
        };
        // slot boundaries pace everything
        consider((t / slot_us_ + 1) * slot_us_);
        for (const auto& tx : active_)
            consider(tx.end_us);
        for (const auto& p : pairs_) {
            consider(p.next_arrival);
            if (p.mode == PairState::Mode::Contending) {
                const auto tte = pair_tte(p);
                if (tte != mac::kNever)
                    consider(t + tte);
            }
            if (p.mode == PairState::Mode::WaitSsb)
                consider(p.target_ssb);
        }
        for (const auto& w : wifi_) {
            consider(w.next_arrival);
            const auto tte =
                mac::csma_time_to_event(w.csma, wifi_channel(w));
            if (tte != mac::kNever)
                consider(t + tte);
        }
        if (bs_.mode == BsState::Mode::Contending) {
            const auto tte = bs_busy() ? mac::kNever : mac::lbt1_time_to_grant(bs_.lbt);
            if (tte != mac::kNever)
                consider(t + tte);
        }
        for (const auto& gs : grant_sense_) {
            if (!gs.armed)
                consider(gs.arm_at);
            else if (!gs.done) {
                const auto tte = grant_sense_busy(gs) ? mac::kNever
                                                      : mac::lbt1_time_to_grant(gs.lbt);
                if (tte != mac::kNever)
                    consider(t + tte);
            }
        }
        if (cot_)
            consider(cot_->end_us());
        if (on_model_push)
            consider(next_push_);
        return next;
    }

    bool bs_busy() const { return busy_[static_cast<std::size_t>(gains_.point_bs())] != 0; }
    mac::Channel bs_channel() const {
        return bs_busy() ? mac::Channel::Busy : mac::Channel::Idle;
    }
    mac::Channel wifi_channel(const WifiState& w) const {
        const int idx = static_cast<int>(&w - wifi_.data());
        return busy_[static_cast<std::size_t>(gains_.point_wifi(idx))] ? mac::Channel::Busy
                                                                       : mac::Channel::Idle;
    }
    mac::Channel pair_channel(int pair) const {
        return busy_[static_cast<std::size_t>(gains_.point_slu_tx(pair))] ? mac::Channel::Busy
                                                                          : mac::Channel::Idle;
    }
    std::int64_t pair_tte(const PairState& p) const {
        const int idx = static_cast<int>(&p - pairs_.data());
        if (busy_[static_cast<std::size_t>(gains_.point_slu_tx(idx))])
            return mac::kNever;
        return mac::lbt1_time_to_grant(p.lbt);
    }
    bool grant_sense_busy(const GrantSense& gs) const {
        return busy_[static_cast<std::size_t>(gains_.point_slu_tx(gs.pair))] != 0;
    }

    void advance_machines(std::int64_t n) {
        if (n <= 0)
            return;
        const std::int64_t t_emit = now_ + n;
        if (bs_.mode == BsState::Mode::Contending) {
            if (mac::lbt1_advance(bs_.lbt, bs_channel(), n))
                bs_grant_at_ = t_emit;
        }
        for (std::size_t i = 0; i < pairs_.size(); ++i) {
            auto& p = pairs_[i];
            if (p.mode == PairState::Mode::Contending) {
                if (mac::lbt1_advance(p.lbt, pair_channel(static_cast<int>(i)), n))
                    pair_grant_at_.push_back(static_cast<int>(i));
            }
        }
        for (std::size_t i = 0; i < wifi_.size(); ++i) {
            auto& w = wifi_[i];
            const auto ev = mac::csma_advance(w.csma, wifi_channel(w), n);
            if (ev == mac::CsmaEvent::TxStart)
                wifi_start_at_.push_back(static_cast<int>(i));
            else if (ev == mac::CsmaEvent::AckDue)
                wifi_ack_at_.push_back(static_cast<int>(i));
        }
        for (auto& gs : grant_sense_) {
            if (gs.armed && !gs.done) {
                if (mac::lbt1_advance(gs.lbt, grant_sense_busy(gs) ? mac::Channel::Busy
                                                                   : mac::Channel::Idle,
                                      n))
                    gs.done = true;
            }
        }
    }

    void process_instant(std::int64_t t) {
        if (t == last_processed_)
            return;
        last_processed_ = t;
        // (1) transmissions ending now
        for (std::size_t i = 0; i < active_.size();) {
            if (active_[i].end_us == t)
                end_tx_at(i, t);
            else
                ++i;
        }
        // (2) Wi-Fi acks due now
        if (!wifi_ack_at_.empty()) {
            for (int idx : wifi_ack_at_)
                resolve_wifi_ack(idx, t);
            wifi_ack_at_.clear();
        }
        // (3) arrivals
        for (std::size_t i = 0; i < pairs_.size(); ++i) {
            auto& p = pairs_[i];
            while (p.next_arrival <= t) {
                p.queue.push_back(p.next_arrival);
                metrics_.slu_offered += 1;
                p.next_arrival = next_arrival_after(p.next_arrival);
            }
        }
        for (std::size_t i = 0; i < wifi_.size(); ++i) {
            auto& w = wifi_[i];
            while (w.next_arrival <= t) {
                w.queue.push_back(w.next_arrival);
                metrics_.wifi_offered += 1;
                w.next_arrival = next_arrival_after(w.next_arrival);
                if (!w.in_flight && w.csma.phase == mac::CsmaState::Phase::Idle)
                    mac::csma_begin(w.csma, mac::draw_backoff(rng_, w.csma.cw));
            }
        }
        maybe_start_bs(t);
        for (std::size_t i = 0; i < pairs_.size(); ++i)
            arm_pair_if_needed(static_cast<int>(i), t);

        // (4) slot boundary work
        if (t % slot_us_ == 0)
            process_ssb(t);

        // (5) machine emissions landing at this instant
        if (bs_grant_at_ == t) {
            bs_grant_at_ = -1;
            handle_bs_grant(t);
        }
        if (!pair_grant_at_.empty()) {
            for (int idx : pair_grant_at_)
                handle_pair_grant(idx, t);
            pair_grant_at_.clear();
        }
        if (!wifi_start_at_.empty()) {
            for (int idx : wifi_start_at_)
                handle_wifi_txstart(idx, t);
            wifi_start_at_.clear();
        }
        // (6) model distribution cadence
        if (on_model_push && t >= next_push_) {
            on_model_push(t);
            next_push_ += cfg_.model_update_ms * 1000;
        }
    }

    std::int64_t next_arrival_after(std::int64_t prev) {
        if (cfg_.traffic == TrafficModel::Periodic)
            return prev + cfg_.traffic_period_us();
        const double gap = rng_.exponential(static_cast<double>(cfg_.traffic_period_us()));
        return prev + std::max<std::int64_t>(1, static_cast<std::int64_t>(gap + 0.5));
    }

    void maybe_start_bs(std::int64_t) {
        if (!detail::uses_bs_cot(cfg_.scheme))
            return;
        if (bs_.mode != BsState::Mode::Idle)
            return;
        bool pending = false;
        for (const auto& p : pairs_)
            if (!p.queue.empty()) {
                pending = true;
                break;
            }
        if (!pending)
            return;
        mac::lbt1_begin(bs_.lbt, mac::draw_backoff(rng_, bs_.lbt.cw));
        bs_.mode = BsState::Mode::Contending;
    }

    void arm_pair_if_needed(int idx, std::int64_t) {
        if (detail::uses_bs_cot(cfg_.scheme))
            return;
        auto& p = pairs_[static_cast<std::size_t>(idx)];
        if (p.mode != PairState::Mode::Inactive || p.queue.empty())
            return;
        mac::lbt1_begin(p.lbt, mac::draw_backoff(rng_, p.lbt.cw));
        p.mode = PairState::Mode::Contending;
    }

    void handle_bs_grant(std::int64_t t) {
        ccha::SlotGrid grid{slot_us_};
        auto cot = ccha::make_cot(t, cot_us_, grid, 0, cfg_.bandwidth_hz);
        // FIFO over pairs with data, ordered by oldest packet then pair id
        std::vector<std::pair<std::int64_t, int>> order;
        for (int m = 0; m < cfg_.m_pairs; ++m)
            if (!pairs_[static_cast<std::size_t>(m)].queue.empty())
                order.emplace_back(pairs_[static_cast<std::size_t>(m)].queue.front(), m);
        std::sort(order.begin(), order.end());
        std::vector<int> pending;
        pending.reserve(order.size());
        for (const auto& [stamp, m] : order)
            pending.push_back(m);
        grants_ = ccha::allocate_slots(cot, pending, slot_us_);
        cot_ = cot;
        bs_.mode = BsState::Mode::Holding;

        grant_sense_.clear();
        if (cfg_.scheme == Scheme::CchaT1) {
            for (std::size_t gi = 0; gi < grants_.size(); ++gi) {
                GrantSense gs;
                gs.grant_index = static_cast<int>(gi);
                gs.pair = grants_[gi].pair;
                gs.deadline_us = grants_[gi].slot_start_us;
                gs.arm_at = std::max<std::int64_t>(t, grants_[gi].slot_start_us - slot_us_);
                gs.lbt = mac::lbt1_make(cfg_.capc_priority);
                grant_sense_.push_back(gs);
            }
            arm_due_grant_senses(t);
        }
        // a grant exactly on a boundary starts its first slot immediately
        if (cot_->start_us == t)
            start_granted_slots(t);
    }

    void arm_due_grant_senses(std::int64_t t) {
        for (auto& gs : grant_sense_) {
            if (!gs.armed && gs.arm_at <= t) {
                mac::lbt1_begin(gs.lbt,
                                mac::draw_backoff(rng_, gs.lbt.cw));
                gs.armed = true;
            }
        }
    }

    void handle_pair_grant(int idx, std::int64_t t) {
        auto& p = pairs_[static_cast<std::size_t>(idx)];
        p.mode = PairState::Mode::WaitSsb;
        ccha::SlotGrid grid{slot_us_};
        p.target_ssb = grid.next_ssb(t);
        if (p.target_ssb == t)
            start_dra_tx(idx, t);
    }

    void handle_wifi_txstart(int idx, std::int64_t t) {
        auto& w = wifi_[static_cast<std::size_t>(idx)];
        // same-instant arbitration: an earlier start owns the channel
        if (wifi_channel(w) == mac::Channel::Busy) {
            mac::csma_cancel_tx(w.csma);
            mac::csma_begin(w.csma, 0);
            return;
        }
        w.in_flight = true;
        w.have_result = false;
        start_tx(TxKind::Wifi, idx, w.power_dbm, t, t + cfg_.wifi_txop_us, 1);
    }

    void resolve_wifi_ack(int idx, std::int64_t t) {
        auto& w = wifi_[static_cast<std::size_t>(idx)];
        const bool success = w.have_result && w.last_min_sinr_db >= cfg_.wifi_sinr_min_db;
        if (adaptive_ && w.have_result)
            w.power_dbm = closed_loop_power(w.power_dbm, w.last_min_sinr_db,
                                            cfg_.wifi_target_sinr_db, cfg_.wifi_power_margin_db,
                                            cfg_.wifi_power_min_dbm, cfg_.wifi_power_max_dbm);
        const auto result = mac::csma_on_ack(w.csma, success);
        w.in_flight = false;
        if (result == mac::CsmaAck::Delivered) {
            metrics_.wifi_success += 1;
            w.queue.pop_front();
        } else if (result == mac::CsmaAck::Dropped) {
            metrics_.wifi_dropped += 1;
            w.queue.pop_front();
        }
        if (!w.queue.empty())
            mac::csma_begin(w.csma, mac::draw_backoff(rng_, w.csma.cw));
        (void)t;
    }

    // ------------------------------------------------------------------
    // slot-grid processing
    // ------------------------------------------------------------------
    void process_ssb(std::int64_t t) {
        close_segments(t);
        finish_pending_records(t);
        finish_slot_utility(t);
        if (cot_ && cot_->end_us() == t) {
            cot_.reset();
            grants_.clear();
            grant_sense_.clear();
            cots_completed_ += 1;
            bs_.mode = BsState::Mode::Idle;
            maybe_start_bs(t);
        }
        if (cfg_.scheme == Scheme::CchaT1)
            arm_due_grant_senses(t);
        start_granted_slots(t);
        start_due_dra(t);
    }

    void finish_slot_utility(std::int64_t t) {
        if (t == metrics_start_us_)
            return;
        const double us = static_cast<double>(slot_us_);
        const double r_s = slot_bits_slu_ * cfg_.bandwidth_hz / us;
        const double r_w = slot_bits_wifi_ * cfg_.bandwidth_hz / us;
        if (r_s > 0.0 || r_w > 0.0) {
            const double j = phy::jain_index(r_s, r_w);
            utility_sum_ += phy::utility(cfg_.beta, r_s + r_w, j, cfg_.rate_scale());
            utility_slots_ += 1;
        }
        slot_bits_slu_ = 0.0;
        slot_bits_wifi_ = 0.0;
        slot_wifi_min_sinr_.reset();
    }

    void finish_pending_records(std::int64_t t) {
        if (pending_records_.empty())
            return;
        // utility of the slot ending now, from the still-open bins
        const double us = static_cast<double>(slot_us_);
        const double r_s = slot_bits_slu_ * cfg_.bandwidth_hz / us;
        const double r_w = slot_bits_wifi_ * cfg_.bandwidth_hz / us;
        double slot_u = 0.0;
        if (r_s > 0.0 || r_w > 0.0)
            slot_u = phy::utility(cfg_.beta, r_s + r_w, phy::jain_index(r_s, r_w),
                                  cfg_.rate_scale());
        for (std::size_t i = 0; i < pending_records_.size();) {
            auto& pr = pending_records_[i];
            if (pr.rec.slot_end_us != t) {
                ++i;
                continue;
            }
            auto& p = pairs_[static_cast<std::size_t>(pr.rec.pair)];
            pr.rec.slu_min_sinr_db = pr.slu_min_sinr_db;
            pr.rec.wifi_min_sinr_db = slot_wifi_min_sinr_;
            if (pr.rec.transmitted) {
                const phy::SinrThresholds thr{cfg_.slu_sinr_min_db, cfg_.wifi_sinr_min_db};
                pr.rec.reward = rl::intrinsic_reward(pr.slu_min_sinr_db, slot_wifi_min_sinr_,
                                                     thr, slot_u);
                p.prev_power_dbm = cfg_.slu_power_level_dbm(pr.rec.action);
            } else {
                // skipped slots score zero, a yielded access scores the failure
                pr.rec.reward = pr.rec.g == 0 ? 0.0 : -slot_u;
                p.prev_power_dbm = rl::kSilenceFloorDbm;
            }
            pr.rec.next_state = build_mc_state(pr.rec.pair);
            if (on_slot && pr.want_callback)
                on_slot(pr.rec);
            pending_records_.erase(pending_records_.begin() +
                                   static_cast<std::ptrdiff_t>(i));
        }
    }

    void start_granted_slots(std::int64_t t) {
        if (!cot_ || grants_.empty())
            return;
        for (const auto& grant : grants_) {
            if (grant.slot_start_us != t)
                continue;
            const int m = grant.pair;
            auto& p = pairs_[static_cast<std::size_t>(m)];

            bool gate_pass;
            if (cfg_.scheme == Scheme::CchaT1) {
                gate_pass = false;
                for (const auto& gs : grant_sense_)
                    if (gs.grant_index == grant.slot_index && gs.done)
                        gate_pass = true;
            } else {
                gate_pass = ccha::user_access(trailing_idle(
                                gains_.point_slu_tx(m), t)) == ccha::Access::Transmit;
            }

            SlotChoice choice;
            choice.g = 1;
            choice.power_dbm = cfg_.slu_fixed_power_dbm;
            rl::McState state;
            if (adaptive_) {
                state = build_mc_state(m);
                if (policy)
                    choice = policy->decide(m, state, rng_);
            }

            const bool transmitted = choice.g == 1 && gate_pass && !p.queue.empty();
            const bool yielded = choice.g == 1 && !gate_pass && !p.queue.empty();
            if (transmitted) {
                p.queue.pop_front();
                p.inflight_tbs += 1;
                start_tx(TxKind::Slu, m, choice.power_dbm, t,
                         t + slot_us_ - ccha::kGuardUs, 1);
            }

            PendingSlotRecord pr;
            pr.rec.pair = m;
            pr.rec.state = std::move(state);
            pr.rec.g = choice.g;
            pr.rec.action = choice.action_index;
            pr.rec.transmitted = transmitted;
            pr.rec.yielded = yielded;
            pr.rec.cot_index = cots_completed_;
            pr.rec.slot_start_us = grant.slot_start_us;
            pr.rec.slot_end_us = grant.slot_end_us;
            pr.want_callback = adaptive_ && on_slot != nullptr;
            if (adaptive_)
                pending_records_.push_back(std::move(pr));
        }
    }

    void start_dra_tx(int idx, std::int64_t t) {
        auto& p = pairs_[static_cast<std::size_t>(idx)];
        if (cfg_.scheme == Scheme::T12Dra) {
            const bool pass = ccha::user_access(trailing_idle(
                                  gains_.point_slu_tx(idx), t)) == ccha::Access::Transmit;
            if (!pass) {
                // yielded boundary: fall back to contention for the next one
                p.mode = PairState::Mode::Inactive;
                arm_pair_if_needed(idx, t);
                return;
            }
        }
        const int max_tbs = static_cast<int>(cot_us_ / slot_us_);
        const int k = std::min<int>(max_tbs, static_cast<int>(p.queue.size()));
        if (k == 0) {
            p.mode = PairState::Mode::Inactive;
            return;
        }
        for (int i = 0; i < k; ++i)
            p.queue.pop_front();
        p.inflight_tbs += k;
        p.mode = PairState::Mode::Transmitting;
        start_tx(TxKind::Slu, idx, cfg_.slu_fixed_power_dbm, t,
                 t + static_cast<std::int64_t>(k) * slot_us_ - ccha::kGuardUs, k);
        // overlap flag for the CW escalation decision
        int others = 0;
        for (const auto& a : active_)
            if (a.kind == TxKind::Slu && a.node != idx)
                ++others;
        if (others > 0) {
            slu_overlap_seen_[static_cast<std::size_t>(idx)] = true;
            for (const auto& a : active_)
                if (a.kind == TxKind::Slu)
                    slu_overlap_seen_[static_cast<std::size_t>(a.node)] = true;
        }
    }

    void start_due_dra(std::int64_t t) {
        if (detail::uses_bs_cot(cfg_.scheme))
            return;
        for (std::size_t i = 0; i < pairs_.size(); ++i) {
            auto& p = pairs_[i];
            if (p.mode == PairState::Mode::WaitSsb && p.target_ssb == t)
                start_dra_tx(static_cast<int>(i), t);
        }
    }

    // emission buffers filled by advance_machines, applied at the next instant
    std::int64_t bs_grant_at_ = -1;
    std::int64_t last_processed_ = -1;
    std::vector<int> pair_grant_at_;
    std::vector<int> wifi_start_at_;
    std::vector<int> wifi_ack_at_;
    std::vector<bool> slu_overlap_seen_;
};

} // namespace slucoex
