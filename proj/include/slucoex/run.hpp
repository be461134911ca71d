#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "slucoex/agent.hpp"
#include "slucoex/baselines.hpp"
#include "slucoex/config.hpp"
#include "slucoex/sim.hpp"

namespace slucoex {

// ---------------------------------------------------------------------------
// Slot policies for the adaptive schemes
// ---------------------------------------------------------------------------
class FixedPowerPolicy : public SlotPolicy {
public:
    explicit FixedPowerPolicy(double power_dbm) : power_dbm_(power_dbm) {}
    SlotChoice decide(int, const rl::McState&, Rng&) override {
        SlotChoice c;
        c.g = 1;
        c.power_dbm = power_dbm_;
        return c;
    }

private:
    double power_dbm_;
};

class RandomSlotPolicy : public SlotPolicy {
public:
    explicit RandomSlotPolicy(const RunConfig& cfg) : cfg_(&cfg) {}
    SlotChoice decide(int, const rl::McState&, Rng& rng) override {
        const auto d = baseline_random(rng, cfg_->slu_power_levels);
        SlotChoice c;
        c.g = d.g;
        c.action_index = d.power_index;
        c.power_dbm = cfg_->slu_power_level_dbm(d.power_index);
        return c;
    }

private:
    const RunConfig* cfg_;
};

// Open-loop power from the pair's own reference path loss; interference never
// enters the calculation.
class OlpcPolicy : public SlotPolicy {
public:
    OlpcPolicy(const RunConfig& cfg, const Topology& topo) {
        const double noise = phy::noise_power_dbm(cfg.noise_psd_dbm_hz, cfg.bandwidth_hz);
        for (int m = 0; m < topo.pairs(); ++m) {
            const double d = std::max(1.0, distance(topo.slu_tx[static_cast<std::size_t>(m)],
                                                    topo.slu_rx[static_cast<std::size_t>(m)]));
            const double pl = phy::path_loss_db(cfg.carrier_freq_ghz, d);
            powers_.push_back(baseline_olpc(pl, noise, cfg.slu_sinr_min_db, cfg.olpc_margin_db,
                                            cfg.slu_power_min_dbm, cfg.slu_power_max_dbm));
        }
    }
    SlotChoice decide(int pair, const rl::McState&, Rng&) override {
        SlotChoice c;
        c.g = 1;
        c.power_dbm = powers_[static_cast<std::size_t>(pair)];
        return c;
    }

private:
    std::vector<double> powers_;
};

// Users act on their local (possibly stale) model copies.
class RlSlotPolicy : public SlotPolicy {
public:
    RlSlotPolicy(const RunConfig& cfg, std::vector<rl::UserModel>& users, bool hierarchical)
        : cfg_(&cfg), users_(&users), hierarchical_(hierarchical) {}

    double epsilon = 0.0;

    SlotChoice decide(int pair, const rl::McState& state, Rng& rng) override {
        const auto& model = (*users_)[static_cast<std::size_t>(pair)];
        SlotChoice c;
        if (hierarchical_) {
            c.g = rl::select_subgoal(model.q2, state, epsilon, rng);
            c.action_index = rl::select_action(model.q1, rl::ExtendedState{state, c.g},
                                               epsilon, rng);
        } else {
            c.g = 1;
            c.action_index = rl::epsilon_greedy(model.q1, rl::to_input(state), epsilon, rng);
        }
        c.power_dbm = cfg_->slu_power_level_dbm(c.action_index);
        return c;
    }

private:
    const RunConfig* cfg_;
    std::vector<rl::UserModel>* users_;
    bool hierarchical_;
};

// ---------------------------------------------------------------------------
// Agent checkpoint container: "SLAG" magic, version, mode byte (0 = two-level,
// 1 = flat), then the network records (q1, q1_target[, q2, q2_target]).
// ---------------------------------------------------------------------------
inline constexpr std::uint32_t kAgentMagic = 0x47414C53u; // "SLAG"

inline void save_agent_file(const std::string& path, const rl::CghdqnAgent& agent) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write checkpoint '" + path + "'");
    rl::detail::write_le<std::uint32_t>(out, kAgentMagic);
    rl::detail::write_le<std::uint32_t>(out, 1);
    rl::detail::write_le<std::uint8_t>(out, 0);
    rl::save_network(agent.q1(), out);
    rl::save_network(agent.q1_target(), out);
    rl::save_network(agent.q2(), out);
    rl::save_network(agent.q2_target(), out);
}

inline void save_agent_file(const std::string& path, const rl::DqnAgent& agent) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write checkpoint '" + path + "'");
    rl::detail::write_le<std::uint32_t>(out, kAgentMagic);
    rl::detail::write_le<std::uint32_t>(out, 1);
    rl::detail::write_le<std::uint8_t>(out, 1);
    rl::save_network(agent.q(), out);
    rl::save_network(agent.target(), out);
}

inline bool load_agent_file(const std::string& path, rl::CghdqnAgent& agent) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        return false;
    if (rl::detail::read_le<std::uint32_t>(in) != kAgentMagic)
        throw std::runtime_error("checkpoint '" + path + "': bad magic");
    if (rl::detail::read_le<std::uint32_t>(in) != 1)
        throw std::runtime_error("checkpoint '" + path + "': unsupported version");
    if (rl::detail::read_le<std::uint8_t>(in) != 0)
        throw std::runtime_error("checkpoint '" + path + "': wrong agent kind");
    auto q1 = rl::load_network(in);
    auto q1t = rl::load_network(in);
    auto q2 = rl::load_network(in);
    auto q2t = rl::load_network(in);
    agent.mutable_q1() = std::move(q1);
    agent.mutable_q2() = std::move(q2);
    agent.set_targets(std::move(q1t), std::move(q2t));
    return true;
}

inline bool load_agent_file(const std::string& path, rl::DqnAgent& agent) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        return false;
    if (rl::detail::read_le<std::uint32_t>(in) != kAgentMagic)
        throw std::runtime_error("checkpoint '" + path + "': bad magic");
    if (rl::detail::read_le<std::uint32_t>(in) != 1)
        throw std::runtime_error("checkpoint '" + path + "': unsupported version");
    if (rl::detail::read_le<std::uint8_t>(in) != 1)
        throw std::runtime_error("checkpoint '" + path + "': wrong agent kind");
    auto q = rl::load_network(in);
    auto qt = rl::load_network(in);
    agent.mutable_q() = std::move(q);
    agent.set_target(std::move(qt));
    return true;
}

// ---------------------------------------------------------------------------
// Full scenario execution
// ---------------------------------------------------------------------------
namespace detail {

inline std::int64_t episode_safety_us(const RunConfig& cfg) {
    return static_cast<std::int64_t>(cfg.episode_cots) * 100000;
}

} // namespace detail

inline MetricsReport evaluate_with_policy(Engine& engine, const RunConfig& cfg,
                                          SlotPolicy* policy) {
    engine.policy = policy;
    engine.on_slot = nullptr;
    engine.on_model_push = nullptr;
    engine.reset_dynamic(derive_seed(cfg.seed, "eval"));
    engine.run_until(cfg.horizon_us());
    return engine.finalize();
}

inline MetricsReport run(const RunConfig& cfg_in) {
    RunConfig cfg = cfg_in;
    cfg.validate();

    Rng topo_rng(derive_seed(cfg.seed, "topo"));
    Topology topo =
        place_nodes(topo_rng, cfg.m_pairs, cfg.n_wifi, cfg.pair_max_dist_m, cfg.area_m);
    Engine engine(cfg, topo);

    switch (cfg.scheme) {
    case Scheme::Ccha:
    case Scheme::CchaT1:
    case Scheme::T12Dra:
    case Scheme::T1oDra:
        return evaluate_with_policy(engine, cfg, nullptr);

    case Scheme::FCcha: {
        FixedPowerPolicy policy(0.0);
        return evaluate_with_policy(engine, cfg, &policy);
    }
    case Scheme::Random: {
        RandomSlotPolicy policy(cfg);
        return evaluate_with_policy(engine, cfg, &policy);
    }
    case Scheme::Olpc: {
        OlpcPolicy policy(cfg, topo);
        return evaluate_with_policy(engine, cfg, &policy);
    }
    case Scheme::Cghdrl: {
        const int mc_dim = cfg.m_pairs; // prev power + M-1 observers
        rl::QLearnParams qp;
        qp.gamma = cfg.gamma;
        qp.batch_size = cfg.batch_size;
        qp.adam.lr = cfg.learning_rate;
        Rng init_rng(derive_seed(cfg.seed, "init"));
        rl::CghdqnAgent agent(mc_dim, cfg.rl_hidden, cfg.slu_power_levels, qp,
                              cfg.replay_capacity, cfg.target_sync_steps, init_rng);
        std::vector<rl::UserModel> users(static_cast<std::size_t>(cfg.m_pairs));
        agent.distribute_model(users);

        const bool loaded = !cfg.checkpoint_path.empty() &&
                            std::filesystem::exists(cfg.checkpoint_path) &&
                            load_agent_file(cfg.checkpoint_path, agent);
        if (!loaded && cfg.episodes > 0) {
            Rng train_rng(derive_seed(cfg.seed, "trainupd"));
            RlSlotPolicy policy(cfg, users, true);
            engine.policy = &policy;
            engine.on_model_push = [&](std::int64_t) { agent.distribute_model(users); };
            engine.on_slot = [&](const SlotRecord& r) {
                const bool terminal =
                    r.cot_index + 1 >= static_cast<std::uint64_t>(cfg.episode_cots);
                rl::ExtendedState ext{r.state, r.g};
                agent.store_lower({ext, r.action, r.reward,
                                   rl::ExtendedState{r.next_state, r.g}, terminal});
                agent.update_q1(train_rng);
                agent.store_upper({r.state, r.g, r.reward, r.next_state, terminal});
                agent.update_q2(train_rng);
            };
            for (int ep = 0; ep < cfg.episodes; ++ep) {
                policy.epsilon = rl::epsilon_for_episode(ep, cfg.episodes);
                engine.reset_dynamic(
                    mix_seed(derive_seed(cfg.seed, "train"), static_cast<std::uint64_t>(ep)));
                engine.run_until_cots(static_cast<std::uint64_t>(cfg.episode_cots),
                                      detail::episode_safety_us(cfg));
            }
            if (!cfg.checkpoint_path.empty())
                save_agent_file(cfg.checkpoint_path, agent);
        }
        agent.distribute_model(users);
        RlSlotPolicy greedy(cfg, users, true);
        greedy.epsilon = 0.0;
        return evaluate_with_policy(engine, cfg, &greedy);
    }
    case Scheme::Dqn: {
        const int mc_dim = cfg.m_pairs;
        rl::QLearnParams qp;
        qp.gamma = cfg.gamma;
        qp.batch_size = cfg.batch_size;
        qp.adam.lr = cfg.learning_rate;
        Rng init_rng(derive_seed(cfg.seed, "init"));
        rl::DqnAgent agent(mc_dim, cfg.rl_hidden, cfg.slu_power_levels, qp,
                           cfg.replay_capacity, cfg.target_sync_steps, init_rng);
        std::vector<rl::UserModel> users(static_cast<std::size_t>(cfg.m_pairs));
        for (auto& u : users)
            u.q1 = agent.q();

        const bool loaded = !cfg.checkpoint_path.empty() &&
                            std::filesystem::exists(cfg.checkpoint_path) &&
                            load_agent_file(cfg.checkpoint_path, agent);
        if (!loaded && cfg.episodes > 0) {
            Rng train_rng(derive_seed(cfg.seed, "trainupd"));
            RlSlotPolicy policy(cfg, users, false);
            engine.policy = &policy;
            engine.on_model_push = [&](std::int64_t) {
                for (auto& u : users)
                    u.q1 = agent.q();
            };
            engine.on_slot = [&](const SlotRecord& r) {
                const bool terminal =
                    r.cot_index + 1 >= static_cast<std::uint64_t>(cfg.episode_cots);
                rl::ExtendedState ext{r.state, 1};
                agent.store({ext, r.action, r.reward, rl::ExtendedState{r.next_state, 1},
                             terminal});
                agent.update(train_rng);
            };
            for (int ep = 0; ep < cfg.episodes; ++ep) {
                policy.epsilon = rl::epsilon_for_episode(ep, cfg.episodes);
                engine.reset_dynamic(
                    mix_seed(derive_seed(cfg.seed, "train"), static_cast<std::uint64_t>(ep)));
                engine.run_until_cots(static_cast<std::uint64_t>(cfg.episode_cots),
                                      detail::episode_safety_us(cfg));
            }
            if (!cfg.checkpoint_path.empty())
                save_agent_file(cfg.checkpoint_path, agent);
        }
        for (auto& u : users)
            u.q1 = agent.q();
        RlSlotPolicy greedy(cfg, users, false);
        greedy.epsilon = 0.0;
        return evaluate_with_policy(engine, cfg, &greedy);
    }
    }
    throw std::logic_error("run: unhandled scheme");
}

inline ResultRow to_row(const MetricsReport& r) {
    ResultRow row;
    row.scheme = r.scheme;
    row.m = r.m;
    row.n = r.n;
    row.seed = r.seed;
    row.prr_slu = r.prr_slu;
    row.prr_total = r.prr_total;
    row.throughput_bps = r.slu_throughput_bps;
    row.jain = r.jain;
    row.mean_utility = r.mean_utility;
    row.collisions = r.slu_collisions;
    return row;
}

} // namespace slucoex
