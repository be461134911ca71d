#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "slucoex/phy.hpp"
#include "slucoex/qnet.hpp"
#include "slucoex/replay.hpp"
#include "slucoex/rng.hpp"

namespace slucoex::rl {

inline constexpr double kSilenceFloorDbm = -120.0;

// Upper-controller state: own power in the previous slot plus the channel
// energy reported by every other SL-U user (BS-collected sensing).
struct McState {
    double prev_power_dbm = kSilenceFloorDbm;
    std::vector<double> channel_energy_dbm;
};

struct ExtendedState {
    McState mc;
    int g = 0;
};

struct LowerTransition {
    ExtendedState s;
    int action = 0;
    double reward = 0.0;
    ExtendedState next;
    bool terminal = false;
};

struct UpperTransition {
    McState s0;
    int g = 0;
    double reward = 0.0;
    McState next;
    bool terminal = false;
};

// dBm values map affinely onto [-1, 1] over [-120, 30] dBm before entering the
// network.
inline double normalize_dbm(double dbm) {
    const double t = (std::clamp(dbm, -120.0, 30.0) + 120.0) / 150.0;
    return 2.0 * t - 1.0;
}

inline std::vector<double> to_input(const McState& s) {
    std::vector<double> x;
    x.reserve(1 + s.channel_energy_dbm.size());
    x.push_back(normalize_dbm(s.prev_power_dbm));
    for (double e : s.channel_energy_dbm)
        x.push_back(normalize_dbm(e));
    return x;
}

inline std::vector<double> to_input(const ExtendedState& s) {
    auto x = to_input(s.mc);
    x.push_back(static_cast<double>(s.g));
    return x;
}

// Eq.-style slot reward: the slot utility if both systems cleared their SINR
// thresholds, its negation otherwise. An absent Wi-Fi SINR means no concurrent
// Wi-Fi transmission and the Wi-Fi condition passes vacuously.
inline double intrinsic_reward(double slu_sinr_db, std::optional<double> wifi_sinr_db,
                               const phy::SinrThresholds& thr, double utility_value) {
    const bool ok = slu_sinr_db >= thr.slu_min_db &&
                    (!wifi_sinr_db || *wifi_sinr_db >= thr.wifi_min_db);
    return ok ? utility_value : -utility_value;
}

inline double extrinsic_reward(std::span<const double> intrinsics) {
    double sum = 0.0;
    for (double r : intrinsics)
        sum += r;
    return sum;
}

// first maximal entry wins, so ties resolve toward the lowest index (g = 0)
inline int argmax_lowest(std::span<const double> q) {
    int best = 0;
    for (int i = 1; i < static_cast<int>(q.size()); ++i)
        if (q[static_cast<std::size_t>(i)] > q[static_cast<std::size_t>(best)])
            best = i;
    return best;
}

inline int epsilon_greedy(const QNetwork& net, std::span<const double> input, double eps,
                          Rng& rng) {
    if (eps > 0.0 && rng.uniform() < eps)
        return static_cast<int>(rng.uniform_int(0, net.output_dim() - 1));
    const auto q = net.forward(input);
    return argmax_lowest(q);
}

inline int select_subgoal(const QNetwork& q2, const McState& s, double eps, Rng& rng) {
    const auto input = to_input(s);
    return epsilon_greedy(q2, input, eps, rng);
}

inline int select_action(const QNetwork& q1, const ExtendedState& s, double eps, Rng& rng) {
    const auto input = to_input(s);
    return epsilon_greedy(q1, input, eps, rng);
}

// Subgoals terminate at the end of the current transmission slot.
inline bool subgoal_termination(bool at_slot_boundary) { return at_slot_boundary; }

// Linear 1 -> 0 exploration schedule over the episode budget.
inline double epsilon_for_episode(int episode_index, int total_episodes) {
    if (total_episodes <= 1)
        return 0.0;
    const double e = 1.0 - static_cast<double>(episode_index) /
                               static_cast<double>(total_episodes - 1);
    return std::clamp(e, 0.0, 1.0);
}

struct QLearnParams {
    double gamma = 0.8;
    int batch_size = 256;
    AdamParams adam;
};

// One fitted-Q step: sample a minibatch, bootstrap targets from the frozen
// target network, descend on the taken-action squared error. No-op until the
// buffer can fill a batch.
template <typename Transition, typename InputFn, typename NextInputFn, typename ActionFn>
bool q_update(QNetwork& q, const QNetwork& target, const ReplayBuffer<Transition>& buffer,
              const QLearnParams& p, Rng& rng, InputFn&& input_of, NextInputFn&& next_input_of,
              ActionFn&& action_of) {
    if (buffer.size() < static_cast<std::size_t>(p.batch_size))
        return false;
    std::vector<TrainSample> batch;
    batch.reserve(static_cast<std::size_t>(p.batch_size));
    for (int k = 0; k < p.batch_size; ++k) {
        const Transition& t = buffer.sample_one(rng);
        TrainSample s;
        s.input = input_of(t);
        s.action = action_of(t);
        double y = t.reward;
        if (!t.terminal) {
            const auto qn = target.forward(next_input_of(t));
            y += p.gamma * *std::max_element(qn.begin(), qn.end());
        }
        s.target = y;
        batch.push_back(std::move(s));
    }
    net_backward_and_adam(q, batch, p.adam);
    q.train_steps += 1;
    return true;
}

// copy every C training steps
inline void sync_target(const QNetwork& q, QNetwork& target, int sync_period) {
    if (sync_period >= 1 && q.train_steps > 0 &&
        q.train_steps % static_cast<std::uint64_t>(sync_period) == 0)
        copy_parameters(q, target);
}

// ---------------------------------------------------------------------------
// Two-level controller trained centrally; inference copies are pushed to the
// users on the model-update cadence.
// ---------------------------------------------------------------------------
struct UserModel {
    QNetwork q1;
    QNetwork q2;
    std::uint64_t version = 0;
};

class CghdqnAgent {
public:
    CghdqnAgent(int mc_dim, const std::vector<int>& hidden, int n_actions,
                const QLearnParams& params, int replay_capacity, int sync_period, Rng& rng)
        : params_(params),
          sync_period_(sync_period),
          d1_(static_cast<std::size_t>(replay_capacity)),
          d2_(static_cast<std::size_t>(replay_capacity)) {
        q1_ = make_q_network(mc_dim + 1, hidden, n_actions, rng);
        q2_ = make_q_network(mc_dim, hidden, 2, rng);
        q1_target_ = q1_;
        q2_target_ = q2_;
    }

    int n_actions() const { return q1_.output_dim(); }

    int select_g(const McState& s, double eps, Rng& rng) const {
        return select_subgoal(q2_, s, eps, rng);
    }
    int select_a(const ExtendedState& s, double eps, Rng& rng) const {
        return select_action(q1_, s, eps, rng);
    }

    void store_lower(LowerTransition t) { d1_.push(std::move(t)); }
    void store_upper(UpperTransition t) { d2_.push(std::move(t)); }

    bool update_q1(Rng& rng) {
        const bool did = q_update(q1_, q1_target_, d1_, params_, rng,
                                  [](const LowerTransition& t) { return to_input(t.s); },
                                  [](const LowerTransition& t) { return to_input(t.next); },
                                  [](const LowerTransition& t) { return t.action; });
        if (did)
            sync_target(q1_, q1_target_, sync_period_);
        return did;
    }

    bool update_q2(Rng& rng) {
        const bool did = q_update(q2_, q2_target_, d2_, params_, rng,
                                  [](const UpperTransition& t) { return to_input(t.s0); },
                                  [](const UpperTransition& t) { return to_input(t.next); },
                                  [](const UpperTransition& t) { return t.g; });
        if (did)
            sync_target(q2_, q2_target_, sync_period_);
        return did;
    }

    UserModel snapshot() const {
        UserModel m;
        m.q1 = q1_;
        m.q2 = q2_;
        m.version = q1_.train_steps + q2_.train_steps;
        return m;
    }

    // Value-equal copies of the BS model land at every user.
    void distribute_model(std::vector<UserModel>& users) const {
        const UserModel m = snapshot();
        for (auto& u : users)
            u = m;
    }

    const QNetwork& q1() const { return q1_; }
    const QNetwork& q2() const { return q2_; }
    const QNetwork& q1_target() const { return q1_target_; }
    const QNetwork& q2_target() const { return q2_target_; }
    QNetwork& mutable_q1() { return q1_; }
    QNetwork& mutable_q2() { return q2_; }
    void set_targets(QNetwork q1_t, QNetwork q2_t) {
        q1_target_ = std::move(q1_t);
        q2_target_ = std::move(q2_t);
    }
    const ReplayBuffer<LowerTransition>& d1() const { return d1_; }
    const ReplayBuffer<UpperTransition>& d2() const { return d2_; }
    const QLearnParams& params() const { return params_; }

private:
    QLearnParams params_;
    int sync_period_;
    QNetwork q1_, q1_target_, q2_, q2_target_;
    ReplayBuffer<LowerTransition> d1_;
    ReplayBuffer<UpperTransition> d2_;
};

// Flat single-controller variant: power selection only, channel access always on.
class DqnAgent {
public:
    DqnAgent(int mc_dim, const std::vector<int>& hidden, int n_actions,
             const QLearnParams& params, int replay_capacity, int sync_period, Rng& rng)
        : params_(params), sync_period_(sync_period),
          d_(static_cast<std::size_t>(replay_capacity)) {
        q_ = make_q_network(mc_dim, hidden, n_actions, rng);
        target_ = q_;
    }

    int select(const McState& s, double eps, Rng& rng) const {
        const auto input = to_input(s);
        return epsilon_greedy(q_, input, eps, rng);
    }

    void store(LowerTransition t) { d_.push(std::move(t)); }

    bool update(Rng& rng) {
        const bool did = q_update(q_, target_, d_, params_, rng,
                                  [](const LowerTransition& t) { return to_input(t.s.mc); },
                                  [](const LowerTransition& t) { return to_input(t.next.mc); },
                                  [](const LowerTransition& t) { return t.action; });
        if (did)
            sync_target(q_, target_, sync_period_);
        return did;
    }

    const QNetwork& q() const { return q_; }
    const QNetwork& target() const { return target_; }
    QNetwork& mutable_q() { return q_; }
    void set_target(QNetwork t) { target_ = std::move(t); }
    const ReplayBuffer<LowerTransition>& d() const { return d_; }

private:
    QLearnParams params_;
    int sync_period_;
    QNetwork q_, target_;
    ReplayBuffer<LowerTransition> d_;
};

// ---------------------------------------------------------------------------
// Abstract slot-granular environment, one subgoal per slot. Used by the
// training-loop tests; the full simulator drives the agent directly from its
// event loop with the same store/update primitives.
// ---------------------------------------------------------------------------
struct EnvStep {
    McState next;
    double reward = 0.0;
    bool terminal = false;
};

class SubgoalEnv {
public:
    virtual ~SubgoalEnv() = default;
    virtual McState reset() = 0;
    virtual EnvStep step(int g, int action) = 0;
    // number of lower-level steps forming one subgoal episode (>= 1)
    virtual int steps_per_subgoal() const { return 1; }
};

// One outer episode of the nested two-level loop: the upper controller picks a
// subgoal, the lower controller acts until the subgoal terminates, replay and
// updates run on every transition.
inline void run_training_episode(SubgoalEnv& env, CghdqnAgent& agent, double eps1,
                                 double eps2, Rng& rng, int max_slots) {
    McState s = env.reset();
    int slots = 0;
    bool terminal = false;
    while (!terminal && slots < max_slots) {
        const int g = agent.select_g(s, eps2, rng);
        const McState s0 = s;
        std::vector<double> intrinsics;
        for (int k = 0; k < env.steps_per_subgoal(); ++k) {
            const ExtendedState ext{s, g};
            const int a = agent.select_a(ext, eps1, rng);
            const EnvStep result = env.step(g, a);
            agent.store_lower({ext, a, result.reward, ExtendedState{result.next, g},
                               result.terminal});
            agent.update_q1(rng);
            intrinsics.push_back(result.reward);
            s = result.next;
            terminal = result.terminal;
            ++slots;
            if (terminal)
                break;
        }
        agent.store_upper({s0, g, extrinsic_reward(intrinsics), s, terminal});
        agent.update_q2(rng);
    }
}

} // namespace slucoex::rl
