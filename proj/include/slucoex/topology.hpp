#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "slucoex/phy.hpp"
#include "slucoex/rng.hpp"

namespace slucoex {

struct Pos {
    double x = 0.0;
    double y = 0.0;
};

inline double distance(const Pos& a, const Pos& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

struct Topology {
    double area_m = 400.0;
    Pos bs;
    Pos ap;
    std::vector<Pos> slu_tx;
    std::vector<Pos> slu_rx;
    std::vector<Pos> wifi;

    int pairs() const { return static_cast<int>(slu_tx.size()); }
    int wifi_users() const { return static_cast<int>(wifi.size()); }
};

// Uniform placement over the square area; the BS and AP sit at the center and
// each pair's receiver lands uniformly within pair_max_dist of its transmitter.
inline Topology place_nodes(Rng& rng, int m_pairs, int n_wifi, double pair_max_dist_m,
                            double area_m = 400.0) {
    if (m_pairs < 1 || n_wifi < 1)
        throw std::invalid_argument("place_nodes: counts must be >= 1");
    if (!(pair_max_dist_m > 0.0))
        throw std::invalid_argument("place_nodes: pair_max_dist must be > 0");

    Topology t;
    t.area_m = area_m;
    t.bs = {area_m / 2.0, area_m / 2.0};
    t.ap = {area_m / 2.0, area_m / 2.0};

    auto in_area = [area_m](const Pos& p) {
        return p.x >= 0.0 && p.x <= area_m && p.y >= 0.0 && p.y <= area_m;
    };

    for (int m = 0; m < m_pairs; ++m) {
        Pos tx{rng.uniform_real(0.0, area_m), rng.uniform_real(0.0, area_m)};
        Pos rx;
        do {
            const double r = pair_max_dist_m * std::sqrt(rng.uniform());
            const double th = rng.uniform_real(0.0, 2.0 * 3.14159265358979323846);
            rx = {tx.x + r * std::cos(th), tx.y + r * std::sin(th)};
        } while (!in_area(rx) || distance(tx, rx) <= 0.0);
        t.slu_tx.push_back(tx);
        t.slu_rx.push_back(rx);
    }
    for (int n = 0; n < n_wifi; ++n)
        t.wifi.push_back({rng.uniform_real(0.0, area_m), rng.uniform_real(0.0, area_m)});
    return t;
}

// Precomputed linear channel gains from every transmitter to every sensing or
// receiving point. Distances clamp at 1 m (near-field limit of the LOS model).
//
// sources:  [slu_tx 0..M) , wifi 0..N)
// points:   [bs, ap, slu_tx 0..M), slu_rx 0..M), wifi 0..N)
class GainTable {
public:
    GainTable() = default;

    GainTable(const Topology& topo, double carrier_freq_ghz) {
        m_ = topo.pairs();
        n_ = topo.wifi_users();
        sources_.reserve(static_cast<std::size_t>(m_ + n_));
        for (const auto& p : topo.slu_tx)
            sources_.push_back(p);
        for (const auto& p : topo.wifi)
            sources_.push_back(p);

        points_.reserve(static_cast<std::size_t>(2 + 2 * m_ + n_));
        points_.push_back(topo.bs);
        points_.push_back(topo.ap);
        for (const auto& p : topo.slu_tx)
            points_.push_back(p);
        for (const auto& p : topo.slu_rx)
            points_.push_back(p);
        for (const auto& p : topo.wifi)
            points_.push_back(p);

        gain_.assign(sources_.size() * points_.size(), 0.0);
        for (std::size_t s = 0; s < sources_.size(); ++s) {
            for (std::size_t p = 0; p < points_.size(); ++p) {
                const double d = std::max(1.0, distance(sources_[s], points_[p]));
                const double pl = phy::path_loss_db(carrier_freq_ghz, d);
                gain_[s * points_.size() + p] = phy::db_to_linear(-pl);
            }
        }
    }

    int source_slu(int pair) const { return pair; }
    int source_wifi(int w) const { return m_ + w; }
    int point_bs() const { return 0; }
    int point_ap() const { return 1; }
    int point_slu_tx(int pair) const { return 2 + pair; }
    int point_slu_rx(int pair) const { return 2 + m_ + pair; }
    int point_wifi(int w) const { return 2 + 2 * m_ + w; }
    int point_count() const { return 2 + 2 * m_ + n_; }
    int source_count() const { return m_ + n_; }

    double gain(int source, int point) const {
        return gain_[static_cast<std::size_t>(source) * points_.size() +
                     static_cast<std::size_t>(point)];
    }

private:
    int m_ = 0;
    int n_ = 0;
    std::vector<Pos> sources_;
    std::vector<Pos> points_;
    std::vector<double> gain_;
};

} // namespace slucoex
