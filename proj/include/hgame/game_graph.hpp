#pragma once

#include <algorithm>
#include <cassert>
#include <memory>

#include "hgame/common.hpp"

namespace hgame {

// Bipartite serial two-player transition structure. The environment moves
// first in every round: x(k) in env_trans(x(k-1), y(k-1)), then the system
// replies with y(k) in sys_trans(x(k), y(k-1)).
struct GameGraph {
    int num_env = 0;
    int num_sys = 0;
    std::vector<std::string> env_labels;  // optional, may be empty
    std::vector<std::string> sys_labels;

    // Adjacency tables indexed by x*num_sys + y; successor lists kept sorted.
    std::vector<std::vector<EnvState>> env_trans;
    std::vector<std::vector<SysState>> sys_trans;

    GameGraph() = default;
    GameGraph(int nx, int ny)
        : num_env(nx), num_sys(ny),
          env_trans(static_cast<size_t>(nx) * ny),
          sys_trans(static_cast<size_t>(nx) * ny) {}

    size_t slot(EnvState x, SysState y) const {
        assert(x >= 0 && x < num_env && y >= 0 && y < num_sys);
        return static_cast<size_t>(x) * num_sys + y;
    }
    const std::vector<EnvState>& env_succ(EnvState x, SysState y) const {
        return env_trans[slot(x, y)];
    }
    const std::vector<SysState>& sys_succ(EnvState x, SysState y) const {
        return sys_trans[slot(x, y)];
    }
    void add_env(EnvState x, SysState y, EnvState xn) {
        auto& v = env_trans[slot(x, y)];
        auto it = std::lower_bound(v.begin(), v.end(), xn);
        if (it == v.end() || *it != xn) v.insert(it, xn);
    }
    void add_sys(EnvState x, SysState y, SysState yn) {
        auto& v = sys_trans[slot(x, y)];
        auto it = std::lower_bound(v.begin(), v.end(), yn);
        if (it == v.end() || *it != yn) v.insert(it, yn);
    }

    std::string env_name(EnvState x) const {
        return (x >= 0 && x < (int)env_labels.size()) ? env_labels[x] : "x" + std::to_string(x);
    }
    std::string sys_name(SysState y) const {
        return (y >= 0 && y < (int)sys_labels.size()) ? sys_labels[y] : "y" + std::to_string(y);
    }
};

struct SerialViolation {
    EnvState x;
    SysState y;
    bool env_side;  // true: empty env_trans image, false: empty sys_trans image
};

struct SerialReport {
    std::vector<SerialViolation> violations;
    bool ok() const { return violations.empty(); }
};

// Lists every (x,y) whose env or sys image is empty; empty report iff serial.
inline SerialReport validate_serial(const GameGraph& g) {
    SerialReport rep;
    for (EnvState x = 0; x < g.num_env; ++x)
        for (SysState y = 0; y < g.num_sys; ++y) {
            if (g.env_succ(x, y).empty()) rep.violations.push_back({x, y, true});
            if (g.sys_succ(x, y).empty()) rep.violations.push_back({x, y, false});
        }
    return rep;
}

// True iff every consecutive step satisfies the play condition
// x(k) in env_trans(x(k-1),y(k-1)) and y(k) in sys_trans(x(k),y(k-1)).
// Length-1 sequences are plays vacuously.
inline bool is_play(const GameGraph& g, const Play& seq) {
    if (seq.empty()) return false;
    for (size_t k = 1; k < seq.size(); ++k) {
        auto [xp, yp] = seq[k - 1];
        auto [x, y] = seq[k];
        if (x < 0 || x >= g.num_env || y < 0 || y >= g.num_sys) return false;
        if (xp < 0 || xp >= g.num_env || yp < 0 || yp >= g.num_sys) return false;
        const auto& ex = g.env_succ(xp, yp);
        if (!std::binary_search(ex.begin(), ex.end(), x)) return false;
        const auto& sy = g.sys_succ(x, yp);
        if (!std::binary_search(sy.begin(), sy.end(), y)) return false;
    }
    return true;
}

// Partial decision rule of the system: history is a nonempty play prefix, the
// environment has already moved to x; returns the reply or nothing when the
// strategy is undefined at this input.
struct SystemStrategy {
    virtual ~SystemStrategy() = default;
    virtual std::optional<SysState> choose(const Play& history, EnvState x) = 0;
};

// Total decision rule of the environment.
struct EnvStrategy {
    virtual ~EnvStrategy() = default;
    virtual EnvState choose(const Play& history) = 0;
};

enum class StopReason { HorizonReached, Blocked };

struct CompliantResult {
    Play play;
    StopReason reason;
};

// Extends init step by step: x(k) from the environment strategy, y(k) from the
// system strategy; stops after `horizon` extension steps or earlier with
// Blocked when the system strategy is undefined at (history, x(k)). The
// pending env move of a blocked step is discarded, so the result is always a
// play whose last completed pair came from both strategies.
inline CompliantResult compliant_play(const GameGraph& g, SystemStrategy& f, EnvStrategy& e,
                                      const Play& init, int horizon) {
    require(is_play(g, init), Errc::InitNotAPlay, "compliant_play: init prefix is not a play");
    CompliantResult res{init, StopReason::HorizonReached};
    for (int step = 0; step < horizon; ++step) {
        EnvState x = e.choose(res.play);
        auto y = f.choose(res.play, x);
        if (!y) {
            res.reason = StopReason::Blocked;
            return res;
        }
        res.play.emplace_back(x, *y);
    }
    return res;
}

}  // namespace hgame
