#pragma once

#include <unordered_map>
#include <unordered_set>

#include "hgame/common.hpp"
#include "hgame/game_graph.hpp"
#include "hgame/layering.hpp"

namespace hgame {

enum class Provenance { Computed, Declared };

// Game graph of an abstraction layer. `g` carries the effective transition
// maps used for solving (including seriality-repair self-loops, listed in
// `repairs`); `raw` holds the maps exactly as realized by projected plays.
struct AbstractGameGraph {
    Layer layer = 0;
    Provenance provenance = Provenance::Computed;
    GameGraph g;
    GameGraph raw;
    std::vector<StatePair> repairs;        // (x,y) where a sys self-loop was added
    std::vector<StatePair> nonserial_sys;  // empty sys image and no admissible self-loop
    std::vector<StatePair> nonserial_env;  // empty env image (unreachable abstract state)
};

// { nu' != nu | exists x with nu' in sys_trans(x, nu) }
inline std::vector<SysState> post(const GameGraph& g, SysState nu) {
    std::vector<SysState> out;
    for (EnvState x = 0; x < g.num_env; ++x)
        for (SysState yn : g.sys_succ(x, nu))
            if (yn != nu) out.push_back(yn);
    sort_unique(out);
    return out;
}

inline std::vector<SysState> post(const AbstractGameGraph& agg, SysState nu) {
    return post(agg.g, nu);
}

namespace detail {

// Env states that can appear as the environment's move at some system state y,
// i.e. the union of env_trans(.,y) images.
inline std::vector<EnvState> env_move_set(const GameGraph& g, SysState y) {
    std::vector<EnvState> out;
    for (EnvState x = 0; x < g.num_env; ++x)
        for (EnvState xn : g.env_succ(x, y)) out.push_back(xn);
    sort_unique(out);
    return out;
}

}  // namespace detail

// Builds the layer-l abstract game graph from the layer-(l-1) graph. The
// transition maps collect exactly the transitions realizable by projected
// plays of the layer below:
//   - sys: an abstract change y->y' is realized by a one-step exit of the
//     abstraction class, keyed by the abstract env value at the exit tick
//     (computed against the pre-exit system state);
//   - env: every abstract env value observable while the play remains in the
//     class of y, explored from the class states that can begin a segment
//     (in-class starts and entry states of cross-class steps, keyed by the
//     abstract env value recorded for them in a projected play).
// Abstract states with an empty sys image get a self-loop when the layer
// below admits staying in the class forever; otherwise they are reported.
inline AbstractGameGraph build_agg(const GameGraph& below, const Layering& lay, Layer l) {
    require(l >= 1 && l <= lay.depth, Errc::LayerOutOfRange, "build_agg layer");
    const auto& ry = lay.ry[l];
    const auto& rx = lay.rx[l];
    const int nx_lo = lay.num_env[l - 1];
    const int ny_lo = lay.num_sys[l - 1];
    const int nx = lay.num_env[l];
    const int ny = lay.num_sys[l];
    require(nx_lo == below.num_env && ny_lo == below.num_sys, Errc::BadArgument,
            "build_agg: layering does not match the graph below");

    auto rxv = [&](EnvState x, SysState y) { return rx[static_cast<size_t>(x) * ny_lo + y]; };

    AbstractGameGraph agg;
    agg.layer = l;
    agg.raw = GameGraph(nx, ny);
    agg.raw.num_env = nx;
    agg.raw.num_sys = ny;

    std::vector<std::vector<SysState>> cls(ny);
    for (SysState y = 0; y < ny_lo; ++y) cls[ry[y]].push_back(y);

    std::vector<std::vector<EnvState>> moves(ny_lo);
    for (SysState y = 0; y < ny_lo; ++y) moves[y] = detail::env_move_set(below, y);

    // Sys transitions: one-step class exits.
    for (SysState yh = 0; yh < ny; ++yh)
        for (SysState y : cls[yh])
            for (EnvState xm : moves[y])
                for (SysState yn : below.sys_succ(xm, y))
                    if (ry[yn] != yh) agg.raw.add_sys(rxv(xm, y), yh, ry[yn]);

    // Env transitions: per abstract (xh,yh), forward-explore in-class pairs.
    for (SysState yh = 0; yh < ny; ++yh) {
        const auto& C = cls[yh];
        if (C.empty()) continue;
        std::vector<char> in_class(ny_lo, 0);
        for (SysState y : C) in_class[y] = 1;

        // Start pairs per abstract env value: own-lift starts plus entry states.
        std::vector<std::vector<StatePair>> starts(nx);
        for (SysState y : C)
            for (EnvState x = 0; x < nx_lo; ++x) starts[rxv(x, y)].push_back({x, y});
        for (SysState yp = 0; yp < ny_lo; ++yp) {
            if (in_class[yp]) continue;
            for (EnvState xm : moves[yp])
                for (SysState y : below.sys_succ(xm, yp))
                    if (in_class[y]) starts[rxv(xm, yp)].push_back({xm, y});
        }

        for (EnvState xh = 0; xh < nx; ++xh) {
            if (starts[xh].empty()) continue;
            std::vector<char> seen(static_cast<size_t>(nx_lo) * ny_lo, 0);
            std::vector<StatePair> stack;
            for (auto [x, y] : starts[xh]) {
                size_t id = static_cast<size_t>(x) * ny_lo + y;
                if (!seen[id]) {
                    seen[id] = 1;
                    stack.push_back({x, y});
                }
            }
            while (!stack.empty()) {
                auto [x, y] = stack.back();
                stack.pop_back();
                for (EnvState xn : below.env_succ(x, y)) {
                    agg.raw.add_env(xh, yh, rxv(xn, y));
                    for (SysState yn : below.sys_succ(xn, y)) {
                        if (!in_class[yn]) continue;
                        size_t id = static_cast<size_t>(xn) * ny_lo + yn;
                        if (!seen[id]) {
                            seen[id] = 1;
                            stack.push_back({xn, yn});
                        }
                    }
                }
            }
        }
    }

    // Seriality repair: a self-loop is admissible at (xh,yh) iff some start of
    // that abstract state can stay in the class forever (greatest fixpoint of
    // "has an in-class successor pair").
    agg.g = agg.raw;
    for (SysState yh = 0; yh < ny; ++yh) {
        const auto& C = cls[yh];
        std::vector<char> in_class(ny_lo, 0);
        for (SysState y : C) in_class[y] = 1;
        // gfp over in-class pairs
        std::unordered_set<int64_t> core;
        for (SysState y : C)
            for (EnvState x = 0; x < nx_lo; ++x) core.insert((int64_t)x * ny_lo + y);
        bool changed = true;
        while (changed) {
            changed = false;
            for (auto it = core.begin(); it != core.end();) {
                EnvState x = (EnvState)(*it / ny_lo);
                SysState y = (SysState)(*it % ny_lo);
                bool has = false;
                for (EnvState xn : below.env_succ(x, y)) {
                    for (SysState yn : below.sys_succ(xn, y))
                        if (in_class[yn] && core.count((int64_t)xn * ny_lo + yn)) {
                            has = true;
                            break;
                        }
                    if (has) break;
                }
                if (!has) {
                    it = core.erase(it);
                    changed = true;
                } else {
                    ++it;
                }
            }
        }
        for (EnvState xh = 0; xh < nx; ++xh) {
            if (!agg.g.sys_succ(xh, yh).empty()) continue;
            bool admissible = false;
            if (!C.empty())
                for (SysState y : C) {
                    for (EnvState x = 0; x < nx_lo && !admissible; ++x)
                        if (rxv(x, y) == xh && core.count((int64_t)x * ny_lo + y)) admissible = true;
                    if (admissible) break;
                }
            // entry starts also qualify
            if (!admissible)
                for (SysState yp = 0; yp < ny_lo && !admissible; ++yp) {
                    if (in_class[yp]) continue;
                    for (EnvState xm : moves[yp]) {
                        if (rxv(xm, yp) != xh) continue;
                        for (SysState y : below.sys_succ(xm, yp))
                            if (in_class[y] && core.count((int64_t)xm * ny_lo + y)) {
                                admissible = true;
                                break;
                            }
                        if (admissible) break;
                    }
                }
            if (admissible) {
                agg.g.add_sys(xh, yh, yh);
                agg.repairs.push_back({xh, yh});
            } else {
                agg.nonserial_sys.push_back({xh, yh});
            }
        }
    }
    for (EnvState xh = 0; xh < nx; ++xh)
        for (SysState yh = 0; yh < ny; ++yh)
            if (agg.g.env_succ(xh, yh).empty()) agg.nonserial_env.push_back({xh, yh});
    return agg;
}

// Layer-l game restricted to context nu in Y^(l+1): inner states are the
// abstraction preimage of nu, outer states the one-step exits into post
// contexts; transition maps are context-restricted and env-projected.
struct LocalGameGraph {
    Layer layer = 0;
    SysState context = -1;  // -1: whole-graph wrapper (top layer)
    int full_env = 0, full_sys = 0;

    std::vector<SysState> inner, outer;   // sorted, disjoint
    std::vector<EnvState> env_states;     // image of r^l_nu, sorted
    std::vector<char> inner_mask, outer_mask;

    std::unordered_map<int64_t, std::vector<EnvState>> env_t;
    std::unordered_map<int64_t, std::vector<SysState>> sys_t;

    int64_t key(EnvState x, SysState y) const { return (int64_t)x * full_sys + y; }

    const std::vector<EnvState>& env_succ(EnvState x, SysState y) const {
        static const std::vector<EnvState> none;
        auto it = env_t.find(key(x, y));
        return it == env_t.end() ? none : it->second;
    }
    const std::vector<SysState>& sys_succ(EnvState x, SysState y) const {
        static const std::vector<SysState> none;
        auto it = sys_t.find(key(x, y));
        return it == sys_t.end() ? none : it->second;
    }
    bool is_inner(SysState y) const { return y >= 0 && y < full_sys && inner_mask[y]; }
    bool is_outer(SysState y) const { return y >= 0 && y < full_sys && outer_mask[y]; }

    void add_env(EnvState x, SysState y, EnvState xn) {
        auto& v = env_t[key(x, y)];
        auto it = std::lower_bound(v.begin(), v.end(), xn);
        if (it == v.end() || *it != xn) v.insert(it, xn);
    }
    void add_sys(EnvState x, SysState y, SysState yn) {
        auto& v = sys_t[key(x, y)];
        auto it = std::lower_bound(v.begin(), v.end(), yn);
        if (it == v.end() || *it != yn) v.insert(it, yn);
    }

    // Whole-graph view used for the top layer: every state inner, no exits.
    static LocalGameGraph whole(const GameGraph& g, Layer layer) {
        LocalGameGraph lgg;
        lgg.layer = layer;
        lgg.context = -1;
        lgg.full_env = g.num_env;
        lgg.full_sys = g.num_sys;
        lgg.inner_mask.assign(g.num_sys, 1);
        lgg.outer_mask.assign(g.num_sys, 0);
        for (SysState y = 0; y < g.num_sys; ++y) lgg.inner.push_back(y);
        for (EnvState x = 0; x < g.num_env; ++x) lgg.env_states.push_back(x);
        for (EnvState x = 0; x < g.num_env; ++x)
            for (SysState y = 0; y < g.num_sys; ++y) {
                if (!g.env_succ(x, y).empty()) lgg.env_t[lgg.key(x, y)] = g.env_succ(x, y);
                if (!g.sys_succ(x, y).empty()) lgg.sys_t[lgg.key(x, y)] = g.sys_succ(x, y);
            }
        return lgg;
    }
};

inline LocalGameGraph build_lgg(const GameGraph& gl, const Layering& lay, Layer l, SysState nu) {
    require(l >= 0 && l < lay.depth, Errc::LayerOutOfRange, "build_lgg layer");
    const auto& ry_up = lay.ry[l + 1];
    const int ny = lay.num_sys[l];
    const int nx = lay.num_env[l];
    require(gl.num_sys == ny && gl.num_env == nx, Errc::BadArgument, "build_lgg: graph/layer mismatch");

    LocalGameGraph lgg;
    lgg.layer = l;
    lgg.context = nu;
    lgg.full_env = nx;
    lgg.full_sys = ny;
    lgg.inner_mask.assign(ny, 0);
    lgg.outer_mask.assign(ny, 0);

    for (SysState y = 0; y < ny; ++y)
        if (ry_up[y] == nu) {
            lgg.inner.push_back(y);
            lgg.inner_mask[y] = 1;
        }
    require(!lgg.inner.empty(), Errc::EmptyContext,
            "context " + std::to_string(nu) + " has no inner states");

    for (EnvState x = 0; x < nx; ++x) lgg.env_states.push_back(lay.restrict_env(l, nu, x));
    sort_unique(lgg.env_states);
    std::vector<char> xnu_mask(nx, 0);
    for (EnvState x : lgg.env_states) xnu_mask[x] = 1;

    // Outer states: one-step exits into other contexts under context-restricted
    // env states. Exit targets always lie in post contexts of nu at the layer
    // above, so this reads the outer set off gl directly.
    for (SysState y : lgg.inner)
        for (EnvState x : lgg.env_states)
            for (SysState yn : gl.sys_succ(x, y))
                if (!lgg.inner_mask[yn] && !lgg.outer_mask[yn]) {
                    lgg.outer_mask[yn] = 1;
                    lgg.outer.push_back(yn);
                }
    sort_unique(lgg.outer);

    // Transition maps: env projected through r^l_nu, sys filtered to Y_nu.
    for (SysState y : lgg.inner)
        for (EnvState x = 0; x < nx; ++x) {
            EnvState xr = lay.restrict_env(l, nu, x);
            for (EnvState xn : gl.env_succ(x, y)) lgg.add_env(xr, y, lay.restrict_env(l, nu, xn));
            for (SysState yn : gl.sys_succ(x, y))
                if (lgg.inner_mask[yn] || lgg.outer_mask[yn]) lgg.add_sys(xr, y, yn);
        }
    return lgg;
}

struct LocalityViolation {
    SysState context;
    EnvState x;
    SysState y;
    SysState y_next;
};

// Assumption-1 check: system moves inside a context must survive restriction
// of the environment state. Empty list iff the layer is truly local.
inline std::vector<LocalityViolation> check_locality(const GameGraph& gl, const Layering& lay,
                                                     Layer l) {
    std::vector<LocalityViolation> out;
    if (l >= lay.depth) return out;
    const auto& ry_up = lay.ry[l + 1];
    for (SysState y = 0; y < gl.num_sys; ++y) {
        SysState nu = ry_up[y];
        for (EnvState x = 0; x < gl.num_env; ++x) {
            EnvState xr = lay.restrict_env(l, nu, x);
            if (xr == x) continue;
            const auto& full = gl.sys_succ(x, y);
            const auto& restr = gl.sys_succ(xr, y);
            for (SysState yn : full)
                if (!std::binary_search(restr.begin(), restr.end(), yn))
                    out.push_back({nu, x, y, yn});
        }
    }
    return out;
}

}  // namespace hgame
