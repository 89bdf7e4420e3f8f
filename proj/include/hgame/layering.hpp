#pragma once

#include <algorithm>

#include "hgame/common.hpp"
#include "hgame/game_graph.hpp"

namespace hgame {

// Stack of abstraction maps over a base game. Layer 0 is the base; for each
// l in [1,L], ry[l] abstracts system states Y^(l-1) -> Y^l and rx[l] abstracts
// (X^(l-1) x Y^(l-1)) -> X^l. Context restriction maps r^l_nu project a
// layer-l environment state onto the part relevant to context nu in Y^(l+1);
// r^L is the identity.
struct Layering {
    int depth = 0;                      // L
    std::vector<int> num_env, num_sys;  // sizes per layer 0..L

    std::vector<std::vector<SysState>> ry;  // ry[l][y_{l-1}] for l in 1..L (index 0 unused)
    std::vector<std::vector<EnvState>> rx;  // rx[l][x_{l-1}*num_sys[l-1]+y_{l-1}]

    // restr[l][nu][x] for l in 0..L-1, nu in Y^(l+1); empty restr[l][nu] means identity.
    std::vector<std::vector<std::vector<EnvState>>> restr;

    void check_layer(Layer l) const {
        require(l >= 0 && l <= depth, Errc::LayerOutOfRange, "layer " + std::to_string(l));
    }

    SysState lift_sys_one(Layer l, SysState y) const { return ry[l][y]; }

    SysState lift_sys(Layer l, SysState y) const {
        check_layer(l);
        for (Layer j = 1; j <= l; ++j) y = ry[j][y];
        return y;
    }

    // Composition Rx^l(Rx^(l-1)(..., Ry^(l-2)(y)), Ry^(l-1)(y)): the system
    // argument consumed at each layer is the lift of the same base y.
    StatePair lift(Layer l, EnvState x, SysState y) const {
        check_layer(l);
        for (Layer j = 1; j <= l; ++j) {
            x = rx[j][static_cast<size_t>(x) * num_sys[j - 1] + y];
            y = ry[j][y];
        }
        return {x, y};
    }

    EnvState restrict_env(Layer l, SysState nu, EnvState x) const {
        check_layer(l);
        if (l == depth) return x;  // identity at the top
        const auto& t = restr[l][nu];
        return t.empty() ? x : t[x];
    }

    static Layering identity_over(const GameGraph& g) {
        Layering lay;
        lay.depth = 0;
        lay.num_env = {g.num_env};
        lay.num_sys = {g.num_sys};
        lay.ry.resize(1);
        lay.rx.resize(1);
        return lay;
    }
};

// Pointwise lifting of a play: x^l(k) = Rx-up(x(k), y(k-1)) for k >= 1 and
// x^l(0) = Rx-up(x(0), y(0)).
inline Play abstract_play(const Layering& lay, const Play& pi, Layer l) {
    lay.check_layer(l);
    Play out;
    out.reserve(pi.size());
    for (size_t k = 0; k < pi.size(); ++k) {
        SysState yprev = (k == 0) ? pi[0].second : pi[k - 1].second;
        out.push_back(lay.lift(l, pi[k].first, yprev));
        out.back().second = lay.lift_sys(l, pi[k].second);
    }
    return out;
}

// Trigger indices of an abstract system sequence: kappa(0)=0 and kappa lists
// exactly the positions where the value changes from its value at the
// previous trigger.
inline std::vector<int> timescale(const std::vector<SysState>& yl) {
    require(!yl.empty(), Errc::BadArgument, "timescale of empty sequence");
    std::vector<int> kappa{0};
    for (size_t k = 1; k < yl.size(); ++k)
        if (yl[k] != yl[kappa.back()]) kappa.push_back((int)k);
    return kappa;
}

// Projected play: the abstract play sampled at its timescale. kappa^0 is the
// identity by definition, so the layer-0 projection is the play itself.
inline Play project(const Layering& lay, const Play& pi, Layer l) {
    Play abs = abstract_play(lay, pi, l);
    if (l == 0) return abs;
    std::vector<SysState> ys(abs.size());
    for (size_t i = 0; i < abs.size(); ++i) ys[i] = abs[i].second;
    Play out;
    for (int k : timescale(ys)) out.push_back(abs[k]);
    return out;
}

// Position in the layer-l projected play of the k-th event of layer l+1:
// (kappa_l)^{-1}(kappa_{l+1}(k)). A miss means a broken nesting invariant.
inline int kappa_between(const std::vector<int>& kappa_l, const std::vector<int>& kappa_lp1, int k) {
    require(k >= 0 && k < (int)kappa_lp1.size(), Errc::BadArgument, "kappa index");
    int target = kappa_lp1[k];
    auto it = std::lower_bound(kappa_l.begin(), kappa_l.end(), target);
    require(it != kappa_l.end() && *it == target, Errc::RangeViolation,
            "kappa^(l+1) value " + std::to_string(target) + " not in range of kappa^l");
    return (int)(it - kappa_l.begin());
}

// Incrementally maintained projections of one play: abstract states, trigger
// times, projected plays, their context-restricted variants, and the segment
// boundaries induced by the layer above. Append cost is O(L) per step.
struct ProjectionBundle {
    const Layering* lay = nullptr;
    int steps = 0;  // |play|

    std::vector<std::vector<int>> kappa;  // [l] trigger indices into the play
    std::vector<Play> proj;               // p-breve^l, unrestricted
    std::vector<Play> proj_restricted;    // p-breve-down^l
    std::vector<std::vector<int>> seg_start;  // [l] kappa^(l+1) positions as layer-l indices
    std::vector<SysState> cur_sys;        // y^l(k) per layer

    void init(const Layering& layering, EnvState x0, SysState y0) {
        lay = &layering;
        int L = lay->depth;
        steps = 1;
        kappa.assign(L + 1, {0});
        proj.assign(L + 1, {});
        proj_restricted.assign(L + 1, {});
        seg_start.assign(L + 1, {0});
        cur_sys.assign(L + 1, 0);
        for (Layer l = 0; l <= L; ++l) {
            auto [xl, yl] = lay->lift(l, x0, y0);
            cur_sys[l] = yl;
            proj[l].push_back({xl, yl});
            // Element 0 is restricted w.r.t. the initial context y^(l+1)(0).
            EnvState xr = (l == L) ? xl : lay->restrict_env(l, lay->lift_sys(l + 1, y0), xl);
            proj_restricted[l].push_back({xr, yl});
        }
    }

    // Lifts a pending env move against the current state: xs[l] is the
    // abstract env state, xr[l] its restriction to the current context.
    void lift_env_now(EnvState x, std::vector<EnvState>& xs, std::vector<EnvState>& xr) const {
        int L = lay->depth;
        xs.assign(L + 1, 0);
        xr.assign(L + 1, 0);
        xs[0] = x;
        for (Layer l = 1; l <= L; ++l)
            xs[l] = lay->rx[l][static_cast<size_t>(xs[l - 1]) * lay->num_sys[l - 1] + cur_sys[l - 1]];
        for (Layer l = 0; l <= L; ++l)
            xr[l] = (l == L) ? xs[l] : lay->restrict_env(l, cur_sys[l + 1], xs[l]);
    }

    void append(EnvState x, SysState y) {
        int L = lay->depth;
        int k = steps;
        std::vector<EnvState> xs, xr;
        lift_env_now(x, xs, xr);
        std::vector<SysState> ys(L + 1);
        ys[0] = y;
        for (Layer l = 1; l <= L; ++l) ys[l] = lay->ry[l][ys[l - 1]];
        for (Layer l = 0; l <= L; ++l) {
            // kappa^0 is the identity: layer 0 records every step. Higher
            // layers trigger on abstract sys changes (downward closed).
            if (l > 0 && ys[l] == cur_sys[l]) break;
            kappa[l].push_back(k);
            proj[l].push_back({xs[l], ys[l]});
            proj_restricted[l].push_back({xr[l], ys[l]});
            if (l + 1 <= L && ys[l + 1] != cur_sys[l + 1])
                seg_start[l].push_back((int)proj[l].size() - 1);
        }
        for (Layer l = 0; l <= L; ++l) cur_sys[l] = ys[l];
        ++steps;
    }

    // Number of local projected plays at layer l; equals |p-breve^(l+1)| for
    // l < L and 1 at the top.
    int num_segments(Layer l) const {
        return (l == lay->depth) ? 1 : (int)proj[l + 1].size();
    }

    // Segment m at layer l; consecutive segments overlap by one element.
    Play segment(Layer l, int m) const {
        lay->check_layer(l);
        if (l == lay->depth) {
            require(m == 0, Errc::BadArgument, "top layer has a single segment");
            return proj_restricted[l];
        }
        require(m >= 0 && m < num_segments(l), Errc::BadArgument, "segment index");
        int lo = seg_start[l][m];
        int hi = (m + 1 < (int)seg_start[l].size()) ? seg_start[l][m + 1]
                                                    : (int)proj_restricted[l].size() - 1;
        return Play(proj_restricted[l].begin() + lo, proj_restricted[l].begin() + hi + 1);
    }

    // Segment m viewed as a play of its own context's local game graph: the
    // overlap element is printed with the left context's restriction, but as
    // the first state of the new local game it carries the current context's
    // restriction of the (unrestricted) abstract env state.
    Play segment_local(Layer l, int m) const {
        Play seg = segment(l, m);
        if (l == lay->depth) return seg;
        int lo = seg_start[l][m];
        SysState nu = proj[l + 1][m].second;
        seg.front().first = lay->restrict_env(l, nu, proj[l][lo].first);
        return seg;
    }

    // The context-restricted local history: the last segment.
    Play local_history(Layer l) const { return segment(l, num_segments(l) - 1); }

    // The local history as a play of the current context's local game.
    Play local_history_play(Layer l) const { return segment_local(l, num_segments(l) - 1); }

    SysState context_of(Layer l) const {
        // Current context of layer l  =  y^(l+1)(k); sentinel -1 at the top.
        return (l == lay->depth) ? -1 : cur_sys[l + 1];
    }
};

// Whole-play localization.
inline ProjectionBundle localize(const Layering& lay, const Play& pi) {
    require(!pi.empty(), Errc::BadArgument, "localize of empty play");
    ProjectionBundle b;
    b.init(lay, pi[0].first, pi[0].second);
    for (size_t k = 1; k < pi.size(); ++k) b.append(pi[k].first, pi[k].second);
    return b;
}

}  // namespace hgame
