#pragma once

#include <map>

#include "hgame/automaton.hpp"
#include "hgame/common.hpp"
#include "hgame/hier_graphs.hpp"
#include "hgame/layering.hpp"
#include "hgame/solver.hpp"

namespace hgame {

// Reachability specification of a context change nu -> nu': finite local plays
// that stay inner and end at an exit state belonging to nu'. For nu' = nu it
// is the language of all infinite inner plays (no finite word is accepted,
// every inner word stays in the closure).
inline SpecAutomaton reach_spec(const LocalGameGraph& lgg, const Layering& lay, SysState nu_next) {
    int ax = lay.num_env[lgg.layer];
    int ay = lay.num_sys[lgg.layer];
    if (nu_next == lgg.context) {
        auto a = SpecAutomaton::blank(AcceptMode::Buchi, 2, ax, ay);
        a.accepting[0] = 1;
        for (EnvState x = 0; x < ax; ++x)
            for (SysState y = 0; y < ay; ++y) {
                int t = lgg.is_inner(y) ? 0 : 1;
                a.step_ref(0, x * ay + y) = t;
                a.step_ref(1, x * ay + y) = 1;
            }
        return a;
    }
    std::vector<char> target(ay, 0);
    bool any = false;
    for (SysState y : lgg.outer)
        if (lay.ry[lgg.layer + 1][y] == nu_next) {
            target[y] = 1;
            any = true;
        }
    require(any, Errc::NotAPostContext,
            "no exit from context " + std::to_string(lgg.context) + " into " +
                std::to_string(nu_next));
    // 0 seeking, 1 done, 2 dead.
    auto a = SpecAutomaton::blank(AcceptMode::FiniteReach, 3, ax, ay);
    a.accepting[1] = 1;
    for (EnvState x = 0; x < ax; ++x)
        for (SysState y = 0; y < ay; ++y) {
            int lt = x * ay + y;
            a.step_ref(0, lt) = target[y] ? 1 : (lgg.is_inner(y) ? 0 : 2);
            a.step_ref(1, lt) = 2;
            a.step_ref(2, lt) = 2;
        }
    return a;
}

// Concatenation phi . psi: accepts { xi.xi' | xi in L(phi), last(xi).xi' in
// L(psi) }. Deterministic product: runs phi and tracks the subset of psi
// states reachable from splits at every position where phi has accepted a
// nonempty prefix; the split consumes the overlap letter in both factors.
// phi must be FiniteReach or Safety. psi is FiniteReach (product accepts when
// a tracked run accepts) or the letter-local stay-inner Buchi automaton of
// reach_spec (product is Buchi on "a tracked run is alive").
inline SpecAutomaton concat_spec(const SpecAutomaton& phi, const SpecAutomaton& psi) {
    require(phi.same_alphabet(psi), Errc::AlphabetMismatch, "concat_spec alphabets differ");
    require(phi.mode != AcceptMode::Buchi, Errc::UnsupportedObjective,
            "local tasks must be finite-word or safety languages");
    require(psi.num_states <= 62, Errc::UnsupportedObjective, "psi too large for subset tracking");

    auto phi_sat = [&](int q) { return (bool)phi.accepting[q]; };
    auto psi_acc_mask = [&] {
        uint64_t m = 0;
        for (int s = 0; s < psi.num_states; ++s)
            if (psi.accepting[s]) m |= 1ull << s;
        return m;
    }();

    struct Key {
        int qphi;
        uint64_t mask;
        bool operator<(const Key& o) const {
            return qphi != o.qphi ? qphi < o.qphi : mask < o.mask;
        }
    };
    std::map<Key, int> ids;
    std::vector<Key> states;
    auto intern = [&](Key k) {
        auto it = ids.find(k);
        if (it != ids.end()) return it->second;
        int id = (int)states.size();
        ids.emplace(k, id);
        states.push_back(k);
        return id;
    };
    intern({phi.initial, 0});

    int alpha = phi.alphabet_size();
    std::vector<int> trans;
    for (size_t s = 0; s < states.size(); ++s) {
        trans.resize((s + 1) * alpha);
        Key k = states[s];
        for (int lt = 0; lt < alpha; ++lt) {
            int qp = phi.step(k.qphi, lt);
            uint64_t m = 0;
            for (int p = 0; p < psi.num_states; ++p)
                if (k.mask & (1ull << p)) m |= 1ull << psi.step(p, lt);
            if (phi_sat(qp)) m |= 1ull << psi.step(psi.initial, lt);
            trans[s * alpha + lt] = intern({qp, m});
        }
    }

    SpecAutomaton out;
    out.mode = (psi.mode == AcceptMode::Buchi) ? AcceptMode::Buchi : AcceptMode::FiniteReach;
    out.num_states = (int)states.size();
    out.initial = 0;
    out.alpha_env = phi.alpha_env;
    out.alpha_sys = phi.alpha_sys;
    out.trans = std::move(trans);
    out.accepting.assign(out.num_states, 0);
    for (int s = 0; s < out.num_states; ++s)
        out.accepting[s] = (states[s].mask & psi_acc_mask) ? 1 : 0;
    return out;
}

// Local specification families over the LGG family plus the top game.
struct HierarchicalGame {
    GameGraph base;
    Layering lay;
    std::vector<AbstractGameGraph> aggs;         // index l-1 for layers 1..L
    std::vector<std::vector<LocalGameGraph>> lggs;  // [l][nu], empty inner = void context
    LocalGameGraph top;
    std::vector<std::vector<SpecAutomaton>> phi;  // [l][nu]
    SpecAutomaton phi_top;
    std::vector<std::vector<std::optional<SpecAutomaton>>> zeta;
    std::optional<SpecAutomaton> zeta_top;
    StatePair init{0, 0};
    SolveMode mode = SolveMode::WorstCase;

    const GameGraph& layer_graph(Layer l) const { return l == 0 ? base : aggs[l - 1].g; }

    static HierarchicalGame assemble(GameGraph g0, Layering layering, StatePair init_pair) {
        HierarchicalGame h;
        h.base = std::move(g0);
        h.lay = std::move(layering);
        h.init = init_pair;
        int L = h.lay.depth;
        for (Layer l = 1; l <= L; ++l) h.aggs.push_back(build_agg(h.layer_graph(l - 1), h.lay, l));
        h.lggs.resize(L);
        h.phi.resize(L);
        h.zeta.resize(L);
        for (Layer l = 0; l < L; ++l) {
            int ctxs = h.lay.num_sys[l + 1];
            h.lggs[l].resize(ctxs);
            h.phi[l].reserve(ctxs);
            h.zeta[l].resize(ctxs);
            for (SysState nu = 0; nu < ctxs; ++nu) {
                bool nonempty = false;
                for (SysState y = 0; y < h.lay.num_sys[l]; ++y)
                    if (h.lay.ry[l + 1][y] == nu) { nonempty = true; break; }
                if (nonempty) h.lggs[l][nu] = build_lgg(h.layer_graph(l), h.lay, l, nu);
                h.phi[l].push_back(
                    SpecAutomaton::universal(h.lay.num_env[l], h.lay.num_sys[l]));
            }
        }
        h.top = LocalGameGraph::whole(h.layer_graph(L), L);
        h.top.layer = L;
        h.phi_top = SpecAutomaton::universal(h.lay.num_env[L], h.lay.num_sys[L]);
        return h;
    }
};

// Set of local initial conditions: the lifted (and context-restricted) initial
// pair for the first segment, the overlap element afterwards; undefined for
// later segments of the top layer.
inline Play init_cond(const ProjectionBundle& bundle, Layer l, int m, StatePair I) {
    const Layering& lay = *bundle.lay;
    lay.check_layer(l);
    if (m == 0) {
        auto [xl, yl] = lay.lift(l, I.first, I.second);
        EnvState xr = (l == lay.depth) ? xl : lay.restrict_env(l, lay.lift_sys(l + 1, I.second), xl);
        return Play{{xr, yl}};
    }
    require(l < lay.depth, Errc::UndefinedCase, "init_cond at top layer for m>0");
    require(m < bundle.num_segments(l), Errc::BadArgument, "init_cond segment index");
    Play prev = bundle.segment(l, m - 1);
    return Play{prev.back()};
}

enum class VerdictKind { Winning, PossiblyWinning, Violated };

inline const char* verdict_name(VerdictKind v) {
    switch (v) {
    case VerdictKind::Winning: return "Winning";
    case VerdictKind::PossiblyWinning: return "PossiblyWinning";
    case VerdictKind::Violated: return "Violated";
    }
    return "?";
}

struct SegmentDiag {
    Layer layer;
    int segment;
    SysState context;  // -1 at top
    bool is_final;
    bool prefix_ok;  // some nonempty prefix satisfies the local task
    bool exact_ok;   // the segment itself satisfies it
    bool weak_ok;    // prefix_ok or the segment stays in the task's closure
};

struct Verdict {
    VerdictKind kind;
    std::vector<SegmentDiag> diags;
};

namespace detail {

struct SegCheck {
    bool prefix_ok, exact_ok, weak_ok;
};

// For reach-style tasks a winning prefix is any prefix the automaton accepts.
// Safety tasks are read in the weak-until sense: the segment must stay safe
// for its whole in-context part (everything before the exit element), so a
// mid-segment violation is not excused by a shorter safe prefix.
inline SegCheck check_segment(const SpecAutomaton& phi, const Play& seg) {
    SegCheck c{false, false, false};
    std::vector<char> live = live_states(phi);
    int s = phi.initial;
    bool safe_so_far = (phi.mode != AcceptMode::Safety) || phi.accepting[s];
    bool safe_before_last = safe_so_far;
    for (size_t j = 0; j < seg.size(); ++j) {
        if (j + 1 == seg.size()) safe_before_last = safe_so_far;
        s = phi.step(s, phi.letter(seg[j].first, seg[j].second));
        switch (phi.mode) {
        case AcceptMode::FiniteReach:
            if (phi.accepting[s]) c.prefix_ok = true;
            break;
        case AcceptMode::Safety:
            safe_so_far = safe_so_far && phi.accepting[s];
            break;
        case AcceptMode::Buchi:
            break;  // no finite word is winning
        }
    }
    switch (phi.mode) {
    case AcceptMode::FiniteReach:
        c.exact_ok = phi.accepting[s];
        break;
    case AcceptMode::Safety:
        c.prefix_ok = seg.size() <= 1 ? safe_so_far : safe_before_last;
        c.exact_ok = safe_so_far;
        break;
    case AcceptMode::Buchi:
        c.exact_ok = false;
        break;
    }
    c.weak_ok = c.prefix_ok || live[s];
    return c;
}

}  // namespace detail

// Grades a finite trace against the hierarchical game. Every closed segment
// must contain a prefix winning for its local task (both grades); the final
// segment of each layer needs an exact match for Winning and a prefix
// relation either way for PossiblyWinning; the top projection is judged
// against the top specification directly.
inline Verdict check_winning(const Play& trace, const HierarchicalGame& hrg) {
    require(!trace.empty() && is_play(hrg.base, trace), Errc::TraceNotAPlay,
            "trace is not a play of the base game");
    require(trace.front() == hrg.init, Errc::TraceNotAPlay, "trace does not start at I");
    ProjectionBundle b = localize(hrg.lay, trace);
    Verdict v;
    bool strong = true, weak = true;
    int L = hrg.lay.depth;
    for (Layer l = 0; l < L; ++l) {
        int segs = b.num_segments(l);
        for (int m = 0; m < segs; ++m) {
            SysState nu = b.proj[l + 1][m].second;
            Play seg = b.segment_local(l, m);
            auto c = detail::check_segment(hrg.phi[l][nu], seg);
            bool fin = (m == segs - 1);
            v.diags.push_back({l, m, nu, fin, c.prefix_ok, c.exact_ok, c.weak_ok});
            if (!fin) {
                strong = strong && c.prefix_ok;
                weak = weak && c.prefix_ok;
            } else {
                strong = strong && c.exact_ok;
                weak = weak && c.weak_ok;
            }
        }
    }
    // Top layer: winning means the projection is in phi^L itself, possibly
    // winning means it stays in the closure (a prefix-accept alone is not
    // enough for the whole-word condition).
    auto ct = detail::check_segment(hrg.phi_top, b.proj_restricted[L]);
    bool top_closure = in_closure(hrg.phi_top, b.proj_restricted[L]);
    v.diags.push_back({L, 0, -1, true, ct.prefix_ok, ct.exact_ok, top_closure});
    strong = strong && ct.exact_ok;
    weak = weak && top_closure;
    v.kind = strong ? VerdictKind::Winning
                    : (weak ? VerdictKind::PossiblyWinning : VerdictKind::Violated);
    return v;
}

}  // namespace hgame
