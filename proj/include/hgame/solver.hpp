#pragma once

#include <chrono>
#include <memory>
#include <unordered_map>
#include <unordered_set>

#include "hgame/automaton.hpp"
#include "hgame/common.hpp"
#include "hgame/hier_graphs.hpp"

namespace hgame {

enum class SolveMode { WorstCase, AssumptionRestricted };
enum class Player { System, Environment };

struct SolveStats {
    int complete_nodes = 0;
    int inter_nodes = 0;
    int edges = 0;
    int iterations = 0;
    long long micros = 0;
};

// Winning region of the environment for its assumption, over (x, y, q_ass)
// product states. Used to prune environment moves in assumption-restricted
// solving. `usable` is false when there is nothing to prune (no assumption,
// or the environment cannot satisfy it from the initial state).
struct EnvRegion {
    bool usable = false;
    bool warning = false;  // assumption unsatisfiable from init; arena left unpruned
    int full_sys = 0;
    int qa_states = 1;
    std::unordered_set<int64_t> complete_in, inter_in;

    int64_t key(EnvState x, SysState y, int qa) const {
        return ((int64_t)x * full_sys + y) * qa_states + qa;
    }
    bool complete_ok(EnvState x, SysState y, int qa) const {
        return complete_in.count(key(x, y, qa)) != 0;
    }
    bool inter_ok(EnvState x, SysState y, int qa) const {
        return inter_in.count(key(x, y, qa)) != 0;
    }
};

// Product arena of a local game graph with an objective automaton and an
// optional assumption automaton. Rounds alternate: at a complete node the
// environment picks x', reaching an intermediate node; the system replies y',
// both automata advance on the pair (x', y'). Built explicitly by forward
// exploration from the initial node; successor lists are index-sorted, which
// pins the deterministic tie-break order.
struct Arena {
    const LocalGameGraph* lgg = nullptr;
    const SpecAutomaton* obj = nullptr;
    const SpecAutomaton* ass = nullptr;      // may be null
    const EnvRegion* prune = nullptr;        // may be null

    struct Node {
        EnvState x;
        SysState y;
        int qo, qa;
    };
    std::vector<Node> cnodes, inodes;
    std::unordered_map<int64_t, int> cid, iid;
    std::vector<std::vector<int>> c_out;  // complete -> intermediate ids
    std::vector<std::vector<int>> i_out;  // intermediate -> complete ids
    std::vector<std::vector<int>> c_in;   // intermediate preds of a complete node
    std::vector<std::vector<int>> i_in;   // complete preds of an intermediate node
    int init_c = -1;
    int edge_count = 0;

    int qa_states() const { return ass ? ass->num_states : 1; }
    int64_t key(EnvState x, SysState y, int qo, int qa) const {
        return (((int64_t)x * lgg->full_sys + y) * obj->num_states + qo) * qa_states() + qa;
    }

    int intern_c(EnvState x, SysState y, int qo, int qa, std::vector<int>& work) {
        auto k = key(x, y, qo, qa);
        auto it = cid.find(k);
        if (it != cid.end()) return it->second;
        int id = (int)cnodes.size();
        cid.emplace(k, id);
        cnodes.push_back({x, y, qo, qa});
        c_out.emplace_back();
        c_in.emplace_back();
        work.push_back(id);
        return id;
    }

    void build(EnvState x0, SysState y0, int qo0, int qa0) {
        std::vector<int> cwork;
        init_c = intern_c(x0, y0, qo0, qa0, cwork);
        size_t chead = 0;
        while (chead < cwork.size()) {
            int c = cwork[chead++];
            Node n = cnodes[c];
            if (!lgg->is_inner(n.y)) continue;  // outer states are terminal
            for (EnvState xn : lgg->env_succ(n.x, n.y)) {
                if (prune && prune->usable && prune->complete_ok(n.x, n.y, n.qa) &&
                    !prune->inter_ok(xn, n.y, n.qa))
                    continue;  // environment move outside its assumption region
                auto ik = key(xn, n.y, n.qo, n.qa);
                auto it = iid.find(ik);
                int i;
                if (it != iid.end()) {
                    i = it->second;
                } else {
                    i = (int)inodes.size();
                    iid.emplace(ik, i);
                    inodes.push_back({xn, n.y, n.qo, n.qa});
                    i_out.emplace_back();
                    i_in.emplace_back();
                    for (SysState yn : lgg->sys_succ(xn, n.y)) {
                        int qo2 = obj->step(n.qo, obj->letter(xn, yn));
                        int qa2 = ass ? ass->step(n.qa, ass->letter(xn, yn)) : 0;
                        int c2 = intern_c(xn, yn, qo2, qa2, cwork);
                        i_out[i].push_back(c2);
                        c_in[c2].push_back(i);
                        ++edge_count;
                    }
                }
                c_out[c].push_back(i);
                i_in[i].push_back(c);
                ++edge_count;
            }
        }
    }

    bool c_leaf(int c) const { return c_out[c].empty(); }
};

struct Regions {
    std::vector<char> winC, winI;
    std::vector<int> rankC, rankI;
    std::vector<int> moveI;  // chosen successor cnode id per intermediate node, -1 if none
    int iterations = 0;
};

// Alternating attractor for `player` toward target nodes, within the alive
// masks. The player's own nodes need one successor in the region, opponent
// nodes need all of them (dead ends are never attracted through the
// universal rule).
inline Regions attractor_masks(const Arena& a, const std::vector<char>& targetC,
                               const std::vector<char>& targetI, Player player,
                               const std::vector<char>* aliveC = nullptr,
                               const std::vector<char>* aliveI = nullptr) {
    int NC = (int)a.cnodes.size(), NI = (int)a.inodes.size();
    Regions r;
    r.winC.assign(NC, 0);
    r.winI.assign(NI, 0);
    r.rankC.assign(NC, -1);
    r.rankI.assign(NI, -1);
    r.moveI.assign(NI, -1);
    auto c_alive = [&](int c) { return !aliveC || (*aliveC)[c]; };
    auto i_alive = [&](int i) { return !aliveI || (*aliveI)[i]; };

    bool sysPlayer = (player == Player::System);
    // Pending counters for universal nodes (within alive).
    std::vector<int> pendC(NC, 0), pendI(NI, 0);
    for (int c = 0; c < NC; ++c) {
        int n = 0;
        for (int i : a.c_out[c])
            if (i_alive(i)) ++n;
        pendC[c] = n;
    }
    for (int i = 0; i < NI; ++i) {
        int n = 0;
        for (int c : a.i_out[i])
            if (c_alive(c)) ++n;
        pendI[i] = n;
    }

    std::vector<std::pair<char, int>> queue;  // (is_cnode, id)
    auto add_c = [&](int c, int rank) {
        if (!c_alive(c) || r.winC[c]) return;
        r.winC[c] = 1;
        r.rankC[c] = rank;
        queue.push_back({1, c});
    };
    auto add_i = [&](int i, int rank) {
        if (!i_alive(i) || r.winI[i]) return;
        r.winI[i] = 1;
        r.rankI[i] = rank;
        queue.push_back({0, i});
    };
    for (int c = 0; c < NC; ++c)
        if (targetC[c]) add_c(c, 0);
    for (int i = 0; i < NI; ++i)
        if (targetI.size() && targetI[i]) add_i(i, 0);

    size_t head = 0;
    while (head < queue.size()) {
        auto [isc, id] = queue[head++];
        if (isc) {
            int c = id;
            for (int i : a.c_in[c]) {
                if (!i_alive(i) || r.winI[i]) continue;
                if (sysPlayer) {
                    add_i(i, r.rankC[c] + 1);  // system chooses at intermediates
                } else {
                    if (--pendI[i] == 0) add_i(i, r.rankC[c] + 1);
                }
            }
        } else {
            int i = id;
            for (int c : a.i_in[i]) {
                if (!c_alive(c) || r.winC[c]) continue;
                if (sysPlayer) {
                    if (--pendC[c] == 0) add_c(c, r.rankI[i] + 1);
                } else {
                    add_c(c, r.rankI[i] + 1);  // environment chooses at complete nodes
                }
            }
        }
        ++r.iterations;
    }
    // Moves for the existential player's intermediate nodes (system only).
    if (sysPlayer)
        for (int i = 0; i < NI; ++i) {
            if (!r.winI[i]) continue;
            int best = -1;
            for (int c : a.i_out[i]) {
                if (!c_alive(c) || !r.winC[c]) continue;
                if (best == -1 || r.rankC[c] < r.rankC[best] ||
                    (r.rankC[c] == r.rankC[best] && a.cnodes[c].y < a.cnodes[best].y))
                    best = c;
            }
            r.moveI[i] = best;
        }
    return r;
}

// Greatest fixpoint of "stays within good complete nodes". For the system the
// environment picks at complete nodes (universal there); dead-end complete
// nodes count as good endings, matching finite-word safety acceptance.
inline Regions safety_region(const Arena& a, const std::vector<char>& goodC, Player player) {
    int NC = (int)a.cnodes.size(), NI = (int)a.inodes.size();
    Regions r;
    r.winC.assign(NC, 0);
    r.winI.assign(NI, 1);
    r.moveI.assign(NI, -1);
    for (int c = 0; c < NC; ++c) r.winC[c] = goodC[c];
    bool sysPlayer = (player == Player::System);
    bool changed = true;
    while (changed) {
        changed = false;
        ++r.iterations;
        for (int c = 0; c < NC; ++c) {
            if (!r.winC[c] || a.c_leaf(c)) continue;
            bool ok;
            if (sysPlayer) {  // env universal at complete nodes
                ok = true;
                for (int i : a.c_out[c])
                    if (!r.winI[i]) { ok = false; break; }
            } else {  // env existential
                ok = false;
                for (int i : a.c_out[c])
                    if (r.winI[i]) { ok = true; break; }
            }
            if (!ok) { r.winC[c] = 0; changed = true; }
        }
        for (int i = 0; i < NI; ++i) {
            if (!r.winI[i]) continue;
            bool ok;
            if (sysPlayer) {  // sys existential at intermediates
                ok = false;
                for (int c : a.i_out[i])
                    if (r.winC[c]) { ok = true; break; }
            } else {  // sys universal
                ok = true;
                for (int c : a.i_out[i])
                    if (!r.winC[c]) { ok = false; break; }
            }
            if (!ok) { r.winI[i] = 0; changed = true; }
        }
    }
    if (sysPlayer)
        for (int i = 0; i < NI; ++i) {
            if (!r.winI[i]) continue;
            for (int c : a.i_out[i])
                if (r.winC[c]) { r.moveI[i] = c; break; }  // successors sorted by y
        }
    return r;
}

// Standard two-nested-fixpoint Buchi region via iterated attractor removal.
inline Regions buchi_region(const Arena& a, const std::vector<char>& accC, Player player) {
    int NC = (int)a.cnodes.size(), NI = (int)a.inodes.size();
    std::vector<char> aliveC(NC, 1), aliveI(NI, 1);
    std::vector<char> noTargetI(NI, 0);
    Player opp = (player == Player::System) ? Player::Environment : Player::System;
    Regions last;
    int rounds = 0;
    while (true) {
        ++rounds;
        std::vector<char> tgt(NC, 0);
        for (int c = 0; c < NC; ++c) tgt[c] = aliveC[c] && accC[c] && !a.c_leaf(c);
        Regions reach = attractor_masks(a, tgt, noTargetI, player, &aliveC, &aliveI);
        std::vector<char> dC(NC, 0), dI(NI, 0);
        bool anyDead = false;
        for (int c = 0; c < NC; ++c)
            if (aliveC[c] && !reach.winC[c]) { dC[c] = 1; anyDead = true; }
        for (int i = 0; i < NI; ++i)
            if (aliveI[i] && !reach.winI[i]) { dI[i] = 1; anyDead = true; }
        if (!anyDead) {
            last = std::move(reach);
            break;
        }
        Regions rem = attractor_masks(a, dC, dI, opp, &aliveC, &aliveI);
        for (int c = 0; c < NC; ++c)
            if (dC[c] || rem.winC[c]) aliveC[c] = 0;
        for (int i = 0; i < NI; ++i)
            if (dI[i] || rem.winI[i]) aliveI[i] = 0;
    }
    last.iterations += rounds;
    Regions out = std::move(last);
    for (int c = 0; c < NC; ++c) out.winC[c] = aliveC[c];
    for (int i = 0; i < NI; ++i) out.winI[i] = aliveI[i];
    return out;
}

// Winning region + positional move table for the arena's objective.
inline Regions solve_arena(const Arena& a, int& iterations) {
    int NC = (int)a.cnodes.size();
    std::vector<char> accC(NC, 0);
    for (int c = 0; c < NC; ++c) accC[c] = a.obj->accepting[a.cnodes[c].qo];
    Regions r;
    switch (a.obj->mode) {
    case AcceptMode::FiniteReach:
        r = attractor_masks(a, accC, {}, Player::System);
        break;
    case AcceptMode::Safety:
        r = safety_region(a, accC, Player::System);
        break;
    case AcceptMode::Buchi:
        r = buchi_region(a, accC, Player::System);
        break;
    }
    iterations = r.iterations;
    return r;
}

// Environment's winning region for the assumption over (x,y,q_ass); the basis
// of assumption-restricted pruning. If the environment cannot satisfy the
// assumption from the initial state the region is flagged unusable and the
// arena stays unpruned.
inline EnvRegion restrict_env(const LocalGameGraph& lgg, const SpecAutomaton& zeta,
                              EnvState x0, SysState y0, int qa0) {
    EnvRegion reg;
    reg.full_sys = lgg.full_sys;
    reg.qa_states = zeta.num_states;
    Arena za;
    za.lgg = &lgg;
    za.obj = &zeta;
    za.build(x0, y0, qa0, 0);
    std::vector<char> accC(za.cnodes.size(), 0);
    for (size_t c = 0; c < za.cnodes.size(); ++c) accC[c] = zeta.accepting[za.cnodes[c].qo];
    Regions r;
    switch (zeta.mode) {
    case AcceptMode::Safety:
        r = safety_region(za, accC, Player::Environment);
        break;
    case AcceptMode::Buchi:
        r = buchi_region(za, accC, Player::Environment);
        break;
    default:
        raise(Errc::UnsupportedObjective, "assumptions must be Safety or Buchi");
    }
    if (!r.winC[za.init_c]) {
        reg.usable = false;
        reg.warning = true;
        return reg;
    }
    for (size_t c = 0; c < za.cnodes.size(); ++c)
        if (r.winC[c]) {
            auto& n = za.cnodes[c];
            reg.complete_in.insert(reg.key(n.x, n.y, n.qo));
        }
    for (size_t i = 0; i < za.inodes.size(); ++i)
        if (r.winI[i]) {
            auto& n = za.inodes[i];
            reg.inter_in.insert(reg.key(n.x, n.y, n.qo));
        }
    reg.usable = true;
    return reg;
}

// Winning region + move table + automaton memory realizing a possibly winning
// system strategy. query() peeks at the reply to an environment move without
// committing; advance() consumes the pair actually played. The strategy's
// domain is empty once a finite-reach objective has been met and at inputs
// whose one-step extension leaves the winning region (the blocked branch).
class SolvedStrategy {
public:
    std::shared_ptr<Arena> arena;
    std::shared_ptr<EnvRegion> region;  // keeps pruning data alive
    std::shared_ptr<const SpecAutomaton> owned_obj;  // set when the objective is strategy-owned
    Regions solution;
    SolveStats stats;
    bool unrealizable = false;
    bool assumption_warning = false;

    EnvState cur_x = -1;
    SysState cur_y = -1;
    int qo = 0, qa = 0;

    bool objective_accepting() const { return arena && arena->obj->accepting[qo]; }

    std::optional<SysState> query(EnvState x) const {
        if (unrealizable || !arena) return std::nullopt;
        if (arena->obj->mode == AcceptMode::FiniteReach && arena->obj->accepting[qo])
            return std::nullopt;  // objective complete; no further obligations
        auto it = arena->iid.find(arena->key(x, cur_y, qo, qa));
        if (it == arena->iid.end()) return std::nullopt;  // off-region or pruned env move
        int i = it->second;
        if (!solution.winI[i] || solution.moveI[i] < 0) return std::nullopt;
        return arena->cnodes[solution.moveI[i]].y;
    }

    bool defined_at(EnvState x) const { return query(x).has_value(); }

    void advance(EnvState x, SysState y) {
        qo = arena->obj->step(qo, arena->obj->letter(x, y));
        if (arena->ass) qa = arena->ass->step(qa, arena->ass->letter(x, y));
        cur_x = x;
        cur_y = y;
    }
};

// Solves the local game from a context-restricted history. The history is
// replayed through the objective/assumption automata to fix the strategy
// memory; the arena is built (optionally pruned by the environment's
// assumption region) and solved for the objective's acceptance mode.
inline std::unique_ptr<SolvedStrategy> sol(const LocalGameGraph& lgg, const Play& init_history,
                                           const SpecAutomaton& objective,
                                           const SpecAutomaton* zeta, SolveMode mode) {
    require(!init_history.empty(), Errc::BadArgument, "sol: empty history");
    require(objective.alpha_env == lgg.full_env && objective.alpha_sys == lgg.full_sys,
            Errc::AlphabetMismatch, "objective alphabet does not match the layer");
    auto t0 = std::chrono::steady_clock::now();

    auto st = std::make_unique<SolvedStrategy>();
    int qo = objective.initial;
    int qa = zeta ? zeta->initial : 0;
    for (auto [x, y] : init_history) {
        qo = objective.step(qo, objective.letter(x, y));
        if (zeta) qa = zeta->step(qa, zeta->letter(x, y));
    }
    auto [x0, y0] = init_history.back();

    if (mode == SolveMode::AssumptionRestricted && zeta) {
        auto reg = restrict_env(lgg, *zeta, x0, y0, qa);
        st->assumption_warning = reg.warning;
        if (reg.usable) st->region = std::make_shared<EnvRegion>(std::move(reg));
    }

    st->arena = std::make_shared<Arena>();
    st->arena->lgg = &lgg;
    st->arena->obj = &objective;
    st->arena->ass = zeta;
    st->arena->prune = st->region.get();
    st->arena->build(x0, y0, qo, qa);

    int iters = 0;
    st->solution = solve_arena(*st->arena, iters);
    st->stats.complete_nodes = (int)st->arena->cnodes.size();
    st->stats.inter_nodes = (int)st->arena->inodes.size();
    st->stats.edges = st->arena->edge_count;
    st->stats.iterations = iters;
    st->cur_x = x0;
    st->cur_y = y0;
    st->qo = qo;
    st->qa = qa;
    st->unrealizable = !st->solution.winC[st->arena->init_c];
    st->stats.micros = std::chrono::duration_cast<std::chrono::microseconds>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
    return st;
}

}  // namespace hgame
