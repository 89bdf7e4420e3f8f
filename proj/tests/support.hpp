#pragma once

// Test-only helpers: independent oracles (backward-induction reachability,
// formula-driven Buchi/safety evaluation, play-enumeration AGG construction)
// and random instance generators. Nothing here is used by the library.

#include <functional>
#include <map>
#include <set>

#include "hgame/controller.hpp"
#include "hgame/gridworld.hpp"
#include "hgame/hrg.hpp"

namespace hgame::test {

// --- random instances ------------------------------------------------------

inline GameGraph random_game(Rng& rng, int nx, int ny, int branch = 2) {
    GameGraph g(nx, ny);
    std::uniform_int_distribution<int> dx(0, nx - 1), dy(0, ny - 1);
    std::uniform_int_distribution<int> db(1, branch);
    for (EnvState x = 0; x < nx; ++x)
        for (SysState y = 0; y < ny; ++y) {
            for (int b = db(rng); b > 0; --b) g.add_env(x, y, dx(rng));
            for (int b = db(rng); b > 0; --b) g.add_sys(x, y, dy(rng));
        }
    return g;
}

// Random surjective map from n elements onto m classes.
inline std::vector<int> random_partition(Rng& rng, int n, int m) {
    std::vector<int> map(n);
    for (int i = 0; i < n; ++i) map[i] = i % m;
    std::shuffle(map.begin(), map.end(), rng);
    return map;
}

struct RandomHrgSpec {
    int nx0 = 4, ny0 = 12, ny1 = 4, ny2 = 2, nx1 = 3, nx2 = 2;
    int branch = 2;
    bool restricted_env = true;  // random idempotent layer-0 restriction maps
};

// Random 2-layer hierarchical game. The layer-0 system dynamics are generated
// from context-restricted env states, so Assumption 1 holds at layer 0 by
// construction; layer-1 restriction maps are the identity.
inline HierarchicalGame random_hrg(Rng& rng, const RandomHrgSpec& spec = {}) {
    Layering lay;
    lay.depth = 2;
    lay.num_env = {spec.nx0, spec.nx1, spec.nx2};
    lay.num_sys = {spec.ny0, spec.ny1, spec.ny2};
    lay.ry.resize(3);
    lay.rx.resize(3);
    lay.ry[1] = random_partition(rng, spec.ny0, spec.ny1);
    lay.ry[2] = random_partition(rng, spec.ny1, spec.ny2);
    std::uniform_int_distribution<int> d1(0, spec.nx1 - 1), d2(0, spec.nx2 - 1);
    lay.rx[1].resize((size_t)spec.nx0 * spec.ny0);
    for (auto& v : lay.rx[1]) v = d1(rng);
    lay.rx[2].resize((size_t)spec.nx1 * spec.ny1);
    for (auto& v : lay.rx[2]) v = d2(rng);

    // Idempotent restriction maps at layer 0: project onto a random
    // representative per random group of env states.
    lay.restr.resize(2);
    lay.restr[0].resize(spec.ny1);
    for (SysState nu = 0; nu < spec.ny1; ++nu) {
        std::vector<EnvState> r(spec.nx0);
        if (spec.restricted_env) {
            std::vector<int> grp = random_partition(rng, spec.nx0, std::max(1, spec.nx0 / 2));
            std::map<int, EnvState> rep;
            for (EnvState x = 0; x < spec.nx0; ++x)
                if (!rep.count(grp[x])) rep[grp[x]] = x;
            for (EnvState x = 0; x < spec.nx0; ++x) r[x] = rep[grp[x]];
        } else {
            for (EnvState x = 0; x < spec.nx0; ++x) r[x] = x;
        }
        lay.restr[0][nu] = r;
    }
    lay.restr[1].assign(spec.ny2, {});  // identity at layer 1

    GameGraph g(spec.nx0, spec.ny0);
    std::uniform_int_distribution<int> dx(0, spec.nx0 - 1), dy(0, spec.ny0 - 1);
    std::uniform_int_distribution<int> db(1, spec.branch);
    for (EnvState x = 0; x < spec.nx0; ++x)
        for (SysState y = 0; y < spec.ny0; ++y)
            for (int b = db(rng); b > 0; --b) g.add_env(x, y, dx(rng));
    // sys image depends only on the restricted env state of y's context
    std::vector<std::vector<SysState>> table((size_t)spec.nx0 * spec.ny0);
    for (SysState y = 0; y < spec.ny0; ++y) {
        SysState nu = lay.ry[1][y];
        for (EnvState x = 0; x < spec.nx0; ++x) {
            EnvState xr = lay.restr[0][nu][x];
            auto& img = table[(size_t)xr * spec.ny0 + y];
            if (img.empty()) {
                for (int b = db(rng); b > 0; --b) img.push_back(dy(rng));
                sort_unique(img);
            }
            for (SysState yn : img) g.add_sys(x, y, yn);
        }
    }
    std::uniform_int_distribution<int> dyy(0, spec.ny0 - 1);
    StatePair init{dx(rng), dyy(rng)};
    return HierarchicalGame::assemble(std::move(g), std::move(lay), init);
}

inline Play random_play(Rng& rng, const GameGraph& g, StatePair init, int len) {
    Play p{init};
    for (int k = 0; k < len; ++k) {
        auto [x, y] = p.back();
        const auto& ex = g.env_succ(x, y);
        if (ex.empty()) break;
        EnvState xn = ex[std::uniform_int_distribution<size_t>(0, ex.size() - 1)(rng)];
        const auto& sy = g.sys_succ(xn, y);
        if (sy.empty()) break;
        SysState yn = sy[std::uniform_int_distribution<size_t>(0, sy.size() - 1)(rng)];
        p.emplace_back(xn, yn);
    }
    return p;
}

struct RandomEnv : EnvStrategy {
    const GameGraph* g;
    Rng rng;
    RandomEnv(const GameGraph& gg, uint64_t seed) : g(&gg), rng(seed) {}
    EnvState choose(const Play& h) override {
        const auto& ex = g->env_succ(h.back().first, h.back().second);
        return ex[std::uniform_int_distribution<size_t>(0, ex.size() - 1)(rng)];
    }
};

struct FnSystemStrategy : SystemStrategy {
    std::function<std::optional<SysState>(const Play&, EnvState)> fn;
    std::optional<SysState> choose(const Play& h, EnvState x) override { return fn(h, x); }
};

struct FnEnv : EnvStrategy {
    std::function<EnvState(const Play&)> fn;
    EnvState choose(const Play& h) override { return fn(h); }
};

// --- oracles ---------------------------------------------------------------

// Backward-induction reachability on an explicit arena: memoized minimax
// "can the system force a target complete node within d rounds".
struct ReachOracle {
    const Arena& a;
    const std::vector<char>& target;
    std::map<std::pair<int, int>, char> memoC, memoI;
    int bound;
    explicit ReachOracle(const Arena& arena, const std::vector<char>& tgt)
        : a(arena), target(tgt) {
        bound = 2 * (int)(a.cnodes.size() + a.inodes.size()) + 2;
    }
    bool winC(int c, int d) {
        if (target[c]) return true;
        if (d <= 0 || a.c_out[c].empty()) return false;
        auto key = std::make_pair(c, d);
        auto it = memoC.find(key);
        if (it != memoC.end()) return it->second;
        bool all = true;
        for (int i : a.c_out[c])
            if (!winI(i, d - 1)) { all = false; break; }
        memoC[key] = all;
        return all;
    }
    bool winI(int i, int d) {
        if (d <= 0) return false;
        auto key = std::make_pair(i, d);
        auto it = memoI.find(key);
        if (it != memoI.end()) return it->second;
        bool any = false;
        for (int c : a.i_out[i])
            if (winC(c, d - 1)) { any = true; break; }
        memoI[i >= 0 ? key : key] = any;
        memoI[key] = any;
        return any;
    }
    std::vector<char> region() {
        std::vector<char> w(a.cnodes.size(), 0);
        for (size_t c = 0; c < a.cnodes.size(); ++c) w[c] = winC((int)c, bound);
        return w;
    }
};

// Literal nu-Z.mu-Y evaluation of the Buchi winning region over complete
// nodes, using the controllable-predecessor of the two-step round.
inline std::vector<char> buchi_oracle(const Arena& a, const std::vector<char>& acc) {
    size_t NC = a.cnodes.size();
    auto cpre = [&](const std::vector<char>& S) {
        std::vector<char> out(NC, 0);
        for (size_t c = 0; c < NC; ++c) {
            if (a.c_out[c].empty()) continue;
            bool all = true;
            for (int i : a.c_out[c]) {
                bool any = false;
                for (int cc : a.i_out[i])
                    if (S[cc]) { any = true; break; }
                if (!any) { all = false; break; }
            }
            out[c] = all;
        }
        return out;
    };
    std::vector<char> Z(NC, 1);
    while (true) {
        std::vector<char> preZ = cpre(Z);
        std::vector<char> Y(NC, 0);
        while (true) {
            std::vector<char> preY = cpre(Y);
            std::vector<char> Y2(NC, 0);
            bool ch = false;
            for (size_t c = 0; c < NC; ++c) {
                Y2[c] = preY[c] || (acc[c] && preZ[c]);
                if (Y2[c] != Y[c]) ch = true;
            }
            Y = Y2;
            if (!ch) break;
        }
        bool ch = false;
        for (size_t c = 0; c < NC; ++c)
            if (Z[c] != Y[c]) ch = true;
        Z = Y;
        if (!ch) break;
    }
    return Z;
}

inline std::vector<char> safety_oracle(const Arena& a, const std::vector<char>& good) {
    size_t NC = a.cnodes.size();
    auto cpre = [&](const std::vector<char>& S) {
        std::vector<char> out(NC, 0);
        for (size_t c = 0; c < NC; ++c) {
            if (a.c_out[c].empty()) { out[c] = 1; continue; }  // safe ending
            bool all = true;
            for (int i : a.c_out[c]) {
                bool any = false;
                for (int cc : a.i_out[i])
                    if (S[cc]) { any = true; break; }
                if (!any) { all = false; break; }
            }
            out[c] = all;
        }
        return out;
    };
    std::vector<char> Z(NC, 1);
    while (true) {
        auto pre = cpre(Z);
        std::vector<char> Z2(NC, 0);
        bool ch = false;
        for (size_t c = 0; c < NC; ++c) {
            Z2[c] = good[c] && pre[c];
            if (Z2[c] != Z[c]) ch = true;
        }
        Z = Z2;
        if (!ch) break;
    }
    return Z;
}

// Play-enumeration AGG oracle: walks a projection machine over all plays of
// the layer below and collects exactly the abstract transitions realizable by
// projected plays. States are (concrete pair, abstract env recorded at the
// current segment start).
struct AggOracle {
    GameGraph env_map, sys_map;  // collected abstract transitions
    AggOracle(const GameGraph& below, const Layering& lay, Layer l)
        : env_map(lay.num_env[l], lay.num_sys[l]), sys_map(lay.num_env[l], lay.num_sys[l]) {
        const auto& ry = lay.ry[l];
        const auto& rx = lay.rx[l];
        int ny_lo = lay.num_sys[l - 1];
        auto rxv = [&](EnvState x, SysState y) { return rx[(size_t)x * ny_lo + y]; };
        std::set<std::tuple<EnvState, SysState, EnvState>> seen;
        std::vector<std::tuple<EnvState, SysState, EnvState>> stack;
        for (EnvState x = 0; x < below.num_env; ++x)
            for (SysState y = 0; y < below.num_sys; ++y) {
                auto s = std::make_tuple(x, y, rxv(x, y));
                if (seen.insert(s).second) stack.push_back(s);
            }
        while (!stack.empty()) {
            auto [x, y, xh] = stack.back();
            stack.pop_back();
            SysState yh = ry[y];
            for (EnvState xn : below.env_succ(x, y)) {
                env_map.add_env(xh, yh, rxv(xn, y));
                for (SysState yn : below.sys_succ(xn, y)) {
                    if (ry[yn] == yh) {
                        auto s = std::make_tuple(xn, yn, xh);
                        if (seen.insert(s).second) stack.push_back(s);
                    } else {
                        sys_map.add_sys(rxv(xn, y), yh, ry[yn]);
                        auto s = std::make_tuple(xn, yn, rxv(xn, y));
                        if (seen.insert(s).second) stack.push_back(s);
                    }
                }
            }
        }
    }
};

// Brute-force liveness of automaton states by depth-first path search.
inline std::vector<char> live_oracle(const SpecAutomaton& a) {
    int n = a.num_states;
    std::vector<std::vector<int>> succ(n);
    for (int s = 0; s < n; ++s) {
        std::vector<int> ts;
        for (int lt = 0; lt < a.alphabet_size(); ++lt) ts.push_back(a.step(s, lt));
        sort_unique(ts);
        succ[s] = ts;
    }
    std::function<bool(int, std::vector<char>&)> reach_acc = [&](int s, std::vector<char>& onpath) {
        if (a.accepting[s]) return true;
        if (onpath[s]) return false;
        onpath[s] = 1;
        for (int t : succ[s])
            if (reach_acc(t, onpath)) return true;
        return false;
    };
    std::vector<char> out(n, 0);
    switch (a.mode) {
    case AcceptMode::FiniteReach:
        for (int s = 0; s < n; ++s) {
            std::vector<char> onpath(n, 0);
            out[s] = reach_acc(s, onpath);
        }
        break;
    case AcceptMode::Safety:
        for (int s = 0; s < n; ++s) out[s] = a.accepting[s];
        break;
    case AcceptMode::Buchi: {
        // s is live iff it reaches an accepting state on a (nontrivial) cycle
        auto reaches = [&](int from, int to) {
            std::vector<char> mark(n, 0);
            std::vector<int> st{from};
            bool first = true;
            while (!st.empty()) {
                int u = st.back();
                st.pop_back();
                for (int t : succ[u]) {
                    if (t == to && !(first && u == from && false)) return true;
                    if (!mark[t]) {
                        mark[t] = 1;
                        st.push_back(t);
                    }
                }
                first = false;
            }
            return false;
        };
        for (int s = 0; s < n; ++s)
            for (int f = 0; f < n && !out[s]; ++f)
                if (a.accepting[f] && reaches(f, f)) {
                    if (s == f)
                        out[s] = 1;
                    else {
                        std::vector<char> onpath(n, 0);
                        std::function<bool(int)> go = [&](int u) {
                            if (u == f) return true;
                            if (onpath[u]) return false;
                            onpath[u] = 1;
                            for (int t : succ[u])
                                if (go(t)) return true;
                            return false;
                        };
                        // reach f from s (possibly via zero steps handled above)
                        for (int t : succ[s])
                            if (go(t)) { out[s] = 1; break; }
                        if (!out[s] && s == f) out[s] = 1;
                    }
                }
        break;
    }
    }
    return out;
}

// Per-tick recompute-economy audit from the run log: the layer-0 solver may
// run exactly on ticks where the context changed (including the first tick),
// the induced target changed, or Done^1 rose; and it must run on those ticks.
struct EconomyAudit {
    int expected = 0;
    int target_change_only = 0;
    bool clean = true;
    EconomyAudit(const Controller& ctrl) {
        SysState prev_ctx = -2;
        int prev_target = -2;
        bool prev_done1 = false;
        for (const auto& tl : ctrl.log) {
            const auto& l0 = tl.layers[0];
            const auto& l1 = tl.layers[1];
            bool ctx_change = l0.context != prev_ctx;
            bool done_rise = l1.done && !prev_done1;
            bool target_change = !ctx_change && !l1.done && prev_target != -2 &&
                                 l0.target != prev_target;
            bool condition = ctx_change || done_rise || target_change;
            bool solved = l0.resolved_f || l0.resolved_h;
            if (condition) ++expected;
            if (target_change && !ctx_change && !done_rise) ++target_change_only;
            if (solved != condition) clean = false;
            prev_ctx = l0.context;
            prev_target = l1.done ? -2 : l0.target;
            prev_done1 = l1.done;
        }
    }
};

inline std::string scenario_path(const std::string& name) {
    return std::string(HGAME_SCENARIO_DIR) + "/" + name;
}

// Random small building: one or two floors, a corridor of rooms per floor,
// doors (some dynamic) or plain openings between rooms, a reach task at every
// layer, and fair/adversarial/scripted/static profiles. `door_free` forces
// plain openings everywhere (used by suites that need completable runs).
inline BuildingScenario random_building(Rng& rng, bool door_free = false) {
    using nlohmann::json;
    std::uniform_int_distribution<int> dW(4, 6), dH(2, 3), dRooms(2, 3);
    bool two_floors = !door_free && (rng() % 3 == 0);
    int nf = two_floors ? 2 : 1;
    json floors = json::array(), rooms = json::array(), passages = json::array();
    json doors = json::array(), stairs = json::array();
    std::vector<std::vector<std::string>> room_ids(nf);
    std::vector<int> Ws(nf), Hs(nf);
    int door_n = 0;
    std::vector<std::string> dyn_doors;
    for (int f = 0; f < nf; ++f) {
        int W = dW(rng), H = dH(rng);
        Ws[f] = W;
        Hs[f] = H;
        std::string fid = "f" + std::to_string(f + 1);
        floors.push_back({{"id", fid}, {"width", W}, {"height", H}});
        int nr = std::min(dRooms(rng), W / 2);
        std::vector<int> bounds{0};
        for (int r = 1; r < nr; ++r) bounds.push_back(bounds.back() + W / nr);
        bounds.push_back(W);
        for (int r = 0; r < nr; ++r) {
            std::string rid = "g" + std::to_string(f + 1) + "_" + std::to_string(r + 1);
            room_ids[f].push_back(rid);
            rooms.push_back({{"id", rid},
                             {"floor", fid},
                             {"rect", {bounds[r] + 1, 1, bounds[r + 1], H}}});
        }
        auto cell = [&](int col, int row) {
            return "q" + std::to_string(f + 1) + "_" + std::to_string(col) + std::to_string(row);
        };
        for (int r = 0; r + 1 < nr; ++r) {
            int row = 1 + (int)(rng() % H);
            std::string a = cell(bounds[r + 1], row), b = cell(bounds[r + 1] + 1, row);
            bool with_door = !door_free && (rng() % 2 == 0);
            if (with_door) {
                std::string did = "d" + std::to_string(door_n++);
                doors.push_back({{"id", did},
                                 {"rooms", {room_ids[f][r], room_ids[f][r + 1]}},
                                 {"cells", {a, b}},
                                 {"dynamic", true}});
                dyn_doors.push_back(did);
                passages.push_back({{"cells", {a, b}}, {"door", did}});
            } else {
                passages.push_back({{"cells", {a, b}}});
            }
            // occasionally a doorless alternate route on another row
            if (!door_free && H > 1 && rng() % 3 == 0) {
                int row2 = row == 1 ? 2 : 1;
                passages.push_back(
                    {{"cells", {cell(bounds[r + 1], row2), cell(bounds[r + 1] + 1, row2)}}});
            }
        }
    }
    if (two_floors) {
        stairs.push_back({{"id", "s12"},
                          {"from", "f1"},
                          {"to", "f2"},
                          {"cells", json::array({json{{"id", "s12_a"}, {"col", 0}, {"row", 1}}})}});
        passages.push_back({{"cells", {"q1_" + std::to_string(Ws[0]) + "1", "s12_a"}}});
        passages.push_back({{"cells", {"s12_a", "q2_11"}}});
    }
    std::string goal_floor = "f" + std::to_string(nf);
    std::string goal_room = room_ids[nf - 1].back();
    std::string goal_cell =
        "q" + std::to_string(nf) + "_" + std::to_string(Ws[nf - 1]) + std::to_string(Hs[nf - 1]);
    json spec = {{"floor", {{"template", "reach"}, {"target", goal_floor}}},
                 {"rooms", {{goal_floor, {{"template", "reach"}, {"target", goal_room}}}}},
                 {"cells", {{goal_room, {{"template", "reach"}, {"target", goal_cell}}}}}};
    int T = 2 + (int)(rng() % 3);
    json profiles = {
        {"static", {{"kind", "static"}}},
        {"fair", {{"kind", "fair-doors"}, {"T", T}, {"p_close", 0.4}, {"p_open", 0.5}}},
        {"evil", {{"kind", "adversarial"}, {"T", T}}},
    };
    if (!dyn_doors.empty()) {
        const auto& d = dyn_doors[rng() % dyn_doors.size()];
        json cells = json::array();
        for (auto& dj : doors)
            if (dj["id"] == d)
                for (auto& c : dj["cells"]) cells.push_back(c);
        profiles["script"] = {{"kind", "scripted"},
                              {"events", json::array({json{{"at", 2 + (int)(rng() % 4)},
                                                           {"obstacles", cells}}})}};
    }
    json assumptions = json::object();
    if (!dyn_doors.empty()) {
        json per_floor = json::object();
        for (int f = 0; f < nf; ++f)
            per_floor["f" + std::to_string(f + 1)] = {{"template", "gf_open"},
                                                      {"doors", dyn_doors}};
        assumptions["rooms"] = per_floor;
    }
    json j = {{"name", "random"}, {"floors", floors},     {"rooms", rooms},
              {"passages", passages}, {"doors", doors},   {"stairs", stairs},
              {"robot", "q1_11"},     {"specs", spec},    {"profiles", profiles},
              {"assumptions", assumptions}};
    return load_scenario(j.dump());
}

// The scripted path of the two-floor building fixture: cells from the initial
// state in room r5_11 to the goal cell q6_63 in room r6_21, entering rooms at
// steps 3, 6, 11, 20 (stairs and floor change), 22, 27 and 33.
inline std::vector<std::string> figure1_path_labels() {
    return {"q5_22", "q5_23", "q5_33", "q5_43", "q5_53", "q5_54", "q5_55", "q5_56", "q5_57",
            "q5_58", "q5_68", "q5_78", "q5_88", "q5_98", "q5_97", "q5_96", "q5_95", "q5_85",
            "q5_75", "q5_76", "s56_a", "s56_b", "q6_38", "q6_28", "q6_27", "q6_26", "q6_25",
            "q6_24", "q6_23", "q6_22", "q6_32", "q6_42", "q6_52", "q6_62", "q6_63"};
}

// Builds the scripted figure-1 play under the static profile (constant env).
inline Play figure1_path(const CompiledGame& cg) {
    Play p;
    for (const auto& label : figure1_path_labels())
        p.emplace_back(cg.initial_env, cg.sys_state(cg.sc.cell_of(label), 0));
    return p;
}

inline std::set<std::string> occ_labels(const CompiledGame& cg, EnvState x) {
    std::set<std::string> out;
    for (int c : cg.occupied(x)) out.insert(cg.sc.cell_labels[c]);
    return out;
}

inline std::set<std::string> door_set(const CompiledGame& cg, EnvState x1) {
    std::set<std::string> out;
    auto [mask, flag] = cg.l1_values[x1];
    for (size_t d = 0; d < cg.sc.doors.size(); ++d)
        if (mask & (1u << d)) out.insert(cg.sc.doors[d].id);
    return out;
}

// (env occupied-set, sys label) views of a layer-l play for exact comparisons.
inline std::vector<std::pair<std::set<std::string>, std::string>> seg_view(
    const CompiledGame& cg, Layer l, const Play& seg) {
    std::vector<std::pair<std::set<std::string>, std::string>> out;
    for (auto [x, y] : seg) {
        std::set<std::string> env;
        if (l == 0) env = occ_labels(cg, x);
        else if (l == 1) env = door_set(cg, x);
        else {
            auto [mask, flag] = cg.l2_values[x];
            for (size_t s = 0; s < cg.sc.stairs.size(); ++s)
                if (mask & (1u << s)) env.insert(cg.sc.stairs[s].id);
        }
        out.push_back({env, cg.sys_label(l, y)});
    }
    return out;
}

}  // namespace hgame::test
