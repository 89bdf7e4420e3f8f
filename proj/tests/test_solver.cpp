#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace hgame;
using namespace hgame::test;

namespace {

// Free env (single state), linear chain of n cells, moves left/right/stay.
GameGraph chain_graph(int n) {
    GameGraph g(1, n);
    for (SysState y = 0; y < n; ++y) {
        g.add_env(0, y, 0);
        g.add_sys(0, y, y);
        if (y > 0) g.add_sys(0, y, y - 1);
        if (y + 1 < n) g.add_sys(0, y, y + 1);
    }
    return g;
}

Arena build_arena(const LocalGameGraph& lgg, const SpecAutomaton& obj, StatePair init,
                  const SpecAutomaton* ass = nullptr) {
    Arena a;
    a.lgg = &lgg;
    a.obj = &obj;
    a.ass = ass;
    a.build(init.first, init.second, obj.initial, ass ? ass->initial : 0);
    return a;
}

// Toy with a permanently-closed trap: env 0 open, 1 closed (recoverable),
// 2 closed forever (absorbing). Two cells with a door between them.
struct TrapToy {
    GameGraph g{3, 2};
    TrapToy() {
        for (SysState y = 0; y < 2; ++y) {
            g.add_env(0, y, 0);
            g.add_env(0, y, 1);
            g.add_env(0, y, 2);
            g.add_env(1, y, 0);
            g.add_env(1, y, 1);
            g.add_env(1, y, 2);
            g.add_env(2, y, 2);
            g.add_sys(0, y, 0);
            g.add_sys(0, y, 1);
            g.add_sys(1, y, y);
            g.add_sys(2, y, y);
        }
    }
};

}  // namespace

TEST_CASE("attractor with target everything is everything") {
    GameGraph g = chain_graph(4);
    auto lgg = LocalGameGraph::whole(g, 0);
    auto obj = SpecAutomaton::universal(1, 4);
    Arena a = build_arena(lgg, obj, {0, 0});
    std::vector<char> tgt(a.cnodes.size(), 1);
    auto r = attractor_masks(a, tgt, {}, Player::System);
    for (size_t c = 0; c < a.cnodes.size(); ++c) CHECK(r.winC[c]);
}

TEST_CASE("attractor on a linear chain reaches the end from everywhere") {
    GameGraph g = chain_graph(5);
    auto lgg = LocalGameGraph::whole(g, 0);
    auto obj = SpecAutomaton::reach(1, 5, [](EnvState, SysState y) { return y == 4; });
    Arena a = build_arena(lgg, obj, {0, 0});
    std::vector<char> tgt(a.cnodes.size(), 0);
    for (size_t c = 0; c < a.cnodes.size(); ++c) tgt[c] = obj.accepting[a.cnodes[c].qo];
    auto r = attractor_masks(a, tgt, {}, Player::System);
    for (size_t c = 0; c < a.cnodes.size(); ++c) CHECK(r.winC[c]);
    // moves decrease the rank
    for (size_t i = 0; i < a.inodes.size(); ++i) {
        REQUIRE(r.moveI[i] >= 0);
        CHECK(r.rankC[r.moveI[i]] < r.rankI[i]);
    }
}

TEST_CASE("attractor, safety and Buchi regions match the oracles on random arenas") {
    Rng rng(101);
    int done = 0;
    while (done < 120) {
        GameGraph g = random_game(rng, 2, 3);
        auto lgg = LocalGameGraph::whole(g, 0);
        std::uniform_int_distribution<int> mode_d(0, 2);
        int m = mode_d(rng);
        SpecAutomaton obj;
        std::bernoulli_distribution coin(0.4);
        std::vector<char> marks(3);
        for (auto& c : marks) c = coin(rng);
        auto pred = [marks](EnvState, SysState y) { return (bool)marks[y]; };
        if (m == 0) obj = SpecAutomaton::reach(2, 3, pred);
        else if (m == 1) obj = SpecAutomaton::safety(2, 3, pred);
        else obj = SpecAutomaton::always_eventually(2, 3, pred);
        Arena a = build_arena(lgg, obj, {0, 0});
        if (a.cnodes.size() > 12) continue;
        ++done;
        std::vector<char> accC(a.cnodes.size(), 0);
        for (size_t c = 0; c < a.cnodes.size(); ++c) accC[c] = obj.accepting[a.cnodes[c].qo];
        int iters = 0;
        Regions got = solve_arena(a, iters);
        std::vector<char> want;
        if (m == 0) {
            ReachOracle o(a, accC);
            want = o.region();
        } else if (m == 1) {
            want = safety_oracle(a, accC);
        } else {
            want = buchi_oracle(a, accC);
        }
        for (size_t c = 0; c < a.cnodes.size(); ++c) {
            INFO("objective mode " << m << " node " << c);
            CHECK((bool)got.winC[c] == (bool)want[c]);
        }
    }
}

TEST_CASE("solve with an objective already true at the initial state has no obligations") {
    GameGraph g = chain_graph(3);
    auto lgg = LocalGameGraph::whole(g, 0);
    auto obj = SpecAutomaton::reach(1, 3, [](EnvState, SysState y) { return y == 0; });
    Play hist{{0, 0}};
    auto st = sol(lgg, hist, obj, nullptr, SolveMode::WorstCase);
    CHECK(!st->unrealizable);
    CHECK(st->objective_accepting());
    CHECK(!st->query(0).has_value());  // domain empty: nothing left to do
}

TEST_CASE("the room game of the worked example is realizable with the documented tie-break") {
    auto cg = compile(load_scenario_file(scenario_path("figure1.json")), "static");
    int r11 = cg.sc.room_of("r5_11");
    const auto& lgg = cg.hrg.lggs[0][r11];
    auto psi = reach_spec(lgg, cg.hrg.lay, cg.sc.room_of("r5_21"));
    auto phi = SpecAutomaton::universal(cg.hrg.lay.num_env[0], cg.hrg.lay.num_sys[0]);
    auto conc = concat_spec(phi, psi);
    EnvState xr = cg.hrg.lay.restr[0][r11][cg.initial_env];
    Play hist{{xr, cg.sys_state(cg.sc.cell_of("q5_22"), 0)}};
    auto st = sol(lgg, hist, conc, nullptr, SolveMode::WorstCase);
    REQUIRE(!st->unrealizable);
    auto y1 = st->query(xr);
    REQUIRE(y1.has_value());
    // shortest-path moves from q5_22 are q5_23 or q5_32; the tie-break picks
    // the lower state index, q5_23
    CHECK(cg.sys_label(0, *y1) == "q5_23");
    st->advance(xr, *y1);
    auto y2 = st->query(xr);
    REQUIRE(y2.has_value());
    CHECK(cg.sys_label(0, *y2) == "q5_33");
    st->advance(xr, *y2);
    auto y3 = st->query(xr);
    REQUIRE(y3.has_value());
    CHECK(cg.sys_label(0, *y3) == "q5_43");
}

TEST_CASE("the room game with every exit blocked is unrealizable") {
    auto sc = load_scenario_file(scenario_path("figure1.json"));
    sc.static_obstacles.push_back(sc.cell_of("q5_43"));
    sort_unique(sc.static_obstacles);
    auto cg = compile(sc, "static");
    int r11 = cg.sc.room_of("r5_11");
    const auto& lgg = cg.hrg.lggs[0][r11];
    auto psi = reach_spec(lgg, cg.hrg.lay, cg.sc.room_of("r5_21"));
    auto phi = SpecAutomaton::universal(cg.hrg.lay.num_env[0], cg.hrg.lay.num_sys[0]);
    auto conc = concat_spec(phi, psi);
    EnvState xr = cg.hrg.lay.restr[0][r11][cg.initial_env];
    Play hist{{xr, cg.sys_state(cg.sc.cell_of("q5_22"), 0)}};
    auto st = sol(lgg, hist, conc, nullptr, SolveMode::WorstCase);
    CHECK(st->unrealizable);
    // oracle agrees: no winning region membership at the initial node
    std::vector<char> tgt(st->arena->cnodes.size(), 0);
    for (size_t c = 0; c < st->arena->cnodes.size(); ++c)
        tgt[c] = st->arena->obj->accepting[st->arena->cnodes[c].qo];
    ReachOracle oracle(*st->arena, tgt);
    CHECK(!oracle.winC(st->arena->init_c, oracle.bound));
}

TEST_CASE("restrict_env with a universal assumption prunes nothing") {
    GameGraph g = chain_graph(3);
    auto lgg = LocalGameGraph::whole(g, 0);
    auto zeta = SpecAutomaton::safety(1, 3, [](EnvState, SysState) { return false; });
    auto reg = restrict_env(lgg, zeta, 0, 0, zeta.initial);
    CHECK(reg.usable);
    CHECK(!reg.warning);
    auto obj = SpecAutomaton::reach(1, 3, [](EnvState, SysState y) { return y == 2; });
    Play hist{{0, 0}};
    auto unres = sol(lgg, hist, obj, nullptr, SolveMode::WorstCase);
    auto res = sol(lgg, hist, obj, &zeta, SolveMode::AssumptionRestricted);
    CHECK(unres->arena->cnodes.size() == res->arena->cnodes.size());
    CHECK(unres->arena->edge_count == res->arena->edge_count);
}

TEST_CASE("restrict_env prunes moves into a permanently-closed trap") {
    TrapToy toy;
    auto lgg = LocalGameGraph::whole(toy.g, 0);
    // always eventually open (env state 0)
    auto zeta = SpecAutomaton::always_eventually(3, 2, [](EnvState x, SysState) { return x == 0; });
    auto reg = restrict_env(lgg, zeta, 0, 0, zeta.initial);
    REQUIRE(reg.usable);
    CHECK(!reg.warning);

    auto obj = SpecAutomaton::reach(3, 2, [](EnvState, SysState y) { return y == 1; });
    Play hist{{0, 0}};
    auto st = sol(lgg, hist, obj, &zeta, SolveMode::AssumptionRestricted);
    // no intermediate node with the trap env state survives the pruning
    for (auto& n : st->arena->inodes) CHECK(n.x != 2);
    // the same game unpruned explores trap moves
    auto st2 = sol(lgg, hist, obj, &zeta, SolveMode::WorstCase);
    bool has_trap = false;
    for (auto& n : st2->arena->inodes) has_trap = has_trap || n.x == 2;
    CHECK(has_trap);

    // an env move into the pruned region blocks the strategy
    CHECK(!st->query(2).has_value());
}

TEST_CASE("restrict_env falls back to the unpruned arena when the assumption is unsatisfiable") {
    TrapToy toy;
    auto lgg = LocalGameGraph::whole(toy.g, 0);
    auto zeta = SpecAutomaton::always_eventually(3, 2, [](EnvState x, SysState) { return x == 0; });
    // start inside the trap: the environment cannot recover the assumption
    auto reg = restrict_env(lgg, zeta, 2, 0, zeta.initial);
    CHECK(!reg.usable);
    CHECK(reg.warning);
    auto obj = SpecAutomaton::reach(3, 2, [](EnvState, SysState y) { return y == 1; });
    Play hist{{2, 0}};
    auto st = sol(lgg, hist, obj, &zeta, SolveMode::AssumptionRestricted);
    CHECK(st->assumption_warning);
}

TEST_CASE("sol with an already-accepted history leaves the strategy undefined everywhere") {
    GameGraph g = chain_graph(4);
    auto lgg = LocalGameGraph::whole(g, 0);
    auto obj = SpecAutomaton::reach(1, 4, [](EnvState, SysState y) { return y == 2; });
    Play hist{{0, 0}, {0, 1}, {0, 2}};
    auto st = sol(lgg, hist, obj, nullptr, SolveMode::WorstCase);
    CHECK(!st->unrealizable);
    CHECK(!st->query(0).has_value());
}

TEST_CASE("a play driven outside the winning region blocks") {
    // env chooses between a safe branch and a fatal branch once the system
    // strays to cell 2; from cell 2 with env 1 the target is unreachable.
    GameGraph g(2, 4);
    for (EnvState x = 0; x < 2; ++x)
        for (SysState y = 0; y < 4; ++y) g.add_sys(x, y, y);
    for (SysState y = 0; y < 4; ++y) {
        g.add_env(0, y, 0);
        g.add_env(0, y, 1);
        g.add_env(1, y, 1);
    }
    g.add_sys(0, 0, 1);  // winning route 0 -> 1 under either env state
    g.add_sys(1, 0, 1);
    g.add_sys(0, 0, 2);
    g.add_sys(0, 2, 3);
    g.add_sys(1, 2, 2);  // under env 1 cell 2 only loops
    g.add_sys(0, 3, 1);
    auto lgg = LocalGameGraph::whole(g, 0);
    auto obj = SpecAutomaton::reach(2, 4, [](EnvState, SysState y) { return y == 1; });
    Play hist{{0, 0}};
    auto st = sol(lgg, hist, obj, nullptr, SolveMode::WorstCase);
    REQUIRE(!st->unrealizable);
    CHECK(st->query(0).has_value());
    // drive the play somewhere the strategy did not choose: into cell 2
    st->advance(0, 2);
    CHECK(!st->query(1).has_value());  // env 1 from cell 2 is lost: blocked
}

TEST_CASE("winning one-step games propose the unique winning move") {
    GameGraph g(1, 2);
    g.add_env(0, 0, 0);
    g.add_env(0, 1, 0);
    g.add_sys(0, 0, 0);
    g.add_sys(0, 0, 1);
    g.add_sys(0, 1, 1);
    auto lgg = LocalGameGraph::whole(g, 0);
    auto obj = SpecAutomaton::reach(1, 2, [](EnvState, SysState y) { return y == 1; });
    Play hist{{0, 0}};
    auto st = sol(lgg, hist, obj, nullptr, SolveMode::WorstCase);
    auto y = st->query(0);
    REQUIRE(y.has_value());
    CHECK(*y == 1);
}

TEST_CASE("realizable reach strategies win within the arena size and stay in closure") {
    Rng rng(211);
    int realizable = 0;
    for (int it = 0; it < 120; ++it) {
        GameGraph g = random_game(rng, 3, 5);
        auto lgg = LocalGameGraph::whole(g, 0);
        std::uniform_int_distribution<int> dt(0, 4);
        SysState goal = dt(rng);
        auto obj = SpecAutomaton::reach(3, 5, [goal](EnvState, SysState y) { return y == goal; });
        Play hist{{0, 0}};
        auto st = sol(lgg, hist, obj, nullptr, SolveMode::WorstCase);
        if (st->unrealizable) continue;
        ++realizable;
        auto live = live_states(obj);
        RandomEnv env(g, 999 + it);
        Play play = hist;
        int bound = (int)st->arena->cnodes.size();
        bool won = st->objective_accepting();
        for (int k = 0; k < bound && !won; ++k) {
            EnvState x = env.choose(play);
            auto y = st->query(x);
            REQUIRE(y.has_value());
            // domain soundness: the proposed reply is an enabled move
            const auto& legal = lgg.sys_succ(x, play.back().second);
            REQUIRE(std::binary_search(legal.begin(), legal.end(), *y));
            st->advance(x, *y);
            play.emplace_back(x, *y);
            CHECK(in_closure(obj, play, live));  // possibly winning throughout
            won = st->objective_accepting();
        }
        CHECK(won);
    }
    CHECK(realizable > 30);
}

TEST_CASE("solving is deterministic") {
    Rng rng(5150);
    GameGraph g = random_game(rng, 3, 6);
    auto lgg = LocalGameGraph::whole(g, 0);
    auto obj = SpecAutomaton::reach(3, 6, [](EnvState, SysState y) { return y >= 4; });
    Play hist{{0, 0}};
    auto a = sol(lgg, hist, obj, nullptr, SolveMode::WorstCase);
    auto b = sol(lgg, hist, obj, nullptr, SolveMode::WorstCase);
    CHECK(a->solution.moveI == b->solution.moveI);
    CHECK(a->unrealizable == b->unrealizable);
}
