#pragma once

#include <functional>

#include "hgame/common.hpp"

namespace hgame {

// FiniteReach: accepts finite words whose run ends in an accepting state.
// Safety: accepts words (finite and infinite) whose run never leaves the safe
//         set; unsafe states are absorbing.
// Buchi: accepts infinite words visiting accepting states infinitely often.
enum class AcceptMode { FiniteReach, Safety, Buchi };

inline const char* mode_name(AcceptMode m) {
    switch (m) {
    case AcceptMode::FiniteReach: return "reach";
    case AcceptMode::Safety: return "safety";
    case AcceptMode::Buchi: return "buchi";
    }
    return "?";
}

// Deterministic total automaton over an alphabet of (env,sys) state pairs of a
// designated layer. `accepting` doubles as the safe set in Safety mode.
struct SpecAutomaton {
    AcceptMode mode = AcceptMode::FiniteReach;
    int num_states = 0;
    int initial = 0;
    int alpha_env = 0;  // alphabet = [0,alpha_env) x [0,alpha_sys)
    int alpha_sys = 0;
    std::vector<int> trans;       // num_states * alpha_env * alpha_sys
    std::vector<char> accepting;  // per state

    int alphabet_size() const { return alpha_env * alpha_sys; }
    int letter(EnvState x, SysState y) const {
        require(x >= 0 && x < alpha_env && y >= 0 && y < alpha_sys, Errc::LetterOutOfAlphabet,
                "letter (" + std::to_string(x) + "," + std::to_string(y) + ")");
        return x * alpha_sys + y;
    }
    int step(int s, int lt) const { return trans[static_cast<size_t>(s) * alphabet_size() + lt]; }
    int& step_ref(int s, int lt) { return trans[static_cast<size_t>(s) * alphabet_size() + lt]; }

    bool same_alphabet(const SpecAutomaton& o) const {
        return alpha_env == o.alpha_env && alpha_sys == o.alpha_sys;
    }

    int run_on(const Play& w) const {
        int s = initial;
        for (auto [x, y] : w) s = step(s, letter(x, y));
        return s;
    }

    // In Safety mode unsafe states must trap; call after hand-building tables.
    void normalize_safety() {
        if (mode != AcceptMode::Safety) return;
        for (int s = 0; s < num_states; ++s)
            if (!accepting[s])
                for (int lt = 0; lt < alphabet_size(); ++lt) step_ref(s, lt) = s;
    }

    // --- template library -------------------------------------------------

    using LetterPred = std::function<bool(EnvState, SysState)>;

    static SpecAutomaton blank(AcceptMode m, int states, int ax, int ay) {
        SpecAutomaton a;
        a.mode = m;
        a.num_states = states;
        a.alpha_env = ax;
        a.alpha_sys = ay;
        a.trans.assign(static_cast<size_t>(states) * ax * ay, 0);
        a.accepting.assign(states, 0);
        return a;
    }

    // Universal finite language (also the "no local task" spec).
    static SpecAutomaton universal(int ax, int ay) {
        auto a = blank(AcceptMode::FiniteReach, 1, ax, ay);
        a.accepting[0] = 1;
        return a;
    }

    // The empty language.
    static SpecAutomaton empty_lang(int ax, int ay) {
        return blank(AcceptMode::FiniteReach, 1, ax, ay);
    }

    // Finite words whose last letter satisfies `goal`. States: 0 seeking
    // (re-enterable), 1 accepting.
    static SpecAutomaton reach(int ax, int ay, const LetterPred& goal) {
        auto a = blank(AcceptMode::FiniteReach, 2, ax, ay);
        a.accepting[1] = 1;
        for (EnvState x = 0; x < ax; ++x)
            for (SysState y = 0; y < ay; ++y) {
                int lt = x * ay + y;
                int t = goal(x, y) ? 1 : 0;
                a.step_ref(0, lt) = t;
                a.step_ref(1, lt) = t;
            }
        return a;
    }

    // Words that never read a letter satisfying `bad` (weak-until style safety
    // templates are this automaton concatenated with an exit obligation).
    static SpecAutomaton safety(int ax, int ay, const LetterPred& bad) {
        auto a = blank(AcceptMode::Safety, 2, ax, ay);
        a.accepting[0] = 1;
        for (EnvState x = 0; x < ax; ++x)
            for (SysState y = 0; y < ay; ++y) {
                int lt = x * ay + y;
                a.step_ref(0, lt) = bad(x, y) ? 1 : 0;
                a.step_ref(1, lt) = 1;
            }
        return a;
    }

    // Finite words that have visited every group at least once and end once
    // all are visited. State = bitmask of visited groups.
    static SpecAutomaton visit_all(int ax, int ay, const std::vector<LetterPred>& groups) {
        int k = (int)groups.size();
        require(k <= 16, Errc::BadArgument, "visit_all supports at most 16 groups");
        int n = 1 << k;
        auto a = blank(AcceptMode::FiniteReach, n, ax, ay);
        a.accepting[n - 1] = 1;
        for (int s = 0; s < n; ++s)
            for (EnvState x = 0; x < ax; ++x)
                for (SysState y = 0; y < ay; ++y) {
                    int m = s;
                    for (int i = 0; i < k; ++i)
                        if (groups[i](x, y)) m |= 1 << i;
                    a.step_ref(s, x * ay + y) = m;
                }
        return a;
    }

    // Infinite words reading letters satisfying `good` infinitely often.
    static SpecAutomaton always_eventually(int ax, int ay, const LetterPred& good) {
        auto a = blank(AcceptMode::Buchi, 2, ax, ay);
        a.accepting[1] = 1;
        for (EnvState x = 0; x < ax; ++x)
            for (SysState y = 0; y < ay; ++y) {
                int lt = x * ay + y;
                int t = good(x, y) ? 1 : 0;
                a.step_ref(0, lt) = t;
                a.step_ref(1, lt) = t;
            }
        return a;
    }

    // Conjunction of always-eventually obligations, round-robin witness.
    // Accepting exactly when the last obligation of a round is witnessed.
    static SpecAutomaton always_eventually_all(int ax, int ay,
                                               const std::vector<LetterPred>& goods) {
        int k = (int)goods.size();
        if (k == 0) {
            auto a = blank(AcceptMode::Buchi, 1, ax, ay);
            a.accepting[0] = 1;
            return a;
        }
        auto a = blank(AcceptMode::Buchi, k + 1, ax, ay);  // state i: waiting for good_i; state k: round done
        a.accepting[k] = 1;
        for (int s = 0; s <= k; ++s)
            for (EnvState x = 0; x < ax; ++x)
                for (SysState y = 0; y < ay; ++y) {
                    int cur = (s == k) ? 0 : s;
                    while (cur < k && goods[cur](x, y)) ++cur;
                    a.step_ref(s, x * ay + y) = cur;
                }
        return a;
    }
};

struct AutomatonRun {
    int current = 0;
    std::vector<int> trace;  // visited states, including the initial one

    static AutomatonRun start(const SpecAutomaton& a) { return AutomatonRun{a.initial, {a.initial}}; }
};

inline AutomatonRun advance(const SpecAutomaton& a, AutomatonRun run, EnvState x, SysState y) {
    int lt = a.letter(x, y);
    run.current = a.step(run.current, lt);
    run.trace.push_back(run.current);
    return run;
}

inline bool accepts_finite(const SpecAutomaton& a, const Play& w) {
    require(a.mode != AcceptMode::Buchi, Errc::ModeMismatch,
            "accepts_finite is undefined for Buchi automata");
    if (a.mode == AcceptMode::FiniteReach) return a.accepting[a.run_on(w)];
    // Safety: the run must never leave the safe set. Unsafe states trap, so
    // checking the final state suffices for normalized automata; we still walk
    // the run to stay correct on non-normalized tables.
    int s = a.initial;
    if (!a.accepting[s]) return false;
    for (auto [x, y] : w) {
        s = a.step(s, a.letter(x, y));
        if (!a.accepting[s]) return false;
    }
    return true;
}

// States from which acceptance is still reachable for the mode.
inline std::vector<char> live_states(const SpecAutomaton& a) {
    int n = a.num_states;
    // Distinct successor adjacency.
    std::vector<std::vector<int>> succ(n), pred(n);
    for (int s = 0; s < n; ++s) {
        std::vector<int> ts;
        for (int lt = 0; lt < a.alphabet_size(); ++lt) ts.push_back(a.step(s, lt));
        sort_unique(ts);
        succ[s] = ts;
        for (int t : ts) pred[t].push_back(s);
    }
    std::vector<char> live(n, 0);
    auto back_reach = [&](std::vector<int> seeds) {
        std::vector<char> mark(n, 0);
        std::vector<int> stack;
        for (int s : seeds)
            if (!mark[s]) { mark[s] = 1; stack.push_back(s); }
        while (!stack.empty()) {
            int s = stack.back();
            stack.pop_back();
            for (int p : pred[s])
                if (!mark[p]) { mark[p] = 1; stack.push_back(p); }
        }
        return mark;
    };
    switch (a.mode) {
    case AcceptMode::FiniteReach: {
        std::vector<int> seeds;
        for (int s = 0; s < n; ++s)
            if (a.accepting[s]) seeds.push_back(s);
        live = back_reach(seeds);
        break;
    }
    case AcceptMode::Safety:
        for (int s = 0; s < n; ++s) live[s] = a.accepting[s];
        break;
    case AcceptMode::Buchi: {
        // Accepting states lying on a cycle, then everything that reaches one.
        std::vector<int> seeds;
        for (int s = 0; s < n; ++s) {
            if (!a.accepting[s]) continue;
            // s -> ... -> s via at least one edge?
            std::vector<char> mark(n, 0);
            std::vector<int> stack(succ[s]);
            for (int t : succ[s]) mark[t] = 1;
            bool loops = mark[s];
            while (!loops && !stack.empty()) {
                int u = stack.back();
                stack.pop_back();
                for (int t : succ[u])
                    if (!mark[t]) {
                        mark[t] = 1;
                        if (t == s) { loops = true; break; }
                        stack.push_back(t);
                    }
                if (mark[s]) loops = true;
            }
            if (loops) seeds.push_back(s);
        }
        live = back_reach(seeds);
        break;
    }
    }
    return live;
}

// Membership of w in the prefix closure of the represented language: the run
// never enters a state from which acceptance has become impossible. Dead
// states are absorbing in all three modes, so the final state decides.
inline bool in_closure(const SpecAutomaton& a, const Play& w) {
    auto live = live_states(a);
    return live[a.run_on(w)];
}

inline bool in_closure(const SpecAutomaton& a, const Play& w, const std::vector<char>& live) {
    return live[a.run_on(w)];
}

}  // namespace hgame
