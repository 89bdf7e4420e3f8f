#pragma once

#include <variant>

#include "hgame/common.hpp"
#include "hgame/hrg.hpp"
#include "hgame/layering.hpp"
#include "hgame/solver.hpp"

namespace hgame {

enum class OutcomeKind { DoneAll, Stuck, HorizonReached };

inline const char* outcome_name(OutcomeKind k) {
    switch (k) {
    case OutcomeKind::DoneAll: return "DoneAll";
    case OutcomeKind::Stuck: return "Stuck";
    case OutcomeKind::HorizonReached: return "HorizonReached";
    }
    return "?";
}

struct RunOutcome {
    OutcomeKind kind;
    int step = 0;          // termination step k
    Layer stuck_layer = -1;  // the unique UnReal layer for Stuck
    Play trace;
};

struct LayerTickLog {
    SysState context = -1;
    SysState target = -1;  // induced next context, -1 when no reach obligation
    bool win = false, done = false, gotstuck = false, unreal = false;
    bool resolved_f = false, resolved_h = false;
};

struct TickLog {
    int k = 0;
    std::vector<LayerTickLog> layers;  // index = layer
    SysState emitted = -1;
    bool terminated = false;
};

// Runtime of the dynamic hierarchical strategy: per-layer context, target,
// strategy handles, local histories (held by the projection bundle), and the
// Win/Done/GotStuck/UnReal predicate evaluation of each tick. Strategies are
// re-solved only when the context or the induced target changes, or when the
// layer above has just completed its task.
class Controller {
public:
    const HierarchicalGame* hrg = nullptr;
    Play play;
    ProjectionBundle bundle;
    int step = 0;
    std::vector<TickLog> log;
    SolveStats accum;

    struct LayerRt {
        std::unique_ptr<SolvedStrategy> f;  // reach-obligation strategy f_{nu,nu'}
        std::unique_ptr<SolvedStrategy> h;  // local-task-only strategy
        std::optional<SysState> prev_target;
        bool context_changed = true;  // nu(k) != nu(k-1); true on first entry
        bool prev_done = false;
        // Win bookkeeping: run of the current context's task automaton over
        // the local history.
        const SpecAutomaton* phi = nullptr;
        int phi_state = 0;
        bool phi_safe = true;
        // tick scratch
        bool win = false, done = false, stuck = false, unreal = false;
        int solver_calls = 0;
    };
    std::vector<LayerRt> rt;

    const SpecAutomaton& phi_of(Layer l, SysState nu) const {
        return l == hrg->lay.depth ? hrg->phi_top : hrg->phi[l][nu];
    }
    const SpecAutomaton* zeta_of(Layer l, SysState nu) const {
        if (l == hrg->lay.depth) return hrg->zeta_top ? &*hrg->zeta_top : nullptr;
        auto& z = hrg->zeta[l][nu];
        return z ? &*z : nullptr;
    }
    const LocalGameGraph& lgg_of(Layer l, SysState nu) const {
        return l == hrg->lay.depth ? hrg->top : hrg->lggs[l][nu];
    }

    int solver_calls(Layer l) const { return rt[l].solver_calls; }
    int total_solver_calls() const {
        int n = 0;
        for (auto& r : rt) n += r.solver_calls;
        return n;
    }

    void init(const HierarchicalGame& h) {
        hrg = &h;
        int L = h.lay.depth;
        play = {h.init};
        bundle.init(h.lay, h.init.first, h.init.second);
        rt.clear();
        rt.resize(L + 1);
        step = 0;
        log.clear();
        for (Layer l = 0; l <= L; ++l) {
            reset_phi_run(l);
        }
        // The top-layer strategy is fixed for the whole run.
        rt[L].h = run_sol(L, bundle.context_of(L), nullptr);
    }

    bool top_unrealizable() const { return rt.back().h && rt.back().h->unrealizable; }

    // One computation round: sense x_next, lift it, refresh strategies top
    // down, evaluate the predicates, and either terminate or emit the move.
    std::variant<SysState, RunOutcome> tick(EnvState x_next) {
        const auto& base = hrg->base;
        auto [xp, yp] = play.back();
        {
            const auto& legal = base.env_succ(xp, yp);
            require(std::binary_search(legal.begin(), legal.end(), x_next), Errc::EnvMoveIllegal,
                    "env move " + base.env_name(x_next) + " not enabled");
        }
        int L = hrg->lay.depth;
        std::vector<EnvState> xs, xr;
        bundle.lift_env_now(x_next, xs, xr);

        TickLog tl;
        tl.k = step;
        tl.layers.resize(L + 1);
        std::vector<SolvedStrategy*> cur_f(L + 1, nullptr);

        for (Layer l = L; l >= 0; --l) {
            auto& r = rt[l];
            auto& lg = tl.layers[l];
            SysState nu = bundle.context_of(l);
            lg.context = (l == L) ? bundle.cur_sys[L] : nu;
            if (l == L) {
                cur_f[l] = r.h.get();
            } else if (rt[l + 1].stuck) {
                cur_f[l] = nullptr;  // the game above is lost; pass the abort down
            } else if (rt[l + 1].done) {
                bool fresh_done = !rt[l + 1].prev_done;
                if (!r.h || fresh_done) {
                    r.h = run_sol(l, nu, nullptr);
                    lg.resolved_h = true;
                }
                cur_f[l] = r.h.get();
            } else {
                auto t = cur_f[l + 1]->query(xr[l + 1]);
                // not done and not stuck above implies the strategy is defined
                require(t.has_value(), Errc::BadArgument, "internal: undefined induced target");
                lg.target = *t;
                if (!r.f || r.context_changed || !r.prev_target || *r.prev_target != *t) {
                    r.f = run_sol(l, nu, &*t);
                    lg.resolved_f = true;
                }
                r.prev_target = *t;
                cur_f[l] = r.f.get();
            }
            // Predicates.
            r.win = eval_win(l);
            bool done_above = (l == L) || rt[l + 1].done;
            r.done = false;
            if (done_above && r.win) {
                if (l < L && !r.h) {
                    r.h = run_sol(l, nu, nullptr);
                    lg.resolved_h = true;
                }
                r.done = !rt[l].h->defined_at(xr[l]);
            }
            r.stuck = !r.done && !(cur_f[l] && cur_f[l]->defined_at(xr[l]));
            r.unreal = r.stuck && (l == L || !rt[l + 1].stuck);
            lg.win = r.win;
            lg.done = r.done;
            lg.gotstuck = r.stuck;
            lg.unreal = r.unreal;
        }

        if (rt[0].stuck || rt[0].done) {
            tl.terminated = true;
            log.push_back(tl);
            RunOutcome out;
            out.step = step;
            out.trace = play;
            if (rt[0].stuck) {
                out.kind = OutcomeKind::Stuck;
                for (Layer l = 0; l <= L; ++l)
                    if (rt[l].unreal) out.stuck_layer = l;
            } else {
                out.kind = OutcomeKind::DoneAll;
            }
            return out;
        }

        SysState y_next = *cur_f[0]->query(xr[0]);
        tl.emitted = y_next;
        log.push_back(tl);

        // Commit the move and maintain histories, strategy memory and the
        // Win runs per layer.
        std::vector<size_t> klen(L + 1);
        for (Layer l = 0; l <= L; ++l) klen[l] = bundle.kappa[l].size();
        play.emplace_back(x_next, y_next);
        bundle.append(x_next, y_next);
        for (Layer l = 0; l <= L; ++l) {
            bool trigger = bundle.kappa[l].size() > klen[l];
            bool ctx_change = (l < L) && bundle.kappa[l + 1].size() > klen[l + 1];
            auto& r = rt[l];
            if (ctx_change) {
                r.f.reset();
                r.h.reset();
                r.prev_target.reset();
                r.context_changed = true;
                reset_phi_run(l);
            } else {
                r.context_changed = false;
                if (trigger) {
                    auto [xn, yn] = bundle.proj_restricted[l].back();
                    if (r.f) r.f->advance(xn, yn);
                    if (r.h) r.h->advance(xn, yn);
                    advance_phi_run(l, xn, yn);
                }
            }
            r.prev_done = r.done;
        }
        ++step;
        return y_next;
    }

    RunOutcome run(EnvStrategy& env, int horizon) {
        for (int k = 0; k < horizon; ++k) {
            EnvState x = env.choose(play);
            auto res = tick(x);
            if (std::holds_alternative<RunOutcome>(res)) return std::get<RunOutcome>(res);
        }
        RunOutcome out;
        out.kind = OutcomeKind::HorizonReached;
        out.step = step;
        out.trace = play;
        return out;
    }

private:
    std::unique_ptr<SolvedStrategy> run_sol(Layer l, SysState nu, const SysState* target) {
        const auto& lgg = lgg_of(l, nu);
        const SpecAutomaton& task = phi_of(l, nu);
        const SpecAutomaton* z = zeta_of(l, nu);
        Play hist = bundle.local_history_play(l);
        std::unique_ptr<SolvedStrategy> s;
        if (target) {
            SpecAutomaton psi = reach_spec(lgg, hrg->lay, *target);
            auto obj = std::make_shared<const SpecAutomaton>(concat_spec(task, psi));
            s = sol(lgg, hist, *obj, z, hrg->mode);
            s->owned_obj = obj;  // the arena points at this automaton
        } else {
            s = sol(lgg, hist, task, z, hrg->mode);
        }
        rt[l].solver_calls++;
        accum.complete_nodes += s->stats.complete_nodes;
        accum.inter_nodes += s->stats.inter_nodes;
        accum.edges += s->stats.edges;
        accum.iterations += s->stats.iterations;
        accum.micros += s->stats.micros;
        return s;
    }

    void reset_phi_run(Layer l) {
        auto& r = rt[l];
        r.phi = &phi_of(l, bundle.context_of(l));
        r.phi_state = r.phi->initial;
        r.phi_safe = r.phi->accepting[r.phi_state] || r.phi->mode != AcceptMode::Safety;
        for (auto [x, y] : bundle.local_history_play(l)) advance_phi_run_state(l, x, y);
    }
    void advance_phi_run_state(Layer l, EnvState x, SysState y) {
        auto& r = rt[l];
        r.phi_state = r.phi->step(r.phi_state, r.phi->letter(x, y));
        if (r.phi->mode == AcceptMode::Safety) r.phi_safe = r.phi_safe && r.phi->accepting[r.phi_state];
    }
    void advance_phi_run(Layer l, EnvState x, SysState y) { advance_phi_run_state(l, x, y); }

    bool eval_win(Layer l) const {
        auto& r = rt[l];
        switch (r.phi->mode) {
        case AcceptMode::FiniteReach: return r.phi->accepting[r.phi_state];
        case AcceptMode::Safety: return r.phi_safe;
        case AcceptMode::Buchi: return false;  // no finite history is in a Buchi language
        }
        return false;
    }
};

}  // namespace hgame
