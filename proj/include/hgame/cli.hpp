#pragma once

#include <iostream>

#include <CLI11.hpp>

#include "hgame/trace.hpp"

namespace hgame {

namespace cli_detail {

struct CommonOpts {
    std::string scenario, profile = "static", out, trace_path, mode = "worst-case";
    uint64_t seed = 1;
    int horizon = 200, layer = 0, cap = 4096, samples = 50;
};

inline SolveMode parse_mode(const std::string& m) {
    if (m == "worst-case") return SolveMode::WorstCase;
    if (m == "assumption-restricted") return SolveMode::AssumptionRestricted;
    raise(Errc::BadArgument, "mode must be worst-case or assumption-restricted");
}

inline CompiledGame compile_opts(const CommonOpts& o) {
    auto sc = load_scenario_file(o.scenario);
    auto cg = compile(sc, o.profile, o.cap);
    cg.hrg.mode = parse_mode(o.mode);
    return cg;
}

inline int cmd_run(const CommonOpts& o) {
    auto cg = compile_opts(o);
    auto env = make_env(cg, o.seed);
    Controller ctrl;
    ctrl.init(cg.hrg);
    RunOutcome out = ctrl.run(*env, o.horizon);
    TraceHeader hdr{cg.sc.name, o.profile, o.mode, o.seed, o.horizon};
    std::string text = write_trace(cg, ctrl, out, hdr);
    if (!o.out.empty())
        spit(o.out, text);
    else
        std::cout << text;
    std::cerr << "outcome " << outcome_name(out.kind) << " at step " << out.step;
    if (out.kind == OutcomeKind::Stuck) std::cerr << " (unrealizable at layer " << out.stuck_layer << ")";
    std::cerr << ", trace length " << out.trace.size() << ", solver calls "
              << ctrl.total_solver_calls() << "\n";
    return 0;
}

inline int cmd_check(const CommonOpts& o) {
    auto cg = compile_opts(o);
    TraceFile tf = read_trace(slurp(o.trace_path));
    Verdict v = check_winning(tf.trace, cg.hrg);
    json segs = json::array();
    for (const auto& d : v.diags)
        segs.push_back(json{{"layer", d.layer},
                            {"segment", d.segment},
                            {"context", d.context < 0 ? "top" : cg.sys_label(d.layer + 1, d.context)},
                            {"final", d.is_final},
                            {"prefix_ok", d.prefix_ok},
                            {"exact_ok", d.exact_ok},
                            {"weak_ok", d.weak_ok}});
    json rec{{"type", "verdict"}, {"kind", verdict_name(v.kind)}, {"segments", segs}};
    if (!o.out.empty()) spit(o.out, rec.dump() + "\n");
    std::cout << rec.dump() << "\n";
    switch (v.kind) {
    case VerdictKind::Winning: return 0;
    case VerdictKind::PossiblyWinning: return 1;
    case VerdictKind::Violated: return 2;
    }
    return 3;
}

inline int cmd_validate(const CommonOpts& o) {
    auto cg = compile_opts(o);
    int bad = 0;
    auto rep = validate_serial(cg.hrg.base);
    for (auto& v : rep.violations) {
        std::cout << "nonserial layer 0 " << (v.env_side ? "env" : "sys") << " at ("
                  << cg.env_label0(v.x) << "," << cg.sys_label(0, v.y) << ")\n";
        ++bad;
    }
    for (Layer l = 0; l < cg.hrg.lay.depth; ++l) {
        auto viol = check_locality(l == 0 ? cg.hrg.base : cg.hrg.aggs[l - 1].raw, cg.hrg.lay, l);
        for (auto& v : viol) {
            std::cout << "locality violation layer " << l << " context "
                      << cg.sys_label(l + 1, v.context) << " x=" << v.x << " y="
                      << cg.sys_label(l, v.y) << " -> " << cg.sys_label(l, v.y_next) << "\n";
            ++bad;
        }
    }
    // Sampled membership checks: projections of random plays are plays of the
    // AGGs, local segments are plays of their LGGs.
    Rng rng(o.seed);
    for (int s = 0; s < o.samples; ++s) {
        Play p{cg.hrg.init};
        for (int k = 0; k < 40; ++k) {
            auto [x, y] = p.back();
            const auto& ex = cg.hrg.base.env_succ(x, y);
            EnvState xn = ex[std::uniform_int_distribution<size_t>(0, ex.size() - 1)(rng)];
            const auto& sy = cg.hrg.base.sys_succ(xn, y);
            SysState yn = sy[std::uniform_int_distribution<size_t>(0, sy.size() - 1)(rng)];
            p.emplace_back(xn, yn);
        }
        for (Layer l = 1; l <= cg.hrg.lay.depth; ++l) {
            Play proj_l = project(cg.hrg.lay, p, l);
            if (!is_play(cg.hrg.layer_graph(l), proj_l)) {
                std::cout << "projection of sampled play " << s << " is not a play at layer " << l
                          << "\n";
                ++bad;
            }
        }
        ProjectionBundle b = localize(cg.hrg.lay, p);
        for (Layer l = 0; l < cg.hrg.lay.depth; ++l)
            for (int m = 0; m < b.num_segments(l); ++m) {
                SysState nu = b.proj[l + 1][m].second;
                Play seg = b.segment_local(l, m);
                const auto& lgg = cg.hrg.lggs[l][nu];
                bool ok = true;
                for (size_t k = 1; k < seg.size() && ok; ++k) {
                    const auto& ev = lgg.env_succ(seg[k - 1].first, seg[k - 1].second);
                    ok = std::binary_search(ev.begin(), ev.end(), seg[k].first);
                    if (ok) {
                        const auto& sv = lgg.sys_succ(seg[k].first, seg[k - 1].second);
                        ok = std::binary_search(sv.begin(), sv.end(), seg[k].second);
                    }
                }
                if (!ok) {
                    std::cout << "segment " << m << " of sampled play " << s
                              << " is not a local play at layer " << l << "\n";
                    ++bad;
                }
            }
    }
    if (bad == 0) {
        std::cout << "ok: serial, truly local, " << o.samples << " sampled plays project correctly\n";
        return 0;
    }
    std::cout << bad << " violations\n";
    return 1;
}

inline int cmd_build_agg(const CommonOpts& o) {
    auto cg = compile_opts(o);
    require(o.layer >= 1 && o.layer <= cg.hrg.lay.depth, Errc::LayerOutOfRange, "layer");
    json j = dump_agg(cg.hrg.aggs[o.layer - 1]);
    std::vector<std::string> el, sl;
    for (int x = 0; x < cg.hrg.lay.num_env[o.layer]; ++x) el.push_back(cg.env_label(o.layer, x));
    for (int y = 0; y < cg.hrg.lay.num_sys[o.layer]; ++y) sl.push_back(cg.sys_label(o.layer, y));
    j["env_labels"] = el;
    j["sys_labels"] = sl;
    std::string text = j.dump(2) + "\n";
    if (!o.out.empty())
        spit(o.out, text);
    else
        std::cout << text;
    return 0;
}

inline int cmd_render(const CommonOpts& o) {
    auto cg = compile_opts(o);
    TraceFile tf = read_trace(slurp(o.trace_path));
    require(is_play(cg.hrg.base, tf.trace), Errc::TraceNotAPlay, "trace does not replay");
    ProjectionBundle b = localize(cg.hrg.lay, tf.trace);
    std::string svg = render_trace(cg, tf.trace, b, o.layer);
    if (!o.out.empty())
        spit(o.out, svg);
    else
        std::cout << svg;
    return 0;
}

inline int cmd_bench(const CommonOpts& o) {
    auto cg = compile_opts(o);
    std::cout << "variant\tsolver_calls\tarena_nodes\tarena_edges\titerations\ttime_ms\toutcome\n";
    {
        auto t0 = std::chrono::steady_clock::now();
        auto env = make_env(cg, o.seed);
        Controller ctrl;
        ctrl.init(cg.hrg);
        RunOutcome out = ctrl.run(*env, o.horizon);
        double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                        .count();
        std::cout << "hierarchical\t" << ctrl.total_solver_calls() << "\t"
                  << ctrl.accum.complete_nodes + ctrl.accum.inter_nodes << "\t"
                  << ctrl.accum.edges << "\t" << ctrl.accum.iterations << "\t" << ms << "\t"
                  << outcome_name(out.kind) << "\n";
    }
    {
        // Flat baseline: one monolithic layer-0 reachability solve for the
        // final goal cells named by the scenario's cell tasks.
        std::vector<int> goal_cells;
        for (auto& [rid, d] : cg.sc.spec_cells)
            if (d.tmpl == "reach")
                for (auto& t : d.targets) goal_cells.push_back(cg.sc.cell_of(t));
        require(!goal_cells.empty(), Errc::BadArgument,
                "bench needs a reach cell task for the flat baseline");
        sort_unique(goal_cells);
        auto whole = LocalGameGraph::whole(cg.hrg.base, 0);
        SpecAutomaton obj = SpecAutomaton::reach(
            cg.hrg.lay.num_env[0], cg.hrg.lay.num_sys[0], [&](EnvState, SysState y) {
                return std::binary_search(goal_cells.begin(), goal_cells.end(),
                                          cg.cell_of_sys(y));
            });
        auto t0 = std::chrono::steady_clock::now();
        Play init{cg.hrg.init};
        auto st = sol(whole, init, obj, nullptr, cg.hrg.mode);
        double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                        .count();
        std::cout << "flat\t1\t" << st->stats.complete_nodes + st->stats.inter_nodes << "\t"
                  << st->stats.edges << "\t" << st->stats.iterations << "\t" << ms << "\t"
                  << (st->unrealizable ? "unrealizable" : "realizable") << "\n";
    }
    return 0;
}

}  // namespace cli_detail

inline int cli_main(std::vector<std::string> args) {
    using namespace cli_detail;
    CLI::App app{"hierarchical reactive controller synthesis on grid-world buildings"};
    app.require_subcommand(1);
    CommonOpts o;

    auto add_common = [&](CLI::App* c, bool needs_trace = false) {
        c->add_option("--scenario", o.scenario, "scenario document")->required();
        c->add_option("--profile", o.profile, "environment profile name");
        c->add_option("--seed", o.seed, "rng seed");
        c->add_option("--horizon", o.horizon, "step bound");
        c->add_option("--layer", o.layer, "layer index");
        c->add_option("--out", o.out, "output path (stdout otherwise)");
        c->add_option("--mode", o.mode, "worst-case|assumption-restricted");
        c->add_option("--cap", o.cap, "environment enumeration cap");
        c->add_option("--samples", o.samples, "validate: sampled plays");
        if (needs_trace) c->add_option("--trace", o.trace_path, "trace log path")->required();
    };
    auto* run = app.add_subcommand("run", "run the controller against a profile");
    add_common(run);
    auto* check = app.add_subcommand("check", "verdict of a recorded trace (exit 0/1/2)");
    add_common(check, true);
    auto* validate = app.add_subcommand("validate", "seriality, locality, projection sampling");
    add_common(validate);
    auto* bagg = app.add_subcommand("build-agg", "dump a computed abstract game graph");
    add_common(bagg);
    auto* render = app.add_subcommand("render", "draw a trace on a layer's floor plan");
    add_common(render, true);
    auto* bench = app.add_subcommand("bench", "hierarchical vs flat solve statistics");
    add_common(bench);

    std::vector<char*> argv;
    std::string prog = "hgame";
    argv.push_back(prog.data());
    for (auto& a : args) argv.push_back(a.data());
    try {
        app.parse((int)argv.size(), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    try {
        if (run->parsed()) return cmd_run(o);
        if (check->parsed()) return cmd_check(o);
        if (validate->parsed()) return cmd_validate(o);
        if (bagg->parsed()) return cmd_build_agg(o);
        if (render->parsed()) return cmd_render(o);
        if (bench->parsed()) return cmd_bench(o);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return check->parsed() ? 3 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return check->parsed() ? 3 : 1;
    }
    return 1;
}

}  // namespace hgame
