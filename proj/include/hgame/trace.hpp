#pragma once

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hgame/controller.hpp"
#include "hgame/gridworld.hpp"

namespace hgame {

// Trace log: newline-delimited JSON. One header record, one record per play
// step (the initial pair has no tick data), one outcome record. State indices
// are the compile's deterministic enumeration; labels ride along for human
// consumption and cross-checks.

struct TraceHeader {
    std::string scenario, profile, mode;
    uint64_t seed = 0;
    int horizon = 0;
};

struct TraceFile {
    TraceHeader header;
    Play trace;
    std::string outcome_kind;
    int outcome_step = 0;
    int stuck_layer = -1;
};

inline std::string write_trace(const CompiledGame& cg, const Controller& ctrl,
                               const RunOutcome& out, const TraceHeader& hdr) {
    std::ostringstream os;
    json h{{"type", "header"},     {"format", "hgame-trace-1"},
           {"scenario", hdr.scenario}, {"profile", hdr.profile},
           {"mode", hdr.mode},     {"seed", hdr.seed},
           {"horizon", hdr.horizon}};
    os << h.dump() << "\n";
    const Play& tr = out.trace;
    for (size_t k = 0; k < tr.size(); ++k) {
        json s{{"type", "step"},
               {"k", k},
               {"x", tr[k].first},
               {"y", tr[k].second},
               {"x_label", cg.env_label0(tr[k].first)},
               {"y_label", cg.sys_label(0, tr[k].second)}};
        if (k >= 1 && k - 1 < ctrl.log.size()) {
            json layers = json::array();
            for (const auto& ll : ctrl.log[k - 1].layers)
                layers.push_back(json{{"nu", ll.context},
                                      {"target", ll.target},
                                      {"win", ll.win},
                                      {"done", ll.done},
                                      {"stuck", ll.gotstuck},
                                      {"unreal", ll.unreal},
                                      {"rf", ll.resolved_f},
                                      {"rh", ll.resolved_h}});
            s["layers"] = layers;
        }
        os << s.dump() << "\n";
    }
    json o{{"type", "outcome"},
           {"kind", outcome_name(out.kind)},
           {"step", out.step},
           {"stuck_layer", out.stuck_layer},
           {"trace_len", tr.size()}};
    os << o.dump() << "\n";
    return os.str();
}

inline TraceFile read_trace(const std::string& text) {
    TraceFile tf;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        std::string type = j.value("type", "");
        if (type == "header") {
            tf.header.scenario = j.value("scenario", "");
            tf.header.profile = j.value("profile", "");
            tf.header.mode = j.value("mode", "");
            tf.header.seed = j.value("seed", (uint64_t)0);
            tf.header.horizon = j.value("horizon", 0);
        } else if (type == "step") {
            tf.trace.emplace_back(j.at("x").get<int>(), j.at("y").get<int>());
        } else if (type == "outcome") {
            tf.outcome_kind = j.value("kind", "");
            tf.outcome_step = j.value("step", 0);
            tf.stuck_layer = j.value("stuck_layer", -1);
        }
    }
    require(!tf.trace.empty(), Errc::BadArgument, "trace file contains no steps");
    return tf;
}

// Game graph dump: the structured text format for golden tests and build-agg.
inline json dump_graph(const GameGraph& g, const std::string& kind) {
    json env = json::array(), sys = json::array();
    for (EnvState x = 0; x < g.num_env; ++x)
        for (SysState y = 0; y < g.num_sys; ++y) {
            if (!g.env_succ(x, y).empty()) env.push_back(json{x, y, g.env_succ(x, y)});
            if (!g.sys_succ(x, y).empty()) sys.push_back(json{x, y, g.sys_succ(x, y)});
        }
    return json{{"kind", kind},
                {"num_env", g.num_env},
                {"num_sys", g.num_sys},
                {"env_labels", g.env_labels},
                {"sys_labels", g.sys_labels},
                {"env_trans", env},
                {"sys_trans", sys}};
}

inline json dump_agg(const AbstractGameGraph& agg) {
    json j = dump_graph(agg.g, "agg");
    j["layer"] = agg.layer;
    j["provenance"] = agg.provenance == Provenance::Computed ? "computed" : "declared";
    json reps = json::array();
    for (auto& [x, y] : agg.repairs) reps.push_back(json{x, y});
    j["repaired_self_loops"] = reps;
    json nse = json::array(), nss = json::array();
    for (auto& [x, y] : agg.nonserial_env) nse.push_back(json{x, y});
    for (auto& [x, y] : agg.nonserial_sys) nss.push_back(json{x, y});
    j["nonserial_env"] = nse;
    j["nonserial_sys"] = nss;
    return j;
}

inline std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), Errc::BadArgument, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), Errc::BadArgument, "cannot write " + path);
    out << content;
}

}  // namespace hgame
