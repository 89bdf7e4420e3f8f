#pragma once

#include <array>
#include <cstdio>
#include <map>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "hgame/common.hpp"
#include "hgame/hrg.hpp"

namespace hgame {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Scenario model
// ---------------------------------------------------------------------------

struct FloorSpec {
    std::string id;
    int width = 0, height = 0;
};

struct RoomSpec {
    std::string id;
    int floor = -1;          // index into floors; stair rooms use the upper floor
    bool is_stairs = false;
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // rect, 1-based inclusive (non-stairs)
    std::vector<int> cells;
};

struct DoorSpec {
    std::string id;
    std::vector<int> cells;
    int room_a = -1, room_b = -1;
    bool dynamic = false;
    bool initially_closed = false;
};

struct PassageSpec {
    int a = -1, b = -1;
    int door = -1;  // -1: plain opening
};

struct StairSpec {
    std::string id;
    int floor_lo = -1, floor_hi = -1;
    int room = -1;  // its own room index
    std::vector<int> guard_doors;
};

enum class ProfileKind { Static, Scripted, FairDoors, Adversarial };

struct ProfileSpec {
    std::string name;
    ProfileKind kind = ProfileKind::Static;
    int T = 4;                    // reopen bound for fair/adversarial door dynamics
    double p_close = 0.3, p_open = 0.5;
    std::vector<std::pair<int, std::vector<int>>> events;  // (step, dynamic obstacle set)
};

struct SpecDescriptor {
    std::string tmpl;  // reach | avoid_until_exit | visit_all | gf | pick | gf_open | trivial
    std::vector<std::string> targets;
    std::vector<std::vector<std::string>> groups;  // visit_all
    std::vector<std::string> doors;                // gf_open
};

// Hand-declared room-level dynamics: the abstract move from `from` to each of
// `to` is available exactly at layer-1 env states whose closed-door set is
// `closed`. Scenario authors who know the rooms adjacency can bypass the
// computed abstraction; `validate` samples plays against the declaration.
struct DeclaredRoomMove {
    std::vector<int> closed;  // door indices
    int from = -1;
    std::vector<int> to;
};

struct BuildingScenario {
    std::string name;
    std::vector<FloorSpec> floors;
    std::vector<RoomSpec> rooms;
    std::vector<DoorSpec> doors;
    std::vector<PassageSpec> passages;
    std::vector<StairSpec> stairs;
    std::vector<DeclaredRoomMove> declared_room_agg;  // empty: compute the AGG
    std::vector<std::pair<int, int>> walls;  // extra blocked adjacencies

    int num_cells = 0;
    std::vector<std::string> cell_labels;
    std::vector<int> cell_room;
    std::vector<std::array<int, 3>> cell_pos;  // floor, col, row (render coordinates)

    int robot_cell = -1;
    std::vector<int> static_obstacles;
    std::vector<int> bottle_cells;

    SpecDescriptor spec_floor;                       // phi^2
    std::map<std::string, SpecDescriptor> spec_rooms;  // phi^1 per floor id
    std::map<std::string, SpecDescriptor> spec_cells;  // phi^0 per room id
    SpecDescriptor ass_floor;
    std::map<std::string, SpecDescriptor> ass_rooms;
    std::map<std::string, SpecDescriptor> ass_cells;
    std::map<std::string, ProfileSpec> profiles;

    int cell_of(const std::string& label) const {
        for (int c = 0; c < num_cells; ++c)
            if (cell_labels[c] == label) return c;
        raise(Errc::SchemaError, "unknown cell " + label);
    }
    int room_of(const std::string& id) const {
        for (size_t r = 0; r < rooms.size(); ++r)
            if (rooms[r].id == id) return (int)r;
        raise(Errc::SchemaError, "unknown room " + id);
    }
    int floor_of(const std::string& id) const {
        for (size_t f = 0; f < floors.size(); ++f)
            if (floors[f].id == id) return (int)f;
        raise(Errc::SchemaError, "unknown floor " + id);
    }
    int door_of(const std::string& id) const {
        for (size_t d = 0; d < doors.size(); ++d)
            if (doors[d].id == id) return (int)d;
        raise(Errc::SchemaError, "unknown door " + id);
    }
};

namespace gw_detail {

inline SpecDescriptor parse_spec(const json& j) {
    SpecDescriptor d;
    d.tmpl = j.value("template", "trivial");
    if (j.contains("targets"))
        for (auto& t : j["targets"]) d.targets.push_back(t.get<std::string>());
    if (j.contains("target")) d.targets.push_back(j["target"].get<std::string>());
    if (j.contains("groups"))
        for (auto& g : j["groups"]) {
            std::vector<std::string> grp;
            for (auto& t : g) grp.push_back(t.get<std::string>());
            d.groups.push_back(std::move(grp));
        }
    if (j.contains("doors"))
        for (auto& t : j["doors"]) d.doors.push_back(t.get<std::string>());
    return d;
}

}  // namespace gw_detail

// Parses and validates a scenario document. Geometry errors (overlapping
// rooms, dangling doors, detached passages) are collected and reported.
inline BuildingScenario load_scenario(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        raise(Errc::SchemaError, std::string("parse: ") + e.what());
    }
    BuildingScenario sc;
    std::vector<std::string> geo;
    try {
        sc.name = j.value("name", "scenario");
        for (auto& jf : j.at("floors"))
            sc.floors.push_back({jf.at("id").get<std::string>(), jf.at("width").get<int>(),
                                 jf.at("height").get<int>()});
        for (auto& f : sc.floors)
            if (f.width < 1 || f.width > 9 || f.height < 1 || f.height > 9)
                raise(Errc::SchemaError, "floor dimensions must be within 1..9");

        // Floor grid cells, column-major per floor; labels q<floor><col><row>.
        for (size_t fi = 0; fi < sc.floors.size(); ++fi) {
            const auto& f = sc.floors[fi];
            std::string suffix = f.id;
            if (!suffix.empty() && (suffix[0] == 'f' || suffix[0] == 'F')) suffix = suffix.substr(1);
            for (int c = 1; c <= f.width; ++c)
                for (int r = 1; r <= f.height; ++r) {
                    sc.cell_labels.push_back("q" + suffix + "_" + std::to_string(c) +
                                             std::to_string(r));
                    sc.cell_pos.push_back({(int)fi, c, r});
                }
        }

        for (auto& jr : j.at("rooms")) {
            RoomSpec r;
            r.id = jr.at("id").get<std::string>();
            r.floor = sc.floor_of(jr.at("floor").get<std::string>());
            auto rect = jr.at("rect");
            r.x0 = rect[0].get<int>();
            r.y0 = rect[1].get<int>();
            r.x1 = rect[2].get<int>();
            r.y1 = rect[3].get<int>();
            sc.rooms.push_back(r);
        }
        if (j.contains("stairs"))
            for (auto& js : j["stairs"]) {
                StairSpec s;
                s.id = js.at("id").get<std::string>();
                s.floor_lo = sc.floor_of(js.at("from").get<std::string>());
                s.floor_hi = sc.floor_of(js.at("to").get<std::string>());
                if (s.floor_lo == s.floor_hi) geo.push_back("stair " + s.id + " joins equal floors");
                RoomSpec r;
                r.id = s.id;
                r.floor = s.floor_hi;  // downward stairs attach to the upper floor
                r.is_stairs = true;
                for (auto& jc : js.at("cells")) {
                    sc.cell_labels.push_back(jc.at("id").get<std::string>());
                    sc.cell_pos.push_back({s.floor_hi, jc.at("col").get<int>(), jc.at("row").get<int>()});
                    r.cells.push_back((int)sc.cell_labels.size() - 1);
                }
                s.room = (int)sc.rooms.size();
                sc.rooms.push_back(r);
                // guard doors resolved in a second pass, once doors exist
                sc.stairs.push_back(s);
            }
        sc.num_cells = (int)sc.cell_labels.size();

        // Assign cells to rooms; floors must be partitioned exactly.
        sc.cell_room.assign(sc.num_cells, -1);
        for (size_t ri = 0; ri < sc.rooms.size(); ++ri) {
            auto& r = sc.rooms[ri];
            if (r.is_stairs) {
                for (int c : r.cells) sc.cell_room[c] = (int)ri;
                continue;
            }
            for (int c = 0; c < sc.num_cells; ++c) {
                auto [fl, col, row] = sc.cell_pos[c];
                if (fl == r.floor && col >= r.x0 && col <= r.x1 && row >= r.y0 && row <= r.y1) {
                    if (sc.cell_room[c] != -1)
                        geo.push_back("rooms " + sc.rooms[sc.cell_room[c]].id + " and " + r.id +
                                      " overlap at " + sc.cell_labels[c]);
                    sc.cell_room[c] = (int)ri;
                    r.cells.push_back(c);
                }
            }
        }
        for (int c = 0; c < sc.num_cells; ++c)
            if (sc.cell_room[c] == -1)
                geo.push_back("cell " + sc.cell_labels[c] + " belongs to no room");

        if (j.contains("doors"))
            for (auto& jd : j["doors"]) {
                DoorSpec d;
                d.id = jd.at("id").get<std::string>();
                d.room_a = sc.room_of(jd.at("rooms")[0].get<std::string>());
                d.room_b = sc.room_of(jd.at("rooms")[1].get<std::string>());
                for (auto& c : jd.at("cells")) d.cells.push_back(sc.cell_of(c.get<std::string>()));
                d.dynamic = jd.value("dynamic", false);
                d.initially_closed = jd.value("initially_closed", false);
                for (int c : d.cells)
                    if (sc.cell_room[c] != d.room_a && sc.cell_room[c] != d.room_b)
                        geo.push_back("door " + d.id + " cell " + sc.cell_labels[c] +
                                      " outside its rooms");
                sc.doors.push_back(d);
            }
        // resolve stair guard doors now that doors exist
        if (j.contains("stairs")) {
            size_t si = 0;
            for (auto& js : j["stairs"]) {
                sc.stairs[si].guard_doors.clear();
                if (js.contains("guard_doors"))
                    for (auto& gd : js["guard_doors"])
                        sc.stairs[si].guard_doors.push_back(sc.door_of(gd.get<std::string>()));
                ++si;
            }
        }

        if (j.contains("passages"))
            for (auto& jp : j["passages"]) {
                PassageSpec p;
                p.a = sc.cell_of(jp.at("cells")[0].get<std::string>());
                p.b = sc.cell_of(jp.at("cells")[1].get<std::string>());
                if (jp.contains("door")) p.door = sc.door_of(jp["door"].get<std::string>());
                if (sc.cell_room[p.a] == sc.cell_room[p.b])
                    geo.push_back("passage joins cells of the same room");
                sc.passages.push_back(p);
            }
        if (j.contains("walls"))
            for (auto& jw : j["walls"])
                sc.walls.push_back({sc.cell_of(jw[0].get<std::string>()),
                                    sc.cell_of(jw[1].get<std::string>())});
        if (j.contains("declared_agg"))
            for (auto& jm : j["declared_agg"].at("rooms")) {
                DeclaredRoomMove m;
                m.from = sc.room_of(jm.at("from").get<std::string>());
                for (auto& t : jm.at("to")) m.to.push_back(sc.room_of(t.get<std::string>()));
                if (jm.contains("closed"))
                    for (auto& d : jm["closed"]) m.closed.push_back(sc.door_of(d.get<std::string>()));
                sort_unique(m.closed);
                sc.declared_room_agg.push_back(std::move(m));
            }

        sc.robot_cell = sc.cell_of(j.at("robot").get<std::string>());
        if (j.contains("obstacles"))
            for (auto& o : j["obstacles"]) sc.static_obstacles.push_back(sc.cell_of(o.get<std::string>()));
        sort_unique(sc.static_obstacles);
        if (std::binary_search(sc.static_obstacles.begin(), sc.static_obstacles.end(),
                               sc.robot_cell))
            geo.push_back("robot initial cell is occupied");
        if (j.contains("bottles"))
            for (auto& b : j["bottles"]) sc.bottle_cells.push_back(sc.cell_of(b.get<std::string>()));
        sort_unique(sc.bottle_cells);

        if (j.contains("specs")) {
            auto& js = j["specs"];
            if (js.contains("floor")) sc.spec_floor = gw_detail::parse_spec(js["floor"]);
            if (js.contains("rooms"))
                for (auto& [k, v] : js["rooms"].items()) sc.spec_rooms[k] = gw_detail::parse_spec(v);
            if (js.contains("cells"))
                for (auto& [k, v] : js["cells"].items()) sc.spec_cells[k] = gw_detail::parse_spec(v);
        }
        if (j.contains("assumptions")) {
            auto& js = j["assumptions"];
            if (js.contains("floor")) sc.ass_floor = gw_detail::parse_spec(js["floor"]);
            if (js.contains("rooms"))
                for (auto& [k, v] : js["rooms"].items()) sc.ass_rooms[k] = gw_detail::parse_spec(v);
            if (js.contains("cells"))
                for (auto& [k, v] : js["cells"].items()) sc.ass_cells[k] = gw_detail::parse_spec(v);
        }
        if (j.contains("profiles"))
            for (auto& [k, v] : j["profiles"].items()) {
                ProfileSpec p;
                p.name = k;
                std::string kind = v.value("kind", "static");
                if (kind == "static") p.kind = ProfileKind::Static;
                else if (kind == "scripted") p.kind = ProfileKind::Scripted;
                else if (kind == "fair-doors") p.kind = ProfileKind::FairDoors;
                else if (kind == "adversarial") p.kind = ProfileKind::Adversarial;
                else raise(Errc::SchemaError, "unknown profile kind " + kind);
                p.T = v.value("T", 4);
                p.p_close = v.value("p_close", 0.3);
                p.p_open = v.value("p_open", 0.5);
                if (v.contains("events"))
                    for (auto& ev : v["events"]) {
                        std::vector<int> cells;
                        for (auto& c : ev.at("obstacles")) cells.push_back(sc.cell_of(c.get<std::string>()));
                        sort_unique(cells);
                        p.events.push_back({ev.at("at").get<int>(), cells});
                    }
                sc.profiles[k] = p;
            }
        if (sc.profiles.empty()) {
            ProfileSpec p;
            p.name = "static";
            sc.profiles["static"] = p;
        }
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        raise(Errc::SchemaError, e.what());
    }
    if (!geo.empty()) {
        std::string msg;
        for (auto& g : geo) msg += g + "; ";
        raise(Errc::GeometryError, msg);
    }
    return sc;
}

inline BuildingScenario load_scenario_file(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    require(f != nullptr, Errc::BadArgument, "cannot open " + path);
    std::string text;
    char buf[4096];
    size_t n;
    while ((n = std::fread(buf, 1, sizeof buf, f)) > 0) text.append(buf, n);
    std::fclose(f);
    return load_scenario(text);
}

// ---------------------------------------------------------------------------
// Compilation: scenario + profile -> layer-0 game, layering, HRG
// ---------------------------------------------------------------------------

// A layer-0 environment state: a stage (index into a table of obstacle-cell
// sets) plus an age per door (0 = open; k = closed for k consecutive steps).
struct EnvValue {
    int stage = 0;
    std::vector<uint8_t> door_age;
    bool operator==(const EnvValue& o) const = default;
};

struct CompiledGame {
    BuildingScenario sc;
    ProfileSpec profile;
    int state_cap = 4096;

    std::vector<std::vector<int>> stage_sets;  // sorted obstacle cell sets
    std::vector<EnvValue> env_values;          // layer-0 env states
    int initial_env = 0;
    int real_stages = 0;  // stages 0..real_stages-1 come from the profile script

    bool with_bottles = false;
    int num_sys0 = 0;

    HierarchicalGame hrg;

    // layer-1/2 value tables: door mask / stair mask plus the carried flag bit
    std::vector<std::pair<uint32_t, int>> l1_values, l2_values;

    // --- layer-0 helpers ---
    SysState sys_state(int cell, int flag) const { return with_bottles ? cell * 2 + flag : cell; }
    int cell_of_sys(SysState y) const { return with_bottles ? y / 2 : y; }
    int flag_of_sys(SysState y) const { return with_bottles ? y % 2 : 0; }

    std::vector<int> occupied(int env_idx) const {
        const EnvValue& v = env_values[env_idx];
        std::vector<int> occ = stage_sets[v.stage];
        for (size_t d = 0; d < v.door_age.size(); ++d)
            if (v.door_age[d] > 0)
                for (int c : sc.doors[d].cells) occ.push_back(c);
        sort_unique(occ);
        return occ;
    }

    std::string env_label0(int env_idx) const {
        auto occ = occupied(env_idx);
        if (occ.empty()) return "{bot}";
        std::string s = "{";
        for (size_t i = 0; i < occ.size(); ++i) s += (i ? "," : "") + sc.cell_labels[occ[i]];
        return s + "}";
    }
    std::string env_label(Layer l, int idx) const {
        if (l == 0) return env_label0(idx);
        auto [mask, flag] = (l == 1) ? l1_values[idx] : l2_values[idx];
        std::string s = "{";
        bool first = true;
        int n = (l == 1) ? (int)sc.doors.size() : (int)sc.stairs.size();
        for (int i = 0; i < n; ++i)
            if (mask & (1u << i)) {
                s += (first ? "" : ",") + ((l == 1) ? sc.doors[i].id : sc.stairs[i].id);
                first = false;
            }
        if (first) s += "bot";
        if (flag) s += first ? "Bottle" : ",Bottle";
        return s + "}";
    }
    std::string sys_label(Layer l, SysState y) const {
        if (l == 0) {
            std::string s = sc.cell_labels[cell_of_sys(y)];
            if (with_bottles && flag_of_sys(y)) s += "+B";
            return s;
        }
        if (l == 1) return sc.rooms[y].id;
        return sc.floors[y].id;
    }
    SysState sys_of_label(const std::string& label) const {
        std::string base = label;
        int flag = 0;
        if (with_bottles && base.size() > 2 && base.substr(base.size() - 2) == "+B") {
            base = base.substr(0, base.size() - 2);
            flag = 1;
        }
        return sys_state(sc.cell_of(base), flag);
    }
};

namespace gw_detail {

struct EnvValueHash {
    size_t operator()(const EnvValue& v) const {
        size_t h = std::hash<int>()(v.stage);
        for (auto a : v.door_age) h = h * 1315423911u + a;
        return h;
    }
};

// letter predicate helpers for template instantiation
inline SpecAutomaton::LetterPred sys_in(const CompiledGame& cg, Layer l,
                                        std::vector<int> targets) {
    sort_unique(targets);
    if (l == 0) {
        // targets are cells; any flag matches
        return [&cg, targets](EnvState, SysState y) {
            return std::binary_search(targets.begin(), targets.end(), cg.cell_of_sys(y));
        };
    }
    return [targets](EnvState, SysState y) {
        return std::binary_search(targets.begin(), targets.end(), y);
    };
}

}  // namespace gw_detail

// Compiles a scenario under a named environment profile. Environment states
// are enumerated from the profile's controllable set (script stages and
// dynamic door ages), closed under context restriction; restriction images
// that are no reachable profile configuration are padded with self-loop
// dynamics. Raises StateBlowup past `cap` enumerated values.
inline CompiledGame compile(const BuildingScenario& scenario, const std::string& profile_name,
                            int cap = 4096) {
    CompiledGame cg;
    cg.sc = scenario;
    cg.state_cap = cap;
    auto it = cg.sc.profiles.find(profile_name);
    require(it != cg.sc.profiles.end(), Errc::BadArgument, "unknown profile " + profile_name);
    cg.profile = it->second;
    const BuildingScenario& sc = cg.sc;
    int ncells = sc.num_cells;
    int ndoors = (int)sc.doors.size();
    require(ndoors <= 16 && (int)sc.stairs.size() <= 16, Errc::SchemaError,
            "at most 16 doors and stairs supported");

    cg.with_bottles = !sc.bottle_cells.empty();
    cg.num_sys0 = cg.with_bottles ? 2 * ncells : ncells;

    // --- stage table -------------------------------------------------------
    // Stage 0 is the static obstacle set; scripted profiles append one stage
    // per event (static obstacles always included).
    cg.stage_sets.push_back(sc.static_obstacles);
    if (cg.profile.kind == ProfileKind::Scripted)
        for (auto& [at, cells] : cg.profile.events) {
            std::vector<int> s = sc.static_obstacles;
            s.insert(s.end(), cells.begin(), cells.end());
            sort_unique(s);
            cg.stage_sets.push_back(s);
        }
    cg.real_stages = (int)cg.stage_sets.size();

    bool doors_evolve = cg.profile.kind == ProfileKind::FairDoors ||
                        cg.profile.kind == ProfileKind::Adversarial;
    int T = cg.profile.T;
    require(T >= 1 && T <= 250, Errc::SchemaError, "profile bound T out of range");

    // --- env value enumeration ---------------------------------------------
    std::unordered_map<EnvValue, int, gw_detail::EnvValueHash> vid;
    auto intern_value = [&](const EnvValue& v) {
        auto f = vid.find(v);
        if (f != vid.end()) return f->second;
        require((int)cg.env_values.size() < cap, Errc::StateBlowup,
                "environment enumeration exceeds cap " + std::to_string(cap));
        int id = (int)cg.env_values.size();
        vid.emplace(v, id);
        cg.env_values.push_back(v);
        return id;
    };
    auto intern_stage = [&](std::vector<int> cells) {
        for (size_t s = 0; s < cg.stage_sets.size(); ++s)
            if (cg.stage_sets[s] == cells) return (int)s;
        cg.stage_sets.push_back(std::move(cells));
        return (int)cg.stage_sets.size() - 1;
    };

    EnvValue init_v;
    init_v.stage = 0;
    init_v.door_age.assign(ndoors, 0);
    for (int d = 0; d < ndoors; ++d)
        if (sc.doors[d].initially_closed) init_v.door_age[d] = 1;
    cg.initial_env = intern_value(init_v);

    // Successor values under the profile's dynamics. Synthetic (restriction
    // padding) stages self-loop; real script stages may also advance.
    auto value_succs = [&](const EnvValue& v) {
        std::vector<int> stages{v.stage};
        if (cg.profile.kind == ProfileKind::Scripted && v.stage + 1 < cg.real_stages)
            stages.push_back(v.stage + 1);
        std::vector<std::vector<uint8_t>> age_opts(ndoors);
        for (int d = 0; d < ndoors; ++d) {
            uint8_t a = v.door_age[d];
            if (!doors_evolve || !sc.doors[d].dynamic) {
                age_opts[d] = {a};
            } else if (a == 0) {
                age_opts[d] = {0, 1};
            } else if ((int)a < T) {
                age_opts[d] = {0, (uint8_t)(a + 1)};
            } else {
                age_opts[d] = {0};  // the reopen bound forces the door open
            }
        }
        std::vector<EnvValue> out;
        std::vector<size_t> idx(ndoors, 0);
        while (true) {
            EnvValue nv;
            nv.door_age.resize(ndoors);
            for (int d = 0; d < ndoors; ++d) nv.door_age[d] = age_opts[d][idx[d]];
            for (int s : stages) {
                nv.stage = s;
                out.push_back(nv);
            }
            int d = 0;
            for (; d < ndoors; ++d) {
                if (++idx[d] < age_opts[d].size()) break;
                idx[d] = 0;
            }
            if (d == ndoors) break;
        }
        return out;
    };

    // Reachable closure under dynamics.
    for (size_t head = 0; head < cg.env_values.size(); ++head) {
        EnvValue v = cg.env_values[head];
        for (const auto& nv : value_succs(v)) intern_value(nv);
    }

    // --- restriction machinery ---------------------------------------------
    // Region of a room: its cells plus the far cells of incident passages.
    int nrooms = (int)sc.rooms.size();
    std::vector<std::vector<int>> region(nrooms);
    for (int r = 0; r < nrooms; ++r) region[r] = sc.rooms[r].cells;
    for (const auto& p : sc.passages) {
        region[sc.cell_room[p.a]].push_back(p.b);
        region[sc.cell_room[p.b]].push_back(p.a);
    }
    for (auto& r : region) sort_unique(r);

    auto occupied_of = [&](const EnvValue& v) {
        std::vector<int> occ = cg.stage_sets[v.stage];
        for (int d = 0; d < ndoors; ++d)
            if (v.door_age[d] > 0)
                for (int c : sc.doors[d].cells) occ.push_back(c);
        sort_unique(occ);
        return occ;
    };

    // r^0_room applied to a value: doors fully inside the region keep their
    // age, partially covered door cells move into the (synthetic) stage set,
    // everything outside the region is dropped.
    auto restrict_value = [&](const EnvValue& v, int room) {
        const auto& reg = region[room];
        EnvValue out;
        out.door_age.assign(ndoors, 0);
        std::vector<int> stage_cells;
        for (int c : cg.stage_sets[v.stage])
            if (std::binary_search(reg.begin(), reg.end(), c)) stage_cells.push_back(c);
        for (int d = 0; d < ndoors; ++d) {
            if (v.door_age[d] == 0) continue;
            bool all_in = true, any_in = false;
            for (int c : sc.doors[d].cells) {
                bool in = std::binary_search(reg.begin(), reg.end(), c);
                all_in = all_in && in;
                any_in = any_in || in;
            }
            if (all_in) {
                out.door_age[d] = v.door_age[d];
            } else if (any_in) {
                for (int c : sc.doors[d].cells)
                    if (std::binary_search(reg.begin(), reg.end(), c)) stage_cells.push_back(c);
            }
        }
        sort_unique(stage_cells);
        out.stage = intern_stage(std::move(stage_cells));
        return out;
    };

    // Closure of the value table under dynamics and all room restrictions.
    {
        size_t head = 0;
        while (head < cg.env_values.size()) {
            EnvValue v = cg.env_values[head++];
            for (const auto& nv : value_succs(v)) intern_value(nv);
            for (int r = 0; r < nrooms; ++r) intern_value(restrict_value(v, r));
        }
    }
    int nx0 = (int)cg.env_values.size();

    // --- layer-0 game graph --------------------------------------------------
    // Movement: 4-neighborhood within a room plus passages and stay; moving
    // into an occupied cell is forbidden, staying is always allowed.
    std::vector<std::vector<int>> adj(ncells);
    {
        std::map<std::pair<int, int>, bool> blocked;
        for (auto& w : sc.walls) {
            blocked[{w.first, w.second}] = true;
            blocked[{w.second, w.first}] = true;
        }
        std::map<std::array<int, 3>, int> by_pos;
        for (int c = 0; c < ncells; ++c) by_pos[sc.cell_pos[c]] = c;
        for (int c = 0; c < ncells; ++c) {
            auto [fl, col, row] = sc.cell_pos[c];
            const int dc[4] = {1, -1, 0, 0}, dr[4] = {0, 0, 1, -1};
            for (int k = 0; k < 4; ++k) {
                auto itb = by_pos.find({fl, col + dc[k], row + dr[k]});
                if (itb == by_pos.end()) continue;
                int c2 = itb->second;
                if (sc.cell_room[c] != sc.cell_room[c2]) continue;  // wall unless passage
                if (blocked.count({c, c2})) continue;
                adj[c].push_back(c2);
            }
        }
        for (const auto& p : sc.passages) {
            adj[p.a].push_back(p.b);
            adj[p.b].push_back(p.a);
        }
        for (auto& v : adj) sort_unique(v);
    }

    GameGraph g0(nx0, cg.num_sys0);
    g0.sys_labels.assign(cg.num_sys0, "");
    std::vector<char> bottle_mask(ncells, 0);
    for (int b : sc.bottle_cells) bottle_mask[b] = 1;
    std::vector<std::vector<int>> occ_cache(nx0);
    for (int x = 0; x < nx0; ++x) occ_cache[x] = occupied_of(cg.env_values[x]);
    for (int x = 0; x < nx0; ++x) {
        // env transitions are independent of the system state
        std::vector<int> succ;
        for (const auto& nv : value_succs(cg.env_values[x])) succ.push_back(vid.at(nv));
        sort_unique(succ);
        const auto& occ = occ_cache[x];
        for (SysState y = 0; y < cg.num_sys0; ++y) {
            for (int s : succ) g0.add_env(x, y, s);
            int cell = cg.cell_of_sys(y), flag = cg.flag_of_sys(y);
            g0.add_sys(x, y, y);  // stay
            for (int c2 : adj[cell]) {
                if (std::binary_search(occ.begin(), occ.end(), c2)) continue;
                int f2 = cg.with_bottles ? (flag | bottle_mask[c2]) : 0;
                g0.add_sys(x, y, cg.sys_state(c2, f2));
            }
        }
    }
    for (SysState y = 0; y < cg.num_sys0; ++y) g0.sys_labels[y] = cg.sys_label(0, y);
    for (int x = 0; x < nx0; ++x) g0.env_labels.push_back(cg.env_label0(x));

    // --- layering ------------------------------------------------------------
    int nfloors = (int)sc.floors.size();
    int nstairs = (int)sc.stairs.size();

    // layer-1 values: (closed-door mask, flag); layer-2: (blocked stairs, flag)
    auto intern_l = [&](std::vector<std::pair<uint32_t, int>>& table, uint32_t mask, int flag) {
        for (size_t i = 0; i < table.size(); ++i)
            if (table[i] == std::make_pair(mask, flag)) return (int)i;
        table.push_back({mask, flag});
        return (int)table.size() - 1;
    };
    auto door_mask_of = [&](int x) {
        uint32_t m = 0;
        const auto& occ = occ_cache[x];
        for (int d = 0; d < ndoors; ++d) {
            bool closed = !sc.doors[d].cells.empty();
            for (int c : sc.doors[d].cells)
                closed = closed && std::binary_search(occ.begin(), occ.end(), c);
            if (closed) m |= 1u << d;
        }
        return m;
    };
    auto stair_mask_of = [&](uint32_t door_mask) {
        uint32_t m = 0;
        for (int s = 0; s < nstairs; ++s) {
            const auto& gd = sc.stairs[s].guard_doors;
            if (gd.empty()) continue;
            bool blocked = true;
            for (int d : gd) blocked = blocked && (door_mask & (1u << d));
            if (blocked) m |= 1u << s;
        }
        return m;
    };

    Layering lay;
    lay.depth = 2;
    lay.ry.resize(3);
    lay.rx.resize(3);
    lay.ry[1].resize(cg.num_sys0);
    for (SysState y = 0; y < cg.num_sys0; ++y) lay.ry[1][y] = sc.cell_room[cg.cell_of_sys(y)];
    lay.ry[2].resize(nrooms);
    for (int r = 0; r < nrooms; ++r) lay.ry[2][r] = sc.rooms[r].floor;

    // Rx^1 over (x0, y0): door mask from occupancy, flag from the system state.
    lay.rx[1].resize((size_t)nx0 * cg.num_sys0);
    for (int x = 0; x < nx0; ++x) {
        uint32_t dm = door_mask_of(x);
        for (SysState y = 0; y < cg.num_sys0; ++y)
            lay.rx[1][(size_t)x * cg.num_sys0 + y] = intern_l(cg.l1_values, dm, cg.flag_of_sys(y));
    }
    int nx1 = (int)cg.l1_values.size();
    // layer-1 restriction: doors with a room on the context floor survive
    std::vector<uint32_t> floor_doors(nfloors, 0);
    for (int d = 0; d < ndoors; ++d) {
        floor_doors[sc.rooms[sc.doors[d].room_a].floor] |= 1u << d;
        floor_doors[sc.rooms[sc.doors[d].room_b].floor] |= 1u << d;
    }
    // enumerate restriction closure of layer-1 values
    {
        size_t head = 0;
        while (head < cg.l1_values.size()) {
            auto [mask, flag] = cg.l1_values[head++];
            for (int f = 0; f < nfloors; ++f) intern_l(cg.l1_values, mask & floor_doors[f], flag);
        }
        nx1 = (int)cg.l1_values.size();
    }
    // Rx^2 over (x1, y1): blocked stairs from guard doors, flag carried.
    lay.rx[2].resize((size_t)nx1 * nrooms);
    for (int x = 0; x < nx1; ++x) {
        auto [mask, flag] = cg.l1_values[x];
        uint32_t sm = stair_mask_of(mask);
        for (int r = 0; r < nrooms; ++r)
            lay.rx[2][(size_t)x * nrooms + r] = intern_l(cg.l2_values, sm, flag);
    }
    int nx2 = (int)cg.l2_values.size();
    lay.num_env = {nx0, nx1, nx2};
    lay.num_sys = {cg.num_sys0, nrooms, nfloors};

    lay.restr.resize(2);
    lay.restr[0].resize(nrooms);
    for (int r = 0; r < nrooms; ++r) {
        auto& t = lay.restr[0][r];
        t.resize(nx0);
        for (int x = 0; x < nx0; ++x) t[x] = vid.at(restrict_value(cg.env_values[x], r));
    }
    lay.restr[1].resize(nfloors);
    for (int f = 0; f < nfloors; ++f) {
        auto& t = lay.restr[1][f];
        t.resize(nx1);
        for (int x = 0; x < nx1; ++x) {
            auto [mask, flag] = cg.l1_values[x];
            t[x] = intern_l(cg.l1_values, mask & floor_doors[f], flag);
        }
    }

    StatePair init{cg.initial_env,
                   cg.sys_state(sc.robot_cell,
                                cg.with_bottles && bottle_mask[sc.robot_cell] ? 1 : 0)};
    cg.hrg = HierarchicalGame::assemble(std::move(g0), std::move(lay), init);

    // Declared room-level dynamics replace the computed layer-1 sys map; the
    // env side and the seriality repairs stay computed, everything above is
    // rebuilt from the declaration.
    if (!sc.declared_room_agg.empty()) {
        auto& a0 = cg.hrg.aggs[0];
        GameGraph raw_decl(nx1, nrooms);
        raw_decl.env_trans = a0.raw.env_trans;
        for (const auto& m : sc.declared_room_agg) {
            uint32_t mask = 0;
            for (int d : m.closed) mask |= 1u << d;
            for (int x = 0; x < nx1; ++x)
                if (cg.l1_values[x].first == mask)
                    for (int t : m.to) raw_decl.add_sys(x, m.from, t);
        }
        GameGraph eff_decl = raw_decl;
        for (auto& [x, y] : a0.repairs)
            if (eff_decl.sys_succ(x, y).empty()) eff_decl.add_sys(x, y, y);
        a0.raw = std::move(raw_decl);
        a0.g = std::move(eff_decl);
        a0.provenance = Provenance::Declared;
        cg.hrg.aggs[1] = build_agg(cg.hrg.aggs[0].g, cg.hrg.lay, 2);
        for (SysState f = 0; f < nfloors; ++f) {
            bool nonempty = false;
            for (SysState r = 0; r < nrooms; ++r)
                if (cg.hrg.lay.ry[2][r] == f) nonempty = true;
            if (nonempty) cg.hrg.lggs[1][f] = build_lgg(cg.hrg.aggs[0].g, cg.hrg.lay, 1, f);
        }
        cg.hrg.top = LocalGameGraph::whole(cg.hrg.aggs[1].g, 2);
        cg.hrg.top.layer = 2;
    }

    // --- spec instantiation ---------------------------------------------------
    const Layering& L = cg.hrg.lay;
    auto targets_to_ids = [&](Layer l, const std::vector<std::string>& ts) {
        std::vector<int> ids;
        for (auto& t : ts) {
            if (l == 0) ids.push_back(sc.cell_of(t));
            else if (l == 1) ids.push_back(cg.sc.room_of(t));
            else ids.push_back(cg.sc.floor_of(t));
        }
        return ids;
    };
    auto instantiate = [&](Layer l, SysState nu, const SpecDescriptor& d) -> SpecAutomaton {
        int ax = L.num_env[l], ay = L.num_sys[l];
        auto inner_guard = [&](SpecAutomaton a) {
            if (l == L.depth || nu < 0) return a;
            // letters outside the context's inner states lead to a dead state
            const auto& lgg = cg.hrg.lggs[l][nu];
            int dead = a.num_states;
            a.num_states += 1;
            a.accepting.push_back(0);
            a.trans.resize((size_t)a.num_states * a.alphabet_size());
            for (int lt = 0; lt < a.alphabet_size(); ++lt)
                a.step_ref(dead, lt) = dead;
            for (int s = 0; s < dead; ++s)
                for (EnvState x = 0; x < ax; ++x)
                    for (SysState y = 0; y < ay; ++y)
                        if (!lgg.is_inner(y)) a.step_ref(s, a.letter(x, y)) = dead;
            return a;
        };
        if (d.tmpl == "trivial" || d.tmpl.empty()) return SpecAutomaton::universal(ax, ay);
        if (d.tmpl == "reach") {
            auto ids = targets_to_ids(l, d.targets);
            return inner_guard(SpecAutomaton::reach(ax, ay, gw_detail::sys_in(cg, l, ids)));
        }
        if (d.tmpl == "avoid_until_exit") {
            auto ids = targets_to_ids(l, d.targets);
            auto bad = gw_detail::sys_in(cg, l, ids);
            return inner_guard(SpecAutomaton::safety(ax, ay, bad));
        }
        if (d.tmpl == "visit_all") {
            std::vector<SpecAutomaton::LetterPred> preds;
            for (auto& grp : d.groups) preds.push_back(gw_detail::sys_in(cg, l, targets_to_ids(l, grp)));
            if (preds.empty())
                for (auto& t : d.targets)
                    preds.push_back(gw_detail::sys_in(cg, l, targets_to_ids(l, {t})));
            return inner_guard(SpecAutomaton::visit_all(ax, ay, preds));
        }
        if (d.tmpl == "pick") {
            require(cg.with_bottles && l == 0, Errc::SchemaError, "pick needs bottles at layer 0");
            return inner_guard(SpecAutomaton::reach(
                ax, ay, [&cg](EnvState, SysState y) { return cg.flag_of_sys(y) == 1; }));
        }
        if (d.tmpl == "gf") {
            auto ids = targets_to_ids(l, d.targets);
            return SpecAutomaton::always_eventually(ax, ay, gw_detail::sys_in(cg, l, ids));
        }
        if (d.tmpl == "gf_open") {
            require(l == 1, Errc::SchemaError, "gf_open is a layer-1 assumption template");
            std::vector<SpecAutomaton::LetterPred> preds;
            for (auto& did : d.doors) {
                int d_idx = cg.sc.door_of(did);
                preds.push_back([&cg, d_idx](EnvState x, SysState) {
                    return (cg.l1_values[x].first & (1u << d_idx)) == 0;
                });
            }
            return SpecAutomaton::always_eventually_all(ax, ay, preds);
        }
        raise(Errc::SchemaError, "unknown template " + d.tmpl);
    };

    cg.hrg.phi_top = instantiate(2, -1, sc.spec_floor);
    for (auto& [fid, d] : sc.spec_rooms) {
        int f = sc.floor_of(fid);
        cg.hrg.phi[1][f] = instantiate(1, f, d);
    }
    for (auto& [rid, d] : sc.spec_cells) {
        int r = sc.room_of(rid);
        cg.hrg.phi[0][r] = instantiate(0, r, d);
    }
    if (!sc.ass_floor.tmpl.empty() && sc.ass_floor.tmpl != "trivial")
        cg.hrg.zeta_top = instantiate(2, -1, sc.ass_floor);
    for (auto& [fid, d] : sc.ass_rooms) {
        int f = sc.floor_of(fid);
        cg.hrg.zeta[1][f] = instantiate(1, f, d);
    }
    for (auto& [rid, d] : sc.ass_cells) {
        int r = sc.room_of(rid);
        cg.hrg.zeta[0][r] = instantiate(0, r, d);
    }
    return cg;
}

// ---------------------------------------------------------------------------
// Environment profiles as environment strategies
// ---------------------------------------------------------------------------

// Static: the environment repeats its current state forever.
struct StaticEnv : EnvStrategy {
    EnvState choose(const Play& h) override { return h.back().first; }
};

// Scripted: stage advances exactly at its event times.
struct ScriptedEnv : EnvStrategy {
    const CompiledGame* cg;
    explicit ScriptedEnv(const CompiledGame& c) : cg(&c) {}
    EnvState choose(const Play& h) override {
        const EnvValue& cur = cg->env_values[h.back().first];
        int k_next = (int)h.size();  // the step being produced
        int target = 0;
        for (size_t e = 0; e < cg->profile.events.size(); ++e)
            if (cg->profile.events[e].first <= k_next) target = (int)e + 1;
        EnvValue nv = cur;
        nv.stage = std::clamp(target, cur.stage, cur.stage + 1);
        for (size_t i = 0; i < cg->env_values.size(); ++i)
            if (cg->env_values[i] == nv) return (EnvState)i;
        return h.back().first;
    }
};

// Fair doors: seeded stochastic closures with the reopen-within-T guarantee
// enforced by the age bound.
struct FairDoorsEnv : EnvStrategy {
    const CompiledGame* cg;
    Rng rng;
    FairDoorsEnv(const CompiledGame& c, uint64_t seed) : cg(&c), rng(seed) {}
    EnvState choose(const Play& h) override {
        EnvValue v = cg->env_values[h.back().first];
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (size_t d = 0; d < v.door_age.size(); ++d) {
            if (!cg->sc.doors[d].dynamic) continue;
            uint8_t a = v.door_age[d];
            if (a == 0)
                v.door_age[d] = (u(rng) < cg->profile.p_close) ? 1 : 0;
            else if ((int)a >= cg->profile.T)
                v.door_age[d] = 0;
            else
                v.door_age[d] = (u(rng) < cg->profile.p_open) ? 0 : (uint8_t)(a + 1);
        }
        for (size_t i = 0; i < cg->env_values.size(); ++i)
            if (cg->env_values[i] == v) return (EnvState)i;
        return h.back().first;
    }
};

// Adversarial doors: close as soon as possible, hold until the bound forces a
// reopen. The most hostile behavior the fair-door dynamics admit.
struct AdversarialDoorsEnv : EnvStrategy {
    const CompiledGame* cg;
    explicit AdversarialDoorsEnv(const CompiledGame& c) : cg(&c) {}
    EnvState choose(const Play& h) override {
        EnvValue v = cg->env_values[h.back().first];
        for (size_t d = 0; d < v.door_age.size(); ++d) {
            if (!cg->sc.doors[d].dynamic) continue;
            uint8_t a = v.door_age[d];
            if (a == 0) v.door_age[d] = 1;
            else if ((int)a >= cg->profile.T) v.door_age[d] = 0;
            else v.door_age[d] = (uint8_t)(a + 1);
        }
        for (size_t i = 0; i < cg->env_values.size(); ++i)
            if (cg->env_values[i] == v) return (EnvState)i;
        return h.back().first;
    }
};

inline std::unique_ptr<EnvStrategy> make_env(const CompiledGame& cg, uint64_t seed) {
    switch (cg.profile.kind) {
    case ProfileKind::Static: return std::make_unique<StaticEnv>();
    case ProfileKind::Scripted: return std::make_unique<ScriptedEnv>(cg);
    case ProfileKind::FairDoors: return std::make_unique<FairDoorsEnv>(cg, seed);
    case ProfileKind::Adversarial: return std::make_unique<AdversarialDoorsEnv>(cg);
    }
    return std::make_unique<StaticEnv>();
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

// Draws the layer's floor plan with the path of a trace as an SVG document.
// Projected states are filled, abstract-only states hollow, the initial state
// light and the final state dark.
inline std::string render_trace(const CompiledGame& cg, const Play& trace,
                                const ProjectionBundle& bundle, Layer layer) {
    cg.hrg.lay.check_layer(layer);
    const BuildingScenario& sc = cg.sc;
    const int cell_px = 28, gap = 40;
    int total_w = 0, max_h = 0;
    std::vector<int> xoff(sc.floors.size());
    for (size_t f = 0; f < sc.floors.size(); ++f) {
        xoff[f] = total_w + gap;
        total_w += sc.floors[f].width * cell_px + gap + 2 * cell_px;
        max_h = std::max(max_h, sc.floors[f].height * cell_px);
    }
    auto cx = [&](int cell) {
        auto [f, col, row] = sc.cell_pos[cell];
        return xoff[f] + col * cell_px + cell_px / 2;
    };
    auto cy = [&](int cell) {
        auto [f, col, row] = sc.cell_pos[cell];
        return row * cell_px + cell_px / 2 + gap;
    };
    auto room_center = [&](int room, int& x, int& y) {
        long sx = 0, sy = 0;
        for (int c : sc.rooms[room].cells) {
            sx += cx(c);
            sy += cy(c);
        }
        size_t n = std::max<size_t>(1, sc.rooms[room].cells.size());
        x = (int)(sx / (long)n);
        y = (int)(sy / (long)n);
    };

    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << total_w + gap << "' height='"
        << max_h + 3 * gap << "'>\n";
    // floor plans: cells + room outlines
    for (size_t f = 0; f < sc.floors.size(); ++f)
        svg << "<text x='" << xoff[f] << "' y='" << gap / 2 << "' font-size='14'>"
            << sc.floors[f].id << "</text>\n";
    for (int c = 0; c < sc.num_cells; ++c)
        svg << "<rect x='" << cx(c) - cell_px / 2 << "' y='" << cy(c) - cell_px / 2 << "' width='"
            << cell_px << "' height='" << cell_px
            << "' fill='none' stroke='#ccc' stroke-width='0.5'/>\n";
    for (const auto& r : sc.rooms) {
        if (r.cells.empty()) continue;
        int minx = 1 << 30, miny = 1 << 30, maxx = 0, maxy = 0;
        for (int c : r.cells) {
            minx = std::min(minx, cx(c) - cell_px / 2);
            maxx = std::max(maxx, cx(c) + cell_px / 2);
            miny = std::min(miny, cy(c) - cell_px / 2);
            maxy = std::max(maxy, cy(c) + cell_px / 2);
        }
        svg << "<rect x='" << minx << "' y='" << miny << "' width='" << maxx - minx
            << "' height='" << maxy - miny << "' fill='none' stroke='#333' stroke-width='1.5'/>\n";
    }

    // positions of the abstract states per step
    Play abs = abstract_play(cg.hrg.lay, trace, layer);
    auto pos_of = [&](SysState y, int& px, int& py) {
        if (layer == 0) {
            int cell = cg.cell_of_sys(y);
            px = cx(cell);
            py = cy(cell);
        } else if (layer == 1) {
            room_center(y, px, py);
        } else {
            // floor marker: top-left corner area
            px = xoff[y] + cell_px;
            py = gap;
        }
    };
    std::vector<char> projected(abs.size(), 0);
    for (int k : bundle.kappa[layer]) projected[k] = 1;

    svg << "<polyline fill='none' stroke='#777' stroke-width='1' points='";
    for (auto& [x, y] : abs) {
        int px, py;
        pos_of(y, px, py);
        svg << px << "," << py << " ";
    }
    svg << "'/>\n";
    for (size_t k = 0; k < abs.size(); ++k) {
        int px, py;
        pos_of(abs[k].second, px, py);
        std::string fill = projected[k] ? "#444" : "none";
        if (k == 0) fill = "#bbb";
        if (k + 1 == abs.size()) fill = "#000";
        svg << "<circle cx='" << px << "' cy='" << py << "' r='5' fill='" << fill
            << "' stroke='#000'/>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace hgame
