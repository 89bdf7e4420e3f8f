#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hgame {

// Dense integer indices into per-layer state tables. Labels live in side tables.
using EnvState = int;
using SysState = int;
using Layer = int;

using StatePair = std::pair<EnvState, SysState>;
using Play = std::vector<StatePair>;

enum class Errc {
    InitNotAPlay,
    LetterOutOfAlphabet,
    ModeMismatch,
    LayerOutOfRange,
    RangeViolation,
    EmptyContext,
    NotAPostContext,
    AlphabetMismatch,
    UndefinedCase,
    TraceNotAPlay,
    UnsupportedObjective,
    EnvMoveIllegal,
    SchemaError,
    GeometryError,
    StateBlowup,
    BadArgument,
};

inline const char* errc_name(Errc c) {
    switch (c) {
    case Errc::InitNotAPlay: return "InitNotAPlay";
    case Errc::LetterOutOfAlphabet: return "LetterOutOfAlphabet";
    case Errc::ModeMismatch: return "ModeMismatch";
    case Errc::LayerOutOfRange: return "LayerOutOfRange";
    case Errc::RangeViolation: return "RangeViolation";
    case Errc::EmptyContext: return "EmptyContext";
    case Errc::NotAPostContext: return "NotAPostContext";
    case Errc::AlphabetMismatch: return "AlphabetMismatch";
    case Errc::UndefinedCase: return "UndefinedCase";
    case Errc::TraceNotAPlay: return "TraceNotAPlay";
    case Errc::UnsupportedObjective: return "UnsupportedObjective";
    case Errc::EnvMoveIllegal: return "EnvMoveIllegal";
    case Errc::SchemaError: return "SchemaError";
    case Errc::GeometryError: return "GeometryError";
    case Errc::StateBlowup: return "StateBlowup";
    case Errc::BadArgument: return "BadArgument";
    }
    return "?";
}

class Error : public std::runtime_error {
public:
    Errc code;
    Error(Errc c, const std::string& msg)
        : std::runtime_error(std::string(errc_name(c)) + ": " + msg), code(c) {}
};

[[noreturn]] inline void raise(Errc c, const std::string& msg) { throw Error(c, msg); }

inline void require(bool cond, Errc c, const std::string& msg) {
    if (!cond) raise(c, msg);
}

// Seeded RNG used by env profiles and test generators; seeds are recorded in
// trace headers so runs replay byte-identically.
using Rng = std::mt19937_64;

inline bool contains(const std::vector<int>& sorted, int v) {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), v);
    return it != sorted.end() && *it == v;
}

inline void sort_unique(std::vector<int>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace hgame
