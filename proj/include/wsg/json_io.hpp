#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "wsg/evaluation.hpp"
#include "wsg/game.hpp"
#include "wsg/numeric.hpp"

namespace wsg {

// Insertion-ordered JSON keeps output key order stable across runs.
using Json = nlohmann::ordered_json;

inline Json to_json(const Evaluation& theta) {
    Json j;
    j["head"] = Json::array();
    for (std::int64_t m = 0; m < theta.head_size(); ++m)
        j["head"].push_back(theta.head()[static_cast<std::size_t>(m)]);
    if (theta.tail()) {
        j["tail"] = Json{{"a", theta.tail()->a}, {"rho", theta.tail()->rho}};
    } else {
        j["tail"] = nullptr;
    }
    return j;
}

inline Evaluation evaluation_from_json(const Json& j) {
    if (!j.is_object()) throw std::invalid_argument("evaluation json: expected an object");
    std::vector<double> head;
    if (j.contains("head")) {
        if (!j["head"].is_array()) throw std::invalid_argument("evaluation json: head must be an array");
        for (const auto& v : j["head"]) head.push_back(v.get<double>());
    }
    std::optional<GeometricTail> tail;
    if (j.contains("tail") && !j["tail"].is_null()) {
        const auto& t = j["tail"];
        tail = GeometricTail{t.at("a").get<double>(), t.at("rho").get<double>()};
    }
    return Evaluation::from_parts(std::move(head), tail);
}

inline Json to_json(const GameSpec& g) {
    Json j;
    j["states"] = g.states;
    j["nI"] = g.nI;
    j["nJ"] = g.nJ;
    j["payoff"] = g.payoff;
    j["transition"] = g.transition;
    return j;
}

inline GameSpec game_from_json(const Json& j) {
    GameSpec g;
    g.states = j.at("states").get<std::vector<std::string>>();
    g.nI = j.at("nI").get<int>();
    g.nJ = j.at("nJ").get<int>();
    g.payoff = j.at("payoff").get<std::vector<std::vector<std::vector<double>>>>();
    g.transition = j.at("transition").get<std::vector<std::vector<std::vector<std::vector<double>>>>>();
    return validate(std::move(g));
}

inline Json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open file: " + path);
    Json j;
    in >> j;
    return j;
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::invalid_argument("cannot write file: " + path);
    out << text;
}

// dump with a trailing newline; double formatting inside nlohmann is already
// shortest round-trip, matching format_double.
inline std::string dump_stable(const Json& j) { return j.dump(2) + "\n"; }

// Evaluation descriptors accepted on the command line and in configs:
//   "n_stage:N" or "n:N"        uniform weights over N stages
//   "discounted:L" or "lambda:L" geometric weights with parameter L
//   inline JSON object           {"kind": ..., ...} or {"head": ..., "tail": ...}
//   a file path                  JSON file with either of the object forms
// Object kinds: n_stage {n}, discounted {lambda}, pwc {levels, breakpoints},
// pwd {pieces: [{a, lambda, start}]}, raw {head, tail}.
inline Evaluation evaluation_from_object(const Json& j) {
    if (!j.contains("kind")) return evaluation_from_json(j);
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "n_stage") return Evaluation::n_stage(j.at("n").get<std::int64_t>());
    if (kind == "discounted") return Evaluation::discounted(j.at("lambda").get<double>());
    if (kind == "pwc")
        return Evaluation::piecewise_constant(j.at("levels").get<std::vector<double>>(),
                                              j.at("breakpoints").get<std::vector<std::int64_t>>());
    if (kind == "pwd") {
        std::vector<Evaluation::DiscountedPiece> pieces;
        for (const auto& p : j.at("pieces"))
            pieces.push_back({p.at("a").get<double>(), p.at("lambda").get<double>(),
                              p.at("start").get<std::int64_t>()});
        return Evaluation::piecewise_discounted(pieces);
    }
    if (kind == "raw") return evaluation_from_json(j);
    throw std::invalid_argument("unknown evaluation kind: " + kind);
}

inline Evaluation parse_evaluation(const std::string& descriptor) {
    const auto colon = descriptor.find(':');
    if (colon != std::string::npos && descriptor.find('{') == std::string::npos &&
        descriptor.find('/') == std::string::npos) {
        const std::string key = descriptor.substr(0, colon);
        const std::string arg = descriptor.substr(colon + 1);
        try {
            if (key == "n_stage" || key == "n") return Evaluation::n_stage(std::stoll(arg));
            if (key == "discounted" || key == "lambda") return Evaluation::discounted(std::stod(arg));
        } catch (const std::logic_error&) {
            throw std::invalid_argument("bad evaluation descriptor: " + descriptor);
        }
        throw std::invalid_argument("unknown evaluation shorthand: " + key);
    }
    if (!descriptor.empty() && descriptor.front() == '{')
        return evaluation_from_object(Json::parse(descriptor));
    return evaluation_from_object(load_json_file(descriptor));
}

// Named corpus entry or a JSON game file.
inline GameSpec load_game(const std::string& name_or_path) {
    try {
        return corpus(name_or_path);
    } catch (const std::invalid_argument&) {
    }
    return game_from_json(load_json_file(name_or_path));
}

}  // namespace wsg
