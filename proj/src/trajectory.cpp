#include "avua/trajectory.hpp"

#include "avua/error.hpp"

namespace avua {

std::string to_string(TerminatedBy t) {
    switch (t) {
        case TerminatedBy::final_answer: return "final_answer";
        case TerminatedBy::step_budget: return "step_budget";
        case TerminatedBy::parse_abort: return "parse_abort";
        case TerminatedBy::tool_fatal: return "tool_fatal";
    }
    return "step_budget";
}

TerminatedBy terminated_by_from_string(const std::string& s) {
    if (s == "final_answer") return TerminatedBy::final_answer;
    if (s == "step_budget") return TerminatedBy::step_budget;
    if (s == "parse_abort") return TerminatedBy::parse_abort;
    if (s == "tool_fatal") return TerminatedBy::tool_fatal;
    throw Error("unknown termination '" + s + "'");
}

std::string Trajectory::render() const {
    std::string out;
    for (const auto& s : steps) {
        out += "Thought: " + s.thought + "\n";
        out += "Action: " + s.action + "\n";
        out += "Action Input: " + s.action_input.raw + "\n";
        out += "Observation: " + s.observation + "\n";
    }
    if (final_answer) out += "Final Answer: " + *final_answer + "\n";
    return out;
}

Json to_json(const ActionInput& in) {
    Json j{{"raw", in.raw}, {"frame_indices", in.frame_indices}};
    j["query"] = in.query ? Json(*in.query) : Json(nullptr);
    if (!in.warnings.empty()) j["warnings"] = in.warnings;
    return j;
}

Json to_json(const FrameCharge& c) {
    return Json{{"anchor", c.anchor}, {"frames", c.frames}, {"cache_hit", c.cache_hit}};
}

Json to_json(const Step& s) {
    Json charges = Json::array();
    for (const auto& c : s.charges) charges.push_back(to_json(c));
    return Json{{"index", s.index},
                {"thought", s.thought},
                {"action", s.action},
                {"action_input", to_json(s.action_input)},
                {"observation", s.observation},
                {"frames_charged", s.frames_charged},
                {"charges", charges},
                {"cache_hit", s.cache_hit}};
}

Json to_json(const Trajectory& t) {
    Json steps = Json::array();
    for (const auto& s : t.steps) steps.push_back(to_json(s));
    return Json{{"steps", steps},
                {"final_answer", t.final_answer ? Json(*t.final_answer) : Json(nullptr)},
                {"terminated_by", to_string(t.terminated_by)}};
}

ActionInput action_input_from_json(const Json& j) {
    ActionInput in;
    in.raw = j.value("raw", "");
    in.frame_indices = j.value("frame_indices", std::vector<int>{});
    if (j.contains("query") && !j["query"].is_null()) in.query = j["query"].get<std::string>();
    in.warnings = j.value("warnings", std::vector<std::string>{});
    return in;
}

Step step_from_json(const Json& j) {
    Step s;
    s.index = j.at("index").get<int>();
    s.thought = j.value("thought", "");
    s.action = j.value("action", "");
    s.action_input = action_input_from_json(j.at("action_input"));
    s.observation = j.value("observation", "");
    s.frames_charged = j.value("frames_charged", std::vector<int>{});
    s.cache_hit = j.value("cache_hit", false);
    for (const auto& c : j.value("charges", Json::array())) {
        s.charges.push_back(FrameCharge{c.at("anchor").get<int>(), c.at("frames").get<std::vector<int>>(),
                                        c.value("cache_hit", false)});
    }
    return s;
}

Trajectory trajectory_from_json(const Json& j) {
    Trajectory t;
    for (const auto& s : j.at("steps")) t.steps.push_back(step_from_json(s));
    if (!j.at("final_answer").is_null()) t.final_answer = j["final_answer"].get<std::string>();
    t.terminated_by = terminated_by_from_string(j.at("terminated_by").get<std::string>());
    return t;
}

}  // namespace avua
