#pragma once

#include <optional>
#include <string>
#include <vector>

#include "avua/text_util.hpp"

namespace avua {

// Frames the agent asked for plus any free-text query that followed them.
struct ActionInput {
    std::vector<int> frame_indices;
    std::optional<std::string> query;
    std::string raw;
    // Clamp notices produced while parsing; surfaced in the observation.
    std::vector<std::string> warnings;

    friend bool operator==(const ActionInput&, const ActionInput&) = default;
};

// Accounting for one requested index inside a tool call.
struct FrameCharge {
    int anchor = 0;
    std::vector<int> frames;
    bool cache_hit = false;

    friend bool operator==(const FrameCharge&, const FrameCharge&) = default;
};

struct Step {
    int index = 1;
    std::string thought;
    std::string action;
    ActionInput action_input;
    std::string observation;
    std::vector<int> frames_charged;
    std::vector<FrameCharge> charges;
    bool cache_hit = false;

    friend bool operator==(const Step&, const Step&) = default;
};

enum class TerminatedBy { final_answer, step_budget, parse_abort, tool_fatal };

std::string to_string(TerminatedBy t);
TerminatedBy terminated_by_from_string(const std::string& s);

struct Trajectory {
    std::vector<Step> steps;
    std::optional<std::string> final_answer;
    TerminatedBy terminated_by = TerminatedBy::step_budget;

    // Thought/Action/Action Input/Observation blocks, as the agent sees them.
    std::string render() const;
};

Json to_json(const ActionInput& in);
Json to_json(const FrameCharge& c);
Json to_json(const Step& s);
Json to_json(const Trajectory& t);
ActionInput action_input_from_json(const Json& j);
Step step_from_json(const Json& j);
Trajectory trajectory_from_json(const Json& j);

}  // namespace avua
