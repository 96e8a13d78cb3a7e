#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "avua/llm_gateway.hpp"
#include "avua/memory_store.hpp"
#include "avua/policy.hpp"
#include "avua/prompt_catalog.hpp"
#include "avua/reflection.hpp"
#include "avua/sampler.hpp"
#include "avua/toolbox.hpp"
#include "avua/trace.hpp"
#include "avua/trajectory.hpp"
#include "avua/video.hpp"

namespace avua {

struct AblationConfig {
    bool use_memory = true;
    bool use_evaluator = true;
    bool use_sampler = true;
    bool use_refiner = true;
    bool react_only = false;

    // react_only switches every other component off.
    AblationConfig normalized() const;
    std::string name() const;

    // "ours", "w/o-memory", "w/o-evaluator", "w/o-sampler", "w/o-refiner",
    // "react-only". Throws ConfigError on anything else.
    static AblationConfig from_name(std::string_view name);
    static std::vector<std::string> matrix_rows();

    friend bool operator==(const AblationConfig&, const AblationConfig&) = default;
};

Json to_json(const AblationConfig& cfg);

struct StepHeader {
    std::string thought;
    std::string action;
    std::string action_input;
};

struct FinalAnswer {
    std::string text;
};

using ParsedStep = std::variant<StepHeader, FinalAnswer>;

// Accepts labelled Thought/Action/Action Input blocks in any order or a
// "Final Answer:" block. Labels are case-insensitive and may be indented.
// Throws StepParseFailure when neither shape is present.
ParsedStep parse_step(std::string_view text);

// "Option 3", "option 3", "(3)", "Option 3:" all give 3.
std::optional<int> normalize_mcq_answer(std::string_view text);
std::string canonical_option(int index);
// "[start,end]" frame window; reversed bounds are swapped.
std::optional<std::pair<int, int>> parse_frame_window(std::string_view text);

struct PlannerOptions {
    int max_steps = 15;
    int max_trials = 2;
    bool inherit_frame_cache = true;
    bool memory_on_first_trial = true;
    int memory_k = 3;
    RetrieveOptions retrieve;
    std::optional<int> eval_confidence_gate;
    std::size_t sampler_cap = 16;
    std::size_t max_review_chars = 8000;
    DecodingParams decoding;
};

struct TrialRecord {
    std::optional<Policy> policy;
    Trajectory trajectory;
    std::optional<Evaluation> evaluation;
    std::optional<Refinement> refinement;
};

struct EpisodeResult {
    std::vector<TrialRecord> trials;
    std::string answer;
    int frames_accessed = 0;
    int distinct_frames_accessed = 0;
    double ratio = 0.0;
    std::vector<int> distinct_frames;
    std::string transcript_ref;
};

Json to_json(const EpisodeResult& r);

// Everything one episode needs besides the question. The backend behind
// `llm`, the registry and the long-term memory may be shared; the
// transcript, trace and ledgers are per episode.
struct EpisodeContext {
    LlmClient& llm;
    ToolRegistry& tools;
    LongTermMemory* memory = nullptr;
    TraceWriter* trace = nullptr;
    std::string config_digest;
};

inline constexpr const char* kFormatReminder =
    "Your previous reply could not be parsed. Reply with either\n"
    "Thought: ...\nAction: <tool name>\nAction Input: <frames and query>\n"
    "or\nFinal Answer: <answer>";

class Agent {
public:
    explicit Agent(const PromptCatalog& catalog, PlannerOptions opts = {});

    PromptBundle render_agent_prompt(const Question& q, const VideoMeta& meta,
                                     const ToolRegistry& tools, const Policy* pi,
                                     const Trajectory& tau, bool with_reminder) const;

    Trajectory run_trial(EpisodeContext& ctx, const Question& q, const VideoMeta& meta,
                         const Policy* pi, const AblationConfig& cfg, int budget,
                         FrameLedger& ledger, ShortTermCache& cache, int trial = 1) const;

    // Throws EpisodeAbort when every trial ends in parse_abort.
    EpisodeResult run_episode(EpisodeContext& ctx, const Question& q, const VideoMeta& meta,
                              const AblationConfig& cfg) const;

    const PlannerOptions& options() const { return opts_; }

private:
    const PromptCatalog* catalog_;
    PlannerOptions opts_;
    PolicyEngine policy_engine_;
    FrameSampler sampler_;
    Evaluator evaluator_;
    Refiner refiner_;
};

}  // namespace avua
